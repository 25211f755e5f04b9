//! Rigid (similarity) M-step: scaled rotation `s·r` shared by all blocks,
//! translation on the location block only.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::RelativeTransform;
use crate::linalg::optimal_rotation;
use crate::mixture::{BlockCovariance, FrameSet, MixtureConfig, PosteriorMatrix};
use crate::moments::{transform_set, update_variances, BlockMoments};

/// Lower bound keeping the scale strictly positive.
pub const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidParams {
    pub s: f64,
    pub r: Matrix2<f64>,
    pub t: Vector2<f64>,
}

impl Default for RigidParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            r: Matrix2::identity(),
            t: Vector2::zeros(),
        }
    }
}

impl RigidParams {
    pub fn to_relative(&self) -> RelativeTransform {
        RelativeTransform::new(self.s * self.r, self.t)
    }

    pub fn angle(&self) -> f64 {
        self.r.m21.atan2(self.r.m11)
    }
}

/// One rigid M-step for fixed responsibilities.
///
/// Rotation comes from the SVD of the whitened cross-covariance with the
/// determinant correction, then scale, translation and per-block variances
/// in closed form.
pub fn rigid_m_step(
    data: &FrameSet,
    model: &FrameSet,
    post: &PosteriorMatrix,
    cov: &BlockCovariance,
    cfg: &MixtureConfig,
) -> Result<(RigidParams, BlockCovariance)> {
    let mom = BlockMoments::compute(data, model, post, cov, cfg)?;
    let r = optimal_rotation(&mom.cross);
    let denom = mom.gram.trace();
    let s = if denom > 0.0 {
        ((mom.cross.transpose() * r).trace() / denom).max(MIN_SCALE)
    } else {
        1.0
    };
    let t = mom.mu_x - s * r * mom.mu_y;
    let params = RigidParams { s, r, t };
    let transformed = transform_set(model, &params.to_relative());
    let new_cov = update_variances(data, &transformed, post, cov, cfg);
    Ok((params, new_cov))
}
