//! Affine M-step: one unconstrained 2×2 map on all blocks plus translation.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::RelativeTransform;
use crate::linalg::sym_eigenvalues;
use crate::mixture::{BlockCovariance, FrameSet, MixtureConfig, PosteriorMatrix};
use crate::moments::{transform_set, update_variances, BlockMoments};

/// Gram matrices with a larger condition number get a ridge.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Ridge size relative to `tr(Gram)`.
pub const RIDGE_FACTOR: f64 = 1e-9;
/// `|det(b)|` below this is reported as a near-singular solution.
pub const MIN_AFFINE_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub b: Matrix2<f64>,
    pub t: Vector2<f64>,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self {
            b: Matrix2::identity(),
            t: Vector2::zeros(),
        }
    }
}

impl AffineParams {
    pub fn to_relative(&self) -> RelativeTransform {
        RelativeTransform::new(self.b, self.t)
    }
}

/// Solves `B · Gram = A` for the 2×2 map, adding `ε·I` to an ill-conditioned Gram.
/// Returns the map and whether the ridge was used.
fn solve_map(cross: &Matrix2<f64>, gram: &Matrix2<f64>) -> (Matrix2<f64>, bool) {
    let (hi, lo) = sym_eigenvalues(gram);
    let ill = !(lo > 0.0) || hi / lo > MAX_GRAM_CONDITION;
    let g = if ill {
        let eps = RIDGE_FACTOR * gram.trace().max(f64::MIN_POSITIVE);
        gram + Matrix2::identity() * eps
    } else {
        *gram
    };
    let inv = g.try_inverse().unwrap_or_else(Matrix2::identity);
    (cross * inv, ill)
}

/// One affine M-step for fixed responsibilities.
pub fn affine_m_step(
    data: &FrameSet,
    model: &FrameSet,
    post: &PosteriorMatrix,
    cov: &BlockCovariance,
    cfg: &MixtureConfig,
) -> Result<(AffineParams, BlockCovariance)> {
    let mom = BlockMoments::compute(data, model, post, cov, cfg)?;
    let (b, ridged) = solve_map(&mom.cross, &mom.gram);
    if ridged {
        log::debug!("affine M-step: ill-conditioned Gram, ridge applied");
    }
    if b.determinant().abs() < MIN_AFFINE_DET {
        log::warn!("affine M-step: near-singular map, det = {:e}", b.determinant());
    }
    let t = mom.mu_x - b * mom.mu_y;
    let params = AffineParams { b, t };
    let transformed = transform_set(model, &params.to_relative());
    let new_cov = update_variances(data, &transformed, post, cov, cfg);
    Ok((params, new_cov))
}
