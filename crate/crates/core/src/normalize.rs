//! Per-set similarity normalization of frame sets.
//!
//! Each set is shifted so its locations have zero mean and scaled so their
//! root-mean-square norm is one. The same scale divides the shape blocks,
//! which keeps frames co-variant. Fitted parameters are mapped back with
//! [`Normalization::denormalize`].

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::frame::{FrameVec6, RelativeTransform};
use crate::mixture::{BlockCovariance, FrameSet};
use crate::nonrigid::NonRigidParams;
use crate::transform::TransformParams;

/// Scales below this are treated as a single location and left unscaled.
const MIN_SCALE: f64 = 1e-12;

/// `z ↦ (z − mu) / scale` on locations, `v ↦ v / scale` on shape columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub mu: [f64; 2],
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            mu: [0.0, 0.0],
            scale: 1.0,
        }
    }

    pub fn fit(set: &FrameSet) -> Self {
        let n = set.count() as f64;
        let mu = set.iter().map(|f| f.tdot).sum::<Vector2<f64>>() / n;
        let ms = set.iter().map(|f| (f.tdot - mu).norm_squared()).sum::<f64>() / n;
        let scale = ms.sqrt();
        Self {
            mu: [mu.x, mu.y],
            scale: if scale > MIN_SCALE * (1.0 + mu.norm()) {
                scale
            } else {
                1.0
            },
        }
    }

    fn mu(&self) -> Vector2<f64> {
        Vector2::from(self.mu)
    }

    pub fn apply(&self, v: &FrameVec6) -> FrameVec6 {
        FrameVec6 {
            dot: v.dot / self.scale,
            ddot: v.ddot / self.scale,
            tdot: (v.tdot - self.mu()) / self.scale,
        }
    }

    pub fn apply_set(&self, set: &FrameSet) -> FrameSet {
        FrameSet::new(set.iter().map(|v| self.apply(v)).collect()).expect("non-empty set")
    }
}

/// Normalizations of a data/model pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub data: Similarity,
    pub model: Similarity,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            data: Similarity::identity(),
            model: Similarity::identity(),
        }
    }

    pub fn fit(data: &FrameSet, model: &FrameSet) -> Self {
        Self {
            data: Similarity::fit(data),
            model: Similarity::fit(model),
        }
    }

    /// `(cx / cy, μx − (cx / cy) μy)`: maps normalized-model units back.
    fn ratio(&self) -> f64 {
        self.data.scale / self.model.scale
    }

    /// Lifts a global map `x' = B' y' + t'` between normalized sets to the
    /// input units: `B = (cx/cy) B'`, `t = μx + cx t' − B μy`.
    pub fn lift(&self, rel: &RelativeTransform) -> RelativeTransform {
        let b = self.ratio() * rel.b;
        let t = self.data.mu() + self.data.scale * rel.t - b * self.model.mu();
        RelativeTransform::new(b, t)
    }

    /// Variances scale with the squared data scale.
    pub fn denormalize_covariance(&self, cov: &BlockCovariance) -> BlockCovariance {
        let c2 = self.data.scale * self.data.scale;
        BlockCovariance {
            sig_dot2: cov.sig_dot2 * c2,
            sig_ddot2: cov.sig_ddot2 * c2,
            sig_tdot2: cov.sig_tdot2 * c2,
        }
    }

    /// Maps parameters fitted between the normalized sets back to the input
    /// units. `model` is the input (unnormalized) model set.
    ///
    /// Rigid: `s = s' cx/cy`. Non-rigid: the field gains the global part
    /// `lift(I, 0)`, coefficients scale by `cx`, `β` by `cy²` (so kernels on
    /// input coordinates equal the normalized ones) and `λ` by `1/cx²` (so
    /// the penalty and the coefficient system are unchanged).
    pub fn denormalize(&self, params: &TransformParams, model: &FrameSet) -> TransformParams {
        match params {
            TransformParams::Rigid(p) => {
                let lifted = self.lift(&p.to_relative());
                TransformParams::Rigid(crate::rigid::RigidParams {
                    s: p.s * self.ratio(),
                    r: p.r,
                    t: lifted.t,
                })
            }
            TransformParams::Affine(p) => {
                let lifted = self.lift(&p.to_relative());
                TransformParams::Affine(crate::affine::AffineParams {
                    b: lifted.b,
                    t: lifted.t,
                })
            }
            TransformParams::NonRigid(p) => {
                let cx = self.data.scale;
                let cy = self.model.scale;
                let mut out = NonRigidParams::new(model, p.beta * cy * cy, p.lambda / (cx * cx), p.kernel_mode)
                    .expect("positive scaled beta and lambda");
                out.w_dot = &p.w_dot * cx;
                out.w_ddot = &p.w_ddot * cx;
                out.w_tdot = &p.w_tdot * cx;
                out.global = self.lift(&RelativeTransform::new(Matrix2::identity(), Vector2::zeros()));
                TransformParams::NonRigid(out)
            }
        }
    }
}
