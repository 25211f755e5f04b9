//! Weighted second moments shared by the rigid and affine M-steps.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::Result;
use crate::frame::{Block, FrameVec6, RelativeTransform};
use crate::mixture::{weighted_block_residual, weighted_mean, BlockCovariance, FrameSet, MixtureConfig, PosteriorMatrix};

/// Whitened cross-covariance `A = Σ_b X′_b Pᵀ Y′_bᵀ` and model Gram
/// `Σ_b Y′_b d(P1) Y′_bᵀ`, with the location block centered on the weighted
/// means.
pub(crate) struct BlockMoments {
    pub mu_x: Vector2<f64>,
    pub mu_y: Vector2<f64>,
    pub cross: Matrix2<f64>,
    pub gram: Matrix2<f64>,
}

impl BlockMoments {
    pub fn compute(
        data: &FrameSet,
        model: &FrameSet,
        post: &PosteriorMatrix,
        cov: &BlockCovariance,
        cfg: &MixtureConfig,
    ) -> Result<Self> {
        post.check_shape(data, model)?;
        let n_p = post.n_p();
        cfg.check_inlier_mass(n_p, data.count())?;
        let row = post.row_sums();
        let col = post.col_sums();
        let mu_x = weighted_mean(&data.block_matrix(Block::Tdot), &col, n_p);
        let mu_y = weighted_mean(&model.block_matrix(Block::Tdot), &row, n_p);

        let mut cross = Matrix2::zeros();
        let mut gram = Matrix2::zeros();
        for &b in cfg.active_blocks() {
            let w = 1.0 / cov.get(b);
            let mut xb = data.block_matrix(b);
            let mut yb = model.block_matrix(b);
            if b == Block::Tdot {
                for mut c in xb.column_iter_mut() {
                    c -= mu_x;
                }
                for mut c in yb.column_iter_mut() {
                    c -= mu_y;
                }
            }
            // (Xb Pᵀ) is 2×M; then times Ybᵀ.
            let xpt = &xb * post.p.transpose();
            cross += w * (xpt * yb.transpose());
            gram += w * weighted_outer(&yb, &row);
        }
        Ok(Self {
            mu_x,
            mu_y,
            cross,
            gram,
        })
    }
}

/// `Y d(w) Yᵀ` for a 2×K point matrix.
fn weighted_outer(y: &nalgebra::Matrix2xX<f64>, w: &DVector<f64>) -> Matrix2<f64> {
    let mut out = Matrix2::zeros();
    for (c, &wi) in y.column_iter().zip(w.iter()) {
        out += wi * c * c.transpose();
    }
    out
}

pub(crate) fn transform_set(model: &FrameSet, t: &RelativeTransform) -> FrameSet {
    let frames: Vec<FrameVec6> = model.iter().map(|v| t.apply(v)).collect();
    FrameSet::new(frames).expect("non-empty input set")
}

/// Per-block variance update `Σ pₘₙ ‖xₙ − tₘ‖² / (2 N_p)` for the active
/// blocks, floored. Inactive blocks keep their previous value.
pub(crate) fn update_variances(
    data: &FrameSet,
    transformed: &FrameSet,
    post: &PosteriorMatrix,
    prev: &BlockCovariance,
    cfg: &MixtureConfig,
) -> BlockCovariance {
    let n_p = post.n_p();
    let mut cov = *prev;
    for &b in cfg.active_blocks() {
        let r = weighted_block_residual(data, transformed, post, b);
        cov.set(b, (r / (2.0 * n_p)).max(cfg.var_floor));
    }
    cov
}
