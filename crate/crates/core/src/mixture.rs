//! Gaussian mixture machinery shared by every transformation model.
//!
//! Model frames act as the centroids of an isotropic-per-block Gaussian
//! mixture in 6-D, data frames as observations, and a uniform component of
//! weight `omega` absorbs outliers. The covariance is block diagonal with one
//! variance per 2-D block, so `|Σ|^{1/2} = σ̇² σ̈² σ⃛²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2xX, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{RegError, Result};
use crate::frame::{Block, FrameVec6};

/// Blocks used when the full frame participates.
const FULL_BLOCKS: [Block; 3] = Block::ALL;
/// Blocks used by the location-only ablation.
const LOCATION_BLOCKS: [Block; 1] = [Block::Tdot];

/// An ordered, non-empty set of vectorized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    frames: Vec<FrameVec6>,
}

impl FrameSet {
    pub fn new(frames: Vec<FrameVec6>) -> Result<Self> {
        if frames.is_empty() {
            return Err(RegError::EmptySet("frame"));
        }
        Ok(Self { frames })
    }

    pub fn from_frames<'a, I>(frames: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a crate::frame::FeatureFrame>,
    {
        Self::new(frames.into_iter().map(|f| f.to_vec6()).collect())
    }

    pub fn count(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[FrameVec6] {
        &self.frames
    }

    pub fn get(&self, i: usize) -> &FrameVec6 {
        &self.frames[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FrameVec6> {
        self.frames.iter()
    }

    pub fn into_inner(self) -> Vec<FrameVec6> {
        self.frames
    }

    /// The 2×count matrix holding one block of every frame as columns.
    pub fn block_matrix(&self, b: Block) -> Matrix2xX<f64> {
        Matrix2xX::from_iterator(
            self.frames.len(),
            self.frames.iter().flat_map(|f| {
                let v = f.block(b);
                [v.x, v.y]
            }),
        )
    }
}

/// Isotropic variance per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCovariance {
    pub sig_dot2: f64,
    pub sig_ddot2: f64,
    pub sig_tdot2: f64,
}

impl BlockCovariance {
    pub fn uniform(v: f64) -> Self {
        Self {
            sig_dot2: v,
            sig_ddot2: v,
            sig_tdot2: v,
        }
    }

    #[inline]
    pub fn get(&self, b: Block) -> f64 {
        match b {
            Block::Dot => self.sig_dot2,
            Block::Ddot => self.sig_ddot2,
            Block::Tdot => self.sig_tdot2,
        }
    }

    pub fn set(&mut self, b: Block, v: f64) {
        match b {
            Block::Dot => self.sig_dot2 = v,
            Block::Ddot => self.sig_ddot2 = v,
            Block::Tdot => self.sig_tdot2 = v,
        }
    }

    /// `log |Σ|^{1/2}` restricted to `blocks`, i.e. the sum of `ln σ²`.
    pub fn log_sqrt_det(&self, blocks: &[Block]) -> f64 {
        blocks.iter().map(|&b| self.get(b).ln()).sum()
    }
}

/// Responsibilities `p[m, n]` of model frame `m` for data frame `n`, with the
/// remaining mass of each data frame assigned to the outlier component.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    pub p: DMatrix<f64>,
    pub outlier_mass: DVector<f64>,
}

impl PosteriorMatrix {
    /// Identity correspondence for `m == n` sets; no outlier mass.
    pub fn identity(n: usize) -> Self {
        Self {
            p: DMatrix::identity(n, n),
            outlier_mass: DVector::zeros(n),
        }
    }

    pub fn model_count(&self) -> usize {
        self.p.nrows()
    }

    pub fn data_count(&self) -> usize {
        self.p.ncols()
    }

    /// Total soft inlier mass `1ᵀP1`.
    pub fn n_p(&self) -> f64 {
        self.p.sum()
    }

    /// `P1`: mass gathered by each model frame (length M).
    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.p.nrows(), self.p.row_iter().map(|r| r.sum()))
    }

    /// `Pᵀ1`: inlier mass of each data frame (length N).
    pub fn col_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.p.ncols(), self.p.column_iter().map(|c| c.sum()))
    }

    pub(crate) fn check_shape(&self, data: &FrameSet, model: &FrameSet) -> Result<()> {
        if self.p.nrows() != model.count()
            || self.p.ncols() != data.count()
            || self.outlier_mass.len() != data.count()
        {
            return Err(RegError::DimensionMismatch(format!(
                "posterior is {}x{} (outlier {}), sets are M={} N={}",
                self.p.nrows(),
                self.p.ncols(),
                self.outlier_mass.len(),
                model.count(),
                data.count()
            )));
        }
        Ok(())
    }
}

/// Outlier weight and numerical safeguards for the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub omega: f64,
    pub omega_bounds: (f64, f64),
    pub var_floor: f64,
    /// Use only the location block (classic coordinate-only registration).
    pub location_only: bool,
    /// N_p below `min_inlier_fraction · N` is treated as total collapse.
    pub min_inlier_fraction: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            omega: 0.1,
            omega_bounds: (1e-4, 1.0 - 1e-4),
            var_floor: 1e-10,
            location_only: false,
            min_inlier_fraction: 1e-8,
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.omega_bounds;
        if !(0.0 < lo && lo <= self.omega && self.omega <= hi && hi < 1.0) {
            return Err(RegError::InvalidConfig(format!(
                "need 0 < {lo} <= omega {} <= {hi} < 1",
                self.omega
            )));
        }
        if !(self.var_floor > 0.0) {
            return Err(RegError::InvalidConfig("var_floor must be positive".into()));
        }
        if !(self.min_inlier_fraction >= 0.0) {
            return Err(RegError::InvalidConfig(
                "min_inlier_fraction must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// The blocks that take part in distances, solves and variance updates.
    pub fn active_blocks(&self) -> &'static [Block] {
        if self.location_only {
            &LOCATION_BLOCKS
        } else {
            &FULL_BLOCKS
        }
    }

    /// Effective dimension D of the mixture.
    pub fn dim(&self) -> usize {
        2 * self.active_blocks().len()
    }

    pub(crate) fn check_inlier_mass(&self, n_p: f64, n: usize) -> Result<()> {
        let min = self.min_inlier_fraction * n as f64;
        if !(n_p > min) || n_p <= 0.0 {
            return Err(RegError::DegenerateResponsibility { n_p, min });
        }
        Ok(())
    }
}

/// Mahalanobis distance of a data frame to a transformed model frame.
#[inline]
pub(crate) fn block_distance(
    x: &FrameVec6,
    t: &FrameVec6,
    cov: &BlockCovariance,
    blocks: &[Block],
) -> f64 {
    blocks
        .iter()
        .map(|&b| (x.block(b) - t.block(b)).norm_squared() / cov.get(b))
        .sum()
}

/// Initial per-block variance `1/(2NM) Σ ‖x_b − y_b‖²`, floored.
pub fn init_covariance(data: &FrameSet, model: &FrameSet, var_floor: f64) -> BlockCovariance {
    let n = data.count();
    let m = model.count();
    let mut cov = BlockCovariance::uniform(var_floor);
    for b in Block::ALL {
        // Σₙₘ ‖xₙ − yₘ‖² = M Σ‖xₙ‖² + N Σ‖yₘ‖² − 2 (Σxₙ)·(Σyₘ) is cancellation
        // prone; the direct double sum is cheap enough.
        let mut sum = 0.0;
        for x in data.iter() {
            let xb = x.block(b);
            for y in model.iter() {
                sum += (xb - y.block(b)).norm_squared();
            }
        }
        let v = sum / (2.0 * (n * m) as f64);
        cov.set(b, v.max(var_floor));
    }
    cov
}

/// log of the outlier constant `(2π)^{D/2} |Σ|^{1/2} · ω/(1−ω) · M/N`.
fn log_outlier_constant(cov: &BlockCovariance, cfg: &MixtureConfig, m: usize, n: usize) -> f64 {
    let blocks = cfg.active_blocks();
    0.5 * cfg.dim() as f64 * (2.0 * PI).ln()
        + cov.log_sqrt_det(blocks)
        + (cfg.omega / (1.0 - cfg.omega)).ln()
        + (m as f64 / n as f64).ln()
}

/// Posterior responsibilities for the current transformed model.
pub fn e_step(
    data: &FrameSet,
    transformed_model: &FrameSet,
    cov: &BlockCovariance,
    cfg: &MixtureConfig,
) -> PosteriorMatrix {
    e_step_with_nll(data, transformed_model, cov, cfg).0
}

/// E-step that also returns the negative log-likelihood
/// `−Σₙ log(ω/N + (1−ω)/M Σₘ 𝒩(xₙ; tₘ, Σ))` at the current parameters.
///
/// The likelihood is what EM decreases monotonically, so the engine tracks
/// it (plus any regularizer) as its objective.
pub fn e_step_with_nll(
    data: &FrameSet,
    transformed_model: &FrameSet,
    cov: &BlockCovariance,
    cfg: &MixtureConfig,
) -> (PosteriorMatrix, f64) {
    let n = data.count();
    let m = transformed_model.count();
    let blocks = cfg.active_blocks();
    let log_k = log_outlier_constant(cov, cfg, m, n);
    // log Z with Z = (2π)^{D/2}|Σ|^{1/2}, the Gaussian normalizer.
    let log_z = 0.5 * cfg.dim() as f64 * (2.0 * PI).ln() + cov.log_sqrt_det(blocks);
    let log_prefactor = (1.0 - cfg.omega).ln() - (m as f64).ln() - log_z;

    let mut p = DMatrix::zeros(m, n);
    let mut outlier_mass = DVector::zeros(n);
    let mut half_d = vec![0.0; m];
    let mut nll = 0.0;
    for (j, x) in data.iter().enumerate() {
        let mut min_half = f64::INFINITY;
        for (i, t) in transformed_model.iter().enumerate() {
            let h = 0.5 * block_distance(x, t, cov, blocks);
            half_d[i] = h;
            min_half = min_half.min(h);
        }
        // log(Σₘ e^{−hₘ} + K), shifted by the largest exponent.
        let shift = (-min_half).max(log_k);
        let mut acc = (log_k - shift).exp();
        for &h in &half_d {
            acc += (-h - shift).exp();
        }
        let log_den = shift + acc.ln();
        let mut col = p.column_mut(j);
        for (i, &h) in half_d.iter().enumerate() {
            col[i] = (-h - log_den).exp();
        }
        outlier_mass[j] = (log_k - log_den).exp();
        nll -= log_prefactor + log_den;
    }
    (PosteriorMatrix { p, outlier_mass }, nll)
}

/// Complete-data objective `Q` for fixed responsibilities:
/// `½ Σ pₘₙ dₘₙ + N_p Σ_b ln σ_b² + (N_p D/2) ln 2π − N_p ln(1−ω) − (N−N_p) ln ω`.
pub fn q_value(
    data: &FrameSet,
    transformed_model: &FrameSet,
    post: &PosteriorMatrix,
    cov: &BlockCovariance,
    cfg: &MixtureConfig,
) -> f64 {
    let blocks = cfg.active_blocks();
    let n = data.count() as f64;
    let n_p = post.n_p();
    let mut residual = 0.0;
    for (j, x) in data.iter().enumerate() {
        for (i, t) in transformed_model.iter().enumerate() {
            let w = post.p[(i, j)];
            if w != 0.0 {
                residual += w * block_distance(x, t, cov, blocks);
            }
        }
    }
    let mut q = 0.5 * residual;
    if n_p > 0.0 {
        q += n_p * cov.log_sqrt_det(blocks) + 0.5 * n_p * cfg.dim() as f64 * (2.0 * PI).ln()
            - n_p * (1.0 - cfg.omega).ln();
    }
    q - (n - n_p) * cfg.omega.ln()
}

/// Re-estimated outlier weight `(N − N_p)/N`, clamped to the configured bounds.
pub fn update_omega(post: &PosteriorMatrix, n: usize, cfg: &MixtureConfig) -> f64 {
    let n = n as f64;
    let raw = (n - post.n_p()) / n;
    raw.clamp(cfg.omega_bounds.0, cfg.omega_bounds.1)
}

/// Weighted mean of one block: `X Pᵀ1 / N_p` for data or `Y P1 / N_p` for the model.
pub(crate) fn weighted_mean(points: &Matrix2xX<f64>, weights: &DVector<f64>, n_p: f64) -> Vector2<f64> {
    points * weights / n_p
}

/// `Σₘₙ pₘₙ ‖xₙ − tₘ‖²` for a single block.
pub(crate) fn weighted_block_residual(
    data: &FrameSet,
    transformed_model: &FrameSet,
    post: &PosteriorMatrix,
    b: Block,
) -> f64 {
    let mut total = 0.0;
    for (j, x) in data.iter().enumerate() {
        let xb = x.block(b);
        let col = post.p.column(j);
        for (i, t) in transformed_model.iter().enumerate() {
            let w = col[i];
            if w != 0.0 {
                total += w * (xb - t.block(b)).norm_squared();
            }
        }
    }
    total
}
