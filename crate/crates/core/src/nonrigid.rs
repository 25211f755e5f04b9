//! Non-rigid M-step: a Gaussian-kernel displacement field per block with
//! Tikhonov (RKHS norm) regularization.
//!
//! Each block moves as `T_b = Y_b + W_b G_b`, where `W_b` is a 2×M coefficient
//! matrix and `G_b` an M×M Gaussian kernel over the model frames. For fixed
//! responsibilities the coefficients solve
//! `W_b (G_b d(P1) + λ σ_b² I) = X_b Pᵀ − Y_b d(P1)`.
//!
//! A fitted field may carry a global similarity applied before the
//! displacement; it is the identity during EM and only absorbs the input
//! normalization when results are mapped back to input units.

use nalgebra::{DMatrix, DVector, Matrix2xX, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{RegError, Result};
use crate::frame::{Block, FrameVec6, RelativeTransform};
use crate::mixture::{BlockCovariance, FrameSet, MixtureConfig, PosteriorMatrix};
use crate::moments::update_variances;

/// Which coordinates a block's kernel is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Each block's kernel uses that block's own 2-D components.
    #[default]
    PerBlock,
    /// All three blocks share the kernel built from locations.
    SpatialShared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonRigidParams {
    pub w_dot: Matrix2xX<f64>,
    pub w_ddot: Matrix2xX<f64>,
    pub w_tdot: Matrix2xX<f64>,
    pub g_dot: DMatrix<f64>,
    pub g_ddot: DMatrix<f64>,
    pub g_tdot: DMatrix<f64>,
    pub beta: f64,
    pub lambda: f64,
    pub kernel_mode: KernelMode,
    /// Applied to the model before the displacement is added.
    pub global: RelativeTransform,
}

#[inline]
fn gaussian(d2: f64, beta: f64) -> f64 {
    (-d2 / (2.0 * beta)).exp()
}

/// `G[i, j] = exp(−‖y_i − y_j‖² / (2β))` over one block's coordinates.
pub fn block_kernel(model: &FrameSet, b: Block, beta: f64) -> DMatrix<f64> {
    let m = model.count();
    let mut g = DMatrix::identity(m, m);
    for i in 0..m {
        let yi = model.get(i).block(b);
        for j in (i + 1)..m {
            let v = gaussian((yi - model.get(j).block(b)).norm_squared(), beta);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Per-block kernels `(g_dot, g_ddot, g_tdot)`.
pub fn build_kernels(model: &FrameSet, beta: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    build_kernels_with_mode(model, beta, KernelMode::PerBlock)
}

pub fn build_kernels_with_mode(
    model: &FrameSet,
    beta: f64,
    mode: KernelMode,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    match mode {
        KernelMode::PerBlock => (
            block_kernel(model, Block::Dot, beta),
            block_kernel(model, Block::Ddot, beta),
            block_kernel(model, Block::Tdot, beta),
        ),
        KernelMode::SpatialShared => {
            let g = block_kernel(model, Block::Tdot, beta);
            (g.clone(), g.clone(), g)
        }
    }
}

impl NonRigidParams {
    /// Zero displacement field with kernels built from `model`.
    pub fn new(model: &FrameSet, beta: f64, lambda: f64, kernel_mode: KernelMode) -> Result<Self> {
        if !(beta > 0.0) || !(lambda > 0.0) {
            return Err(RegError::InvalidConfig(format!(
                "beta ({beta}) and lambda ({lambda}) must be positive"
            )));
        }
        let m = model.count();
        let (g_dot, g_ddot, g_tdot) = build_kernels_with_mode(model, beta, kernel_mode);
        Ok(Self {
            w_dot: Matrix2xX::zeros(m),
            w_ddot: Matrix2xX::zeros(m),
            w_tdot: Matrix2xX::zeros(m),
            g_dot,
            g_ddot,
            g_tdot,
            beta,
            lambda,
            kernel_mode,
            global: RelativeTransform::identity(),
        })
    }

    pub fn model_count(&self) -> usize {
        self.w_tdot.ncols()
    }

    pub fn w(&self, b: Block) -> &Matrix2xX<f64> {
        match b {
            Block::Dot => &self.w_dot,
            Block::Ddot => &self.w_ddot,
            Block::Tdot => &self.w_tdot,
        }
    }

    fn w_mut(&mut self, b: Block) -> &mut Matrix2xX<f64> {
        match b {
            Block::Dot => &mut self.w_dot,
            Block::Ddot => &mut self.w_ddot,
            Block::Tdot => &mut self.w_tdot,
        }
    }

    pub fn g(&self, b: Block) -> &DMatrix<f64> {
        match b {
            Block::Dot => &self.g_dot,
            Block::Ddot => &self.g_ddot,
            Block::Tdot => &self.g_tdot,
        }
    }

    /// Displacements `W_b G_b` of the model frames in one block (2×M).
    pub fn displacement(&self, b: Block) -> Matrix2xX<f64> {
        self.w(b) * self.g(b)
    }

    /// Moves every model frame by the field: `T = g(Y) + W G` per block,
    /// with `g` the global part.
    pub fn transform(&self, model: &FrameSet) -> FrameSet {
        let disp = Block::ALL.map(|b| self.displacement(b));
        let frames = model
            .iter()
            .enumerate()
            .map(|(m, y)| {
                let mut t = self.global.apply(y);
                for b in Block::ALL {
                    let d = disp[b.index()].column(m);
                    *t.block_mut(b) += Vector2::new(d[0], d[1]);
                }
                t
            })
            .collect();
        FrameSet::new(frames).expect("non-empty model")
    }

    /// Field value `Σₖ w_k G(z, y_k)` in block `b` at an arbitrary frame `z`.
    pub fn field_at(&self, model: &FrameSet, b: Block, z: &FrameVec6) -> Vector2<f64> {
        let kb = match self.kernel_mode {
            KernelMode::PerBlock => b,
            KernelMode::SpatialShared => Block::Tdot,
        };
        let zb = z.block(kb);
        let w = self.w(b);
        let mut out = Vector2::zeros();
        for (k, y) in model.iter().enumerate() {
            out += w.column(k) * gaussian((zb - y.block(kb)).norm_squared(), self.beta);
        }
        out
    }

    /// `½ λ Σ_b tr(W_b G_b W_bᵀ)`.
    pub fn regularizer(&self) -> f64 {
        0.5 * self.lambda
            * Block::ALL
                .iter()
                .map(|&b| (self.displacement(b) * self.w(b).transpose()).trace())
                .sum::<f64>()
    }
}

/// Solves `W (G d(w) + c I) = rhs` for the 2×M unknown `W`.
pub(crate) fn solve_block_system(
    g: &DMatrix<f64>,
    row_mass: &DVector<f64>,
    c: f64,
    rhs: &Matrix2xX<f64>,
) -> Result<Matrix2xX<f64>> {
    let m = g.nrows();
    // Transposed system (d(w) G + c I) Wᵀ = rhsᵀ.
    let mut sys = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            sys[(i, j)] = row_mass[i] * g[(i, j)];
        }
        sys[(j, j)] += c;
    }
    let lu = sys.lu();
    let sol = lu
        .solve(&rhs.transpose())
        .ok_or_else(|| RegError::SingularSystem(format!("{m}x{m} kernel system")))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(RegError::SingularSystem("non-finite kernel coefficients".into()));
    }
    Ok(sol.transpose())
}

/// One non-rigid M-step for fixed responsibilities. Kernels, `β` and `λ` are
/// taken from `params`; only the coefficients and variances change.
pub fn nonrigid_m_step(
    data: &FrameSet,
    model: &FrameSet,
    post: &PosteriorMatrix,
    cov: &BlockCovariance,
    params: &NonRigidParams,
    cfg: &MixtureConfig,
) -> Result<(NonRigidParams, BlockCovariance)> {
    post.check_shape(data, model)?;
    if params.model_count() != model.count() {
        return Err(RegError::DimensionMismatch(format!(
            "field has {} centers, model has {} frames",
            params.model_count(),
            model.count()
        )));
    }
    let n_p = post.n_p();
    cfg.check_inlier_mass(n_p, data.count())?;
    let row = post.row_sums();
    let pt = post.p.transpose();
    let base = FrameSet::new(model.iter().map(|y| params.global.apply(y)).collect())?;

    let mut next = params.clone();
    for b in Block::ALL {
        let w = next.w_mut(b);
        if !cfg.active_blocks().contains(&b) {
            w.fill(0.0);
            continue;
        }
        let xb = data.block_matrix(b);
        let mut rhs = &xb * &pt;
        let yb = base.block_matrix(b);
        for (mut col, (y, &mass)) in rhs.column_iter_mut().zip(yb.column_iter().zip(row.iter())) {
            col -= y * mass;
        }
        *w = solve_block_system(params.g(b), &row, params.lambda * cov.get(b), &rhs)?;
    }
    let transformed = next.transform(model);
    let new_cov = update_variances(data, &transformed, post, cov, cfg);
    Ok((next, new_cov))
}
