//! EM driver shared by the three transformation models.

use serde::{Deserialize, Serialize};

use crate::affine::{affine_m_step, AffineParams};
use crate::error::{RegError, Result};
use crate::mixture::{
    e_step_with_nll, init_covariance, update_omega, BlockCovariance, FrameSet, MixtureConfig,
    PosteriorMatrix,
};
use crate::nonrigid::{nonrigid_m_step, KernelMode, NonRigidParams};
use crate::normalize::Normalization;
use crate::rigid::{rigid_m_step, RigidParams};
use crate::transform::{ModelKind, TransformParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub model_kind: ModelKind,
    pub omega_init: f64,
    pub lambda: f64,
    pub beta: f64,
    pub match_threshold: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub location_only: bool,
    pub one_to_one: bool,
    /// Run EM on per-set normalized copies (zero-mean, unit-RMS locations).
    pub normalize: bool,
    pub kernel_mode: KernelMode,
    pub omega_bounds: (f64, f64),
    pub var_floor: f64,
    pub min_inlier_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let mix = MixtureConfig::default();
        Self {
            model_kind: ModelKind::Rigid,
            omega_init: 0.1,
            lambda: 3.0,
            beta: 2.0,
            match_threshold: 0.8,
            tol: 1e-5,
            max_iters: 150,
            location_only: false,
            one_to_one: false,
            normalize: true,
            kernel_mode: KernelMode::PerBlock,
            omega_bounds: mix.omega_bounds,
            var_floor: mix.var_floor,
            min_inlier_fraction: mix.min_inlier_fraction,
        }
    }
}

impl EngineConfig {
    pub fn with_kind(model_kind: ModelKind) -> Self {
        Self {
            model_kind,
            ..Self::default()
        }
    }

    pub fn mixture(&self) -> MixtureConfig {
        MixtureConfig {
            omega: self.omega_init,
            omega_bounds: self.omega_bounds,
            var_floor: self.var_floor,
            location_only: self.location_only,
            min_inlier_fraction: self.min_inlier_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.match_threshold > 0.0 && self.match_threshold < 1.0) {
            return Err(RegError::InvalidConfig(format!(
                "match_threshold {} must lie in (0, 1)",
                self.match_threshold
            )));
        }
        if !(self.tol > 0.0) {
            return Err(RegError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(RegError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.beta > 0.0) {
            return Err(RegError::InvalidConfig("lambda and beta must be positive".into()));
        }
        self.mixture().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub model_index: usize,
    pub data_index: usize,
    pub posterior: f64,
}

/// Why the EM loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Objective change fell below the tolerance.
    Converged,
    /// The iteration budget ran out first.
    MaxIterations,
    /// An M-step found (almost) no inlier mass; the last valid state is kept.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub correspondences: Vec<Correspondence>,
    pub transform: TransformParams,
    pub posterior: PosteriorMatrix,
    pub covariance: BlockCovariance,
    pub omega: f64,
    /// Normalization the EM loop ran under; `transform` and `covariance`
    /// are already mapped back to input units.
    pub normalization: Normalization,
    /// Number of completed M-steps.
    pub iterations: usize,
    /// Objective after the initial E-step and after every iteration.
    pub q_trace: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
}

/// Thresholds the posterior; with `one_to_one`, a greedy pass in descending
/// posterior order keeps at most one pair per model and per data index.
/// Output is sorted by `(model_index, data_index)`.
pub fn extract_correspondences(
    post: &PosteriorMatrix,
    threshold: f64,
    one_to_one: bool,
) -> Vec<Correspondence> {
    let mut found = Vec::new();
    for m in 0..post.model_count() {
        for n in 0..post.data_count() {
            let p = post.p[(m, n)];
            if p > threshold {
                found.push(Correspondence {
                    model_index: m,
                    data_index: n,
                    posterior: p,
                });
            }
        }
    }
    if one_to_one {
        found.sort_by(|a, b| {
            b.posterior
                .total_cmp(&a.posterior)
                .then(a.model_index.cmp(&b.model_index))
                .then(a.data_index.cmp(&b.data_index))
        });
        let mut used_m = vec![false; post.model_count()];
        let mut used_n = vec![false; post.data_count()];
        found.retain(|c| {
            if used_m[c.model_index] || used_n[c.data_index] {
                return false;
            }
            used_m[c.model_index] = true;
            used_n[c.data_index] = true;
            true
        });
        found.sort_by_key(|c| (c.model_index, c.data_index));
    }
    found
}

fn initial_transform(model: &FrameSet, cfg: &EngineConfig) -> Result<TransformParams> {
    Ok(match cfg.model_kind {
        ModelKind::Rigid => TransformParams::Rigid(RigidParams::default()),
        ModelKind::Affine => TransformParams::Affine(AffineParams::default()),
        ModelKind::NonRigid => TransformParams::NonRigid(NonRigidParams::new(
            model,
            cfg.beta,
            cfg.lambda,
            cfg.kernel_mode,
        )?),
    })
}

fn m_step(
    data: &FrameSet,
    model: &FrameSet,
    post: &PosteriorMatrix,
    cov: &BlockCovariance,
    current: &TransformParams,
    mix: &MixtureConfig,
) -> Result<(TransformParams, BlockCovariance)> {
    Ok(match current {
        TransformParams::Rigid(_) => {
            let (p, c) = rigid_m_step(data, model, post, cov, mix)?;
            (TransformParams::Rigid(p), c)
        }
        TransformParams::Affine(_) => {
            let (p, c) = affine_m_step(data, model, post, cov, mix)?;
            (TransformParams::Affine(p), c)
        }
        TransformParams::NonRigid(params) => {
            let (p, c) = nonrigid_m_step(data, model, post, cov, params, mix)?;
            (TransformParams::NonRigid(p), c)
        }
    })
}

/// Registers `model` (mixture centroids) onto `data` (observations).
///
/// Starts from the identity transform, runs an E-step, then alternates
/// M- and E-steps until the objective changes by less than `cfg.tol` or
/// `cfg.max_iters` M-steps have run. The objective is the mixture negative
/// log-likelihood plus the field penalty for the non-rigid model, evaluated
/// in normalized units when `cfg.normalize` is set.
pub fn register(data: &FrameSet, model: &FrameSet, cfg: &EngineConfig) -> Result<MatchResult> {
    cfg.validate()?;
    let normalization = if cfg.normalize {
        Normalization::fit(data, model)
    } else {
        Normalization::identity()
    };
    let raw_model = model;
    let data = &normalization.data.apply_set(data);
    let model = &normalization.model.apply_set(model);
    let n = data.count();
    let mut mix = cfg.mixture();
    let mut transform = initial_transform(model, cfg)?;
    let mut cov = init_covariance(data, model, cfg.var_floor);
    let (mut post, nll) = e_step_with_nll(data, model, &cov, &mix);
    let mut q = nll + transform.penalty();
    let mut q_trace = vec![q];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < cfg.max_iters {
        let (next, next_cov) = match m_step(data, model, &post, &cov, &transform, &mix) {
            Ok(v) => v,
            Err(RegError::DegenerateResponsibility { n_p, min }) => {
                log::warn!("stopping after {iterations} iterations: N_p = {n_p:e} < {min:e}");
                termination = Termination::Degenerate;
                break;
            }
            Err(e) => return Err(e),
        };
        let omega = update_omega(&post, n, &mix);
        mix.omega = omega;
        transform = next;
        cov = next_cov;
        let transformed = transform.apply(model);
        let (p, nll) = e_step_with_nll(data, &transformed, &cov, &mix);
        post = p;
        let q_next = nll + transform.penalty();
        q_trace.push(q_next);
        iterations += 1;
        let delta = (q_next - q).abs();
        q = q_next;
        if delta < cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }

    let correspondences = extract_correspondences(&post, cfg.match_threshold, cfg.one_to_one);
    Ok(MatchResult {
        correspondences,
        transform: normalization.denormalize(&transform, raw_model),
        posterior: post,
        covariance: normalization.denormalize_covariance(&cov),
        omega: mix.omega,
        normalization,
        iterations,
        q_trace,
        converged: termination == Termination::Converged,
        termination,
    })
}
