//! Precision / recall / F1 against ground truth, and seeded trial batches.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{register, Correspondence, EngineConfig, Termination};
use crate::error::{RegError, Result};
use crate::synth::{generate, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub iterations: usize,
    /// Seconds spent inside `register`.
    pub wall_time: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `(model_index, data_index)` pairs against the true pairs.
/// Duplicates are ignored; empty denominators give 0.
pub fn evaluate(found: &[(usize, usize)], truth: &[(usize, usize)]) -> EvalReport {
    let found: BTreeSet<_> = found.iter().copied().collect();
    let truth: BTreeSet<_> = truth.iter().copied().collect();
    let tp = found.intersection(&truth).count();
    let precision = ratio(tp, found.len());
    let recall = ratio(tp, truth.len());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalReport {
        precision,
        recall,
        f1,
        true_pos: tp,
        false_pos: found.len() - tp,
        false_neg: truth.len() - tp,
        iterations: 0,
        wall_time: 0.0,
    }
}

pub fn evaluate_correspondences(found: &[Correspondence], truth: &[(usize, usize)]) -> EvalReport {
    let pairs: Vec<_> = found.iter().map(|c| (c.model_index, c.data_index)).collect();
    evaluate(&pairs, truth)
}

/// Mean and population variance of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    pub fn from_samples(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            variance: variance.max(0.0),
        }
    }
}

/// Outcome of one seeded trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub report: EvalReport,
    pub termination: Option<Termination>,
    /// Set when `register` returned an error instead of a result.
    pub error: Option<String>,
}

impl TrialRecord {
    /// Degenerate stops and hard errors count as failures.
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.termination == Some(Termination::Degenerate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trial_count: usize,
    pub failures: usize,
    pub non_converged: usize,
    pub f1: Stat,
    pub precision: Stat,
    pub recall: Stat,
    pub iterations: Stat,
    pub wall_time: Stat,
    pub scene: SceneSpec,
    pub engine: EngineConfig,
    pub trials: Vec<TrialRecord>,
}

impl BatchSummary {
    pub fn from_trials(scene: SceneSpec, engine: EngineConfig, trials: Vec<TrialRecord>) -> Self {
        let pick = |f: fn(&EvalReport) -> f64| -> Stat {
            Stat::from_samples(&trials.iter().map(|t| f(&t.report)).collect::<Vec<_>>())
        };
        Self {
            trial_count: trials.len(),
            failures: trials.iter().filter(|t| t.failed()).count(),
            non_converged: trials
                .iter()
                .filter(|t| t.termination != Some(Termination::Converged))
                .count(),
            f1: pick(|r| r.f1),
            precision: pick(|r| r.precision),
            recall: pick(|r| r.recall),
            iterations: pick(|r| r.iterations as f64),
            wall_time: pick(|r| r.wall_time),
            scene,
            engine,
            trials,
        }
    }
}

fn error_name(e: &RegError) -> &'static str {
    match e {
        RegError::SingularFrame { .. } => "singular_frame",
        RegError::NonFiniteFrame => "non_finite_frame",
        RegError::DegenerateResponsibility { .. } => "degenerate",
        RegError::SingularSystem(_) => "singular_system",
        RegError::EmptySet(_) => "empty_set",
        RegError::DimensionMismatch(_) => "dimension_mismatch",
        RegError::InvalidConfig(_) => "invalid_config",
        RegError::InvalidSpec(_) => "invalid_spec",
    }
}

/// Runs one scene with the given seed and scores it.
pub fn run_trial(spec: &SceneSpec, cfg: &EngineConfig) -> Result<TrialRecord> {
    let scene = generate(spec)?;
    let start = Instant::now();
    let outcome = register(&scene.data, &scene.model, cfg);
    let wall_time = start.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok(res) => {
            let mut report = evaluate_correspondences(&res.correspondences, &scene.ground_truth);
            report.iterations = res.iterations;
            report.wall_time = wall_time;
            TrialRecord {
                seed: spec.seed,
                report,
                termination: Some(res.termination),
                error: None,
            }
        }
        Err(e @ RegError::InvalidConfig(_)) => return Err(e),
        Err(e) => TrialRecord {
            seed: spec.seed,
            report: EvalReport {
                false_neg: scene.ground_truth.len(),
                wall_time,
                ..EvalReport::default()
            },
            termination: None,
            error: Some(error_name(&e).to_string()),
        },
    })
}

/// Runs `trials` scenes with seeds `spec.seed + i` and aggregates them.
/// Trials run in parallel; results are collected in seed order.
pub fn run_batch(spec: &SceneSpec, cfg: &EngineConfig, trials: usize) -> Result<BatchSummary> {
    if trials == 0 {
        return Err(RegError::InvalidConfig("trials must be at least 1".into()));
    }
    spec.validate()?;
    cfg.validate()?;
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = SceneSpec {
                seed: spec.seed.wrapping_add(i),
                ..*spec
            };
            run_trial(&s, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchSummary::from_trials(*spec, *cfg, records))
}
