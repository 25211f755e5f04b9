//! Versioned text formats: frame sets, ground-truth pairs and registration
//! results as JSON, benchmark sweeps as CSV.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so `parse(write(x)) == x` bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Matrix2xX, Vector2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::AffineParams;
use crate::engine::{Correspondence, EngineConfig, MatchResult, Termination};
use crate::error::RegError;
use crate::frame::{FeatureFrame, FrameVec6, RelativeTransform};
use crate::metrics::BatchSummary;
use crate::mixture::{BlockCovariance, FrameSet};
use crate::nonrigid::{KernelMode, NonRigidParams};
use crate::normalize::Normalization;
use crate::rigid::RigidParams;
use crate::synth::{Scene, SceneSpec};
use crate::transform::TransformParams;

pub const FRAME_SET_VERSION: u32 = 1;
pub const TRUTH_VERSION: u32 = 1;
pub const RESULT_VERSION: u32 = 1;

/// Header of the benchmark CSV. The first eight columns are a fixed contract.
pub const BENCH_HEADER: [&str; 10] = [
    "ratio",
    "f1_mean",
    "f1_var",
    "precision_mean",
    "recall_mean",
    "iters_mean",
    "iters_var",
    "time_mean",
    "failures",
    "mode",
];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: RegError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn check_version(what: &'static str, found: u32, expected: u32) -> Result<(), FormatError> {
    if found != expected {
        return Err(FormatError::Version {
            what,
            found,
            expected,
        });
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Frame sets

/// One frame; the linear map is stored column-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub a11: f64,
    pub a21: f64,
    pub a12: f64,
    pub a22: f64,
    pub x: f64,
    pub y: f64,
}

impl From<&FrameVec6> for FrameRecord {
    fn from(v: &FrameVec6) -> Self {
        Self {
            a11: v.dot.x,
            a21: v.dot.y,
            a12: v.ddot.x,
            a22: v.ddot.y,
            x: v.tdot.x,
            y: v.tdot.y,
        }
    }
}

impl FrameRecord {
    pub fn to_frame(&self) -> Result<FeatureFrame, RegError> {
        FeatureFrame::new(
            Matrix2::new(self.a11, self.a12, self.a21, self.a22),
            Vector2::new(self.x, self.y),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSetFile {
    pub version: u32,
    pub units: String,
    pub frames: Vec<FrameRecord>,
}

impl FrameSetFile {
    pub fn from_set(set: &FrameSet, units: &str) -> Self {
        Self {
            version: FRAME_SET_VERSION,
            units: units.to_string(),
            frames: set.iter().map(FrameRecord::from).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: Self = from_json(text)?;
        check_version("frame set", file.version, FRAME_SET_VERSION)?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.frames.is_empty() {
            return Err(FormatError::Invalid("frame set has no frames".into()));
        }
        for (index, r) in self.frames.iter().enumerate() {
            r.to_frame().map_err(|source| FormatError::Record { index, source })?;
        }
        Ok(())
    }

    pub fn to_set(&self) -> Result<FrameSet, FormatError> {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(index, r)| {
                r.to_frame()
                    .map(|f| f.to_vec6())
                    .map_err(|source| FormatError::Record { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        FrameSet::new(frames).map_err(|e| FormatError::Invalid(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        to_json(self)
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        write_text(path, &self.to_text())
    }
}

// ---------------------------------------------------------------------------
// Ground truth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub version: u32,
    pub seed: u64,
    pub spec: SceneSpec,
    /// `(model_index, data_index)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl TruthFile {
    pub fn from_scene(scene: &Scene, spec: &SceneSpec) -> Self {
        Self {
            version: TRUTH_VERSION,
            seed: spec.seed,
            spec: *spec,
            pairs: scene.ground_truth.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: Self = from_json(text)?;
        check_version("ground truth", file.version, TRUTH_VERSION)?;
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        to_json(self)
    }
}

// ---------------------------------------------------------------------------
// Results

type Mat2Rows = [[f64; 2]; 2];

fn mat_rows(m: &Matrix2<f64>) -> Mat2Rows {
    [[m.m11, m.m12], [m.m21, m.m22]]
}

fn rows_mat(r: &Mat2Rows) -> Matrix2<f64> {
    Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1])
}

fn columns(w: &Matrix2xX<f64>) -> Vec<[f64; 2]> {
    w.column_iter().map(|c| [c[0], c[1]]).collect()
}

fn from_columns(cols: &[[f64; 2]]) -> Matrix2xX<f64> {
    Matrix2xX::from_iterator(cols.len(), cols.iter().flat_map(|c| *c))
}

/// Transformation parameters as stored in a result file. The non-rigid
/// kernels are not stored; they are rebuilt from the model set and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TransformRecord {
    Rigid {
        s: f64,
        r: Mat2Rows,
        t: [f64; 2],
    },
    Affine {
        b: Mat2Rows,
        t: [f64; 2],
    },
    #[serde(rename = "nonrigid")]
    NonRigid {
        beta: f64,
        lambda: f64,
        kernel_mode: KernelMode,
        /// Global part applied before the field.
        global_b: Mat2Rows,
        global_t: [f64; 2],
        w_dot: Vec<[f64; 2]>,
        w_ddot: Vec<[f64; 2]>,
        w_tdot: Vec<[f64; 2]>,
    },
}

impl From<&TransformParams> for TransformRecord {
    fn from(t: &TransformParams) -> Self {
        match t {
            TransformParams::Rigid(p) => TransformRecord::Rigid {
                s: p.s,
                r: mat_rows(&p.r),
                t: [p.t.x, p.t.y],
            },
            TransformParams::Affine(p) => TransformRecord::Affine {
                b: mat_rows(&p.b),
                t: [p.t.x, p.t.y],
            },
            TransformParams::NonRigid(p) => TransformRecord::NonRigid {
                beta: p.beta,
                lambda: p.lambda,
                kernel_mode: p.kernel_mode,
                global_b: mat_rows(&p.global.b),
                global_t: [p.global.t.x, p.global.t.y],
                w_dot: columns(&p.w_dot),
                w_ddot: columns(&p.w_ddot),
                w_tdot: columns(&p.w_tdot),
            },
        }
    }
}

impl TransformRecord {
    /// Rebuilds full parameters; non-rigid records need the model set.
    pub fn to_params(&self, model: Option<&FrameSet>) -> Result<TransformParams, FormatError> {
        Ok(match self {
            TransformRecord::Rigid { s, r, t } => TransformParams::Rigid(RigidParams {
                s: *s,
                r: rows_mat(r),
                t: Vector2::from(*t),
            }),
            TransformRecord::Affine { b, t } => TransformParams::Affine(AffineParams {
                b: rows_mat(b),
                t: Vector2::from(*t),
            }),
            TransformRecord::NonRigid {
                beta,
                lambda,
                kernel_mode,
                global_b,
                global_t,
                w_dot,
                w_ddot,
                w_tdot,
            } => {
                let model = model.ok_or_else(|| {
                    FormatError::Invalid("non-rigid parameters need the model set".into())
                })?;
                if [w_dot.len(), w_ddot.len(), w_tdot.len()] != [model.count(); 3] {
                    return Err(FormatError::Invalid(format!(
                        "coefficient count does not match the {} model frames",
                        model.count()
                    )));
                }
                let mut p = NonRigidParams::new(model, *beta, *lambda, *kernel_mode)
                    .map_err(|e| FormatError::Invalid(e.to_string()))?;
                p.w_dot = from_columns(w_dot);
                p.w_ddot = from_columns(w_ddot);
                p.w_tdot = from_columns(w_tdot);
                p.global = RelativeTransform::new(rows_mat(global_b), Vector2::from(*global_t));
                TransformParams::NonRigid(p)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub version: u32,
    pub config: EngineConfig,
    pub transform: TransformRecord,
    pub covariance: BlockCovariance,
    pub omega: f64,
    pub normalization: Normalization,
    pub correspondences: Vec<Correspondence>,
    pub q_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

impl ResultFile {
    pub fn from_result(res: &MatchResult, config: &EngineConfig) -> Self {
        Self {
            version: RESULT_VERSION,
            config: *config,
            transform: TransformRecord::from(&res.transform),
            covariance: res.covariance,
            omega: res.omega,
            normalization: res.normalization,
            correspondences: res.correspondences.clone(),
            q_trace: res.q_trace.clone(),
            iterations: res.iterations,
            converged: res.converged,
            termination: res.termination,
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: Self = from_json(text)?;
        check_version("result", file.version, RESULT_VERSION)?;
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        to_json(self)
    }
}

// ---------------------------------------------------------------------------
// Benchmark CSV

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub ratio: f64,
    pub f1_mean: f64,
    pub f1_var: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub iters_mean: f64,
    pub iters_var: f64,
    pub time_mean: f64,
    pub failures: usize,
    /// `full` or `location_only`.
    pub mode: String,
}

impl BenchRow {
    pub fn from_summary(summary: &BatchSummary) -> Self {
        Self {
            ratio: summary.scene.outlier_ratio,
            f1_mean: summary.f1.mean,
            f1_var: summary.f1.variance,
            precision_mean: summary.precision.mean,
            recall_mean: summary.recall.mean,
            iters_mean: summary.iterations.mean,
            iters_var: summary.iterations.variance,
            time_mean: summary.wall_time.mean,
            failures: summary.failures,
            mode: if summary.engine.location_only {
                "location_only".into()
            } else {
                "full".into()
            },
        }
    }
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), FormatError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_bench_csv<R: Read>(input: R) -> Result<Vec<BenchRow>, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != BENCH_HEADER {
        return Err(FormatError::Invalid(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(FormatError::from)).collect()
}

pub fn bench_csv_string(rows: &[BenchRow]) -> String {
    let mut buf = Vec::new();
    write_bench_csv(&mut buf, rows).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}
