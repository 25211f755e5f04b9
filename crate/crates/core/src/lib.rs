//! Registration of affine co-variant feature frames with a Gaussian mixture
//! and EM. Each frame (a 2×2 shape matrix plus a location) is treated as a
//! 6-vector split into three 2-D blocks with their own variances; rigid,
//! affine and non-rigid (kernel field) transformations are supported.
//!
//! ```
//! use framereg_core::{generate, register, EngineConfig, SceneSpec};
//!
//! let scene = generate(&SceneSpec { n_inliers: 20, ..Default::default() }).unwrap();
//! let res = register(&scene.data, &scene.model, &EngineConfig::default()).unwrap();
//! assert!(res.converged);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod engine;
pub mod error;
pub mod frame;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mixture;
mod moments;
pub mod nonrigid;
pub mod normalize;
pub mod rigid;
pub mod synth;
pub mod transform;

pub use affine::{affine_m_step, AffineParams};
pub use engine::{extract_correspondences, register, Correspondence, EngineConfig, MatchResult, Termination};
pub use error::{RegError, Result};
pub use frame::{
    apply_transform, from_vec6, relative_transform, to_vec6, Block, FeatureFrame, FrameVec6,
    RelativeTransform,
};
pub use metrics::{evaluate, evaluate_correspondences, run_batch, run_trial, BatchSummary, EvalReport, Stat, TrialRecord};
pub use mixture::{
    e_step, init_covariance, q_value, update_omega, BlockCovariance, FrameSet, MixtureConfig,
    PosteriorMatrix,
};
pub use nonrigid::{build_kernels, nonrigid_m_step, KernelMode, NonRigidParams};
pub use normalize::{Normalization, Similarity};
pub use rigid::{rigid_m_step, RigidParams};
pub use synth::{generate, BlockNoise, Extent, Scene, SceneSpec, ShapeSpread, TruthSpec, WarpField};
pub use transform::{ModelKind, TransformParams};
