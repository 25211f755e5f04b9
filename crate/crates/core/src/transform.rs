use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affine::AffineParams;
use crate::mixture::FrameSet;
use crate::moments::transform_set;
use crate::nonrigid::NonRigidParams;
use crate::rigid::RigidParams;

/// Transformation family fitted by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rigid,
    Affine,
    #[serde(rename = "nonrigid")]
    NonRigid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rigid, ModelKind::Affine, ModelKind::NonRigid];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rigid => "rigid",
            ModelKind::Affine => "affine",
            ModelKind::NonRigid => "nonrigid",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rigid" => Ok(ModelKind::Rigid),
            "affine" => Ok(ModelKind::Affine),
            "nonrigid" | "non-rigid" => Ok(ModelKind::NonRigid),
            other => Err(format!("unknown model kind `{other}` (expected rigid, affine or nonrigid)")),
        }
    }
}

/// Fitted transformation parameters, tagged by family.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum TransformParams {
    Rigid(RigidParams),
    Affine(AffineParams),
    NonRigid(NonRigidParams),
}

impl TransformParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            TransformParams::Rigid(_) => ModelKind::Rigid,
            TransformParams::Affine(_) => ModelKind::Affine,
            TransformParams::NonRigid(_) => ModelKind::NonRigid,
        }
    }

    /// Maps the model set through the transformation.
    pub fn apply(&self, model: &FrameSet) -> FrameSet {
        match self {
            TransformParams::Rigid(p) => transform_set(model, &p.to_relative()),
            TransformParams::Affine(p) => transform_set(model, &p.to_relative()),
            TransformParams::NonRigid(p) => p.transform(model),
        }
    }

    /// Prior penalty added to the likelihood (non-zero only for non-rigid).
    pub fn penalty(&self) -> f64 {
        match self {
            TransformParams::NonRigid(p) => p.regularizer(),
            _ => 0.0,
        }
    }
}
