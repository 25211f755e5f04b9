//! Co-variant feature frames and their 6-D vector form.
//!
//! A frame is the homogeneous matrix `[[A, x], [0, 1]]`: a 2×2 linear map `A`
//! carrying shape, scale and orientation, plus a location `x`. Registration
//! works on the column-major vectorization `[a11, a21, a12, a22, x1, x2]`,
//! split into three 2-D blocks: the two columns of `A` (`dot`, `ddot`) and
//! the location (`tdot`).

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{RegError, Result};

/// Default floor on `|det(a)|` below which a frame is treated as singular.
pub const DET_FLOOR: f64 = 1e-12;

/// One of the three 2-D blocks of a vectorized frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// First column of the linear map.
    Dot,
    /// Second column of the linear map.
    Ddot,
    /// Location.
    Tdot,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Dot, Block::Ddot, Block::Tdot];

    pub fn index(self) -> usize {
        match self {
            Block::Dot => 0,
            Block::Ddot => 1,
            Block::Tdot => 2,
        }
    }
}

/// A single affinely co-variant feature: linear map `a` and location `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub a: Matrix2<f64>,
    pub x: Vector2<f64>,
}

impl FeatureFrame {
    /// Builds a frame, rejecting non-finite entries and singular maps.
    pub fn new(a: Matrix2<f64>, x: Vector2<f64>) -> Result<Self> {
        let frame = Self { a, x };
        frame.validate(DET_FLOOR)?;
        Ok(frame)
    }

    pub fn identity_at(x: Vector2<f64>) -> Self {
        Self {
            a: Matrix2::identity(),
            x,
        }
    }

    pub fn validate(&self, det_floor: f64) -> Result<()> {
        if self.a.iter().chain(self.x.iter()).any(|v| !v.is_finite()) {
            return Err(RegError::NonFiniteFrame);
        }
        let det = self.a.determinant();
        if det.abs() < det_floor {
            return Err(RegError::SingularFrame {
                det,
                floor: det_floor,
            });
        }
        Ok(())
    }

    pub fn to_vec6(&self) -> FrameVec6 {
        to_vec6(self)
    }
}

/// Column-major 6-D vectorization of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameVec6 {
    pub dot: Vector2<f64>,
    pub ddot: Vector2<f64>,
    pub tdot: Vector2<f64>,
}

impl FrameVec6 {
    pub fn new(dot: Vector2<f64>, ddot: Vector2<f64>, tdot: Vector2<f64>) -> Self {
        Self { dot, ddot, tdot }
    }

    /// Builds from `[a11, a21, a12, a22, x1, x2]`.
    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            dot: Vector2::new(v[0], v[1]),
            ddot: Vector2::new(v[2], v[3]),
            tdot: Vector2::new(v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.dot.x, self.dot.y, self.ddot.x, self.ddot.y, self.tdot.x, self.tdot.y,
        ]
    }

    #[inline]
    pub fn block(&self, b: Block) -> Vector2<f64> {
        match b {
            Block::Dot => self.dot,
            Block::Ddot => self.ddot,
            Block::Tdot => self.tdot,
        }
    }

    #[inline]
    pub fn block_mut(&mut self, b: Block) -> &mut Vector2<f64> {
        match b {
            Block::Dot => &mut self.dot,
            Block::Ddot => &mut self.ddot,
            Block::Tdot => &mut self.tdot,
        }
    }

    /// Reassembles the frame; fails if the result is not a valid frame.
    pub fn to_frame(&self) -> Result<FeatureFrame> {
        from_vec6(self)
    }
}

/// Relative affine transformation `X · Y⁻¹` between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeTransform {
    pub b: Matrix2<f64>,
    pub t: Vector2<f64>,
}

impl RelativeTransform {
    pub fn identity() -> Self {
        Self {
            b: Matrix2::identity(),
            t: Vector2::zeros(),
        }
    }

    pub fn new(b: Matrix2<f64>, t: Vector2<f64>) -> Self {
        Self { b, t }
    }

    pub fn apply(&self, v: &FrameVec6) -> FrameVec6 {
        apply_transform(self, v)
    }

    /// Maps a frame: `a' = b·a`, `x' = b·x + t`.
    pub fn apply_frame(&self, f: &FeatureFrame) -> FeatureFrame {
        FeatureFrame {
            a: self.b * f.a,
            x: self.b * f.x + self.t,
        }
    }
}

pub fn to_vec6(f: &FeatureFrame) -> FrameVec6 {
    FrameVec6 {
        dot: f.a.column(0).into_owned(),
        ddot: f.a.column(1).into_owned(),
        tdot: f.x,
    }
}

pub fn from_vec6(v: &FrameVec6) -> Result<FeatureFrame> {
    let a = Matrix2::from_columns(&[v.dot, v.ddot]);
    FeatureFrame::new(a, v.tdot)
}

/// Relative transform taking `y_frame` onto `x_frame`, with the default
/// singularity floor.
pub fn relative_transform(x_frame: &FeatureFrame, y_frame: &FeatureFrame) -> Result<RelativeTransform> {
    relative_transform_with_floor(x_frame, y_frame, DET_FLOOR)
}

pub fn relative_transform_with_floor(
    x_frame: &FeatureFrame,
    y_frame: &FeatureFrame,
    det_floor: f64,
) -> Result<RelativeTransform> {
    let det = y_frame.a.determinant();
    if !(det.abs() >= det_floor) {
        return Err(RegError::SingularFrame {
            det,
            floor: det_floor,
        });
    }
    let inv = Matrix2::new(y_frame.a.m22, -y_frame.a.m12, -y_frame.a.m21, y_frame.a.m11) / det;
    let b = x_frame.a * inv;
    let t = x_frame.x - b * y_frame.x;
    Ok(RelativeTransform { b, t })
}

/// Block-diagonal action `d(B, B, B)` plus translation on the location block.
pub fn apply_transform(t: &RelativeTransform, v: &FrameVec6) -> FrameVec6 {
    FrameVec6 {
        dot: t.b * v.dot,
        ddot: t.b * v.ddot,
        tdot: t.b * v.tdot + t.t,
    }
}
