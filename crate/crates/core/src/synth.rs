//! Synthetic scenes with known ground truth.
//!
//! Model inliers are random frames; data inliers are the same frames pushed
//! through a known transformation plus per-block Gaussian noise. Outliers are
//! appended to both sets, drawn from the same marginal as the inliers of that
//! set but with no counterpart in the other set.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RegError, Result};
use crate::frame::{FeatureFrame, FrameVec6, RelativeTransform, DET_FLOOR};
use crate::linalg::rotation;
use crate::mixture::FrameSet;

/// Axis-aligned box that locations are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Extent {
    fn default() -> Self {
        Self {
            min: [-10.0, -10.0],
            max: [10.0, 10.0],
        }
    }
}

impl Extent {
    /// Length of the longer side.
    pub fn size(&self) -> f64 {
        (self.max[0] - self.min[0]).max(self.max[1] - self.min[1])
    }
}

/// Frame maps are sampled as `s · R(θ) · [[1, k], [0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpread {
    pub scale_min: f64,
    pub scale_max: f64,
    pub max_shear: f64,
}

impl Default for ShapeSpread {
    fn default() -> Self {
        Self {
            scale_min: 0.5,
            scale_max: 2.0,
            max_shear: 0.3,
        }
    }
}

/// Standard deviation of the Gaussian noise added to each block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockNoise {
    pub dot: f64,
    pub ddot: f64,
    pub tdot: f64,
}

impl BlockNoise {
    pub fn uniform(sigma: f64) -> Self {
        Self {
            dot: sigma,
            ddot: sigma,
            tdot: sigma,
        }
    }
}

/// Smooth displacement `V(z) = c + L z + (a₁ sin(k z₂), a₂ sin(k z₁))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WarpField {
    pub constant: [f64; 2],
    /// Row-major linear part `L`.
    pub linear: [[f64; 2]; 2],
    pub amplitude: [f64; 2],
    pub frequency: f64,
}

impl WarpField {
    pub fn sinusoidal(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude: [amplitude, amplitude],
            frequency,
            ..Self::default()
        }
    }

    fn linear_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.linear[0][0], self.linear[0][1], self.linear[1][0], self.linear[1][1])
    }

    pub fn displacement(&self, z: &Vector2<f64>) -> Vector2<f64> {
        let k = self.frequency;
        Vector2::from(self.constant)
            + self.linear_matrix() * z
            + Vector2::new(self.amplitude[0] * (k * z.y).sin(), self.amplitude[1] * (k * z.x).sin())
    }

    /// Jacobian of `z ↦ z + V(z)`.
    pub fn jacobian(&self, z: &Vector2<f64>) -> Matrix2<f64> {
        let k = self.frequency;
        Matrix2::identity()
            + self.linear_matrix()
            + Matrix2::new(
                0.0,
                self.amplitude[0] * k * (k * z.y).cos(),
                self.amplitude[1] * k * (k * z.x).cos(),
                0.0,
            )
    }

    pub fn apply(&self, v: &FrameVec6) -> FrameVec6 {
        let j = self.jacobian(&v.tdot);
        FrameVec6 {
            dot: j * v.dot,
            ddot: j * v.ddot,
            tdot: v.tdot + self.displacement(&v.tdot),
        }
    }

    fn is_finite(&self) -> bool {
        self.constant
            .iter()
            .chain(self.linear.iter().flatten())
            .chain(self.amplitude.iter())
            .chain(std::iter::once(&self.frequency))
            .all(|v| v.is_finite())
    }
}

/// Ground-truth transformation of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TruthSpec {
    /// `theta` in radians; acts as `scale · R(theta)` on all blocks.
    Rigid { theta: f64, scale: f64, t: [f64; 2] },
    /// Row-major 2×2 map.
    Affine { b: [[f64; 2]; 2], t: [f64; 2] },
    #[serde(rename = "nonrigid")]
    NonRigid(WarpField),
}

impl TruthSpec {
    pub fn identity() -> Self {
        TruthSpec::Rigid {
            theta: 0.0,
            scale: 1.0,
            t: [0.0, 0.0],
        }
    }

    /// The global affine part, when the truth is rigid or affine.
    pub fn relative(&self) -> Option<RelativeTransform> {
        match *self {
            TruthSpec::Rigid { theta, scale, t } => {
                Some(RelativeTransform::new(scale * rotation(theta), Vector2::from(t)))
            }
            TruthSpec::Affine { b, t } => Some(RelativeTransform::new(
                Matrix2::new(b[0][0], b[0][1], b[1][0], b[1][1]),
                Vector2::from(t),
            )),
            TruthSpec::NonRigid(_) => None,
        }
    }

    pub fn apply(&self, v: &FrameVec6) -> FrameVec6 {
        match self {
            TruthSpec::NonRigid(field) => field.apply(v),
            _ => self.relative().expect("global truth").apply(v),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TruthSpec::Rigid { theta, scale, t } => {
                if !(scale > 0.0 && scale.is_finite()) || !theta.is_finite() || !t.iter().all(|v| v.is_finite()) {
                    return Err(RegError::InvalidSpec(format!("rigid truth needs finite values and scale > 0, got {scale}")));
                }
            }
            TruthSpec::Affine { .. } => {
                let rel = self.relative().unwrap();
                let det = rel.b.determinant();
                if !(det.abs() > DET_FLOOR) || !rel.t.iter().all(|v| v.is_finite()) {
                    return Err(RegError::InvalidSpec(format!("affine truth is singular (det = {det})")));
                }
            }
            TruthSpec::NonRigid(field) => {
                if !field.is_finite() {
                    return Err(RegError::InvalidSpec("warp field has non-finite parameters".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_inliers: usize,
    pub outlier_ratio: f64,
    pub truth: TruthSpec,
    pub noise: BlockNoise,
    pub seed: u64,
    pub extent: Extent,
    pub shape: ShapeSpread,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_inliers: 100,
            outlier_ratio: 0.0,
            truth: TruthSpec::identity(),
            noise: BlockNoise::default(),
            seed: 0,
            extent: Extent::default(),
            shape: ShapeSpread::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RegError::InvalidSpec(msg));
        if self.n_inliers < 3 {
            return bad(format!("n_inliers must be at least 3, got {}", self.n_inliers));
        }
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return bad(format!("outlier_ratio must lie in [0, 1), got {}", self.outlier_ratio));
        }
        let n = self.noise;
        if ![n.dot, n.ddot, n.tdot].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return bad("noise levels must be finite and non-negative".into());
        }
        let e = self.extent;
        if !(e.min[0] < e.max[0] && e.min[1] < e.max[1])
            || !e.min.iter().chain(e.max.iter()).all(|v| v.is_finite())
        {
            return bad("extent must be a finite, non-empty box".into());
        }
        let s = self.shape;
        if !(s.scale_min > 0.0 && s.scale_min <= s.scale_max && s.scale_max.is_finite())
            || !(s.max_shear >= 0.0 && s.max_shear.is_finite())
        {
            return bad("shape spread needs 0 < scale_min <= scale_max and max_shear >= 0".into());
        }
        self.truth.validate()
    }

    /// Outlier frames appended to each set: `⌈n·r/(1−r)⌉`.
    pub fn outlier_count(&self) -> usize {
        let raw = self.n_inliers as f64 * self.outlier_ratio / (1.0 - self.outlier_ratio);
        // guard against 200.00000000000003 rounding up
        (raw - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub data: FrameSet,
    pub model: FrameSet,
    /// `(model_index, data_index)` of every inlier pair.
    pub ground_truth: Vec<(usize, usize)>,
    pub truth: TruthSpec,
}

/// Draws one frame from the scene's frame distribution.
pub fn sample_frame<R: Rng + ?Sized>(rng: &mut R, extent: &Extent, shape: &ShapeSpread) -> FeatureFrame {
    let x = Vector2::new(
        rng.random_range(extent.min[0]..=extent.max[0]),
        rng.random_range(extent.min[1]..=extent.max[1]),
    );
    let s = rng.random_range(shape.scale_min..=shape.scale_max);
    let theta = rng.random_range(0.0..2.0 * PI);
    let k = if shape.max_shear > 0.0 {
        rng.random_range(-shape.max_shear..=shape.max_shear)
    } else {
        0.0
    };
    let a = s * rotation(theta) * Matrix2::new(1.0, k, 0.0, 1.0);
    FeatureFrame { a, x }
}

fn add_noise<R: Rng + ?Sized>(rng: &mut R, v: &FrameVec6, noise: &BlockNoise) -> FrameVec6 {
    let mut draw = |sigma: f64| -> Vector2<f64> {
        if sigma == 0.0 {
            return Vector2::zeros();
        }
        let d = Normal::new(0.0, sigma).expect("validated sigma");
        Vector2::new(d.sample(rng), d.sample(rng))
    };
    let dot = draw(noise.dot);
    let ddot = draw(noise.ddot);
    let tdot = draw(noise.tdot);
    FrameVec6 {
        dot: v.dot + dot,
        ddot: v.ddot + ddot,
        tdot: v.tdot + tdot,
    }
}

/// Transformed and noisy copy of `v` that is still a valid frame.
fn observe<R: Rng + ?Sized>(rng: &mut R, v: &FrameVec6, truth: &TruthSpec, noise: &BlockNoise) -> Result<FrameVec6> {
    let clean = truth.apply(v);
    for _ in 0..100 {
        let noisy = add_noise(rng, &clean, noise);
        if noisy.to_frame().is_ok() {
            return Ok(noisy);
        }
    }
    Err(RegError::InvalidSpec(
        "transformation or noise keeps producing singular data frames".into(),
    ))
}

/// Generates a scene; identical specs give bit-identical scenes.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_inliers;
    let k = spec.outlier_count();

    let mut model = Vec::with_capacity(n + k);
    let mut data = Vec::with_capacity(n + k);
    for _ in 0..n {
        let y = sample_frame(&mut rng, &spec.extent, &spec.shape).to_vec6();
        data.push(observe(&mut rng, &y, &spec.truth, &spec.noise)?);
        model.push(y);
    }
    for _ in 0..k {
        model.push(sample_frame(&mut rng, &spec.extent, &spec.shape).to_vec6());
    }
    for _ in 0..k {
        let fresh = sample_frame(&mut rng, &spec.extent, &spec.shape).to_vec6();
        data.push(observe(&mut rng, &fresh, &spec.truth, &spec.noise)?);
    }
    Ok(Scene {
        data: FrameSet::new(data)?,
        model: FrameSet::new(model)?,
        ground_truth: (0..n).map(|i| (i, i)).collect(),
        truth: spec.truth,
    })
}

/// Moves every frame through a smooth warp: locations are displaced, shape
/// columns are mapped by the warp's local Jacobian.
pub fn apply_nonrigid_truth(model: &FrameSet, field: &WarpField) -> FrameSet {
    FrameSet::new(model.iter().map(|v| field.apply(v)).collect()).expect("non-empty model")
}
