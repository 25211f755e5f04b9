//! Fixtures shared by the registration benchmarks.

use framereg_core::{generate, BlockNoise, FrameSet, SceneSpec, TruthSpec};

/// A rigidly moved scene with `n` inliers and the given outlier ratio.
pub fn rigid_fixture(n: usize, outlier_ratio: f64, seed: u64) -> (FrameSet, FrameSet) {
    let spec = SceneSpec {
        n_inliers: n,
        outlier_ratio,
        truth: TruthSpec::Rigid { theta: 0.2, scale: 1.1, t: [0.5, -0.3] },
        noise: BlockNoise::uniform(0.02),
        seed,
        ..Default::default()
    };
    let scene = generate(&spec).expect("valid fixture spec");
    (scene.data, scene.model)
}
