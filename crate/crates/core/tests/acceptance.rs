//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the libtest harness so the
//! lines are always visible in `cargo test` output.

mod common;

use std::time::Instant;

use common::*;
use framereg_core::io::{
    bench_csv_string, read_bench_csv, BenchRow, FrameRecord, FrameSetFile, ResultFile, TransformRecord,
    TruthFile,
};
use framereg_core::linalg::{optimal_rotation, rotation};
use framereg_core::mixture::e_step;
use framereg_core::{
    affine_m_step, generate, nonrigid_m_step, register, rigid_m_step, run_batch, AffineParams, Block,
    BlockCovariance, BlockNoise, Correspondence, EngineConfig, Extent, KernelMode,
    MixtureConfig, ModelKind, NonRigidParams, Normalization, RigidParams, SceneSpec, ShapeSpread, Similarity,
    Termination, TransformParams, TruthSpec, WarpField,
};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// 1. Exact recovery

fn rigid_truth() -> (f64, f64, [f64; 2]) {
    (20f64.to_radians(), 1.2, [1.0, -0.5])
}

const AFFINE_B: [[f64; 2]; 2] = [[1.1, 0.25], [-0.1, 0.9]];

fn warp() -> WarpField {
    WarpField {
        constant: [0.3, -0.2],
        linear: [[0.05, 0.0], [0.0, -0.05]],
        amplitude: [0.3, 0.3],
        frequency: 0.5,
    }
}

fn exact_recovery() -> Outcome {
    let (theta, scale, t) = rigid_truth();
    let extent = Extent::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for kind in ModelKind::ALL {
        let truth = match kind {
            ModelKind::Rigid => TruthSpec::Rigid { theta, scale, t },
            ModelKind::Affine => TruthSpec::Affine { b: AFFINE_B, t: [0.5, 0.3] },
            ModelKind::NonRigid => TruthSpec::NonRigid(warp()),
        };
        let spec = SceneSpec { n_inliers: 100, truth, seed: 11, extent, ..Default::default() };
        let scene = generate(&spec).unwrap();
        let start = Instant::now();
        let res = register(&scene.data, &scene.model, &EngineConfig::with_kind(kind)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let ok_time = secs < 5.0;
        let (ok, msg) = match &res.transform {
            TransformParams::Rigid(p) => {
                let dr = (p.r - rotation(theta)).norm();
                let ds = (p.s - scale).abs();
                let dt = (p.t - Vector2::from(t)).norm();
                (dr <= 1e-6 && ds <= 1e-6 && dt <= 1e-6, format!("rigid |dr|={dr:.1e} |ds|={ds:.1e} |dt|={dt:.1e}"))
            }
            TransformParams::Affine(p) => {
                let b0 = Matrix2::new(AFFINE_B[0][0], AFFINE_B[0][1], AFFINE_B[1][0], AFFINE_B[1][1]);
                let db = (p.b - b0).norm();
                (db <= 1e-6, format!("affine |dB|={db:.1e}"))
            }
            TransformParams::NonRigid(_) => {
                let moved = res.transform.apply(&scene.model);
                let err = moved
                    .iter()
                    .zip(scene.data.iter())
                    .map(|(a, b)| (a.tdot - b.tdot).norm())
                    .sum::<f64>()
                    / 100.0;
                let bound = 1e-3 * extent.size();
                (err <= bound, format!("nonrigid mean tdot err={err:.2e} (bound {bound:.0e})"))
            }
        };
        pass &= ok && ok_time;
        notes.push(format!("{msg} in {secs:.2}s"));
    }
    outcome(pass, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 2. Posterior normalization

fn posterior_normalization() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let strategy = (
        any::<u64>(),
        1usize..12,
        1usize..12,
        (-12.0f64..6.0, -12.0f64..6.0, -12.0f64..6.0),
        1e-4f64..0.9999,
        any::<bool>(),
    );
    let mut worst = 0.0f64;
    let result = runner.run(&strategy, |(seed, m, n, (l1, l2, l3), omega, loc)| {
        let mut g = rng(seed);
        let model = random_set(&mut g, m);
        let data = random_set(&mut g, n);
        let cov = BlockCovariance { sig_dot2: 10f64.powf(l1), sig_ddot2: 10f64.powf(l2), sig_tdot2: 10f64.powf(l3) };
        let cfg = MixtureConfig { omega, location_only: loc, ..Default::default() };
        let post = e_step(&data, &model, &cov, &cfg);
        for j in 0..n {
            let s = post.p.column(j).sum() + post.outlier_mass[j];
            let gap = (s - 1.0).abs();
            prop_assert!(post.p.column(j).iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(gap <= 1e-9, "column {} sums to {}", j, s);
        }
        Ok(())
    });
    // Re-scan a deterministic sample for the reported worst gap.
    for seed in 0..200u64 {
        let mut g = rng(seed);
        let model = random_set(&mut g, 1 + (seed as usize % 11));
        let data = random_set(&mut g, 1 + (seed as usize * 7 % 11));
        let e = g.random_range(-12.0..6.0);
        let post = e_step(&data, &model, &BlockCovariance::uniform(10f64.powf(e)), &MixtureConfig::default());
        for j in 0..data.count() {
            worst = worst.max((post.p.column(j).sum() + post.outlier_mass[j] - 1.0).abs());
        }
    }
    match result {
        Ok(()) => outcome(true, format!("1000 random instances, worst sampled |sum-1|={worst:.1e}")),
        Err(e) => outcome(false, format!("{e}")),
    }
}

// ---------------------------------------------------------------------------
// 3. Objective monotonicity

fn truth_for(kind: ModelKind, g: &mut ChaCha8Rng) -> TruthSpec {
    match kind {
        ModelKind::Rigid => TruthSpec::Rigid {
            theta: g.random_range(-0.6..0.6),
            scale: g.random_range(0.8..1.3),
            t: [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)],
        },
        ModelKind::Affine => TruthSpec::Affine {
            b: [[g.random_range(0.8..1.2), g.random_range(-0.3..0.3)], [g.random_range(-0.3..0.3), g.random_range(0.8..1.2)]],
            t: [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)],
        },
        ModelKind::NonRigid => TruthSpec::NonRigid(WarpField::sinusoidal(g.random_range(0.1..0.5), g.random_range(0.2..0.6))),
    }
}

fn monotonicity() -> Outcome {
    let mut scenes = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for kind in ModelKind::ALL {
        for i in 0..34u64 {
            let mut g = rng(3000 + i);
            let spec = SceneSpec {
                n_inliers: g.random_range(20..70),
                outlier_ratio: g.random_range(0.0..0.4),
                truth: truth_for(kind, &mut g),
                noise: BlockNoise::uniform(g.random_range(0.0..0.1)),
                seed: 3000 + i,
                ..Default::default()
            };
            let scene = generate(&spec).unwrap();
            let cfg = EngineConfig { location_only: i % 3 == 2, ..EngineConfig::with_kind(kind) };
            let res = register(&scene.data, &scene.model, &cfg).unwrap();
            scenes += 1;
            for w in res.q_trace.windows(2) {
                let rise = w[1] - w[0];
                worst = worst.max(rise);
                if rise > 1e-7 {
                    bad.push(format!("{kind} seed {} rise {rise:.2e}", 3000 + i));
                    break;
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{scenes} scenes, largest per-step increase {worst:.2e}{}", if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }),
    )
}

// ---------------------------------------------------------------------------
// 4. Optimal rotation

fn optimal_rotation_grid() -> Outcome {
    let mut g = rng(4);
    let steps = (2.0 * std::f64::consts::PI / 1e-3).ceil() as usize;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_orth = 0.0f64;
    let mut pass = true;
    for i in 0..200 {
        let scale = 10f64.powi(g.random_range(-3..4));
        let a = Matrix2::from_fn(|_, _| g.random_range(-1.0..1.0) * scale);
        let a = if i % 50 == 0 { Matrix2::new(a.m11, a.m12, 2.0 * a.m11, 2.0 * a.m12) } else { a };
        let r = optimal_rotation(&a);
        let score = (a.transpose() * r).trace();
        let best = (0..steps)
            .map(|k| (a.transpose() * rotation(k as f64 * 1e-3)).trace())
            .fold(f64::NEG_INFINITY, f64::max);
        let orth = (r.transpose() * r - Matrix2::identity()).abs().max().max((r.determinant() - 1.0).abs());
        worst_gap = worst_gap.max(best - score);
        worst_orth = worst_orth.max(orth);
        pass &= score >= best - 1e-12 * (1.0 + best.abs()) && orth <= 1e-9;
    }
    outcome(pass, format!("200 matrices, max(grid - svd)={worst_gap:.1e}, max orthonormality/det error={worst_orth:.1e}"))
}

// ---------------------------------------------------------------------------
// 5. M-step optimality

fn rigid_vec(p: &RigidParams) -> Vec<f64> {
    vec![p.s, p.angle(), p.t.x, p.t.y]
}

fn rigid_from(x: &[f64]) -> TransformParams {
    TransformParams::Rigid(RigidParams { s: x[0], r: rotation(x[1]), t: Vector2::new(x[2], x[3]) })
}

fn affine_from(x: &[f64]) -> TransformParams {
    TransformParams::Affine(AffineParams { b: Matrix2::new(x[0], x[1], x[2], x[3]), t: Vector2::new(x[4], x[5]) })
}

fn w_vec(p: &NonRigidParams) -> Vec<f64> {
    Block::ALL.iter().flat_map(|&b| p.w(b).iter().copied().collect::<Vec<_>>()).collect()
}

fn with_w(p: &NonRigidParams, x: &[f64]) -> NonRigidParams {
    let mut q = p.clone();
    let m = p.model_count();
    for (k, w) in [&mut q.w_dot, &mut q.w_ddot, &mut q.w_tdot].into_iter().enumerate() {
        w.copy_from_slice(&x[k * 2 * m..(k + 1) * 2 * m]);
    }
    q
}

fn mstep_optimality() -> Outcome {
    let mut affine_gap = 0.0f64;
    let mut nonrigid_gap = 0.0f64;
    let mut grad = [0.0f64; 3];
    let mut min_np = f64::INFINITY;
    for seed in 0..40u64 {
        let m = 2 + (seed as usize % 7);
        let n = 2 + (seed as usize * 5 % 7);
        let inst = small_instance(500 + seed, m, n);
        min_np = min_np.min(inst.post.n_p());

        let (rp, _) = rigid_m_step(&inst.data, &inst.model, &inst.post, &inst.cov, &inst.cfg).unwrap();
        let g = fd_gradient(|x| q_at(&inst, &rigid_from(x).apply(&inst.model)), &rigid_vec(&rp));
        grad[0] = grad[0].max(g.iter().fold(0.0, |a, v| a.max(v.abs())));

        let (ap, _) = affine_m_step(&inst.data, &inst.model, &inst.post, &inst.cov, &inst.cfg).unwrap();
        let oracle = affine_oracle(&inst);
        let got = [ap.b.m11, ap.b.m12, ap.b.m21, ap.b.m22, ap.t.x, ap.t.y];
        affine_gap = affine_gap.max(got.iter().zip(&oracle).fold(0.0, |a, (u, v)| a.max((u - v).abs())));
        let g = fd_gradient(|x| q_at(&inst, &affine_from(x).apply(&inst.model)), &got);
        grad[1] = grad[1].max(g.iter().fold(0.0, |a, v| a.max(v.abs())));

        // M = N = 3 with λ = 3, β = 2 is the reference case; sizes vary beyond it.
        let (m3, n3) = if seed < 10 { (3, 3) } else { (m, n) };
        let inst = if seed < 10 { small_instance(900 + seed, m3, n3) } else { inst };
        min_np = min_np.min(inst.post.n_p());
        let params = NonRigidParams::new(&inst.model, 2.0, 3.0, KernelMode::PerBlock).unwrap();
        let (np, _) = nonrigid_m_step(&inst.data, &inst.model, &inst.post, &inst.cov, &params, &inst.cfg).unwrap();
        for b in Block::ALL {
            let oracle = nonrigid_oracle(&inst, b, 2.0, 3.0);
            let w = np.w(b);
            for (r, row) in oracle.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    nonrigid_gap = nonrigid_gap.max((w[(r, k)] - v).abs());
                }
            }
        }
        let g = fd_gradient(
            |x| {
                let p = with_w(&np, x);
                q_at(&inst, &p.transform(&inst.model)) + p.regularizer()
            },
            &w_vec(&np),
        );
        grad[2] = grad[2].max(g.iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    // Instances whose posterior mass sits almost entirely on the outlier
    // term would make every comparison trivial.
    let pass = affine_gap <= 1e-8 && nonrigid_gap <= 1e-8 && grad.iter().all(|g| *g <= 1e-5) && min_np >= 0.1;
    outcome(
        pass,
        format!(
            "40 instances (N, M <= 8, min inlier mass {min_np:.2}): affine vs WLS {affine_gap:.1e}, nonrigid vs naive solve {nonrigid_gap:.1e}, \
             max |dQ| rigid {:.1e} affine {:.1e} nonrigid {:.1e}",
            grad[0], grad[1], grad[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Outlier robustness

const RATIOS: [f64; 5] = [0.15, 0.25, 0.35, 0.45, 0.50];

/// 200 inliers in a 10×10 field, moved by a similarity; location noise 0.1,
/// shape noise 0.02.
fn robustness_scene(ratio: f64) -> SceneSpec {
    let (theta, scale, t) = rigid_truth();
    SceneSpec {
        n_inliers: 200,
        outlier_ratio: ratio,
        truth: TruthSpec::Rigid { theta, scale, t },
        noise: BlockNoise { dot: 0.02, ddot: 0.02, tdot: 0.1 },
        seed: 1000,
        extent: Extent { min: [-5.0, -5.0], max: [5.0, 5.0] },
        shape: ShapeSpread::default(),
    }
}

fn robustness() -> Outcome {
    let start = Instant::now();
    let full_cfg = EngineConfig::default();
    let loc_cfg = EngineConfig { location_only: true, ..EngineConfig::default() };
    let mut pass = true;
    let mut cells = Vec::new();
    for ratio in RATIOS {
        let spec = robustness_scene(ratio);
        let full = run_batch(&spec, &full_cfg, 30).unwrap().f1.mean;
        let loc = run_batch(&spec, &loc_cfg, 30).unwrap().f1.mean;
        pass &= full >= loc;
        if ratio >= 0.35 {
            pass &= full > loc;
        }
        if ratio == 0.35 {
            pass &= full >= 0.9;
        }
        cells.push(format!("{ratio:.2}: {full:.3} vs {loc:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    outcome(pass, format!("mean F1 full vs location-only over 30 trials [{}] in {secs:.0}s", cells.join(", ")))
}

// ---------------------------------------------------------------------------
// 7. Convergence speed

fn convergence_speed() -> Outcome {
    let mut pass = true;
    let mut cells = Vec::new();
    for kind in ModelKind::ALL {
        let truth = match kind {
            ModelKind::Rigid => {
                let (theta, scale, t) = rigid_truth();
                TruthSpec::Rigid { theta, scale, t }
            }
            ModelKind::Affine => TruthSpec::Affine { b: AFFINE_B, t: [0.5, 0.3] },
            ModelKind::NonRigid => TruthSpec::NonRigid(warp()),
        };
        let spec = SceneSpec {
            n_inliers: 100,
            outlier_ratio: 0.2,
            truth,
            noise: BlockNoise { dot: 0.01, ddot: 0.01, tdot: 0.05 },
            seed: 500,
            extent: Extent { min: [-5.0, -5.0], max: [5.0, 5.0] },
            shape: ShapeSpread::default(),
        };
        let base = EngineConfig { tol: 1e-5, max_iters: 150, ..EngineConfig::with_kind(kind) };
        let iters = |cfg: &EngineConfig| {
            let b = run_batch(&spec, cfg, 20).unwrap();
            median(b.trials.iter().map(|t| t.report.iterations as f64).collect())
        };
        let full = iters(&base);
        let loc = iters(&EngineConfig { location_only: true, ..base });
        pass &= full <= loc;
        cells.push(format!("{kind} {full} vs {loc}"));
    }
    outcome(pass, format!("median iterations full vs location-only over 20 scenes: {}", cells.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. Determinism and round trips

fn any_f64(g: &mut ChaCha8Rng) -> f64 {
    match g.random_range(0..6) {
        0 => 0.0,
        1 => g.random_range(-1.0..1.0),
        2 => g.random_range(-1.0..1.0) * 10f64.powi(g.random_range(-300..300)),
        _ => loop {
            let v = f64::from_bits(g.random());
            if v.is_finite() {
                break v;
            }
        },
    }
}

fn any_usize(g: &mut ChaCha8Rng) -> usize {
    g.random::<u64>() as usize
}

fn any_pair(g: &mut ChaCha8Rng) -> [f64; 2] {
    [any_f64(g), any_f64(g)]
}

fn any_mat(g: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    [any_pair(g), any_pair(g)]
}

fn any_frame_record(g: &mut ChaCha8Rng) -> FrameRecord {
    loop {
        let r = FrameRecord {
            a11: any_f64(g),
            a21: any_f64(g),
            a12: any_f64(g),
            a22: any_f64(g),
            x: any_f64(g),
            y: any_f64(g),
        };
        if r.to_frame().is_ok() {
            break r;
        }
    }
}

fn any_truth(g: &mut ChaCha8Rng) -> TruthSpec {
    match g.random_range(0..3) {
        0 => TruthSpec::Rigid { theta: any_f64(g), scale: any_f64(g), t: any_pair(g) },
        1 => TruthSpec::Affine { b: any_mat(g), t: any_pair(g) },
        _ => TruthSpec::NonRigid(WarpField {
            constant: any_pair(g),
            linear: any_mat(g),
            amplitude: any_pair(g),
            frequency: any_f64(g),
        }),
    }
}

fn any_spec(g: &mut ChaCha8Rng) -> SceneSpec {
    SceneSpec {
        n_inliers: g.random_range(0..100_000),
        outlier_ratio: any_f64(g),
        truth: any_truth(g),
        noise: BlockNoise { dot: any_f64(g), ddot: any_f64(g), tdot: any_f64(g) },
        seed: g.random(),
        extent: Extent { min: any_pair(g), max: any_pair(g) },
        shape: ShapeSpread { scale_min: any_f64(g), scale_max: any_f64(g), max_shear: any_f64(g) },
    }
}

fn any_config(g: &mut ChaCha8Rng) -> EngineConfig {
    EngineConfig {
        model_kind: ModelKind::ALL[g.random_range(0..3)],
        omega_init: any_f64(g),
        lambda: any_f64(g),
        beta: any_f64(g),
        match_threshold: any_f64(g),
        tol: any_f64(g),
        max_iters: g.random_range(0..usize::MAX),
        location_only: g.random(),
        one_to_one: g.random(),
        normalize: g.random(),
        kernel_mode: if g.random() { KernelMode::PerBlock } else { KernelMode::SpatialShared },
        omega_bounds: (any_f64(g), any_f64(g)),
        var_floor: any_f64(g),
        min_inlier_fraction: any_f64(g),
    }
}

fn any_result(g: &mut ChaCha8Rng) -> ResultFile {
    let m = g.random_range(0..6);
    let cols = |g: &mut ChaCha8Rng| (0..m).map(|_| any_pair(g)).collect::<Vec<_>>();
    let transform = match g.random_range(0..3) {
        0 => TransformRecord::Rigid { s: any_f64(g), r: any_mat(g), t: any_pair(g) },
        1 => TransformRecord::Affine { b: any_mat(g), t: any_pair(g) },
        _ => TransformRecord::NonRigid {
            beta: any_f64(g),
            lambda: any_f64(g),
            kernel_mode: if g.random() { KernelMode::PerBlock } else { KernelMode::SpatialShared },
            global_b: any_mat(g),
            global_t: any_pair(g),
            w_dot: cols(g),
            w_ddot: cols(g),
            w_tdot: cols(g),
        },
    };
    let sim = |g: &mut ChaCha8Rng| Similarity { mu: any_pair(g), scale: any_f64(g) };
    ResultFile {
        version: 1,
        config: any_config(g),
        transform,
        covariance: BlockCovariance { sig_dot2: any_f64(g), sig_ddot2: any_f64(g), sig_tdot2: any_f64(g) },
        omega: any_f64(g),
        normalization: Normalization { data: sim(g), model: sim(g) },
        correspondences: (0..g.random_range(0..8))
            .map(|_| Correspondence { model_index: any_usize(g), data_index: any_usize(g), posterior: any_f64(g) })
            .collect(),
        q_trace: (0..g.random_range(0..8)).map(|_| any_f64(g)).collect(),
        iterations: any_usize(g),
        converged: g.random(),
        termination: [Termination::Converged, Termination::MaxIterations, Termination::Degenerate][g.random_range(0..3)],
    }
}

fn any_bench_row(g: &mut ChaCha8Rng) -> BenchRow {
    BenchRow {
        ratio: any_f64(g),
        f1_mean: any_f64(g),
        f1_var: any_f64(g),
        precision_mean: any_f64(g),
        recall_mean: any_f64(g),
        iters_mean: any_f64(g),
        iters_var: any_f64(g),
        time_mean: any_f64(g),
        failures: any_usize(g),
        mode: if g.random() { "full".into() } else { "location_only".into() },
    }
}

fn round_trips() -> std::result::Result<(), String> {
    let mut g = rng(8);
    for i in 0..1000 {
        let frames = FrameSetFile {
            version: 1,
            units: ["px", "mm", "", "ünits \"quoted\""][i % 4].to_string(),
            frames: (0..g.random_range(1..6)).map(|_| any_frame_record(&mut g)).collect(),
        };
        let text = frames.to_text();
        let back = FrameSetFile::parse(&text).map_err(|e| format!("frame set {i}: {e}"))?;
        if back != frames || back.to_text() != text {
            return Err(format!("frame set {i} changed"));
        }

        let res = any_result(&mut g);
        let text = res.to_text();
        let back = ResultFile::parse(&text).map_err(|e| format!("result {i}: {e}"))?;
        if back != res || back.to_text() != text {
            return Err(format!("result {i} changed"));
        }

        let truth = TruthFile {
            version: 1,
            seed: g.random(),
            spec: any_spec(&mut g),
            pairs: (0..g.random_range(0..10)).map(|_| (any_usize(&mut g), any_usize(&mut g))).collect(),
        };
        let text = truth.to_text();
        let back = TruthFile::parse(&text).map_err(|e| format!("truth {i}: {e}"))?;
        if back != truth || back.to_text() != text {
            return Err(format!("truth {i} changed"));
        }

        let rows: Vec<_> = (0..g.random_range(1..5)).map(|_| any_bench_row(&mut g)).collect();
        let text = bench_csv_string(&rows);
        let back = read_bench_csv(text.as_bytes()).map_err(|e| format!("csv {i}: {e}"))?;
        if back != rows || bench_csv_string(&back) != text {
            return Err(format!("csv {i} changed"));
        }
    }
    Ok(())
}

fn determinism() -> std::result::Result<(), String> {
    for kind in ModelKind::ALL {
        let spec = SceneSpec {
            n_inliers: 40,
            outlier_ratio: 0.3,
            truth: TruthSpec::Rigid { theta: 0.3, scale: 1.1, t: [0.4, 0.1] },
            noise: BlockNoise::uniform(0.05),
            seed: 77,
            ..Default::default()
        };
        let texts = (0..2)
            .map(|_| {
                let scene = generate(&spec).unwrap();
                let cfg = EngineConfig::with_kind(kind);
                let res = register(&scene.data, &scene.model, &cfg).unwrap();
                [
                    FrameSetFile::from_set(&scene.data, "px").to_text(),
                    FrameSetFile::from_set(&scene.model, "px").to_text(),
                    TruthFile::from_scene(&scene, &spec).to_text(),
                    ResultFile::from_result(&res, &cfg).to_text(),
                ]
            })
            .collect::<Vec<_>>();
        if texts[0] != texts[1] {
            return Err(format!("{kind}: repeated run differs"));
        }
    }
    let spec = SceneSpec { n_inliers: 30, outlier_ratio: 0.2, noise: BlockNoise::uniform(0.05), seed: 5, ..Default::default() };
    let csv = |_| {
        let s = run_batch(&spec, &EngineConfig::default(), 6).unwrap();
        let mut row = BenchRow::from_summary(&s);
        row.time_mean = 0.0;
        bench_csv_string(&[row])
    };
    if csv(0) != csv(1) {
        return Err("batch summary differs between runs".into());
    }
    Ok(())
}

fn determinism_and_round_trip() -> Outcome {
    match determinism().and_then(|_| round_trips()) {
        Ok(()) => outcome(true, "repeated seeded runs byte-identical; 1000 random values per format round-trip exactly"),
        Err(e) => outcome(false, e),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 exact recovery", exact_recovery),
        ("2 posterior normalization", posterior_normalization),
        ("3 objective monotonicity", monotonicity),
        ("4 optimal rotation", optimal_rotation_grid),
        ("5 M-step optimality", mstep_optimality),
        ("6 outlier robustness", robustness),
        ("7 convergence speed", convergence_speed),
        ("8 determinism and round trip", determinism_and_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
