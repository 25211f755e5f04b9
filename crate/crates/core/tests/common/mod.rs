//! Independent oracles shared by the integration suites. Everything here is
//! written with plain loops over `f64` so it shares no code with the solvers.

#![allow(dead_code, clippy::needless_range_loop)]

use framereg_core::mixture::{e_step, q_value};
use framereg_core::synth::{sample_frame, Extent, ShapeSpread};
use framereg_core::{
    Block, BlockCovariance, FrameSet, FrameVec6, MixtureConfig, PosteriorMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize) -> FrameSet {
    let (e, s) = (Extent::default(), ShapeSpread::default());
    FrameSet::new((0..n).map(|_| sample_frame(rng, &e, &s).to_vec6()).collect()).unwrap()
}

/// Data = a perturbed copy of the model under a mild affine map, plus a few
/// extra frames, so posteriors are neither uniform nor one-hot.
pub struct SmallInstance {
    pub data: FrameSet,
    pub model: FrameSet,
    pub post: PosteriorMatrix,
    pub cov: BlockCovariance,
    pub cfg: MixtureConfig,
}

pub fn small_instance(seed: u64, m: usize, n: usize) -> SmallInstance {
    let mut g = rng(seed);
    let model = random_set(&mut g, m);
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let base = if i < m { *model.get(i) } else { *random_set(&mut g, 1).get(0) };
        let mut a = base.to_array();
        for v in a.iter_mut() {
            *v += g.random_range(-0.3..0.3);
        }
        a[4] += 0.5;
        data.push(FrameVec6::from_array(a));
    }
    let data = FrameSet::new(data).unwrap();
    let cfg = MixtureConfig { omega: g.random_range(0.05..0.4), ..Default::default() };
    // Spreads comparable to the perturbation keep posteriors soft but not
    // dominated by the outlier term.
    let cov = BlockCovariance {
        sig_dot2: g.random_range(0.02..0.2),
        sig_ddot2: g.random_range(0.02..0.2),
        sig_tdot2: g.random_range(0.3..3.0),
    };
    let post = e_step(&data, &model, &cov, &cfg);
    SmallInstance { data, model, post, cov, cfg }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

fn block_of(v: &FrameVec6, b: Block) -> [f64; 2] {
    let a = v.to_array();
    let o = 2 * b.index();
    [a[o], a[o + 1]]
}

pub fn active(cfg: &MixtureConfig) -> Vec<Block> {
    if cfg.location_only {
        vec![Block::Tdot]
    } else {
        Block::ALL.to_vec()
    }
}

/// Weighted least squares for `x_b ≈ B y_b (+ t on locations)`, unknowns
/// `[b11, b12, b21, b22, t1, t2]`, weights `p / σ_b²`.
pub fn affine_oracle(inst: &SmallInstance) -> [f64; 6] {
    let mut ata = vec![vec![0.0; 6]; 6];
    let mut atb = vec![0.0; 6];
    for n in 0..inst.data.count() {
        for m in 0..inst.model.count() {
            let p = inst.post.p[(m, n)];
            for b in active(&inst.cfg) {
                let w = p / inst.cov.get(b);
                let y = block_of(inst.model.get(m), b);
                let x = block_of(inst.data.get(n), b);
                let d = if b == Block::Tdot { 1.0 } else { 0.0 };
                let rows = [[y[0], y[1], 0.0, 0.0, d, 0.0], [0.0, 0.0, y[0], y[1], 0.0, d]];
                for (r, row) in rows.iter().enumerate() {
                    for i in 0..6 {
                        atb[i] += w * row[i] * x[r];
                        for j in 0..6 {
                            ata[i][j] += w * row[i] * row[j];
                        }
                    }
                }
            }
        }
    }
    let s = gauss_solve(ata, atb);
    [s[0], s[1], s[2], s[3], s[4], s[5]]
}

pub fn naive_kernel(model: &FrameSet, b: Block, beta: f64) -> Vec<Vec<f64>> {
    let m = model.count();
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let (u, v) = (block_of(model.get(i), b), block_of(model.get(j), b));
            let d2 = (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2);
            g[i][j] = (-d2 / (2.0 * beta)).exp();
        }
    }
    g
}

/// Coefficients of one block from `W (G d(P1) + λσ²I) = X Pᵀ − Y d(P1)`,
/// assembled entry by entry and solved row by row. Returns `w[row][m]`.
pub fn nonrigid_oracle(inst: &SmallInstance, b: Block, beta: f64, lambda: f64) -> [Vec<f64>; 2] {
    let m = inst.model.count();
    let g = naive_kernel(&inst.model, b, beta);
    let mut p1 = vec![0.0; m];
    for i in 0..m {
        for n in 0..inst.data.count() {
            p1[i] += inst.post.p[(i, n)];
        }
    }
    let c = lambda * inst.cov.get(b);
    // S[k][j] = G[k][j] P1[j] + c δ; W S = R  ⇔  Sᵀ wᵀ = Rᵀ.
    let mut st = vec![vec![0.0; m]; m];
    for k in 0..m {
        for j in 0..m {
            st[j][k] = g[k][j] * p1[j] + if j == k { c } else { 0.0 };
        }
    }
    let mut out = [vec![], vec![]];
    for (r, slot) in out.iter_mut().enumerate() {
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            let mut s = 0.0;
            for n in 0..inst.data.count() {
                s += block_of(inst.data.get(n), b)[r] * inst.post.p[(j, n)];
            }
            rhs[j] = s - block_of(inst.model.get(j), b)[r] * p1[j];
        }
        *slot = gauss_solve(st.clone(), rhs);
    }
    out
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    g
}

/// `Q` at fixed posterior and covariance for an arbitrary transformed model.
pub fn q_at(inst: &SmallInstance, transformed: &FrameSet) -> f64 {
    q_value(&inst.data, transformed, &inst.post, &inst.cov, &inst.cfg)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
