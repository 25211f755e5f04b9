//! Closed-form 2×2 decompositions.

use nalgebra::{Matrix2, Vector2};

/// `a = u · diag(s) · vᵀ` with `s[0] >= s[1] >= 0` and orthogonal `u`, `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd2 {
    pub u: Matrix2<f64>,
    pub s: Vector2<f64>,
    pub v: Matrix2<f64>,
}

#[inline]
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Closed-form SVD of a 2×2 matrix.
///
/// Writes `a` as a rotation-plus-reflection pair: with `e = (a11+a22)/2`,
/// `h = (a21−a12)/2`, `f = (a11−a22)/2`, `g = (a21+a12)/2` the singular
/// values are `hypot(e,h) ± hypot(f,g)`, and both singular-vector frames are
/// rotations by half-angle sums/differences of `atan2(g,f)` and `atan2(h,e)`.
pub fn svd2(a: &Matrix2<f64>) -> Svd2 {
    let e = 0.5 * (a.m11 + a.m22);
    let f = 0.5 * (a.m11 - a.m22);
    let g = 0.5 * (a.m21 + a.m12);
    let h = 0.5 * (a.m21 - a.m12);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let sx = q + r;
    let mut sy = q - r;
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    let mut u = rotation(phi);
    let v = rotation(-theta);
    if sy < 0.0 {
        sy = -sy;
        u.set_column(1, &(-u.column(1)));
    }
    Svd2 {
        u,
        s: Vector2::new(sx, sy),
        v,
    }
}

/// The proper rotation maximizing `tr(aᵀ r)`: `r = U · d(1, det(UVᵀ)) · Vᵀ`.
///
/// A zero matrix carries no orientation information and yields the identity.
pub fn optimal_rotation(a: &Matrix2<f64>) -> Matrix2<f64> {
    if a.iter().all(|v| *v == 0.0) {
        return Matrix2::identity();
    }
    let Svd2 { u, v, .. } = svd2(a);
    let d = (u * v.transpose()).determinant().signum();
    u * Matrix2::new(1.0, 0.0, 0.0, d) * v.transpose()
}

/// Eigenvalues of a symmetric 2×2 matrix, largest first.
pub fn sym_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m.m11 + m.m22);
    let half_diff = 0.5 * (m.m11 - m.m22);
    let off = 0.5 * (m.m12 + m.m21);
    let rad = half_diff.hypot(off);
    (mean + rad, mean - rad)
}
