//! Collapsed-coordinate (conical product) Gauss rules on simplices.

use crate::geometry::Point;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q);
    for k in 0..q {
        // Newton iteration on P_q from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=q {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Quadrature rule on a simplex: barycentric points with weights summing to
/// one (multiply by the simplex measure).
#[derive(Debug, Clone)]
pub struct SimplexRule<const N: usize> {
    pub points: Vec<([f64; N], f64)>,
    pub degree: usize,
}

/// Tetrahedron rule with `q³` points, exact for polynomials of degree
/// `2q − 3`.
pub fn tet_rule(q: usize) -> SimplexRule<4> {
    let g = gauss_legendre(q);
    let mut points = Vec::with_capacity(q * q * q);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                let x = u;
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                points.push(([1.0 - x - y - z, x, y, z], 6.0 * wu * wv * ww * jac));
            }
        }
    }
    SimplexRule {
        points,
        degree: 2 * q - 3,
    }
}

/// Triangle rule with `q²` points, exact for polynomials of degree `2q − 2`.
pub fn tri_rule(q: usize) -> SimplexRule<3> {
    let g = gauss_legendre(q);
    let mut points = Vec::with_capacity(q * q);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let x = u;
            let y = v * (1.0 - u);
            points.push(([1.0 - x - y, x, y], 2.0 * wu * wv * (1.0 - u)));
        }
    }
    SimplexRule {
        points,
        degree: 2 * q - 2,
    }
}

pub fn map_point<const N: usize>(bary: &[f64; N], verts: &[Point; N]) -> Point {
    let mut p = [0.0; 3];
    for (l, v) in bary.iter().zip(verts) {
        for d in 0..3 {
            p[d] += l * v[d];
        }
    }
    p
}
