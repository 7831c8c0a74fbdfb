//! Dense reference implementations used as test oracles. Nothing here calls
//! into the library's assembly code: element matrices come from quadrature
//! on explicitly solved affine basis functions.

#![allow(dead_code)]

use layered_fsi::geometry::{Mesh, MeshConfig, Region};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64 as C64;

pub struct DenseSystem {
    pub m: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Fluid stiffness pulled back to the state.
    pub kf: DMatrix<f64>,
    /// Fluid mass pulled back to the state.
    pub mf: DMatrix<f64>,
    pub nu: usize,
}

fn on_box_surface(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> bool {
    let inside = (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
    inside && (0..3).any(|a| p[a] == lo[a] || p[a] == hi[a])
}

fn strictly_inside(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> bool {
    (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a])
}

/// Vertex classes by coordinates: (fluid interior, interface, solid interior).
pub fn classify(mesh: &Mesh, c: &MeshConfig) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut fi = Vec::new();
    let mut g = Vec::new();
    let mut si = Vec::new();
    for (v, &p) in mesh.vertices.iter().enumerate() {
        if on_box_surface(p, c.inner_lo, c.inner_hi) {
            g.push(v);
        } else if strictly_inside(p, c.inner_lo, c.inner_hi) {
            si.push(v);
        } else if strictly_inside(p, c.outer_lo, c.outer_hi) {
            fi.push(v);
        }
    }
    (fi, g, si)
}

fn tet_local(p: [[f64; 3]; 4]) -> (DMatrix<f64>, DMatrix<f64>) {
    // columns of the inverse hold the affine coefficients of each hat
    let mut v = Matrix4::zeros();
    for i in 0..4 {
        v[(i, 0)] = 1.0;
        for k in 0..3 {
            v[(i, k + 1)] = p[i][k];
        }
    }
    let c = v.try_inverse().unwrap();
    let e1: [f64; 3] = std::array::from_fn(|k| p[1][k] - p[0][k]);
    let e2: [f64; 3] = std::array::from_fn(|k| p[2][k] - p[0][k]);
    let e3: [f64; 3] = std::array::from_fn(|k| p[3][k] - p[0][k]);
    let vol = nalgebra::Matrix3::from_columns(&[e1.into(), e2.into(), e3.into()])
        .determinant()
        .abs()
        / 6.0;
    let mut k = DMatrix::zeros(4, 4);
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            k[(i, j)] = vol * (1..4).map(|d| c[(d, i)] * c[(d, j)]).sum::<f64>();
        }
    }
    let (a, b) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
    let bary = [[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]];
    for w in bary {
        let x: [f64; 3] = std::array::from_fn(|d| (0..4).map(|q| w[q] * p[q][d]).sum());
        let phi: Vec<f64> = (0..4)
            .map(|i| (Vector4::new(1.0, x[0], x[1], x[2])).dot(&c.column(i)))
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] += vol / 4.0 * phi[i] * phi[j];
            }
        }
    }
    (m, k)
}

fn tri_local(p: [[f64; 3]; 3]) -> (DMatrix<f64>, DMatrix<f64>) {
    let pv: Vec<nalgebra::Vector3<f64>> = p.iter().map(|q| nalgebra::Vector3::from(*q)).collect();
    let n = (pv[1] - pv[0]).cross(&(pv[2] - pv[0]));
    let area = 0.5 * n.norm();
    let nh = n / n.norm();
    // ∇φ_i = ν̂ × (p_{i+2} − p_{i+1}) / (2|T|)
    let grads: Vec<_> = (0..3)
        .map(|i| nh.cross(&(pv[(i + 2) % 3] - pv[(i + 1) % 3])) / (2.0 * area))
        .collect();
    let mut k = DMatrix::zeros(3, 3);
    let mut m = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            k[(i, j)] = area * grads[i].dot(&grads[j]);
        }
    }
    // edge-midpoint rule, exact for quadratics
    for e in 0..3 {
        let mut phi = [0.5; 3];
        phi[(e + 2) % 3] = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += area / 3.0 * phi[i] * phi[j];
            }
        }
    }
    (m, k)
}

/// Full vertex-indexed dense matrices: (M_f, K_f, M_s, K_s, M_Γ, K_Γ).
pub fn vertex_matrices(mesh: &Mesh) -> [DMatrix<f64>; 6] {
    let n = mesh.vertices.len();
    let mut out: [DMatrix<f64>; 6] = std::array::from_fn(|_| DMatrix::zeros(n, n));
    for t in &mesh.tets {
        let (m, k) = tet_local(t.vertices.map(|v| mesh.vertices[v]));
        let off = if t.region == Region::Fluid { 0 } else { 2 };
        for i in 0..4 {
            for j in 0..4 {
                out[off][(t.vertices[i], t.vertices[j])] += m[(i, j)];
                out[off + 1][(t.vertices[i], t.vertices[j])] += k[(i, j)];
            }
        }
    }
    for b in mesh.interface_tris() {
        let (m, k) = tri_local(b.vertices.map(|v| mesh.vertices[v]));
        for i in 0..3 {
            for j in 0..3 {
                out[4][(b.vertices[i], b.vertices[j])] += m[(i, j)];
                out[5][(b.vertices[i], b.vertices[j])] += k[(i, j)];
            }
        }
    }
    out
}

/// Dense `(M, A)` built from the energy and the weak form with the state
/// layout `[u(fi, Γ), h0(Γ), w0(si), w1(si)]`.
pub fn dense_system(mesh: &Mesh, c: &MeshConfig) -> DenseSystem {
    let (fi, g, si) = classify(mesh, c);
    let nv = mesh.vertices.len();
    let (nf, ng, ns) = (fi.len(), g.len(), si.len());
    let n = nf + 2 * ng + 2 * ns;
    let nu = nf + ng;
    // prolongations from the state to vertex fields
    let mut pu = DMatrix::zeros(nv, n);
    let mut ph0 = DMatrix::zeros(nv, n);
    let mut ph1 = DMatrix::zeros(nv, n);
    let mut pw0 = DMatrix::zeros(nv, n);
    let mut pw1 = DMatrix::zeros(nv, n);
    for (k, &v) in fi.iter().enumerate() {
        pu[(v, k)] = 1.0;
    }
    for (k, &v) in g.iter().enumerate() {
        pu[(v, nf + k)] = 1.0;
        ph1[(v, nf + k)] = 1.0;
        pw1[(v, nf + k)] = 1.0;
        ph0[(v, nu + k)] = 1.0;
        pw0[(v, nu + k)] = 1.0;
    }
    for (k, &v) in si.iter().enumerate() {
        pw0[(v, nu + ng + k)] = 1.0;
        pw1[(v, nu + ng + ns + k)] = 1.0;
    }
    let [mf, kf, ms, ks, mg, kg] = vertex_matrices(mesh);
    let hg = &kg + &mg;
    let m = pu.transpose() * &mf * &pu
        + ph0.transpose() * &hg * &ph0
        + ph1.transpose() * &mg * &ph1
        + pw0.transpose() * &ks * &pw0
        + pw1.transpose() * &ms * &pw1;
    let kfs = pu.transpose() * &kf * &pu;
    let a = ph0.transpose() * &hg * &ph1 + pw0.transpose() * &ks * &pw1
        - ph1.transpose() * &hg * &ph0
        - pw1.transpose() * &ks * &pw0
        - &kfs;
    let mfs = pu.transpose() * &mf * &pu;
    DenseSystem { m, a, kf: kfs, mf: mfs, nu }
}

pub fn cmat(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn cvec(x: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(x)
}

/// Dense resolvent solve `(iβM − A)x = Mb`.
pub fn dense_resolvent(d: &DenseSystem, beta: f64, b: &[C64]) -> DVector<C64> {
    let lhs = cmat(&d.m) * C64::new(0.0, beta) - cmat(&d.a);
    let rhs = cmat(&d.m) * cvec(b);
    lhs.lu().solve(&rhs).unwrap()
}

/// Dense `exp(t M⁻¹A) x0`.
pub fn dense_expm(d: &DenseSystem, t: f64, x0: &[f64]) -> DVector<f64> {
    let g = d.m.clone().lu().solve(&d.a).unwrap() * t;
    g.exp() * DVector::from_column_slice(x0)
}

/// Largest singular value of `T` in the `M` norm: ‖L^T T L^{-T}‖₂ for M = LLᵀ.
pub fn dense_gram_opnorm(t: &DMatrix<C64>, m: &DMatrix<f64>) -> f64 {
    let l = cmat(&m.clone().cholesky().unwrap().l());
    let lt = l.adjoint();
    let lt_inv = lt.clone().try_inverse().unwrap();
    (lt * t * lt_inv).singular_values().max()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Solid stiffness and mass on `[interface, solid interior]`.
pub fn dense_solid(mesh: &Mesh, c: &MeshConfig) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let (_, g, si) = classify(mesh, c);
    let idx: Vec<usize> = g.iter().chain(&si).copied().collect();
    let [_, _, ms, ks, _, _] = vertex_matrices(mesh);
    let pick = |a: &DMatrix<f64>| DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
    (pick(&ks), pick(&ms), g.len())
}
