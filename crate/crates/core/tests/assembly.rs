mod common;

use layered_fsi::assembly::{build_system, energy_norm, graph_norm};
use layered_fsi::geometry::{build_mesh, MeshConfig};
use layered_fsi::linalg::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tiny_mesh_matches_dense_weak_form() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    assert_eq!(d.m.nrows(), sys.dim());
    let (m, a) = (sys.m.to_dense(), sys.a.to_dense());
    let scale = d.m.amax().max(d.a.amax());
    assert!((&m - &d.m).amax() <= 1e-12 * scale, "M differs by {}", (&m - &d.m).amax());
    assert!((&a - &d.a).amax() <= 1e-12 * scale, "A differs by {}", (&a - &d.a).amax());
}

#[test]
fn tiny_mesh_norms_match_dense_gram() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xv = DVector::from_column_slice(&x);
        let e = (xv.transpose() * &d.m * &xv)[(0, 0)].sqrt();
        assert!((energy_norm(&x, &sys) - e).abs() <= 1e-12 * e);
        let y = d.m.clone().lu().solve(&(&d.a * &xv)).unwrap();
        let g = e + (y.transpose() * &d.m * &y)[(0, 0)].sqrt();
        assert!((graph_norm(&x, &sys) - g).abs() <= 1e-10 * g);
    }
}

#[test]
fn composite_gram_is_positive_definite() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    let dense_min = d.m.symmetric_eigenvalues().min();
    assert!(dense_min > 0.0);
    assert!((sys.gram_min_eigenvalue() - dense_min).abs() <= 1e-6 * dense_min);
}

#[test]
fn complex_states_satisfy_dissipation_identity_on_tiny_mesh() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let d = common::dense_system(&mesh, &c);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<C64> = (0..d.m.nrows())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let xv = common::cvec(&x);
    let xax = (xv.adjoint() * common::cmat(&d.a) * &xv)[(0, 0)].re;
    let ukf = (xv.adjoint() * common::cmat(&d.kf) * &xv)[(0, 0)].re;
    assert!((xax + ukf).abs() < 1e-12 * ukf);
}

fn smallest_nonzero_lb_eigenvalue(n: usize) -> f64 {
    let mesh = build_mesh(&MeshConfig::default().with_n(n)).unwrap();
    let sys = build_system(&mesh).unwrap();
    let (k, m): (DMatrix<f64>, DMatrix<f64>) = (sys.kg.to_dense(), sys.mg.to_dense());
    let l = m.cholesky().unwrap();
    let linv = l.l().try_inverse().unwrap();
    let s = &linv * k * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    assert!(ev[0].abs() < 1e-10, "constants are the kernel");
    assert!(ev[1] > 1e-6);
    ev[1]
}

#[test]
fn laplace_beltrami_spectrum_stabilizes_under_refinement() {
    let l8 = smallest_nonzero_lb_eigenvalue(8);
    let l16 = smallest_nonzero_lb_eigenvalue(16);
    assert!((l8 - l16).abs() <= 0.02 * l16, "λ1: n=8 {l8}, n=16 {l16}");
}
