mod common;

use layered_fsi::assembly::{build_system, energy_norm};
use layered_fsi::evolution::{prepare_smooth_data, simulate, simulate_with, step_cn, CrankNicolson};
use layered_fsi::geometry::{build_mesh, MeshConfig};
use layered_fsi::linalg::{SparseMatrix, TripletBuilder};
use nalgebra::DVector;

fn dist(a: &[f64], b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn one_step_local_error_is_third_order() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    let x0 = prepare_smooth_data(3, &sys).unwrap();
    let err = |tau: f64| dist(&step_cn(&x0, tau, &sys).unwrap(), &common::dense_expm(&d, tau, &x0));
    let (e1, e2) = (err(1e-3), err(5e-4));
    let ratio = e1 / e2;
    assert!((ratio - 8.0).abs() < 0.8, "local error ratio {ratio}");
}

#[test]
fn global_error_converges_at_second_order() {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    let x0 = prepare_smooth_data(3, &sys).unwrap();
    let exact = common::dense_expm(&d, 1.0, &x0);
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&tau| dist(&simulate(&x0, 1.0, tau, &sys).unwrap().final_state, &exact))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.1, "observed order {order} from {errs:?}");
    }
}

#[test]
fn traces_contract_with_exact_energy_balance() {
    let sys = build_system(&build_mesh(&MeshConfig::default()).unwrap()).unwrap();
    let x0 = prepare_smooth_data(5, &sys).unwrap();
    let tr = simulate(&x0, 5.0, 1e-2, &sys).unwrap();
    assert_eq!(tr.samples.len(), 501);
    assert!(tr.is_nonincreasing(0.0));
    assert!(tr.max_balance_residual <= 1e-10 * tr.initial_energy());
    assert!(tr.samples.iter().all(|s| s.energy.is_finite() && s.dissipation >= 0.0));
}

#[test]
fn dissipation_free_subsystem_conserves_energy() {
    let sys = build_system(&build_mesh(&MeshConfig::default()).unwrap()).unwrap();
    // add the fluid stiffness back to cancel the −K_f block of A
    let mut t = TripletBuilder::new(sys.dim(), sys.dim());
    for (i, j, v) in sys.kf.triplets() {
        t.push(i, j, v);
    }
    let a0 = SparseMatrix::combination(&[(1.0, &sys.a), (1.0, &t.build())]);
    let cn = CrankNicolson::new(&sys.m, &a0, 1e-2).unwrap();
    let x0 = prepare_smooth_data(9, &sys).unwrap();
    let e0 = energy_norm(&x0, &sys).powi(2);
    let mut x = x0;
    for _ in 0..1000 {
        x = cn.step(&x).unwrap();
    }
    let e = energy_norm(&x, &sys).powi(2);
    assert!((e - e0).abs() <= 1e-10 * e0, "drift {}", (e - e0).abs() / e0);
}

#[test]
fn reusing_a_stepper_matches_fresh_simulation() {
    let sys = build_system(&build_mesh(&MeshConfig::default()).unwrap()).unwrap();
    let x0 = prepare_smooth_data(2, &sys).unwrap();
    let cn = CrankNicolson::for_system(&sys, 0.05).unwrap();
    let a = simulate_with(&cn, &x0, 1.0, &sys).unwrap();
    let b = simulate(&x0, 1.0, 0.05, &sys).unwrap();
    assert_eq!(a, b);
}
