//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use layered_fsi::assembly::{build_system, energy_norm, SystemMatrices};
use layered_fsi::evolution::{fit_decay, prepare_smooth_data, simulate};
use layered_fsi::geometry::{build_mesh, MeshConfig};
use layered_fsi::proof_probe::manufactured_study;
use layered_fsi::resolvent::{
    dissipation_residual, fit_growth, log_grid, random_state, solve_static, sweep, sweep_csv, trend_slope,
    ResolventSample, SweepOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const DISSIPATION_TOL: f64 = 1e-9;
const BALANCE_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 0.1;
const GROWTH_BOUND: f64 = 5.5 + 0.25;
const GROWTH_DRIFT: f64 = 0.5;
const DECAY_BOUND: f64 = 2.0 / 11.0 - 0.02;
const POINCARE_SLOPE: f64 = 0.05;
const Z_TRACE_TOL: f64 = 1e-12;
const ENERGY_ORDER: f64 = 1.0;
const MULTIPLIER_ORDER: f64 = 0.5;
const CHAIN_SLOPE: f64 = 0.1;
const PROBE_SEEDS: [u64; 2] = [0x0b5e_0001, 0x0b5e_0002];

type Outcome = Result<String, String>;

fn system(n: usize) -> SystemMatrices {
    build_system(&build_mesh(&MeshConfig::default().with_n(n)).unwrap()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dissipation_identity() -> Outcome {
    let sys = system(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let beta = rng.gen_range(-200.0..200.0);
        let b = random_state(1000 + k, &sys);
        let x = solve_static(beta, &b, &sys).map_err(|e| e.to_string())?;
        worst = worst.max(dissipation_residual(&b, &x, &sys) / energy_norm(&b, &sys).powi(2));
    }
    check(worst <= DISSIPATION_TOL, format!("max |u*K_f u - Re<b,x>_H| / |b|^2 = {worst:.3e} (tol {DISSIPATION_TOL:.0e})"))
}

fn energy_balance() -> Outcome {
    let sys = system(4);
    let x0 = prepare_smooth_data(1, &sys).map_err(|e| e.to_string())?;
    let tr = simulate(&x0, 100.0, 1e-2, &sys).map_err(|e| e.to_string())?;
    let steps = tr.samples.len() - 1;
    let rel = tr.max_balance_residual / tr.initial_energy();
    let mono = tr.is_nonincreasing(0.0);
    check(
        mono && rel <= BALANCE_TOL && steps >= 10_000,
        format!("{steps} steps, nonincreasing = {mono}, max balance residual / E(0) = {rel:.3e} (tol {BALANCE_TOL:.0e})"),
    )
}

fn oracle_equivalence() -> Outcome {
    let c = MeshConfig::tiny();
    let mesh = build_mesh(&c).unwrap();
    let sys = build_system(&mesh).unwrap();
    let d = common::dense_system(&mesh, &c);
    let mut worst = 0.0f64;
    for (k, beta) in [0.0, 1.0, -4.0, 25.0, 150.0].into_iter().enumerate() {
        let b = random_state(k as u64, &sys);
        let x = solve_static(beta, &b, &sys).map_err(|e| e.to_string())?;
        let y = common::dense_resolvent(&d, beta, &b);
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst = worst.max(common::max_abs_diff(&x, y.as_slice()) / scale);
    }
    let x0 = prepare_smooth_data(3, &sys).map_err(|e| e.to_string())?;
    let exact = common::dense_expm(&d, 1.0, &x0);
    let mut errs = Vec::new();
    for tau in [1e-2, 5e-3, 2.5e-3] {
        let tr = simulate(&x0, 1.0, tau, &sys).map_err(|e| e.to_string())?;
        let e: f64 = tr.final_state.iter().zip(exact.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        errs.push(e);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = worst <= ORACLE_TOL && orders.iter().all(|o| (o - 2.0).abs() <= ORDER_TOL);
    check(
        ok,
        format!("resolvent rel diff {worst:.3e} (tol {ORACLE_TOL:.0e}); time orders {orders:.3?} (2 ± {ORDER_TOL})"),
    )
}

struct Sweeps {
    /// `(n, samples)` per mesh for each probe seed, in `PROBE_SEEDS` order.
    runs: Vec<(usize, Vec<Vec<ResolventSample>>)>,
}

fn run_sweeps() -> Result<Sweeps, String> {
    let grid = log_grid(20.0, 200.0, 25);
    let mut runs = Vec::new();
    for n in [4, 8] {
        let sys = system(n);
        let mut per_seed = Vec::new();
        for (k, &seed) in PROBE_SEEDS.iter().enumerate() {
            let opts = SweepOptions {
                probe_seed: seed,
                opnorm: k == 0,
                ..Default::default()
            };
            per_seed.push(sweep(&grid, &sys, &opts).map_err(|e| e.to_string())?);
        }
        runs.push((n, per_seed));
    }
    Ok(Sweeps { runs })
}

fn growth(s: &Sweeps) -> Outcome {
    let mut slopes = Vec::new();
    for (n, per_seed) in &s.runs {
        let g = fit_growth(&per_seed[0]).map_err(|e| e.to_string())?;
        slopes.push((*n, g.slope));
    }
    let drift = slopes[1].1 - slopes[0].1;
    let ok = slopes.iter().all(|(_, v)| *v <= GROWTH_BOUND) && drift <= GROWTH_DRIFT;
    check(
        ok,
        format!(
            "slopes n=4: {:.3}, n=8: {:.3} (bound {GROWTH_BOUND}); refinement drift {drift:.3} (bound {GROWTH_DRIFT})",
            slopes[0].1, slopes[1].1
        ),
    )
}

fn decay() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [4, 8] {
        let sys = system(n);
        let x0 = prepare_smooth_data(1, &sys).map_err(|e| e.to_string())?;
        let tr = simulate(&x0, 50.0, 1e-2, &sys).map_err(|e| e.to_string())?;
        let f = fit_decay(&tr, (1.0, 50.0)).map_err(|e| e.to_string())?;
        ok &= f.exponent >= DECAY_BOUND;
        parts.push(format!("n={n}: {:.3}", f.exponent));
    }
    check(ok, format!("decay exponents {} (bound {DECAY_BOUND:.4})", parts.join(", ")))
}

fn poincare(s: &Sweeps) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, per_seed) in &s.runs {
        for (seed, samples) in PROBE_SEEDS.iter().zip(per_seed) {
            let slope = trend_slope(samples, |r| r.poincare_ratio).unwrap_or(f64::NAN);
            ok &= slope <= POINCARE_SLOPE;
            parts.push(format!("n={n}/seed={seed:#x}: {slope:.3}"));
        }
    }
    check(ok, format!("poincare trend slopes {} (bound {POINCARE_SLOPE})", parts.join(", ")))
}

fn z_trace(s: &Sweeps) -> Outcome {
    let all: Vec<&ResolventSample> = s.runs.iter().flat_map(|(_, p)| p.iter().flatten()).collect();
    let worst = all.iter().map(|r| r.z_boundary).fold(0.0, f64::max);
    check(
        worst <= Z_TRACE_TOL && all.iter().all(|r| r.z_boundary.is_finite()),
        format!("max relative interface trace of z over {} samples: {worst:.3e} (tol {Z_TRACE_TOL:.0e})", all.len()),
    )
}

fn multiplier() -> Outcome {
    let study = manufactured_study(&[4, 8, 16], 2.0, 1.0).map_err(|e| e.to_string())?;
    let ok = study.order_energy.iter().all(|&o| o >= ENERGY_ORDER) && study.order_multiplier.iter().all(|&o| o >= MULTIPLIER_ORDER);
    check(
        ok,
        format!(
            "orders energy {:.3?} (≥ {ENERGY_ORDER}), multiplier {:.3?} (≥ {MULTIPLIER_ORDER})",
            study.order_energy, study.order_multiplier
        ),
    )
}

fn chain(s: &Sweeps) -> Outcome {
    let fields: [(&str, fn(&ResolventSample) -> f64); 6] = [
        ("trace", |r| r.trace_ratio),
        ("flux", |r| r.flux_ratio),
        ("crux", |r| r.r_crux),
        ("s3", |r| r.r_s3),
        ("I1", |r| r.r_i1),
        ("dtn", |r| r.dtn_norm),
    ];
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = "";
    for (_, per_seed) in &s.runs {
        for samples in per_seed {
            for (name, f) in &fields {
                ok &= samples.iter().all(|r| f(r).is_finite() && !r.degenerate);
                let slope = trend_slope(samples, f).unwrap_or(f64::NAN);
                ok &= slope <= CHAIN_SLOPE;
                if !(slope <= worst) {
                    worst = slope;
                    worst_name = name;
                }
            }
        }
    }
    check(ok, format!("largest trend slope {worst:.3} ({worst_name}) (bound {CHAIN_SLOPE}); all ratios finite"))
}

fn determinism() -> Outcome {
    let sys = system(4);
    let run_sim = || -> Result<String, String> {
        let x0 = prepare_smooth_data(42, &sys).map_err(|e| e.to_string())?;
        Ok(simulate(&x0, 5.0, 1e-2, &sys).map_err(|e| e.to_string())?.to_csv())
    };
    let grid = log_grid(1.0, 100.0, 12);
    let run_sweep = || -> Result<String, String> {
        Ok(sweep_csv(&sweep(&grid, &sys, &SweepOptions::default()).map_err(|e| e.to_string())?))
    };
    let (a, b) = (run_sim()?, run_sim()?);
    let (c, d) = (run_sweep()?, run_sweep()?);
    check(
        a == b && c == d,
        format!("simulate csv identical = {}, sweep csv identical = {}", a == b, c == d),
    )
}

fn main() {
    let sweeps = run_sweeps();
    let with_sweeps = |f: fn(&Sweeps) -> Outcome| match &sweeps {
        Ok(s) => f(s),
        Err(e) => Err(format!("sweep failed: {e}")),
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("dissipation identity", Box::new(dissipation_identity)),
        ("contraction and energy balance", Box::new(energy_balance)),
        ("dense oracle equivalence", Box::new(oracle_equivalence)),
        ("resolvent growth bound", Box::new(move || with_sweeps(growth))),
        ("decay-rate bound", Box::new(decay)),
        ("sharpened poincare", Box::new(move || with_sweeps(poincare))),
        ("z interface trace", Box::new(move || with_sweeps(z_trace))),
        ("multiplier identities", Box::new(multiplier)),
        ("monitored inequality chain", Box::new(move || with_sweeps(chain))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name}: {detail} [{:.2}s]", k + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
