//! Time stepping of `M ẋ = A x` with the implicit midpoint rule.
//!
//! The rule is energy-exact for this system: with `m = (x + x')/2`,
//! `E(x') − E(x) = τ mᵀAm = −τ u_mᵀ K_f u_m`, so the only loss of energy is
//! the fluid dissipation.

use crate::assembly::{energy_norm, graph_norm, SystemMatrices};
use crate::fit::fit_line;
use crate::linalg::{
    norm2, solve_factored, BandLu, BandSymbolic, LinalgError, SparseMatrix, Transpose,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error("time step and horizon must be positive (τ = {tau}, T = {t_end})")]
    BadStep { tau: f64, t_end: f64 },
    #[error("initial state contains non-finite values")]
    NonFiniteInitial,
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("linear solve failed at step {step}: {source}")]
    Solve { step: usize, source: LinalgError },
    #[error("factorization of M − τ/2·A failed: {0}")]
    Factor(LinalgError),
    #[error("generator is numerically singular: smallest singular value ≈ {sigma_min:e} (largest entry {scale:e})")]
    SingularGenerator { sigma_min: f64, scale: f64 },
    #[error("fit window [{t_a}, {t_b}] is invalid for a trace on [{t0}, {t1}]: {reason}")]
    Window {
        t_a: f64,
        t_b: f64,
        t0: f64,
        t1: f64,
        reason: String,
    },
}

/// Relative tolerance of each midpoint solve; tight enough that the discrete
/// energy balance is limited by rounding, not by the solver.
const STEP_TOL: f64 = 1e-13;

/// Factorized midpoint stepper for a fixed `(M, A, τ)`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    tau: f64,
    lhs: SparseMatrix<f64>,
    rhs: SparseMatrix<f64>,
    lu: BandLu<f64>,
}

impl CrankNicolson {
    pub fn new(m: &SparseMatrix<f64>, a: &SparseMatrix<f64>, tau: f64) -> Result<Self, EvolutionError> {
        if !(tau > 0.0) {
            return Err(EvolutionError::BadStep { tau, t_end: f64::NAN });
        }
        let lhs = SparseMatrix::combination(&[(1.0, m), (-0.5 * tau, a)]);
        let rhs = SparseMatrix::combination(&[(1.0, m), (0.5 * tau, a)]);
        let lu = BandLu::factor(&BandSymbolic::analyze(&lhs), &lhs).map_err(EvolutionError::Factor)?;
        Ok(Self { tau, lhs, rhs, lu })
    }

    pub fn for_system(sys: &SystemMatrices, tau: f64) -> Result<Self, EvolutionError> {
        Self::new(&sys.m, &sys.a, tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let b = self.rhs.mul_vec(x);
        Ok(solve_factored(&self.lu, &self.lhs, &b, STEP_TOL)?.0)
    }
}

/// One implicit-midpoint step; factorizes `M − τ/2·A` on every call, so use
/// [`CrankNicolson`] for repeated steps.
pub fn step_cn(x: &[f64], tau: f64, sys: &SystemMatrices) -> Result<Vec<f64>, EvolutionError> {
    let cn = CrankNicolson::for_system(sys, tau)?;
    cn.step(x).map_err(|source| EvolutionError::Solve { step: 1, source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// `½‖x‖²_H`
    pub energy: f64,
    /// `u*K_f u`
    pub dissipation: f64,
    pub norm_h: f64,
    /// Discrete `d ln‖x‖ / d ln t` over the preceding step (0 where undefined).
    pub log_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub tau: f64,
    pub samples: Vec<EnergySample>,
    /// Largest per-step `|E(x') − E(x) + τ u_mᵀK_f u_m|`.
    pub max_balance_residual: f64,
    pub final_state: Vec<f64>,
}

impl EnergyTrace {
    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.energy)
    }

    /// True when the energy never increases by more than `slack·E(0)`.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        let tol = slack * self.initial_energy();
        self.samples.windows(2).all(|w| w[1].energy <= w[0].energy + tol)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,E,dissipation,norm_H,log_slope\n");
        for r in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                crate::io::fmt_float(r.t),
                crate::io::fmt_float(r.energy),
                crate::io::fmt_float(r.dissipation),
                crate::io::fmt_float(r.norm_h),
                crate::io::fmt_float(r.log_slope)
            );
        }
        s
    }
}

fn sample(t: f64, x: &[f64], sys: &SystemMatrices, prev: Option<&EnergySample>) -> EnergySample {
    let norm_h = energy_norm(x, sys);
    let log_slope = match prev {
        Some(p) if p.t > 0.0 && p.norm_h > 0.0 && norm_h > 0.0 => {
            (norm_h.ln() - p.norm_h.ln()) / (t.ln() - p.t.ln())
        }
        _ => 0.0,
    };
    EnergySample {
        t,
        energy: 0.5 * norm_h * norm_h,
        dissipation: sys.dissipation(x),
        norm_h,
        log_slope,
    }
}

/// Number of steps needed to reach `t_end`.
pub fn step_count(t_end: f64, tau: f64) -> usize {
    (t_end / tau - 1e-9).ceil().max(0.0) as usize
}

pub fn simulate(x0: &[f64], t_end: f64, tau: f64, sys: &SystemMatrices) -> Result<EnergyTrace, EvolutionError> {
    let cn = CrankNicolson::for_system(sys, tau)?;
    simulate_with(&cn, x0, t_end, sys)
}

/// [`simulate`] with a prebuilt stepper.
pub fn simulate_with(
    cn: &CrankNicolson,
    x0: &[f64],
    t_end: f64,
    sys: &SystemMatrices,
) -> Result<EnergyTrace, EvolutionError> {
    let tau = cn.tau();
    if !(t_end > 0.0) {
        return Err(EvolutionError::BadStep { tau, t_end });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(EvolutionError::NonFiniteInitial);
    }
    let steps = step_count(t_end, tau);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(0.0, x0, sys, None));
    let mut x = x0.to_vec();
    let mut max_res: f64 = 0.0;
    for k in 1..=steps {
        let next = cn
            .step(&x)
            .map_err(|source| EvolutionError::Solve { step: k, source })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(EvolutionError::NonFinite { step: k });
        }
        let mid: Vec<f64> = x.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        let s = sample(k as f64 * tau, &next, sys, samples.last());
        let prev_e = samples.last().unwrap().energy;
        max_res = max_res.max((s.energy - prev_e + tau * sys.dissipation(&mid)).abs());
        samples.push(s);
        x = next;
    }
    Ok(EnergyTrace {
        tau,
        samples,
        max_balance_residual: max_res,
        final_state: x,
    })
}

/// Estimate of the smallest singular value of `A` by inverse iteration on
/// `AᵀA`.
pub fn smallest_singular_value(lu: &BandLu<f64>, iterations: usize) -> f64 {
    let n = lu.dim();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = f64::INFINITY;
    for _ in 0..iterations {
        let y = lu.solve(&lu.solve(&x, Transpose::No), Transpose::Conj);
        let ny = norm2(&y);
        if !(ny > 0.0) || !ny.is_finite() {
            break;
        }
        let next = (1.0 / ny).sqrt();
        x = y.into_iter().map(|v| v / ny).collect();
        let done = (next - sigma).abs() <= 1e-10 * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

/// `x0 = A⁻¹ M r` for a seeded random `r`, scaled to unit graph norm.
pub fn prepare_smooth_data(seed: u64, sys: &SystemMatrices) -> Result<Vec<f64>, EvolutionError> {
    let scale = sys.a.max_abs();
    let lu = match BandLu::factor(&BandSymbolic::analyze(&sys.a), &sys.a) {
        Ok(lu) => lu,
        Err(LinalgError::Singular { magnitude, .. }) => {
            return Err(EvolutionError::SingularGenerator {
                sigma_min: magnitude,
                scale,
            })
        }
        Err(e) => return Err(EvolutionError::Factor(e)),
    };
    let sigma_min = smallest_singular_value(&lu, 200);
    if !(sigma_min > 1e-12 * scale) {
        return Err(EvolutionError::SingularGenerator { sigma_min, scale });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mr = sys.m.mul_vec(&r);
    let x = solve_factored(&lu, &sys.a, &mr, STEP_TOL)
        .map_err(EvolutionError::Factor)?
        .0;
    let g = graph_norm(&x, sys);
    Ok(x.into_iter().map(|v| v / g).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub t_a: f64,
    pub t_b: f64,
    /// `p` in `‖x(t)‖_H ≈ C t^{−p}`.
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual of the log–log fit.
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit, EvolutionError> {
    let (t_a, t_b) = window;
    let t0 = trace.samples.first().map_or(0.0, |s| s.t);
    let t1 = trace.samples.last().map_or(0.0, |s| s.t);
    let bad = |reason: &str| EvolutionError::Window {
        t_a,
        t_b,
        t0,
        t1,
        reason: reason.to_string(),
    };
    if !(t_a > 0.0) || !(t_b > t_a) {
        return Err(bad("need 0 < t_a < t_b"));
    }
    // small slack so a window ending at T survives rounding of k·τ
    let slack = 1e-9 * t_b;
    if t_a < t0 - slack || t_b > t1 + slack {
        return Err(bad("window outside trace"));
    }
    let pts: Vec<&EnergySample> = trace
        .samples
        .iter()
        .filter(|s| s.t >= t_a - slack && s.t <= t_b + slack)
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(bad("fewer than 10 samples in window"));
    }
    if pts.iter().any(|s| !(s.norm_h > 0.0)) {
        return Err(bad("trace is not positive on the window"));
    }
    let lx: Vec<f64> = pts.iter().map(|s| s.t.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|s| s.norm_h.ln()).collect();
    let f = fit_line(&lx, &ly).ok_or_else(|| bad("degenerate window"))?;
    Ok(DecayFit {
        t_a,
        t_b,
        exponent: -f.slope,
        amplitude: f.intercept.exp(),
        residual: f.residual,
        samples: pts.len(),
    })
}
