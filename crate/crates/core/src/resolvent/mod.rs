//! Frequency-domain solves `(iβM − A)x = Mb` and resolvent-norm sweeps.
//!
//! For `β ≠ 0` the displacement rows `iβD − SV = D_b` are eliminated exactly,
//! leaving the complex symmetric velocity system
//!
//! ```text
//! (SᵀK_d S − β²M_v + iβK_f) V = iβ M_v V_b − SᵀK_d D_b,    D = (SV + D_b)/(iβ)
//! ```
//!
//! so the kinematic relation `iβh0 − h0* = u|Γ` holds to rounding error,
//! independently of the solver tolerance.

mod surface;

pub use surface::SurfaceNorms;

use crate::assembly::{energy_norm, SystemMatrices};
use crate::fit::{fit_line, loglog_slope};
use crate::linalg::{
    generalized_opnorm, BandLu, BandSymbolic, LinalgError, LinearMap, OpNormEstimate, PowerOptions,
    Scalar, SolveReport, SparseMatrix, Transpose, TripletBuilder, C64, DEFAULT_SOLVE_TOL,
};
use crate::proof_probe::{flux_chain_monitor, ChainRecord, ProbeContext, ProbeError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum ResolventError {
    #[error("iβ is numerically a spectral point at β = {beta}: {source}")]
    Singular { beta: f64, source: LinalgError },
    #[error("solve at β = {beta} failed: {source}")]
    Solve { beta: f64, source: LinalgError },
    #[error("power iteration at β = {beta} failed: {source}")]
    OpNorm { beta: f64, source: LinalgError },
    #[error("insufficient points for a growth fit: {found} in the top decade, need at least 2")]
    InsufficientPoints { found: usize },
    #[error("invalid frequency grid: {0}")]
    Grid(String),
    #[error("state length {got} does not match the system ({expected})")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

/// Per-system data shared by every frequency: the velocity-space coupling
/// `SᵀK_d S` and the symbolic analysis of the reduced pattern.
#[derive(Debug, Clone)]
pub struct ResolventSolver<'a> {
    sys: &'a SystemMatrices,
    stks: SparseMatrix<f64>,
    sym: BandSymbolic,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(sys: &'a SystemMatrices) -> Self {
        let l = sys.layout;
        let nv = l.nvel();
        let mut t = TripletBuilder::new(nv, nv);
        for (i, j, v) in sys.k_disp.triplets() {
            t.push(l.solid_velocity_slot(i), l.solid_velocity_slot(j), v);
        }
        let stks = t.build();
        let pattern = reduced_matrix(&stks, sys, 1.0);
        let sym = BandSymbolic::analyze(&pattern);
        Self { sys, stks, sym }
    }

    pub fn system(&self) -> &'a SystemMatrices {
        self.sys
    }

    /// Factorizes the shifted system for one frequency.
    pub fn factor(&self, beta: f64) -> Result<Shifted<'_, 'a>, ResolventError> {
        if beta == 0.0 {
            let a = self.sys.a.scaled(-1.0).to_complex();
            let lu = BandLu::factor(&BandSymbolic::analyze(&a), &a)
                .map_err(|source| ResolventError::Singular { beta, source })?;
            return Ok(Shifted {
                solver: self,
                beta,
                kind: ShiftedKind::Full { a, lu },
            });
        }
        let z = reduced_matrix(&self.stks, self.sys, beta);
        let lu = BandLu::factor(&self.sym, &z).map_err(|source| ResolventError::Singular { beta, source })?;
        Ok(Shifted {
            solver: self,
            beta,
            kind: ShiftedKind::Reduced { z, lu },
        })
    }
}

fn reduced_matrix(stks: &SparseMatrix<f64>, sys: &SystemMatrices, beta: f64) -> SparseMatrix<C64> {
    SparseMatrix::complex_combination(&[
        (C64::new(1.0, 0.0), stks),
        (C64::new(-beta * beta, 0.0), &sys.m_vel),
        (C64::new(0.0, beta), &sys.k_vel),
    ])
}

#[derive(Debug)]
enum ShiftedKind {
    Reduced {
        z: SparseMatrix<C64>,
        lu: BandLu<C64>,
    },
    /// `β = 0`: the full system `−A x = Mb`.
    Full {
        a: SparseMatrix<C64>,
        lu: BandLu<C64>,
    },
}

/// `(iβM − A)` factorized at one frequency.
#[derive(Debug)]
pub struct Shifted<'s, 'a> {
    solver: &'s ResolventSolver<'a>,
    beta: f64,
    kind: ShiftedKind,
}

const REFINE_STEPS: usize = 4;

fn refine(
    mat: &SparseMatrix<C64>,
    lu: &BandLu<C64>,
    rhs: &[C64],
    tol: f64,
) -> (Vec<C64>, usize) {
    let mut x = lu.solve(rhs, Transpose::No);
    let bn = crate::linalg::norm2(rhs);
    let mut steps = 0;
    while steps < REFINE_STEPS && bn > 0.0 {
        let r: Vec<C64> = rhs.iter().zip(mat.mul_vec(&x)).map(|(b, ax)| b - ax).collect();
        if crate::linalg::norm2(&r) <= tol * bn {
            break;
        }
        let dx = lu.solve(&r, Transpose::No);
        x.iter_mut().zip(dx).for_each(|(a, d)| *a += d);
        steps += 1;
    }
    (x, steps)
}

impl Shifted<'_, '_> {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Solves `(iβM − A)x = Mb`.
    pub fn solve(&self, b: &[C64]) -> Result<(Vec<C64>, SolveReport), ResolventError> {
        let sys = self.solver.sys;
        let l = sys.layout;
        let n = l.dim();
        if b.len() != n {
            return Err(ResolventError::Dimension { expected: n, got: b.len() });
        }
        let beta = self.beta;
        let mb = sys.m.apply(b);
        let (x, refinements) = match &self.kind {
            ShiftedKind::Full { a, lu } => refine(a, lu, &mb, 1e-13),
            ShiftedKind::Reduced { z, lu } => {
                let nv = l.nvel();
                let nd = l.nsolid();
                let vb: Vec<C64> = (0..nv).map(|k| b[l.velocity_index(k)]).collect();
                let db: Vec<C64> = (0..nd).map(|k| b[l.displacement_index(k)]).collect();
                let ib = C64::new(0.0, beta);
                let mut rhs: Vec<C64> = sys.m_vel.apply(&vb).into_iter().map(|v| v * ib).collect();
                for (r, v) in sys.k_disp.apply(&db).into_iter().enumerate() {
                    rhs[l.solid_velocity_slot(r)] -= v;
                }
                let (vel, steps) = refine(z, lu, &rhs, 1e-13);
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (k, v) in vel.iter().enumerate() {
                    x[l.velocity_index(k)] = *v;
                }
                for (r, d) in db.iter().enumerate() {
                    x[l.displacement_index(r)] = (vel[l.solid_velocity_slot(r)] + d) / ib;
                }
                (x, steps)
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ResolventError::Solve {
                beta,
                source: LinalgError::NonFinite("resolvent solve"),
            });
        }
        let res = self.relative_residual(&x, &mb);
        if res > DEFAULT_SOLVE_TOL {
            return Err(ResolventError::Solve {
                beta,
                source: LinalgError::Residual {
                    residual: res,
                    tolerance: DEFAULT_SOLVE_TOL,
                    refinements,
                },
            });
        }
        Ok((
            x,
            SolveReport {
                iterations: 0,
                refinements,
                relative_residual: res,
                factorization_reused: true,
            },
        ))
    }

    /// `‖(iβM − A)x − y‖ / ‖y‖`.
    pub fn relative_residual(&self, x: &[C64], y: &[C64]) -> f64 {
        let sys = self.solver.sys;
        let ib = C64::new(0.0, self.beta);
        let mx = sys.m.apply(x);
        let ax = sys.a.apply(x);
        let r: Vec<C64> = (0..x.len()).map(|i| ib * mx[i] - ax[i] - y[i]).collect();
        let yn = crate::linalg::norm2(y);
        let rn = crate::linalg::norm2(&r);
        if yn == 0.0 {
            rn
        } else {
            rn / yn
        }
    }
}

/// `b ↦ x` with its adjoint in the energy inner product. Since `M` and `A`
/// are real and `JAJ = Aᵀ`, `JMJ = M` for `J = diag(I_D, −I_V)`, the adjoint
/// is `c ↦ J·conj(T(conj(J c)))`.
impl LinearMap for Shifted<'_, '_> {
    fn dim(&self) -> usize {
        self.solver.sys.dim()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>, LinalgError> {
        self.solve(x).map(|r| r.0).map_err(|e| match e {
            ResolventError::Solve { source, .. } | ResolventError::Singular { source, .. } => source,
            _ => LinalgError::NonFinite("resolvent map"),
        })
    }

    fn apply_gram_adjoint(&self, y: &[C64]) -> Result<Vec<C64>, LinalgError> {
        let l = self.solver.sys.layout;
        let flip = |v: &mut Vec<C64>| {
            for k in 0..l.nvel() {
                let i = l.velocity_index(k);
                v[i] = -v[i];
            }
        };
        let mut c: Vec<C64> = y.iter().map(|v| v.conj()).collect();
        flip(&mut c);
        let mut out: Vec<C64> = self.apply(&c)?.into_iter().map(|v| v.conj()).collect();
        flip(&mut out);
        Ok(out)
    }
}

/// Single solve of `(iβM − A)x = Mb`, factorizing from scratch.
pub fn solve_static(beta: f64, b: &[C64], sys: &SystemMatrices) -> Result<Vec<C64>, ResolventError> {
    Ok(ResolventSolver::new(sys).factor(beta)?.solve(b)?.0)
}

/// `|uᴴK_f u − Re⟨b, x⟩_H|`.
pub fn dissipation_residual(b: &[C64], x: &[C64], sys: &SystemMatrices) -> f64 {
    (sys.dissipation(x) - sys.inner(b, x).re).abs()
}

fn fluid_l2(x: &[C64], sys: &SystemMatrices) -> f64 {
    let u = &x[..sys.layout.nu()];
    sys.mf.form(u, u).re.max(0.0).sqrt()
}

/// `|β|^{1/2}‖u‖_{Ω_f} / (‖∇u‖_{Ω_f} + ‖b‖_H)`; zero for `b = 0`.
pub fn poincare_ratio(beta: f64, b: &[C64], x: &[C64], sys: &SystemMatrices) -> f64 {
    let den = sys.dissipation(x).sqrt() + energy_norm(b, sys);
    if den == 0.0 {
        return 0.0;
    }
    beta.abs().sqrt() * fluid_l2(x, sys) / den
}

/// Gram-norm of `b ↦ (iβM − A)⁻¹Mb`, by power iteration.
pub fn resolvent_norm(
    beta: f64,
    solver: &ResolventSolver<'_>,
    opts: &PowerOptions,
) -> Result<OpNormEstimate, ResolventError> {
    let shifted = solver.factor(beta)?;
    generalized_opnorm(&shifted, &solver.sys.m, opts).map_err(|source| ResolventError::OpNorm { beta, source })
}

/// Seeded complex random state normalized to `‖b‖_H = 1`.
pub fn random_state(seed: u64, sys: &SystemMatrices) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<C64> = (0..sys.dim())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n = energy_norm(&b, sys);
    b.into_iter().map(|v| v / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSample {
    pub beta: f64,
    /// `NaN` when the operator norm was not requested.
    pub opnorm: f64,
    /// `|‖∇u‖² − Re⟨b, x⟩_H| / ‖b‖²_H`
    pub dissipation_residual: f64,
    pub poincare_ratio: f64,
    pub trace_ratio: f64,
    pub flux_ratio: f64,
    /// Power iterations spent on the operator norm.
    pub iters: usize,
    pub r_crux: f64,
    pub r_s3: f64,
    pub r_i1: f64,
    pub dtn_norm: f64,
    /// `max_Γ |z| / max |z|`
    pub z_boundary: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub probe_seed: u64,
    pub opnorm: bool,
    pub power: PowerOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            probe_seed: 0x0b5e_0001,
            opnorm: true,
            power: PowerOptions::default(),
        }
    }
}

/// `n` log-spaced frequencies on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == 0 {
                    lo
                } else if k == n - 1 {
                    hi
                } else {
                    (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

fn one_sample(
    beta: f64,
    solver: &ResolventSolver<'_>,
    ctx: &ProbeContext,
    b: &[C64],
    opts: &SweepOptions,
) -> Result<ResolventSample, ResolventError> {
    let sys = solver.sys;
    let shifted = solver.factor(beta)?;
    let (x, _) = shifted.solve(b)?;
    let (opnorm, iters) = if opts.opnorm {
        let est = generalized_opnorm(&shifted, &sys.m, &opts.power)
            .map_err(|source| ResolventError::OpNorm { beta, source })?;
        (est.value, est.iterations)
    } else {
        (f64::NAN, 0)
    };
    let bn2 = energy_norm(b, sys).powi(2);
    let chain: ChainRecord = flux_chain_monitor(ctx, sys, &x, b, beta)?;
    Ok(ResolventSample {
        beta,
        opnorm,
        dissipation_residual: if bn2 > 0.0 {
            dissipation_residual(b, &x, sys) / bn2
        } else {
            0.0
        },
        poincare_ratio: poincare_ratio(beta, b, &x, sys),
        trace_ratio: chain.trace_ratio,
        flux_ratio: chain.flux_ratio,
        iters,
        r_crux: chain.r_crux,
        r_s3: chain.r_s3,
        r_i1: chain.r_i1,
        dtn_norm: chain.dtn_norm,
        z_boundary: chain.z_boundary,
        degenerate: chain.degenerate,
    })
}

/// Solves and monitors every frequency of the grid, in parallel on the
/// current rayon pool; the output order follows the grid.
pub fn sweep(
    betas: &[f64],
    sys: &SystemMatrices,
    opts: &SweepOptions,
) -> Result<Vec<ResolventSample>, ResolventError> {
    if betas.is_empty() {
        return Err(ResolventError::Grid("empty grid".into()));
    }
    if let Some(b) = betas.iter().find(|b| !b.is_finite() || b.abs() < 1.0) {
        return Err(ResolventError::Grid(format!("|β| must be at least 1, got {b}")));
    }
    let solver = ResolventSolver::new(sys);
    let ctx = ProbeContext::new(sys)?;
    let b = random_state(opts.probe_seed, sys);
    betas
        .par_iter()
        .map(|&beta| one_sample(beta, &solver, &ctx, &b, opts))
        .collect()
}

pub fn sweep_csv(samples: &[ResolventSample]) -> String {
    use crate::io::fmt_float as f;
    let mut s = String::from(
        "beta,opnorm,dissipation_residual,poincare_ratio,trace_ratio,flux_ratio,iters,r_crux,r_s3,r_I1,dtn_norm\n",
    );
    for r in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f(r.beta),
            f(r.opnorm),
            f(r.dissipation_residual),
            f(r.poincare_ratio),
            f(r.trace_ratio),
            f(r.flux_ratio),
            r.iters,
            f(r.r_crux),
            f(r.r_s3),
            f(r.r_i1),
            f(r.dtn_norm)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Frequencies used by the fit (the top decade of the grid).
    pub betas: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Log–log slope of the operator norm over `β ≥ β_max / 10`.
pub fn fit_growth(samples: &[ResolventSample]) -> Result<GrowthFit, ResolventError> {
    if samples.windows(2).any(|w| !(w[1].beta > w[0].beta)) {
        return Err(ResolventError::Grid("β grid must be strictly increasing".into()));
    }
    if samples.iter().any(|s| s.beta < 1.0) {
        return Err(ResolventError::Grid("β grid must lie in [1, ∞)".into()));
    }
    let top = samples.last().map_or(0.0, |s| s.beta);
    let used: Vec<&ResolventSample> = samples
        .iter()
        .filter(|s| s.beta >= top / 10.0 && s.opnorm > 0.0 && s.opnorm.is_finite())
        .collect();
    if used.len() < 2 {
        return Err(ResolventError::InsufficientPoints { found: used.len() });
    }
    let lx: Vec<f64> = used.iter().map(|s| s.beta.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|s| s.opnorm.ln()).collect();
    let f = fit_line(&lx, &ly).ok_or(ResolventError::InsufficientPoints { found: used.len() })?;
    Ok(GrowthFit {
        betas: used.iter().map(|s| s.beta).collect(),
        slope: f.slope,
        intercept: f.intercept,
        residual: f.residual,
    })
}

/// Log–log trend slope of a monitored quantity across a sweep; `None` when
/// fewer than two samples are positive.
pub fn trend_slope(samples: &[ResolventSample], field: impl Fn(&ResolventSample) -> f64) -> Option<f64> {
    let b: Vec<f64> = samples.iter().map(|s| s.beta.abs()).collect();
    let v: Vec<f64> = samples.iter().map(field).collect();
    loglog_slope(&b, &v).map(|f| f.slope)
}
