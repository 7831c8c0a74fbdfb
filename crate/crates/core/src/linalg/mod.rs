//! Sparse kernels used by every solver in the crate.
//!
//! Matrices are stored row-compressed ([`SparseMatrix`]). Direct solves go
//! through a reverse Cuthill-McKee ordering followed by a banded
//! factorization: partial-pivoting LU for general (real or complex) systems
//! and Cholesky for SPD systems. The ordering is computed once per sparsity
//! pattern ([`BandSymbolic`]) and reused across numeric factorizations, which
//! is what makes frequency sweeps cheap.

mod band;
mod ordering;
mod power;
mod sparse;

pub use band::{BandCholesky, BandLu, BandSymbolic, Transpose};
pub use ordering::reverse_cuthill_mckee;
pub use power::{
    generalized_opnorm, EuclideanAdjoint, LinearMap, OpNormEstimate, PowerOptions,
};
pub use sparse::{SparseMatrix, TripletBuilder};

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub type C64 = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not positive definite: pivot {index} = {value:e}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("matrix is singular to working precision: pivot {index} has magnitude {magnitude:e} (scale {scale:e})")]
    Singular {
        index: usize,
        magnitude: f64,
        scale: f64,
    },
    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e} after {refinements} refinement steps")]
    Residual {
        residual: f64,
        tolerance: f64,
        refinements: usize,
    },
    #[error("power iteration did not converge after {iterations} iterations (last Rayleigh quotient {rayleigh:e}, tail estimate {gap:e})")]
    NoConvergence {
        iterations: usize,
        rayleigh: f64,
        gap: f64,
    },
    #[error("sparsity pattern of the matrix is not covered by the symbolic analysis (entry {row},{col})")]
    PatternMismatch { row: usize, col: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// Field of matrix entries: `f64` or [`C64`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn modulus_sqr(self) -> f64;
    fn real(self) -> f64;
    fn imag_part(self) -> f64;
    /// `re + i·im`; the imaginary part is dropped for real scalars.
    fn from_parts(re: f64, im: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sqr(self) -> f64 {
        self * self
    }
    fn real(self) -> f64 {
        self
    }
    fn imag_part(self) -> f64 {
        0.0
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn real(self) -> f64 {
        self.re
    }
    fn imag_part(self) -> f64 {
        self.im
    }
    fn from_parts(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Outcome of a direct solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveReport {
    /// Krylov iterations; always 0 for the direct path.
    pub iterations: usize,
    /// Steps of iterative refinement applied after the direct solve.
    pub refinements: usize,
    /// ‖Ax − b‖ / ‖b‖ (0 when b = 0).
    pub relative_residual: f64,
    /// True when the symbolic ordering was supplied by the caller.
    pub factorization_reused: bool,
}

pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 4;

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus_sqr()).sum::<f64>().sqrt()
}

/// Euclidean inner product `Σ conj(a_i) b_i`.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += x.conj() * *y;
    }
    s
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Solves `a x = b` with a factorization and iterative refinement until the
/// relative residual reaches `tol`.
fn refine_with<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    tol: f64,
    mut solve: impl FnMut(&[T]) -> Vec<T>,
) -> Result<(Vec<T>, usize, f64), LinalgError> {
    let mut x = solve(b);
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok((vec![T::zero(); b.len()], 0, 0.0));
    }
    let mut refinements = 0;
    loop {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("direct solve"));
        }
        let ax = a.mul_vec(&x);
        let r: Vec<T> = ax.iter().zip(b).map(|(p, q)| *q - *p).collect();
        let res = norm2(&r) / bn;
        if res <= tol {
            return Ok((x, refinements, res));
        }
        if refinements == MAX_REFINEMENTS {
            return Err(LinalgError::Residual {
                residual: res,
                tolerance: tol,
                refinements,
            });
        }
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        refinements += 1;
    }
}

/// Direct solve of a symmetric positive definite system.
pub fn solve_spd(a: &SparseMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    check_dim(a.nrows(), b.len())?;
    let sym = BandSymbolic::analyze(a);
    let chol = BandCholesky::factor(&sym, a)?;
    let (x, refinements, res) = refine_with(a, b, DEFAULT_SOLVE_TOL, |r| chol.solve(r))?;
    Ok((
        x,
        SolveReport {
            iterations: 0,
            refinements,
            relative_residual: res,
            factorization_reused: false,
        },
    ))
}

/// Direct solve of a general complex system (LU with partial pivoting).
pub fn solve_complex(a: &SparseMatrix<C64>, b: &[C64]) -> Result<(Vec<C64>, SolveReport), LinalgError> {
    check_dim(a.nrows(), b.len())?;
    let sym = BandSymbolic::analyze(a);
    solve_general_with(&sym, a, b, false)
}

/// General solve reusing a caller-provided symbolic analysis.
pub fn solve_general_with<T: Scalar>(
    sym: &BandSymbolic,
    a: &SparseMatrix<T>,
    b: &[T],
    reused: bool,
) -> Result<(Vec<T>, SolveReport), LinalgError> {
    check_dim(a.nrows(), b.len())?;
    let lu = BandLu::factor(sym, a)?;
    let (x, refinements, res) = refine_with(a, b, DEFAULT_SOLVE_TOL, |r| {
        lu.solve(r, Transpose::No)
    })?;
    Ok((
        x,
        SolveReport {
            iterations: 0,
            refinements,
            relative_residual: res,
            factorization_reused: reused,
        },
    ))
}

/// Solves with an existing LU factorization, refining against `a`.
pub fn solve_factored<T: Scalar>(
    lu: &BandLu<T>,
    a: &SparseMatrix<T>,
    b: &[T],
    tol: f64,
) -> Result<(Vec<T>, SolveReport), LinalgError> {
    check_dim(a.nrows(), b.len())?;
    let (x, refinements, res) = refine_with(a, b, tol, |r| lu.solve(r, Transpose::No))?;
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

fn check_dim(expected: usize, got: usize) -> Result<(), LinalgError> {
    if expected != got {
        Err(LinalgError::Dimension { expected, got })
    } else {
        Ok(())
    }
}
