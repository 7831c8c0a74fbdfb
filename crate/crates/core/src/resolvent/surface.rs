use crate::linalg::{SparseMatrix, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Discrete fractional Sobolev norms on the interface, defined spectrally
/// from the pencil `(K_Γ + M_Γ, M_Γ)`:
/// `‖g‖²_s = Σ λ_k^s |ĝ_k|²` with `ĝ` the coefficients of `g` in the
/// `M_Γ`-orthonormal eigenbasis and `λ_k = 1 + μ_k ≥ 1`.
#[derive(Debug, Clone)]
pub struct SurfaceNorms {
    lambda: DVector<f64>,
    /// `Qᵀ Lᵀ`: nodal values → coefficients.
    nodal: DMatrix<f64>,
    /// `Qᵀ L⁻¹`: tested functionals `(q_i = ⟨f, φ_i⟩)` → coefficients.
    functional: DMatrix<f64>,
}

impl SurfaceNorms {
    pub fn new(mg: &SparseMatrix<f64>, kg: &SparseMatrix<f64>) -> Self {
        let m = mg.to_dense();
        let h = kg.to_dense() + &m;
        let l = m.cholesky().expect("surface mass matrix is SPD").l();
        let linv = l.clone().try_inverse().expect("Cholesky factor is invertible");
        let s = &linv * h * linv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let qt = eig.eigenvectors.transpose();
        Self {
            lambda: eig.eigenvalues.map(|v| v.max(1.0)),
            nodal: &qt * l.transpose(),
            functional: qt * linv,
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Eigenvalues `1 + μ_k` in the order of the coefficient vectors.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.lambda
    }

    fn weighted(&self, p: &DMatrix<f64>, g: &[C64], s: f64) -> f64 {
        let re = DVector::from_iterator(g.len(), g.iter().map(|v| v.re));
        let im = DVector::from_iterator(g.len(), g.iter().map(|v| v.im));
        let (cr, ci) = (p * re, p * im);
        (0..self.dim())
            .map(|k| self.lambda[k].powf(s) * (cr[k] * cr[k] + ci[k] * ci[k]))
            .sum::<f64>()
            .sqrt()
    }

    /// Dense Gram matrix `G` with `gᵀ G g = ‖g‖²_s` for nodal `g`.
    pub fn gram(&self, s: f64) -> DMatrix<f64> {
        let w = DMatrix::from_diagonal(&self.lambda.map(|v| v.powf(s)));
        self.nodal.transpose() * w * &self.nodal
    }

    /// `‖g‖_{H^s}` of a nodal field.
    pub fn norm(&self, g: &[C64], s: f64) -> f64 {
        self.weighted(&self.nodal, g, s)
    }

    /// `‖f‖_{H^s}` of a distribution given by its tested values `⟨f, φ_i⟩`.
    pub fn functional_norm(&self, q: &[C64], s: f64) -> f64 {
        self.weighted(&self.functional, q, s)
    }
}
