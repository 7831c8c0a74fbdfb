//! Discrete counterparts of the objects used to bound the resolvent: the
//! harmonic (Dirichlet) extension into the solid, the Dirichlet-to-Neumann
//! map, the lifted field `z` that vanishes on the interface, the multiplier
//! identities, and the monitored ratios of the estimate chain.
//!
//! Normal derivatives on the interface are variational: the flux of a field
//! `v` solving `−Δv + c v = f` is the functional obtained by testing the
//! volume residual with the interface hat functions, signed with `ν`
//! pointing out of the fluid (into the solid).

mod multiplier;
pub mod quadrature;

pub use multiplier::{
    manufactured_study, multiplier_residual, Forcing, Identity, ManufacturedLevel, ManufacturedStudy,
    MultiplierReport, VectorField,
};

use crate::assembly::{energy_norm, State, SystemMatrices};
use crate::linalg::{dot, BandCholesky, LinalgError, SparseMatrix, C64};
use crate::resolvent::SurfaceNorms;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("the z lift needs |β| ≥ 1, got β = {0}")]
    SmallBeta(f64),
    #[error("field length {got} does not match the mesh ({expected})")]
    Dimension { expected: usize, got: usize },
    #[error("mesh has no solid interior vertices")]
    NoSolidInterior,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error(transparent)]
    Mesh(#[from] crate::geometry::MeshError),
}

/// Discrete harmonic extension from the interface into the solid.
#[derive(Debug, Clone)]
pub struct DirichletMap {
    ng: usize,
    k_ii: Option<BandCholesky>,
    k_ig: SparseMatrix<f64>,
    k_gg: SparseMatrix<f64>,
    k_gi: SparseMatrix<f64>,
}

impl DirichletMap {
    pub fn new(sys: &SystemMatrices) -> Result<Self, ProbeError> {
        let l = sys.layout;
        let g: Vec<usize> = (0..l.ng).collect();
        let i: Vec<usize> = (l.ng..l.nsolid()).collect();
        let k_ii = if i.is_empty() {
            None
        } else {
            Some(BandCholesky::new(&sys.ks.submatrix(&i, &i))?)
        };
        Ok(Self {
            ng: l.ng,
            k_ii,
            k_ig: sys.ks.submatrix(&i, &g),
            k_gg: sys.ks.submatrix(&g, &g),
            k_gi: sys.ks.submatrix(&g, &i),
        })
    }

    fn interior(&self, g: &[C64]) -> Vec<C64> {
        match &self.k_ii {
            None => vec![],
            Some(chol) => chol
                .solve_c(&self.k_ig.mul_cvec(g))
                .into_iter()
                .map(|v| -v)
                .collect(),
        }
    }

    /// `E(g)` on `[interface, solid interior]`; equals `g` on the interface.
    pub fn extend(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.ng);
        let mut out = g.to_vec();
        out.extend(self.interior(g));
        out
    }

    /// Schur complement `S g = K_ΓΓ g + K_Γi E_i(g)`, i.e. the functional
    /// `ψ ↦ (∇E(g), ∇E(ψ))_{Ω_s}`.
    pub fn schur(&self, g: &[C64]) -> Vec<C64> {
        let int = self.interior(g);
        let mut s = self.k_gg.mul_cvec(g);
        if !int.is_empty() {
            for (a, b) in s.iter_mut().zip(self.k_gi.mul_cvec(&int)) {
                *a += b;
            }
        }
        s
    }

    /// Normal derivative `⟨∂E(g)/∂ν, φ_i⟩` of the extension, tested against
    /// the interface hats. With `ν` pointing into the solid this is `−S g`.
    pub fn dirichlet_neumann(&self, g: &[C64]) -> Vec<C64> {
        self.schur(g).into_iter().map(|v| -v).collect()
    }

    /// `sup ‖E(g)‖_{H¹(Ω_s)} / ‖g‖_{H^{1/2}(Γ_s)}` over all interface data.
    pub fn extension_constant(&self, sys: &SystemMatrices, norms: &SurfaceNorms) -> f64 {
        let ng = self.ng;
        let h1 = SparseMatrix::combination(&[(1.0, &sys.ks), (1.0, &sys.ms)]);
        let mut e = DMatrix::<f64>::zeros(sys.layout.nsolid(), ng);
        for k in 0..ng {
            let mut g = vec![C64::new(0.0, 0.0); ng];
            g[k] = C64::new(1.0, 0.0);
            for (r, v) in self.extend(&g).into_iter().enumerate() {
                e[(r, k)] = v.re;
            }
        }
        let energy = e.transpose() * h1.to_dense() * &e;
        let half = norms.gram(0.5);
        let l = half.cholesky().expect("fractional Gram is SPD").l();
        let linv = l.try_inverse().expect("invertible factor");
        let s = &linv * energy * linv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        s.symmetric_eigenvalues().max().max(0.0).sqrt()
    }
}

/// Where a `z` field came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZSource {
    Resolvent,
    Manufactured,
}

/// Nodal field on `[interface, solid interior]` vanishing on the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ZField {
    pub values: Vec<C64>,
    pub beta: f64,
    pub source: ZSource,
}

impl ZField {
    /// `max_Γ |z| / max |z|` (0 for the zero field).
    pub fn boundary_ratio(&self, ng: usize) -> f64 {
        let all = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if all == 0.0 {
            return 0.0;
        }
        self.values[..ng].iter().map(|v| v.norm()).fold(0.0, f64::max) / all
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), ProbeError> {
    if expected == got {
        Ok(())
    } else {
        Err(ProbeError::Dimension { expected, got })
    }
}

/// Interface data `u|Γ + w0*|Γ` that is harmonically lifted.
fn lift_data(x: &State<C64>, b: &State<C64>) -> Vec<C64> {
    x.u_gamma().iter().zip(&b.h0).map(|(u, h)| u + h).collect()
}

/// `z = w0 + (i/β) E(u|Γ + w0*|Γ)` from a resolvent solution `x` with data `b`.
pub fn build_z(
    x: &[C64],
    b: &[C64],
    beta: f64,
    sys: &SystemMatrices,
    dmap: &DirichletMap,
) -> Result<ZField, ProbeError> {
    if !(beta.abs() >= 1.0) {
        return Err(ProbeError::SmallBeta(beta));
    }
    let l = &sys.layout;
    check_len(l.dim(), x.len())?;
    check_len(l.dim(), b.len())?;
    let xs = State::from_slice(l, x)?;
    let bs = State::from_slice(l, b)?;
    let ext = dmap.extend(&lift_data(&xs, &bs));
    let c = C64::new(0.0, 1.0 / beta);
    let mut values: Vec<C64> = xs.w0().iter().zip(&ext).map(|(w, e)| w + c * e).collect();
    // the interface block cancels identically; store exact zeros there
    let ng = l.ng;
    let residue = values[..ng].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if residue <= 1e-12 * scale {
        values[..ng].fill(C64::new(0.0, 0.0));
    }
    Ok(ZField {
        values,
        beta,
        source: ZSource::Resolvent,
    })
}

/// Like [`build_z`] but keeps the computed interface values instead of
/// zeroing them, so their size can be inspected.
pub fn build_z_raw(
    x: &[C64],
    b: &[C64],
    beta: f64,
    sys: &SystemMatrices,
    dmap: &DirichletMap,
) -> Result<ZField, ProbeError> {
    if !(beta.abs() >= 1.0) {
        return Err(ProbeError::SmallBeta(beta));
    }
    let l = &sys.layout;
    check_len(l.dim(), x.len())?;
    check_len(l.dim(), b.len())?;
    let xs = State::from_slice(l, x)?;
    let bs = State::from_slice(l, b)?;
    let ext = dmap.extend(&lift_data(&xs, &bs));
    let c = C64::new(0.0, 1.0 / beta);
    Ok(ZField {
        values: xs.w0().iter().zip(&ext).map(|(w, e)| w + c * e).collect(),
        beta,
        source: ZSource::Resolvent,
    })
}

/// Nodal right-hand side `F = −iβE(u|Γ + w0*|Γ) + w1* + iβw0*` of
/// `−β²z − Δz = F`.
pub fn z_forcing(
    x: &[C64],
    b: &[C64],
    beta: f64,
    sys: &SystemMatrices,
    dmap: &DirichletMap,
) -> Result<Vec<C64>, ProbeError> {
    let l = &sys.layout;
    check_len(l.dim(), x.len())?;
    check_len(l.dim(), b.len())?;
    let xs = State::from_slice(l, x)?;
    let bs = State::from_slice(l, b)?;
    let ib = C64::new(0.0, beta);
    let ext = dmap.extend(&lift_data(&xs, &bs));
    Ok(ext
        .iter()
        .zip(bs.w1())
        .zip(bs.w0())
        .map(|((e, w1), w0)| -ib * e + w1 + ib * w0)
        .collect())
}

/// Interface rows of `(K_s − β²M_s) v − rhs`, negated: the tested normal
/// derivative `⟨∂v/∂ν, φ_i⟩` of a solid field with load vector `rhs`.
pub fn solid_flux(v: &[C64], load: &[C64], beta: f64, sys: &SystemMatrices) -> Vec<C64> {
    let ng = sys.layout.ng;
    let kv = sys.ks.mul_cvec(v);
    let mv = sys.ms.mul_cvec(v);
    (0..ng).map(|i| -(kv[i] - beta * beta * mv[i] - load[i])).collect()
}

/// `⟨∂u/∂ν, φ_i⟩ = [(K_f + iβM_f)u − M_f u*]_Γ` for the fluid component.
pub fn fluid_flux(x: &[C64], b: &[C64], beta: f64, sys: &SystemMatrices) -> Vec<C64> {
    let l = &sys.layout;
    let u = &x[..l.nu()];
    let us = &b[..l.nu()];
    let ku = sys.kf.mul_cvec(u);
    let mu = sys.mf.mul_cvec(u);
    let mus = sys.mf.mul_cvec(us);
    let ib = C64::new(0.0, beta);
    (l.nf..l.nu()).map(|i| ku[i] + ib * mu[i] - mus[i]).collect()
}

/// Shared per-system data for the monitors.
#[derive(Debug, Clone)]
pub struct ProbeContext {
    pub norms: SurfaceNorms,
    pub dmap: DirichletMap,
    mg_chol: BandCholesky,
}

impl ProbeContext {
    pub fn new(sys: &SystemMatrices) -> Result<Self, ProbeError> {
        Ok(Self {
            norms: SurfaceNorms::new(&sys.mg, &sys.kg),
            dmap: DirichletMap::new(sys)?,
            mg_chol: BandCholesky::new(&sys.mg)?,
        })
    }

    /// Nodal representative `M_Γ⁻¹ q` of a tested functional.
    pub fn nodal(&self, q: &[C64]) -> Vec<C64> {
        self.mg_chol.solve_c(q)
    }

    /// `L²(Γ_s)` norm of a tested functional's nodal representative.
    pub fn l2_of_functional(&self, q: &[C64]) -> f64 {
        dot(q, &self.nodal(q)).re.max(0.0).sqrt()
    }
}

/// Monitored ratios of one resolvent solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRecord {
    /// `‖βh0‖_{1/2} / (‖∇u‖ + ‖b‖_H)`
    pub trace_ratio: f64,
    /// `‖∂u/∂ν‖_{−1/2} / (|β|^{1/2}(‖∇u‖ + ‖b‖_H))`
    pub flux_ratio: f64,
    /// `‖∂z/∂ν‖_{Γ_s} / (|β|^{11/4}‖∇u‖ + |β|³‖b‖_H)`
    pub r_crux: f64,
    /// `(‖z‖_{H¹} + ‖βz‖ + ‖∂z/∂ν‖_{Γ_s}) / (|β|^{11/4}‖∇u‖ + |β|³‖b‖_H)`
    pub r_s3: f64,
    /// `‖h0‖²_{H¹(Γ_s)} / (|⟨∂w0/∂ν, h0⟩| + ‖∇u‖² + ‖b‖²_H)`
    pub r_i1: f64,
    /// `‖DtN g‖_{−1/2} / ‖g‖_{1/2}` for the lifted data `g = u|Γ + w0*|Γ`.
    pub dtn_norm: f64,
    /// `max_Γ |z| / max |z|` before any clean-up.
    pub z_boundary: f64,
    /// True when `b = 0` and every ratio is 0/0.
    pub degenerate: bool,
}

pub fn flux_chain_monitor(
    ctx: &ProbeContext,
    sys: &SystemMatrices,
    x: &[C64],
    b: &[C64],
    beta: f64,
) -> Result<ChainRecord, ProbeError> {
    let l = &sys.layout;
    check_len(l.dim(), x.len())?;
    check_len(l.dim(), b.len())?;
    if !(beta.abs() >= 1.0) {
        return Err(ProbeError::SmallBeta(beta));
    }
    let bn = energy_norm(b, sys);
    if bn == 0.0 {
        return Ok(ChainRecord {
            trace_ratio: 0.0,
            flux_ratio: 0.0,
            r_crux: 0.0,
            r_s3: 0.0,
            r_i1: 0.0,
            dtn_norm: 0.0,
            z_boundary: 0.0,
            degenerate: true,
        });
    }
    let ab = beta.abs();
    let grad_u = sys.dissipation(x).sqrt();
    let xs = State::from_slice(l, x)?;
    let bs = State::from_slice(l, b)?;

    let bh0: Vec<C64> = xs.h0.iter().map(|v| v * beta).collect();
    let trace_ratio = ctx.norms.norm(&bh0, 0.5) / (grad_u + bn);
    let qu = fluid_flux(x, b, beta, sys);
    let flux_ratio = ctx.norms.functional_norm(&qu, -0.5) / (ab.sqrt() * (grad_u + bn));

    let z = build_z_raw(x, b, beta, sys, &ctx.dmap)?;
    let f = z_forcing(x, b, beta, sys, &ctx.dmap)?;
    let load = sys.ms.mul_cvec(&f);
    let qz = solid_flux(&z.values, &load, beta, sys);
    let dz = ctx.l2_of_functional(&qz);
    let z_h1 = (sys.ks.form(&z.values, &z.values).re + sys.ms.form(&z.values, &z.values).re)
        .max(0.0)
        .sqrt();
    let z_l2 = sys.ms.form(&z.values, &z.values).re.max(0.0).sqrt();
    let den = ab.powf(2.75) * grad_u + ab.powi(3) * bn;
    let r_crux = dz / den;
    let r_s3 = (z_h1 + ab * z_l2 + dz) / den;

    let w0 = xs.w0();
    let load_w: Vec<C64> = sys
        .ms
        .mul_cvec(&bs.w0().iter().zip(bs.w1()).map(|(w0s, w1s)| C64::new(0.0, beta) * w0s + w1s).collect::<Vec<_>>());
    let qw = solid_flux(&w0, &load_w, beta, sys);
    let thin = sys.kg.form(&xs.h0, &xs.h0).re + sys.mg.form(&xs.h0, &xs.h0).re;
    let r_i1 = thin / (dot(&xs.h0, &qw).norm() + grad_u * grad_u + bn * bn);

    let g = lift_data(&xs, &bs);
    let gn = ctx.norms.norm(&g, 0.5);
    let dtn_norm = if gn > 0.0 {
        ctx.norms.functional_norm(&ctx.dmap.dirichlet_neumann(&g), -0.5) / gn
    } else {
        0.0
    };

    Ok(ChainRecord {
        trace_ratio,
        flux_ratio,
        r_crux,
        r_s3,
        r_i1,
        dtn_norm,
        z_boundary: z.boundary_ratio(l.ng),
        degenerate: false,
    })
}
