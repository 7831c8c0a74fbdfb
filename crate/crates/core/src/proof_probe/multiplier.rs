use super::quadrature::{map_point, tet_rule, tri_rule};
use super::{check_len, solid_flux, ProbeContext, ProbeError, ZField, ZSource};
use crate::assembly::{build_system, tet_gradients, SystemMatrices};
use crate::geometry::{build_mesh, dot3, tri_area, Mesh, MeshConfig, Point, Region};
use crate::linalg::C64;
use serde::Serialize;

const TET_Q: usize = 4;
const TRI_Q: usize = 4;

/// Affine multiplier field `m(x) = c + Bx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VectorField {
    /// `m(x) = x`
    Radial,
    /// `m(x) = c₀ − x`, with `−m·ν` bounded below on the faces of a box
    /// centred at `c₀`.
    Grisvard(Point),
}

impl VectorField {
    pub fn grisvard_for(mesh: &Mesh) -> Option<Self> {
        let (lo, hi) = mesh.solid_bounds()?;
        Some(Self::Grisvard([0, 1, 2].map(|d| 0.5 * (lo[d] + hi[d]))))
    }

    pub fn eval(&self, p: Point) -> Point {
        match self {
            Self::Radial => p,
            Self::Grisvard(c) => [c[0] - p[0], c[1] - p[1], c[2] - p[2]],
        }
    }

    /// Scalar `s` with `B = s I`.
    fn slope(&self) -> f64 {
        match self {
            Self::Radial => 1.0,
            Self::Grisvard(_) => -1.0,
        }
    }

    pub fn divergence(&self) -> f64 {
        3.0 * self.slope()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Identity {
    /// `∫ ∇z̄·B∇z = −½∫_Γ |∂_ν z|² m·ν + ½ div m ∫(|∇z|² − β²|z|²) + Re∫ F m·∇z̄`
    Multiplier,
    /// `∫(|∇z|² − β²|z|²) = Re∫ F z̄`
    Energy,
}

/// Right-hand side of `−β²z − Δz = F` on the solid.
#[derive(Clone, Copy)]
pub enum Forcing<'a> {
    /// Nodal values on `[interface, solid interior]`, interpolated linearly.
    Nodal(&'a [C64]),
    /// Pointwise function, sampled at quadrature points.
    Function(&'a (dyn Fn(Point) -> C64 + Sync)),
}

impl std::fmt::Debug for Forcing<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Nodal(v) => write!(f, "Nodal({} values)", v.len()),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierReport {
    pub identity: Identity,
    pub field: Option<VectorField>,
    pub beta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `|residual|` over the largest term magnitude (0 for a zero field).
    pub relative: f64,
    pub mesh_size: f64,
    pub tet_degree: usize,
    pub tri_degree: usize,
    pub flux_recovery: &'static str,
}

struct SolidTet {
    local: [usize; 4],
    pts: [Point; 4],
    grads: [Point; 4],
    vol: f64,
}

fn solid_tets(mesh: &Mesh, sys: &SystemMatrices) -> Vec<SolidTet> {
    mesh.tets
        .iter()
        .filter(|t| t.region == Region::Solid)
        .map(|t| {
            let pts = t.vertices.map(|v| mesh.vertices[v]);
            let (grads, vol) = tet_gradients(pts);
            SolidTet {
                local: t.vertices.map(|v| sys.dofs.solid_local[v].expect("solid vertex")),
                pts,
                grads,
                vol,
            }
        })
        .collect()
}

fn grad(t: &SolidTet, z: &[C64]) -> [C64; 3] {
    let mut g = [C64::new(0.0, 0.0); 3];
    for (k, &i) in t.local.iter().enumerate() {
        for d in 0..3 {
            g[d] += z[i] * t.grads[k][d];
        }
    }
    g
}

fn interp(local: &[usize], bary: &[f64], z: &[C64]) -> C64 {
    local.iter().zip(bary).map(|(&i, l)| z[i] * l).sum()
}

/// Load vector `∫ F φ_i` on `[interface, solid interior]`.
pub fn forcing_load(mesh: &Mesh, sys: &SystemMatrices, forcing: Forcing<'_>) -> Vec<C64> {
    match forcing {
        Forcing::Nodal(f) => sys.ms.mul_cvec(f),
        Forcing::Function(f) => {
            let rule = tet_rule(TET_Q);
            let mut load = vec![C64::new(0.0, 0.0); sys.layout.nsolid()];
            for t in solid_tets(mesh, sys) {
                for (l, w) in &rule.points {
                    let fv = f(map_point(l, &t.pts)) * (w * t.vol);
                    for k in 0..4 {
                        load[t.local[k]] += fv * l[k];
                    }
                }
            }
            load
        }
    }
}

/// Evaluates both sides of a multiplier identity for a field `z` vanishing
/// on the interface, with the boundary flux recovered variationally.
pub fn multiplier_residual(
    mesh: &Mesh,
    sys: &SystemMatrices,
    ctx: &ProbeContext,
    z: &ZField,
    forcing: Forcing<'_>,
    identity: Identity,
    field: VectorField,
) -> Result<MultiplierReport, ProbeError> {
    let ns = sys.layout.nsolid();
    check_len(ns, z.values.len())?;
    if let Forcing::Nodal(f) = forcing {
        check_len(ns, f.len())?;
    }
    let beta = z.beta;
    let zv = &z.values;
    let rule = tet_rule(TET_Q);
    let tets = solid_tets(mesh, sys);

    let (mut grad2, mut mass2, mut bgrad, mut f_z, mut f_mgrad) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in &tets {
        let g = grad(t, zv);
        let g2: f64 = g.iter().map(|c| c.norm_sqr()).sum();
        grad2 += t.vol * g2;
        bgrad += t.vol * field.slope() * g2;
        for (l, w) in &rule.points {
            let wt = w * t.vol;
            let zq = interp(&t.local, l, zv);
            let p = map_point(l, &t.pts);
            let fq = match forcing {
                Forcing::Nodal(f) => interp(&t.local, l, f),
                Forcing::Function(f) => f(p),
            };
            mass2 += wt * zq.norm_sqr();
            f_z += wt * (fq * zq.conj()).re;
            let m = field.eval(p);
            let mg: C64 = (0..3).map(|d| g[d].conj() * m[d]).sum();
            f_mgrad += wt * (fq * mg).re;
        }
    }
    let bulk = grad2 - beta * beta * mass2;

    let (lhs, rhs, terms) = match identity {
        Identity::Energy => (bulk, f_z, [grad2, beta * beta * mass2, f_z.abs(), 0.0]),
        Identity::Multiplier => {
            let load = forcing_load(mesh, sys, forcing);
            let q = solid_flux(zv, &load, beta, sys);
            let d = ctx.nodal(&q);
            let tri = tri_rule(TRI_Q);
            let mut flux = 0.0;
            for b in mesh.interface_tris() {
                let pts = b.vertices.map(|v| mesh.vertices[v]);
                let local = b.vertices.map(|v| sys.dofs.interface_local[v].expect("interface vertex"));
                let area = tri_area(pts);
                for (l, w) in &tri.points {
                    let dq = interp(&local, l, &d);
                    flux += w * area * dq.norm_sqr() * dot3(field.eval(map_point(l, &pts)), b.normal);
                }
            }
            let half_div = 0.5 * field.divergence();
            let rhs = -0.5 * flux + half_div * bulk + f_mgrad;
            (bgrad, rhs, [bgrad.abs(), (0.5 * flux).abs(), (half_div * bulk).abs(), f_mgrad.abs()])
        }
    };
    let residual = lhs - rhs;
    let scale = terms.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(MultiplierReport {
        identity,
        field: matches!(identity, Identity::Multiplier).then_some(field),
        beta,
        lhs,
        rhs,
        residual,
        relative: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
        mesh_size: sys.mesh_size,
        tet_degree: rule.degree,
        tri_degree: tri_rule(TRI_Q).degree,
        flux_recovery: "variational",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManufacturedLevel {
    pub n: usize,
    pub mesh_size: f64,
    pub multiplier: MultiplierReport,
    pub energy: MultiplierReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManufacturedStudy {
    pub beta: f64,
    pub amplitude: f64,
    pub levels: Vec<ManufacturedLevel>,
    /// Observed orders `log(r_k/r_{k+1}) / log(h_k/h_{k+1})` between
    /// consecutive levels.
    pub order_multiplier: Vec<f64>,
    pub order_energy: Vec<f64>,
}

fn observed_orders(levels: &[ManufacturedLevel], pick: impl Fn(&ManufacturedLevel) -> f64) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| (pick(&w[0]).abs() / pick(&w[1]).abs()).ln() / (w[0].mesh_size / w[1].mesh_size).ln())
        .collect()
}

/// Refinement study with `z* = a Π sin(π(x_i − lo_i)/L_i)` on the solid
/// cube of the default geometry and its exact forcing.
pub fn manufactured_study(ns: &[usize], beta: f64, amplitude: f64) -> Result<ManufacturedStudy, ProbeError> {
    let mut levels = Vec::with_capacity(ns.len());
    for &n in ns {
        let mesh = build_mesh(&MeshConfig::default().with_n(n))?;
        let sys = build_system(&mesh)?;
        let ctx = ProbeContext::new(&sys)?;
        let (lo, hi) = mesh.solid_bounds().ok_or(ProbeError::NoSolidInterior)?;
        let k = [0, 1, 2].map(|d| std::f64::consts::PI / (hi[d] - lo[d]));
        let zstar = move |p: Point| amplitude * (0..3).map(|d| (k[d] * (p[d] - lo[d])).sin()).product::<f64>();
        let lap = k.iter().map(|v| v * v).sum::<f64>();
        let f = move |p: Point| C64::new((lap - beta * beta) * zstar(p), 0.0);
        let values = sys
            .dofs
            .solid_vertices()
            .iter()
            .map(|&v| C64::new(zstar(mesh.vertices[v]), 0.0))
            .collect();
        let z = ZField {
            values,
            beta,
            source: ZSource::Manufactured,
        };
        let multiplier = multiplier_residual(&mesh, &sys, &ctx, &z, Forcing::Function(&f), Identity::Multiplier, VectorField::Radial)?;
        let energy = multiplier_residual(&mesh, &sys, &ctx, &z, Forcing::Function(&f), Identity::Energy, VectorField::Radial)?;
        levels.push(ManufacturedLevel {
            n,
            mesh_size: sys.mesh_size,
            multiplier,
            energy,
        });
    }
    Ok(ManufacturedStudy {
        beta,
        amplitude,
        order_multiplier: observed_orders(&levels, |l| l.multiplier.residual),
        order_energy: observed_orders(&levels, |l| l.energy.residual),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof_probe::build_z;
    use crate::proof_probe::z_forcing;
    use crate::resolvent::{random_state, solve_static};

    #[test]
    fn zero_field_has_zero_residuals() {
        let s = manufactured_study(&[4, 8], 2.0, 0.0).unwrap();
        for l in &s.levels {
            assert_eq!(l.multiplier.residual, 0.0);
            assert_eq!(l.energy.residual, 0.0);
            assert_eq!(l.multiplier.relative, 0.0);
        }
    }

    #[test]
    fn manufactured_residuals_decrease() {
        let s = manufactured_study(&[4, 8, 16], 2.0, 1.0).unwrap();
        for w in s.levels.windows(2) {
            assert!(w[1].multiplier.residual.abs() < w[0].multiplier.residual.abs());
            assert!(w[1].energy.residual.abs() < w[0].energy.residual.abs());
        }
    }

    #[test]
    fn main2_holds_exactly_for_discrete_resolvent_z() {
        // z solves the discrete interior equation and vanishes on Γ, so the
        // z-tested weak form is exact with the nodal forcing
        let mesh = build_mesh(&MeshConfig::default().with_n(8)).unwrap();
        let sys = build_system(&mesh).unwrap();
        let ctx = ProbeContext::new(&sys).unwrap();
        let b = random_state(11, &sys);
        let beta = 4.0;
        let x = solve_static(beta, &b, &sys).unwrap();
        let z = build_z(&x, &b, beta, &sys, &ctx.dmap).unwrap();
        let f = z_forcing(&x, &b, beta, &sys, &ctx.dmap).unwrap();
        let r = multiplier_residual(&mesh, &sys, &ctx, &z, Forcing::Nodal(&f), Identity::Energy, VectorField::Radial).unwrap();
        assert!(r.relative < 1e-10, "{r:?}");
    }

    #[test]
    fn grisvard_field_points_out_of_the_fluid() {
        let mesh = build_mesh(&MeshConfig::default()).unwrap();
        let m = VectorField::grisvard_for(&mesh).unwrap();
        for b in mesh.interface_tris() {
            let c = map_point(&[1.0 / 3.0; 3], &b.vertices.map(|v| mesh.vertices[v]));
            // ν points into the solid; m points to the centre
            assert!(dot3(m.eval(c), b.normal) >= 0.25 - 1e-12);
        }
    }
}
