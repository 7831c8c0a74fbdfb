//! P1 finite-element blocks and the first-order pair `(M, A)`.
//!
//! The state vector is laid out as
//!
//! ```text
//! x = [ u (fluid interior, interface) | h0 (interface) | w0 (solid interior) | w1 (solid interior) ]
//! ```
//!
//! The interface block of `u` is also the thin-layer velocity and the trace of
//! the thick velocity, and `h0` is also the interface block of the thick
//! displacement. Grouping the slots into a velocity `V = (u, w1)` and a
//! displacement `D = (h0, w0)`, the semi-discrete system reads
//!
//! ```text
//! K_d Ḋ = K_d S V
//! M_v V̇ = −Sᵀ K_d D − K_f V
//! ```
//!
//! with `S` the map from `V` to the solid velocity `(u|Γ, w1)`,
//! `K_d = K_s + K_Γ + M_Γ` the displacement energy and
//! `M_v = M_f + M_Γ + M_s` the velocity mass. Hence `M = diag(K_d, M_v)` is the
//! energy Gram matrix and `Re(xᴴAx) = −uᴴK_f u` holds identically.

mod element;

pub use element::{assemble_surface, assemble_volume, tet_gradients, tri_gradients};

use crate::geometry::{BoundaryTag, Mesh, MeshError, Region};
use crate::linalg::{dot, BandCholesky, LinalgError, Scalar, SparseMatrix, TripletBuilder};

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("region {0:?} has no tetrahedra")]
    EmptyRegion(Region),
    #[error("mesh has no interface triangles")]
    NoInterface,
    #[error("state length {got} does not match the layout ({expected})")]
    Layout { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Vertex partitions and their local numberings.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub fluid_interior: Vec<usize>,
    pub interface: Vec<usize>,
    pub solid_interior: Vec<usize>,
    /// Interface vertices of each solid face, in tag order (interface-local
    /// indices; edge and corner vertices appear in several faces).
    pub faces: Vec<(BoundaryTag, Vec<usize>)>,
    /// Global vertex → position in `[fluid_interior, interface]`.
    pub fluid_local: Vec<Option<usize>>,
    /// Global vertex → position in `[interface, solid_interior]`.
    pub solid_local: Vec<Option<usize>>,
    /// Global vertex → position in `interface`.
    pub interface_local: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Result<Self, AssemblyError> {
        let n = mesh.vertices.len();
        let mut outer = vec![false; n];
        let mut on_gamma = vec![false; n];
        for b in &mesh.boundary {
            for &v in &b.vertices {
                if b.tag.is_interface() {
                    on_gamma[v] = true;
                } else {
                    outer[v] = true;
                }
            }
        }
        if !on_gamma.iter().any(|&b| b) {
            return Err(AssemblyError::NoInterface);
        }
        let (mut in_fluid, mut in_solid) = (vec![false; n], vec![false; n]);
        for t in &mesh.tets {
            for &v in &t.vertices {
                match t.region {
                    Region::Fluid => in_fluid[v] = true,
                    Region::Solid => in_solid[v] = true,
                }
            }
        }
        if !in_solid.iter().any(|&b| b) {
            return Err(AssemblyError::EmptyRegion(Region::Solid));
        }
        if !in_fluid.iter().any(|&b| b) {
            return Err(AssemblyError::EmptyRegion(Region::Fluid));
        }
        let fluid_interior: Vec<usize> = (0..n).filter(|&v| in_fluid[v] && !outer[v] && !on_gamma[v]).collect();
        let interface: Vec<usize> = (0..n).filter(|&v| on_gamma[v]).collect();
        let solid_interior: Vec<usize> = (0..n).filter(|&v| in_solid[v] && !on_gamma[v]).collect();

        let mut fluid_local = vec![None; n];
        let mut solid_local = vec![None; n];
        let mut interface_local = vec![None; n];
        for (k, &v) in fluid_interior.iter().chain(&interface).enumerate() {
            fluid_local[v] = Some(k);
        }
        for (k, &v) in interface.iter().chain(&solid_interior).enumerate() {
            solid_local[v] = Some(k);
        }
        for (k, &v) in interface.iter().enumerate() {
            interface_local[v] = Some(k);
        }

        let mut tags: Vec<BoundaryTag> = mesh.interface_tris().map(|b| b.tag).collect();
        tags.sort_unstable();
        tags.dedup();
        let faces = tags
            .into_iter()
            .map(|tag| {
                let mut vs: Vec<usize> = mesh
                    .boundary
                    .iter()
                    .filter(|b| b.tag == tag)
                    .flat_map(|b| b.vertices)
                    .map(|v| interface_local[v].unwrap())
                    .collect();
                vs.sort_unstable();
                vs.dedup();
                (tag, vs)
            })
            .collect();

        Ok(Self {
            fluid_interior,
            interface,
            solid_interior,
            faces,
            fluid_local,
            solid_local,
            interface_local,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            nf: self.fluid_interior.len(),
            ng: self.interface.len(),
            ns: self.solid_interior.len(),
        }
    }

    /// Global vertex indices of the fluid unknowns, in `u` order.
    pub fn fluid_vertices(&self) -> Vec<usize> {
        self.fluid_interior.iter().chain(&self.interface).copied().collect()
    }

    /// Global vertex indices of the solid unknowns, in `w0` order.
    pub fn solid_vertices(&self) -> Vec<usize> {
        self.interface.iter().chain(&self.solid_interior).copied().collect()
    }
}

/// Sizes of the vertex partitions and the resulting state offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    /// fluid interior vertices
    pub nf: usize,
    /// interface vertices
    pub ng: usize,
    /// solid interior vertices
    pub ns: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.nf + 2 * self.ng + 2 * self.ns
    }
    /// Length of the `u` block.
    pub fn nu(&self) -> usize {
        self.nf + self.ng
    }
    /// Length of the solid blocks `[interface, solid interior]`.
    pub fn nsolid(&self) -> usize {
        self.ng + self.ns
    }
    pub fn h0_offset(&self) -> usize {
        self.nu()
    }
    pub fn w0_offset(&self) -> usize {
        self.nu() + self.ng
    }
    pub fn w1_offset(&self) -> usize {
        self.nu() + self.ng + self.ns
    }
    /// State index of velocity slot `k` of `V = (u, w1)`.
    pub fn velocity_index(&self, k: usize) -> usize {
        if k < self.nu() {
            k
        } else {
            self.w1_offset() + (k - self.nu())
        }
    }
    /// State index of displacement slot `k` of `D = (h0, w0)`.
    pub fn displacement_index(&self, k: usize) -> usize {
        self.h0_offset() + k
    }
    pub fn nvel(&self) -> usize {
        self.nu() + self.ns
    }
    /// Velocity slot carrying the solid velocity at solid slot `r`.
    pub fn solid_velocity_slot(&self, r: usize) -> usize {
        if r < self.ng {
            self.nf + r
        } else {
            self.nu() + (r - self.ng)
        }
    }
}

/// Structured view of a state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub u: Vec<T>,
    pub h0: Vec<T>,
    pub w0_int: Vec<T>,
    pub w1_int: Vec<T>,
}

impl<T: Scalar> State<T> {
    pub fn zeros(l: &Layout) -> Self {
        Self {
            u: vec![T::zero(); l.nu()],
            h0: vec![T::zero(); l.ng],
            w0_int: vec![T::zero(); l.ns],
            w1_int: vec![T::zero(); l.ns],
        }
    }

    pub fn from_slice(l: &Layout, x: &[T]) -> Result<Self, AssemblyError> {
        if x.len() != l.dim() {
            return Err(AssemblyError::Layout {
                expected: l.dim(),
                got: x.len(),
            });
        }
        Ok(Self {
            u: x[..l.nu()].to_vec(),
            h0: x[l.h0_offset()..l.w0_offset()].to_vec(),
            w0_int: x[l.w0_offset()..l.w1_offset()].to_vec(),
            w1_int: x[l.w1_offset()..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.u.len() + self.h0.len() + 2 * self.w0_int.len());
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.h0);
        v.extend_from_slice(&self.w0_int);
        v.extend_from_slice(&self.w1_int);
        v
    }

    /// Trace of the fluid velocity on the interface.
    pub fn u_gamma(&self) -> &[T] {
        &self.u[self.u.len() - self.h0.len()..]
    }

    /// Thick displacement on `[interface, solid interior]`.
    pub fn w0(&self) -> Vec<T> {
        self.h0.iter().chain(&self.w0_int).copied().collect()
    }

    /// Thick velocity on `[interface, solid interior]`.
    pub fn w1(&self) -> Vec<T> {
        self.u_gamma().iter().chain(&self.w1_int).copied().collect()
    }
}

/// All assembled matrices of one mesh. Immutable once built.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub dofs: DofMap,
    pub layout: Layout,
    /// Fluid mass and stiffness on `u`.
    pub mf: SparseMatrix<f64>,
    pub kf: SparseMatrix<f64>,
    /// Surface mass and Laplace–Beltrami stiffness on the interface.
    pub mg: SparseMatrix<f64>,
    pub kg: SparseMatrix<f64>,
    /// Solid mass and stiffness on `[interface, solid interior]`.
    pub ms: SparseMatrix<f64>,
    pub ks: SparseMatrix<f64>,
    /// `K_s + K_Γ + M_Γ` on the displacement `D`.
    pub k_disp: SparseMatrix<f64>,
    /// `M_f + M_Γ + M_s` on the velocity `V`.
    pub m_vel: SparseMatrix<f64>,
    /// `K_f` padded to the velocity `V`.
    pub k_vel: SparseMatrix<f64>,
    /// Composite Gram matrix (SPD) and generator on the full state.
    pub m: SparseMatrix<f64>,
    pub a: SparseMatrix<f64>,
    m_chol: BandCholesky,
    pub mesh_size: f64,
}

pub fn build_system(mesh: &Mesh) -> Result<SystemMatrices, AssemblyError> {
    let dofs = DofMap::new(mesh)?;
    let l = dofs.layout();
    let (mf_all, kf_all) = assemble_volume(mesh, Region::Fluid)?;
    let (ms_all, ks_all) = assemble_volume(mesh, Region::Solid)?;
    let (mg_all, kg_all) = assemble_surface(mesh)?;
    let fv = dofs.fluid_vertices();
    let sv = dofs.solid_vertices();
    let gv = &dofs.interface;
    let mf = mf_all.submatrix(&fv, &fv);
    let kf = kf_all.submatrix(&fv, &fv);
    let ms = ms_all.submatrix(&sv, &sv);
    let ks = ks_all.submatrix(&sv, &sv);
    let mg = mg_all.submatrix(gv, gv);
    let kg = kg_all.submatrix(gv, gv);

    let nd = l.nsolid();
    let nv = l.nvel();
    let mut kd = TripletBuilder::new(nd, nd);
    for (i, j, v) in ks.triplets() {
        kd.push(i, j, v);
    }
    for (i, j, v) in kg.triplets().chain(mg.triplets()) {
        kd.push(i, j, v);
    }
    let k_disp = kd.build();

    let mut mv = TripletBuilder::new(nv, nv);
    for (i, j, v) in mf.triplets() {
        mv.push(i, j, v);
    }
    for (i, j, v) in mg.triplets() {
        mv.push(l.nf + i, l.nf + j, v);
    }
    for (i, j, v) in ms.triplets() {
        mv.push(l.solid_velocity_slot(i), l.solid_velocity_slot(j), v);
    }
    let m_vel = mv.build();

    let mut kv = TripletBuilder::new(nv, nv);
    for (i, j, v) in kf.triplets() {
        kv.push(i, j, v);
    }
    let k_vel = kv.build();

    let n = l.dim();
    let mut mt = TripletBuilder::new(n, n);
    let mut at = TripletBuilder::new(n, n);
    for (i, j, v) in k_disp.triplets() {
        mt.push(l.displacement_index(i), l.displacement_index(j), v);
        // K_d S V and −Sᵀ K_d D
        let (di, dj) = (l.displacement_index(i), l.displacement_index(j));
        at.push(di, l.velocity_index(l.solid_velocity_slot(j)), v);
        at.push(l.velocity_index(l.solid_velocity_slot(i)), dj, -v);
    }
    for (i, j, v) in m_vel.triplets() {
        mt.push(l.velocity_index(i), l.velocity_index(j), v);
    }
    for (i, j, v) in k_vel.triplets() {
        at.push(l.velocity_index(i), l.velocity_index(j), -v);
    }
    let m = mt.build();
    let a = at.build();
    let m_chol = BandCholesky::new(&m)?;

    Ok(SystemMatrices {
        dofs,
        layout: l,
        mf,
        kf,
        mg,
        kg,
        ms,
        ks,
        k_disp,
        m_vel,
        k_vel,
        m,
        a,
        m_chol,
        mesh_size: mesh.mesh_size(),
    })
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// `M⁻¹ y`.
    pub fn solve_mass<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        solve_real_factor(&self.m_chol, y)
    }

    pub fn mass_factor(&self) -> &BandCholesky {
        &self.m_chol
    }

    /// `⟨x, y⟩_H = xᴴ M y`.
    pub fn inner<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.m.apply(y))
    }

    /// `uᴴ K_f u`, the instantaneous fluid dissipation `‖∇u‖²`.
    pub fn dissipation<T: Scalar>(&self, x: &[T]) -> f64 {
        let u = &x[..self.layout.nu()];
        dot(u, &self.kf.apply(u)).real()
    }

    /// Smallest eigenvalue of `M` by inverse iteration.
    pub fn gram_min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let y = self.m_chol.solve(&x);
            let ny = crate::linalg::norm2(&y);
            let next = 1.0 / ny * crate::linalg::norm2(&x);
            x = y.iter().map(|v| v / ny).collect();
            if (next - lambda).abs() <= 1e-12 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda
    }
}

pub(crate) fn solve_real_factor<T: Scalar>(chol: &BandCholesky, y: &[T]) -> Vec<T> {
    // Split into real and imaginary parts through the scalar interface.
    let re: Vec<f64> = y.iter().map(|v| v.real()).collect();
    let xr = chol.solve(&re);
    let im: Vec<f64> = y.iter().map(|v| T::imag_part(*v)).collect();
    if im.iter().all(|&v| v == 0.0) {
        return xr.into_iter().map(T::from_real).collect();
    }
    let xi = chol.solve(&im);
    xr.into_iter().zip(xi).map(|(r, i)| T::from_parts(r, i)).collect()
}

/// `‖x‖_H = √(xᴴ M x)`.
pub fn energy_norm<T: Scalar>(x: &[T], sys: &SystemMatrices) -> f64 {
    sys.inner(x, x).real().max(0.0).sqrt()
}

/// `‖x‖_H + ‖M⁻¹Ax‖_H`.
pub fn graph_norm<T: Scalar>(x: &[T], sys: &SystemMatrices) -> f64 {
    let ax = sys.a.apply(x);
    energy_norm(x, sys) + energy_norm(&sys.solve_mass(&ax), sys)
}
