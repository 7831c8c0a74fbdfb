//! Nested-box tetrahedral meshes.
//!
//! The fluid occupies an axis-aligned box with an axis-aligned solid cube
//! carved out of its interior. Every grid hexahedron is split into six Kuhn
//! tetrahedra sharing the hex's main diagonal; the split is translation
//! invariant, so neighbouring hexes agree on their shared face diagonals and
//! the mesh is conforming, including across the fluid/solid interface.

mod io;

pub use io::{read_mesh, write_mesh, MESH_FORMAT_VERSION};

use serde::Serialize;
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("configuration: inner box is not aligned with the grid along axis {axis} ({detail})")]
    Misaligned { axis: char, detail: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("mesh validation failed: {0}")]
    Invalid(String),
    #[error("mesh file: {0}")]
    Parse(String),
}

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshConfig {
    pub outer_lo: Point,
    pub outer_hi: Point,
    pub inner_lo: Point,
    pub inner_hi: Point,
    /// Cells per unit length along each axis.
    pub n: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            outer_lo: [0.0; 3],
            outer_hi: [1.0; 3],
            inner_lo: [0.25; 3],
            inner_hi: [0.75; 3],
            n: 4,
        }
    }
}

impl MeshConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Two-cell-per-unit mesh with a one-unit cube inside a three-unit box;
    /// small enough for dense oracles while keeping fluid-interior vertices.
    pub fn tiny() -> Self {
        Self {
            outer_lo: [0.0; 3],
            outer_hi: [3.0; 3],
            inner_lo: [1.0; 3],
            inner_hi: [2.0; 3],
            n: 2,
        }
    }

    fn grid_count(&self, len: f64, axis: usize, what: &str) -> Result<usize, MeshError> {
        let c = len * self.n as f64;
        let r = c.round();
        if (c - r).abs() > 1e-9 * c.abs().max(1.0) {
            return Err(MeshError::Misaligned {
                axis: AXES[axis],
                detail: format!("{what} = {c} grid cells is not an integer"),
            });
        }
        Ok(r as usize)
    }

    /// Grid index ranges `(cells per axis, inner lo index, inner hi index)`.
    fn grid(&self) -> Result<[(usize, usize, usize); 3], MeshError> {
        if self.n == 0 {
            return Err(MeshError::Config("n must be positive".into()));
        }
        let mut out = [(0, 0, 0); 3];
        for a in 0..3 {
            let (ol, oh, il, ih) = (self.outer_lo[a], self.outer_hi[a], self.inner_lo[a], self.inner_hi[a]);
            if !(ol < il && il < ih && ih < oh) {
                return Err(MeshError::Config(format!(
                    "axis {}: need outer_lo < inner_lo < inner_hi < outer_hi, got {ol} {il} {ih} {oh}",
                    AXES[a]
                )));
            }
            let cells = self.grid_count(oh - ol, a, "outer extent")?;
            let lo = self.grid_count(il - ol, a, "n·(inner_lo − outer_lo)")?;
            let hi = self.grid_count(ih - ol, a, "n·(inner_hi − outer_lo)")?;
            out[a] = (cells, lo, hi);
        }
        Ok(out)
    }
}

const AXES: [char; 3] = ['x', 'y', 'z'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    Fluid,
    Solid,
}

/// Boundary tag: the outer wall or one of the faces of the solid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundaryTag {
    Outer,
    /// Face `j ∈ 1..=6` of the solid in the order −x, +x, −y, +y, −z, +z.
    Interface(u8),
}

impl BoundaryTag {
    pub fn is_interface(self) -> bool {
        matches!(self, BoundaryTag::Interface(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tet {
    pub vertices: [usize; 4],
    pub region: Region,
}

/// Boundary triangle; `normal` points out of the fluid (so into the solid on
/// the interface) and the vertex order is counter-clockwise about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTri {
    pub vertices: [usize; 3],
    pub tag: BoundaryTag,
    pub normal: Point,
}

/// One planar face of the solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidFace {
    pub tag: BoundaryTag,
    pub axis: usize,
    pub coordinate: f64,
    /// Unit normal pointing into the solid.
    pub normal: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<Tet>,
    pub boundary: Vec<BoundaryTri>,
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot3(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Point) -> f64 {
    dot3(a, a).sqrt()
}

/// Signed volume of a tetrahedron.
pub fn tet_volume(p: [Point; 4]) -> f64 {
    dot3(sub(p[1], p[0]), cross(sub(p[2], p[0]), sub(p[3], p[0]))) / 6.0
}

pub fn tri_area(p: [Point; 3]) -> f64 {
    0.5 * norm3(cross(sub(p[1], p[0]), sub(p[2], p[0])))
}

/// The faces of an axis-aligned solid box, tagged 1..=6.
pub fn box_faces(lo: Point, hi: Point) -> Vec<SolidFace> {
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for (side, coordinate) in [(0usize, lo[axis]), (1, hi[axis])] {
            let mut normal = [0.0; 3];
            normal[axis] = if side == 0 { 1.0 } else { -1.0 };
            faces.push(SolidFace {
                tag: BoundaryTag::Interface((2 * axis + side + 1) as u8),
                axis,
                coordinate,
                normal,
            });
        }
    }
    faces
}

/// The six Kuhn tetrahedra of the unit cube, as corner bit masks
/// (bit `a` set means the corner is at the high end of axis `a`).
fn kuhn_tets() -> [[usize; 4]; 6] {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = [[0; 4]; 6];
    for (k, p) in perms.iter().enumerate() {
        let c1 = 1 << p[0];
        let c2 = c1 | (1 << p[1]);
        out[k] = [0, c1, c2, 7];
    }
    out
}

pub fn build_mesh(config: &MeshConfig) -> Result<Mesh, MeshError> {
    let grid = config.grid()?;
    let h = 1.0 / config.n as f64;
    let (nx, ny, nz) = (grid[0].0, grid[1].0, grid[2].0);
    let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

    // grid lines, snapped so the box planes are hit bit-exactly
    let lines: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            let (cells, lo, hi) = grid[a];
            (0..=cells)
                .map(|i| match i {
                    0 => config.outer_lo[a],
                    i if i == cells => config.outer_hi[a],
                    i if i == lo => config.inner_lo[a],
                    i if i == hi => config.inner_hi[a],
                    i => config.outer_lo[a] + i as f64 * h,
                })
                .collect()
        })
        .collect();
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([lines[0][i], lines[1][j], lines[2][k]]);
            }
        }
    }

    let inside = |c: usize, a: usize| c >= grid[a].1 && c < grid[a].2;
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let region = if inside(i, 0) && inside(j, 1) && inside(k, 2) {
                    Region::Solid
                } else {
                    Region::Fluid
                };
                for corners in kuhn_tets() {
                    let mut v = corners.map(|c| vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)));
                    if tet_volume(v.map(|x| vertices[x])) < 0.0 {
                        v.swap(2, 3);
                    }
                    tets.push(Tet { vertices: v, region });
                }
            }
        }
    }

    let faces = box_faces(config.inner_lo, config.inner_hi);
    let boundary = extract_boundary(&vertices, &tets, config, &faces)?;
    let mesh = Mesh {
        vertices,
        tets,
        boundary,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn extract_boundary(
    vertices: &[Point],
    tets: &[Tet],
    config: &MeshConfig,
    faces: &[SolidFace],
) -> Result<Vec<BoundaryTri>, MeshError> {
    const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let mut owners: HashMap<[usize; 3], Vec<Region>> = HashMap::new();
    for t in tets {
        for f in LOCAL_FACES {
            let mut key = f.map(|l| t.vertices[l]);
            key.sort_unstable();
            owners.entry(key).or_default().push(t.region);
        }
    }
    let mut keys: Vec<_> = owners.keys().copied().collect();
    keys.sort_unstable();

    let mut out = Vec::new();
    for key in keys {
        let regions = &owners[&key];
        let p = key.map(|v| vertices[v]);
        let (tag, normal) = match regions.as_slice() {
            [_] => {
                let (axis, hi) = outer_plane(p, config).ok_or_else(|| {
                    MeshError::Invalid(format!("boundary face {key:?} is not on the outer box"))
                })?;
                let mut n = [0.0; 3];
                n[axis] = if hi { 1.0 } else { -1.0 };
                (BoundaryTag::Outer, n)
            }
            [a, b] if a != b => {
                let face = faces
                    .iter()
                    .find(|f| p.iter().all(|q| q[f.axis] == f.coordinate))
                    .ok_or_else(|| MeshError::Invalid(format!("interface face {key:?} is off the solid faces")))?;
                (face.tag, face.normal)
            }
            _ => continue,
        };
        let mut v = key;
        if dot3(cross(sub(p[1], p[0]), sub(p[2], p[0])), normal) < 0.0 {
            v.swap(1, 2);
        }
        out.push(BoundaryTri {
            vertices: v,
            tag,
            normal,
        });
    }
    Ok(out)
}

fn outer_plane(p: [Point; 3], config: &MeshConfig) -> Option<(usize, bool)> {
    (0..3).find_map(|a| {
        if p.iter().all(|q| q[a] == config.outer_lo[a]) {
            Some((a, false))
        } else if p.iter().all(|q| q[a] == config.outer_hi[a]) {
            Some((a, true))
        } else {
            None
        }
    })
}

impl Mesh {
    pub fn region_volume(&self, region: Region) -> f64 {
        self.tets
            .iter()
            .filter(|t| t.region == region)
            .map(|t| tet_volume(t.vertices.map(|v| self.vertices[v])))
            .sum()
    }

    pub fn interface_tris(&self) -> impl Iterator<Item = &BoundaryTri> {
        self.boundary.iter().filter(|b| b.tag.is_interface())
    }

    pub fn count_tag(&self, tag: BoundaryTag) -> usize {
        self.boundary.iter().filter(|b| b.tag == tag).count()
    }

    /// Mesh width: longest tetrahedron edge.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.tets {
            for a in 0..4 {
                for b in a + 1..4 {
                    h = h.max(norm3(sub(self.vertices[t.vertices[a]], self.vertices[t.vertices[b]])));
                }
            }
        }
        h
    }

    /// Axis-aligned bounding box of the solid region.
    pub fn solid_bounds(&self) -> Option<(Point, Point)> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut any = false;
        for t in self.tets.iter().filter(|t| t.region == Region::Solid) {
            any = true;
            for &v in &t.vertices {
                for a in 0..3 {
                    lo[a] = lo[a].min(self.vertices[v][a]);
                    hi[a] = hi[a].max(self.vertices[v][a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Largest dihedral angle over all tetrahedra, in radians.
    pub fn max_dihedral_angle(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.tets {
            let p = t.vertices.map(|v| self.vertices[v]);
            // outward normals of the four faces, face k opposite vertex k
            let mut normals = [[0.0; 3]; 4];
            for k in 0..4 {
                let f: Vec<Point> = (0..4).filter(|&i| i != k).map(|i| p[i]).collect();
                let mut n = cross(sub(f[1], f[0]), sub(f[2], f[0]));
                if dot3(n, sub(p[k], f[0])) > 0.0 {
                    n = [-n[0], -n[1], -n[2]];
                }
                let l = norm3(n);
                normals[k] = [n[0] / l, n[1] / l, n[2] / l];
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    let c = (-dot3(normals[a], normals[b])).clamp(-1.0, 1.0);
                    worst = worst.max(c.acos());
                }
            }
        }
        worst
    }

    /// Checks the structural invariants: positive volumes, disjoint tagged
    /// boundary sets, an interface made of fluid/solid shared faces.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len();
        for (k, t) in self.tets.iter().enumerate() {
            if t.vertices.iter().any(|&v| v >= nv) {
                return Err(MeshError::Invalid(format!("tet {k} references a missing vertex")));
            }
            let vol = tet_volume(t.vertices.map(|v| self.vertices[v]));
            if !(vol > 0.0) {
                return Err(MeshError::Invalid(format!("tet {k} has non-positive volume {vol}")));
            }
        }
        let mut seen: HashMap<[usize; 3], BoundaryTag> = HashMap::new();
        for b in &self.boundary {
            if b.vertices.iter().any(|&v| v >= nv) {
                return Err(MeshError::Invalid("boundary triangle references a missing vertex".into()));
            }
            let mut key = b.vertices;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, b.tag) {
                return Err(MeshError::Invalid(format!(
                    "triangle {key:?} tagged twice ({prev:?}, {:?})",
                    b.tag
                )));
            }
        }
        if self.interface_tris().next().is_none() {
            return Err(MeshError::Invalid("mesh has no interface triangles".into()));
        }
        let mut face_regions: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for t in &self.tets {
            for skip in 0..4 {
                let mut key = [0; 3];
                let mut c = 0;
                for (l, &v) in t.vertices.iter().enumerate() {
                    if l != skip {
                        key[c] = v;
                        c += 1;
                    }
                }
                key.sort_unstable();
                let e = face_regions.entry(key).or_insert((0, 0));
                match t.region {
                    Region::Fluid => e.0 += 1,
                    Region::Solid => e.1 += 1,
                }
            }
        }
        for b in self.interface_tris() {
            let mut key = b.vertices;
            key.sort_unstable();
            if face_regions.get(&key) != Some(&(1, 1)) {
                return Err(MeshError::Invalid(format!(
                    "interface triangle {key:?} is not shared by one fluid and one solid tet"
                )));
            }
        }
        for (key, &(f, s)) in &face_regions {
            if f == 1 && s == 1 && !seen.get(key).is_some_and(|t| t.is_interface()) {
                return Err(MeshError::Invalid(format!("untagged fluid/solid face {key:?}")));
            }
        }
        Ok(())
    }
}

/// Total area of the interface triangles.
pub fn interface_area(mesh: &Mesh) -> Result<f64, MeshError> {
    let mut area = 0.0;
    let mut any = false;
    for b in mesh.interface_tris() {
        any = true;
        area += tri_area(b.vertices.map(|v| mesh.vertices[v]));
    }
    if !any {
        return Err(MeshError::Invalid("mesh has no interface triangles".into()));
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let m = build_mesh(&MeshConfig::default()).unwrap();
        assert_eq!(m.vertices.len(), 125);
        assert_eq!(m.tets.len(), 384);
        assert_eq!(m.tets.iter().filter(|t| t.region == Region::Solid).count(), 48);
        assert_eq!(m.tets.iter().filter(|t| t.region == Region::Fluid).count(), 56 * 6);
    }

    #[test]
    fn default_volumes() {
        let m = build_mesh(&MeshConfig::default()).unwrap();
        assert!((m.region_volume(Region::Fluid) - 0.875).abs() <= 1e-12 * 0.875);
        assert!((m.region_volume(Region::Solid) - 0.125).abs() <= 1e-12 * 0.125);
    }

    #[test]
    fn misaligned_inner_cube_names_axis() {
        let err = build_mesh(&MeshConfig::default().with_n(3)).unwrap_err();
        match err {
            MeshError::Misaligned { axis, .. } => assert_eq!(axis, 'x'),
            other => panic!("unexpected {other}"),
        }
        let mut c = MeshConfig::default().with_n(4);
        c.inner_hi[2] = 0.7;
        assert!(matches!(build_mesh(&c), Err(MeshError::Misaligned { axis: 'z', .. })));
    }

    #[test]
    fn interface_areas() {
        let m = build_mesh(&MeshConfig::default()).unwrap();
        assert!((interface_area(&m).unwrap() - 1.5).abs() < 1e-14);
        let c = MeshConfig {
            inner_lo: [0.3; 3],
            inner_hi: [0.7; 3],
            n: 10,
            ..MeshConfig::default()
        };
        let m = build_mesh(&c).unwrap();
        assert!((interface_area(&m).unwrap() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn no_interface_is_an_error() {
        let m = Mesh {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            tets: vec![Tet {
                vertices: [0, 1, 2, 3],
                region: Region::Fluid,
            }],
            boundary: vec![],
        };
        assert!(interface_area(&m).is_err());
        assert!(m.validate().is_err());
    }

    #[test]
    fn refinement_scales_counts() {
        let a = build_mesh(&MeshConfig::default()).unwrap();
        let b = build_mesh(&MeshConfig::default().with_n(8)).unwrap();
        assert_eq!(b.tets.len(), 8 * a.tets.len());
        for j in 1..=6 {
            let tag = BoundaryTag::Interface(j);
            assert_eq!(b.count_tag(tag), 4 * a.count_tag(tag));
        }
        assert_eq!(b.count_tag(BoundaryTag::Outer), 4 * a.count_tag(BoundaryTag::Outer));
    }

    #[test]
    fn interface_normals_point_into_solid() {
        let m = build_mesh(&MeshConfig::default()).unwrap();
        let c = [0.5; 3];
        for b in m.interface_tris() {
            let p = b.vertices.map(|v| m.vertices[v]);
            let fc = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                (p[0][2] + p[1][2] + p[2][2]) / 3.0,
            ];
            assert!(dot3(b.normal, sub(c, fc)) > 0.0);
            let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
            assert!(dot3(n, b.normal) > 0.0);
        }
    }

    #[test]
    fn interface_vertices_touch_both_regions() {
        let m = build_mesh(&MeshConfig::default().with_n(8)).unwrap();
        let mut fluid = vec![false; m.vertices.len()];
        let mut solid = vec![false; m.vertices.len()];
        for t in &m.tets {
            for &v in &t.vertices {
                match t.region {
                    Region::Fluid => fluid[v] = true,
                    Region::Solid => solid[v] = true,
                }
            }
        }
        for b in m.interface_tris() {
            for &v in &b.vertices {
                assert!(fluid[v] && solid[v]);
            }
        }
    }

    #[test]
    fn kuhn_tets_are_nonobtuse() {
        let m = build_mesh(&MeshConfig::default()).unwrap();
        assert!(m.max_dihedral_angle() <= std::f64::consts::FRAC_PI_2 + 1e-12);
    }
}
