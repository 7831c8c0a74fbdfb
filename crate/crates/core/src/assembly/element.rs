use super::AssemblyError;
use crate::geometry::{cross, dot3, norm3, sub, Mesh, Point, Region};
use crate::linalg::{SparseMatrix, TripletBuilder};

/// Gradients of the four barycentric coordinates of a tetrahedron and its
/// volume.
pub fn tet_gradients(p: [Point; 4]) -> ([Point; 4], f64) {
    let e = [sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0])];
    let det = dot3(e[0], cross(e[1], e[2]));
    // rows of the inverse Jacobian are the gradients of λ1..λ3
    let g1 = cross(e[1], e[2]).map(|v| v / det);
    let g2 = cross(e[2], e[0]).map(|v| v / det);
    let g3 = cross(e[0], e[1]).map(|v| v / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    ([g0, g1, g2, g3], det / 6.0)
}

/// Tangential gradients of the three barycentric coordinates of a triangle,
/// computed in face-local 2D coordinates, and its area.
pub fn tri_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let ab = sub(p[1], p[0]);
    let ac = sub(p[2], p[0]);
    let l = norm3(ab);
    let e1 = ab.map(|v| v / l);
    let nrm = cross(ab, ac);
    let twice_area = norm3(nrm);
    let e2 = cross(nrm.map(|v| v / twice_area), e1);
    let (bx, cx, cy) = (l, dot3(ac, e1), dot3(ac, e2));
    // λ1 = (cy·x − cx·y)/(bx·cy), λ2 = y/cy
    let det = bx * cy;
    let g1 = [cy / det, -cx / det];
    let g2 = [0.0, bx / det];
    let g0 = [-(g1[0] + g2[0]), -(g1[1] + g2[1])];
    ([g0, g1, g2], 0.5 * twice_area)
}

/// P1 mass and stiffness matrices over one region, indexed by global vertex.
pub fn assemble_volume(
    mesh: &Mesh,
    region: Region,
) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>), AssemblyError> {
    let n = mesh.vertices.len();
    let tets: Vec<_> = mesh.tets.iter().filter(|t| t.region == region).collect();
    if tets.is_empty() {
        return Err(AssemblyError::EmptyRegion(region));
    }
    let mut m = TripletBuilder::with_capacity(n, n, 16 * tets.len());
    let mut k = TripletBuilder::with_capacity(n, n, 16 * tets.len());
    for t in tets {
        let (g, vol) = tet_gradients(t.vertices.map(|v| mesh.vertices[v]));
        for a in 0..4 {
            for b in 0..4 {
                let (i, j) = (t.vertices[a], t.vertices[b]);
                m.push(i, j, vol / 20.0 * if a == b { 2.0 } else { 1.0 });
                k.push(i, j, vol * dot3(g[a], g[b]));
            }
        }
    }
    Ok((m.build(), k.build()))
}

/// P1 mass and Laplace–Beltrami stiffness over the interface triangles,
/// indexed by global vertex. Faces meeting at an edge share the edge's
/// vertices, so the surface space is globally continuous.
pub fn assemble_surface(mesh: &Mesh) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>), AssemblyError> {
    let n = mesh.vertices.len();
    let tris: Vec<_> = mesh.interface_tris().collect();
    if tris.is_empty() {
        return Err(AssemblyError::NoInterface);
    }
    let mut m = TripletBuilder::with_capacity(n, n, 9 * tris.len());
    let mut k = TripletBuilder::with_capacity(n, n, 9 * tris.len());
    for t in tris {
        let (g, area) = tri_gradients(t.vertices.map(|v| mesh.vertices[v]));
        for a in 0..3 {
            for b in 0..3 {
                let (i, j) = (t.vertices[a], t.vertices[b]);
                m.push(i, j, area / 12.0 * if a == b { 2.0 } else { 1.0 });
                k.push(i, j, area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
            }
        }
    }
    Ok((m.build(), k.build()))
}
