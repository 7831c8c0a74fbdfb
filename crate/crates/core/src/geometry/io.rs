use super::{BoundaryTag, BoundaryTri, Mesh, MeshError, Region, Tet};
use std::fmt::Write as _;

pub const MESH_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "layered-fsi-mesh";

// Floats are written with `{:?}`, which prints the shortest string that
// parses back to the same bits.

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("{MAGIC} {MESH_FORMAT_VERSION}\n");
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let region = match t.region {
            Region::Fluid => "fluid",
            Region::Solid => "solid",
        };
        let v = t.vertices;
        let _ = writeln!(s, "{} {} {} {} {region}", v[0], v[1], v[2], v[3]);
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary.len());
    for b in &mesh.boundary {
        let tag = match b.tag {
            BoundaryTag::Outer => "gamma_f".to_string(),
            BoundaryTag::Interface(j) => format!("gamma_{j}"),
        };
        let (v, n) = (b.vertices, b.normal);
        let _ = writeln!(s, "{} {} {} {tag} {:?} {:?} {:?}", v[0], v[1], v[2], n[0], n[1], n[2]);
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>), MeshError> {
        loop {
            let (i, line) = self
                .inner
                .next()
                .ok_or_else(|| MeshError::Parse("unexpected end of file".into()))?;
            let line = line.trim();
            if !line.is_empty() {
                return Ok((i + 1, line.split_whitespace().collect()));
            }
        }
    }

    fn section(&mut self, name: &str) -> Result<usize, MeshError> {
        let (ln, f) = self.next()?;
        match f.as_slice() {
            [n, count] if *n == name => count
                .parse()
                .map_err(|_| MeshError::Parse(format!("line {ln}: bad {name} count"))),
            _ => Err(MeshError::Parse(format!("line {ln}: expected `{name} <count>`"))),
        }
    }
}

fn parse<T: std::str::FromStr>(ln: usize, s: &str) -> Result<T, MeshError> {
    s.parse()
        .map_err(|_| MeshError::Parse(format!("line {ln}: cannot parse `{s}`")))
}

pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, header) = lines.next()?;
    match header.as_slice() {
        [m, v] if *m == MAGIC => {
            let v: u32 = parse(ln, v)?;
            if v != MESH_FORMAT_VERSION {
                return Err(MeshError::Parse(format!("unsupported mesh format version {v}")));
            }
        }
        _ => return Err(MeshError::Parse("missing mesh header".into())),
    }

    let nv = lines.section("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, f) = lines.next()?;
        if f.len() != 3 {
            return Err(MeshError::Parse(format!("line {ln}: expected 3 coordinates")));
        }
        vertices.push([parse(ln, f[0])?, parse(ln, f[1])?, parse(ln, f[2])?]);
    }

    let nt = lines.section("tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, f) = lines.next()?;
        if f.len() != 5 {
            return Err(MeshError::Parse(format!("line {ln}: expected 4 indices and a region")));
        }
        let region = match f[4] {
            "fluid" => Region::Fluid,
            "solid" => Region::Solid,
            other => return Err(MeshError::Parse(format!("line {ln}: unknown region `{other}`"))),
        };
        tets.push(Tet {
            vertices: [parse(ln, f[0])?, parse(ln, f[1])?, parse(ln, f[2])?, parse(ln, f[3])?],
            region,
        });
    }

    let nb = lines.section("boundary")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, f) = lines.next()?;
        if f.len() != 7 {
            return Err(MeshError::Parse(format!("line {ln}: expected 3 indices, a tag and a normal")));
        }
        let tag = match f[3] {
            "gamma_f" => BoundaryTag::Outer,
            t => match t.strip_prefix("gamma_").and_then(|j| j.parse::<u8>().ok()) {
                Some(j) if (1..=6).contains(&j) => BoundaryTag::Interface(j),
                _ => return Err(MeshError::Parse(format!("line {ln}: unknown tag `{t}`"))),
            },
        };
        boundary.push(BoundaryTri {
            vertices: [parse(ln, f[0])?, parse(ln, f[1])?, parse(ln, f[2])?],
            tag,
            normal: [parse(ln, f[4])?, parse(ln, f[5])?, parse(ln, f[6])?],
        });
    }
    let mesh = Mesh {
        vertices,
        tets,
        boundary,
    };
    mesh.validate()?;
    Ok(mesh)
}
