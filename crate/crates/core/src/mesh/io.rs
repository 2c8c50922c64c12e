//! ASCII mesh format:
//!
//! ```text
//! shapehess-mesh v1
//! vertices N
//! x y            (N lines)
//! triangles M
//! i j k          (M lines, 0-based)
//! boundary K
//! i j TAG        (K lines, TAG ∈ {D, N})
//! ```

use std::fmt::Write as _;

use super::{BoundaryTag, Mesh2D};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::scalar::Real;

pub const MESH_HEADER: &str = "shapehess-mesh v1";

pub fn write_mesh<T: Real>(mesh: &Mesh2D<T>) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e}", p.x.to_f64_lossy(), p.y.to_f64_lossy()).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "boundary {}", mesh.boundary().len()).unwrap();
    for e in mesh.boundary() {
        writeln!(s, "{} {} {}", e.a, e.b, e.tag).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok(toks);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MeshParse { line: self.line, msg: msg.into() }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let toks = self.next_tokens()?;
        if toks.len() != 2 || toks[0] != name {
            return Err(self.err(format!("expected `{name} <count>`")));
        }
        toks[1].parse().map_err(|_| self.err(format!("bad {name} count `{}`", toks[1])))
    }

    fn fields<const N: usize>(&mut self) -> Result<[&'a str; N]> {
        let toks = self.next_tokens()?;
        toks.try_into().map_err(|t: Vec<&str>| self.err(format!("expected {N} fields, found {}", t.len())))
    }

    fn index(&self, tok: &str) -> Result<usize> {
        tok.parse().map_err(|_| self.err(format!("bad index `{tok}`")))
    }
}

pub fn read_mesh<T: Real>(text: &str) -> Result<Mesh2D<T>> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let header = lines.next_tokens()?.join(" ");
    if header != MESH_HEADER {
        return Err(lines.err(format!("expected header `{MESH_HEADER}`")));
    }
    let nv = lines.section("vertices")?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let [x, y] = lines.fields::<2>()?;
        let x: f64 = x.parse().map_err(|_| lines.err(format!("bad coordinate `{x}`")))?;
        let y: f64 = y.parse().map_err(|_| lines.err(format!("bad coordinate `{y}`")))?;
        verts.push(Vec2::new(T::lit(x), T::lit(y)));
    }
    let nt = lines.section("triangles")?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let [a, b, c] = lines.fields::<3>()?;
        tris.push([lines.index(a)?, lines.index(b)?, lines.index(c)?]);
    }
    let nb = lines.section("boundary")?;
    let mut bnd = Vec::with_capacity(nb);
    for _ in 0..nb {
        let [a, b, tag] = lines.fields::<3>()?;
        let tag = match tag {
            "D" => BoundaryTag::Dirichlet,
            "N" => BoundaryTag::Neumann,
            other => return Err(lines.err(format!("unknown tag `{other}`"))),
        };
        bnd.push((lines.index(a)?, lines.index(b)?, tag));
    }
    Mesh2D::new(verts, tris, &bnd)
}

/// Per-vertex data for [`write_vtk`].
pub enum PointField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [[f64; 2]]),
}

/// Legacy ASCII VTK unstructured grid of the vertex triangulation with the
/// given point data.
pub fn write_vtk<T: Real>(mesh: &Mesh2D<T>, title: &str, fields: &[PointField<'_>]) -> String {
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e} 0", p.x.to_f64_lossy(), p.y.to_f64_lossy()).unwrap();
    }
    let nt = mesh.n_triangles();
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {}", mesh.n_vertices()).unwrap();
    }
    for f in fields {
        match f {
            PointField::Scalar(name, vals) => {
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for v in vals.iter() {
                    writeln!(s, "{v:.16e}").unwrap();
                }
            }
            PointField::Vector(name, vals) => {
                writeln!(s, "VECTORS {name} double").unwrap();
                for v in vals.iter() {
                    writeln!(s, "{:.16e} {:.16e} 0", v[0], v[1]).unwrap();
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk;

    #[test]
    fn round_trip_is_exact() {
        let m = generate_disk::<f64>(1.0, 0.25, 0.5).unwrap();
        let text = write_mesh(&m);
        let back: Mesh2D<f64> = read_mesh(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_mesh(&back), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "shapehess-mesh v1\nvertices 1\n0 zero\n";
        match read_mesh::<f64>(bad) {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_mesh::<f64>("mesh v2\n").is_err());
        let tag = "shapehess-mesh v1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1 D\n1 2 X\n2 0 D\n";
        assert!(matches!(read_mesh::<f64>(tag), Err(Error::MeshParse { line: 10, .. })));
    }

    #[test]
    fn vtk_layout() {
        let m = crate::mesh::generate_rectangle::<f64>(1.0, 1.0, 1.0, [BoundaryTag::Dirichlet; 4]).unwrap();
        let u = vec![1.0; m.n_vertices()];
        let g = vec![[0.5, -0.5]; m.n_vertices()];
        let text = write_vtk(&m, "t", &[PointField::Scalar("u", &u), PointField::Vector("grad", &g)]);
        assert!(text.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
        assert!(text.contains(&format!("CELLS {} {}", m.n_triangles(), 4 * m.n_triangles())));
        assert!(text.contains("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
        assert!(text.contains("VECTORS grad double\n5.0000000000000000e-1 -5.0000000000000000e-1 0\n"));
    }
}
