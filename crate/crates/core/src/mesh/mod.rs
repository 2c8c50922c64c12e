//! Triangulated planar domains with a Dirichlet/Neumann boundary partition.

mod deform;
mod generate;
mod io;
mod locate;

use std::collections::HashMap;
use std::fmt;

pub use deform::{deform, jacobian_invariants, DeformationField, FieldKind};
pub use generate::{generate_annulus, generate_disk, generate_ellipse, generate_rectangle};
pub use io::{read_mesh, write_mesh, write_vtk, PointField, MESH_HEADER};
pub use locate::PointLocator;

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    pub fn letter(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Selects which boundary portion an integral runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagFilter {
    Dirichlet,
    Neumann,
    Both,
}

impl TagFilter {
    #[inline]
    pub fn accepts(self, tag: BoundaryTag) -> bool {
        match self {
            TagFilter::Both => true,
            TagFilter::Dirichlet => tag == BoundaryTag::Dirichlet,
            TagFilter::Neumann => tag == BoundaryTag::Neumann,
        }
    }
}

/// A boundary edge oriented as in its owning triangle, so the domain lies
/// to the left of `a → b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
    pub triangle: usize,
    /// Local edge index `k` in the owning triangle (joins local vertices `k`, `k+1`).
    pub local: usize,
    /// Global edge index (midpoint dof is `n_vertices + edge`).
    pub edge: usize,
}

/// Affine element data.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeom<T> {
    pub verts: [Vec2<T>; 3],
    pub area: T,
    /// Constant gradients of the barycentric coordinates.
    pub grad_bary: [Vec2<T>; 3],
}

impl<T: Real> ElementGeom<T> {
    pub fn new(verts: [Vec2<T>; 3]) -> Self {
        let [p0, p1, p2] = verts;
        let twice = (p1 - p0).cross(p2 - p0);
        let area = twice * T::lit(0.5);
        let inv = T::one() / twice;
        // ∇λ_i = perp(opposite edge) / (2|T|), with the edge taken counter-clockwise.
        let g0 = Vec2::new(p1.y - p2.y, p2.x - p1.x).scale(inv);
        let g1 = Vec2::new(p2.y - p0.y, p0.x - p2.x).scale(inv);
        let g2 = Vec2::new(p0.y - p1.y, p1.x - p0.x).scale(inv);
        Self { verts, area, grad_bary: [g0, g1, g2] }
    }

    #[inline]
    pub fn point(&self, bary: [T; 3]) -> Vec2<T> {
        self.verts[0].scale(bary[0]) + self.verts[1].scale(bary[1]) + self.verts[2].scale(bary[2])
    }

    pub fn barycentric(&self, p: Vec2<T>) -> [T; 3] {
        let l0 = self.grad_bary[0].dot(p - self.verts[1]);
        let l1 = self.grad_bary[1].dot(p - self.verts[2]);
        [l0, l1, T::one() - l0 - l1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D<T> {
    vertices: Vec<Vec2<T>>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
}

impl<T: Real> Mesh2D<T> {
    /// Builds and validates a mesh. Boundary edges may be given in either
    /// orientation; they are re-oriented to follow their triangle.
    pub fn new(
        vertices: Vec<Vec2<T>>,
        triangles: Vec<[usize; 3]>,
        boundary: &[(usize, usize, BoundaryTag)],
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(&vertices, tri);
            if !(area > T::zero()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {area}"
                )));
            }
        }

        struct EdgeUse {
            id: usize,
            count: usize,
            tri: usize,
            local: usize,
            forward: (usize, usize),
        }
        let mut lookup: HashMap<(usize, usize), EdgeUse> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    EdgeUse { id: edges.len() - 1, count: 0, tri: t, local: k, forward: (a, b) }
                });
                entry.count += 1;
                if entry.count == 2 && entry.forward == (a, b) {
                    return Err(Error::InvalidMesh(format!(
                        "edge {a}-{b} is traversed twice in the same direction"
                    )));
                }
                if entry.count > 2 {
                    return Err(Error::InvalidMesh(format!("edge {a}-{b} shared by more than two triangles")));
                }
                ids[k] = entry.id;
            }
            tri_edges.push(ids);
        }

        let mut tagged = vec![false; edges.len()];
        let mut out = Vec::with_capacity(boundary.len());
        for &(i, j, tag) in boundary {
            let key = (i.min(j), i.max(j));
            let Some(e) = lookup.get(&key) else {
                return Err(Error::InvalidMesh(format!("boundary edge {i}-{j} is not a mesh edge")));
            };
            if e.count != 1 {
                return Err(Error::InvalidMesh(format!("boundary edge {i}-{j} is an interior edge")));
            }
            if tagged[e.id] {
                return Err(Error::InvalidMesh(format!("boundary edge {i}-{j} tagged more than once")));
            }
            tagged[e.id] = true;
            out.push(BoundaryEdge {
                a: e.forward.0,
                b: e.forward.1,
                tag,
                triangle: e.tri,
                local: e.local,
                edge: e.id,
            });
        }
        if let Some(((a, b), _)) = lookup.iter().find(|(_, e)| e.count == 1 && !tagged[e.id]) {
            return Err(Error::InvalidMesh(format!("boundary edge {a}-{b} has no tag")));
        }
        let mut starts = vec![0u8; nv];
        let mut ends = vec![0u8; nv];
        for e in &out {
            starts[e.a] += 1;
            ends[e.b] += 1;
        }
        if (0..nv).any(|v| starts[v] != ends[v] || starts[v] > 1) {
            return Err(Error::InvalidMesh("boundary edges do not form simple closed loops".into()));
        }
        if !out.iter().any(|e| e.tag == BoundaryTag::Dirichlet) {
            return Err(Error::InvalidMesh("Dirichlet boundary is empty".into()));
        }
        Ok(Self { vertices, triangles, boundary: out, edges, tri_edges })
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }

    #[inline]
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Edge table; edge `k` carries the quadratic node `n_vertices + k`.
    #[inline]
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    #[inline]
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.tri_edges
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of quadratic degrees of freedom (vertices plus edge midpoints).
    #[inline]
    pub fn n_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    /// Coordinates of a quadratic node.
    pub fn p2_node(&self, node: usize) -> Vec2<T> {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            let [a, b] = self.edges[node - nv];
            (self.vertices[a] + self.vertices[b]).scale(T::lit(0.5))
        }
    }

    /// Global quadratic node indices of triangle `t`: three vertices then
    /// the midpoints of edges (0,1), (1,2), (2,0).
    #[inline]
    pub fn p2_element(&self, t: usize) -> [usize; 6] {
        let tri = self.triangles[t];
        let e = self.tri_edges[t];
        let nv = self.vertices.len();
        [tri[0], tri[1], tri[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    #[inline]
    pub fn geometry(&self, t: usize) -> ElementGeom<T> {
        let [a, b, c] = self.triangles[t];
        ElementGeom::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    #[inline]
    pub fn signed_area(&self, t: usize) -> T {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn boundary_length(&self, filter: TagFilter) -> T {
        self.boundary
            .iter()
            .filter(|e| filter.accepts(e.tag))
            .map(|e| (self.vertices[e.b] - self.vertices[e.a]).norm())
            .sum()
    }

    /// Largest distance between two vertices of the bounding box.
    pub fn diameter(&self) -> T {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Longest edge length.
    pub fn max_edge_length(&self) -> T {
        self.edges
            .iter()
            .map(|&[a, b]| (self.vertices[b] - self.vertices[a]).norm())
            .fold(T::zero(), T::max)
    }

    /// Outward unit normal and length of boundary edge `k`.
    pub fn boundary_normal(&self, k: usize) -> (Vec2<T>, T) {
        let e = &self.boundary[k];
        let d = self.vertices[e.b] - self.vertices[e.a];
        let len = d.norm();
        (Vec2::new(d.y, -d.x).scale(T::one() / len), len)
    }

    /// Boundary edge indices following each other around every loop.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut next_from = vec![usize::MAX; self.vertices.len()];
        for (k, e) in self.boundary.iter().enumerate() {
            next_from[e.a] = k;
        }
        let mut seen = vec![false; self.boundary.len()];
        let mut loops = Vec::new();
        for start in 0..self.boundary.len() {
            if seen[start] {
                continue;
            }
            let mut lp = Vec::new();
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                lp.push(k);
                k = next_from[self.boundary[k].b];
            }
            loops.push(lp);
        }
        loops
    }

    /// For every boundary edge, the indices of the preceding and following
    /// edges on its loop.
    pub fn boundary_neighbours(&self) -> Vec<(usize, usize)> {
        let mut next_from = vec![usize::MAX; self.vertices.len()];
        let mut prev_to = vec![usize::MAX; self.vertices.len()];
        for (k, e) in self.boundary.iter().enumerate() {
            next_from[e.a] = k;
            prev_to[e.b] = k;
        }
        self.boundary.iter().map(|e| (prev_to[e.a], next_from[e.b])).collect()
    }

    /// Replaces vertex positions, keeping connectivity and tags.
    pub(crate) fn with_vertices(&self, vertices: Vec<Vec2<T>>) -> Self {
        Self {
            vertices,
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            edges: self.edges.clone(),
            tri_edges: self.tri_edges.clone(),
        }
    }

    /// Re-tags boundary edges through a predicate on (midpoint, current tag).
    pub fn retag(&self, mut f: impl FnMut(Vec2<T>, BoundaryTag) -> BoundaryTag) -> Result<Self> {
        let list: Vec<_> = self
            .boundary
            .iter()
            .map(|e| {
                let mid = (self.vertices[e.a] + self.vertices[e.b]).scale(T::lit(0.5));
                (e.a, e.b, f(mid, e.tag))
            })
            .collect();
        Self::new(self.vertices.clone(), self.triangles.clone(), &list)
    }

    /// Lossless-as-possible conversion to another scalar type.
    pub fn cast<U: Real>(&self) -> Mesh2D<U> {
        Mesh2D {
            vertices: self
                .vertices
                .iter()
                .map(|p| Vec2::new(U::lit(p.x.to_f64_lossy()), U::lit(p.y.to_f64_lossy())))
                .collect(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            edges: self.edges.clone(),
            tri_edges: self.tri_edges.clone(),
        }
    }
}

fn signed_area<T: Real>(v: &[Vec2<T>], tri: &[usize; 3]) -> T {
    let (p0, p1, p2) = (v[tri[0]], v[tri[1]], v[tri[2]]);
    (p1 - p0).cross(p2 - p0) * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh2D<f64> {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let t = vec![[0, 1, 2], [0, 2, 3]];
        let b = [
            (0, 1, BoundaryTag::Dirichlet),
            (2, 1, BoundaryTag::Neumann),
            (2, 3, BoundaryTag::Neumann),
            (3, 0, BoundaryTag::Neumann),
        ];
        Mesh2D::new(v, t, &b).unwrap()
    }

    #[test]
    fn boundary_is_reoriented_and_p2_table_consistent() {
        let m = square();
        assert_eq!(m.edges().len(), 5);
        assert_eq!(m.n_p2_nodes(), 9);
        assert!(m.boundary().iter().any(|e| e.a == 1 && e.b == 2 && e.tag == BoundaryTag::Neumann));
        for (k, e) in m.boundary().iter().enumerate() {
            let (n, _) = m.boundary_normal(k);
            let mid = (m.vertices()[e.a] + m.vertices()[e.b]).scale(0.5);
            let c = Vec2::new(0.5, 0.5);
            assert!(n.dot(mid - c) > 0.0, "normal must point outward");
        }
        assert_eq!(m.boundary_loops().len(), 1);
        let mid = m.p2_node(m.p2_element(0)[3]);
        assert_eq!(mid, Vec2::new(0.5, 0.0));
    }

    #[test]
    fn rejects_bad_meshes() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let cw = Mesh2D::new(v.clone(), vec![[0, 2, 1]], &[]);
        assert!(matches!(cw, Err(Error::InvalidMesh(_))));
        let untagged = Mesh2D::new(v.clone(), vec![[0, 1, 2]], &[(0, 1, BoundaryTag::Dirichlet)]);
        assert!(untagged.is_err());
        let no_dirichlet = Mesh2D::new(
            v.clone(),
            vec![[0, 1, 2]],
            &[(0, 1, BoundaryTag::Neumann), (1, 2, BoundaryTag::Neumann), (2, 0, BoundaryTag::Neumann)],
        );
        assert!(no_dirichlet.is_err());
        let dup = Mesh2D::new(
            v,
            vec![[0, 1, 2]],
            &[
                (0, 1, BoundaryTag::Dirichlet),
                (1, 0, BoundaryTag::Dirichlet),
                (1, 2, BoundaryTag::Neumann),
                (2, 0, BoundaryTag::Neumann),
            ],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn barycentric_round_trip() {
        let g = ElementGeom::<f64>::new([Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.5, 1.5)]);
        let b = [0.2, 0.3, 0.5];
        let p = g.point(b);
        let back = g.barycentric(p);
        for k in 0..3 {
            assert!((back[k] - b[k]).abs() < 1e-14);
        }
        let sum = g.grad_bary[0] + g.grad_bary[1] + g.grad_bary[2];
        assert!(sum.norm() < 1e-14);
    }
}
