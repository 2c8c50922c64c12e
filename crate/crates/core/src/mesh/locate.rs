use super::{ElementGeom, Mesh2D};
use crate::linalg::Vec2;
use crate::scalar::Real;

/// Uniform-grid bucket search for the triangle containing a point.
#[derive(Clone, Debug)]
pub struct PointLocator<T> {
    origin: Vec2<T>,
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    geoms: Vec<ElementGeom<T>>,
}

impl<T: Real> PointLocator<T> {
    pub fn new(mesh: &Mesh2D<T>) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let n = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0) as usize;
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(T::epsilon());
        let cell = span / T::of_usize(n) * T::lit(1.000001);
        let nx = ((hi.x - lo.x) / cell).floor().to_usize().unwrap_or(0) + 1;
        let ny = ((hi.y - lo.y) / cell).floor().to_usize().unwrap_or(0) + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        let geoms: Vec<_> = (0..mesh.n_triangles()).map(|t| mesh.geometry(t)).collect();
        for (t, g) in geoms.iter().enumerate() {
            let mut a = g.verts[0];
            let mut b = g.verts[0];
            for v in &g.verts[1..] {
                a = Vec2::new(a.x.min(v.x), a.y.min(v.y));
                b = Vec2::new(b.x.max(v.x), b.y.max(v.y));
            }
            let (i0, j0) = Self::cell_of(lo, cell, a, nx, ny);
            let (i1, j1) = Self::cell_of(lo, cell, b, nx, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { origin: lo, cell, nx, ny, buckets, geoms }
    }

    fn cell_of(lo: Vec2<T>, cell: T, p: Vec2<T>, nx: usize, ny: usize) -> (usize, usize) {
        let clamp = |v: T, n: usize| -> usize {
            if v <= T::zero() {
                0
            } else {
                v.floor().to_usize().unwrap_or(n - 1).min(n - 1)
            }
        };
        (clamp((p.x - lo.x) / cell, nx), clamp((p.y - lo.y) / cell, ny))
    }

    /// Containing triangle and barycentric coordinates, or `None` outside
    /// the mesh (up to a relative tolerance of `1e-10`).
    pub fn locate(&self, p: Vec2<T>) -> Option<(usize, [T; 3])> {
        if !p.is_finite() {
            return None;
        }
        let (i, j) = Self::cell_of(self.origin, self.cell, p, self.nx, self.ny);
        let mut best: Option<(usize, [T; 3], T)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let b = self.geoms[t].barycentric(p);
            let worst = b[0].min(b[1]).min(b[2]);
            if best.as_ref().map_or(true, |x| worst > x.2) {
                best = Some((t, b, worst));
            }
        }
        match best {
            Some((t, b, worst)) if worst >= -T::lit(1e-10) => Some((t, b)),
            _ => None,
        }
    }
}
