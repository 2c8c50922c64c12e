//! Edge quadrature on tagged parts of the boundary.

use crate::fem::quadrature::gauss_legendre_3;
use crate::linalg::Vec2;
use crate::mesh::{BoundaryTag, Mesh2D, TagFilter};
use crate::scalar::Real;

/// A boundary quadrature point. `tangent` is the normal rotated
/// counter-clockwise, so the domain lies to its left.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint<T> {
    pub x: Vec2<T>,
    pub normal: Vec2<T>,
    pub tangent: Vec2<T>,
    pub tag: BoundaryTag,
    pub edge: usize,
    pub triangle: usize,
    pub bary: [T; 3],
    pub weight: T,
}

/// Visits the three Gauss–Legendre points of every edge accepted by `filter`.
pub fn for_each_boundary_point<T: Real>(mesh: &Mesh2D<T>, filter: TagFilter, mut f: impl FnMut(&BoundaryPoint<T>)) {
    let gl = gauss_legendre_3::<T>();
    for (k, e) in mesh.boundary().iter().enumerate() {
        if !filter.accepts(e.tag) {
            continue;
        }
        let (normal, len) = mesh.boundary_normal(k);
        let tangent = normal.perp();
        let pa = mesh.vertices()[e.a];
        let pb = mesh.vertices()[e.b];
        let tri = mesh.triangles()[e.triangle];
        for &(s, w) in &gl {
            let mut bary = [T::zero(); 3];
            // the local edge joins local vertices `local` and `local + 1`
            bary[e.local] = T::one() - s;
            bary[(e.local + 1) % 3] = s;
            debug_assert_eq!(tri[e.local], e.a);
            f(&BoundaryPoint {
                x: pa.scale(T::one() - s) + pb.scale(s),
                normal,
                tangent,
                tag: e.tag,
                edge: k,
                triangle: e.triangle,
                bary,
                weight: w * len,
            });
        }
    }
}

/// `∫_{Γ} density(x, n, τ)` over the edges accepted by `filter`.
pub fn boundary_integral<T: Real>(
    mesh: &Mesh2D<T>,
    filter: TagFilter,
    density: impl Fn(Vec2<T>, Vec2<T>, Vec2<T>) -> T,
) -> T {
    boundary_integral_at(mesh, filter, |p| density(p.x, p.normal, p.tangent))
}

/// As [`boundary_integral`] with access to the owning element.
pub fn boundary_integral_at<T: Real>(mesh: &Mesh2D<T>, filter: TagFilter, density: impl Fn(&BoundaryPoint<T>) -> T) -> T {
    let mut acc = T::zero();
    for_each_boundary_point(mesh, filter, |p| acc += p.weight * density(p));
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk;
    use std::f64::consts::PI;

    #[test]
    fn perimeter_and_divergence_identity() {
        let m = generate_disk::<f64>(1.0, 0.05, 0.5).unwrap();
        let per = boundary_integral(&m, TagFilter::Both, |_, _, _| 1.0);
        assert!((per - 2.0 * PI).abs() < 2e-3);
        let d = boundary_integral(&m, TagFilter::Dirichlet, |_, _, _| 1.0);
        assert!((d - 0.5 * per).abs() < 1e-12);
        let flux = boundary_integral(&m, TagFilter::Both, |x, n, _| x.dot(n));
        assert!((flux - 2.0 * m.total_area()).abs() < 1e-12);
        assert!((flux - 2.0 * PI).abs() < 4e-3);
    }

    #[test]
    fn points_lie_on_owning_element_edge() {
        let m = generate_disk::<f64>(1.0, 0.3, 0.5).unwrap();
        for_each_boundary_point(&m, TagFilter::Both, |p| {
            let g = m.geometry(p.triangle);
            assert!((g.point(p.bary) - p.x).norm() < 1e-14);
            assert!(p.normal.dot(p.x) > 0.0);
            assert!(p.tangent.cross(p.normal) < 0.0);
        });
    }
}
