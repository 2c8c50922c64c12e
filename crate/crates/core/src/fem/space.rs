//! Quadratic Lagrange basis, degree-of-freedom map and discrete functions.

use std::sync::Arc;

use crate::linalg::{Mat2, Vec2};
use crate::mesh::{BoundaryTag, ElementGeom, Mesh2D};
use crate::scalar::Real;

/// P2 shape functions at barycentric point `l`: vertices, then midpoints of
/// edges (0,1), (1,2), (2,0).
#[inline]
pub fn p2_values<T: Real>(l: [T; 3]) -> [T; 6] {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    [
        l[0] * (two * l[0] - T::one()),
        l[1] * (two * l[1] - T::one()),
        l[2] * (two * l[2] - T::one()),
        four * l[0] * l[1],
        four * l[1] * l[2],
        four * l[2] * l[0],
    ]
}

#[inline]
pub fn p2_gradients<T: Real>(l: [T; 3], g: &[Vec2<T>; 3]) -> [Vec2<T>; 6] {
    let four = T::lit(4.0);
    [
        g[0].scale(four * l[0] - T::one()),
        g[1].scale(four * l[1] - T::one()),
        g[2].scale(four * l[2] - T::one()),
        (g[0].scale(l[1]) + g[1].scale(l[0])).scale(four),
        (g[1].scale(l[2]) + g[2].scale(l[1])).scale(four),
        (g[2].scale(l[0]) + g[0].scale(l[2])).scale(four),
    ]
}

/// Constant Hessians of the six shape functions on an affine element.
pub fn p2_hessians<T: Real>(g: &[Vec2<T>; 3]) -> [Mat2<T>; 6] {
    let four = T::lit(4.0);
    let sym = |a: Vec2<T>, b: Vec2<T>| (a.outer(b) + b.outer(a)).scale(four);
    [
        g[0].outer(g[0]).scale(four),
        g[1].outer(g[1]).scale(four),
        g[2].outer(g[2]).scale(four),
        sym(g[0], g[1]),
        sym(g[1], g[2]),
        sym(g[2], g[0]),
    ]
}

/// Quadratic degrees of freedom with the Dirichlet set.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub n_dofs: usize,
    /// Sorted dofs lying on the closed Dirichlet boundary.
    pub dirichlet_dofs: Vec<usize>,
    is_dirichlet: Vec<bool>,
    on_boundary: Vec<bool>,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &Mesh2D<T>) -> Self {
        let n = mesh.n_p2_nodes();
        let nv = mesh.n_vertices();
        let mut is_dirichlet = vec![false; n];
        let mut on_boundary = vec![false; n];
        for e in mesh.boundary() {
            for d in [e.a, e.b, nv + e.edge] {
                on_boundary[d] = true;
                if e.tag == BoundaryTag::Dirichlet {
                    is_dirichlet[d] = true;
                }
            }
        }
        let dirichlet_dofs = (0..n).filter(|&i| is_dirichlet[i]).collect();
        Self { n_dofs: n, dirichlet_dofs, is_dirichlet, on_boundary }
    }

    #[inline]
    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.is_dirichlet[dof]
    }

    #[inline]
    pub fn is_on_boundary(&self, dof: usize) -> bool {
        self.on_boundary[dof]
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.is_dirichlet.iter().map(|d| !d).collect()
    }
}

/// Element-local evaluation data at one point.
#[derive(Clone, Copy, Debug)]
pub struct LocalBasis<T> {
    pub nodes: [usize; 6],
    pub phi: [T; 6],
    pub grad_phi: [Vec2<T>; 6],
}

impl<T: Real> LocalBasis<T> {
    pub fn new(mesh: &Mesh2D<T>, t: usize, geom: &ElementGeom<T>, bary: [T; 3]) -> Self {
        Self { nodes: mesh.p2_element(t), phi: p2_values(bary), grad_phi: p2_gradients(bary, &geom.grad_bary) }
    }

    #[inline]
    pub fn value(&self, coeffs: &[T]) -> T {
        (0..6).map(|k| coeffs[self.nodes[k]] * self.phi[k]).sum()
    }

    #[inline]
    pub fn gradient(&self, coeffs: &[T]) -> Vec2<T> {
        let mut g = Vec2::zero();
        for k in 0..6 {
            g += self.grad_phi[k].scale(coeffs[self.nodes[k]]);
        }
        g
    }
}

/// A continuous piecewise-quadratic function on a mesh.
#[derive(Clone, Debug)]
pub struct FEFunction<T> {
    pub mesh: Arc<Mesh2D<T>>,
    pub values: Vec<T>,
}

impl<T: Real> FEFunction<T> {
    pub fn zeros(mesh: Arc<Mesh2D<T>>) -> Self {
        let n = mesh.n_p2_nodes();
        Self { mesh, values: vec![T::zero(); n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh2D<T>>, f: impl Fn(Vec2<T>) -> T) -> Self {
        let values = (0..mesh.n_p2_nodes()).map(|i| f(mesh.p2_node(i))).collect();
        Self { mesh, values }
    }

    pub fn value_at(&self, t: usize, bary: [T; 3]) -> T {
        let nodes = self.mesh.p2_element(t);
        let phi = p2_values(bary);
        (0..6).map(|k| self.values[nodes[k]] * phi[k]).sum()
    }

    pub fn gradient_at(&self, t: usize, bary: [T; 3]) -> Vec2<T> {
        let g = self.mesh.geometry(t);
        LocalBasis::new(&self.mesh, t, &g, bary).gradient(&self.values)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}
