//! Weak divergence residuals against interior test functions.

use crate::error::Result;
use crate::fem::assemble::{assemble_load, h1_gram, QuadPoint, DEFAULT_ORDER};
use crate::linalg::Vec2;
use crate::mesh::Mesh2D;
use crate::scalar::Real;

/// `max_i |∫ ⟨F, ∇φ_i⟩ + s φ_i| / ‖φ_i‖_{H¹}` over basis functions whose
/// support stays off the boundary (no element of the support touches it);
/// zero iff `div F = s` against that discrete test space.
pub fn weak_divergence_residual<T: Real>(
    mesh: &Mesh2D<T>,
    field: impl Fn(&QuadPoint<T>) -> Vec2<T>,
    target: impl Fn(&QuadPoint<T>) -> T,
) -> Result<T> {
    let r = assemble_load(mesh, DEFAULT_ORDER, |q| (target(q), field(q)))?;
    let gram = h1_gram(mesh)?.diagonal();
    let mut on_boundary = vec![false; mesh.n_vertices()];
    for e in mesh.boundary() {
        on_boundary[e.a] = true;
        on_boundary[e.b] = true;
    }
    let mut excluded = vec![false; r.len()];
    for t in 0..mesh.n_triangles() {
        if mesh.triangles()[t].iter().any(|&v| on_boundary[v]) {
            for i in mesh.p2_element(t) {
                excluded[i] = true;
            }
        }
    }
    Ok((0..r.len())
        .filter(|&i| !excluded[i])
        .map(|i| r[i].abs() / gram[i].sqrt())
        .fold(T::zero(), T::max))
}
