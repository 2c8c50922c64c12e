//! Pointwise fields built from the state and a deformation: `A`, `B` and the
//! three variants of `C`.

use crate::error::Result;
use crate::fem::weak_divergence_residual;
use crate::integrands::ConvexPair;
use crate::linalg::{Mat2, Vec2};
use crate::mesh::DeformationField;
use crate::scalar::Real;
use crate::solver::StateSolution;

/// State data at one point: position, value, gradient and Hessian.
#[derive(Clone, Copy, Debug)]
pub struct PointData<T> {
    pub x: Vec2<T>,
    pub u: T,
    pub grad: Vec2<T>,
    pub hess: Mat2<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CVariant {
    Full,
    Dirichlet,
    Neumann,
}

/// `A = ∇u ⊗ σ − (f + g) I`, so that `A : DV = ⟨DV σ, ∇u⟩ − (f + g) div V`.
pub fn tensor_a_at<T: Real>(pair: &ConvexPair<T>, u: T, grad: Vec2<T>) -> Mat2<T> {
    grad.outer(pair.grad_f(grad)) - Mat2::identity().scale(pair.f(grad) + pair.g(u))
}

/// `B = ∇²f(∇u) ∇²u V − (DV − div V I) σ`.
pub fn field_b_at<T: Real>(pair: &ConvexPair<T>, p: &PointData<T>, v: &DeformationField<T>) -> Vec2<T> {
    let (vx, dv) = (v.value(p.x), v.jacobian(p.x));
    let s = dv - Mat2::identity().scale(dv.trace());
    pair.hess_f(p.grad).mul_vec(p.hess.mul_vec(vx)) - s.mul_vec(pair.grad_f(p.grad))
}

pub fn field_c_at<T: Real>(pair: &ConvexPair<T>, p: &PointData<T>, v: &DeformationField<T>, variant: CVariant) -> Vec2<T> {
    let (vx, dv) = (v.value(p.x), v.jacobian(p.x));
    let sigma = pair.grad_f(p.grad);
    let vg = vx.dot(p.grad);
    let hv = pair.hess_f(p.grad).mul_vec(p.hess.mul_vec(vx));
    let k = Mat2::identity().scale(dv.trace()) - dv;
    let dvs = dv.mul_vec(sigma);
    let fg = pair.f(p.grad) + pair.g(p.u);
    match variant {
        CVariant::Full => {
            -hv.scale(vg) - k.mul_vec(sigma).scale(vg) + vx.scale(dvs.dot(p.grad))
                - sigma.scale(dv.mul_vec(vx).dot(p.grad))
                - k.mul_vec(vx).scale(fg)
        }
        CVariant::Dirichlet => hv.scale(vg) + k.mul_vec(vx).scale(sigma.dot(p.grad) - pair.f(p.grad)),
        CVariant::Neumann => {
            -hv.scale(vg) + dvs.scale(vg) + vx.scale(dvs.dot(p.grad)) - k.mul_vec(vx).scale(fg)
        }
    }
}

impl<T: Real> StateSolution<T> {
    /// Value, recovered gradient and Hessian at a point of triangle `t`.
    pub fn point_data(&self, t: usize, bary: [T; 3]) -> PointData<T> {
        PointData {
            x: self.mesh.geometry(t).point(bary),
            u: self.value(t, bary),
            grad: self.grad.gradient_at(t, bary),
            hess: self.grad.hessian_at(t, bary),
        }
    }
}

/// `A` from the recovered gradient.
pub fn tensor_a<T: Real>(state: &StateSolution<T>, t: usize, bary: [T; 3]) -> Mat2<T> {
    let p = state.point_data(t, bary);
    tensor_a_at(&state.pair, p.u, p.grad)
}

/// `B` from the recovered gradient and Hessian.
pub fn field_b<T: Real>(state: &StateSolution<T>, v: &DeformationField<T>, t: usize, bary: [T; 3]) -> Vec2<T> {
    field_b_at(&state.pair, &state.point_data(t, bary), v)
}

/// `C` (any variant) from the recovered gradient and Hessian.
pub fn field_c<T: Real>(
    state: &StateSolution<T>,
    v: &DeformationField<T>,
    variant: CVariant,
    t: usize,
    bary: [T; 3],
) -> Vec2<T> {
    field_c_at(&state.pair, &state.point_data(t, bary), v, variant)
}

/// Largest weak residual of `div A = 0` over the two rows of `A`.
pub fn check_div_a<T: Real>(state: &StateSolution<T>) -> Result<T> {
    let mut worst = T::zero();
    for row in 0..2 {
        let r = weak_divergence_residual(&state.mesh, |q| tensor_a(state, q.triangle, q.bary).row(row), |_| T::zero())?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Weak residual of `div B = g''(u)⟨V, ∇u⟩ + g'(u) div V`.
pub fn check_div_b<T: Real>(state: &StateSolution<T>, v: &DeformationField<T>) -> Result<T> {
    let pair = &state.pair;
    weak_divergence_residual(
        &state.mesh,
        |q| field_b(state, v, q.triangle, q.bary),
        |q| {
            let p = state.point_data(q.triangle, q.bary);
            -(pair.d2g(p.u) * v.value(p.x).dot(p.grad) + pair.dg(p.u) * v.divergence(p.x))
        },
    )
}
