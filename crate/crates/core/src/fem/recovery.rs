//! Continuous gradients and Hessians by L² projection of the elementwise
//! gradient onto the quadratic space.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::assemble::{assemble_load, mass_matrix, DEFAULT_ORDER};
use crate::fem::space::{p2_gradients, p2_values, FEFunction};
use crate::fem::sparse::SpdFactor;
use crate::linalg::{Mat2, Vec2};
use crate::mesh::Mesh2D;
use crate::scalar::Real;

/// Componentwise projected gradient `G ≈ ∇u`; its derivative is the
/// recovered Hessian.
#[derive(Clone, Debug)]
pub struct RecoveredGradient<T> {
    pub mesh: Arc<Mesh2D<T>>,
    pub gx: Vec<T>,
    pub gy: Vec<T>,
}

impl<T: Real> RecoveredGradient<T> {
    pub fn gradient_at(&self, t: usize, bary: [T; 3]) -> Vec2<T> {
        let nodes = self.mesh.p2_element(t);
        let phi = p2_values(bary);
        let mut g = Vec2::zero();
        for k in 0..6 {
            g += Vec2::new(self.gx[nodes[k]], self.gy[nodes[k]]).scale(phi[k]);
        }
        g
    }

    /// Symmetrised derivative of the recovered gradient.
    pub fn hessian_at(&self, t: usize, bary: [T; 3]) -> Mat2<T> {
        let nodes = self.mesh.p2_element(t);
        let geom = self.mesh.geometry(t);
        let dphi = p2_gradients(bary, &geom.grad_bary);
        let mut rx = Vec2::zero();
        let mut ry = Vec2::zero();
        for k in 0..6 {
            rx += dphi[k].scale(self.gx[nodes[k]]);
            ry += dphi[k].scale(self.gy[nodes[k]]);
        }
        Mat2::from_rows(rx, ry).sym()
    }

    pub fn components(&self) -> [FEFunction<T>; 2] {
        [
            FEFunction { mesh: self.mesh.clone(), values: self.gx.clone() },
            FEFunction { mesh: self.mesh.clone(), values: self.gy.clone() },
        ]
    }
}

/// Mass factor reusable across several projections on one mesh.
pub struct Projector<T> {
    mesh: Arc<Mesh2D<T>>,
    mass: SpdFactor<T>,
}

impl<T: Real> Projector<T> {
    pub fn new(mesh: Arc<Mesh2D<T>>) -> Result<Self> {
        let m = mass_matrix(&mesh)?;
        let mass = SpdFactor::new(&m, &vec![false; m.n()])?;
        Ok(Self { mesh, mass })
    }

    /// L² projection of a pointwise-evaluable scalar field.
    pub fn project(&self, f: impl Fn(usize, [T; 3], Vec2<T>) -> T) -> Result<Vec<T>> {
        let b = assemble_load(&self.mesh, DEFAULT_ORDER, |q| (f(q.triangle, q.bary, q.x), Vec2::zero()))?;
        self.mass.solve(&b, |_| T::zero())
    }

    pub fn recover_gradient(&self, u: &FEFunction<T>) -> Result<RecoveredGradient<T>> {
        let grad = |t: usize, b: [T; 3]| u.gradient_at(t, b);
        let gx = self.project(|t, b, _| grad(t, b).x)?;
        let gy = self.project(|t, b, _| grad(t, b).y)?;
        Ok(RecoveredGradient { mesh: self.mesh.clone(), gx, gy })
    }
}

pub fn recover_gradient<T: Real>(u: &FEFunction<T>) -> Result<RecoveredGradient<T>> {
    Projector::new(u.mesh.clone())?.recover_gradient(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk, generate_rectangle, BoundaryTag};

    #[test]
    fn affine_is_reproduced() {
        let m = Arc::new(generate_disk::<f64>(1.0, 0.3, 1.0).unwrap());
        let u = FEFunction::interpolate(m.clone(), |p| 2.0 * p.x - 3.0 * p.y + 1.0);
        let r = recover_gradient(&u).unwrap();
        for t in 0..m.n_triangles() {
            let b = [0.2, 0.3, 0.5];
            assert!((r.gradient_at(t, b) - Vec2::new(2.0, -3.0)).norm() < 1e-11);
            assert!(r.hessian_at(t, b).max_abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_hessian_in_interior() {
        let m = Arc::new(generate_rectangle::<f64>(1.0, 1.0, 0.05, [BoundaryTag::Dirichlet; 4]).unwrap());
        let u = FEFunction::interpolate(m.clone(), |p| p.x * p.x);
        let r = recover_gradient(&u).unwrap();
        let loc = crate::mesh::PointLocator::new(&m);
        let (t, b) = loc.locate(Vec2::new(0.52, 0.47)).unwrap();
        assert!((r.hessian_at(t, b) - Mat2::diag(2.0, 0.0)).max_abs() < 1e-6);
    }

    #[test]
    fn torsion_profile_hessian() {
        let m = Arc::new(generate_disk::<f64>(1.0, 0.05, 1.0).unwrap());
        let u = FEFunction::interpolate(m.clone(), |p| (1.0 - p.norm_sq()) / 4.0);
        let r = recover_gradient(&u).unwrap();
        let loc = crate::mesh::PointLocator::new(&m);
        for p in [Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.3), Vec2::new(0.0, -0.6)] {
            let (t, b) = loc.locate(p).unwrap();
            assert!((r.hessian_at(t, b) - Mat2::diag(-0.5, -0.5)).max_abs() < 1e-3);
        }
    }
}
