//! Element loops: integrals, loads, energies and symmetric forms.

use crate::error::{Error, Result};
use crate::fem::quadrature::quadrature_rule;
use crate::fem::space::{FEFunction, LocalBasis};
use crate::fem::sparse::SparseSpd;
use crate::integrands::{ConvexPair, QuadraticFormSpec};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{ElementGeom, Mesh2D};
use crate::scalar::Real;

/// Quadrature order used for energies, loads and forms.
pub const DEFAULT_ORDER: usize = 4;

/// A volume quadrature point with its physical weight and P2 basis data.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint<T> {
    pub triangle: usize,
    pub bary: [T; 3],
    pub x: Vec2<T>,
    pub weight: T,
    pub geom: ElementGeom<T>,
    pub basis: LocalBasis<T>,
}

/// Visits every quadrature point in element order.
pub fn for_each_point<T: Real>(mesh: &Mesh2D<T>, order: usize, mut f: impl FnMut(&QuadPoint<T>)) -> Result<()> {
    let rule = quadrature_rule::<T>(order)?;
    let two = T::lit(2.0);
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        for &(bary, w) in &rule.points {
            let basis = LocalBasis::new(mesh, t, &geom, bary);
            f(&QuadPoint { triangle: t, bary, x: geom.point(bary), weight: w * two * geom.area, geom, basis });
        }
    }
    Ok(())
}

pub fn integrate<T: Real>(mesh: &Mesh2D<T>, order: usize, f: impl Fn(&QuadPoint<T>) -> T) -> Result<T> {
    let mut acc = T::zero();
    for_each_point(mesh, order, |q| acc += q.weight * f(q))?;
    Ok(acc)
}

/// Load vector `b_i = ∫ s φ_i + ⟨v, ∇φ_i⟩` for `(s, v) = f(point)`.
pub fn assemble_load<T: Real>(
    mesh: &Mesh2D<T>,
    order: usize,
    f: impl Fn(&QuadPoint<T>) -> (T, Vec2<T>),
) -> Result<Vec<T>> {
    let mut b = vec![T::zero(); mesh.n_p2_nodes()];
    for_each_point(mesh, order, |q| {
        let (s, v) = f(q);
        for k in 0..6 {
            b[q.basis.nodes[k]] += q.weight * (s * q.basis.phi[k] + v.dot(q.basis.grad_phi[k]));
        }
    })?;
    Ok(b)
}

/// Matrix of `(w, z) ↦ ∫ ⟨K ∇w, ∇z⟩ + c w z` for `(K, c) = f(point)`; `K`
/// is symmetrised pointwise.
pub fn assemble_form<T: Real>(
    mesh: &Mesh2D<T>,
    order: usize,
    f: impl Fn(&QuadPoint<T>) -> (Mat2<T>, T),
) -> Result<SparseSpd<T>> {
    let mut m = SparseSpd::p2_pattern(mesh);
    let rule = quadrature_rule::<T>(order)?;
    let two = T::lit(2.0);
    let mut bad = None;
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        let mut local = [[T::zero(); 6]; 6];
        for &(bary, w) in &rule.points {
            let basis = LocalBasis::new(mesh, t, &geom, bary);
            let q = QuadPoint { triangle: t, bary, x: geom.point(bary), weight: w * two * geom.area, geom, basis };
            let (k, c) = f(&q);
            if !k.is_finite() || !c.is_finite() {
                bad.get_or_insert(t);
                continue;
            }
            let k = k.sym();
            for a in 0..6 {
                let kga = k.mul_vec(basis.grad_phi[a]);
                for b in a..6 {
                    local[a][b] += q.weight * (kga.dot(basis.grad_phi[b]) + c * basis.phi[a] * basis.phi[b]);
                }
            }
        }
        m.add_local(&basis_nodes(mesh, t), &local);
    }
    match bad {
        Some(t) => Err(Error::DegenerateForm(format!("non-finite form coefficients in triangle {t}"))),
        None => Ok(m),
    }
}

#[inline]
fn basis_nodes<T: Real>(mesh: &Mesh2D<T>, t: usize) -> [usize; 6] {
    mesh.p2_element(t)
}

/// Matrix `M` with `⟨Mw, w⟩ = ∫ ⟨K∇w, ∇w⟩ + c w²` for the coefficient fields
/// of `q`.
pub fn assemble_bilinear<T: Real>(mesh: &Mesh2D<T>, q: &QuadraticFormSpec<'_, T>) -> Result<SparseSpd<T>> {
    assemble_form(mesh, DEFAULT_ORDER, |p| ((q.matrix_field)(p.triangle, p.bary, p.x), (q.scalar_field)(p.triangle, p.bary, p.x)))
}

/// `∫ f(∇u) + g(u)`.
pub fn assemble_energy<T: Real>(mesh: &Mesh2D<T>, pair: &ConvexPair<T>, u: &FEFunction<T>) -> T {
    integrate(mesh, DEFAULT_ORDER, |q| pair.f(q.basis.gradient(&u.values)) + pair.g(q.basis.value(&u.values)))
        .expect("default quadrature order is supported")
}

/// Stiffness-plus-mass matrix, the Gram matrix of the H¹ inner product.
pub fn h1_gram<T: Real>(mesh: &Mesh2D<T>) -> Result<SparseSpd<T>> {
    assemble_form(mesh, DEFAULT_ORDER, |_| (Mat2::identity(), T::one()))
}

pub fn mass_matrix<T: Real>(mesh: &Mesh2D<T>) -> Result<SparseSpd<T>> {
    assemble_form(mesh, DEFAULT_ORDER, |_| (Mat2::zero(), T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrands::{make_p_torsion, make_torsion};
    use crate::mesh::{generate_disk, generate_rectangle, BoundaryTag};
    use std::sync::Arc;

    fn unit_square() -> Mesh2D<f64> {
        generate_rectangle::<f64>(1.0, 1.0, 0.25, [BoundaryTag::Dirichlet; 4]).unwrap()
    }

    #[test]
    fn energy_examples() {
        let sq = Arc::new(unit_square());
        let torsion0 = make_torsion(0.0).unwrap();
        assert_eq!(assemble_energy(&sq, &torsion0, &FEFunction::zeros(sq.clone())), 0.0);
        let x1 = FEFunction::interpolate(sq.clone(), |p| p.x);
        assert!((assemble_energy(&sq, &torsion0, &x1) - 0.5).abs() < 1e-13);

        let disk = Arc::new(generate_disk::<f64>(1.0, 0.05, 1.0).unwrap());
        let u = FEFunction::interpolate(disk.clone(), |p| (1.0 - p.norm_sq()) / 4.0);
        let e = assemble_energy(&disk, &make_torsion(1.0).unwrap(), &u);
        assert!((e + std::f64::consts::PI / 16.0).abs() < 2e-3, "{e}");
    }

    #[test]
    fn bilinear_follows_second_variation_normalisation() {
        let sq = Arc::new(unit_square());
        let x1 = FEFunction::interpolate(sq.clone(), |p| p.x);
        let one = FEFunction::interpolate(sq.clone(), |_| 1.0);
        let k = assemble_bilinear(&sq, &QuadraticFormSpec::constant(Mat2::identity(), 0.0)).unwrap();
        assert!((k.quad_form(&x1.values) - 1.0).abs() < 1e-13);
        let m = assemble_bilinear(&sq, &QuadraticFormSpec::constant(Mat2::zero(), 1.0)).unwrap();
        assert!((m.quad_form(&one.values) - 1.0).abs() < 1e-13);
        assert!(k.is_symmetric() && m.is_symmetric());
    }

    #[test]
    fn constrained_form_is_positive_definite() {
        let mesh = generate_disk::<f64>(1.0, 0.45, 0.5).unwrap();
        let k = assemble_bilinear(&mesh, &QuadraticFormSpec::constant(Mat2::new(2.0, 0.3, 0.3, 1.0), 0.0)).unwrap();
        let dofs = crate::fem::DofMap::new(&mesh);
        let free: Vec<usize> = (0..k.n()).filter(|&i| !dofs.is_dirichlet(i)).collect();
        assert!(k.n() <= 300);
        let d = k.to_dense();
        let a = nalgebra::DMatrix::from_fn(free.len(), free.len(), |i, j| d[free[i]][free[j]]);
        let ev = a.symmetric_eigenvalues();
        assert!(ev.min() > 0.0);
    }

    #[test]
    fn p_energy_is_midpoint_convex() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mesh = Arc::new(generate_disk::<f64>(1.0, 0.3, 1.0).unwrap());
        let pair = make_p_torsion(3.0, 1.0, 1e-4).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let n = mesh.n_p2_nodes();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            let e = |c: Vec<f64>| assemble_energy(&mesh, &pair, &FEFunction { mesh: mesh.clone(), values: c });
            assert!(e(mid) <= 0.5 * e(u) + 0.5 * e(v) + 1e-12);
        }
    }

    #[test]
    fn load_of_divergence_field_integrates_by_parts() {
        // ∫⟨x, ∇φ⟩ = −∫ 2φ for φ vanishing on the boundary
        let mesh = generate_disk::<f64>(1.0, 0.3, 1.0).unwrap();
        let a = assemble_load(&mesh, 4, |q| (T2, q.x)).unwrap();
        const T2: f64 = 2.0;
        let dofs = crate::fem::DofMap::new(&mesh);
        for i in 0..a.len() {
            if !dofs.is_on_boundary(i) {
                assert!(a[i].abs() < 1e-13);
            }
        }
    }
}
