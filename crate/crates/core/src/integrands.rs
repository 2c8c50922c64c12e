//! Convex integrand pairs `(f, g)` for energies `∫ f(∇u) + g(u)`.
//!
//! Three families are built in: the torsion pair `(|z|²/2, −λv)`, the
//! regularised p-torsion pair `((δ² + |z|²)^{p/2}/p, −λv)` and a strongly
//! convex anisotropic quadratic pair `(½⟨Az, z⟩, ½kv² − λv)`.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairKind<T> {
    Torsion { lambda: T },
    PTorsion { p: T, lambda: T, delta: T },
    Anisotropic { a: Mat2<T>, k: T, lambda: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexPair<T> {
    kind: PairKind<T>,
}

/// `f(z) = |z|²/2`, `g(v) = −λv`.
pub fn make_torsion<T: Real>(lambda: T) -> Result<ConvexPair<T>> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    Ok(ConvexPair { kind: PairKind::Torsion { lambda } })
}

/// `f(z) = (δ² + |z|²)^{p/2}/p`, `g(v) = −λv`, for `p ≥ 2` and `δ ≥ 0`.
pub fn make_p_torsion<T: Real>(p: T, lambda: T, delta: T) -> Result<ConvexPair<T>> {
    if !(p >= T::lit(2.0)) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p-torsion needs p >= 2, got {p}")));
    }
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("regularisation delta must be >= 0, got {delta}")));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    Ok(ConvexPair { kind: PairKind::PTorsion { p, lambda, delta } })
}

/// `f(z) = ½⟨Az, z⟩`, `g(v) = ½kv² − λv` with `A` symmetric positive
/// definite and `k > 0`.
pub fn make_anisotropic<T: Real>(a: Mat2<T>, k: T, lambda: T) -> Result<ConvexPair<T>> {
    check_spd(&a)?;
    if !(k > T::zero()) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("anisotropic pair needs k > 0, got {k}")));
    }
    Ok(ConvexPair { kind: PairKind::Anisotropic { a, k, lambda } })
}

fn check_spd<T: Real>(a: &Mat2<T>) -> Result<()> {
    if !a.is_finite() || !a.is_symmetric() {
        return Err(Error::InvalidParameter(format!("matrix {a:?} is not symmetric")));
    }
    let (lo, _) = a.sym_eigenvalues();
    if !(lo > T::zero()) {
        return Err(Error::InvalidParameter(format!("matrix {a:?} is not positive definite")));
    }
    Ok(())
}

/// Conjugate of the quadratic form `½⟨Az, z⟩`: the form of `A⁻¹`.
pub fn fenchel_quadratic_conjugate<T: Real>(a: &Mat2<T>) -> Result<Mat2<T>> {
    check_spd(a)?;
    let inv = a
        .inverse()
        .ok_or_else(|| Error::InvalidParameter(format!("matrix {a:?} is singular")))?;
    // exact symmetry of the returned matrix
    Ok(inv.sym())
}

impl<T: Real> ConvexPair<T> {
    pub fn kind(&self) -> &PairKind<T> {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PairKind::Torsion { .. } => "torsion",
            PairKind::PTorsion { .. } => "p_torsion",
            PairKind::Anisotropic { .. } => "anisotropic",
        }
    }

    pub fn lambda(&self) -> T {
        match self.kind {
            PairKind::Torsion { lambda }
            | PairKind::PTorsion { lambda, .. }
            | PairKind::Anisotropic { lambda, .. } => lambda,
        }
    }

    /// `true` when `g(v) = −λv` (so `g'' ≡ 0`).
    pub fn g_linear(&self) -> bool {
        !matches!(self.kind, PairKind::Anisotropic { .. })
    }

    /// `(p, δ)` for the p-torsion family.
    pub fn p_exponent(&self) -> Option<(T, T)> {
        match self.kind {
            PairKind::PTorsion { p, delta, .. } => Some((p, delta)),
            _ => None,
        }
    }

    /// `true` for the quadratic torsion pair, including p-torsion at `p = 2`.
    pub fn is_torsion_class(&self) -> bool {
        match self.kind {
            PairKind::Torsion { .. } => true,
            PairKind::PTorsion { p, .. } => p == T::lit(2.0),
            PairKind::Anisotropic { .. } => false,
        }
    }

    /// The same pair with the regularisation switched off.
    pub fn unregularized(&self) -> Self {
        match self.kind {
            PairKind::PTorsion { p, lambda, .. } => Self { kind: PairKind::PTorsion { p, lambda, delta: T::zero() } },
            _ => *self,
        }
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        let kind = match self.kind {
            PairKind::Torsion { .. } => PairKind::Torsion { lambda },
            PairKind::PTorsion { p, delta, .. } => PairKind::PTorsion { p, lambda, delta },
            PairKind::Anisotropic { a, k, .. } => PairKind::Anisotropic { a, k, lambda },
        };
        Self { kind }
    }

    /// Strong convexity constants `(m, k)`: `∇²f ⪰ mI`, `g'' ≥ k`.
    pub fn convexity_constants(&self) -> (T, T) {
        match self.kind {
            PairKind::Torsion { .. } => (T::one(), T::zero()),
            PairKind::PTorsion { p, delta, .. } => {
                let m = if p == T::lit(2.0) { T::one() } else { delta.powf(p - T::lit(2.0)) };
                (m, T::zero())
            }
            PairKind::Anisotropic { a, k, .. } => (a.sym_eigenvalues().0, k),
        }
    }

    pub fn f(&self, z: Vec2<T>) -> T {
        match self.kind {
            PairKind::Torsion { .. } => z.norm_sq() * T::lit(0.5),
            PairKind::PTorsion { p, delta, .. } => (delta * delta + z.norm_sq()).powf(p * T::lit(0.5)) / p,
            PairKind::Anisotropic { a, .. } => a.form(z, z) * T::lit(0.5),
        }
    }

    pub fn grad_f(&self, z: Vec2<T>) -> Vec2<T> {
        match self.kind {
            PairKind::Torsion { .. } => z,
            PairKind::PTorsion { p, delta, .. } => {
                let s = delta * delta + z.norm_sq();
                if s == T::zero() {
                    return Vec2::zero();
                }
                z.scale(s.powf(p * T::lit(0.5) - T::one()))
            }
            PairKind::Anisotropic { a, .. } => a.mul_vec(z),
        }
    }

    pub fn hess_f(&self, z: Vec2<T>) -> Mat2<T> {
        match self.kind {
            PairKind::Torsion { .. } => Mat2::identity(),
            PairKind::PTorsion { p, delta, .. } => p_hessian(p, delta * delta + z.norm_sq(), z),
            PairKind::Anisotropic { a, .. } => a,
        }
    }

    /// Hessian of the unregularised p-power integrand with `|z|` floored at
    /// `rho_min`; identical to [`hess_f`](Self::hess_f) for the other pairs.
    pub fn hess_f_floored(&self, z: Vec2<T>, rho_min: T) -> Mat2<T> {
        match self.kind {
            PairKind::PTorsion { p, .. } => {
                let r = z.norm();
                if r >= rho_min && r > T::zero() {
                    return p_hessian(p, r * r, z);
                }
                // direction of z when available, else isotropic
                let dir = if r > T::zero() { z.scale(T::one() / r) } else { Vec2::zero() };
                p_hessian(p, rho_min * rho_min, dir.scale(rho_min))
            }
            _ => self.hess_f(z),
        }
    }

    pub fn g(&self, v: T) -> T {
        match self.kind {
            PairKind::Torsion { lambda } | PairKind::PTorsion { lambda, .. } => -lambda * v,
            PairKind::Anisotropic { k, lambda, .. } => T::lit(0.5) * k * v * v - lambda * v,
        }
    }

    pub fn dg(&self, v: T) -> T {
        match self.kind {
            PairKind::Torsion { lambda } | PairKind::PTorsion { lambda, .. } => -lambda,
            PairKind::Anisotropic { k, lambda, .. } => k * v - lambda,
        }
    }

    pub fn d2g(&self, _v: T) -> T {
        match self.kind {
            PairKind::Torsion { .. } | PairKind::PTorsion { .. } => T::zero(),
            PairKind::Anisotropic { k, .. } => k,
        }
    }

    /// `f*(ζ)` when a closed form is implemented.
    pub fn f_conjugate(&self, zeta: Vec2<T>) -> Option<T> {
        match self.kind {
            PairKind::Torsion { .. } => Some(zeta.norm_sq() * T::lit(0.5)),
            PairKind::PTorsion { p, delta, .. } if delta == T::zero() => {
                let q = p / (p - T::one());
                Some(zeta.norm().powf(q) / q)
            }
            // at p = 2 the regularisation only shifts f by δ²/2
            PairKind::PTorsion { p, delta, .. } if p == T::lit(2.0) => {
                Some((zeta.norm_sq() - delta * delta) * T::lit(0.5))
            }
            PairKind::PTorsion { .. } => None,
            PairKind::Anisotropic { a, .. } => {
                let inv = fenchel_quadratic_conjugate(&a).ok()?;
                Some(inv.form(zeta, zeta) * T::lit(0.5))
            }
        }
    }

    /// `g*(s)`; `None` for linear `g`, whose conjugate is the indicator of `{−λ}`.
    pub fn g_conjugate(&self, s: T) -> Option<T> {
        match self.kind {
            PairKind::Anisotropic { k, lambda, .. } => Some((s + lambda) * (s + lambda) / (k + k)),
            _ => None,
        }
    }

    pub fn has_f_conjugate(&self) -> bool {
        self.f_conjugate(Vec2::zero()).is_some()
    }
}

/// Hessian of `s^{p/2}/p` as a function of `z` with `s = δ² + |z|²`.
fn p_hessian<T: Real>(p: T, s: T, z: Vec2<T>) -> Mat2<T> {
    let two = T::lit(2.0);
    if p == two {
        return Mat2::identity();
    }
    if s == T::zero() {
        return Mat2::zero();
    }
    let base = s.powf(p * T::lit(0.5) - T::one());
    let rank1 = (p - two) * s.powf(p * T::lit(0.5) - two);
    let h = Mat2::identity().scale(base) + z.outer(z).scale(rank1);
    h.sym()
}

/// Pointwise coefficients of a quadratic form `w ↦ ∫ ⟨K∇w, ∇w⟩ + c w²`,
/// evaluated per element at barycentric quadrature points.
pub struct QuadraticFormSpec<'a, T> {
    pub matrix_field: Box<dyn Fn(usize, [T; 3], Vec2<T>) -> Mat2<T> + Send + Sync + 'a>,
    pub scalar_field: Box<dyn Fn(usize, [T; 3], Vec2<T>) -> T + Send + Sync + 'a>,
}

impl<'a, T: Real> QuadraticFormSpec<'a, T> {
    pub fn constant(matrix: Mat2<T>, scalar: T) -> Self {
        Self { matrix_field: Box::new(move |_, _, _| matrix), scalar_field: Box::new(move |_, _, _| scalar) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn torsion_examples() {
        let t = make_torsion(1.0).unwrap();
        assert_eq!(t.f(Vec2::new(3.0, 4.0)), 12.5);
        assert_eq!(t.grad_f(Vec2::new(1.0, 0.0)), Vec2::new(1.0, 0.0));
        assert_eq!(t.hess_f(Vec2::new(-2.0, 5.0)), Mat2::identity());
        assert_eq!(t.g(2.0), -2.0);
        assert_eq!(t.g(0.0), 0.0);
        assert!(t.g_linear());
        assert_eq!(t.convexity_constants(), (1.0, 0.0));
    }

    #[test]
    fn p_torsion_examples() {
        let t = make_torsion(1.0).unwrap();
        let p2 = make_p_torsion(2.0, 1.0, 0.0).unwrap();
        for z in [Vec2::new(0.3, -1.2), Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0)] {
            assert!(close(p2.f(z), t.f(z), 1e-15));
            assert!((p2.grad_f(z) - t.grad_f(z)).norm() < 1e-15);
            assert_eq!(p2.hess_f(z), t.hess_f(z));
        }
        let p3 = make_p_torsion(3.0, 1.0, 0.0).unwrap();
        let h = p3.hess_f(Vec2::new(1.0, 0.0));
        assert!((h - Mat2::diag(2.0, 1.0)).max_abs() < 1e-15);
        assert_eq!(p3.hess_f(Vec2::zero()), Mat2::zero());
        assert!(make_p_torsion(1.5, 1.0, 0.0).is_err());
        assert!(make_p_torsion(3.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn regularisation_restores_strong_convexity() {
        for &(p, delta) in &[(3.0, 1e-2), (4.0, 0.1), (2.5, 1e-4)] {
            let pair = make_p_torsion(p, 1.0, delta).unwrap();
            let (lo, _) = pair.hess_f(Vec2::zero()).sym_eigenvalues();
            // at z = 0 the Hessian is δ^{p-2} I
            assert!(close(lo, f64::powf(delta, p - 2.0), 1e-12));
            assert!(close(pair.convexity_constants().0, lo, 1e-12));
        }
    }

    #[test]
    fn anisotropic_examples() {
        let iso = make_anisotropic(Mat2::identity(), 1.0, 0.0).unwrap();
        assert_eq!(iso.f(Vec2::new(3.0, 4.0)), 12.5);
        assert_eq!(iso.g(2.0), 2.0);
        let a = make_anisotropic(Mat2::diag(2.0, 1.0), 1.0, 0.0).unwrap();
        assert_eq!(a.f(Vec2::new(1.0, 1.0)), 1.5);
        assert!(close(a.f_conjugate(Vec2::new(2.0, 0.0)).unwrap(), 1.0, 1e-15));
        assert!(make_anisotropic(Mat2::new(1.0, 2.0, 2.0, 1.0), 1.0, 0.0).is_err());
        assert!(make_anisotropic(Mat2::identity(), 0.0, 0.0).is_err());
    }

    #[test]
    fn quadratic_conjugate_examples() {
        assert_eq!(fenchel_quadratic_conjugate(&Mat2::<f64>::identity()).unwrap(), Mat2::identity());
        let d = fenchel_quadratic_conjugate(&Mat2::diag(2.0, 1.0)).unwrap();
        assert!((d - Mat2::diag(0.5, 1.0)).max_abs() < 1e-15);
        let g = fenchel_quadratic_conjugate(&Mat2::new(2.0, 1.0, 1.0, 2.0)).unwrap();
        let expect = Mat2::new(2.0, -1.0, -1.0, 2.0).scale(1.0 / 3.0);
        assert!((g - expect).max_abs() < 1e-15);
        assert!(fenchel_quadratic_conjugate(&Mat2::new(1.0, 1.0, 1.0, 1.0)).is_err());
        // Legendre: the Hessian of the conjugate inverts the Hessian of the form
        let a = Mat2::new(3.0, 0.5, 0.5, 1.0);
        let prod = a.mul_mat(&fenchel_quadratic_conjugate(&a).unwrap());
        assert!((prod - Mat2::identity()).max_abs() < 1e-14);
    }

    #[test]
    fn floored_hessian_is_elliptic_near_zero() {
        let p3 = make_p_torsion(3.0, 1.0, 0.0).unwrap();
        let h = p3.hess_f_floored(Vec2::zero(), 1e-3);
        let (lo, _) = h.sym_eigenvalues();
        assert!(close(lo, 1e-3, 1e-12));
        let z = Vec2::new(0.5, 0.2);
        assert_eq!(p3.hess_f_floored(z, 1e-3), p3.hess_f(z));
    }

    #[test]
    fn single_precision_evaluation() {
        let p = make_p_torsion(3.0f32, 1.0, 0.0).unwrap();
        let h = p.hess_f(Vec2::new(1.0f32, 0.0));
        assert!((h.m[0][0] - 2.0).abs() < 1e-6);
    }

    fn pairs() -> Vec<ConvexPair<f64>> {
        vec![
            make_torsion(1.0).unwrap(),
            make_p_torsion(3.0, 1.0, 0.0).unwrap(),
            make_p_torsion(4.0, 2.0, 0.3).unwrap(),
            make_p_torsion(2.5, 1.0, 0.0).unwrap(),
            make_anisotropic(Mat2::new(2.0, 0.3, 0.3, 1.0), 1.5, 0.7).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            prop_assume!(x.hypot(y) > 0.05);
            let z = Vec2::new(x, y);
            let h = 1e-5;
            let ex = Vec2::new(h, 0.0);
            let ey = Vec2::new(0.0, h);
            for pair in pairs() {
                let fd_grad = Vec2::new(
                    (pair.f(z + ex) - pair.f(z - ex)) / (2.0 * h),
                    (pair.f(z + ey) - pair.f(z - ey)) / (2.0 * h),
                );
                let g = pair.grad_f(z);
                prop_assert!((fd_grad - g).norm() <= 1e-7 * (1.0 + g.norm()), "{} grad", pair.name());
                let c0 = (pair.grad_f(z + ex) - pair.grad_f(z - ex)).scale(1.0 / (2.0 * h));
                let c1 = (pair.grad_f(z + ey) - pair.grad_f(z - ey)).scale(1.0 / (2.0 * h));
                let fd_hess = Mat2::from_cols(c0, c1);
                let hs = pair.hess_f(z);
                prop_assert!(hs.is_symmetric());
                prop_assert!((fd_hess - hs).max_abs() <= 1e-6 * (1.0 + hs.max_abs()), "{} hess", pair.name());
                let (m, _) = pair.convexity_constants();
                prop_assert!(hs.sym_eigenvalues().0 >= m * (1.0 - 1e-12) - 1e-15);
                let v = x * y;
                let fd_dg = (pair.g(v + h) - pair.g(v - h)) / (2.0 * h);
                prop_assert!((fd_dg - pair.dg(v)).abs() <= 1e-7 * (1.0 + v.abs()));
                prop_assert!(pair.d2g(v) >= pair.convexity_constants().1);
            }
        }

        #[test]
        fn fenchel_young_equality(x in -3.0f64..3.0, y in -3.0f64..3.0, s in -2.0f64..2.0) {
            let z = Vec2::new(x, y);
            for pair in pairs() {
                let zeta = pair.grad_f(z);
                if let Some(fs) = pair.f_conjugate(zeta) {
                    let lhs = pair.f(z) + fs;
                    let rhs = z.dot(zeta);
                    prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{}: {} vs {}", pair.name(), lhs, rhs);
                }
                if let Some(gs) = pair.g_conjugate(pair.dg(s)) {
                    let lhs = pair.g(s) + gs;
                    prop_assert!((lhs - s * pair.dg(s)).abs() <= 1e-12 * (1.0 + lhs.abs()));
                }
            }
        }
    }
}
