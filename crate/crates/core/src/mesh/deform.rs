//! Deformation fields `V` and the Lagrangian map `x ↦ x + εV(x)`.

use std::fmt;
use std::sync::Arc;

use super::Mesh2D;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

pub type VectorFn<T> = Arc<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;
pub type MatrixFn<T> = Arc<dyn Fn(Vec2<T>) -> Mat2<T> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Closed-form value and Jacobian.
    Analytic,
    /// Jacobian by central differences of the value.
    FdJacobian,
}

/// A `C¹` vector field on a neighbourhood of the domain together with its
/// Jacobian `DV` (`DV[i][j] = ∂_j V_i`).
#[derive(Clone)]
pub struct DeformationField<T> {
    label: String,
    value: VectorFn<T>,
    jacobian: Option<MatrixFn<T>>,
    fd_step: T,
    /// Ball outside of which the field vanishes identically, when known.
    support: Option<(Vec2<T>, T)>,
}

impl<T> fmt::Debug for DeformationField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeformationField")
            .field("label", &self.label)
            .field("kind", &self.kind())
            .finish()
    }
}

impl<T> DeformationField<T> {
    pub fn kind(&self) -> FieldKind {
        if self.jacobian.is_some() {
            FieldKind::Analytic
        } else {
            FieldKind::FdJacobian
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<T: Real> DeformationField<T> {
    pub fn analytic(
        label: impl Into<String>,
        value: impl Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
        jacobian: impl Fn(Vec2<T>) -> Mat2<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            jacobian: Some(Arc::new(jacobian)),
            fd_step: T::lit(1e-5),
            support: None,
        }
    }

    /// Field whose Jacobian is approximated by central differences with
    /// step `fd_step` (typically `1e-5 ·` mesh diameter).
    pub fn with_fd_jacobian(
        label: impl Into<String>,
        value: impl Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
        fd_step: T,
    ) -> Self {
        Self { label: label.into(), value: Arc::new(value), jacobian: None, fd_step, support: None }
    }

    #[inline]
    pub fn value(&self, x: Vec2<T>) -> Vec2<T> {
        (self.value)(x)
    }

    #[inline]
    pub fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        match &self.jacobian {
            Some(j) => j(x),
            None => self.fd_jacobian(x, self.fd_step),
        }
    }

    /// Central-difference Jacobian of the value map.
    pub fn fd_jacobian(&self, x: Vec2<T>, step: T) -> Mat2<T> {
        let two_h = step + step;
        let ex = Vec2::new(step, T::zero());
        let ey = Vec2::new(T::zero(), step);
        let dx = (self.value(x + ex) - self.value(x - ex)).scale(T::one() / two_h);
        let dy = (self.value(x + ey) - self.value(x - ey)).scale(T::one() / two_h);
        Mat2::from_cols(dx, dy)
    }

    #[inline]
    pub fn divergence(&self, x: Vec2<T>) -> T {
        self.jacobian(x).trace()
    }

    pub fn support(&self) -> Option<(Vec2<T>, T)> {
        self.support
    }

    pub fn with_support(mut self, center: Vec2<T>, radius: T) -> Self {
        self.support = Some((center, radius));
        self
    }

    /// `t·V`.
    pub fn scaled(&self, t: T) -> Self {
        let v = self.value.clone();
        let label = format!("{}*{}", t, self.label);
        let mut out = match &self.jacobian {
            Some(j) => {
                let j = j.clone();
                Self::analytic(label, move |x| v(x).scale(t), move |x| j(x).scale(t))
            }
            None => Self::with_fd_jacobian(label, move |x| v(x).scale(t), self.fd_step),
        };
        out.support = self.support;
        out
    }

    /// `V + W`.
    pub fn plus(&self, other: &Self) -> Self {
        let (v, w) = (self.value.clone(), other.value.clone());
        let label = format!("{}+{}", self.label, other.label);
        let value = move |x| v(x) + w(x);
        match (&self.jacobian, &other.jacobian) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Self::analytic(label, value, move |x| a(x) + b(x))
            }
            _ => Self::with_fd_jacobian(label, value, self.fd_step.min(other.fd_step)),
        }
    }

    pub fn zero() -> Self {
        Self::analytic("zero", |_| Vec2::zero(), |_| Mat2::zero())
    }

    pub fn constant(c: Vec2<T>) -> Self {
        Self::analytic("translation", move |_| c, |_| Mat2::zero())
    }

    /// `V(x) = x`.
    pub fn dilation() -> Self {
        Self::analytic("dilation", |x| x, |_| Mat2::identity())
    }

    /// `V(x) = x / R`: the outward unit normal on the circle of radius `R`.
    pub fn disk_normal(radius: T) -> Self {
        let s = T::one() / radius;
        Self::analytic("normal", move |x: Vec2<T>| x.scale(s), move |_| Mat2::identity().scale(s))
    }

    /// Rigid rotation about `center`, `V(x) = ω (x − c)^⊥`; tangential on
    /// circles centred at `c`.
    pub fn spin(center: Vec2<T>, omega: T) -> Self {
        Self::analytic(
            "spin",
            move |x: Vec2<T>| (x - center).perp().scale(omega),
            move |_| Mat2::new(T::zero(), -omega, omega, T::zero()),
        )
    }

    /// Compactly supported radial bump
    /// `V(x) = a (1 − s²)⁴ (x − c)/r`, `s = |x − c|/r`, zero for `s ≥ 1`.
    pub fn radial_bump(center: Vec2<T>, radius: T, amplitude: T) -> Self {
        let inv_r = T::one() / radius;
        let value = move |x: Vec2<T>| {
            let d = x - center;
            let q = T::one() - d.norm_sq() * inv_r * inv_r;
            if q <= T::zero() {
                return Vec2::zero();
            }
            d.scale(amplitude * inv_r * q.powi(4))
        };
        let jac = move |x: Vec2<T>| {
            let d = x - center;
            let q = T::one() - d.norm_sq() * inv_r * inv_r;
            if q <= T::zero() {
                return Mat2::zero();
            }
            let psi = q.powi(4);
            let k = T::lit(-8.0) * q.powi(3) * inv_r * inv_r;
            (Mat2::identity().scale(psi) + d.outer(d).scale(k)).scale(amplitude * inv_r)
        };
        Self::analytic("radial_bump", value, jac).with_support(center, radius)
    }

    /// Polynomial field `V_i(x, y) = Σ c x^a y^b` over the listed terms
    /// `(a, b, c)` for each component.
    pub fn polynomial(terms_x: Vec<(u32, u32, T)>, terms_y: Vec<(u32, u32, T)>) -> Self {
        let eval = |terms: &[(u32, u32, T)], p: Vec2<T>| -> T {
            terms.iter().map(|&(a, b, c)| c * p.x.powi(a as i32) * p.y.powi(b as i32)).sum()
        };
        let grad = |terms: &[(u32, u32, T)], p: Vec2<T>| -> Vec2<T> {
            let mut g = Vec2::zero();
            for &(a, b, c) in terms {
                if a > 0 {
                    g.x += c * T::of_usize(a as usize) * p.x.powi(a as i32 - 1) * p.y.powi(b as i32);
                }
                if b > 0 {
                    g.y += c * T::of_usize(b as usize) * p.x.powi(a as i32) * p.y.powi(b as i32 - 1);
                }
            }
            g
        };
        let (tx, ty) = (terms_x.clone(), terms_y.clone());
        let value = move |p| Vec2::new(eval(&tx, p), eval(&ty, p));
        let jac = move |p| Mat2::from_rows(grad(&terms_x, p), grad(&terms_y, p));
        Self::analytic("polynomial", value, jac)
    }
}

/// Invariants of a 2×2 Jacobian: `(a₁, a₂) = (tr DV, det DV)`, so that
/// `det(I + εDV) = 1 + a₁ε + a₂ε²`.
pub fn jacobian_invariants<T: Real>(dv: &Mat2<T>) -> (T, T) {
    (dv.trace(), dv.det())
}

/// Moves every vertex to `x + εV(x)`; quadratic nodes follow as midpoints of
/// the moved vertices. Fails when a triangle loses positive area.
pub fn deform<T: Real>(mesh: &Mesh2D<T>, field: &DeformationField<T>, eps: T) -> Result<Mesh2D<T>> {
    if eps == T::zero() {
        return Ok(mesh.clone());
    }
    let moved: Vec<Vec2<T>> = mesh.vertices().iter().map(|&x| x + field.value(x).scale(eps)).collect();
    let out = mesh.with_vertices(moved);
    for t in 0..out.n_triangles() {
        let area = out.signed_area(t);
        if !(area > T::zero()) {
            return Err(Error::InvertedElement { triangle: t, area: area.to_f64_lossy() });
        }
    }
    Ok(out)
}
