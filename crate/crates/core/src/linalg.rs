//! Small fixed-size vectors and matrices for the planar pointwise algebra.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    /// Counter-clockwise rotation by a right angle.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn outer(self, o: Self) -> Mat2<T> {
        Mat2::new(self.x * o.x, self.x * o.y, self.y * o.x, self.y * o.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Row-major 2×2 matrix; `m[i][j]` is row `i`, column `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    #[inline]
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    #[inline]
    pub fn diag(a: T, d: T) -> Self {
        Self::new(a, T::zero(), T::zero(), d)
    }

    #[inline]
    pub fn from_rows(r0: Vec2<T>, r1: Vec2<T>) -> Self {
        Self::new(r0.x, r0.y, r1.x, r1.y)
    }

    #[inline]
    pub fn from_cols(c0: Vec2<T>, c1: Vec2<T>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vec2<T> {
        Vec2::new(self.m[i][0], self.m[i][1])
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    #[inline]
    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Self::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    #[inline]
    pub fn mul_mat(&self, o: &Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    /// Frobenius inner product `A:B`.
    #[inline]
    pub fn ddot(&self, o: &Self) -> T {
        self.m[0][0] * o.m[0][0]
            + self.m[0][1] * o.m[0][1]
            + self.m[1][0] * o.m[1][0]
            + self.m[1][1] * o.m[1][1]
    }

    /// Quadratic form `⟨A v, w⟩`.
    #[inline]
    pub fn form(&self, v: Vec2<T>, w: Vec2<T>) -> T {
        self.mul_vec(v).dot(w)
    }

    #[inline]
    pub fn sym(&self) -> Self {
        let off = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        Self::new(self.m[0][0], off, off, self.m[1][1])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        let scale = self.max_abs();
        if d == T::zero() || !d.is_finite() || d.abs() <= T::epsilon() * scale * scale {
            return None;
        }
        let inv = T::one() / d;
        Some(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    #[inline]
    pub fn max_abs(&self) -> T {
        self.m[0][0]
            .abs()
            .max(self.m[0][1].abs())
            .max(self.m[1][0].abs())
            .max(self.m[1][1].abs())
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    #[inline]
    pub fn is_symmetric(&self) -> bool {
        self.m[0][1] == self.m[1][0]
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> (T, T) {
        let s = self.sym();
        let half = T::lit(0.5);
        let mean = (s.m[0][0] + s.m[1][1]) * half;
        let diff = (s.m[0][0] - s.m[1][1]) * half;
        let r = (diff * diff + s.m[0][1] * s.m[0][1]).sqrt();
        (mean - r, mean + r)
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_symmetric_matrix() {
        let a = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let inv = a.inverse().unwrap();
        let third = 1.0 / 3.0;
        let expect = Mat2::new(2.0 * third, -third, -third, 2.0 * third);
        assert!((inv - expect).max_abs() < 1e-15);
        assert!(Mat2::<f64>::zero().inverse().is_none());
    }

    #[test]
    fn eigenvalues_sorted() {
        let (lo, hi) = Mat2::new(2.0, 1.0, 1.0, 2.0).sym_eigenvalues();
        assert!((lo - 1.0_f64).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn frobenius_and_forms() {
        let a = Mat2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(a.ddot(&Mat2::identity()), 5.0);
        assert_eq!(a.form(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)), 3.0);
        assert_eq!(a.mul_mat(&Mat2::identity()), a);
        assert_eq!(Vec2::new(1.0, 2.0).outer(Vec2::new(3.0, 4.0)), Mat2::new(3.0, 4.0, 6.0, 8.0));
    }
}
