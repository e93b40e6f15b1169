//! 2x2 complex matrices with the exact spectral norm.
//!
//! Everything the propagators and factorizations produce lives in this type:
//! fundamental matrices, diagonalizer factors, Peano-Baker partial sums. The
//! spectral norm has a closed form in dimension two: the singular values
//! squared are the roots of s^4 - T s^2 + |det|^2 with T the squared
//! Frobenius norm, so no iterative SVD is needed and norm evaluations are
//! exact up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl Mat2 {
    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        Mat2::diag(Complex64::ONE, Complex64::ONE)
    }

    pub fn zero() -> Self {
        Mat2::diag(Complex64::ZERO, Complex64::ZERO)
    }

    pub fn diag(d1: Complex64, d2: Complex64) -> Self {
        Mat2::new(d1, Complex64::ZERO, Complex64::ZERO, d2)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Mat2::new(c * self.a11, c * self.a12, c * self.a21, c * self.a22)
    }

    pub fn det(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> Complex64 {
        self.a11 + self.a22
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        Some(Mat2::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d))
    }

    pub fn conj_transpose(&self) -> Mat2 {
        Mat2::new(
            self.a11.conj(),
            self.a21.conj(),
            self.a12.conj(),
            self.a22.conj(),
        )
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr())
            .sqrt()
    }

    /// Largest singular value, in closed form. The discriminant comes from
    /// the Gram matrix A^H A as (p - r)^2 + 4 |q|^2, a sum of squares; the
    /// algebraically equal t^2 - 4 |det|^2 cancels catastrophically when the
    /// singular values coincide (unitary matrices come out 1 +- 1e-8).
    pub fn norm(&self) -> f64 {
        let p = self.a11.norm_sqr() + self.a21.norm_sqr();
        let r = self.a12.norm_sqr() + self.a22.norm_sqr();
        let q = self.a11.conj() * self.a12 + self.a21.conj() * self.a22;
        let disc = ((p - r) * (p - r) + 4.0 * q.norm_sqr()).sqrt();
        (0.5 * (p + r + disc)).sqrt()
    }

    /// Smallest singular value; zero for singular matrices. Recovered from
    /// s1 s2 = |det|, which keeps full relative accuracy for ill-conditioned
    /// matrices where the direct subtraction loses digits.
    pub fn min_singular_value(&self) -> f64 {
        let s1 = self.norm();
        if s1 == 0.0 {
            0.0
        } else {
            self.det().norm() / s1
        }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn column(&self, j: usize) -> [Complex64; 2] {
        match j {
            0 => [self.a11, self.a21],
            1 => [self.a12, self.a22],
            _ => panic!("column index {j} out of range for 2x2"),
        }
    }

    pub fn from_columns(c0: [Complex64; 2], c1: [Complex64; 2]) -> Mat2 {
        Mat2::new(c0[0], c1[0], c0[1], c1[1])
    }

    pub fn max_entry_norm(&self) -> f64 {
        self.a11
            .norm()
            .max(self.a12.norm())
            .max(self.a21.norm())
            .max(self.a22.norm())
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 + rhs.a11,
            self.a12 + rhs.a12,
            self.a21 + rhs.a21,
            self.a22 + rhs.a22,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 - rhs.a11,
            self.a12 - rhs.a12,
            self.a21 - rhs.a21,
            self.a22 - rhs.a22,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * rhs.a11 + self.a12 * rhs.a21,
            self.a11 * rhs.a12 + self.a12 * rhs.a22,
            self.a21 * rhs.a11 + self.a22 * rhs.a21,
            self.a21 * rhs.a12 + self.a22 * rhs.a22,
        )
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        rhs.scale(Complex64::new(self, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_and_det() {
        let m = Mat2::new(c(1.0, 2.0), c(0.5, -1.0), c(2.0, 0.0), c(-1.0, 1.0));
        let inv = m.inverse().unwrap();
        let id = m * inv;
        assert!((id - Mat2::identity()).norm() < 1e-14);
        assert!((m.det() * inv.det() - Complex64::ONE).norm() < 1e-14);
    }

    #[test]
    fn norm_of_diagonal_is_max_modulus() {
        let m = Mat2::diag(c(3.0, 4.0), c(1.0, 0.0));
        assert!((m.norm() - 5.0).abs() < 1e-14);
        assert!((m.min_singular_value() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unitary_rotation_has_unit_norm() {
        // exp(i a [[0,1],[1,0]]) = cos a I + i sin a offdiag: unitary.
        let a = 0.8f64;
        let m = Mat2::new(
            c(a.cos(), 0.0),
            c(0.0, a.sin()),
            c(0.0, a.sin()),
            c(a.cos(), 0.0),
        );
        assert!((m.norm() - 1.0).abs() < 1e-14);
        assert!((m.min_singular_value() - 1.0).abs() < 1e-14);
    }

    proptest! {
        // The closed-form spectral norm is an operator norm: submultiplicative,
        // consistent with the action on vectors, between Frobenius/sqrt(2) and
        // Frobenius.
        #[test]
        fn spectral_norm_properties(
            re in proptest::collection::vec(-3.0f64..3.0, 8),
        ) {
            let m = Mat2::new(
                c(re[0], re[1]), c(re[2], re[3]), c(re[4], re[5]), c(re[6], re[7]),
            );
            let n = m.norm();
            prop_assert!(n <= m.frobenius() + 1e-12);
            prop_assert!(n >= m.frobenius() / 2f64.sqrt() - 1e-12);
            // action on a fixed probe vector is dominated by the norm
            let v = [c(0.6, -0.3), c(-0.2, 0.9)];
            let len_v = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            let w = m.apply(v);
            let len_w = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
            prop_assert!(len_w <= n * len_v * (1.0 + 1e-12));
            prop_assert!(len_w >= m.min_singular_value() * len_v * (1.0 - 1e-12));
            // submultiplicativity against the adjoint
            prop_assert!((m * m.conj_transpose()).norm() <= n * n + 1e-9);
        }
    }
}
