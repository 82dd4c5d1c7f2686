//! Orthonormal sine eigenbasis of the hinged fourth-order operator on (0, 1)
//! and the scale of norms it diagonalises.
//!
//! The basis functions are e_n(x) = sqrt(2) sin(n pi x); the operator A acts
//! as multiplication by lambda_n = (n pi)^4 and its square root by
//! mu_n = (n pi)^2. Every norm in the hierarchy reduces to a weighted sum of
//! squared coefficients with weights mu_n^r.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cast, csum, Scalar};

/// Mode count, eigenvalues of A^{1/2} (mu) and of A (lambda) for a fixed
/// truncation. Shared by every field through an `Arc`.
#[derive(Debug, PartialEq)]
pub struct BasisSpec<T> {
    n: usize,
    mu: Vec<T>,
    lambda: Vec<T>,
}

impl<T: Scalar> BasisSpec<T> {
    /// Default truncation used across the toolkit.
    pub const DEFAULT_MODES: usize = 32;

    pub fn new(n: usize) -> Result<Arc<Self>, T> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                what: "mode count must be at least 1".into(),
            });
        }
        let pi = T::PI();
        let mut mu = Vec::with_capacity(n);
        let mut lambda = Vec::with_capacity(n);
        for k in 1..=n {
            let m = (cast::<T>(k as f64) * pi).powi(2);
            mu.push(m);
            lambda.push(m * m);
        }
        Ok(Arc::new(Self { n, mu, lambda }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// mu_n = (n pi)^2 for 1-based mode index n.
    pub fn mu(&self, mode: usize) -> T {
        self.mu[mode - 1]
    }

    /// lambda_n = (n pi)^4 for 1-based mode index n.
    pub fn lambda(&self, mode: usize) -> T {
        self.lambda[mode - 1]
    }

    pub fn mus(&self) -> &[T] {
        &self.mu
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambda
    }

    /// First eigenvalue of A (equals pi^4).
    pub fn lambda_1(&self) -> T {
        self.lambda[0]
    }

    /// mu_n^r with fast paths for the handful of exponents the dynamics uses.
    #[inline]
    pub(crate) fn mu_pow(&self, idx: usize, r: T) -> T {
        let mu = self.mu[idx];
        if r == T::zero() {
            T::one()
        } else if r == T::one() {
            mu
        } else if r == cast::<T>(2.0) {
            self.lambda[idx]
        } else if r == -T::one() {
            mu.recip()
        } else if r == cast::<T>(3.0) {
            mu * self.lambda[idx]
        } else if r == cast::<T>(4.0) {
            self.lambda[idx] * self.lambda[idx]
        } else {
            mu.powf(r)
        }
    }
}

/// Coefficient vector of a function on (0, 1) against the orthonormal
/// eigenbasis, tied to its truncation.
#[derive(Debug, Clone)]
pub struct SpectralField<T> {
    coeffs: Vec<T>,
    basis: Arc<BasisSpec<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(basis: &Arc<BasisSpec<T>>) -> Self {
        Self {
            coeffs: vec![T::zero(); basis.len()],
            basis: Arc::clone(basis),
        }
    }

    pub fn from_coeffs(basis: &Arc<BasisSpec<T>>, coeffs: Vec<T>) -> Result<Self, T> {
        if coeffs.len() != basis.len() {
            return Err(Error::BasisMismatch {
                left: coeffs.len(),
                right: basis.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::RangeError {
                what: "field coefficient",
            });
        }
        Ok(Self {
            coeffs,
            basis: Arc::clone(basis),
        })
    }

    /// Construction without the finiteness scan, for integrator-internal
    /// buffers that are validated separately.
    pub(crate) fn from_coeffs_unchecked(basis: &Arc<BasisSpec<T>>, coeffs: Vec<T>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.len());
        Self {
            coeffs,
            basis: Arc::clone(basis),
        }
    }

    /// amplitude * e_mode (1-based mode index).
    pub fn mode(basis: &Arc<BasisSpec<T>>, mode: usize, amplitude: T) -> Result<Self, T> {
        if mode == 0 || mode > basis.len() {
            return Err(Error::InvalidParameter {
                what: format!("mode {mode} outside 1..={}", basis.len()),
            });
        }
        let mut f = Self::zeros(basis);
        f.coeffs[mode - 1] = amplitude;
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<BasisSpec<T>> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_same_basis(&self, other: &Self) -> Result<(), T> {
        if self.basis.len() != other.basis.len() {
            return Err(Error::BasisMismatch {
                left: self.basis.len(),
                right: other.basis.len(),
            });
        }
        Ok(())
    }

    /// H^r norm: ( sum_n mu_n^r a_n^2 )^{1/2}. r = 0 is the plain L^2 norm.
    pub fn norm_r(&self, r: T) -> Result<T, T> {
        let sq = self.norm_r_sq(r);
        if !sq.is_finite() {
            return Err(Error::RangeError { what: "norm" });
        }
        Ok(sq.sqrt())
    }

    #[inline]
    pub(crate) fn norm_r_sq(&self, r: T) -> T {
        let b = &self.basis;
        csum(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &a)| b.mu_pow(i, r) * a * a),
        )
    }

    /// H^r inner product: sum_n mu_n^r a_n b_n.
    pub fn inner_r(&self, other: &Self, r: T) -> Result<T, T> {
        self.check_same_basis(other)?;
        let b = &self.basis;
        let v = csum(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .enumerate()
                .map(|(i, (&a, &c))| b.mu_pow(i, r) * a * c),
        );
        if !v.is_finite() {
            return Err(Error::RangeError {
                what: "inner product",
            });
        }
        Ok(v)
    }

    /// Coefficient-wise scaling a_n -> lambda_n^s a_n, realising A^s.
    /// s = 1/2 applies A^{1/2}; s = -1/2 its inverse.
    pub fn apply_a_power(&self, s: T) -> Self {
        let b = &self.basis;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| b.lambdas()[i].powf(s) * a)
            .collect();
        Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        }
    }

    /// Rotational norm: ( ||u||_{r-1}^2 + gamma ||u||_r^2 )^{1/2}.
    /// At gamma = 0 this is exactly the H^{r-1} norm.
    pub fn norm_gamma(&self, r: T, gamma: T) -> Result<T, T> {
        if gamma < T::zero() {
            return Err(Error::InvalidParameter {
                what: "gamma must be nonnegative".into(),
            });
        }
        let sq = self.norm_gamma_sq(r, gamma);
        if !sq.is_finite() {
            return Err(Error::RangeError { what: "norm" });
        }
        Ok(sq.sqrt())
    }

    #[inline]
    pub(crate) fn norm_gamma_sq(&self, r: T, gamma: T) -> T {
        self.norm_r_sq(r - T::one()) + gamma * self.norm_r_sq(r)
    }

    /// Pointwise synthesis u(x) = sum_n a_n sqrt(2) sin(n pi x) on [0, 1].
    pub fn sample_physical(&self, xs: &[T]) -> Result<Vec<T>, T> {
        let sqrt2 = cast::<T>(2.0).sqrt();
        let pi = T::PI();
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            if x < T::zero() || x > T::one() {
                return Err(Error::PointOutsideDomain { x });
            }
            let v = csum(self.coeffs.iter().enumerate().map(|(i, &a)| {
                let n = cast::<T>((i + 1) as f64);
                a * sqrt2 * (n * pi * x).sin()
            }));
            out.push(v);
        }
        Ok(out)
    }

    pub fn scaled(&self, c: T) -> Self {
        let coeffs = self.coeffs.iter().map(|&a| a * c).collect();
        Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, T> {
        self.check_same_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, T> {
        self.check_same_basis(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            coeffs,
            basis: Arc::clone(&self.basis),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize) -> Arc<BasisSpec<f64>> {
        BasisSpec::new(n).unwrap()
    }

    #[test]
    fn first_eigenvalue_is_pi_fourth() {
        let b = basis(4);
        let pi = std::f64::consts::PI;
        assert!((b.lambda_1() - pi.powi(4)).abs() < 1e-12);
        assert_eq!(b.mu(2), (2.0 * pi).powi(2));
        // mu strictly increasing, lambda = mu^2 exactly
        for k in 1..=4 {
            assert_eq!(b.lambda(k), b.mu(k) * b.mu(k));
            if k > 1 {
                assert!(b.mu(k) > b.mu(k - 1));
            }
        }
    }

    #[test]
    fn norm_r_single_mode_values() {
        let b = basis(4);
        let pi = std::f64::consts::PI;
        let e1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        assert!((e1.norm_r(1.0).unwrap() - pi).abs() < 1e-12);
        assert!((e1.norm_r(2.0).unwrap() - pi * pi).abs() < 1e-12);
        let mut two = e1.clone();
        two.coeffs_mut()[1] = 1.0;
        assert!((two.norm_r(0.0).unwrap() - 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn inner_r_values_and_orthogonality() {
        let b = basis(4);
        let pi = std::f64::consts::PI;
        let e1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        let e2 = SpectralField::mode(&b, 2, 1.0).unwrap();
        assert!((e1.inner_r(&e1, -1.0).unwrap() - 1.0 / (pi * pi)).abs() < 1e-14);
        for r in [-1.0, 0.0, 1.0, 2.5] {
            assert_eq!(e1.inner_r(&e2, r).unwrap(), 0.0);
        }
        let f1 = SpectralField::mode(&b, 1, 2.0).unwrap();
        let f2 = SpectralField::mode(&b, 1, 3.0).unwrap();
        assert!((f1.inner_r(&f2, 1.0).unwrap() - 6.0 * pi * pi).abs() < 1e-11);
    }

    #[test]
    fn inner_r_rejects_basis_mismatch() {
        let f = SpectralField::mode(&basis(4), 1, 1.0).unwrap();
        let g = SpectralField::mode(&basis(8), 1, 1.0).unwrap();
        assert!(matches!(
            f.inner_r(&g, 0.0),
            Err(Error::BasisMismatch { .. })
        ));
    }

    #[test]
    fn apply_a_power_identity_and_inverse_pair() {
        let b = basis(6);
        let pi = std::f64::consts::PI;
        let f = SpectralField::from_coeffs(&b, vec![1.0, -0.5, 0.25, 0.0, 0.1, 2.0]).unwrap();
        let same = f.apply_a_power(0.0);
        assert_eq!(same.coeffs(), f.coeffs());

        let e1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        let half = e1.apply_a_power(0.5);
        assert!((half.coeffs()[0] - pi * pi).abs() < 1e-12);

        let back = f.apply_a_power(0.5).apply_a_power(-0.5);
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn norm_gamma_values_and_bound() {
        let b = basis(4);
        let pi = std::f64::consts::PI;
        let e1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        assert!((e1.norm_gamma(1.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((e1.norm_gamma(1.0, 1.0).unwrap() - (1.0 + pi * pi).sqrt()).abs() < 1e-13);
        assert!(e1.norm_gamma(1.0, -0.5).is_err());

        // || . ||_{r,gamma} <= sqrt(1/sqrt(lambda_1) + gamma) || . ||_r
        let f = SpectralField::from_coeffs(&b, vec![0.3, -1.2, 0.05, 0.7]).unwrap();
        for gamma in [0.0, 0.3, 2.0] {
            let lhs = f.norm_gamma(2.0, gamma).unwrap();
            let bound = (1.0 / b.lambda_1().sqrt() + gamma).sqrt() * f.norm_r(2.0).unwrap();
            assert!(lhs <= bound * (1.0 + 1e-14));
        }
    }

    #[test]
    fn sample_physical_boundary_midpoint_and_domain_check() {
        let b = basis(4);
        let f = SpectralField::from_coeffs(&b, vec![1.0, 0.3, -0.2, 0.05]).unwrap();
        let vals = f.sample_physical(&[0.0, 1.0]).unwrap();
        assert!(vals[0].abs() < 1e-14 && vals[1].abs() < 1e-13);

        let e1 = SpectralField::mode(&b, 1, 1.0).unwrap();
        let mid = e1.sample_physical(&[0.5]).unwrap();
        assert!((mid[0] - 2.0f64.sqrt()).abs() < 1e-14);

        assert!(matches!(
            f.sample_physical(&[1.2]),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn parseval_against_trapezoid_quadrature() {
        // independent oracle: dense-grid trapezoid quadrature of u(x)^2
        let b = basis(32);
        let coeffs: Vec<f64> = (0..32).map(|i| 0.5 / ((i + 1) as f64).powi(2)).collect();
        let f = SpectralField::from_coeffs(&b, coeffs).unwrap();
        let m = 10_000usize;
        let xs: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let vals = f.sample_physical(&xs).unwrap();
        let h = 1.0 / m as f64;
        let mut quad = 0.0;
        for i in 0..m {
            quad += 0.5 * h * (vals[i] * vals[i] + vals[i + 1] * vals[i + 1]);
        }
        let exact = f.norm_r(0.0).unwrap().powi(2);
        assert!(
            (quad - exact).abs() < 1e-6,
            "quadrature {} vs parseval {}",
            quad,
            exact
        );
    }

    #[test]
    fn generic_scalar_works_at_f32() {
        let b = BasisSpec::<f32>::new(4).unwrap();
        let e1 = SpectralField::mode(&b, 1, 1.0f32).unwrap();
        assert!((e1.norm_r(1.0).unwrap() - std::f32::consts::PI).abs() < 1e-5);
    }
}
