//! One-dimensional periodized Bernoulli polynomials.
//!
//! The normalization used throughout the crate is
//!
//! ```text
//! B_0(x) = 1,   B'_{n+1}(x) = B_n(x),   ∫_0^1 B_{n+1}(x) dx = 0,
//! ```
//!
//! i.e. the classical Bernoulli polynomials divided by `n!`.  On the real
//! line the polynomials are extended with period one; at integers the value
//! is the two-sided average, which only differs from the polynomial value for
//! `n = 1` (the only discontinuous member of the family).

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use once_cell::sync::Lazy;

/// Default number of cached degrees (`0..=DEFAULT_MAX_DEGREE`).
pub const DEFAULT_MAX_DEGREE: usize = 32;

/// A Bernoulli polynomial on `[0, 1]` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliPoly {
    degree: usize,
    coeffs: Vec<BigRational>,
    coeffs_f64: Vec<f64>,
}

impl BernoulliPoly {
    fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let coeffs_f64 = coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect();
        BernoulliPoly {
            degree: coeffs.len() - 1,
            coeffs,
            coeffs_f64,
        }
    }

    /// Polynomial degree `n`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Monomial coefficients, lowest degree first (length `n + 1`).
    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Next member of the family: the zero-mean antiderivative.
    fn integrate(&self) -> BernoulliPoly {
        let mut next = Vec::with_capacity(self.coeffs.len() + 1);
        next.push(BigRational::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            next.push(c / BigRational::from_integer(BigInt::from(k + 1)));
        }
        // ∫_0^1 x^k dx = 1/(k+1); pick the constant so that the mean vanishes.
        let mean: BigRational = next
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c / BigRational::from_integer(BigInt::from(k + 1)))
            .sum();
        next[0] = -mean;
        BernoulliPoly::from_coeffs(next)
    }

    /// Formal derivative (coefficientwise).
    pub fn derivative(&self) -> Vec<BigRational> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BigRational::from_integer(BigInt::from(k)))
            .collect()
    }

    /// Exact mean over `[0, 1]`.
    pub fn exact_mean(&self) -> BigRational {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / BigRational::from_integer(BigInt::from(k + 1)))
            .sum()
    }

    /// Exact value at a rational point (no periodization).
    pub fn eval_exact(&self, t: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Horner evaluation of the polynomial itself (no periodization).
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs_f64.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Builds `B_n` by the exact rational recurrence.
pub fn bernoulli_poly(n: usize) -> BernoulliPoly {
    let mut p = BernoulliPoly::from_coeffs(vec![BigRational::one()]);
    for _ in 0..n {
        p = p.integrate();
    }
    p
}

/// Cache of `B_0, …, B_max` built eagerly at construction.
#[derive(Debug, Clone)]
pub struct BernoulliTable {
    polys: Vec<BernoulliPoly>,
}

impl BernoulliTable {
    /// Builds all degrees up to and including `max_degree`.
    pub fn new(max_degree: usize) -> Self {
        let mut polys = Vec::with_capacity(max_degree + 1);
        polys.push(BernoulliPoly::from_coeffs(vec![BigRational::one()]));
        for n in 1..=max_degree {
            let next = polys[n - 1].integrate();
            polys.push(next);
        }
        BernoulliTable { polys }
    }

    /// Largest cached degree.
    pub fn max_degree(&self) -> usize {
        self.polys.len() - 1
    }

    /// Cached polynomial, if `n` is within the table.
    pub fn get(&self, n: usize) -> Option<&BernoulliPoly> {
        self.polys.get(n)
    }

    /// Periodized value with half-sum regularization at integers.
    pub fn periodized_eval(&self, n: usize, x: f64) -> f64 {
        match self.polys.get(n) {
            Some(p) => periodized_with(p, x),
            None => periodized_with(&bernoulli_poly(n), x),
        }
    }
}

fn periodized_with(p: &BernoulliPoly, x: f64) -> f64 {
    let t = x - x.floor();
    if p.degree == 1 && t == 0.0 {
        return 0.0;
    }
    p.eval(t)
}

static DEFAULT_TABLE: Lazy<BernoulliTable> = Lazy::new(|| BernoulliTable::new(DEFAULT_MAX_DEGREE));

/// The shared default table (degrees `0..=32`).
pub fn default_table() -> &'static BernoulliTable {
    &DEFAULT_TABLE
}

/// Periodized `B_n(x)`, regularized at integers by the two-sided average.
pub fn periodized_eval(n: usize, x: f64) -> f64 {
    DEFAULT_TABLE.periodized_eval(n, x)
}

/// Value of the polynomial `B_n(t)` itself for `t ∈ [0, 1]` (one-sided
/// limits at the endpoints, no regularization).
pub fn poly_eval(n: usize, t: f64) -> f64 {
    match DEFAULT_TABLE.get(n) {
        Some(p) => p.eval(t),
        None => bernoulli_poly(n).eval(t),
    }
}

/// Periodized `B_n` at an exact rational point, regularized at integers.
pub fn periodized_eval_exact(n: usize, x: &BigRational) -> f64 {
    let t = x - x.floor();
    if n == 1 && t.is_zero() {
        return 0.0;
    }
    poly_eval(n, t.to_f64().unwrap_or(f64::NAN))
}

/// Symmetric partial sum `−Σ_{0<|k|≤K} e^{2πikx} / (2πik)^n` of Euler's
/// Fourier expansion.
///
/// # Panics
/// Panics if `n == 0` (the series does not represent `B_0`).
pub fn bernoulli_fourier_partial(n: usize, x: f64, k_max: u64) -> f64 {
    assert!(n >= 1, "the Fourier expansion requires n >= 1");
    let t = x - x.floor();
    let shift = n as f64 * PI / 2.0;
    // Sum from the smallest terms up to limit rounding error.
    let mut acc = 0.0;
    for k in (1..=k_max).rev() {
        let kf = k as f64;
        acc += (2.0 * PI * kf * t - shift).cos() / (2.0 * PI * kf).powi(n as i32);
    }
    -2.0 * acc
}

/// Two-sided bound `(2π)^{-n} ≤ sup |B_n| ≤ (π²/3)(2π)^{-n}`.
pub fn sup_bounds(n: usize) -> (f64, f64) {
    let base = (2.0 * PI).powi(-(n as i32));
    (base, PI * PI / 3.0 * base)
}
