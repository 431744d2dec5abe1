//! Multivariate periodized Bernoulli functions
//!
//! ```text
//! 𝔅_{J,L}(x) = Σ_{n∈ℤ^d} |det L|^{-1} B_J((L^{-1})ᵗ (x + n)),
//! B_J(u) = ∏_k B_{j_k}(u_k) on [0,1)^d (zero elsewhere),
//! ```
//!
//! with three independent evaluators:
//!
//! * **periodization** – direct enumeration of the summands whose cell
//!   contains `x`;
//! * **HNF** – the Hermite normal form `L = HU` splits `Lℤ^d` into cosets of
//!   a diagonal lattice `Kℤ^d`, reducing `𝔅_{J,L}` to finite averages of
//!   one-dimensional Bernoulli polynomials (rational Lerch values);
//! * **Fourier** – the mollified series `(−1)^{|I|} Σ_{n∈Δ(I,L)} φ̂(εn)
//!   e^{2πin·x}/(2πiLn)^J`.
//!
//! At discontinuities the value is the radial regularization (limit of
//! averages over small balls).  The periodization and HNF evaluators compute
//! it exactly: near `x` every piece is polynomial on the cones cut out by
//! the hyperplanes through `x`, so the limit is a solid-angle weighted sum
//! of one-sided values.

// Index loops mirror the matrix formulas.
#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernoulli1d::{periodized_eval, poly_eval};
use crate::geometry::{box_points, cone_fraction};
use crate::linalg::{self, IMat};
use crate::sum::pairwise_sum;

/// Residual imaginary part tolerated by the HNF evaluator.
pub const IMAG_TOL: f64 = 1e-10;

/// Errors raised by the multivariate Bernoulli evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvbError {
    /// `det L = 0` or shapes disagree.
    #[error("invalid lattice matrix: {0}")]
    InvalidMatrix(String),
    /// The coset decomposition failed its consistency checks.
    #[error("coset enumeration inconsistent: {0}")]
    CosetCheck(String),
    /// The HNF sum left an imaginary residue.
    #[error("HNF evaluation left imaginary part {0:e}")]
    ImaginaryResidue(f64),
    /// Regularization needs a cone with more than three facets.
    #[error("regularization at a codimension-{0} stratum is not supported")]
    Regularization(usize),
}

/// Which evaluator to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    /// Direct enumeration of summands.
    Periodization,
    /// Hermite normal form and coset sums.
    Hnf,
    /// Mollified Fourier series.
    Fourier(FourierOptions),
}

/// Mollifier applied to the Fourier series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mollifier {
    /// `φ̂(εn) = exp(−π ε² |n|²)`, summed over the box `|n_k| ≤ cutoff`.
    Radial,
    /// `φ̂(εn) = exp(−π ε² |Ln|²)`, summed over `|(Ln)_k| ≤ cutoff`.  This
    /// mollifier is separable in `m = Ln`, so the series factorizes over the
    /// cosets of `Kℤ^d` and costs `O(d · cutoff)` per point.
    Lattice,
}

/// Parameters of the Fourier evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierOptions {
    /// Mollifier width `ε`.
    pub epsilon: f64,
    /// Truncation; `None` picks the point where the mollifier drops below
    /// `1e-16`.
    pub cutoff: Option<u64>,
    /// Mollifier shape.
    pub mollifier: Mollifier,
}

impl FourierOptions {
    /// Lattice mollifier with adaptive cutoff.
    pub fn lattice(epsilon: f64) -> Self {
        FourierOptions {
            epsilon,
            cutoff: None,
            mollifier: Mollifier::Lattice,
        }
    }

    /// Radial mollifier with explicit cutoff.
    pub fn radial(epsilon: f64, cutoff: u64) -> Self {
        FourierOptions {
            epsilon,
            cutoff: Some(cutoff),
            mollifier: Mollifier::Radial,
        }
    }

    fn effective_cutoff(&self) -> i64 {
        self.cutoff
            .map(|c| c as i64)
            .unwrap_or_else(|| ((37.0 / PI).sqrt() / self.epsilon).ceil() as i64)
    }
}

/// Column Hermite normal form `L = H U`: `H` lower triangular with positive
/// diagonal and `0 ≤ h_{jk} < h_{jj}` for `k < j`, `U` unimodular.
pub fn hnf(l: &[Vec<i64>]) -> Result<(IMat, IMat), MvbError> {
    let d = l.len();
    if l.iter().any(|r| r.len() != d) || linalg::det(l) == 0 {
        return Err(MvbError::InvalidMatrix(
            "L must be square and non-singular".into(),
        ));
    }
    let mut h: IMat = l.to_vec();
    let mut w = linalg::identity(d);
    let col_axpy = |m: &mut IMat, dst: usize, src: usize, q: i64| {
        for row in m.iter_mut() {
            row[dst] -= q * row[src];
        }
    };
    let col_swap = |m: &mut IMat, a: usize, b: usize| {
        for row in m.iter_mut() {
            row.swap(a, b);
        }
    };
    for i in 0..d {
        for k in i + 1..d {
            while h[i][k] != 0 {
                let q = h[i][i] / h[i][k];
                col_axpy(&mut h, i, k, q);
                col_axpy(&mut w, i, k, q);
                col_swap(&mut h, i, k);
                col_swap(&mut w, i, k);
            }
        }
        if h[i][i] < 0 {
            for m in [&mut h, &mut w] {
                for row in m.iter_mut() {
                    row[i] = -row[i];
                }
            }
        }
        for k in 0..i {
            let q = h[i][k].div_euclid(h[i][i]);
            col_axpy(&mut h, k, i, q);
            col_axpy(&mut w, k, i, q);
        }
    }
    let u = linalg::inverse_unimodular(&w)
        .ok_or_else(|| MvbError::InvalidMatrix("column transform not unimodular".into()))?;
    Ok((h, u))
}

/// `k_j = ∏_{s ≥ j} h_{ss}`.
pub fn k_diagonal(h: &[Vec<i64>]) -> Vec<i64> {
    let d = h.len();
    (0..d).map(|j| (j..d).map(|s| h[s][s]).product()).collect()
}

/// Whether the integer vector `t` lies in `Hℤ^d` (`H` lower triangular).
fn in_lattice(h: &[Vec<i64>], t: &[i64]) -> bool {
    let d = h.len();
    let mut z = vec![0i64; d];
    for i in 0..d {
        let rest: i64 = (0..i).map(|k| h[i][k] * z[k]).sum();
        let num = t[i] - rest;
        if num % h[i][i] != 0 {
            return false;
        }
        z[i] = num / h[i][i];
    }
    true
}

/// Representatives of `Hℤ^d / Kℤ^d`, reduced into `∏ [0, k_s)`.
pub fn cosets(h: &[Vec<i64>], k: &[i64]) -> Result<Vec<Vec<i64>>, MvbError> {
    let d = h.len();
    for s in 0..d {
        let mut col = vec![0; d];
        col[s] = k[s];
        if !in_lattice(h, &col) {
            return Err(MvbError::CosetCheck(format!(
                "k_{} e_{} not in Hℤ^d",
                s + 1,
                s + 1
            )));
        }
    }
    let ranges: Vec<(i64, i64)> = k.iter().map(|ks| (0, ks - 1)).collect();
    let mut reps = BTreeSet::new();
    for m in box_points(&ranges) {
        let v: Vec<i64> = linalg::matvec(h, &m)
            .iter()
            .zip(k)
            .map(|(x, ks)| x.rem_euclid(*ks))
            .collect();
        reps.insert(v);
    }
    let det_k: i128 = k.iter().map(|x| *x as i128).product();
    let det_h = linalg::abs_det(h);
    if reps.len() as i128 * det_h != det_k {
        return Err(MvbError::CosetCheck(format!(
            "found {} cosets, expected {}/{}",
            reps.len(),
            det_k,
            det_h
        )));
    }
    Ok(reps.into_iter().collect())
}

/// `𝔅_{J,L}` with precomputed Hermite normal form and cosets.
#[derive(Debug)]
pub struct MvBernoulli {
    j: Vec<u32>,
    l: IMat,
    det: i128,
    /// `adj(L)`, so `L^{-1} = adj / det`.
    adj: Vec<Vec<i128>>,
    h: IMat,
    u: IMat,
    k: Vec<i64>,
    cosets: Vec<Vec<i64>>,
    /// Columns of `L^{-1}`: gradients of `y = (L^{-1})ᵗ x`.
    normals: Vec<Vec<f64>>,
    reg_cache: Mutex<HashMap<(u32, u32), f64>>,
}

impl Clone for MvBernoulli {
    fn clone(&self) -> Self {
        MvBernoulli {
            j: self.j.clone(),
            l: self.l.clone(),
            det: self.det,
            adj: self.adj.clone(),
            h: self.h.clone(),
            u: self.u.clone(),
            k: self.k.clone(),
            cosets: self.cosets.clone(),
            normals: self.normals.clone(),
            reg_cache: Mutex::new(HashMap::new()),
        }
    }
}

impl MvBernoulli {
    /// Builds the evaluator for multi-index `J` and lattice matrix `L`.
    pub fn new(j: Vec<u32>, l: IMat) -> Result<Self, MvbError> {
        let d = j.len();
        if l.len() != d || l.iter().any(|r| r.len() != d) {
            return Err(MvbError::InvalidMatrix(format!("L must be {d}x{d}")));
        }
        let (h, u) = hnf(&l)?;
        let k = k_diagonal(&h);
        let cosets = cosets(&h, &k)?;
        let det = linalg::det(&l);
        let adj = linalg::adjugate(&l);
        let normals = (0..d)
            .map(|s| (0..d).map(|i| adj[i][s] as f64 / det as f64).collect())
            .collect();
        Ok(MvBernoulli {
            j,
            l,
            det,
            adj,
            h,
            u,
            k,
            cosets,
            normals,
            reg_cache: Mutex::new(HashMap::new()),
        })
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.j.len()
    }

    /// The multi-index `J`.
    pub fn j(&self) -> &[u32] {
        &self.j
    }

    /// `I` with `i_k = 1` iff `j_k > 0`.
    pub fn i(&self) -> Vec<u8> {
        self.j.iter().map(|x| u8::from(*x > 0)).collect()
    }

    /// The lattice matrix `L`.
    pub fn l(&self) -> &IMat {
        &self.l
    }

    /// Hermite factor `H`.
    pub fn h(&self) -> &IMat {
        &self.h
    }

    /// Unimodular factor `U`.
    pub fn u(&self) -> &IMat {
        &self.u
    }

    /// Diagonal of `K`.
    pub fn k(&self) -> &[i64] {
        &self.k
    }

    /// Coset representatives of `Hℤ^d / Kℤ^d`.
    pub fn coset_reps(&self) -> &[Vec<i64>] {
        &self.cosets
    }

    /// Evaluates with the requested backend.
    pub fn eval(&self, x: &[f64], backend: Backend) -> Result<f64, MvbError> {
        match backend {
            Backend::Periodization => self.eval_periodization(x),
            Backend::Hnf => self.eval_hnf(x),
            Backend::Fourier(opts) => Ok(self.eval_fourier(x, &opts)),
        }
    }

    /// `y = (L^{-1})ᵗ x` in exact arithmetic.
    fn pull_back(&self, x: &[BigRational]) -> Vec<BigRational> {
        let d = self.dim();
        let det = linalg::rational_from_i128(self.det);
        (0..d)
            .map(|s| {
                let acc: BigRational = (0..d)
                    .filter(|&i| self.adj[i][s] != 0)
                    .map(|i| linalg::rational_from_i128(self.adj[i][s]) * &x[i])
                    .sum();
                acc / &det
            })
            .collect()
    }

    /// Fraction of directions in the cone `{σ_s n_s·u > 0, s ∈ S}` (`S`,
    /// `σ` as bitmasks over coordinates; bit set in `sigma` means `−`).
    fn sector_fraction(&self, set: u32, sigma: u32) -> Result<f64, MvbError> {
        if let Some(v) = self.reg_cache.lock().expect("cache").get(&(set, sigma)) {
            return Ok(*v);
        }
        let normals: Vec<Vec<f64>> = (0..self.dim())
            .filter(|s| (set >> s) & 1 == 1)
            .map(|s| {
                let sign = if (sigma >> s) & 1 == 1 { -1.0 } else { 1.0 };
                self.normals[s].iter().map(|v| sign * v).collect()
            })
            .collect();
        let v = cone_fraction(&normals).ok_or(MvbError::Regularization(normals.len()))?;
        self.reg_cache
            .lock()
            .expect("cache")
            .insert((set, sigma), v);
        Ok(v)
    }

    /// `Σ_σ frac(S,σ) ∏_{s∈S} (−σ_s/2)`: the regularized product of `B_1`
    /// jumps on the coordinates in `S`.
    fn jump_product(&self, set: u32) -> Result<f64, MvbError> {
        let mut total = 0.0;
        let mut sigma = set;
        loop {
            // Enumerate all sub-masks of `set` as sign patterns.
            let minus = sigma.count_ones();
            let plus = set.count_ones() - minus;
            let value = 0.5f64.powi(set.count_ones() as i32)
                * if plus.is_multiple_of(2) { 1.0 } else { -1.0 };
            total += self.sector_fraction(set, sigma)? * value;
            if sigma == 0 {
                break;
            }
            sigma = (sigma - 1) & set;
        }
        Ok(total)
    }

    /// Direct evaluation of the periodization.
    pub fn eval_periodization(&self, x: &[f64]) -> Result<f64, MvbError> {
        let d = self.dim();
        let xr: Vec<BigRational> = x.iter().map(|v| linalg::rational_from_f64(*v)).collect();
        // Bounding box of Lᵗ[0,1]^d, shifted by −x.
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let lo: i64 = (0..d).map(|s| self.l[s][i].min(0)).sum();
                let hi: i64 = (0..d).map(|s| self.l[s][i].max(0)).sum();
                let lo = (linalg::rational_from_i64(lo) - &xr[i]).ceil().to_integer();
                let hi = (linalg::rational_from_i64(hi) - &xr[i])
                    .floor()
                    .to_integer();
                (lo.to_i64().unwrap(), hi.to_i64().unwrap())
            })
            .collect();
        let one = BigRational::from_integer(BigInt::from(1));
        let mut terms = Vec::new();
        for n in box_points(&ranges) {
            let shifted: Vec<BigRational> = (0..d)
                .map(|i| &xr[i] + linalg::rational_from_i64(n[i]))
                .collect();
            let u = self.pull_back(&shifted);
            if u.iter().any(|v| *v < BigRational::zero() || *v > one) {
                continue;
            }
            let mut set = 0u32;
            let mut sigma = 0u32;
            let mut value = 1.0;
            for (s, us) in u.iter().enumerate() {
                if us.is_zero() {
                    set |= 1 << s;
                } else if *us == one {
                    set |= 1 << s;
                    sigma |= 1 << s;
                }
                value *= poly_eval(self.j[s] as usize, linalg::rational_to_f64(us));
            }
            let weight = if set == 0 {
                1.0
            } else {
                self.sector_fraction(set, sigma)?
            };
            terms.push(weight * value);
        }
        Ok(pairwise_sum(&terms) / self.det.abs() as f64)
    }

    /// Evaluation through the Hermite normal form:
    ///
    /// ```text
    /// 𝔅_{J,L}(x) = Σ_ℓ ∏_{s: i_s=1} (1/k_s) Σ_{a=0}^{k_s−1} e^{−2πi a v_s/k_s} B_{j_s}(y_s + a/k_s)
    /// ```
    ///
    /// with `y = (L^{-1})ᵗ x`, restricted to the cosets `v` with `v_s ≡ 0
    /// (mod k_s)` whenever `j_s = 0` (other cosets contain no frequency with
    /// `(Ln)_s = 0`).
    pub fn eval_hnf(&self, x: &[f64]) -> Result<f64, MvbError> {
        let d = self.dim();
        let xr: Vec<BigRational> = x.iter().map(|v| linalg::rational_from_f64(*v)).collect();
        let y = self.pull_back(&xr);
        // Per coordinate: B_{j_s}(y_s + a/k_s) for each a, and the index of
        // the (unique) a at which a B_1 factor sits on its jump.
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut jump_at: Vec<Option<usize>> = Vec::with_capacity(d);
        for s in 0..d {
            let js = self.j[s] as usize;
            if js == 0 {
                values.push(vec![1.0]);
                jump_at.push(None);
                continue;
            }
            let ks = self.k[s];
            let ky = &y[s] * linalg::rational_from_i64(ks);
            let jump = if js == 1 && ky.is_integer() {
                let a = (-ky.to_integer()).mod_floor(&BigInt::from(ks));
                Some(a.to_usize().unwrap())
            } else {
                None
            };
            let vals = (0..ks)
                .map(|a| {
                    let z = &y[s] + BigRational::new(BigInt::from(a), BigInt::from(ks));
                    periodized_eval(js, linalg::rational_to_f64(&(&z - z.floor())))
                })
                .collect();
            values.push(vals);
            jump_at.push(jump);
        }
        let jump_set: u32 = (0..d)
            .filter(|&s| jump_at[s].is_some())
            .map(|s| 1 << s)
            .sum();
        let mut subset_weights: Vec<(u32, f64)> = Vec::new();
        let mut t = jump_set;
        loop {
            let w = if t == 0 { 1.0 } else { self.jump_product(t)? };
            subset_weights.push((t, w));
            if t == 0 {
                break;
            }
            t = (t - 1) & jump_set;
        }
        let mut total = Complex64::new(0.0, 0.0);
        for v in &self.cosets {
            if (0..d).any(|s| self.j[s] == 0 && v[s] % self.k[s] != 0) {
                continue;
            }
            // Per coordinate: the regular part of the coset sum and the
            // phase-weighted coefficient of the jump.
            let mut regular = Vec::with_capacity(d);
            let mut at_jump = Vec::with_capacity(d);
            for s in 0..d {
                if self.j[s] == 0 {
                    regular.push(Complex64::new(1.0, 0.0));
                    at_jump.push(Complex64::new(0.0, 0.0));
                    continue;
                }
                let ks = self.k[s];
                let mut reg = Complex64::new(0.0, 0.0);
                let mut jmp = Complex64::new(0.0, 0.0);
                for (a, val) in values[s].iter().enumerate() {
                    let phase = Complex64::from_polar(
                        1.0 / ks as f64,
                        -2.0 * PI * ((a as i64 * v[s]).rem_euclid(ks)) as f64 / ks as f64,
                    );
                    if jump_at[s] == Some(a) {
                        jmp = phase;
                    } else {
                        reg += phase * val;
                    }
                }
                regular.push(reg);
                at_jump.push(jmp);
            }
            for &(subset, w) in &subset_weights {
                let mut prod = Complex64::new(w, 0.0);
                for s in 0..d {
                    prod *= if (subset >> s) & 1 == 1 {
                        at_jump[s]
                    } else {
                        regular[s]
                    };
                }
                total += prod;
            }
        }
        if total.im.abs() > IMAG_TOL {
            return Err(MvbError::ImaginaryResidue(total.im));
        }
        Ok(total.re)
    }

    /// Mollified Fourier series `(−1)^{|I|} Σ_{n∈Δ(I,L)} φ̂(εn) e^{2πin·x} / (2πiLn)^J`.
    pub fn eval_fourier(&self, x: &[f64], opts: &FourierOptions) -> f64 {
        match opts.mollifier {
            Mollifier::Radial => self.fourier_radial(x, opts),
            Mollifier::Lattice => self.fourier_lattice(x, opts),
        }
    }

    fn sign_i(&self) -> f64 {
        if self.j.iter().filter(|v| **v > 0).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn fourier_radial(&self, x: &[f64], opts: &FourierOptions) -> f64 {
        let d = self.dim();
        let c = opts.effective_cutoff();
        let eps2 = opts.epsilon * opts.epsilon;
        let i = self.i();
        let mut terms = Vec::new();
        for n in box_points(&vec![(-c, c); d]) {
            let ln = linalg::matvec(&self.l, &n);
            if !ln.iter().zip(&i).all(|(m, ik)| (*m == 0) == (*ik == 0)) {
                continue;
            }
            let n2: f64 = n.iter().map(|v| (*v as f64).powi(2)).sum();
            let phase: f64 = 2.0 * PI * n.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>();
            let mut term = Complex64::from_polar((-PI * eps2 * n2).exp(), phase);
            for (m, js) in ln.iter().zip(&self.j) {
                if *js > 0 {
                    term /= Complex64::new(0.0, 2.0 * PI * *m as f64).powi(*js as i32);
                }
            }
            terms.push(term.re);
        }
        self.sign_i() * pairwise_sum(&terms)
    }

    fn fourier_lattice(&self, x: &[f64], opts: &FourierOptions) -> f64 {
        let d = self.dim();
        let c = opts.effective_cutoff();
        let eps2 = opts.epsilon * opts.epsilon;
        // y = (L^{-1})ᵗ x in floating point; m·y = n·x for m = Ln.
        let y: Vec<f64> = (0..d)
            .map(|s| (0..d).map(|i| self.normals[s][i] * x[i]).sum())
            .collect();
        // Axis sums S_s(r) over t ≡ r (mod k_s), t ≠ 0, |t| ≤ c.
        let mut axis: Vec<HashMap<i64, Complex64>> = vec![HashMap::new(); d];
        let mut total = Complex64::new(0.0, 0.0);
        for v in &self.cosets {
            let mut prod = Complex64::new(1.0, 0.0);
            for s in 0..d {
                let ks = self.k[s];
                let r = v[s].rem_euclid(ks);
                if self.j[s] == 0 {
                    if r != 0 {
                        prod = Complex64::new(0.0, 0.0);
                    }
                    continue;
                }
                let js = self.j[s] as i32;
                let ys = y[s];
                let val = *axis[s].entry(r).or_insert_with(|| {
                    let mut acc = Vec::new();
                    let start = -c + (r + c).rem_euclid(ks);
                    let mut t = start;
                    while t <= c {
                        if t != 0 {
                            let tf = t as f64;
                            let term = Complex64::from_polar(
                                (-PI * eps2 * tf * tf).exp(),
                                2.0 * PI * tf * ys,
                            ) / Complex64::new(0.0, 2.0 * PI * tf).powi(js);
                            acc.push(term);
                        }
                        t += ks;
                    }
                    // Pairwise sums of real and imaginary parts separately.
                    let re: Vec<f64> = acc.iter().map(|z| z.re).collect();
                    let im: Vec<f64> = acc.iter().map(|z| z.im).collect();
                    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
                });
                prod *= val;
            }
            total += prod;
        }
        self.sign_i() * total.re
    }
}

/// Rational-argument Lerch value
/// `L_j(x, p/q) = (2πiq)^j e^{−2πixp/q} (1/q) Σ_{a<q} e^{−2πiap/q} B_j((x+a)/q)`.
pub fn lerch_rational(j: u32, x: f64, p: i64, q: u64) -> Complex64 {
    let qf = q as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..q {
        let phase = -2.0 * PI * ((a as i64 * p).rem_euclid(q as i64)) as f64 / qf;
        acc += Complex64::from_polar(1.0, phase) * periodized_eval(j as usize, (x + a as f64) / qf);
    }
    let pre = Complex64::new(0.0, 2.0 * PI * qf).powi(j as i32)
        * Complex64::from_polar(1.0, -2.0 * PI * x * p as f64 / qf);
    pre * acc / qf
}

/// Mollified series `−Σ_{n+r≠0} e^{−πε²(n+r)²} e^{2πinx} / (n+r)^j`,
/// truncated to `|n| ≤ cutoff` (reference for [`lerch_rational`]).
pub fn lerch_series(j: u32, x: f64, r: f64, epsilon: f64, cutoff: i64) -> Complex64 {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for n in -cutoff..=cutoff {
        let t = n as f64 + r;
        if t == 0.0 {
            continue;
        }
        let z = Complex64::from_polar(
            (-PI * epsilon * epsilon * t * t).exp(),
            2.0 * PI * n as f64 * x,
        ) / Complex64::new(t, 0.0).powi(j as i32);
        re.push(z.re);
        im.push(z.im);
    }
    -Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli1d::periodized_eval as b;

    #[test]
    fn hnf_examples() {
        let (h, u) = hnf(&linalg::identity(2)).unwrap();
        assert_eq!(h, linalg::identity(2));
        assert_eq!(u, linalg::identity(2));
        let swap = vec![vec![0, 1], vec![1, 0]];
        let (h, u) = hnf(&swap).unwrap();
        assert_eq!(h, linalg::identity(2));
        assert_eq!(u, swap);
        let l = vec![vec![2, 1], vec![0, 3]];
        let (h, u) = hnf(&l).unwrap();
        assert_eq!(linalg::matmul(&h, &u), l);
        assert_eq!(h[0][0] * h[1][1], 6);
        assert_eq!(h[0][1], 0);
        assert!(0 <= h[1][0] && h[1][0] < h[1][1]);
        assert!(hnf(&[vec![1, 2], vec![2, 4]]).is_err());
    }

    #[test]
    fn coset_examples() {
        assert_eq!(cosets(&[vec![2]], &[2]).unwrap(), vec![vec![0]]);
        assert_eq!(
            cosets(&linalg::identity(2), &[1, 1]).unwrap(),
            vec![vec![0, 0]]
        );
        let h = vec![vec![1, 0], vec![1, 2]];
        let k = k_diagonal(&h);
        assert_eq!(k, vec![2, 2]);
        assert_eq!(cosets(&h, &k).unwrap().len(), 2);
    }

    #[test]
    fn identity_lattice_is_a_product() {
        let m = MvBernoulli::new(vec![1, 0], linalg::identity(2)).unwrap();
        assert_eq!(m.eval_periodization(&[0.25, 0.9]).unwrap(), -0.25);
        assert_eq!(m.eval_hnf(&[0.25, 0.9]).unwrap(), -0.25);
        let m = MvBernoulli::new(vec![1, 1], linalg::identity(2)).unwrap();
        let f = m.eval_fourier(&[0.3, 0.7], &FourierOptions::lattice(1e-3));
        assert!((f - b(1, 0.3) * b(1, 0.7)).abs() < 1e-5);
        let zero = MvBernoulli::new(vec![0, 0], linalg::identity(2)).unwrap();
        assert_eq!(
            zero.eval_fourier(&[0.1, 0.2], &FourierOptions::radial(1e-3, 5)),
            1.0
        );
    }

    #[test]
    fn scaled_line_carries_the_determinant() {
        // 𝔅_{(1),[2]}(x) = (1/2)(B_1(x/2) + B_1(x/2 + 1/2)) = B_1(x)/2.
        let m = MvBernoulli::new(vec![1], vec![vec![2]]).unwrap();
        for x in [0.1, 0.37, 0.8, 1.3] {
            let direct = 0.5 * (b(1, x / 2.0) + b(1, x / 2.0 + 0.5));
            assert!((m.eval_periodization(&[x]).unwrap() - direct).abs() < 1e-15);
            assert!((direct - 0.5 * b(1, x)).abs() < 1e-15);
            assert!((m.eval_hnf(&[x]).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn fourier_one_dimensional_example() {
        let m = MvBernoulli::new(vec![2], linalg::identity(1)).unwrap();
        // x = 0 is a kink of B_2, where Gaussian smoothing is only
        // first-order accurate: the bias is −ε/(2π) + O(ε²).
        let eps = 1e-3;
        let v = m.eval_fourier(&[0.0], &FourierOptions::radial(eps, 10_000));
        assert!((v - 1.0 / 12.0 + eps / (2.0 * PI)).abs() < 1e-6);
        let v = m.eval_fourier(&[0.0], &FourierOptions::radial(1e-5, 400_000));
        assert!((v - 1.0 / 12.0).abs() < 1e-5);
    }

    #[test]
    fn lerch_examples() {
        for x in [0.0, 0.3] {
            let v = lerch_rational(3, x, 2, 1);
            let expect = Complex64::from_polar(1.0, -2.0 * PI * 2.0 * x)
                * Complex64::new(0.0, 2.0 * PI).powi(3)
                * b(3, x);
            assert!((v - expect).norm() < 1e-12);
        }
        let v = lerch_rational(2, 0.0, 0, 1);
        assert!((v - Complex64::new(-4.0 * PI * PI / 12.0, 0.0)).norm() < 1e-12);
        let exact = lerch_rational(1, 0.0, 1, 2);
        let series = lerch_series(1, 0.0, 0.5, 1e-4, 100_000);
        assert!((exact - series).norm() < 1e-5, "{exact} vs {series}");
    }
}
