//! Euler–MacLaurin type expansions of weighted lattice sums over dilated
//! integer simplices:
//!
//! ```text
//! Σ_n ω_{τP}(x+n) q(x+n) = |det M| Σ_V Σ_I Σ_{J⊑I, |J|≤w} τ^{d−|I|−|J|}
//!                          ⟨μ(V,I,J), q_τ⟩ 𝔅_{J+I,(MD_V)ᵗ}(x − τp − τMλ_V) + R_w(x)
//! ```
//!
//! with `P = p + M·S_d` and `q_τ(y) = q(τp + τMy)`, the one-dimensional
//! Mordell form, and the coefficients `γ_k` of the even powers `N^{−2k}` in
//! weighted Riemann sums.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bases::{all_binary, BasisFamily};
use crate::bernoulli1d::periodized_eval;
use crate::field::ScalarField;
use crate::fourier::scaled_field;
use crate::geometry::{exact_point, IntegerSimplex, SolidAngleMethod};
use crate::gl;
use crate::linalg::{self, IMat};
use crate::mu::{apply_mu, default_tolerance, sub_indices, MuFunctional, Support};
use crate::mvb::MvBernoulli;
use crate::sum::pairwise_sum;
use crate::Error;

/// Largest truncation order accepted in each dimension.
pub fn max_order(d: usize) -> u32 {
    match d {
        1 => 16,
        2 => 8,
        _ => 6,
    }
}

/// One `(V, I, J)` term of an expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainTerm {
    /// Basis selector.
    pub v: Vec<u8>,
    /// Boundary pattern.
    pub i: Vec<u8>,
    /// Derivative orders.
    pub j: Vec<u32>,
    /// Exponent `d − |I| − |J|` of `τ`.
    pub tau_power: i32,
    /// `⟨μ(V,I,J), q_τ⟩`.
    pub coefficient: f64,
    /// The periodized Bernoulli factor.
    pub bernoulli: f64,
    /// Full contribution of the term to the expansion.
    pub contribution: f64,
}

/// Expansion terms with the brute-force left-hand side and the residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    /// Non-zero terms.
    pub main_terms: Vec<MainTerm>,
    /// Sum of the terms.
    pub total: f64,
    /// Direct evaluation of the weighted lattice sum.
    pub lhs_bruteforce: f64,
    /// `lhs_bruteforce − total`.
    pub residual: f64,
}

impl ExpansionReport {
    fn new(mut main_terms: Vec<MainTerm>, lhs: f64) -> Self {
        main_terms.retain(|t| t.contribution != 0.0);
        let contributions: Vec<f64> = main_terms.iter().map(|t| t.contribution).collect();
        let total = pairwise_sum(&contributions);
        ExpansionReport {
            main_terms,
            total,
            lhs_bruteforce: lhs,
            residual: lhs - total,
        }
    }
}

fn check_order(d: usize, w: u32) -> Result<(), Error> {
    if w > max_order(d) {
        return Err(Error::InvalidArgument(format!(
            "order w = {w} exceeds the cap {} for d = {d}",
            max_order(d)
        )));
    }
    Ok(())
}

/// Mordell's expansion on an interval:
/// `Σ_n ω_{[a,b]}(x+n) q(x+n) = ∫_a^b q + Σ_{j≤w} (q^{(j)}(b) B_{j+1}(x−b) − q^{(j)}(a) B_{j+1}(x−a)) + R`.
pub fn mordell_expand_1d(
    q: &ScalarField,
    a: f64,
    b: f64,
    x: f64,
    w: u32,
) -> Result<ExpansionReport, Error> {
    if q.dim() != 1 || a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::InvalidArgument(
            "need a one-dimensional field and a < b".into(),
        ));
    }
    let q = q.with_max_order(q.max_order().max(w + 1));
    let tape = q.partial_tape(&[0])?;
    let panels = 1 + (b - a).ceil() as usize;
    let integral = gl::integrate_interval_adaptive(|t| tape.eval(&[t]), a, b, panels, 1e-14)?;
    let mut terms = vec![MainTerm {
        v: vec![1],
        i: vec![0],
        j: vec![0],
        tau_power: 1,
        coefficient: integral,
        bernoulli: 1.0,
        contribution: integral,
    }];
    for j in 0..=w {
        for (v, end, sign) in [(1u8, a, -1.0), (2u8, b, 1.0)] {
            let c = sign * q.eval_partial(&[j], &[end])?;
            let bern = periodized_eval((j + 1) as usize, x - end);
            terms.push(MainTerm {
                v: vec![v],
                i: vec![1],
                j: vec![j],
                tau_power: -(j as i32),
                coefficient: c,
                bernoulli: bern,
                contribution: c * bern,
            });
        }
    }
    // Left-hand side: points x + n in [a, b], weight 1/2 at the endpoints.
    let (xa, aa, ba) = (exact_point(&[x]), exact_point(&[a]), exact_point(&[b]));
    let lo = (&aa[0] - &xa[0]).ceil().to_integer();
    let hi = (&ba[0] - &xa[0]).floor().to_integer();
    let mut values = Vec::new();
    let mut n = lo;
    while n <= hi {
        let pt = &xa[0] + num_rational::BigRational::from_integer(n.clone());
        let weight = if pt == aa[0] || pt == ba[0] { 0.5 } else { 1.0 };
        values.push(weight * tape.eval(&[linalg::rational_to_f64(&pt)]));
        n += 1;
    }
    Ok(ExpansionReport::new(terms, pairwise_sum(&values)))
}

/// The remainder `−∫_a^b q^{(w+1)}(y) B_{w+1}(x−y) dy` of Mordell's
/// expansion, integrated piecewise between the breakpoints of `B_{w+1}`.
pub fn mordell_remainder(q: &ScalarField, a: f64, b: f64, x: f64, w: u32) -> Result<f64, Error> {
    let q = q.with_max_order(q.max_order().max(w + 1));
    let tape = q.partial_tape(&[w + 1])?;
    let mut cuts = vec![a];
    let mut k = (a - x).floor() + 1.0;
    while x + k < b {
        if x + k > a {
            cuts.push(x + k);
        }
        k += 1.0;
    }
    cuts.push(b);
    let mut parts = Vec::new();
    for win in cuts.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let mid = 0.5 * (lo + hi);
        // Integer translate so the Bernoulli polynomial is evaluated on one branch.
        let shift = (x - mid).floor();
        let f = |y: f64| {
            tape.eval(&[y]) * crate::bernoulli1d::poly_eval((w + 1) as usize, x - y - shift)
        };
        parts.push(gl::integrate_interval_adaptive(f, lo, hi, 1, 1e-14)?);
    }
    Ok(-pairwise_sum(&parts))
}

/// Cached `MvBernoulli` evaluators keyed by `(J+I, V)`.
struct BernoulliCache {
    family: BasisFamily,
    m: IMat,
    cache: HashMap<(Vec<u32>, Vec<u8>), MvBernoulli>,
}

impl BernoulliCache {
    fn new(simplex: &IntegerSimplex) -> Result<Self, Error> {
        Ok(BernoulliCache {
            family: BasisFamily::build(simplex.dim())?,
            m: simplex.m().clone(),
            cache: HashMap::new(),
        })
    }

    fn get(&mut self, ji: &[u32], v: &[u8]) -> Result<&MvBernoulli, Error> {
        let key = (ji.to_vec(), v.to_vec());
        if !self.cache.contains_key(&key) {
            let l = linalg::transpose(&linalg::matmul(&self.m, &self.family.d_matrix(v)?));
            self.cache
                .insert(key.clone(), MvBernoulli::new(ji.to_vec(), l)?);
        }
        Ok(&self.cache[&key])
    }
}

fn terms_for(d: usize, w: u32, max_total: Option<u32>) -> Vec<MuFunctional> {
    let mut out = Vec::new();
    for v in all_binary(d, &[1, 2]) {
        for i in all_binary(d, &[0, 1]) {
            let bound = match max_total {
                Some(t) => {
                    let ni: u32 = i.iter().map(|x| u32::from(*x)).sum();
                    if ni > t {
                        continue;
                    }
                    (t - ni).min(w)
                }
                None => w,
            };
            for j in sub_indices(&i, bound) {
                let mu = MuFunctional::new(v.clone(), i.clone(), j).expect("J ⊑ I by construction");
                if mu.support_filter() == Support::NonzeroPossible {
                    out.push(mu);
                }
            }
        }
    }
    out
}

fn ji(mu: &MuFunctional) -> Vec<u32> {
    mu.j()
        .iter()
        .zip(mu.i())
        .map(|(j, i)| j + u32::from(*i))
        .collect()
}

/// The expansion of `Σ_n ω_{τP}(x+n) q(x+n)` truncated at `|J| ≤ w`, with
/// the left-hand side evaluated by exact enumeration.
pub fn expand_main(
    simplex: &IntegerSimplex,
    q: &ScalarField,
    tau: f64,
    x: &[f64],
    w: u32,
) -> Result<ExpansionReport, Error> {
    let d = simplex.dim();
    if d > 3 || x.len() != d || q.dim() != d {
        return Err(Error::InvalidArgument(
            "expand_main needs matching dimensions d ≤ 3".into(),
        ));
    }
    check_order(d, w)?;
    let q_tau = scaled_field(simplex, q, tau)?.with_max_order(q.max_order().max(w + d as u32 + 1));
    let tol = default_tolerance(d);
    let jobs = terms_for(d, w, None);
    let coefficients: Vec<f64> = jobs
        .par_iter()
        .map(|mu| apply_mu(mu, &q_tau, tol))
        .collect::<Result<_, Error>>()?;
    let mut cache = BernoulliCache::new(simplex)?;
    let abs_det = simplex.det().unsigned_abs() as f64;
    let mut terms = Vec::new();
    for (mu, c) in jobs.iter().zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        let lam = cache.family.lambda(mu.v())?;
        let m_lam = linalg::matvec(simplex.m(), &lam);
        let arg: Vec<f64> = (0..d)
            .map(|k| x[k] - tau * (simplex.p()[k] + m_lam[k]) as f64)
            .collect();
        let bern = cache.get(&ji(mu), mu.v())?.eval_hnf(&arg)?;
        let power = d as i32 - ji(mu).iter().sum::<u32>() as i32;
        terms.push(MainTerm {
            v: mu.v().to_vec(),
            i: mu.i().to_vec(),
            j: mu.j().to_vec(),
            tau_power: power,
            coefficient: c,
            bernoulli: bern,
            contribution: abs_det * tau.powi(power) * c * bern,
        });
    }
    let lhs = lattice_sum(simplex, q, tau, x)?;
    Ok(ExpansionReport::new(terms, lhs))
}

/// `Σ_n ω_{τP}(x+n) q(x+n)` by exact enumeration of the shifted lattice.
pub fn lattice_sum(
    simplex: &IntegerSimplex,
    q: &ScalarField,
    tau: f64,
    x: &[f64],
) -> Result<f64, Error> {
    let d = simplex.dim();
    let xr = exact_point(x);
    let points = simplex.shifted_points(&xr, &linalg::rational_from_f64(tau));
    let tape = q.partial_tape(&vec![0; d])?;
    let values: Vec<f64> = points
        .par_iter()
        .map(|(n, pattern)| {
            let weight = simplex.pattern_weight(*pattern, SolidAngleMethod::ExactLowDim)?;
            let y: Vec<f64> = (0..d).map(|k| x[k] + n[k] as f64).collect();
            Ok(weight * tape.eval(&y))
        })
        .collect::<Result<_, Error>>()?;
    Ok(pairwise_sum(&values))
}

/// `γ_k` and the order-`r` blocks `|det M| Σ_{|I+J|=r} ⟨μ, f(p+M·)⟩ 𝔅_{J+I,(MD_V)ᵗ}(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    /// `blocks[r]` for `r = 0..=w`; `blocks[0]` is the integral.
    pub blocks: Vec<f64>,
    /// `γ_k = blocks[2k]` for `1 ≤ k ≤ w/2`.
    pub gamma: Vec<f64>,
}

/// Tolerance for the vanishing of odd-order blocks.
pub const ODD_BLOCK_TOL: f64 = 1e-9;

/// Coefficients `γ_k` of `S_N(f, P) = ∫_P f + Σ_k γ_k N^{−2k} + O(N^{−w−1})`.
/// Odd-order blocks must vanish; a non-zero odd block is reported as a
/// numerical failure.
pub fn gamma_coefficients(
    simplex: &IntegerSimplex,
    f: &ScalarField,
    w: u32,
) -> Result<GammaReport, Error> {
    let d = simplex.dim();
    if d > 3 || f.dim() != d {
        return Err(Error::InvalidArgument(
            "gamma_coefficients needs d ≤ 3".into(),
        ));
    }
    check_order(d, w)?;
    let g = scaled_field(simplex, f, 1.0)?.with_max_order(f.max_order().max(w + d as u32 + 1));
    let tol = default_tolerance(d);
    let jobs = terms_for(d, w, Some(w));
    let coefficients: Vec<f64> = jobs
        .par_iter()
        .map(|mu| apply_mu(mu, &g, tol))
        .collect::<Result<_, Error>>()?;
    let mut cache = BernoulliCache::new(simplex)?;
    let abs_det = simplex.det().unsigned_abs() as f64;
    let mut parts: Vec<Vec<f64>> = vec![Vec::new(); w as usize + 1];
    let mut scale: Vec<f64> = vec![0.0; w as usize + 1];
    for (mu, c) in jobs.iter().zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        let order = ji(mu).iter().sum::<u32>() as usize;
        let bern = cache.get(&ji(mu), mu.v())?.eval_hnf(&vec![0.0; d])?;
        parts[order].push(abs_det * c * bern);
        scale[order] = scale[order].max((abs_det * c).abs());
    }
    let blocks: Vec<f64> = parts.iter().map(|p| pairwise_sum(p)).collect();
    for r in (1..=w as usize).step_by(2) {
        if blocks[r].abs() > ODD_BLOCK_TOL * scale[r].max(1.0) {
            return Err(Error::Numerical(format!(
                "odd block of order {r} is {:e}",
                blocks[r]
            )));
        }
    }
    let gamma = (1..=w as usize / 2).map(|k| blocks[2 * k]).collect();
    Ok(GammaReport { blocks, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::parse;
    use std::f64::consts::E;

    #[test]
    fn mordell_exponential() {
        let q = parse("exp(x1)", 1).unwrap();
        for w in 1..=12 {
            let r = mordell_expand_1d(&q, 0.0, 1.0, 0.0, w).unwrap();
            assert!((r.lhs_bruteforce - (1.0 + E) / 2.0).abs() < 1e-15);
            let bound = 5.0 * (2.0 * std::f64::consts::PI).powi(-(w as i32) - 1) * E;
            assert!(r.residual.abs() <= bound, "w={w}: {}", r.residual);
        }
    }

    #[test]
    fn mordell_remainder_matches_residual() {
        let q = parse("exp(x1/2) * sin(x1)", 1).unwrap();
        for w in [0, 1, 4] {
            let r = mordell_expand_1d(&q, -0.7, 2.3, 0.25, w).unwrap();
            let rem = mordell_remainder(&q, -0.7, 2.3, 0.25, w).unwrap();
            assert!(
                (r.residual - rem).abs() < 1e-12,
                "w={w}: {} vs {rem}",
                r.residual
            );
        }
    }

    #[test]
    fn mordell_periodic_counterexample() {
        let q = parse("cos(6.283185307179586476925287*x1)", 1).unwrap();
        for w in [2, 6, 10] {
            let r = mordell_expand_1d(&q, 0.0, 1.0, 0.0, w).unwrap();
            assert!(r.total.abs() < 1e-12);
            assert!((r.lhs_bruteforce - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mordell_polynomials_are_exact() {
        let q = parse("x1^3 - 2*x1 + 1", 1).unwrap();
        let r = mordell_expand_1d(&q, -1.5, 2.25, 0.1, 3).unwrap();
        assert!(r.residual.abs() < 1e-12);
    }

    #[test]
    fn unit_interval_reduces_to_classical_form() {
        let s = IntegerSimplex::standard(1);
        let q = parse("exp(x1/3)", 1).unwrap();
        let r = expand_main(&s, &q, 3.0, &[0.0], 6).unwrap();
        for t in &r.main_terms {
            if t.i == vec![1] {
                assert_eq!(t.j[0] % 2, 1, "only even Bernoulli numbers survive: {t:?}");
            }
        }
        assert!(r.residual.abs() < 1e-8, "{}", r.residual);
    }

    #[test]
    fn constant_on_triangle() {
        let s = IntegerSimplex::standard(2);
        let one = parse("1", 2).unwrap();
        for w in [2, 3] {
            let r = expand_main(&s, &one, 2.0, &[0.0, 0.0], w).unwrap();
            assert!((r.lhs_bruteforce - 2.0).abs() < 1e-15);
            assert!((r.total - 2.0).abs() < 1e-8, "{}", r.total);
        }
    }

    #[test]
    fn integral_block() {
        let s = IntegerSimplex::from_columns(vec![1, 0], &[vec![2, 1], vec![1, 3]]).unwrap();
        let q = parse("exp((x1 + x2)/7)", 2).unwrap();
        let r = expand_main(&s, &q, 1.5, &[0.2, 0.4], 2).unwrap();
        let zero: Vec<&MainTerm> = r
            .main_terms
            .iter()
            .filter(|t| t.i.iter().all(|x| *x == 0))
            .collect();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].v, vec![1, 1]);
        let integral = crate::fourier::oracle_ft(&s, &q, 1.5, &[0.0, 0.0], 1e-14)
            .unwrap()
            .re;
        assert!((zero[0].contribution - integral).abs() < 1e-10 * integral);
    }

    #[test]
    fn gamma_examples() {
        let seg = IntegerSimplex::standard(1);
        let g = gamma_coefficients(&seg, &parse("x1^2", 1).unwrap(), 2).unwrap();
        assert!((g.gamma[0] - 1.0 / 6.0).abs() < 1e-14);
        let tri = IntegerSimplex::from_columns(vec![1, 2], &[vec![1, 2], vec![3, -1]]).unwrap();
        // Affine f: the N^{-2} term survives (vertex terms), higher ones vanish,
        // and S_N − ∫f = γ_1 N^{-2} exactly.
        let f = parse("3*x1 - x2 + 2", 2).unwrap();
        let g = gamma_coefficients(&tri, &f, 4).unwrap();
        assert!(g.gamma[1].abs() < 1e-12);
        let complex = crate::geometry::SimplicialComplex::single(tri.clone());
        let s8 = crate::geometry::weighted_sum(
            &complex,
            &|x: &[f64]| f.eval(x),
            8,
            SolidAngleMethod::ExactLowDim,
        )
        .unwrap();
        assert!(((s8 - g.blocks[0]) * 64.0 - g.gamma[0]).abs() < 1e-10);
        // Constant f in the plane: no correction at all.
        let g = gamma_coefficients(&tri, &parse("1", 2).unwrap(), 4).unwrap();
        assert!(g.gamma.iter().all(|x| x.abs() < 1e-12), "{:?}", g.gamma);
    }
}
