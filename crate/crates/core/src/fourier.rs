//! Asymptotic expansion of the Fourier transform of `g·χ_P` over a simplex.
//!
//! For the standard simplex and `ξ` in the cone `Q(θ)`,
//!
//! ```text
//! ∫_{S_d} g(y) e^{−2πi y·ξ} dy ≈ Σ_V Σ_{|J|≤w} (−1)^{|I|} ⟨μ(V,I,J), g⟩ e^{−2πiλ_V·ξ}
//!                                   / ∏_{k: i_k=1} (2πi b_k·ξ)^{j_k+1},
//! ```
//!
//! with `I = I_{V,θ}` and `B_V = {b_k}`.  For `τP`, `P = p + M·S_d`, the
//! change of variables `x = τp + τMy` reduces to the standard case applied
//! to `q_{τ}(y) = q(τp + τMy)` at `η = τMᵗξ`, with prefactor `τ^d |det M|
//! e^{−2πiτp·ξ}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bases::{classify_pullback, i_multiindex, BasisFamily, Theta};
use crate::field::ScalarField;
use crate::geometry::{exact_point, IntegerSimplex};
use crate::gl::{self, NonConvergence, ORDER_SEQUENCE};
use crate::linalg;
use crate::mu::{apply_mu, default_tolerance, sub_indices, MuFunctional, Support};
use crate::Error;

/// Largest `max_k |(τMᵗξ)_k|` accepted by [`oracle_ft`].
pub const ORACLE_OSCILLATION_CAP: f64 = 200.0;

/// One term of a [`FourierExpansion`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionTerm {
    /// Basis selector `V`.
    pub v: Vec<u8>,
    /// `I_{V,θ}`.
    pub i: Vec<u8>,
    /// Derivative orders `J ⊑ I`.
    pub j: Vec<u32>,
    /// `(−1)^{|I|} ⟨μ(V,I,J), q_τ⟩`.
    pub coefficient: f64,
    /// Phase vector `λ_V` (standard coordinates).
    pub lambda: Vec<i64>,
    /// Basis `B_V` (standard coordinates).
    pub basis: Vec<Vec<i64>>,
}

/// Truncated expansion of `∫_{τP} q(x) e^{−2πix·ξ} dx` for `ξ ∈ Q_M(θ)`.
#[derive(Debug, Clone, Serialize)]
pub struct FourierExpansion {
    #[serde(skip)]
    family: BasisFamily,
    theta: Theta,
    w: u32,
    tau: f64,
    p: Vec<i64>,
    m: Vec<Vec<i64>>,
    prefactor: f64,
    terms: Vec<ExpansionTerm>,
}

impl FourierExpansion {
    /// The cone label.
    pub fn theta(&self) -> Theta {
        self.theta
    }

    /// Truncation order.
    pub fn w(&self) -> u32 {
        self.w
    }

    /// `τ^d |det M|`.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Non-zero terms.
    pub fn terms(&self) -> &[ExpansionTerm] {
        &self.terms
    }

    /// Whether `ξ` lies in the cone the expansion was built for.
    pub fn accepts(&self, xi: &[f64]) -> bool {
        xi.len() == self.p.len()
            && classify_pullback(&self.family, &self.m, &exact_point(xi)) == self.theta
    }

    /// Evaluates the expansion at `ξ`; rejects `ξ` outside the cone.
    pub fn eval(&self, xi: &[f64]) -> Result<Complex64, Error> {
        if !self.accepts(xi) {
            return Err(Error::InvalidArgument(format!(
                "frequency {xi:?} does not lie in the cone of this expansion"
            )));
        }
        let d = self.p.len();
        // η = τ Mᵗ ξ: frequencies seen by the standard simplex.
        let eta: Vec<f64> = (0..d)
            .map(|j| self.tau * (0..d).map(|i| self.m[i][j] as f64 * xi[i]).sum::<f64>())
            .collect();
        let dot = |a: &[i64], b: &[f64]| a.iter().zip(b).map(|(x, y)| *x as f64 * y).sum::<f64>();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let mut total = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut z = Complex64::from_polar(t.coefficient, -2.0 * PI * dot(&t.lambda, &eta));
            for k in 0..d {
                if t.i[k] == 1 {
                    z /= (two_pi_i * dot(&t.basis[k], &eta)).powi(t.j[k] as i32 + 1);
                }
            }
            total += z;
        }
        let shift = self.tau * dot(&self.p, xi);
        Ok(Complex64::from_polar(self.prefactor, -2.0 * PI * shift) * total)
    }
}

/// Expansion over the standard simplex.
pub fn expand_standard(g: &ScalarField, theta: Theta, w: u32) -> Result<FourierExpansion, Error> {
    expand_general(&IntegerSimplex::standard(g.dim()), g, 1.0, theta, w)
}

/// Expansion over `τP` for an integer simplex `P = p + M·S_d`.
pub fn expand_general(
    simplex: &IntegerSimplex,
    q: &ScalarField,
    tau: f64,
    theta: Theta,
    w: u32,
) -> Result<FourierExpansion, Error> {
    let d = simplex.dim();
    if q.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "field of dimension {} on a {d}-simplex",
            q.dim()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau = {tau}")));
    }
    let family = BasisFamily::build(d)?;
    let q_tau = scaled_field(simplex, q, tau)?;
    let tol = default_tolerance(d);
    let mut jobs = Vec::new();
    for v in family.all_v() {
        let i = i_multiindex(&family, &v, &theta)?;
        for j in sub_indices(&i, w) {
            let mu = MuFunctional::new(v.clone(), i.clone(), j)?;
            if mu.support_filter() == Support::NonzeroPossible {
                jobs.push(mu);
            }
        }
    }
    let coefficients: Vec<f64> = jobs
        .par_iter()
        .map(|mu| apply_mu(mu, &q_tau, tol))
        .collect::<Result<_, Error>>()?;
    let mut terms = Vec::new();
    for (mu, c) in jobs.into_iter().zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        let sign = if mu.i().iter().filter(|x| **x == 1).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        terms.push(ExpansionTerm {
            lambda: family.lambda(mu.v())?,
            basis: family.basis(mu.v())?.to_vec(),
            v: mu.v().to_vec(),
            i: mu.i().to_vec(),
            j: mu.j().to_vec(),
            coefficient: sign * c,
        });
    }
    Ok(FourierExpansion {
        family,
        theta,
        w,
        tau,
        p: simplex.p().to_vec(),
        m: simplex.m().clone(),
        prefactor: tau.powi(d as i32) * simplex.det().unsigned_abs() as f64,
        terms,
    })
}

/// `q_τ(y) = q(τp + τMy)`, with derivative headroom for the expansion.
pub fn scaled_field(
    simplex: &IntegerSimplex,
    q: &ScalarField,
    tau: f64,
) -> Result<ScalarField, Error> {
    let t = linalg::rational_from_f64(tau);
    let a: Vec<Vec<_>> = simplex
        .m()
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| &t * linalg::rational_from_i64(*x))
                .collect()
        })
        .collect();
    let b: Vec<_> = simplex
        .p()
        .iter()
        .map(|x| &t * linalg::rational_from_i64(*x))
        .collect();
    Ok(q.compose_affine(&a, &b)?)
}

/// Direct evaluation of `∫_{τP} q(x) e^{−2πix·ξ} dx` by a collapsed
/// Gauss–Legendre rule, with panels scaled to the number of oscillations
/// and node counts doubled until two successive values agree to `tol`
/// (relative to `max(1, |I|)`).
pub fn oracle_ft(
    simplex: &IntegerSimplex,
    q: &ScalarField,
    tau: f64,
    xi: &[f64],
    tol: f64,
) -> Result<Complex64, Error> {
    let d = simplex.dim();
    if xi.len() != d || q.dim() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let eta: Vec<f64> = (0..d)
        .map(|j| {
            tau * (0..d)
                .map(|i| simplex.m()[i][j] as f64 * xi[i])
                .sum::<f64>()
        })
        .collect();
    let osc = eta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if osc > ORACLE_OSCILLATION_CAP {
        return Err(Error::InvalidArgument(format!(
            "oscillation {osc} exceeds the oracle cap {ORACLE_OSCILLATION_CAP}"
        )));
    }
    let panels = 1 + osc.ceil() as usize;
    let shift: f64 = tau
        * simplex
            .p()
            .iter()
            .zip(xi)
            .map(|(p, x)| *p as f64 * x)
            .sum::<f64>();
    let prefactor = tau.powi(d as i32) * simplex.det().unsigned_abs() as f64;
    let tape = q.partial_tape(&vec![0; d])?;
    let point = |y: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| {
                tau * (simplex.p()[i] as f64
                    + (0..d).map(|k| simplex.m()[i][k] as f64 * y[k]).sum::<f64>())
            })
            .collect()
    };
    let integrate = |n: usize| -> Complex64 {
        let rule = gl::simplex_rule(d, n, panels);
        let (re, im): (Vec<f64>, Vec<f64>) = rule
            .points
            .par_iter()
            .zip(&rule.weights)
            .map(|(y, w)| {
                let phase = -2.0 * PI * y.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>();
                let z = Complex64::from_polar(w * tape.eval(&point(y)), phase);
                (z.re, z.im)
            })
            .unzip();
        Complex64::new(crate::sum::pairwise_sum(&re), crate::sum::pairwise_sum(&im))
    };
    let cap = if d >= 3 { 4 } else { ORDER_SEQUENCE.len() - 1 };
    let mut prev = integrate(ORDER_SEQUENCE[0]);
    let mut diff = f64::INFINITY;
    for &n in &ORDER_SEQUENCE[1..cap] {
        let cur = integrate(n);
        diff = (cur - prev).norm();
        if diff <= tol * cur.norm().max(1.0) {
            return Ok(Complex64::from_polar(prefactor, -2.0 * PI * shift) * cur);
        }
        prev = cur;
    }
    Err(NonConvergence {
        difference: diff,
        tolerance: tol,
        order: ORDER_SEQUENCE[cap - 1],
    }
    .into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::classify_frequency;
    use crate::field::parse;

    fn theta_of(d: usize, xi: &[f64]) -> Theta {
        classify_frequency(&BasisFamily::build(d).unwrap(), &exact_point(xi))
    }

    #[test]
    fn one_dimensional_examples() {
        let one = parse("1", 1).unwrap();
        let e = expand_standard(&one, theta_of(1, &[0.5]), 3).unwrap();
        let expect =
            (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -PI)) / Complex64::new(0.0, PI);
        assert!((e.eval(&[0.5]).unwrap() - expect).norm() < 1e-15);
        let g = parse("exp(x1)", 1).unwrap();
        let e = expand_standard(&g, theta_of(1, &[0.0]), 4).unwrap();
        assert_eq!(e.terms().len(), 1);
        assert!((e.eval(&[0.0]).unwrap().re - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        assert!(e.eval(&[0.5]).is_err());
    }

    #[test]
    fn interior_bump_has_no_boundary_terms() {
        let w = 3;
        let g = parse("(x1*x2*(1 - x1 - x2))^4", 2).unwrap();
        let e = expand_standard(&g, theta_of(2, &[0.3, 0.7]), w).unwrap();
        assert!(e.terms().iter().all(|t| t.coefficient.abs() < 1e-13));
    }

    #[test]
    fn scaling_identity() {
        let one = parse("1", 2).unwrap();
        let xi = [0.3, 0.7];
        let sq = IntegerSimplex::standard(2);
        let general = expand_general(&sq, &one, 2.0, theta_of(2, &xi), 2).unwrap();
        let standard = expand_standard(&one, theta_of(2, &xi), 2).unwrap();
        let lhs = general.eval(&xi).unwrap();
        let rhs = standard.eval(&[0.6, 1.4]).unwrap() * 4.0;
        assert!((lhs - rhs).norm() < 1e-14);
        let oracle = oracle_ft(&sq, &one, 2.0, &xi, 1e-13).unwrap();
        assert!((lhs - oracle).norm() < 1e-12);
    }

    #[test]
    fn determinant_prefactor() {
        let s = IntegerSimplex::from_columns(vec![0, 0], &[vec![1, 1], vec![-1, 2]]).unwrap();
        let one = parse("1", 2).unwrap();
        let e = expand_general(&s, &one, 2.0, theta_of(2, &[0.0, 0.0]), 1).unwrap();
        assert_eq!(e.prefactor(), 12.0);
        assert!((e.eval(&[0.0, 0.0]).unwrap().re - 6.0).abs() < 1e-13);
    }

    #[test]
    fn oracle_examples() {
        let one = parse("1", 1).unwrap();
        let seg = IntegerSimplex::standard(1);
        assert!(oracle_ft(&seg, &one, 1.0, &[3.0], 1e-13).unwrap().norm() < 1e-14);
        let one2 = parse("1", 2).unwrap();
        let tri = IntegerSimplex::standard(2);
        assert!((oracle_ft(&tri, &one2, 1.0, &[0.0, 0.0], 1e-13).unwrap().re - 0.5).abs() < 1e-15);
        let e = parse("exp(x1 + x2)", 2).unwrap();
        assert!((oracle_ft(&tri, &e, 1.0, &[0.0, 0.0], 1e-13).unwrap().re - 1.0).abs() < 1e-14);
        assert!(oracle_ft(&tri, &e, 1.0, &[500.0, 0.0], 1e-13).is_err());
    }
}
