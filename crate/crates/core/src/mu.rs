//! Integro-differential functionals `μ(V,I,J) = T_1^{v_1,i_1,j_1} ∘ … ∘ T_d^{v_d,i_d,j_d}`.
//!
//! Each `T_h` maps a function of `(x_1, …, x_h)` to a function of
//! `x′ = (x_1, …, x_{h−1})`:
//!
//! ```text
//! T_h^{1,0,0} g(x′) = ∫_0^{1−Σx′} g(x′, t) dt
//! T_h^{2,0,0} g(x′) = 0
//! T_h^{1,1,j} g(x′) = −∂_h^j g(x′, 0)
//! T_h^{2,1,j} g(x′) = ∂_h^j g(x′, 1 − Σx′)
//! ```
//!
//! Intermediate functions are kept exact as sums of [`RestrictedTerm`]s,
//! `c · ∫_{(1−Σx′)·S_m} ∂^α g(A (x′, p) + b) dp`, a family closed under
//! differentiation in the surviving variables (chain rule on `A` plus a
//! boundary term from the moving upper limit).  Only the final `m`-fold
//! integrals over standard simplices are evaluated numerically.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::ScalarField;
use crate::gl;
use crate::linalg::IMat;
use crate::Error;

/// Invalid functional parameters.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MuError {
    /// `V`, `I`, `J` have different lengths or out-of-range entries.
    #[error("invalid multi-indices: {0}")]
    Shape(String),
    /// `j_h > 0` while `i_h = 0`.
    #[error("j_{level} = {j} but i_{level} = 0")]
    NotSubordinate {
        /// Level (1-based).
        level: usize,
        /// The offending order.
        j: u32,
    },
    /// `apply_t` called at a level that does not match the terms.
    #[error("terms depend on {found} variables, level {level} expects {level}")]
    Level {
        /// Level (1-based).
        level: usize,
        /// Number of surviving variables of the terms.
        found: usize,
    },
}

/// `coefficient · ∫_{(1−Σx′)·S_m} ∂^α g(A (x′, p) + b) dp`, a function of the
/// `surviving` variables `x′`; the columns of `A` are the surviving
/// variables followed by the `pending` integration variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RestrictedTerm {
    /// Integer coefficient.
    pub coefficient: i64,
    /// Derivative order on the base field.
    pub alpha: Vec<u32>,
    /// `d × (surviving + pending)` integer matrix.
    pub a: IMat,
    /// Offset in `ℤ^d`.
    pub b: Vec<i64>,
    /// Number of surviving variables.
    pub surviving: usize,
    /// Number of pending integration variables.
    pub pending: usize,
}

impl RestrictedTerm {
    /// The base field itself, `g(x)` on `ℝ^d`.
    pub fn pristine(d: usize) -> Self {
        RestrictedTerm {
            coefficient: 1,
            alpha: vec![0; d],
            a: crate::linalg::identity(d),
            b: vec![0; d],
            surviving: d,
            pending: 0,
        }
    }

    fn key(&self) -> (Vec<u32>, IMat, Vec<i64>, usize, usize) {
        (
            self.alpha.clone(),
            self.a.clone(),
            self.b.clone(),
            self.surviving,
            self.pending,
        )
    }

    fn drop_column(&mut self, col: usize) {
        for row in self.a.iter_mut() {
            row.remove(col);
        }
    }

    /// Substitutes `y_col = 1 − Σ_{k<limit, k≠col} y_k` where `limit`
    /// ranges over the surviving variables and the pending ones before
    /// `col`, then drops the column.
    fn fold_column(&mut self, col: usize) {
        let d = self.b.len();
        for r in 0..d {
            let v = self.a[r][col];
            if v == 0 {
                continue;
            }
            self.b[r] += v;
            for c in 0..self.a[r].len() {
                if c != col {
                    self.a[r][c] -= v;
                }
            }
        }
        self.drop_column(col);
    }

    /// `∂/∂x_c` of the term, `c` a surviving variable.
    pub fn differentiate(&self, c: usize) -> Vec<RestrictedTerm> {
        assert!(
            c < self.surviving,
            "differentiation in a non-surviving variable"
        );
        let mut out = Vec::new();
        for k in 0..self.alpha.len() {
            let factor = self.a[k][c];
            if factor != 0 {
                let mut t = self.clone();
                t.coefficient *= factor;
                t.alpha[k] += 1;
                out.push(t);
            }
        }
        if self.pending > 0 {
            // d/ds ∫_{s·S_m} G = ∫_{s·S_{m−1}} G(…, p_m = s − Σp_{<m}), ds/dx_c = −1.
            let mut t = self.clone();
            t.coefficient = -t.coefficient;
            t.fold_column(t.surviving + t.pending - 1);
            t.pending -= 1;
            out.push(t);
        }
        out
    }
}

/// Adds up like terms and drops zeros.
pub fn merge(terms: Vec<RestrictedTerm>) -> Vec<RestrictedTerm> {
    let mut acc: BTreeMap<_, i64> = BTreeMap::new();
    for t in terms {
        *acc.entry(t.key()).or_insert(0) += t.coefficient;
    }
    acc.into_iter()
        .filter(|(_, c)| *c != 0)
        .map(
            |((alpha, a, b, surviving, pending), coefficient)| RestrictedTerm {
                coefficient,
                alpha,
                a,
                b,
                surviving,
                pending,
            },
        )
        .collect()
}

fn differentiate_all(terms: Vec<RestrictedTerm>, c: usize, times: u32) -> Vec<RestrictedTerm> {
    let mut cur = terms;
    for _ in 0..times {
        cur = merge(cur.iter().flat_map(|t| t.differentiate(c)).collect());
    }
    cur
}

/// Applies `T_h^{v,i,j}` (`h` is 1-based) to terms in `h` surviving variables.
pub fn apply_t(
    h: usize,
    v: u8,
    i: u8,
    j: u32,
    terms: Vec<RestrictedTerm>,
) -> Result<Vec<RestrictedTerm>, MuError> {
    if !(v == 1 || v == 2) || i > 1 {
        return Err(MuError::Shape(format!("(v, i) = ({v}, {i})")));
    }
    if i == 0 && j > 0 {
        return Err(MuError::NotSubordinate { level: h, j });
    }
    if let Some(t) = terms.iter().find(|t| t.surviving != h) {
        return Err(MuError::Level {
            level: h,
            found: t.surviving,
        });
    }
    let col = h - 1;
    Ok(match (v, i) {
        (2, 0) => Vec::new(),
        (1, 0) => terms
            .into_iter()
            .map(|mut t| {
                // The last surviving column becomes the first pending one.
                t.surviving -= 1;
                t.pending += 1;
                t
            })
            .collect(),
        (1, _) => {
            let mut out = differentiate_all(terms, col, j);
            for t in out.iter_mut() {
                t.coefficient = -t.coefficient;
                t.drop_column(col);
                t.surviving -= 1;
            }
            merge(out)
        }
        _ => {
            // x_h = 1 − Σx′ collapses the integration region to a point.
            let mut out = differentiate_all(terms, col, j);
            out.retain(|t| t.pending == 0);
            for t in out.iter_mut() {
                t.fold_column(col);
                t.surviving -= 1;
            }
            merge(out)
        }
    })
}

/// Whether a functional can be non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Vanishes identically.
    Zero,
    /// May be non-zero.
    NonzeroPossible,
}

/// The functional `μ(V, I, J)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MuFunctional {
    v: Vec<u8>,
    i: Vec<u8>,
    j: Vec<u32>,
}

impl MuFunctional {
    /// Checks `V ∈ {1,2}^d`, `I ∈ {0,1}^d` and `J ⊑ I`.
    pub fn new(v: Vec<u8>, i: Vec<u8>, j: Vec<u32>) -> Result<Self, MuError> {
        if v.len() != i.len() || v.len() != j.len() || v.is_empty() {
            return Err(MuError::Shape(format!(
                "lengths {}, {}, {}",
                v.len(),
                i.len(),
                j.len()
            )));
        }
        if v.iter().any(|x| !(*x == 1 || *x == 2)) || i.iter().any(|x| *x > 1) {
            return Err(MuError::Shape(format!("V = {v:?}, I = {i:?}")));
        }
        if let Some(h) = (0..v.len()).find(|&h| i[h] == 0 && j[h] > 0) {
            return Err(MuError::NotSubordinate {
                level: h + 1,
                j: j[h],
            });
        }
        Ok(MuFunctional { v, i, j })
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `V`.
    pub fn v(&self) -> &[u8] {
        &self.v
    }

    /// `I`.
    pub fn i(&self) -> &[u8] {
        &self.i
    }

    /// `J`.
    pub fn j(&self) -> &[u32] {
        &self.j
    }

    /// Zero iff some `(v_h, i_h) = (2, 0)`.
    pub fn support_filter(&self) -> Support {
        if self.v.iter().zip(&self.i).any(|(v, i)| *v == 2 && *i == 0) {
            Support::Zero
        } else {
            Support::NonzeroPossible
        }
    }

    /// The fully reduced terms: constants `c · ∫_{S_m} ∂^α g(A p + b) dp`.
    pub fn terms(&self) -> Result<Vec<RestrictedTerm>, MuError> {
        let d = self.dim();
        let mut terms = vec![RestrictedTerm::pristine(d)];
        for h in (1..=d).rev() {
            terms = apply_t(h, self.v[h - 1], self.i[h - 1], self.j[h - 1], terms)?;
        }
        Ok(terms)
    }
}

/// All `J ⊑ I` (`j_k = 0` where `i_k = 0`) with `|J| ≤ max_total`, in
/// graded order.
pub fn sub_indices(i: &[u8], max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        let mut cur = vec![0u32; i.len()];
        fill(i, 0, total, &mut cur, &mut out);
    }
    out
}

fn fill(i: &[u8], k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if k == i.len() {
        if left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    let top = if i[k] == 0 { 0 } else { left };
    for v in (0..=top).rev() {
        cur[k] = v;
        fill(i, k + 1, left - v, cur, out);
    }
    cur[k] = 0;
}

/// Default quadrature tolerance for the final simplex integrals.
pub fn default_tolerance(d: usize) -> f64 {
    if d <= 2 {
        1e-12
    } else {
        1e-10
    }
}

/// `⟨μ, g⟩`, with the remaining simplex integrals computed adaptively to
/// tolerance `tol`.
pub fn apply_mu(mu: &MuFunctional, g: &ScalarField, tol: f64) -> Result<f64, Error> {
    if g.dim() != mu.dim() {
        return Err(Error::InvalidArgument(format!(
            "field of dimension {} for a functional of dimension {}",
            g.dim(),
            mu.dim()
        )));
    }
    if mu.support_filter() == Support::Zero {
        return Ok(0.0);
    }
    let terms = mu.terms()?;
    apply_terms(&terms, g, tol)
}

/// Evaluates reduced terms against `g`.
pub fn apply_terms(terms: &[RestrictedTerm], g: &ScalarField, tol: f64) -> Result<f64, Error> {
    let d = g.dim();
    let max_m = terms.iter().map(|t| t.pending).max().unwrap_or(0);
    let mut total = 0.0;
    for m in 0..=max_m {
        let group: Vec<(f64, std::sync::Arc<crate::field::Tape>, &RestrictedTerm)> = terms
            .iter()
            .filter(|t| t.pending == m)
            .map(|t| Ok((t.coefficient as f64, g.partial_tape(&t.alpha)?, t)))
            .collect::<Result<_, Error>>()?;
        if group.is_empty() {
            continue;
        }
        let integrand = |p: &[f64]| {
            let mut y = vec![0.0; d];
            group
                .iter()
                .map(|(c, tape, t)| {
                    for (r, yr) in y.iter_mut().enumerate() {
                        *yr = t.b[r] as f64
                            + t.a[r]
                                .iter()
                                .zip(p)
                                .map(|(a, pk)| *a as f64 * pk)
                                .sum::<f64>();
                    }
                    c * tape.eval(&y)
                })
                .sum::<f64>()
        };
        total += gl::integrate_simplex_adaptive(integrand, m, tol)?;
    }
    Ok(total)
}

/// Reference implementation with no symbolic algebra: nested Gauss–Legendre
/// integrals and central finite differences (step `step`) of the black-box
/// `g`, following the definition level by level.
pub fn apply_mu_numeric<G: Fn(&[f64]) -> f64>(mu: &MuFunctional, g: &G, step: f64) -> f64 {
    fn level<G: Fn(&[f64]) -> f64>(
        mu: &MuFunctional,
        g: &G,
        step: f64,
        h: usize,
        x: &mut Vec<f64>,
    ) -> f64 {
        // Value of T_{h+1} … T_d g at x ∈ ℝ^h.
        let d = mu.dim();
        if h == d {
            return g(x);
        }
        let (v, i, j) = (mu.v[h], mu.i[h], mu.j[h]);
        let s = 1.0 - x.iter().sum::<f64>();
        let at = |t: f64, x: &mut Vec<f64>| {
            x.push(t);
            let r = level(mu, g, step, h + 1, x);
            x.pop();
            r
        };
        match (v, i) {
            (2, 0) => 0.0,
            (1, 0) => {
                let rule = gl::rule(15);
                s * rule
                    .x
                    .iter()
                    .zip(&rule.w)
                    .map(|(t, w)| w * at(s * t, x))
                    .sum::<f64>()
            }
            _ => {
                let (t0, sign) = if v == 1 { (0.0, -1.0) } else { (s, 1.0) };
                // Central difference of order j: Σ_k (−1)^k C(j,k) f(t0 + (j/2 − k) h) / h^j.
                let mut acc = 0.0;
                let mut binom = 1.0;
                for k in 0..=j {
                    let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sgn * binom * at(t0 + (j as f64 / 2.0 - k as f64) * step, x);
                    binom = binom * (j - k) as f64 / (k + 1) as f64;
                }
                sign * acc / step.powi(j as i32)
            }
        }
    }
    level(mu, g, step, 0, &mut Vec::new())
}
