//! Weighted Riemann sums and their Richardson (Vandermonde) extrapolation.
//!
//! On an integer complex `P`, `S_N(f, P) = ∫_P f + Σ_{0<k≤w/2} γ_k N^{−2k}
//! + O(N^{−w−1})`; the combination `Σ_j c_j S_{2^j N}` with
//! `Σ_j c_j 2^{−2kj} = δ_{k0}` removes the even powers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::field::ScalarField;
use crate::geometry::{weighted_sum, SimplicialComplex, SolidAngleMethod};
use crate::linalg;
use crate::Error;

/// Coefficients `c_0, …, c_{⌊w/2⌋}` of the extrapolation rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtrapolationRule {
    w: u32,
    coefficients: Vec<BigRational>,
}

impl ExtrapolationRule {
    /// Target order.
    pub fn w(&self) -> u32 {
        self.w
    }

    /// Number of dilation levels, `⌊w/2⌋ + 1`.
    pub fn levels(&self) -> usize {
        self.coefficients.len()
    }

    /// Exact coefficients.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    /// Coefficients rounded to `f64`.
    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(linalg::rational_to_f64)
            .collect()
    }
}

/// Solves `Σ_j c_j 4^{−kj} = δ_{k0}`, `k, j = 0..⌊w/2⌋`, exactly.
pub fn vandermonde_coeffs(w: u32) -> ExtrapolationRule {
    let levels = w as usize / 2 + 1;
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    let node = |j: usize| -> BigRational {
        let mut x = BigRational::one();
        for _ in 0..j {
            x *= &quarter;
        }
        x
    };
    let a: Vec<Vec<BigRational>> = (0..levels)
        .map(|k| {
            (0..levels)
                .map(|j| {
                    let base = node(j);
                    let mut x = BigRational::one();
                    for _ in 0..k {
                        x *= &base;
                    }
                    x
                })
                .collect()
        })
        .collect();
    let rhs: Vec<BigRational> = (0..levels)
        .map(|k| {
            if k == 0 {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
        .collect();
    let coefficients =
        linalg::solve_rational(&a, &rhs).expect("Vandermonde matrix with distinct nodes");
    ExtrapolationRule { w, coefficients }
}

/// `S_N(f, P) = N^{−d} Σ_n ω_P(n/N) f(n/N)`.
pub fn riemann_sum(
    complex: &SimplicialComplex,
    f: &ScalarField,
    n: u64,
    method: SolidAngleMethod,
) -> Result<f64, Error> {
    if f.dim() != complex.dim() {
        return Err(Error::InvalidArgument(format!(
            "field of dimension {} on a complex of dimension {}",
            f.dim(),
            complex.dim()
        )));
    }
    let tape = f.partial_tape(&vec![0; f.dim()])?;
    Ok(weighted_sum(complex, &|x: &[f64]| tape.eval(x), n, method)?)
}

/// `Σ_j c_j S_{2^j N}(f, P)`.
pub fn extrapolated_integral(
    complex: &SimplicialComplex,
    f: &ScalarField,
    n: u64,
    w: u32,
    method: SolidAngleMethod,
) -> Result<f64, Error> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let rule = vandermonde_coeffs(w);
    let sums = (0..rule.levels())
        .map(|j| riemann_sum(complex, f, n << j, method))
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(combine(&rule, &sums))
}

fn combine(rule: &ExtrapolationRule, sums: &[f64]) -> f64 {
    // Small levels first; the coefficients alternate in sign.
    let terms: Vec<f64> = rule
        .coefficients_f64()
        .iter()
        .zip(sums)
        .map(|(c, s)| c * s)
        .collect();
    crate::sum::pairwise_sum(&terms)
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Resolution `N`.
    #[serde(rename = "N")]
    pub n: u64,
    /// Raw weighted sum `S_N`.
    #[serde(rename = "S_N")]
    pub s_n: f64,
    /// Extrapolated value from levels `N, 2N, …`.
    pub extrapolated: f64,
    /// `|extrapolated − reference|`.
    pub abs_error: f64,
    /// `log₂(err(N)/err(2N))` when the next row has resolution `2N`.
    pub local_order: Option<f64>,
}

/// Convergence study of the order-`w` extrapolation.  Without a reference
/// value, the order-`w+2` extrapolation at `2·max(N)` is used instead.
pub fn convergence_table(
    complex: &SimplicialComplex,
    f: &ScalarField,
    ns: &[u64],
    w: u32,
    reference: Option<f64>,
    method: SolidAngleMethod,
) -> Result<Vec<ConvergenceRow>, Error> {
    let reference = match reference {
        Some(r) => r,
        None => {
            let top = ns
                .iter()
                .copied()
                .max()
                .ok_or_else(|| Error::InvalidArgument("no resolutions".into()))?;
            extrapolated_integral(complex, f, 2 * top, w + 2, method)?
        }
    };
    let rule = vandermonde_coeffs(w);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let sums = (0..rule.levels())
            .map(|j| riemann_sum(complex, f, n << j, method))
            .collect::<Result<Vec<f64>, Error>>()?;
        let extrapolated = combine(&rule, &sums);
        rows.push(ConvergenceRow {
            n,
            s_n: sums[0],
            extrapolated,
            abs_error: (extrapolated - reference).abs(),
            local_order: None,
        });
    }
    for k in 0..rows.len().saturating_sub(1) {
        if rows[k + 1].n == 2 * rows[k].n && rows[k].abs_error > 0.0 && rows[k + 1].abs_error > 0.0
        {
            rows[k].local_order = Some((rows[k].abs_error / rows[k + 1].abs_error).log2());
        }
    }
    Ok(rows)
}

/// Shortest representation that reads back to the same `f64` (at most 17
/// significant digits), locale independent.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

/// CSV with header `N,S_N,extrapolated,abs_error,local_order`.
pub fn table_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("N,S_N,extrapolated,abs_error,local_order\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            format_float(r.s_n),
            format_float(r.extrapolated),
            format_float(r.abs_error),
            r.local_order.map(format_float).unwrap_or_default()
        ));
    }
    out
}
