//! Gauss–Legendre rules on `[0, 1]` and collapsed tensor rules on the
//! standard simplex, with order doubling `7 → 15 → 31 → …`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use thiserror::Error;

use crate::sum::pairwise_sum;

/// Orders tried by the adaptive drivers.
pub const ORDER_SEQUENCE: [usize; 7] = [7, 15, 31, 63, 127, 255, 511];

/// Quadrature failed to reach the requested tolerance.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not converge: last difference {difference:e} > tolerance {tolerance:e} at order {order}")]
pub struct NonConvergence {
    /// Last difference between successive orders.
    pub difference: f64,
    /// Requested tolerance.
    pub tolerance: f64,
    /// Highest order tried.
    pub order: usize,
}

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    /// Nodes in `(0, 1)`.
    pub x: Vec<f64>,
    /// Positive weights summing to one.
    pub w: Vec<f64>,
}

static RULES: Lazy<Mutex<HashMap<usize, Arc<Rule>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// The `n`-point Gauss–Legendre rule on `[0, 1]` (cached).
pub fn rule(n: usize) -> Arc<Rule> {
    if let Some(r) = RULES.lock().expect("rule cache").get(&n) {
        return r.clone();
    }
    let r = Arc::new(compute_rule(n));
    RULES.lock().expect("rule cache").insert(n, r.clone());
    r
}

fn compute_rule(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = (1.0 - z) / 2.0;
        x[n - 1 - i] = (1.0 + z) / 2.0;
        w[i] = weight / 2.0;
        w[n - 1 - i] = weight / 2.0;
    }
    Rule { x, w }
}

/// `∫_0^1 f` with an `n`-point rule.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let r = rule(n);
    let terms: Vec<f64> = r.x.iter().zip(&r.w).map(|(x, w)| w * f(*x)).collect();
    pairwise_sum(&terms)
}

/// `∫_a^b f` split into `panels` equal panels of `n` points each.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, panels: usize) -> f64 {
    let r = rule(n);
    let h = (b - a) / panels as f64;
    let mut terms = Vec::with_capacity(n * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in r.x.iter().zip(&r.w) {
            terms.push(h * w * f(lo + h * x));
        }
    }
    pairwise_sum(&terms)
}

/// Adaptive `∫_a^b f` by order doubling on `panels` panels.
pub fn integrate_interval_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<f64, NonConvergence> {
    adaptive(|n| integrate_panels(&f, a, b, n, panels), tol)
}

/// Points and weights of the collapsed tensor rule on the standard
/// `m`-simplex `{p ≥ 0, Σp ≤ 1}`, with `n` nodes per direction and
/// `panels` panels per direction.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    /// Points, each of length `m`.
    pub points: Vec<Vec<f64>>,
    /// Weights summing to `1/m!`.
    pub weights: Vec<f64>,
}

/// Cache key: simplex dimension, nodes per direction, panels per direction.
type SimplexKey = (usize, usize, usize);

static SIMPLEX_RULES: Lazy<Mutex<HashMap<SimplexKey, Arc<SimplexRule>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Cached collapsed tensor rule on the standard `m`-simplex.
pub fn simplex_rule(m: usize, n: usize, panels: usize) -> Arc<SimplexRule> {
    let key = (m, n, panels);
    if let Some(r) = SIMPLEX_RULES.lock().expect("rule cache").get(&key) {
        return r.clone();
    }
    let base = rule(n);
    let h = 1.0 / panels as f64;
    let mut line_x = Vec::with_capacity(n * panels);
    let mut line_w = Vec::with_capacity(n * panels);
    for p in 0..panels {
        for (x, w) in base.x.iter().zip(&base.w) {
            line_x.push(h * (p as f64 + x));
            line_w.push(h * w);
        }
    }
    let mut points = vec![Vec::with_capacity(m)];
    let mut weights = vec![1.0];
    let mut remaining = vec![1.0];
    for _ in 0..m {
        let mut np = Vec::with_capacity(points.len() * line_x.len());
        let mut nw = Vec::with_capacity(points.len() * line_x.len());
        let mut nr = Vec::with_capacity(points.len() * line_x.len());
        for ((pt, w), rem) in points.iter().zip(&weights).zip(&remaining) {
            for (x, lw) in line_x.iter().zip(&line_w) {
                let mut q = pt.clone();
                q.push(rem * x);
                np.push(q);
                nw.push(w * lw * rem);
                nr.push(rem * (1.0 - x));
            }
        }
        points = np;
        weights = nw;
        remaining = nr;
    }
    let r = Arc::new(SimplexRule { points, weights });
    SIMPLEX_RULES
        .lock()
        .expect("rule cache")
        .insert(key, r.clone());
    r
}

/// `∫_{S_m} f` with the collapsed rule (for `m = 0`, the value `f([])`).
pub fn integrate_simplex<F: Fn(&[f64]) -> f64>(f: F, m: usize, n: usize, panels: usize) -> f64 {
    let r = simplex_rule(m, n, panels);
    let terms: Vec<f64> = r
        .points
        .iter()
        .zip(&r.weights)
        .map(|(p, w)| w * f(p))
        .collect();
    pairwise_sum(&terms)
}

/// Adaptive simplex integration by order doubling.
pub fn integrate_simplex_adaptive<F: Fn(&[f64]) -> f64>(
    f: F,
    m: usize,
    tol: f64,
) -> Result<f64, NonConvergence> {
    if m == 0 {
        return Ok(f(&[]));
    }
    let cap = match m {
        1 => ORDER_SEQUENCE.len(),
        2 => 6,
        _ => 5,
    };
    adaptive_capped(|n| integrate_simplex(&f, m, n, 1), tol, cap)
}

fn adaptive<G: Fn(usize) -> f64>(g: G, tol: f64) -> Result<f64, NonConvergence> {
    adaptive_capped(g, tol, ORDER_SEQUENCE.len())
}

fn adaptive_capped<G: Fn(usize) -> f64>(g: G, tol: f64, cap: usize) -> Result<f64, NonConvergence> {
    let mut prev = g(ORDER_SEQUENCE[0]);
    let mut diff = f64::INFINITY;
    for &n in &ORDER_SEQUENCE[1..cap] {
        let cur = g(n);
        diff = (cur - prev).abs();
        if diff <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(NonConvergence {
        difference: diff,
        tolerance: tol,
        order: ORDER_SEQUENCE[cap - 1],
    })
}
