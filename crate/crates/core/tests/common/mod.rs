//! Shared generators for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use solidsum::geometry::IntegerSimplex;
use solidsum::linalg;

/// Random unimodular matrix: a product of elementary operations.
pub fn random_unimodular<R: Rng>(rng: &mut R, d: usize) -> Vec<Vec<i64>> {
    let mut m = linalg::identity(d);
    for _ in 0..3 * d {
        let a = rng.gen_range(0..d);
        let b = (a + rng.gen_range(1..d.max(2))) % d;
        if a == b {
            continue;
        }
        let k = rng.gen_range(-2i64..=2);
        for row in m.iter_mut() {
            row[a] += k * row[b];
        }
        if rng.gen_bool(0.3) {
            for row in m.iter_mut() {
                row.swap(a, b);
            }
        }
    }
    m
}

/// Random `(J, L)` with `1 ≤ |J| ≤ 4`, `0 < |det L| ≤ 6`.
pub fn random_jl<R: Rng>(rng: &mut R, d: usize) -> (Vec<u32>, Vec<Vec<i64>>) {
    loop {
        let l: Vec<Vec<i64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.gen_range(-2..=2)).collect())
            .collect();
        let det = linalg::det(&l);
        if det == 0 || det.abs() > 6 {
            continue;
        }
        let j: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=2)).collect();
        let total: u32 = j.iter().sum();
        if total == 0 || total > 4 {
            continue;
        }
        return (j, l);
    }
}

/// Distance from `x` to the discontinuity set of `𝔅_{J,L}`: the
/// hyperplanes `((L^{-1})ᵗ x)_s ∈ (1/|det L|)ℤ` for `j_s = 1`, measured in
/// the coordinates `y = (L^{-1})ᵗ x`.
pub fn jump_distance(j: &[u32], l: &[Vec<i64>], x: &[f64]) -> f64 {
    let d = j.len();
    let inv = linalg::inverse_f64(l).expect("non-singular");
    let det = linalg::abs_det(l) as f64;
    let mut dist = f64::INFINITY;
    for s in 0..d {
        if j[s] != 1 {
            continue;
        }
        let y: f64 = (0..d).map(|i| inv[i][s] * x[i]).sum();
        let t = y * det;
        dist = dist.min((t - t.round()).abs() / det);
    }
    dist
}

/// Splits the simplex through the midpoint of an edge; both halves are
/// integer simplices when the midpoint is integral.
pub fn split_at_midpoint(
    s: &IntegerSimplex,
    a: usize,
    b: usize,
) -> Option<(IntegerSimplex, IntegerSimplex)> {
    let verts = s.vertices();
    let mid: Vec<i64> = verts[a].iter().zip(&verts[b]).map(|(x, y)| x + y).collect();
    if mid.iter().any(|v| v % 2 != 0) {
        return None;
    }
    let mid: Vec<i64> = mid.iter().map(|v| v / 2).collect();
    let mut first = verts.clone();
    first[a] = mid.clone();
    let mut second = verts;
    second[b] = mid;
    Some((
        IntegerSimplex::from_vertices(&first).ok()?,
        IntegerSimplex::from_vertices(&second).ok()?,
    ))
}

/// Random subdivision of `s` by repeated edge bisection.
pub fn random_subdivision<R: Rng>(
    rng: &mut R,
    s: &IntegerSimplex,
    splits: usize,
) -> Vec<IntegerSimplex> {
    let d = s.dim();
    let mut pieces = vec![s.clone()];
    let mut attempts = 0;
    while pieces.len() < splits + 1 && attempts < 100 * (splits + 1) {
        attempts += 1;
        let k = rng.gen_range(0..pieces.len());
        let a = rng.gen_range(0..=d);
        let b = (a + rng.gen_range(1..=d)) % (d + 1);
        if let Some((p, q)) = split_at_midpoint(&pieces[k], a, b) {
            pieces.swap_remove(k);
            pieces.push(p);
            pieces.push(q);
        }
    }
    pieces
}

/// Random non-degenerate integer simplex with even coordinates (so that
/// several rounds of edge bisection stay integral).
pub fn random_even_simplex<R: Rng>(rng: &mut R, d: usize) -> IntegerSimplex {
    loop {
        let verts: Vec<Vec<i64>> = (0..=d)
            .map(|_| (0..d).map(|_| 4 * rng.gen_range(-1i64..=2)).collect())
            .collect();
        if let Ok(s) = IntegerSimplex::from_vertices(&verts) {
            return s;
        }
    }
}

/// Least-squares fit of `y ≈ Σ_k c_k x^{e_k}` by normal equations.
pub fn least_squares(xs: &[f64], ys: &[f64], exponents: &[i32]) -> Vec<f64> {
    let n = exponents.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for (x, y) in xs.iter().zip(ys) {
        let phi: Vec<f64> = exponents.iter().map(|e| x.powi(*e)).collect();
        for i in 0..n {
            rhs[i] += phi[i] * y;
            for k in 0..n {
                a[i][k] += phi[i] * phi[k];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &k| a[i][c].abs().partial_cmp(&a[k][c].abs()).unwrap())
            .unwrap();
        a.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut out = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * out[k]).sum();
        out[r] = (rhs[r] - s) / a[r][r];
    }
    out
}

/// Slope of the least-squares line through `(log x, log y)`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
