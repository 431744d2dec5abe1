//! Small exact integer / rational linear algebra helpers.
//!
//! Matrices are row-major `Vec<Vec<_>>`; all dimensions in this crate are
//! tiny (d ≤ 6), so cofactor-based formulas are both exact and fast enough.

// Index loops mirror the matrix formulas.
#![allow(clippy::needless_range_loop)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

/// Row-major integer matrix.
pub type IMat = Vec<Vec<i64>>;

/// Identity matrix of size `d`.
pub fn identity(d: usize) -> IMat {
    (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect()
}

/// Transpose of a square or rectangular matrix.
pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect()
}

/// Integer matrix product.
pub fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> IMat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Integer matrix–vector product.
pub fn matvec(a: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Floating matrix–vector product for an integer matrix.
pub fn matvec_f64(a: &[Vec<i64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| *x as f64 * y).sum())
        .collect()
}

fn minor<T: Clone>(m: &[Vec<T>], skip_row: usize, skip_col: usize) -> Vec<Vec<T>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip_row)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != skip_col)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// Exact determinant by cofactor expansion (`i128` accumulation).
pub fn det(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0] as i128,
        2 => m[0][0] as i128 * m[1][1] as i128 - m[0][1] as i128 * m[1][0] as i128,
        _ => (0..n)
            .filter(|&j| m[0][j] != 0)
            .map(|j| {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * m[0][j] as i128 * det(&minor(m, 0, j))
            })
            .sum(),
    }
}

/// Adjugate matrix, so that `m · adj(m) = det(m) · Id`.
pub fn adjugate(m: &[Vec<i64>]) -> Vec<Vec<i128>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j][i] = sign * det(&minor(m, i, j));
        }
    }
    adj
}

/// Inverse of an integer matrix in floating point.
pub fn inverse_f64(m: &[Vec<i64>]) -> Option<Vec<Vec<f64>>> {
    let d = det(m);
    if d == 0 {
        return None;
    }
    let adj = adjugate(m);
    Some(
        adj.iter()
            .map(|row| row.iter().map(|x| *x as f64 / d as f64).collect())
            .collect(),
    )
}

/// Inverse of a unimodular integer matrix (exact).
pub fn inverse_unimodular(m: &[Vec<i64>]) -> Option<IMat> {
    let d = det(m);
    if d.abs() != 1 {
        return None;
    }
    Some(
        adjugate(m)
            .iter()
            .map(|row| row.iter().map(|x| (*x * d) as i64).collect())
            .collect(),
    )
}

/// Exact rational value of a finite `f64`.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("non-finite value passed to exact arithmetic")
}

/// Exact rational from a small integer.
pub fn rational_from_i64(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Exact rational from an `i128`.
pub fn rational_from_i128(x: i128) -> BigRational {
    BigRational::from_integer(BigInt::from_i128(x).expect("i128 always fits"))
}

/// Nearest `f64` of an exact rational.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Rank over the rationals of a list of integer vectors.
pub fn rank(vectors: &[Vec<i64>]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| rational_from_i64(*x)).collect())
        .collect();
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(pivot) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, pivot);
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let factor = &rows[i][c] / &rows[r][c];
                for k in c..cols {
                    let sub = &factor * &rows[r][k];
                    rows[i][k] -= sub;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// Exact solve of `A x = b` over the rationals (A square, invertible).
pub fn solve_rational(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        let pivot = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, pivot);
        let p = m[c][c].clone();
        for k in c..=n {
            m[c][k] = &m[c][k] / &p;
        }
        for i in 0..n {
            if i != c && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                for k in c..=n {
                    let sub = &factor * &m[c][k];
                    m[i][k] -= sub;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Angle between two vectors in `[0, π]`.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    // atan2 of |a×b| and a·b is better conditioned than acos near 0 and π.
    let cross2 = (na * nb).powi(2) - dot * dot;
    cross2.max(0.0).sqrt().atan2(dot)
}

/// Absolute value of the determinant of an integer matrix.
pub fn abs_det(m: &[Vec<i64>]) -> i128 {
    det(m).abs()
}

/// Sign of a rational (-1, 0, 1).
pub fn sign(x: &BigRational) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_adjugate() {
        let m = vec![vec![2, 1, 0], vec![1, 3, 1], vec![0, 1, 4]];
        let d = det(&m);
        assert_eq!(d, 18);
        let adj = adjugate(&m);
        for i in 0..3 {
            for j in 0..3 {
                let s: i128 = (0..3).map(|k| m[i][k] as i128 * adj[k][j]).sum();
                assert_eq!(s, if i == j { d } else { 0 });
            }
        }
    }

    #[test]
    fn rank_detects_dependence() {
        assert_eq!(rank(&[vec![1, -1, 0], vec![0, 1, -1], vec![1, 0, -1]]), 2);
        assert_eq!(rank(&[vec![1, 0], vec![0, 1]]), 2);
        assert_eq!(rank(&[]), 0);
    }
}
