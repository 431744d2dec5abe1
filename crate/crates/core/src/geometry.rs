//! Integer simplices, simplicial complexes, normalized solid angles and
//! solid-angle weighted lattice sums.
//!
//! Boundary classification is exact: a point is located by the signs of its
//! barycentric coordinates computed in integer or rational arithmetic, and
//! the set of vanishing coordinates (the *zero pattern*) identifies the face
//! in whose relative interior it lies.  The normalized solid angle only
//! depends on that face, so it is computed once per pattern and cached.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, IMat};
use crate::sum::pairwise_sum;

/// Errors raised by the geometry layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    /// The edge matrix is singular or has the wrong shape.
    #[error("degenerate simplex: {0}")]
    Degenerate(String),
    /// Simplices of different dimensions in one complex, or a point of the
    /// wrong length.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        /// Dimension of the complex.
        expected: usize,
        /// Offending dimension.
        found: usize,
    },
    /// Exact solid angles were requested in a dimension without a closed
    /// form.
    #[error("exact solid angles are only available for d <= 3 (got d = {0}); use Monte Carlo")]
    MethodUnsupported(usize),
    /// Input to the triangulation does not span the ambient space.
    #[error("vertices do not span R^{0}")]
    LowerDimensional(usize),
    /// Malformed complex description.
    #[error("invalid complex: {0}")]
    InvalidComplex(String),
}

/// How normalized solid angles are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolidAngleMethod {
    /// Closed forms (d ≤ 3).
    ExactLowDim,
    /// Fraction of random directions pointing into the polytope.
    MonteCarlo {
        /// Number of sampled directions.
        samples: u64,
        /// RNG seed.
        seed: u64,
    },
}

/// The simplex with vertices `p, p + m_1, …, p + m_d` (`m_k` the columns of
/// `M`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerSimplex {
    p: Vec<i64>,
    /// Row-major edge matrix; column `k` is `m_{k+1}`.
    m: IMat,
    det: i128,
    adj: Vec<Vec<i128>>,
}

impl IntegerSimplex {
    /// Builds a simplex from its base point and row-major edge matrix.
    pub fn new(p: Vec<i64>, m: IMat) -> Result<Self, GeometryError> {
        let d = p.len();
        if d == 0 || m.len() != d || m.iter().any(|r| r.len() != d) {
            return Err(GeometryError::Degenerate(format!(
                "edge matrix must be {d}x{d}"
            )));
        }
        let det = linalg::det(&m);
        if det == 0 {
            return Err(GeometryError::Degenerate("edge matrix is singular".into()));
        }
        let adj = linalg::adjugate(&m);
        Ok(IntegerSimplex { p, m, det, adj })
    }

    /// Builds a simplex from its base point and edge vectors.
    pub fn from_columns(p: Vec<i64>, columns: &[Vec<i64>]) -> Result<Self, GeometryError> {
        Self::new(p, linalg::transpose(columns))
    }

    /// Builds the simplex spanned by `d + 1` vertices.
    pub fn from_vertices(vertices: &[Vec<i64>]) -> Result<Self, GeometryError> {
        let p = vertices[0].clone();
        let cols: Vec<Vec<i64>> = vertices[1..]
            .iter()
            .map(|v| v.iter().zip(&p).map(|(a, b)| a - b).collect())
            .collect();
        Self::from_columns(p, &cols)
    }

    /// The standard simplex `S_d`.
    pub fn standard(d: usize) -> Self {
        Self::new(vec![0; d], linalg::identity(d)).expect("identity is invertible")
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Base point.
    pub fn p(&self) -> &[i64] {
        &self.p
    }

    /// Row-major edge matrix.
    pub fn m(&self) -> &IMat {
        &self.m
    }

    /// Edge vectors `m_1, …, m_d`.
    pub fn columns(&self) -> Vec<Vec<i64>> {
        linalg::transpose(&self.m)
    }

    /// `det M` (signed).
    pub fn det(&self) -> i128 {
        self.det
    }

    /// Volume `|det M| / d!`.
    pub fn volume(&self) -> f64 {
        let fact: f64 = (1..=self.dim()).map(|k| k as f64).product();
        self.det.abs() as f64 / fact
    }

    /// Vertices `p, p + m_1, …, p + m_d`.
    pub fn vertices(&self) -> Vec<Vec<i64>> {
        let mut out = vec![self.p.clone()];
        for c in self.columns() {
            out.push(c.iter().zip(&self.p).map(|(a, b)| a + b).collect());
        }
        out
    }

    /// Integer bounding box of the dilate `τ·simplex`, for integer `τ`.
    fn scaled_box(&self, tau: i64) -> Vec<(i64, i64)> {
        let verts = self.vertices();
        (0..self.dim())
            .map(|i| {
                let lo = verts.iter().map(|v| v[i]).min().unwrap() * tau;
                let hi = verts.iter().map(|v| v[i]).max().unwrap() * tau;
                (lo, hi)
            })
            .collect()
    }

    /// Zero pattern of the point `num / den` (`den > 0`) or `None` if it lies
    /// outside.  Bit `0` flags the barycentric coordinate of `p`, bit `k` the
    /// one of `p + m_k`.
    pub fn pattern_i128(&self, num: &[i128], den: i128) -> Option<u32> {
        let d = self.dim();
        let w: Vec<i128> = (0..d).map(|i| num[i] - den * self.p[i] as i128).collect();
        let sgn = self.det.signum();
        let mut pattern = 0u32;
        let mut total = 0i128;
        for k in 0..d {
            let t: i128 = (0..d).map(|i| self.adj[k][i] * w[i]).sum();
            total += t;
            match (t * sgn).signum() {
                -1 => return None,
                0 => pattern |= 1 << (k + 1),
                _ => {}
            }
        }
        match ((den * self.det - total) * sgn).signum() {
            -1 => None,
            0 => Some(pattern | 1),
            _ => Some(pattern),
        }
    }

    /// Zero pattern of an exact rational point, or `None` if outside.
    pub fn pattern_rational(&self, z: &[BigRational]) -> Option<u32> {
        let d = self.dim();
        let w: Vec<BigRational> = (0..d)
            .map(|i| &z[i] - linalg::rational_from_i64(self.p[i]))
            .collect();
        let sgn = self.det.signum() as i32;
        let mut pattern = 0u32;
        let mut total = BigRational::zero();
        for k in 0..d {
            let t: BigRational = (0..d)
                .filter(|&i| self.adj[k][i] != 0)
                .map(|i| linalg::rational_from_i128(self.adj[k][i]) * &w[i])
                .sum();
            match linalg::sign(&t) * sgn {
                -1 => return None,
                0 => pattern |= 1 << (k + 1),
                _ => {}
            }
            total += t;
        }
        let rest = linalg::rational_from_i128(self.det) - total;
        match linalg::sign(&rest) * sgn {
            -1 => None,
            0 => Some(pattern | 1),
            _ => Some(pattern),
        }
    }

    /// Gradients of the barycentric coordinates (inward facet normals);
    /// entry `k` belongs to vertex `k`.
    pub fn barycentric_gradients(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                (0..d)
                    .map(|i| self.adj[k][i] as f64 / self.det as f64)
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(d + 1);
        out.push(
            (0..d)
                .map(|i| -rows.iter().map(|r| r[i]).sum::<f64>())
                .collect(),
        );
        out.extend(rows);
        out
    }

    /// Floating barycentric coordinates of `x`.
    pub fn barycentric_f64(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let w: Vec<f64> = (0..d).map(|i| x[i] - self.p[i] as f64).collect();
        let mut out = vec![0.0; d + 1];
        for k in 0..d {
            out[k + 1] =
                (0..d).map(|i| self.adj[k][i] as f64 * w[i]).sum::<f64>() / self.det as f64;
        }
        out[0] = 1.0 - out[1..].iter().sum::<f64>();
        out
    }

    /// Normalized solid angle of the tangent cone at a point with the given
    /// zero pattern, by closed forms (d ≤ 3).
    pub fn pattern_weight_exact(&self, pattern: u32) -> Result<f64, GeometryError> {
        let d = self.dim();
        if d > 3 {
            return Err(GeometryError::MethodUnsupported(d));
        }
        let grads = self.barycentric_gradients();
        let normals: Vec<Vec<f64>> = (0..=d)
            .filter(|k| (pattern >> k) & 1 == 1)
            .map(|k| grads[k].clone())
            .collect();
        cone_fraction(&normals).ok_or(GeometryError::MethodUnsupported(d))
    }

    /// Monte Carlo estimate of the normalized solid angle at a point in the
    /// relative interior of the face with the given zero pattern.
    pub fn pattern_weight_mc(&self, pattern: u32, samples: u64, seed: u64) -> f64 {
        let d = self.dim();
        let verts = self.vertices();
        let free: Vec<usize> = (0..=d).filter(|k| (pattern >> k) & 1 == 0).collect();
        let point: Vec<f64> = (0..d)
            .map(|i| free.iter().map(|&k| verts[k][i] as f64).sum::<f64>() / free.len() as f64)
            .collect();
        let grads = self.barycentric_gradients();
        let bary = self.barycentric_f64(&point);
        // Half the distance to the nearest facet hyperplane not through the point.
        let eps = 0.5
            * free
                .iter()
                .map(|&k| bary[k] / norm(&grads[k]))
                .fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0u64;
        for _ in 0..samples {
            let u = random_direction(&mut rng, d);
            let y: Vec<f64> = point.iter().zip(&u).map(|(a, b)| a - eps * b).collect();
            if self.barycentric_f64(&y).iter().all(|l| *l >= 0.0) {
                hits += 1;
            }
        }
        hits as f64 / samples as f64
    }

    /// Pattern weight under the chosen method.
    pub fn pattern_weight(
        &self,
        pattern: u32,
        method: SolidAngleMethod,
    ) -> Result<f64, GeometryError> {
        if pattern == 0 {
            return Ok(1.0);
        }
        match method {
            SolidAngleMethod::ExactLowDim => self.pattern_weight_exact(pattern),
            SolidAngleMethod::MonteCarlo { samples, seed } => Ok(self.pattern_weight_mc(
                pattern,
                samples,
                seed ^ (u64::from(pattern)).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )),
        }
    }

    /// Lattice points `x + n` (n ∈ ℤ^d) lying in the closed dilate
    /// `τ·simplex`, with their zero patterns.
    pub fn shifted_points(&self, x: &[BigRational], tau: &BigRational) -> Vec<(Vec<i64>, u32)> {
        let d = self.dim();
        let verts = self.vertices();
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let lo = linalg::rational_from_i64(verts.iter().map(|v| v[i]).min().unwrap()) * tau
                    - &x[i];
                let hi = linalg::rational_from_i64(verts.iter().map(|v| v[i]).max().unwrap()) * tau
                    - &x[i];
                (
                    lo.ceil().to_integer().to_i64().unwrap(),
                    hi.floor().to_integer().to_i64().unwrap(),
                )
            })
            .collect();
        let mut out = Vec::new();
        for n in box_points(&ranges) {
            let z: Vec<BigRational> = (0..d)
                .map(|i| (&x[i] + linalg::rational_from_i64(n[i])) / tau)
                .collect();
            if let Some(pat) = self.pattern_rational(&z) {
                out.push((n, pat));
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&u);
        if n > 1e-12 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}

/// All integer points of a box `∏ [lo_i, hi_i]`, first coordinate slowest.
pub(crate) fn box_points(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(ranges.len())];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for v in lo..=hi {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Orthonormal coordinates of `vectors` inside their span (Gram–Schmidt).
fn coordinates_in_span(vectors: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            let c = dot(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let n = norm(&w);
        if n < 1e-12 * norm(v).max(1.0) {
            return None;
        }
        basis.push(w.into_iter().map(|x| x / n).collect());
    }
    Some(
        vectors
            .iter()
            .map(|v| basis.iter().map(|b| dot(v, b)).collect())
            .collect(),
    )
}

/// Fraction of the unit sphere occupied by the cone `{u : a_i·u ≥ 0}` for up
/// to three linearly independent normals `a_i` (any ambient dimension).
///
/// Returns `None` for four or more normals or for dependent normals.
pub fn cone_fraction(normals: &[Vec<f64>]) -> Option<f64> {
    match normals.len() {
        0 => Some(1.0),
        1 => Some(0.5),
        2 => Some((PI - linalg::angle_between(&normals[0], &normals[1])) / (2.0 * PI)),
        3 => {
            let a = coordinates_in_span(normals)?;
            // Generators of the cone: the dual basis, oriented inward.
            let gens: Vec<[f64; 3]> = (0..3)
                .map(|i| {
                    let g = cross(&a[(i + 1) % 3], &a[(i + 2) % 3]);
                    if dot(&g, &a[i]) < 0.0 {
                        [-g[0], -g[1], -g[2]]
                    } else {
                        g
                    }
                })
                .collect();
            Some(trihedral_solid_angle(&gens[0], &gens[1], &gens[2]) / (4.0 * PI))
        }
        _ => None,
    }
}

/// Solid angle of the cone spanned by three vectors (Van Oosterom–Strackee).
pub fn trihedral_solid_angle(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let (na, nb, nc) = (norm(a), norm(b), norm(c));
    let triple = dot(a, &cross(b, c)).abs();
    let denom = na * nb * nc + dot(a, b) * nc + dot(a, c) * nb + dot(b, c) * na;
    let half = triple.atan2(denom);
    let half = if half < 0.0 { half + PI } else { half };
    2.0 * half
}

/// A homogeneous simplicial complex of integer simplices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    d: usize,
    simplices: Vec<IntegerSimplex>,
}

#[derive(Serialize, Deserialize)]
struct SimplexJson {
    p: Vec<i64>,
    #[serde(rename = "M")]
    m: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    d: usize,
    simplices: Vec<SimplexJson>,
}

impl SimplicialComplex {
    /// Builds a complex, checking that all simplices share the dimension.
    pub fn new(d: usize, simplices: Vec<IntegerSimplex>) -> Result<Self, GeometryError> {
        if let Some(s) = simplices.iter().find(|s| s.dim() != d) {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
        Ok(SimplicialComplex { d, simplices })
    }

    /// A complex with a single simplex.
    pub fn single(s: IntegerSimplex) -> Self {
        SimplicialComplex {
            d: s.dim(),
            simplices: vec![s],
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Member simplices.
    pub fn simplices(&self) -> &[IntegerSimplex] {
        &self.simplices
    }

    /// Total volume.
    pub fn volume(&self) -> f64 {
        self.simplices.iter().map(|s| s.volume()).sum()
    }

    /// Parses the JSON description (`M` given as a list of columns).
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let raw: ComplexJson =
            serde_json::from_str(text).map_err(|e| GeometryError::InvalidComplex(e.to_string()))?;
        let simplices = raw
            .simplices
            .into_iter()
            .map(|s| {
                if s.p.len() != raw.d {
                    return Err(GeometryError::DimensionMismatch {
                        expected: raw.d,
                        found: s.p.len(),
                    });
                }
                IntegerSimplex::from_columns(s.p, &s.m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(raw.d, simplices)
    }

    /// Serializes to the JSON description.
    pub fn to_json(&self) -> String {
        let raw = ComplexJson {
            d: self.d,
            simplices: self
                .simplices
                .iter()
                .map(|s| SimplexJson {
                    p: s.p.clone(),
                    m: s.columns(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("plain data serializes")
    }

    /// Probabilistic check that no two simplices share interior points:
    /// `samples` random interior points of each simplex are tested against
    /// every other simplex.
    pub fn interiors_disjoint(&self, samples: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, a) in self.simplices.iter().enumerate() {
            let verts = a.vertices();
            for _ in 0..samples {
                let w: Vec<f64> = (0..=self.d)
                    .map(|_| {
                        let u: f64 = rand::Rng::gen_range(&mut rng, 1e-9..1.0);
                        -u.ln()
                    })
                    .collect();
                let s: f64 = w.iter().sum();
                let x: Vec<f64> = (0..self.d)
                    .map(|c| {
                        verts
                            .iter()
                            .zip(&w)
                            .map(|(v, wi)| v[c] as f64 * wi / s)
                            .sum()
                    })
                    .collect();
                for (j, b) in self.simplices.iter().enumerate() {
                    if i != j && b.barycentric_f64(&x).iter().all(|l| *l > 1e-12) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn check_point(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.d {
            return Err(GeometryError::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_method(&self, method: SolidAngleMethod) -> Result<(), GeometryError> {
        if method == SolidAngleMethod::ExactLowDim && self.d > 3 {
            return Err(GeometryError::MethodUnsupported(self.d));
        }
        Ok(())
    }
}

/// Normalized solid angle `ω_P(x)`.
pub fn solid_angle(
    complex: &SimplicialComplex,
    x: &[f64],
    method: SolidAngleMethod,
) -> Result<f64, GeometryError> {
    complex.check_point(x)?;
    complex.check_method(method)?;
    match method {
        SolidAngleMethod::ExactLowDim => {
            let z: Vec<BigRational> = x.iter().map(|v| linalg::rational_from_f64(*v)).collect();
            let mut parts = Vec::new();
            for s in complex.simplices() {
                if let Some(pat) = s.pattern_rational(&z) {
                    parts.push(s.pattern_weight_exact(pat)?);
                }
            }
            Ok(pairwise_sum(&parts))
        }
        SolidAngleMethod::MonteCarlo { samples, seed } => {
            Ok(mc_solid_angle(complex, x, samples, seed))
        }
    }
}

fn mc_solid_angle(complex: &SimplicialComplex, x: &[f64], samples: u64, seed: u64) -> f64 {
    let d = complex.dim();
    // ε: half the distance to the nearest facet hyperplane that could
    // separate x from a simplex's interior.
    let mut eps = f64::INFINITY;
    for s in complex.simplices() {
        let grads = s.barycentric_gradients();
        let bary = s.barycentric_f64(x);
        let dists: Vec<f64> = bary.iter().zip(&grads).map(|(l, g)| l / norm(g)).collect();
        if bary.iter().all(|l| *l >= 0.0) {
            for dist in dists.iter().filter(|v| **v > 1e-14) {
                eps = eps.min(*dist);
            }
        } else {
            let sep = dists
                .iter()
                .filter(|v| **v < 0.0)
                .map(|v| -v)
                .fold(0.0, f64::max);
            eps = eps.min(sep);
        }
    }
    if !eps.is_finite() {
        eps = 1.0;
    }
    let eps = 0.5 * eps;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let u = random_direction(&mut rng, d);
        let y: Vec<BigRational> = x
            .iter()
            .zip(&u)
            .map(|(a, b)| linalg::rational_from_f64(a - eps * b))
            .collect();
        if complex
            .simplices()
            .iter()
            .any(|s| s.pattern_rational(&y).is_some())
        {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

/// Per-simplex cache of pattern weights.
struct WeightCache<'a> {
    simplex: &'a IntegerSimplex,
    method: SolidAngleMethod,
    salt: u64,
    cache: Mutex<HashMap<u32, f64>>,
}

impl<'a> WeightCache<'a> {
    fn new(simplex: &'a IntegerSimplex, method: SolidAngleMethod, salt: u64) -> Self {
        WeightCache {
            simplex,
            method,
            salt,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn weight(&self, pattern: u32) -> Result<f64, GeometryError> {
        if pattern == 0 {
            return Ok(1.0);
        }
        if let Some(w) = self.cache.lock().expect("cache lock").get(&pattern) {
            return Ok(*w);
        }
        let method = match self.method {
            SolidAngleMethod::MonteCarlo { samples, seed } => SolidAngleMethod::MonteCarlo {
                samples,
                seed: seed.wrapping_add(self.salt.wrapping_mul(0xD1B5_4A32_D192_ED03)),
            },
            m => m,
        };
        let w = self.simplex.pattern_weight(pattern, method)?;
        self.cache.lock().expect("cache lock").insert(pattern, w);
        Ok(w)
    }
}

/// Weighted terms `ω(n/N)·f(n/N)` of one simplex, in deterministic order.
fn simplex_terms<F>(
    simplex: &IntegerSimplex,
    salt: u64,
    n_scale: i64,
    method: SolidAngleMethod,
    f: &F,
) -> Result<Vec<f64>, GeometryError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let cache = WeightCache::new(simplex, method, salt);
    let ranges = simplex.scaled_box(n_scale);
    let (first, rest) = ranges.split_first().expect("d >= 1");
    let rest_points = box_points(rest);
    let rows: Vec<Result<Vec<f64>, GeometryError>> = (first.0..=first.1)
        .into_par_iter()
        .map(|x0| {
            let mut row = Vec::new();
            let mut num = vec![0i128; simplex.dim()];
            let mut pt = vec![0.0; simplex.dim()];
            num[0] = x0 as i128;
            for tail in &rest_points {
                for (k, v) in tail.iter().enumerate() {
                    num[k + 1] = *v as i128;
                }
                if let Some(pat) = simplex.pattern_i128(&num, n_scale as i128) {
                    for (k, v) in num.iter().enumerate() {
                        pt[k] = *v as f64 / n_scale as f64;
                    }
                    row.push(cache.weight(pat)? * f(&pt));
                }
            }
            Ok(row)
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// `S_N(f, P) = N^{-d} Σ_n ω_P(n/N) f(n/N)`.
pub fn weighted_sum<F>(
    complex: &SimplicialComplex,
    f: &F,
    n: u64,
    method: SolidAngleMethod,
) -> Result<f64, GeometryError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    complex.check_method(method)?;
    let scale =
        i64::try_from(n).map_err(|_| GeometryError::InvalidComplex("N too large".into()))?;
    let mut per_simplex = Vec::with_capacity(complex.simplices().len());
    for (idx, s) in complex.simplices().iter().enumerate() {
        let terms = simplex_terms(s, idx as u64, scale, method, f)?;
        per_simplex.push(pairwise_sum(&terms));
    }
    Ok(pairwise_sum(&per_simplex) / (n as f64).powi(complex.dim() as i32))
}

/// `Σ_{n∈ℤ^d} ω_{τP}(n)` for an integer dilation `τ`.
pub fn weighted_lattice_count(
    complex: &SimplicialComplex,
    tau: u64,
    method: SolidAngleMethod,
) -> Result<f64, GeometryError> {
    complex.check_method(method)?;
    let mut per_simplex = Vec::new();
    for (idx, s) in complex.simplices().iter().enumerate() {
        let terms = simplex_terms(s, idx as u64, tau as i64, method, &|_: &[f64]| 1.0)?;
        per_simplex.push(pairwise_sum(&terms));
    }
    Ok(pairwise_sum(&per_simplex))
}

/// Triangulates the convex hull of points in convex position without new
/// vertices, by pulling: every facet not containing the first vertex is
/// triangulated recursively and coned from that vertex.
pub fn triangulate_convex(vertices: &[Vec<i64>]) -> Result<SimplicialComplex, GeometryError> {
    let d = vertices.first().map(|v| v.len()).unwrap_or(0);
    if d == 0 {
        return Err(GeometryError::LowerDimensional(0));
    }
    let mut uniq: Vec<Vec<i64>> = Vec::new();
    for v in vertices {
        if v.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        if !uniq.contains(v) {
            uniq.push(v.clone());
        }
    }
    let diffs: Vec<Vec<i64>> = uniq[1..]
        .iter()
        .map(|v| v.iter().zip(&uniq[0]).map(|(a, b)| a - b).collect())
        .collect();
    if linalg::rank(&diffs) < d {
        return Err(GeometryError::LowerDimensional(d));
    }
    let ids: Vec<usize> = (0..uniq.len()).collect();
    let cells = pull(&uniq, &ids);
    let simplices = cells
        .into_iter()
        .map(|cell| {
            let verts: Vec<Vec<i64>> = cell.iter().map(|&i| uniq[i].clone()).collect();
            IntegerSimplex::from_vertices(&verts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    SimplicialComplex::new(d, simplices)
}

/// Pulling triangulation of full-dimensional points (in their own
/// coordinates); returns cells as lists of ids.
fn pull(points: &[Vec<i64>], ids: &[usize]) -> Vec<Vec<usize>> {
    let k = points[0].len();
    if points.len() == k + 1 {
        return vec![ids.to_vec()];
    }
    if k == 1 {
        let lo = (0..points.len()).min_by_key(|&i| points[i][0]).unwrap();
        let hi = (0..points.len()).max_by_key(|&i| points[i][0]).unwrap();
        return vec![vec![ids[lo], ids[hi]]];
    }
    let mut cells = Vec::new();
    for facet in hull_facets(points) {
        if facet.contains(&0) {
            continue;
        }
        let sub: Vec<Vec<i64>> = facet.iter().map(|&i| points[i].clone()).collect();
        let coords = injective_projection(&sub, k - 1);
        let projected: Vec<Vec<i64>> = sub
            .iter()
            .map(|p| coords.iter().map(|&c| p[c]).collect())
            .collect();
        let sub_ids: Vec<usize> = facet.iter().map(|&i| ids[i]).collect();
        for mut cell in pull(&projected, &sub_ids) {
            cell.insert(0, ids[0]);
            cells.push(cell);
        }
    }
    cells
}

/// Facets of the hull of full-dimensional points, as sorted index sets.
fn hull_facets(points: &[Vec<i64>]) -> Vec<Vec<usize>> {
    let k = points[0].len();
    let n = points.len();
    let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for combo in combinations(n, k) {
        let base = &points[combo[0]];
        let diffs: Vec<Vec<i64>> = combo[1..]
            .iter()
            .map(|&i| points[i].iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        // Normal via signed maximal minors of the (k-1) x k difference matrix.
        let normal: Vec<i64> = (0..k)
            .map(|c| {
                let minor: Vec<Vec<i64>> = diffs
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(j, _)| *j != c)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let s = if c % 2 == 0 { 1 } else { -1 };
                (s * linalg::det(&minor)) as i64
            })
            .collect();
        if normal.iter().all(|v| *v == 0) {
            continue;
        }
        let offset: i64 = normal.iter().zip(base).map(|(a, b)| a * b).sum();
        let side: Vec<i64> = points
            .iter()
            .map(|p| normal.iter().zip(p).map(|(a, b)| a * b).sum::<i64>() - offset)
            .collect();
        if side.iter().all(|s| *s >= 0) || side.iter().all(|s| *s <= 0) {
            facets.insert((0..n).filter(|&i| side[i] == 0).collect());
        }
    }
    facets.into_iter().collect()
}

/// Coordinates on which the projection of the affine hull of `points`
/// (dimension `dim`) is injective.
fn injective_projection(points: &[Vec<i64>], dim: usize) -> Vec<usize> {
    let k = points[0].len();
    let diffs: Vec<Vec<i64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
        .collect();
    for coords in combinations(k, dim) {
        let sub: Vec<Vec<i64>> = diffs
            .iter()
            .map(|r| coords.iter().map(|&c| r[c]).collect())
            .collect();
        if linalg::rank(&sub) == dim {
            return coords;
        }
    }
    unreachable!("a facet of a full-dimensional polytope has full-rank projection")
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Converts a point of `f64` coordinates to exact rationals.
pub fn exact_point(x: &[f64]) -> Vec<BigRational> {
    x.iter().map(|v| linalg::rational_from_f64(*v)).collect()
}

/// `x` as an exact rational when it is a ratio of small integers.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> SimplicialComplex {
        triangulate_convex(&[vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]]).unwrap()
    }

    #[test]
    fn solid_angle_examples() {
        let tri = SimplicialComplex::single(IntegerSimplex::standard(2));
        let m = SolidAngleMethod::ExactLowDim;
        assert!((solid_angle(&tri, &[0.0, 0.0], m).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(solid_angle(&tri, &[0.2, 0.2], m).unwrap(), 1.0);
        assert_eq!(solid_angle(&tri, &[0.7, 0.7], m).unwrap(), 0.0);
        assert_eq!(solid_angle(&tri, &[0.5, 0.5], m).unwrap(), 0.5);
        assert!((solid_angle(&tri, &[1.0, 0.0], m).unwrap() - 0.125).abs() < 1e-15);
        let cube = triangulate_convex(&cube_vertices()).unwrap();
        for corner in cube_vertices() {
            let x: Vec<f64> = corner.iter().map(|v| *v as f64).collect();
            assert!(
                (solid_angle(&cube, &x, m).unwrap() - 0.125).abs() < 1e-14,
                "{x:?}"
            );
        }
        assert!((solid_angle(&cube, &[0.5, 0.0, 0.0], m).unwrap() - 0.25).abs() < 1e-14);
        assert!((solid_angle(&cube, &[0.5, 0.5, 0.0], m).unwrap() - 0.5).abs() < 1e-14);
        assert!((solid_angle(&cube, &[0.5, 0.5, 0.5], m).unwrap() - 1.0).abs() < 1e-14);
    }

    fn cube_vertices() -> Vec<Vec<i64>> {
        box_points(&[(0, 1), (0, 1), (0, 1)])
    }

    #[test]
    fn weighted_sum_examples() {
        let m = SolidAngleMethod::ExactLowDim;
        let seg = SimplicialComplex::single(IntegerSimplex::standard(1));
        assert!((weighted_sum(&seg, &|_: &[f64]| 1.0, 4, m).unwrap() - 1.0).abs() < 1e-15);
        let tri = SimplicialComplex::single(IntegerSimplex::standard(2));
        assert!((weighted_sum(&tri, &|_: &[f64]| 1.0, 1, m).unwrap() - 0.5).abs() < 1e-15);
        assert!((weighted_sum(&tri, &|_: &[f64]| 1.0, 2, m).unwrap() - 0.5).abs() < 1e-15);
        assert!((weighted_lattice_count(&tri, 2, m).unwrap() - 2.0).abs() < 1e-14);
        assert!((weighted_lattice_count(&unit_square(), 3, m).unwrap() - 9.0).abs() < 1e-13);
    }

    #[test]
    fn triangulation_examples() {
        assert_eq!(unit_square().simplices().len(), 2);
        let simplex =
            triangulate_convex(&[vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])
                .unwrap();
        assert_eq!(simplex.simplices().len(), 1);
        let cube = triangulate_convex(&cube_vertices()).unwrap();
        assert_eq!(cube.simplices().len(), 6);
        let total: i128 = cube.simplices().iter().map(|s| s.det().abs()).sum();
        assert_eq!(total, 6);
        assert!(cube.interiors_disjoint(200, 1));
        assert!(triangulate_convex(&[vec![0, 0], vec![1, 1], vec![2, 2]]).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let tri = SimplicialComplex::single(IntegerSimplex::standard(2));
        let mc = SolidAngleMethod::MonteCarlo {
            samples: 20_000,
            seed: 7,
        };
        let v = solid_angle(&tri, &[0.0, 0.0], mc).unwrap();
        assert!((v - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / 20_000.0).sqrt());
    }

    #[test]
    fn json_roundtrip() {
        let c =
            SimplicialComplex::from_json(r#"{"d":2,"simplices":[{"p":[0,0],"M":[[1,0],[0,1]]}]}"#)
                .unwrap();
        assert_eq!(c.simplices()[0], IntegerSimplex::standard(2));
        assert_eq!(SimplicialComplex::from_json(&c.to_json()).unwrap(), c);
    }
}
