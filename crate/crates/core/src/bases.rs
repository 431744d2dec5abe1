//! Recursive basis families, their λ-vectors, and the cone partition of
//! frequency space.
//!
//! For dimension `d` the family holds `2^{d-1}` unimodular bases built by
//! elementary shears.  Each `V ∈ {1,2}^d` selects a basis through
//! `(v_2, …, v_d)` together with a translation vector `λ_V`.  The union of
//! all basis vectors is `{e_j} ∪ {e_l − e_k : l < k}`; a frequency `ξ`
//! belongs to the cone of the subspace spanned by the union vectors
//! orthogonal to it.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, IMat};

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;

/// Errors raised by the basis-family constructors and queries.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasesError {
    /// Requested dimension outside `1..=MAX_DIM`.
    #[error("dimension {0} outside the supported range 1..={MAX_DIM}")]
    DimensionCap(usize),
    /// A `V` index of the wrong length or with entries outside `{1, 2}`.
    #[error("invalid V index {0:?} for dimension {1}")]
    InvalidV(Vec<u8>, usize),
}

/// The family `F^(d)` with λ-vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasisFamily {
    d: usize,
    /// `bases[j][k]` is the `k`-th vector of the `j`-th basis.
    bases: Vec<Vec<Vec<i64>>>,
    /// `e_1, …, e_d` followed by `e_l − e_k` (l < k) in lexicographic order.
    union: Vec<Vec<i64>>,
}

fn unit(d: usize, k: usize) -> Vec<i64> {
    (0..d).map(|i| i64::from(i == k)).collect()
}

impl BasisFamily {
    /// Builds `F^(d)` by the shear recursion.
    pub fn build(d: usize) -> Result<Self, BasesError> {
        if d == 0 || d > MAX_DIM {
            return Err(BasesError::DimensionCap(d));
        }
        let mut bases: Vec<Vec<Vec<i64>>> = vec![vec![vec![1]]];
        for dim in 2..=d {
            let mut next = Vec::with_capacity(bases.len() * 2);
            // First half: pad with a zero coordinate.
            for basis in &bases {
                let mut b: Vec<Vec<i64>> = basis
                    .iter()
                    .map(|v| {
                        let mut w = v.clone();
                        w.push(0);
                        w
                    })
                    .collect();
                b.push(unit(dim, dim - 1));
                next.push(b);
            }
            // Second half: append minus the coordinate sum.
            for basis in &bases {
                let mut b: Vec<Vec<i64>> = basis
                    .iter()
                    .map(|v| {
                        let mut w = v.clone();
                        w.push(-v.iter().sum::<i64>());
                        w
                    })
                    .collect();
                b.push(unit(dim, dim - 1));
                next.push(b);
            }
            bases = next;
        }
        let mut union: Vec<Vec<i64>> = (0..d).map(|k| unit(d, k)).collect();
        for l in 0..d {
            for k in l + 1..d {
                let mut v = vec![0; d];
                v[l] = 1;
                v[k] = -1;
                union.push(v);
            }
        }
        Ok(BasisFamily { d, bases, union })
    }

    /// Dimension `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// All bases in recursion order.
    pub fn bases(&self) -> &[Vec<Vec<i64>>] {
        &self.bases
    }

    /// Union of all basis vectors (`d + d(d−1)/2` vectors).
    pub fn union_vectors(&self) -> &[Vec<i64>] {
        &self.union
    }

    /// Position of a vector in [`Self::union_vectors`].
    pub fn union_index(&self, v: &[i64]) -> Option<usize> {
        self.union.iter().position(|u| u == v)
    }

    fn check_v(&self, v: &[u8]) -> Result<(), BasesError> {
        if v.len() != self.d || v.iter().any(|x| *x != 1 && *x != 2) {
            return Err(BasesError::InvalidV(v.to_vec(), self.d));
        }
        Ok(())
    }

    /// Index of the basis selected by `V` (determined by `v_2, …, v_d`).
    pub fn basis_index(&self, v: &[u8]) -> Result<usize, BasesError> {
        self.check_v(v)?;
        Ok(v.iter()
            .enumerate()
            .skip(1)
            .map(|(h, x)| usize::from(x - 1) << (h - 1))
            .sum())
    }

    /// The basis `B_V`.
    pub fn basis(&self, v: &[u8]) -> Result<&[Vec<i64>], BasesError> {
        Ok(&self.bases[self.basis_index(v)?])
    }

    /// The translation vector `λ_V`.
    pub fn lambda(&self, v: &[u8]) -> Result<Vec<i64>, BasesError> {
        self.check_v(v)?;
        let mut lam = vec![i64::from(v[0] == 2)];
        for &vh in &v[1..] {
            let s: i64 = lam.iter().sum();
            lam.push(if vh == 1 { 0 } else { 1 - s });
        }
        Ok(lam)
    }

    /// `D_V`, the matrix whose columns are the vectors of `B_V`.
    pub fn d_matrix(&self, v: &[u8]) -> Result<IMat, BasesError> {
        let b = self.basis(v)?;
        Ok(linalg::transpose(b))
    }

    /// All `V ∈ {1,2}^d`, with `v_1` varying fastest.
    pub fn all_v(&self) -> Vec<Vec<u8>> {
        all_binary(self.d, &[1, 2])
    }
}

/// All vectors over `alphabet` of length `d`, first coordinate fastest.
pub(crate) fn all_binary(d: usize, alphabet: &[u8; 2]) -> Vec<Vec<u8>> {
    (0..1usize << d)
        .map(|mask| (0..d).map(|k| alphabet[(mask >> k) & 1]).collect())
        .collect()
}

/// A subspace spanned by union vectors, stored as the closed set of union
/// vectors it contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Theta {
    bits: u64,
}

impl Theta {
    /// Raw bitset over the union vectors.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Whether the `idx`-th union vector lies in the subspace.
    pub fn contains_index(&self, idx: usize) -> bool {
        (self.bits >> idx) & 1 == 1
    }

    /// Whether the vector `v` (a union vector) lies in the subspace.
    pub fn contains(&self, family: &BasisFamily, v: &[i64]) -> bool {
        match family.union_index(v) {
            Some(i) => self.contains_index(i),
            None => {
                let mut gens = self.generators(family);
                let r = linalg::rank(&gens);
                gens.push(v.to_vec());
                linalg::rank(&gens) == r
            }
        }
    }

    /// The flagged union vectors.
    pub fn generators(&self, family: &BasisFamily) -> Vec<Vec<i64>> {
        family
            .union_vectors()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.contains_index(*i))
            .map(|(_, v)| v.clone())
            .collect()
    }

    /// Dimension of the subspace.
    pub fn dim(&self, family: &BasisFamily) -> usize {
        linalg::rank(&self.generators(family))
    }

    /// Span of the given union vectors, closed under membership.
    pub fn span_of(family: &BasisFamily, indices: &[usize]) -> Theta {
        let gens: Vec<Vec<i64>> = indices.iter().map(|&i| family.union[i].clone()).collect();
        let r = linalg::rank(&gens);
        let mut bits = 0u64;
        for (i, u) in family.union.iter().enumerate() {
            let mut test = gens.clone();
            test.push(u.clone());
            if linalg::rank(&test) == r {
                bits |= 1 << i;
            }
        }
        Theta { bits }
    }

    /// Checks the closure invariant by exact rank computations.
    pub fn is_closed(&self, family: &BasisFamily) -> bool {
        let idx: Vec<usize> = (0..family.union.len())
            .filter(|i| self.contains_index(*i))
            .collect();
        Theta::span_of(family, &idx) == *self
    }
}

/// The unique `θ` with `ξ ∈ Q(θ)`: flags exactly the union vectors
/// orthogonal to `ξ`.
pub fn classify_frequency(family: &BasisFamily, xi: &[BigRational]) -> Theta {
    let mut bits = 0u64;
    for (i, u) in family.union_vectors().iter().enumerate() {
        let dot: BigRational = u
            .iter()
            .zip(xi)
            .filter(|(a, _)| **a != 0)
            .map(|(a, x)| linalg::rational_from_i64(*a) * x)
            .sum();
        if dot.is_zero() {
            bits |= 1 << i;
        }
    }
    Theta { bits }
}

/// [`classify_frequency`] for an integer frequency.
pub fn classify_integer(family: &BasisFamily, xi: &[i64]) -> Theta {
    let mut bits = 0u64;
    for (i, u) in family.union_vectors().iter().enumerate() {
        let dot: i64 = u.iter().zip(xi).map(|(a, b)| a * b).sum();
        if dot == 0 {
            bits |= 1 << i;
        }
    }
    Theta { bits }
}

/// Classifies the frequency `ξ` relative to the simplex `M·S_d` by pulling
/// back to the standard family: the cone of `Mθ` containing `ξ` corresponds
/// to the standard cone containing `Mᵗ ξ`.
pub fn classify_pullback(family: &BasisFamily, m: &[Vec<i64>], xi: &[BigRational]) -> Theta {
    let d = family.dim();
    let pulled: Vec<BigRational> = (0..d)
        .map(|j| {
            (0..d)
                .map(|i| linalg::rational_from_i64(m[i][j]) * &xi[i])
                .sum()
        })
        .collect();
    classify_frequency(family, &pulled)
}

/// `I_{V,θ}`: `i_k = 0` iff the `k`-th vector of `B_V` lies in `θ`.
pub fn i_multiindex(family: &BasisFamily, v: &[u8], theta: &Theta) -> Result<Vec<u8>, BasesError> {
    let basis = family.basis(v)?;
    Ok(basis
        .iter()
        .map(|b| u8::from(!theta.contains(family, b)))
        .collect())
}

/// Membership in `Δ(I, L) = {n : (Ln)_k = 0 ⟺ i_k = 0}`.
pub fn delta_membership(i: &[u8], l: &[Vec<i64>], n: &[i64]) -> bool {
    linalg::matvec(l, n)
        .iter()
        .zip(i)
        .all(|(x, ik)| (*x == 0) == (*ik == 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_dimension_two() {
        let f = BasisFamily::build(2).unwrap();
        assert_eq!(f.bases()[0], vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(f.bases()[1], vec![vec![1, -1], vec![0, 1]]);
    }

    #[test]
    fn table_one_dimension_three() {
        let f = BasisFamily::build(3).unwrap();
        let expect: [(&[u8], [i64; 3], usize); 8] = [
            (&[1, 1, 1], [0, 0, 0], 0),
            (&[2, 1, 1], [1, 0, 0], 0),
            (&[1, 2, 1], [0, 1, 0], 1),
            (&[2, 2, 1], [1, 0, 0], 1),
            (&[1, 1, 2], [0, 0, 1], 2),
            (&[2, 1, 2], [1, 0, 0], 2),
            (&[1, 2, 2], [0, 1, 0], 3),
            (&[2, 2, 2], [1, 0, 0], 3),
        ];
        for (v, lam, idx) in expect {
            assert_eq!(f.lambda(v).unwrap(), lam.to_vec(), "λ for {v:?}");
            assert_eq!(f.basis_index(v).unwrap(), idx, "basis for {v:?}");
        }
        assert_eq!(
            f.bases()[1],
            vec![vec![1, -1, 0], vec![0, 1, 0], vec![0, 0, 1]]
        );
        assert_eq!(
            f.bases()[2],
            vec![vec![1, 0, -1], vec![0, 1, -1], vec![0, 0, 1]]
        );
        assert_eq!(
            f.bases()[3],
            vec![vec![1, -1, 0], vec![0, 1, -1], vec![0, 0, 1]]
        );
    }

    #[test]
    fn dimension_one_and_cap() {
        let f = BasisFamily::build(1).unwrap();
        assert_eq!(f.bases(), &[vec![vec![1]]]);
        assert_eq!(f.lambda(&[1]).unwrap(), vec![0]);
        assert_eq!(f.lambda(&[2]).unwrap(), vec![1]);
        assert_eq!(BasisFamily::build(7), Err(BasesError::DimensionCap(7)));
        assert_eq!(BasisFamily::build(0), Err(BasesError::DimensionCap(0)));
    }

    #[test]
    fn classification_examples() {
        let f = BasisFamily::build(2).unwrap();
        let full = classify_integer(&f, &[0, 0]);
        assert_eq!(full.bits(), 0b111);
        let diag = classify_integer(&f, &[3, 3]);
        assert_eq!(diag.generators(&f), vec![vec![1, -1]]);
        assert_eq!(classify_integer(&f, &[1, 2]).bits(), 0);
        assert_eq!(i_multiindex(&f, &[1, 2], &diag).unwrap(), vec![0, 1]);
        assert_eq!(i_multiindex(&f, &[1, 1], &full).unwrap(), vec![0, 0]);
        assert_eq!(
            i_multiindex(&f, &[2, 2], &classify_integer(&f, &[1, 2])).unwrap(),
            vec![1, 1]
        );
    }

    #[test]
    fn delta_examples() {
        let id = linalg::identity(2);
        assert!(delta_membership(&[1, 0], &id, &[5, 0]));
        assert!(!delta_membership(&[1, 0], &id, &[5, 1]));
        assert!(delta_membership(&[0, 0], &id, &[0, 0]));
        assert!(!delta_membership(&[1, 1], &id, &[0, 0]));
    }
}
