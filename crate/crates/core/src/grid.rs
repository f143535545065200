//! Multi-index bookkeeping for truncated monomial bases.
//!
//! A [`TruncationGrid`] with caps `(d_1, …, d_n)` spans the monomials `z^k`
//! with `0 ≤ k_j ≤ d_j`. Linear indices follow lexicographic order with the
//! last variable fastest, so splitting the variables into a leading and a
//! trailing block turns a coefficient vector into a row-major matrix without
//! any data movement.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::HardyElement;
use crate::numkernel::{CMatrix, OperatorMatrix};
use crate::C64;

/// Name of the monomial ordering, as written in serialized tensors.
pub const ORDERING: &str = "lex-last-fastest";

/// A multi-degree `k ∈ Z_+^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit multi-index `e_j` of length `n`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut v = vec![0; n];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, j: usize) -> usize {
        self.0[j]
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn same_len(&self, other: &MultiIndex) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "multi-index lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        self.same_len(other)?;
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Componentwise difference, `None` when some entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Result<Option<MultiIndex>> {
        self.same_len(other)?;
        let mut out = Vec::with_capacity(self.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if a < b {
                return Ok(None);
            }
            out.push(a - b);
        }
        Ok(Some(MultiIndex(out)))
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> Result<bool> {
        self.same_len(other)?;
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }

    /// Concatenation `(self, other)`.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex(v)
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Finite monomial basis `{z^k : k_j ≤ caps_j}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruncationGrid {
    caps: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl TruncationGrid {
    pub fn new(caps: Vec<usize>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::DomainError("a grid needs at least one variable".into()));
        }
        let n = caps.len();
        let mut strides = vec![1usize; n];
        for j in (0..n - 1).rev() {
            strides[j] = strides[j + 1]
                .checked_mul(caps[j + 1] + 1)
                .ok_or_else(|| Error::DomainError("grid too large".into()))?;
        }
        let size = strides[0]
            .checked_mul(caps[0] + 1)
            .ok_or_else(|| Error::DomainError("grid too large".into()))?;
        Ok(TruncationGrid { caps, strides, size })
    }

    /// Grid with the same cap `d` in each of `n` variables.
    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn nvars(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn cap(&self, j: usize) -> usize {
        self.caps[j]
    }

    pub fn caps_index(&self) -> MultiIndex {
        MultiIndex(self.caps.clone())
    }

    /// Number of monomials, `∏ (d_j + 1)`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self, j: usize) -> usize {
        self.strides[j]
    }

    pub fn contains(&self, k: &MultiIndex) -> bool {
        k.len() == self.nvars() && k.0.iter().zip(&self.caps).all(|(a, d)| a <= d)
    }

    /// Position of `z^k` in the grid ordering.
    pub fn lin_index(&self, k: &MultiIndex) -> Result<usize> {
        if k.len() != self.nvars() {
            return Err(Error::GridMismatch(format!(
                "multi-index of length {} on a {}-variable grid",
                k.len(),
                self.nvars()
            )));
        }
        if !self.contains(k) {
            return Err(Error::DegreeOverflow {
                index: k.0.clone(),
                caps: self.caps.clone(),
            });
        }
        Ok(self.lin_index_unchecked(&k.0))
    }

    #[inline]
    pub(crate) fn lin_index_unchecked(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Inverse of [`lin_index`](Self::lin_index).
    pub fn multi_index(&self, lin: usize) -> MultiIndex {
        debug_assert!(lin < self.size);
        let mut rest = lin;
        let mut out = Vec::with_capacity(self.nvars());
        for s in &self.strides {
            out.push(rest / s);
            rest %= s;
        }
        MultiIndex(out)
    }

    /// Degree in variable `j` of the monomial at linear index `lin`.
    #[inline]
    pub fn degree_at(&self, lin: usize, j: usize) -> usize {
        (lin / self.strides[j]) % (self.caps[j] + 1)
    }

    /// All multi-indices in grid order.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.size).map(move |i| self.multi_index(i))
    }

    /// Same grid with the cap of variable `j` raised by `by`.
    pub fn enlarged(&self, j: usize, by: usize) -> TruncationGrid {
        let mut caps = self.caps.clone();
        caps[j] += by;
        TruncationGrid::new(caps).expect("enlarging a valid grid")
    }

    /// Componentwise sum of caps (the codomain of a product of two elements).
    pub fn sum(&self, other: &TruncationGrid) -> Result<TruncationGrid> {
        if self.nvars() != other.nvars() {
            return Err(Error::GridMismatch(format!(
                "cannot add grids with {} and {} variables",
                self.nvars(),
                other.nvars()
            )));
        }
        TruncationGrid::new(self.caps.iter().zip(&other.caps).map(|(a, b)| a + b).collect())
    }

    /// Grid over the variables `start..end`.
    pub fn sub_grid(&self, start: usize, end: usize) -> TruncationGrid {
        TruncationGrid::new(self.caps[start..end].to_vec()).expect("non-empty variable range")
    }

    /// Grid over the concatenated variables of `self` then `other`.
    pub fn concat(&self, other: &TruncationGrid) -> TruncationGrid {
        let mut caps = self.caps.clone();
        caps.extend_from_slice(&other.caps);
        TruncationGrid::new(caps).expect("concatenation of valid grids")
    }

    /// Whether every cap of `self` is at most the matching cap of `other`.
    pub fn fits_in(&self, other: &TruncationGrid) -> bool {
        self.nvars() == other.nvars() && self.caps.iter().zip(&other.caps).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for TruncationGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid{}", MultiIndex(self.caps.clone()))
    }
}

/// Isometric inclusion of `src` into `dst`, mapping `z^k` to `z^k`.
pub fn embed(src: &TruncationGrid, dst: &TruncationGrid) -> Result<OperatorMatrix> {
    if !src.fits_in(dst) {
        return Err(Error::GridMismatch(format!("{src} does not fit in {dst}")));
    }
    let mut m = CMatrix::zeros(dst.size(), src.size());
    for (i, k) in src.indices().enumerate() {
        m[(dst.lin_index_unchecked(k.entries()), i)] = C64::new(1.0, 0.0);
    }
    OperatorMatrix::between(m, src.clone(), dst.clone())
}

/// Re-indexes a coefficient vector from `src` into `dst` (zero padding).
/// Coefficients outside `dst` are dropped.
pub(crate) fn transfer(src: &TruncationGrid, dst: &TruncationGrid, coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dst.size()];
    for (i, c) in coeffs.iter().enumerate() {
        let k = src.multi_index(i);
        if dst.contains(&k) {
            out[dst.lin_index_unchecked(k.entries())] = *c;
        }
    }
    out
}

/// Splits a grid's variables into the first `k` and the remaining `n − k`.
///
/// This realizes the identification `H^2(D^{m+n}) ≅ H^2_{H^2(D^m)}(D^n)`:
/// the leading block plays the role of the scalar variables and the trailing
/// block the coefficient space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSplit {
    parent: TruncationGrid,
    k: usize,
    left: TruncationGrid,
    right: TruncationGrid,
}

impl GridSplit {
    pub fn new(parent: TruncationGrid, k: usize) -> Result<Self> {
        if k == 0 || k >= parent.nvars() {
            return Err(Error::DomainError(format!(
                "split index {k} must lie in 1..{}",
                parent.nvars()
            )));
        }
        let left = parent.sub_grid(0, k);
        let right = parent.sub_grid(k, parent.nvars());
        Ok(GridSplit { parent, k, left, right })
    }

    pub fn parent(&self) -> &TruncationGrid {
        &self.parent
    }

    /// Number of leading variables.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn left(&self) -> &TruncationGrid {
        &self.left
    }

    pub fn right(&self) -> &TruncationGrid {
        &self.right
    }

    /// Parent linear index to `(left index, right index)`.
    pub fn split_index(&self, lin: usize) -> (usize, usize) {
        (lin / self.right.size(), lin % self.right.size())
    }

    pub fn join_index(&self, left: usize, right: usize) -> usize {
        left * self.right.size() + right
    }

    /// Matricization of a coefficient vector on the parent grid.
    pub fn matricize(&self, coeffs: &[C64]) -> CMatrix {
        let nr = self.right.size();
        CMatrix::from_fn(self.left.size(), nr, |i, j| coeffs[i * nr + j])
    }

    /// Inverse of [`matricize`](Self::matricize).
    pub fn vectorize(&self, m: &CMatrix) -> Vec<C64> {
        let nr = self.right.size();
        let mut out = vec![C64::new(0.0, 0.0); self.parent.size()];
        for i in 0..m.nrows() {
            for j in 0..nr {
                out[i * nr + j] = m[(i, j)];
            }
        }
        out
    }
}

/// Matricizes `f` across the split: rows index the leading-block monomials,
/// columns the trailing-block monomials.
pub fn regroup(split: &GridSplit, f: &HardyElement) -> Result<CMatrix> {
    if f.grid() != split.parent() {
        return Err(Error::GridMismatch(format!(
            "element on {} but split of {}",
            f.grid(),
            split.parent()
        )));
    }
    Ok(split.matricize(f.coeffs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lin_index_examples() {
        let g = TruncationGrid::new(vec![3]).unwrap();
        assert_eq!(g.lin_index(&MultiIndex::new(vec![0])).unwrap(), 0);

        let g = TruncationGrid::new(vec![2, 2]).unwrap();
        // enumeration oracle: (0,0),(0,1),(0,2),(1,0),...
        let order: Vec<MultiIndex> = (0..=2)
            .flat_map(|a| (0..=2).map(move |b| MultiIndex::new(vec![a, b])))
            .collect();
        let pos = order.iter().position(|k| *k == MultiIndex::new(vec![1, 0])).unwrap();
        assert_eq!(pos, 3);
        assert_eq!(g.lin_index(&MultiIndex::new(vec![1, 0])).unwrap(), 3);
        for (i, k) in order.iter().enumerate() {
            assert_eq!(g.lin_index(k).unwrap(), i);
        }

        assert!(matches!(
            g.lin_index(&MultiIndex::new(vec![3, 0])),
            Err(Error::DegreeOverflow { .. })
        ));
        assert!(matches!(
            g.lin_index(&MultiIndex::new(vec![1])),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn mixed_length_arithmetic_rejected() {
        let a = MultiIndex::new(vec![1, 2]);
        let b = MultiIndex::new(vec![1]);
        assert!(a.checked_add(&b).is_err());
        assert!(a.checked_sub(&b).is_err());
        assert_eq!(a.checked_sub(&MultiIndex::new(vec![2, 0])).unwrap(), None);
    }

    #[test]
    fn embed_examples() {
        let g2 = TruncationGrid::new(vec![2]).unwrap();
        let id = embed(&g2, &g2).unwrap();
        assert_eq!(id.as_matrix(), &CMatrix::identity(3, 3));

        let g1 = TruncationGrid::new(vec![1]).unwrap();
        let e = embed(&g1, &g2).unwrap();
        assert_eq!((e.rows(), e.cols()), (3, 2));
        assert_eq!(e.as_matrix()[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(e.as_matrix()[(1, 1)], C64::new(1.0, 0.0));
        assert_eq!(e.as_matrix()[(2, 1)], C64::new(0.0, 0.0));
        // restrict ∘ embed = identity on src
        let back = e.adjoint().mul(&e).unwrap();
        assert_eq!(back.as_matrix(), &CMatrix::identity(2, 2));

        assert!(matches!(embed(&g2, &g1), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn regroup_examples() {
        let g = TruncationGrid::new(vec![1, 1]).unwrap();
        let split = GridSplit::new(g.clone(), 1).unwrap();
        let z1z2 = HardyElement::monomial(&g, &MultiIndex::new(vec![1, 1])).unwrap();
        let m = regroup(&split, &z1z2).unwrap();
        assert_eq!(m[(1, 1)], C64::new(1.0, 0.0));
        assert_eq!(m.iter().filter(|c| c.norm() > 0.0).count(), 1);

        let f = HardyElement::monomial(&g, &MultiIndex::new(vec![1, 0]))
            .unwrap()
            .add(&HardyElement::monomial(&g, &MultiIndex::new(vec![0, 1])).unwrap())
            .unwrap();
        let m = regroup(&split, &f).unwrap();
        // z1 sits at (1, 0), z2 at (0, 1)
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        let sv = m.clone().svd(false, false).singular_values;
        assert!(sv.iter().filter(|s| **s > 1e-12).count() == 2);

        let other = TruncationGrid::new(vec![2, 1]).unwrap();
        let h = HardyElement::zeros(&other);
        assert!(matches!(regroup(&split, &h), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn split_rejects_trivial_index() {
        let g = TruncationGrid::uniform(2, 1).unwrap();
        assert!(GridSplit::new(g.clone(), 0).is_err());
        assert!(GridSplit::new(g, 2).is_err());
    }
}
