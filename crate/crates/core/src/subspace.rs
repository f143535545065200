//! Subspaces of truncated Hardy spaces, their compressed shift tuples,
//! wandering subspaces and Wold tilings, and invariance classification.
//!
//! A [`Subspace`] is stored as an ordered list of dense blocks over
//! consecutive variable ranges; the actual basis is the Kronecker product of
//! the block bases (which matches the lex-last-fastest ordering). A subspace
//! with one block is an ordinary dense orthonormal basis. Product structure
//! keeps `H^2(D^k) ⊗ Q` style subspaces on four or more variables small, and
//! every operation below works block by block.
//!
//! Truncation conventions: `z_j` applied to a vector whose top slice in
//! variable `j` vanishes is exact on the grid, so forward statements are
//! checked on `S ∩ Int_j`, the part of `S` with degree below the cap in `z_j`.
//! The wandering subspace is `S ⊖ Σ_j z_j (S ∩ Int_j)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::hardy::{
    backward_shift_rows, derivative_kernel, shift_rows, truncated_shift_rows, HardyElement,
    InnerFunction, InnerStructure,
};
use crate::numkernel::{
    adjoint_matmul, commutator_norms_mat, gram_defect, kron, matmul, null_space, op_norm,
    orthonormal_columns, residual_outside, spectral_radius, thin_q, CMatrix, OperatorMatrix,
};
use crate::{C64, DEFAULT_RANK_EPSILON};

/// Orthonormality tolerance accepted by [`Subspace::dense`].
pub const GRAM_TOL: f64 = 1e-10;

/// A dense orthonormal basis over the variables `start..start + grid.nvars()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    start: usize,
    grid: TruncationGrid,
    basis: CMatrix,
}

impl Block {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.grid.nvars()
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn holds(&self, j: usize) -> bool {
        j >= self.start && j < self.end()
    }

    /// `B* T_j B` for a local variable.
    fn compression(&self, local: usize) -> CMatrix {
        adjoint_matmul(&self.basis, &truncated_shift_rows(&self.grid, local, &self.basis))
    }

    /// Coordinates (in this block's basis) of `S_b ∩ Int_j`.
    fn interior_coords(&self, local: usize) -> Result<CMatrix> {
        let rows = top_slice_rows(&self.grid, local, &self.basis);
        Ok(null_space(&rows, DEFAULT_RANK_EPSILON)?.0)
    }

    fn forward_residual(&self, local: usize) -> Result<f64> {
        let x = self.interior_coords(local)?;
        if x.ncols() == 0 {
            return Ok(0.0);
        }
        let c = matmul(&self.basis, &x);
        let tc = truncated_shift_rows(&self.grid, local, &c);
        Ok(residual_outside(&self.basis, &tc))
    }

    fn backward_residual(&self, local: usize) -> f64 {
        let tb = backward_shift_rows(&self.grid, local, &self.basis);
        residual_outside(&self.basis, &tb)
    }

    /// Backward residual measured on degrees below the cap of `local`, the
    /// only rows a truncated kernel reproduces exactly.
    fn backward_interior_residual(&self, local: usize) -> Result<f64> {
        interior_backward_residual(&self.grid, local, &self.basis, &self.basis)
    }

    /// Wandering subspace of this block for the given local variables.
    fn wandering(&self, locals: &[usize], rank_epsilon: f64) -> Result<CMatrix> {
        let r = self.dim();
        if r == 0 || locals.is_empty() {
            return Ok(self.basis.clone());
        }
        let mut stacked: Vec<CMatrix> = Vec::new();
        for &j in locals {
            let x = self.interior_coords(j)?;
            if x.ncols() == 0 {
                continue;
            }
            // rows X_j* (B* T_j* B): inner products against z_j (S ∩ Int_j)
            let bstar_tstar_b =
                adjoint_matmul(&self.basis, &backward_shift_rows(&self.grid, j, &self.basis));
            stacked.push(adjoint_matmul(&x, &bstar_tstar_b));
        }
        let total: usize = stacked.iter().map(|m| m.nrows()).sum();
        if total == 0 {
            return Ok(self.basis.clone());
        }
        let mut a = CMatrix::zeros(total, r);
        let mut at = 0;
        for m in &stacked {
            a.rows_mut(at, m.nrows()).copy_from(m);
            at += m.nrows();
        }
        let (kernel, _) = null_space(&a, rank_epsilon)?;
        Ok(matmul(&self.basis, &kernel))
    }
}

/// `‖(I − P) R z_j^* c‖` where `R` drops the slice `deg_j = cap_j` and `P`
/// projects onto the column space of `R b`.
pub(crate) fn interior_backward_residual(grid: &TruncationGrid, j: usize, b: &CMatrix, c: &CMatrix) -> Result<f64> {
    let cap = grid.cap(j);
    let keep: Vec<usize> = (0..grid.size()).filter(|&i| grid.degree_at(i, j) < cap).collect();
    if keep.is_empty() || b.ncols() == 0 || c.ncols() == 0 {
        return Ok(0.0);
    }
    let tc = backward_shift_rows(grid, j, c).select_rows(keep.iter());
    let (q, _) = orthonormal_columns(&b.select_rows(keep.iter()), DEFAULT_RANK_EPSILON)?;
    Ok(residual_outside(&q, &tc))
}

/// Rows of `m` whose multi-index has degree `cap_j` in variable `j`.
fn top_slice_rows(grid: &TruncationGrid, j: usize, m: &CMatrix) -> CMatrix {
    let cap = grid.cap(j);
    let idx: Vec<usize> = (0..grid.size()).filter(|&i| grid.degree_at(i, j) == cap).collect();
    m.select_rows(idx.iter())
}

/// A closed subspace of a truncated Hardy space, as a product of dense
/// orthonormal blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    grid: TruncationGrid,
    blocks: Vec<Block>,
}

impl Subspace {
    /// Single-block subspace from a basis with orthonormal columns.
    pub fn dense(grid: TruncationGrid, basis: CMatrix) -> Result<Self> {
        if basis.nrows() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} basis rows for {grid} of size {}",
                basis.nrows(),
                grid.size()
            )));
        }
        let defect = gram_defect(&basis);
        if defect > GRAM_TOL {
            return Err(Error::NumericError(format!("basis is not orthonormal (defect {defect:.3e})")));
        }
        Ok(Subspace { blocks: vec![Block { start: 0, grid: grid.clone(), basis }], grid })
    }

    /// Span of arbitrary columns, orthonormalized with the given rank epsilon.
    pub fn from_columns(grid: TruncationGrid, columns: &CMatrix, rank_epsilon: f64) -> Result<Self> {
        if columns.nrows() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} rows for {grid} of size {}",
                columns.nrows(),
                grid.size()
            )));
        }
        let (q, _) = orthonormal_columns(columns, rank_epsilon)?;
        Subspace::dense(grid, q)
    }

    /// Span of a list of elements on a common grid.
    pub fn span(elements: &[HardyElement], rank_epsilon: f64) -> Result<Self> {
        let grid = elements
            .first()
            .ok_or_else(|| Error::DomainError("span of no elements".into()))?
            .grid()
            .clone();
        let cols = columns_of(elements, &grid)?;
        Subspace::from_columns(grid, &cols, rank_epsilon)
    }

    /// Product subspace from per-block grids and orthonormal bases, listed in
    /// variable order.
    pub fn from_blocks(parts: Vec<(TruncationGrid, CMatrix)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::DomainError("subspace with no blocks".into()));
        }
        let mut blocks = Vec::with_capacity(parts.len());
        let mut start = 0;
        let mut caps = Vec::new();
        for (grid, basis) in parts {
            let one = Subspace::dense(grid.clone(), basis)?;
            caps.extend_from_slice(grid.caps());
            let b = one.blocks.into_iter().next().expect("one block");
            blocks.push(Block { start, ..b });
            start += grid.nvars();
        }
        Ok(Subspace { grid: TruncationGrid::new(caps)?, blocks })
    }

    /// The whole truncated space.
    pub fn full(grid: &TruncationGrid) -> Self {
        Subspace {
            grid: grid.clone(),
            blocks: vec![Block { start: 0, grid: grid.clone(), basis: CMatrix::identity(grid.size(), grid.size()) }],
        }
    }

    /// `self ⊗ other` on the concatenated grid.
    pub fn tensor(&self, other: &Subspace) -> Subspace {
        let shift = self.grid.nvars();
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().map(|b| Block { start: b.start + shift, ..b.clone() }));
        Subspace { grid: self.grid.concat(&other.grid), blocks }
    }

    /// Tensor product of a list of subspaces, in order.
    pub fn tensor_all(parts: &[Subspace]) -> Result<Subspace> {
        let mut it = parts.iter();
        let first = it.next().ok_or_else(|| Error::DomainError("tensor of no subspaces".into()))?;
        Ok(it.fold(first.clone(), |acc, s| acc.tensor(s)))
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).product()
    }

    /// Materialized orthonormal basis (Kronecker product of the blocks).
    pub fn basis(&self) -> CMatrix {
        let mut it = self.blocks.iter();
        let first = it.next().expect("at least one block").basis.clone();
        it.fold(first, |acc, b| kron(&acc, &b.basis))
    }

    pub fn basis_operator(&self) -> OperatorMatrix {
        OperatorMatrix::new(self.basis())
    }

    /// The same subspace as a single dense block.
    pub fn densify(&self) -> Subspace {
        if self.blocks.len() == 1 {
            return self.clone();
        }
        Subspace {
            grid: self.grid.clone(),
            blocks: vec![Block { start: 0, grid: self.grid.clone(), basis: self.basis() }],
        }
    }

    /// Merges blocks so that block boundaries are exactly `bounds`
    /// (variable indices, excluding 0 and n). Every requested boundary must
    /// already be a boundary of the current blocks.
    pub fn regroup_blocks(&self, bounds: &[usize]) -> Result<Subspace> {
        let n = self.grid.nvars();
        let mut cuts = vec![0];
        cuts.extend_from_slice(bounds);
        cuts.push(n);
        let mut blocks = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo >= hi {
                return Err(Error::DomainError(format!("block bounds {bounds:?} not increasing")));
            }
            let inside: Vec<&Block> =
                self.blocks.iter().filter(|b| b.start >= lo && b.end() <= hi).collect();
            let covered: usize = inside.iter().map(|b| b.grid.nvars()).sum();
            if covered != hi - lo {
                return Err(Error::DomainError(format!(
                    "boundary at {lo}..{hi} cuts through an existing block"
                )));
            }
            let mut basis = inside[0].basis.clone();
            for b in &inside[1..] {
                basis = kron(&basis, &b.basis);
            }
            blocks.push(Block { start: lo, grid: self.grid.sub_grid(lo, hi), basis });
        }
        Ok(Subspace { grid: self.grid.clone(), blocks })
    }

    /// Coordinates `B* A` of the columns of `a`.
    pub fn coordinates(&self, a: &CMatrix) -> CMatrix {
        adjoint_matmul(&self.basis(), a)
    }

    /// `‖(I − P) A‖` for columns on the grid.
    pub fn residual(&self, a: &CMatrix) -> f64 {
        residual_outside(&self.basis(), a)
    }

    /// `P = B B*`.
    pub fn projector(&self) -> OperatorMatrix {
        let b = self.basis();
        OperatorMatrix::new(matmul(&b, &b.adjoint()))
    }

    /// `‖B* B − I‖`.
    pub fn gram_defect(&self) -> f64 {
        self.blocks.iter().map(|b| gram_defect(&b.basis)).fold(0.0, f64::max)
    }

    fn block_of(&self, j: usize) -> (usize, usize) {
        let b = self.blocks.iter().position(|b| b.holds(j)).expect("variable in range");
        (b, j - self.blocks[b].start)
    }

    /// Forward residual `‖(I−P) z_j P_{S ∩ Int_j}‖` for variable `j`.
    pub fn forward_residual(&self, j: usize) -> Result<f64> {
        let (b, l) = self.block_of(j);
        self.blocks[b].forward_residual(l)
    }

    /// Backward residual `‖(I−P) z_j^* P‖` for variable `j`.
    pub fn backward_residual(&self, j: usize) -> f64 {
        let (b, l) = self.block_of(j);
        self.blocks[b].backward_residual(l)
    }

    /// Backward residual with the top slice `deg_j = cap_j` of the image
    /// dropped; the truncation tail of a kernel lives only there.
    pub fn backward_interior_residual(&self, j: usize) -> Result<f64> {
        let (b, l) = self.block_of(j);
        self.blocks[b].backward_interior_residual(l)
    }
}

fn columns_of(elements: &[HardyElement], grid: &TruncationGrid) -> Result<CMatrix> {
    let mut cols = CMatrix::zeros(grid.size(), elements.len());
    for (c, e) in elements.iter().enumerate() {
        if e.grid() != grid {
            return Err(Error::GridMismatch(format!("{} vs {grid}", e.grid())));
        }
        for (i, v) in e.coeffs().iter().enumerate() {
            cols[(i, c)] = *v;
        }
    }
    Ok(cols)
}

/// `V_j = P_S M_{z_j}|_S` as a `dim × dim` matrix in the basis of `S`.
pub fn compress(s: &Subspace, j: usize) -> Result<OperatorMatrix> {
    if j >= s.grid.nvars() {
        return Err(Error::DomainError(format!("variable {j} on {}", s.grid)));
    }
    let mut acc: Option<CMatrix> = None;
    for b in &s.blocks {
        let piece = if b.holds(j) {
            b.compression(j - b.start)
        } else {
            CMatrix::identity(b.dim(), b.dim())
        };
        acc = Some(match acc {
            None => piece,
            Some(a) => kron(&a, &piece),
        });
    }
    Ok(OperatorMatrix::new(acc.expect("at least one block")))
}

/// Wandering subspace `S ⊖ Σ_{j ∈ vars} z_j (S ∩ Int_j)`.
pub fn wandering(s: &Subspace, vars: &[usize]) -> Result<Subspace> {
    wandering_with(s, vars, DEFAULT_RANK_EPSILON)
}

pub fn wandering_with(s: &Subspace, vars: &[usize], rank_epsilon: f64) -> Result<Subspace> {
    if vars.is_empty() {
        return Err(Error::DomainError("wandering subspace needs at least one variable".into()));
    }
    if let Some(j) = vars.iter().find(|&&j| j >= s.grid.nvars()) {
        return Err(Error::DomainError(format!("variable {j} on {}", s.grid)));
    }
    let mut blocks = Vec::with_capacity(s.blocks.len());
    for b in &s.blocks {
        let locals: Vec<usize> = vars.iter().filter(|&&j| b.holds(j)).map(|j| j - b.start).collect();
        let basis = b.wandering(&locals, rank_epsilon)?;
        blocks.push(Block { start: b.start, grid: b.grid.clone(), basis });
    }
    Ok(Subspace { grid: s.grid.clone(), blocks })
}

/// Entries within this factor of their accumulated magnitude are treated as
/// cancelled to zero during elimination.
const CANCEL_TOL: f64 = 1e3 * f64::EPSILON;

/// A column under elimination together with an entrywise bound on the
/// magnitudes that were summed into each entry.
#[derive(Clone)]
struct Tracked {
    v: Vec<C64>,
    s: Vec<f64>,
}

impl Tracked {
    fn exact(v: &[C64]) -> Self {
        Tracked { v: v.to_vec(), s: v.iter().map(|c| c.norm()).collect() }
    }

    /// `self -= f · b` with `f` the entry at `b`'s pivot row, which ends up
    /// exactly zero. The bound also covers the uncertainty of `f` itself.
    fn eliminate(&mut self, b: &Tracked, p: usize) {
        let f = self.v[p];
        let fs = self.s[p];
        self.v[p] = C64::new(0.0, 0.0);
        if f.norm() <= CANCEL_TOL * fs {
            for i in 0..self.v.len() {
                if i != p {
                    self.s[i] += fs * b.v[i].norm();
                }
            }
            return;
        }
        let fa = f.norm();
        for i in 0..self.v.len() {
            if b.s[i] != 0.0 && i != p {
                self.v[i] -= f * b.v[i];
                self.s[i] += fa * b.s[i] + fs * b.v[i].norm();
            }
        }
    }

    fn clean(&mut self) {
        for (v, s) in self.v.iter_mut().zip(&self.s) {
            if v.norm() <= CANCEL_TOL * s {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    fn pivot_among(&self, rows: impl Iterator<Item = usize>) -> Option<usize> {
        rows.filter(|&i| self.v[i] != C64::new(0.0, 0.0))
            .max_by(|&a, &b| self.v[a].norm().total_cmp(&self.v[b].norm()))
    }

    fn normalize_at(&mut self, p: usize) {
        let d = self.v[p];
        let da = d.norm();
        for (v, s) in self.v.iter_mut().zip(self.s.iter_mut()) {
            *v /= d;
            *s /= da;
        }
        self.v[p] = C64::new(1.0, 0.0);
    }
}

/// Adds `t` to an echelon basis unless it reduces to zero.
fn echelon_insert(basis: &mut Vec<(Tracked, usize)>, mut t: Tracked) {
    for (b, p) in basis.iter() {
        t.eliminate(b, *p);
    }
    t.clean();
    if let Some(p) = t.pivot_among(0..t.v.len()) {
        t.normalize_at(p);
        basis.push((t, p));
    }
}

/// Combinations of the basis whose top slice in `z_j` vanishes.
fn interior_part(grid: &TruncationGrid, j: usize, basis: &[(Tracked, usize)]) -> Vec<Tracked> {
    let cap = grid.cap(j);
    let top: Vec<usize> = (0..grid.size()).filter(|&i| grid.degree_at(i, j) == cap).collect();
    let mut pivots: Vec<(Tracked, usize)> = Vec::new();
    let mut interior = Vec::new();
    for (b, _) in basis {
        let mut t = b.clone();
        for (q, p) in &pivots {
            t.eliminate(q, *p);
        }
        t.clean();
        match t.pivot_among(top.iter().copied()) {
            Some(p) => {
                t.normalize_at(p);
                pivots.push((t, p));
            }
            None => interior.push(t),
        }
    }
    interior
}

fn shift_tracked(grid: &TruncationGrid, j: usize, t: &Tracked) -> Tracked {
    let n = grid.size();
    let stride = grid.stride(j);
    let mut out = Tracked { v: vec![C64::new(0.0, 0.0); n], s: vec![0.0; n] };
    for i in 0..n {
        if grid.degree_at(i, j) < grid.cap(j) {
            out.v[i + stride] = t.v[i];
            out.s[i + stride] = t.s[i];
        }
    }
    out
}

/// Smallest subspace containing `generators` that is invariant under the
/// listed shifts, where a shift is only applied to vectors it keeps inside
/// the grid.
///
/// Whether a top slice vanishes is decided by exact elimination with
/// roundoff tracking, not by a rank threshold: a truncated series with a tiny
/// but nonzero top coefficient does not fit, however small the coefficient.
pub fn span_closure(generators: &[HardyElement], vars: &[usize], max_steps: usize) -> Result<Subspace> {
    let first = generators
        .first()
        .ok_or_else(|| Error::DomainError("span closure of no generators".into()))?;
    let grid = first.grid().clone();
    if let Some(j) = vars.iter().find(|&&j| j >= grid.nvars()) {
        return Err(Error::DomainError(format!("variable {j} on {grid}")));
    }
    let cols = columns_of(generators, &grid)?;
    if !crate::numkernel::all_finite(&cols) {
        return Err(Error::NumericError("non-finite generator coefficient".into()));
    }
    let mut basis: Vec<(Tracked, usize)> = Vec::new();
    for g in generators {
        echelon_insert(&mut basis, Tracked::exact(g.coeffs()));
    }
    for _ in 0..max_steps {
        let before = basis.len();
        for &j in vars {
            for t in interior_part(&grid, j, &basis) {
                echelon_insert(&mut basis, shift_tracked(&grid, j, &t));
            }
        }
        if basis.len() == before {
            break;
        }
    }
    let mut b = CMatrix::zeros(grid.size(), basis.len());
    for (c, (t, _)) in basis.iter().enumerate() {
        b.column_mut(c).copy_from_slice(&t.v);
    }
    Subspace::dense(grid, thin_q(&b))
}

/// Kernel vectors describing a zero multiset in one variable: `K(·, a)` and
/// derivative kernels up to the multiplicity of `a`.
pub(crate) fn kernel_columns(zeros: &[C64], cap: usize) -> Result<CMatrix> {
    let mut groups: Vec<(C64, usize)> = Vec::new();
    for &a in zeros {
        match groups.iter_mut().find(|(b, _)| (*b - a).norm() <= 1e-12) {
            Some(g) => g.1 += 1,
            None => groups.push((a, 1)),
        }
    }
    let mut cols = Vec::new();
    for (a, mult) in groups {
        for p in 0..mult {
            cols.push(derivative_kernel(a, p, cap)?);
        }
    }
    let mut m = CMatrix::zeros(cap + 1, cols.len());
    for (c, k) in cols.iter().enumerate() {
        for (i, v) in k.coeffs().iter().enumerate() {
            m[(i, c)] = *v;
        }
    }
    Ok(m)
}

/// Per-variable zero multisets of an inner function with product structure;
/// `None` means the function does not depend on that variable.
fn zeros_by_var(theta: &InnerFunction) -> Result<Vec<Option<Vec<C64>>>> {
    let n = theta.grid().nvars();
    let mut out: Vec<Option<Vec<C64>>> = vec![None; n];
    fill_zeros(theta, &mut out)?;
    Ok(out)
}

fn fill_zeros(theta: &InnerFunction, out: &mut [Option<Vec<C64>>]) -> Result<()> {
    match theta.structure() {
        InnerStructure::Monomial(k) => {
            for (j, &m) in k.entries().iter().enumerate() {
                if m > 0 {
                    out[j] = Some(vec![C64::new(0.0, 0.0); m]);
                }
            }
        }
        InnerStructure::Blaschke1D { var, zeros } => {
            if zeros.is_empty() {
                return Err(Error::DomainError("constant inner function".into()));
            }
            out[*var] = Some(zeros.clone());
        }
        InnerStructure::TensorProduct(fs) => {
            for f in fs {
                fill_zeros(f, out)?;
            }
        }
        InnerStructure::RawSeries(_) => {
            return Err(Error::Unsupported("raw series have no finite kernel description".into()))
        }
    }
    Ok(())
}

fn per_var_blocks(
    theta: &InnerFunction,
    grid: &TruncationGrid,
    model: bool,
) -> Result<Subspace> {
    if theta.grid().nvars() != grid.nvars() {
        return Err(Error::GridMismatch(format!("{} vs {grid}", theta.grid())));
    }
    let zeros = zeros_by_var(theta)?;
    let mut blocks = Vec::with_capacity(grid.nvars());
    for (j, z) in zeros.iter().enumerate() {
        let g1 = grid.sub_grid(j, j + 1);
        let cap = grid.cap(j);
        let basis = match z {
            None => CMatrix::identity(cap + 1, cap + 1),
            Some(zs) => {
                if zs.len() > cap {
                    return Err(Error::DomainError(format!(
                        "{} zeros do not fit under cap {cap} in variable {j}",
                        zs.len()
                    )));
                }
                let k = kernel_columns(zs, cap)?;
                if model {
                    orthonormal_columns(&k, DEFAULT_RANK_EPSILON)?.0
                } else {
                    null_space(&k.adjoint(), DEFAULT_RANK_EPSILON)?.0
                }
            }
        };
        blocks.push(Block { start: j, grid: g1, basis });
    }
    Ok(Subspace { grid: grid.clone(), blocks })
}

/// Truncated model space `H^2 ⊖ θH^2`: spans of (derivative) Szegő kernels at
/// the zeros, tensored across variables. Variables that `θ` does not depend
/// on contribute the full truncated space.
pub fn model_space(theta: &InnerFunction, grid: &TruncationGrid) -> Result<Subspace> {
    per_var_blocks(theta, grid, true)
}

/// Truncated Beurling subspace `θH^2 ∩ P_d`: polynomials within the caps that
/// vanish (with multiplicity) at the zeros of `θ` in each variable.
pub fn beurling_subspace(theta: &InnerFunction, grid: &TruncationGrid) -> Result<Subspace> {
    per_var_blocks(theta, grid, false)
}

/// How the blocks of constructed subspaces are arranged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One dense block over all variables.
    Dense,
    /// Two dense blocks, split after the first `k` variables.
    Split,
    /// One block per variable.
    PerVariable,
}

impl Layout {
    pub fn apply(self, s: &Subspace, k: usize) -> Result<Subspace> {
        match self {
            Layout::Dense => Ok(s.densify()),
            Layout::Split => s.regroup_blocks(&[k]),
            Layout::PerVariable => Ok(s.clone()),
        }
    }
}

/// Commutator norms for one pair of compressed shifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairNorms {
    pub i: usize,
    pub j: usize,
    /// `‖V_i V_j − V_j V_i‖`
    pub commutator: f64,
    /// `‖V_i^* V_j − V_j V_i^*‖`
    pub mixed: f64,
    /// The pair acts on different blocks, so both norms vanish identically.
    pub structural: bool,
}

/// Doubly-commuting report for a compressed tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DCReport {
    pub pair_norms: Vec<PairNorms>,
    pub max_commutator: f64,
    pub tolerance: f64,
    pub is_doubly_commuting: bool,
}

/// Commutator norms of all pairs of compressions of `s`.
pub fn dc_report(s: &Subspace, tol: f64) -> Result<DCReport> {
    let n = s.grid.nvars();
    let mut local: BTreeMap<usize, CMatrix> = BTreeMap::new();
    for j in 0..n {
        let (b, l) = s.block_of(j);
        local.insert(j, s.blocks[b].compression(l));
    }
    let mut pair_norms = Vec::new();
    let mut max_commutator = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (bi, _) = s.block_of(i);
            let (bj, _) = s.block_of(j);
            let p = if bi != bj || s.blocks[bi].dim() == 0 {
                PairNorms { i, j, commutator: 0.0, mixed: 0.0, structural: true }
            } else {
                let (c, m) = commutator_norms_mat(&local[&i], &local[&j])?;
                PairNorms { i, j, commutator: c, mixed: m, structural: false }
            };
            max_commutator = max_commutator.max(p.commutator).max(p.mixed);
            pair_norms.push(p);
        }
    }
    Ok(DCReport { pair_norms, max_commutator, tolerance: tol, is_doubly_commuting: max_commutator <= tol })
}

/// Behaviour of one compressed shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    /// Isometric on the interior part of the subspace.
    IsometryLike,
    /// Spectral radius below one.
    PureContractionLike,
    Other,
}

/// The tuple `(V_1, …, V_n)` of compressions of the coordinate shifts.
#[derive(Clone, Debug)]
pub struct CompressedTuple {
    pub parent: Subspace,
    pub ops: Vec<OperatorMatrix>,
    pub kinds: Vec<OpKind>,
}

impl CompressedTuple {
    pub fn new(s: &Subspace, tol: f64) -> Result<Self> {
        let n = s.grid.nvars();
        let mut ops = Vec::with_capacity(n);
        let mut kinds = Vec::with_capacity(n);
        for j in 0..n {
            let v = compress(s, j)?;
            let (b, l) = s.block_of(j);
            let blk = &s.blocks[b];
            let c = blk.compression(l);
            let x = blk.interior_coords(l)?;
            let iso = x.ncols() > 0 && {
                let vx = matmul(&c, &x);
                gram_defect(&vx) <= tol
            };
            let kind = if iso {
                OpKind::IsometryLike
            } else if spectral_radius(&c)? < 1.0 - tol {
                OpKind::PureContractionLike
            } else {
                OpKind::Other
            };
            ops.push(v);
            kinds.push(kind);
        }
        Ok(CompressedTuple { parent: s.clone(), ops, kinds })
    }

    pub fn max_norm(&self) -> f64 {
        self.ops.iter().map(|o| o.norm()).fold(0.0, f64::max)
    }
}

/// Primary verdict of [`classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariance {
    /// Forward invariant in every variable.
    Invariant,
    /// Forward invariant in the first `k` variables, backward in the rest.
    MixedInvariant,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: Invariance,
    pub split: usize,
    pub tol: f64,
    pub forward_residuals: Vec<f64>,
    pub backward_residuals: Vec<f64>,
    pub forward_all: bool,
    pub backward_all: bool,
    pub mixed: bool,
    pub dc: DCReport,
}

/// Invariance verdicts at split `k` plus the doubly-commuting report.
pub fn classify(s: &Subspace, k: usize, tol: f64) -> Result<Classification> {
    let n = s.grid.nvars();
    if k > n {
        return Err(Error::DomainError(format!("split {k} on {n} variables")));
    }
    let forward: Vec<f64> = (0..n).map(|j| s.forward_residual(j)).collect::<Result<_>>()?;
    let backward: Vec<f64> = (0..n).map(|j| s.backward_interior_residual(j)).collect::<Result<_>>()?;
    let forward_all = forward.iter().all(|r| *r <= tol);
    let backward_all = backward.iter().all(|r| *r <= tol);
    let mixed = forward[..k].iter().all(|r| *r <= tol) && backward[k..].iter().all(|r| *r <= tol);
    let kind = if forward_all {
        Invariance::Invariant
    } else if mixed {
        Invariance::MixedInvariant
    } else {
        Invariance::Neither
    };
    Ok(Classification {
        kind,
        split: k,
        tol,
        forward_residuals: forward,
        backward_residuals: backward,
        forward_all,
        backward_all,
        mixed,
        dc: dc_report(s, tol)?,
    })
}

/// Outcome of [`wold_verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WoldReport {
    pub wandering_dim: usize,
    /// Dimension of each tile `z^k W_k`, keyed by `k` over the listed vars.
    pub tiles: Vec<(MultiIndex, usize)>,
    /// Largest `‖X_k^* X_l‖` over distinct tiles.
    pub orthogonality_residual: f64,
    /// Largest `‖(I − P_S) X_k‖`.
    pub containment_residual: f64,
    /// Largest `‖X_k^* R‖` between tiles and the remainder.
    pub remainder_residual: f64,
    pub tiles_dim: usize,
    pub remainder_dim: usize,
    pub total_dim: usize,
    pub dimension_consistent: bool,
}

/// Finite Wold tiling of `S` under the shifts in `vars`.
///
/// Tile `k` is `z^k W_k`, where `W_k` is the wandering subspace of
/// `S ∩ {deg_j ≤ d_j − k_j}`. For `k ≤ interior_caps` the tiles must be
/// mutually orthogonal, lie in `S`, and together with the remainder
/// `Σ_j z_j^{m_j+1}(S ∩ {deg_j ≤ d_j − m_j − 1})` account for `dim S`.
pub fn wold_verify(
    s: &Subspace,
    vars: &[usize],
    interior_caps: &MultiIndex,
    tol: f64,
) -> Result<WoldReport> {
    let grid = s.grid.clone();
    let n = grid.nvars();
    if vars.is_empty() {
        return Err(Error::DomainError("Wold tiling needs at least one variable".into()));
    }
    if interior_caps.len() != n {
        return Err(Error::GridMismatch(format!(
            "interior caps {interior_caps} for {n} variables"
        )));
    }
    for &j in vars {
        if j >= n {
            return Err(Error::DomainError(format!("variable {j} on {grid}")));
        }
        let r = s.forward_residual(j)?;
        if r > tol {
            return Err(Error::PrereqFailed(format!(
                "compression of z_{j} is not isometric on the interior (residual {r:.3e})"
            )));
        }
    }
    let dense = s.densify();
    let b = dense.blocks[0].basis.clone();
    let w = wandering(&dense, vars)?;

    // multi-indices over the listed vars with k_j ≤ min(interior_j, cap_j)
    let tile_caps: Vec<usize> = vars.iter().map(|&j| interior_caps.get(j).min(grid.cap(j))).collect();
    let tile_grid = TruncationGrid::new(tile_caps)?;
    let mut tiles = Vec::new();
    let mut tile_mats: Vec<CMatrix> = Vec::new();
    for k in tile_grid.indices() {
        let mut bx = grid.caps().to_vec();
        for (t, &j) in vars.iter().enumerate() {
            bx[j] -= k.get(t);
        }
        let part = restricted_wandering(&b, &grid, &bx, vars)?;
        let mut x = part;
        for (t, &j) in vars.iter().enumerate() {
            for _ in 0..k.get(t) {
                x = truncated_shift_rows(&grid, j, &x);
            }
        }
        tiles.push((k, x.ncols()));
        tile_mats.push(x);
    }
    let mut orth = 0.0f64;
    for a in 0..tile_mats.len() {
        for c in a + 1..tile_mats.len() {
            if tile_mats[a].ncols() > 0 && tile_mats[c].ncols() > 0 {
                orth = orth.max(op_norm(&adjoint_matmul(&tile_mats[a], &tile_mats[c])));
            }
        }
    }
    let containment = tile_mats.iter().map(|x| residual_outside(&b, x)).fold(0.0, f64::max);
    let tiles_dim: usize = tile_mats.iter().map(|x| x.ncols()).sum();

    // remainder: Σ_j z_j^{m_j+1} (S ∩ {deg_j ≤ d_j − m_j − 1})
    let mut rem_cols: Vec<CMatrix> = Vec::new();
    for (t, &j) in vars.iter().enumerate() {
        let m = tile_grid.cap(t);
        if m + 1 > grid.cap(j) {
            continue;
        }
        let mut bx = grid.caps().to_vec();
        bx[j] -= m + 1;
        let mut x = restricted_part(&b, &grid, &bx)?;
        for _ in 0..=m {
            x = truncated_shift_rows(&grid, j, &x);
        }
        rem_cols.push(x);
    }
    let width: usize = rem_cols.iter().map(|x| x.ncols()).sum();
    let mut rem = CMatrix::zeros(grid.size(), width);
    let mut at = 0;
    for x in &rem_cols {
        rem.columns_mut(at, x.ncols()).copy_from(x);
        at += x.ncols();
    }
    let (rem, _) = orthonormal_columns(&rem, DEFAULT_RANK_EPSILON)?;
    let remainder_residual = tile_mats
        .iter()
        .filter(|x| x.ncols() > 0 && rem.ncols() > 0)
        .map(|x| op_norm(&adjoint_matmul(x, &rem)))
        .fold(0.0, f64::max);
    let total_dim = dense.dim();
    let remainder_dim = rem.ncols();
    Ok(WoldReport {
        wandering_dim: w.dim(),
        tiles,
        orthogonality_residual: orth,
        containment_residual: containment,
        remainder_residual,
        tiles_dim,
        remainder_dim,
        total_dim,
        dimension_consistent: tiles_dim + remainder_dim == total_dim,
    })
}

/// Orthonormal basis of `S ∩ {deg ≤ bx}` (as columns on the full grid).
fn restricted_part(b: &CMatrix, grid: &TruncationGrid, bx: &[usize]) -> Result<CMatrix> {
    let outside: Vec<usize> = (0..grid.size())
        .filter(|&i| (0..grid.nvars()).any(|j| grid.degree_at(i, j) > bx[j]))
        .collect();
    let rows = b.select_rows(outside.iter());
    let (x, _) = null_space(&rows, DEFAULT_RANK_EPSILON)?;
    Ok(orthonormal_columns(&matmul(b, &x), DEFAULT_RANK_EPSILON)?.0)
}

/// Wandering subspace of `S ∩ {deg ≤ bx}` relative to the box `bx`.
fn restricted_wandering(
    b: &CMatrix,
    grid: &TruncationGrid,
    bx: &[usize],
    vars: &[usize],
) -> Result<CMatrix> {
    let part = restricted_part(b, grid, bx)?;
    let small = TruncationGrid::new(bx.to_vec())?;
    let keep: Vec<usize> = (0..grid.size())
        .filter(|&i| (0..grid.nvars()).all(|j| grid.degree_at(i, j) <= bx[j]))
        .collect();
    let local = part.select_rows(keep.iter());
    let sub = Subspace::dense(small, local)?;
    let w = wandering(&sub, vars)?;
    let wl = &w.blocks[0].basis;
    let mut out = CMatrix::zeros(grid.size(), wl.ncols());
    for (r, &i) in keep.iter().enumerate() {
        out.row_mut(i).copy_from(&wl.row(r));
    }
    Ok(out)
}

/// Exact shift of columns on `grid` into the enlarged grid.
pub fn shift_columns(grid: &TruncationGrid, j: usize, m: &CMatrix) -> CMatrix {
    shift_rows(grid, j, m)
}
