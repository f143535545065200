//! Truncated elements of `H^2(D^n)`, shifts and multipliers, Szegő kernels,
//! and inner functions with isometry-defect certificates.
//!
//! Forward shifts and multipliers map a grid into an enlarged grid so they
//! stay exact; backward shifts keep the grid. The `truncated_*` variants map
//! a grid into itself and drop whatever leaves it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{transfer, MultiIndex, TruncationGrid};
use crate::numkernel::{CMatrix, OperatorMatrix};
use crate::par;
use crate::C64;

/// Blaschke zeros must satisfy `|a| ≤ 1 − MIN_BOUNDARY_DISTANCE`.
pub const MIN_BOUNDARY_DISTANCE: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A polynomial in `n` variables stored by its coefficients on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HardyElement {
    grid: TruncationGrid,
    coeffs: Vec<C64>,
}

impl HardyElement {
    pub fn new(grid: TruncationGrid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for {grid} of size {}",
                coeffs.len(),
                grid.size()
            )));
        }
        Ok(HardyElement { grid, coeffs })
    }

    pub fn zeros(grid: &TruncationGrid) -> Self {
        HardyElement { grid: grid.clone(), coeffs: vec![ZERO; grid.size()] }
    }

    pub fn one(grid: &TruncationGrid) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = ONE;
        f
    }

    pub fn monomial(grid: &TruncationGrid, k: &MultiIndex) -> Result<Self> {
        let mut f = Self::zeros(grid);
        let i = grid.lin_index(k)?;
        f.coeffs[i] = ONE;
        Ok(f)
    }

    /// One-variable element from a coefficient list.
    pub fn from_1d(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DomainError("empty coefficient list".into()));
        }
        let grid = TruncationGrid::new(vec![coeffs.len() - 1])?;
        Self::new(grid, coeffs)
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn coeff(&self, k: &MultiIndex) -> Result<C64> {
        Ok(self.coeffs[self.grid.lin_index(k)?])
    }

    /// Parseval norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩ = Σ self_k · conj(other_k)`.
    pub fn inner(&self, other: &HardyElement) -> Result<C64> {
        self.same_grid(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum())
    }

    fn same_grid(&self, other: &HardyElement) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn add(&self, other: &HardyElement) -> Result<HardyElement> {
        self.same_grid(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(HardyElement { grid: self.grid.clone(), coeffs })
    }

    pub fn sub(&self, other: &HardyElement) -> Result<HardyElement> {
        self.same_grid(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(HardyElement { grid: self.grid.clone(), coeffs })
    }

    pub fn scale(&self, s: C64) -> HardyElement {
        HardyElement { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Re-expresses the element on another grid with the same number of
    /// variables, padding with zeros and dropping monomials that do not fit.
    pub fn on_grid(&self, grid: &TruncationGrid) -> Result<HardyElement> {
        if grid.nvars() != self.grid.nvars() {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid, grid)));
        }
        Ok(HardyElement { grid: grid.clone(), coeffs: transfer(&self.grid, grid, &self.coeffs) })
    }

    /// Value at a point of the polydisc (or anywhere, it is a polynomial).
    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        if z.len() != self.grid.nvars() {
            return Err(Error::GridMismatch(format!(
                "point with {} coordinates for {} variables",
                z.len(),
                self.grid.nvars()
            )));
        }
        let powers: Vec<Vec<C64>> = self
            .grid
            .caps()
            .iter()
            .zip(z)
            .map(|(&d, &x)| {
                let mut p = Vec::with_capacity(d + 1);
                let mut acc = ONE;
                for _ in 0..=d {
                    p.push(acc);
                    acc *= x;
                }
                p
            })
            .collect();
        let mut total = ZERO;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            let mut term = *c;
            for (j, p) in powers.iter().enumerate() {
                term *= p[self.grid.degree_at(i, j)];
            }
            total += term;
        }
        Ok(total)
    }

    /// Product on the sum grid (exact).
    pub fn product(&self, other: &HardyElement) -> Result<HardyElement> {
        let out_grid = self.grid.sum(&other.grid)?;
        let mut out = vec![ZERO; out_grid.size()];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let ki = self.grid.multi_index(i);
            let base = out_grid.lin_index_unchecked(ki.entries());
            for (l, b) in other.coeffs.iter().enumerate() {
                if *b == ZERO {
                    continue;
                }
                let kl = other.grid.multi_index(l);
                out[base + out_grid.lin_index_unchecked(kl.entries())] += a * b;
            }
        }
        HardyElement::new(out_grid, out)
    }

    /// Tensor product `f(z) g(w)` on the concatenated grid.
    pub fn tensor(&self, other: &HardyElement) -> HardyElement {
        let grid = self.grid.concat(&other.grid);
        let mut coeffs = Vec::with_capacity(grid.size());
        for a in &self.coeffs {
            for b in &other.coeffs {
                coeffs.push(a * b);
            }
        }
        HardyElement { grid, coeffs }
    }

    /// Variables in which the element has positive degree.
    pub fn support_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != ZERO {
                for j in 0..self.grid.nvars() {
                    if self.grid.degree_at(i, j) > 0 {
                        out.insert(j);
                    }
                }
            }
        }
        out
    }
}

/// A point of the open polydisc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    w: Vec<C64>,
}

impl KernelPoint {
    pub fn new(w: Vec<C64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::DomainError("kernel point needs a coordinate".into()));
        }
        if let Some(x) = w.iter().find(|x| !(x.norm() < 1.0)) {
            return Err(Error::DomainError(format!("kernel point coordinate {x} not in the disc")));
        }
        Ok(KernelPoint { w })
    }

    pub fn coords(&self) -> &[C64] {
        &self.w
    }
}

/// Truncated Szegő kernel: the coefficient at `k` is `∏ conj(w_j)^{k_j}`.
pub fn szego_kernel(point: &KernelPoint, grid: &TruncationGrid) -> Result<HardyElement> {
    if point.w.len() != grid.nvars() {
        return Err(Error::GridMismatch(format!(
            "{}-variable point on {grid}",
            point.w.len()
        )));
    }
    let factors: Vec<Vec<C64>> = point
        .w
        .iter()
        .zip(grid.caps())
        .map(|(w, &d)| geometric(w.conj(), d))
        .collect();
    let coeffs = (0..grid.size())
        .map(|i| {
            factors
                .iter()
                .enumerate()
                .fold(ONE, |acc, (j, f)| acc * f[grid.degree_at(i, j)])
        })
        .collect();
    HardyElement::new(grid.clone(), coeffs)
}

fn geometric(r: C64, d: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(d + 1);
    let mut acc = ONE;
    for _ in 0..=d {
        out.push(acc);
        acc *= r;
    }
    out
}

/// One-variable derivative kernel `K^{(p)}(·, a)` with `⟨f, K^{(p)}⟩ = f^{(p)}(a)`:
/// the coefficient at `n ≥ p` is `n!/(n−p)! · conj(a)^{n−p}`.
pub fn derivative_kernel(a: C64, p: usize, cap: usize) -> Result<HardyElement> {
    let ab = a.conj();
    let mut coeffs = vec![ZERO; cap + 1];
    for (n, c) in coeffs.iter_mut().enumerate().skip(p) {
        let falling: f64 = ((n - p + 1)..=n).map(|x| x as f64).product();
        *c = ab.powu((n - p) as u32) * falling;
    }
    HardyElement::from_1d(coeffs)
}

/// Exact matrix of `M_{z_j}` from `grid` into the grid with cap `d_j + 1`.
pub fn shift(grid: &TruncationGrid, j: usize) -> Result<OperatorMatrix> {
    check_var(grid, j)?;
    let dst = grid.enlarged(j, 1);
    let m = shift_rows(grid, j, &CMatrix::identity(grid.size(), grid.size()));
    OperatorMatrix::between(m, grid.clone(), dst)
}

/// `M_{z_j}` compressed to the grid: the top slice in variable `j` is dropped.
pub fn truncated_shift(grid: &TruncationGrid, j: usize) -> Result<OperatorMatrix> {
    check_var(grid, j)?;
    let m = truncated_shift_rows(grid, j, &CMatrix::identity(grid.size(), grid.size()));
    OperatorMatrix::between(m, grid.clone(), grid.clone())
}

/// Exact matrix of `M_{z_j}^*` on the grid.
pub fn backward_shift(grid: &TruncationGrid, j: usize) -> Result<OperatorMatrix> {
    check_var(grid, j)?;
    let m = backward_shift_rows(grid, j, &CMatrix::identity(grid.size(), grid.size()));
    OperatorMatrix::between(m, grid.clone(), grid.clone())
}

fn check_var(grid: &TruncationGrid, j: usize) -> Result<()> {
    if j >= grid.nvars() {
        return Err(Error::DomainError(format!("variable {j} on {grid}")));
    }
    Ok(())
}

/// Applies `M_{z_j}` to every column of `m` (rows indexed by `grid`); the
/// result lives on `grid.enlarged(j, 1)`.
pub fn shift_rows(grid: &TruncationGrid, j: usize, m: &CMatrix) -> CMatrix {
    let dst = grid.enlarged(j, 1);
    let mut out = CMatrix::zeros(dst.size(), m.ncols());
    let stride = dst.stride(j);
    for i in 0..grid.size() {
        let k = grid.multi_index(i);
        let t = dst.lin_index_unchecked(k.entries()) + stride;
        out.row_mut(t).copy_from(&m.row(i));
    }
    out
}

/// Applies the truncated shift `T_j` to every column of `m`.
pub fn truncated_shift_rows(grid: &TruncationGrid, j: usize, m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    let stride = grid.stride(j);
    let cap = grid.cap(j);
    for i in 0..grid.size() {
        if grid.degree_at(i, j) < cap {
            out.row_mut(i + stride).copy_from(&m.row(i));
        }
    }
    out
}

/// Applies `M_{z_j}^*` to every column of `m`.
pub fn backward_shift_rows(grid: &TruncationGrid, j: usize, m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    let stride = grid.stride(j);
    let cap = grid.cap(j);
    for i in 0..grid.size() {
        if grid.degree_at(i, j) < cap {
            out.row_mut(i).copy_from(&m.row(i + stride));
        }
    }
    out
}

/// Exact matrix of `f ↦ φ f` from `domain` into the sum grid.
pub fn multiplier(phi: &HardyElement, domain: &TruncationGrid) -> Result<OperatorMatrix> {
    if phi.grid().nvars() != domain.nvars() {
        return Err(Error::GridMismatch(format!("{} vs {domain}", phi.grid())));
    }
    let dst = domain.sum(phi.grid())?;
    let m = convolution_matrix(phi, domain, &dst);
    OperatorMatrix::between(m, domain.clone(), dst)
}

/// `f ↦ φ f` on `grid`, dropping monomials that leave the grid.
pub fn truncated_multiplier(phi: &HardyElement, grid: &TruncationGrid) -> Result<OperatorMatrix> {
    if phi.grid().nvars() != grid.nvars() {
        return Err(Error::GridMismatch(format!("{} vs {grid}", phi.grid())));
    }
    let m = convolution_matrix(phi, grid, grid);
    OperatorMatrix::between(m, grid.clone(), grid.clone())
}

fn convolution_matrix(phi: &HardyElement, domain: &TruncationGrid, dst: &TruncationGrid) -> CMatrix {
    let terms: Vec<(MultiIndex, C64)> = phi
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ZERO)
        .map(|(i, c)| (phi.grid().multi_index(i), *c))
        .collect();
    let columns = par::map_range(domain.size(), |col| {
        let k = domain.multi_index(col);
        let mut entries = Vec::with_capacity(terms.len());
        for (l, c) in &terms {
            let target: Vec<usize> = k.entries().iter().zip(l.entries()).map(|(a, b)| a + b).collect();
            if target.iter().zip(dst.caps()).all(|(a, d)| a <= d) {
                entries.push((dst.lin_index_unchecked(&target), *c));
            }
        }
        entries
    });
    let mut m = CMatrix::zeros(dst.size(), domain.size());
    for (col, entries) in columns.into_iter().enumerate() {
        for (row, c) in entries {
            m[(row, col)] += c;
        }
    }
    m
}

/// Truncated Taylor coefficients of `∏ (ā/|a|)(a − z)/(1 − ā z)`, with the
/// factor `−z` for zeros at the origin.
pub fn blaschke_coeffs(zeros: &[C64], cap: usize) -> Result<HardyElement> {
    check_zeros(zeros)?;
    let mut acc = vec![ZERO; cap + 1];
    acc[0] = ONE;
    for &a in zeros {
        let f = blaschke_factor(a, cap);
        acc = convolve_1d(&acc, &f, cap);
    }
    HardyElement::from_1d(acc)
}

fn check_zeros(zeros: &[C64]) -> Result<()> {
    for a in zeros {
        if !(a.norm() <= 1.0 - MIN_BOUNDARY_DISTANCE) {
            return Err(Error::DomainError(format!(
                "Blaschke zero {a} is within {MIN_BOUNDARY_DISTANCE} of the circle"
            )));
        }
    }
    Ok(())
}

fn blaschke_factor(a: C64, cap: usize) -> Vec<C64> {
    let mut out = vec![ZERO; cap + 1];
    let r = a.norm();
    if r == 0.0 {
        if cap >= 1 {
            out[1] = -ONE;
        }
        return out;
    }
    let u = a.conj() / r;
    let ab = a.conj();
    out[0] = u * a;
    let mut p = ONE;
    for c in out.iter_mut().skip(1) {
        *c = u * p * (r * r - 1.0);
        p *= ab;
    }
    out
}

pub(crate) fn convolve_1d(a: &[C64], b: &[C64], cap: usize) -> Vec<C64> {
    let mut out = vec![ZERO; cap + 1];
    for (i, x) in a.iter().enumerate().take(cap + 1) {
        if *x == ZERO {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(cap + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `‖autocorrelation(coeffs) − δ₀‖₁`, an upper bound for
/// `sup_T | |θ|² − 1 |`. Returns `(r ≤ tol, r)`.
pub fn inner_check(theta: &HardyElement, tol: f64) -> (bool, f64) {
    let r = autocorrelation_defect(theta);
    (r <= tol, r)
}

pub(crate) fn autocorrelation_defect(theta: &HardyElement) -> f64 {
    let g = theta.grid();
    // shift vectors live in [-d_j, d_j]; offset them to a grid of caps 2d
    let lag_grid = TruncationGrid::new(g.caps().iter().map(|d| 2 * d).collect())
        .expect("lag grid of a valid grid");
    let nz: Vec<(Vec<usize>, C64)> = theta
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ZERO)
        .map(|(i, c)| (g.multi_index(i).entries().to_vec(), *c))
        .collect();
    let mut acc = vec![ZERO; lag_grid.size()];
    let mut lag = vec![0usize; g.nvars()];
    for (ka, a) in &nz {
        for (kb, b) in &nz {
            for j in 0..g.nvars() {
                lag[j] = ka[j] + g.cap(j) - kb[j];
            }
            acc[lag_grid.lin_index_unchecked(&lag)] += a * b.conj();
        }
    }
    let centre = lag_grid.lin_index_unchecked(g.caps());
    acc[centre] -= ONE;
    acc.iter().map(|c| c.norm()).sum()
}

/// Structural description of an inner function.
#[derive(Clone, Debug, PartialEq)]
pub enum InnerStructure {
    Monomial(MultiIndex),
    Blaschke1D { var: usize, zeros: Vec<C64> },
    TensorProduct(Vec<InnerFunction>),
    RawSeries(HardyElement),
}

/// An inner function truncated to a grid, with a certificate
/// `defect_bound ≥ ‖autocorrelation − δ₀‖₁` of the truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerFunction {
    grid: TruncationGrid,
    structure: InnerStructure,
    defect_bound: f64,
}

/// Per-coefficient roundoff allowance in the defect certificates.
const ROUNDOFF_PER_TERM: f64 = 8.0 * f64::EPSILON;

impl InnerFunction {
    pub fn monomial(grid: &TruncationGrid, k: MultiIndex) -> Result<Self> {
        grid.lin_index(&k)?;
        Ok(InnerFunction { grid: grid.clone(), structure: InnerStructure::Monomial(k), defect_bound: 0.0 })
    }

    /// Finite Blaschke product in variable `var`.
    pub fn blaschke(grid: &TruncationGrid, var: usize, zeros: Vec<C64>) -> Result<Self> {
        check_var(grid, var)?;
        let cap = grid.cap(var);
        let coeffs = blaschke_coeffs(&zeros, cap)?;
        let computed = autocorrelation_defect(&coeffs);
        let bound = blaschke_tail_bound(&zeros, cap)
            .max(computed + ROUNDOFF_PER_TERM * (cap + 1) as f64 * majorant_mass(&zeros).powi(2));
        Ok(InnerFunction {
            grid: grid.clone(),
            structure: InnerStructure::Blaschke1D { var, zeros },
            defect_bound: bound,
        })
    }

    /// Product of inner functions in disjoint variables of the same grid.
    pub fn tensor(grid: &TruncationGrid, factors: Vec<InnerFunction>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::DomainError("tensor product of no factors".into()));
        }
        let mut seen = BTreeSet::new();
        let mut bound = 1.0;
        for f in &factors {
            if f.grid != *grid {
                return Err(Error::GridMismatch(format!("factor on {} inside {grid}", f.grid)));
            }
            for v in f.vars() {
                if !seen.insert(v) {
                    return Err(Error::DomainError(format!("factors share variable {v}")));
                }
            }
            bound *= 1.0 + f.defect_bound;
        }
        Ok(InnerFunction {
            grid: grid.clone(),
            structure: InnerStructure::TensorProduct(factors),
            defect_bound: bound - 1.0,
        })
    }

    /// Arbitrary truncated series; the certificate is the computed defect.
    pub fn raw(series: HardyElement) -> Self {
        let n = series.coeffs().iter().filter(|c| **c != ZERO).count() as f64;
        let mass: f64 = series.coeffs().iter().map(|c| c.norm()).sum();
        let bound = autocorrelation_defect(&series) + ROUNDOFF_PER_TERM * n * mass * mass;
        InnerFunction {
            grid: series.grid().clone(),
            structure: InnerStructure::RawSeries(series),
            defect_bound: bound,
        }
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn structure(&self) -> &InnerStructure {
        &self.structure
    }

    pub fn defect_bound(&self) -> f64 {
        self.defect_bound
    }

    /// Variables the function actually depends on.
    pub fn vars(&self) -> BTreeSet<usize> {
        match &self.structure {
            InnerStructure::Monomial(k) => {
                (0..k.len()).filter(|&j| k.get(j) > 0).collect()
            }
            InnerStructure::Blaschke1D { var, zeros } => {
                if zeros.is_empty() {
                    BTreeSet::new()
                } else {
                    [*var].into_iter().collect()
                }
            }
            InnerStructure::TensorProduct(fs) => fs.iter().flat_map(|f| f.vars()).collect(),
            InnerStructure::RawSeries(h) => h.support_vars(),
        }
    }

    /// Truncated coefficient tensor on the grid.
    pub fn coefficients(&self) -> HardyElement {
        match &self.structure {
            InnerStructure::Monomial(k) => {
                HardyElement::monomial(&self.grid, k).expect("validated at construction")
            }
            InnerStructure::Blaschke1D { var, zeros } => {
                let c = blaschke_coeffs(zeros, self.grid.cap(*var)).expect("validated zeros");
                let mut out = HardyElement::zeros(&self.grid);
                let stride = self.grid.stride(*var);
                for (n, v) in c.coeffs().iter().enumerate() {
                    out.coeffs[n * stride] = *v;
                }
                out
            }
            InnerStructure::TensorProduct(fs) => {
                let mut acc = HardyElement::one(&self.grid);
                for f in fs {
                    let c = f.coefficients();
                    acc = acc.product(&c).expect("same grid").on_grid(&self.grid).expect("same nvars");
                }
                acc
            }
            InnerStructure::RawSeries(h) => h.clone(),
        }
    }
}

/// ℓ¹ mass `∏ (1 + 2|a_i|)` of the coefficient majorant of a Blaschke product.
fn majorant_mass(zeros: &[C64]) -> f64 {
    zeros.iter().map(|a| 1.0 + 2.0 * a.norm()).product()
}

/// `2 · M · ‖majorant tail beyond cap‖₁`. Each factor's coefficients are
/// dominated by `|a|, (1−|a|²), (1−|a|²)|a|, …`.
fn blaschke_tail_bound(zeros: &[C64], cap: usize) -> f64 {
    if zeros.is_empty() {
        return 0.0;
    }
    // a generous horizon so the explicit tail sum is accurate even when tiny
    let horizon = cap + 1 + 4096;
    let mut acc = vec![0.0f64; horizon + 1];
    acc[0] = 1.0;
    for a in zeros {
        let r = a.norm();
        let mut f = vec![0.0f64; horizon + 1];
        if r == 0.0 {
            f[1] = 1.0;
        } else {
            f[0] = r;
            let mut p = 1.0;
            for c in f.iter_mut().skip(1) {
                *c = (1.0 - r * r) * p;
                p *= r;
            }
        }
        let mut next = vec![0.0f64; horizon + 1];
        for (i, x) in acc.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (j, y) in f.iter().enumerate().take(horizon + 1 - i) {
                next[i + j] += x * y;
            }
        }
        acc = next;
    }
    let tail: f64 = acc[cap + 1..].iter().sum();
    let rmax = zeros.iter().map(|a| a.norm()).fold(0.0, f64::max);
    // remainder beyond the horizon, geometric in the largest modulus
    let beyond = acc[horizon] * rmax / (1.0 - rmax).max(MIN_BOUNDARY_DISTANCE);
    2.0 * majorant_mass(zeros) * (tail + beyond)
}
