//! Commutant symbols, operator-valued Fourier coefficients, scalar detection,
//! defect operators and dilations, the factorization of doubly commuting
//! mixed invariant subspaces, and the kernel-type constructions `S_N` and
//! `ψ K(·, φ(z)) H^2(D)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSplit, MultiIndex, TruncationGrid};
use crate::hardy::{
    backward_shift_rows, inner_check, truncated_multiplier, truncated_shift_rows, HardyElement,
    InnerFunction, KernelPoint,
};
use crate::numkernel::{
    adjoint_matmul, commutator_norms_mat, eigenvalues, hermitian_sqrt, kron, matmul, null_space,
    op_norm, orthonormal_columns, projector_distance, qr_r, residual_outside, thin_svd, spectral_radius, CMatrix,
    OperatorMatrix,
};
use crate::subspace::{
    beurling_subspace, classify, interior_backward_residual, kernel_columns, wandering, wandering_with, Classification,
    DCReport, Layout, Subspace,
};
use crate::{C64, DEFAULT_RANK_EPSILON, DEFAULT_TOL};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Operator-valued Taylor coefficients `Φ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSeries {
    pub grid_z: TruncationGrid,
    pub coeffs: BTreeMap<MultiIndex, OperatorMatrix>,
}

impl SymbolSeries {
    pub fn coeff(&self, k: &MultiIndex) -> Option<&OperatorMatrix> {
        self.coeffs.get(k)
    }
}

/// Symbol of an operator commuting with the tuple `V`:
/// `Φ_k = P_W V^{*k} T|_W` with `W = ∩ Ker V_j^*`.
///
/// `t` and `v` are square matrices in a common orthonormal basis.
pub fn commutant_symbol(
    t: &OperatorMatrix,
    v: &[OperatorMatrix],
    max_degree: &MultiIndex,
) -> Result<SymbolSeries> {
    let n = t.rows();
    if t.cols() != n {
        return Err(Error::GridMismatch("commutant symbol of a non-square operator".into()));
    }
    if v.is_empty() || v.len() != max_degree.len() {
        return Err(Error::GridMismatch(format!(
            "{} operators with a {}-variable degree bound",
            v.len(),
            max_degree.len()
        )));
    }
    for (j, vj) in v.iter().enumerate() {
        if vj.rows() != n || vj.cols() != n {
            return Err(Error::GridMismatch(format!("V_{j} has the wrong size")));
        }
        let c = op_norm(&(matmul(t.as_matrix(), vj.as_matrix()) - matmul(vj.as_matrix(), t.as_matrix())));
        if c > 1e-8 {
            return Err(Error::PrereqFailed(format!("T does not commute with V_{j} ({c:.3e})")));
        }
    }
    let mut stacked = CMatrix::zeros(n * v.len(), n);
    for (j, vj) in v.iter().enumerate() {
        stacked.rows_mut(j * n, n).copy_from(&vj.as_matrix().adjoint());
    }
    let (w, _) = null_space(&stacked, DEFAULT_RANK_EPSILON)?;
    let grid_z = TruncationGrid::new(max_degree.entries().to_vec())?;
    let vstar: Vec<CMatrix> = v.iter().map(|x| x.as_matrix().adjoint()).collect();
    // Y_k = V^{*k} T W, filled in grid order so Y_{k − e_j} is always ready
    let mut ys: Vec<CMatrix> = Vec::with_capacity(grid_z.size());
    let mut coeffs = BTreeMap::new();
    for (i, k) in grid_z.indices().enumerate() {
        let y = if i == 0 {
            matmul(t.as_matrix(), &w)
        } else {
            let j = (0..k.len()).rev().find(|&j| k.get(j) > 0).expect("nonzero index");
            let prev = i - grid_z.stride(j);
            matmul(&vstar[j], &ys[prev])
        };
        coeffs.insert(k, OperatorMatrix::new(adjoint_matmul(&w, &y)));
        ys.push(y);
    }
    Ok(SymbolSeries { grid_z, coeffs })
}

/// `M_Φ = Σ_k T_z^k ⊗ (M_{Θ_k})^*` on the split parent grid, where `T_z` are
/// the truncated shifts of the leading variables and `M_{Θ_k}` the truncated
/// multiplier by `Θ_k` on the trailing grid.
pub fn block_multiplier(split: &GridSplit, thetas: &BTreeMap<MultiIndex, HardyElement>) -> Result<OperatorMatrix> {
    let left = split.left();
    let right = split.right();
    let mut acc = CMatrix::zeros(split.parent().size(), split.parent().size());
    for (k, th) in thetas {
        let mut tz = CMatrix::identity(left.size(), left.size());
        for j in 0..left.nvars() {
            for _ in 0..k.get(j) {
                tz = truncated_shift_rows(left, j, &tz);
            }
        }
        let th = th.on_grid(right)?;
        let m = truncated_multiplier(&th, right)?.as_matrix().adjoint();
        acc += kron(&tz, &m);
    }
    OperatorMatrix::between(acc, split.parent().clone(), split.parent().clone())
}

/// Coefficient functions `Θ_k(w) = Σ_l ⟨z^k 1, T w^l⟩ w^l` for `k ≤ max_k`.
pub fn theta_fourier(
    t: &OperatorMatrix,
    split: &GridSplit,
    max_k: &MultiIndex,
) -> Result<BTreeMap<MultiIndex, HardyElement>> {
    let parent = split.parent();
    let m = t.as_matrix();
    if m.nrows() != parent.size() || m.ncols() != parent.size() {
        return Err(Error::GridMismatch(format!("operator does not act on {parent}")));
    }
    if max_k.len() != split.k() {
        return Err(Error::GridMismatch(format!("max_k {max_k} for a {}-variable block", split.k())));
    }
    let id = CMatrix::identity(parent.size(), parent.size());
    for j in 0..split.k() {
        let s = truncated_shift_rows(parent, j, &id);
        let c = op_norm(&(matmul(m, &s) - matmul(&s, m)));
        if c > 1e-8 {
            return Err(Error::PrereqFailed(format!("T does not commute with z_{j} ({c:.3e})")));
        }
    }
    for j in split.k()..parent.nvars() {
        let b = backward_shift_rows(parent, j, &id);
        let c = op_norm(&(matmul(m, &b) - matmul(&b, m)));
        if c > 1e-8 {
            return Err(Error::PrereqFailed(format!("T does not commute with z_{j}^* ({c:.3e})")));
        }
    }
    let left = split.left();
    let right = split.right();
    let kgrid = TruncationGrid::new(
        max_k.entries().iter().zip(left.caps()).map(|(a, b)| *a.min(b)).collect(),
    )?;
    let mut out = BTreeMap::new();
    for k in kgrid.indices() {
        let row = split.join_index(left.lin_index(&k)?, 0);
        let coeffs: Vec<C64> = (0..right.size()).map(|l| m[(row, split.join_index(0, l))].conj()).collect();
        out.insert(k, HardyElement::new(right.clone(), coeffs)?);
    }
    Ok(out)
}

/// Classification of `ran T` at the split.
pub fn range_classify(t: &OperatorMatrix, split: &GridSplit, tol: f64) -> Result<Classification> {
    let s = Subspace::from_columns(split.parent().clone(), t.as_matrix(), DEFAULT_RANK_EPSILON)?;
    classify(&s, split.k(), tol)
}

/// Result of [`scalar_detect`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScalarOutcome {
    Scalar { lambda: C64, residual: f64 },
    NotScalar { residual: f64, lambda_estimate: C64 },
}

/// Decides whether an isometry `T: Q → H^2` that intertwines the backward
/// shifts is a unimodular multiple of the inclusion.
///
/// `t` is `grid size × dim Q`, giving `T` applied to the basis of `Q`.
pub fn scalar_detect(t: &OperatorMatrix, q: &Subspace, tol: f64) -> Result<ScalarOutcome> {
    let grid = q.grid();
    let b = q.basis();
    let tm = t.as_matrix();
    if tm.nrows() != grid.size() || tm.ncols() != q.dim() {
        return Err(Error::GridMismatch(format!(
            "{}x{} operator for a {}-dimensional subspace of {grid}",
            tm.nrows(),
            tm.ncols(),
            q.dim()
        )));
    }
    if q.dim() == 0 {
        return Err(Error::DomainError("zero-dimensional subspace".into()));
    }
    for j in 0..grid.nvars() {
        let r = q.backward_interior_residual(j)?;
        if r > tol {
            return Err(Error::PrereqFailed(format!("Q is not backward invariant in z_{j} ({r:.3e})")));
        }
    }
    let iso = crate::numkernel::gram_defect(tm);
    if iso > tol {
        return Err(Error::PrereqFailed(format!("T is not isometric ({iso:.3e})")));
    }
    for j in 0..grid.nvars() {
        let a = adjoint_matmul(&b, &backward_shift_rows(grid, j, &b));
        let keep: Vec<usize> = (0..grid.size()).filter(|&i| grid.degree_at(i, j) < grid.cap(j)).collect();
        let diff = matmul(tm, &a) - backward_shift_rows(grid, j, tm);
        let r = op_norm(&diff.select_rows(keep.iter()));
        if r > tol {
            return Err(Error::PrereqFailed(format!("T does not intertwine z_{j}^* ({r:.3e})")));
        }
    }
    let lambda = adjoint_matmul(&b, tm).trace() / q.dim() as f64;
    let residual = op_norm(&(tm - &b * lambda));
    if residual <= tol && (lambda.norm() - 1.0).abs() <= tol {
        Ok(ScalarOutcome::Scalar { lambda, residual })
    } else {
        Ok(ScalarOutcome::NotScalar { residual, lambda_estimate: lambda })
    }
}

/// A one-variable factor of a mixed invariant subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Factor {
    /// Model space of the Blaschke product with these zeros.
    Model { zeros: Vec<C64> },
    /// The factor fills the whole truncated space.
    FullAtTruncation,
}

/// `Θ H^2(D^k) ⊗ Q_1 ⊗ … ⊗ Q_{n−k}` on `grid`, with `k = n − factors.len()`.
pub fn mixed_subspace(
    theta: &InnerFunction,
    factors: &[Factor],
    grid: &TruncationGrid,
    layout: Layout,
) -> Result<Subspace> {
    let n = grid.nvars();
    if factors.is_empty() || factors.len() >= n {
        return Err(Error::DomainError(format!("{} factors on {n} variables", factors.len())));
    }
    let k = n - factors.len();
    if let Some(v) = theta.vars().into_iter().find(|&v| v >= k) {
        return Err(Error::DomainError(format!("Θ depends on trailing variable {v}")));
    }
    let head = beurling_subspace(theta, grid)?;
    let mut parts: Vec<(TruncationGrid, CMatrix)> = head
        .blocks()
        .iter()
        .take(k)
        .map(|b| (b.grid().clone(), b.basis().clone()))
        .collect();
    for (i, f) in factors.iter().enumerate() {
        let cap = grid.cap(k + i);
        let basis = match f {
            Factor::FullAtTruncation => CMatrix::identity(cap + 1, cap + 1),
            Factor::Model { zeros } => {
                if zeros.is_empty() || zeros.len() > cap {
                    return Err(Error::DomainError(format!(
                        "factor {i} has {} zeros under cap {cap}",
                        zeros.len()
                    )));
                }
                for a in zeros {
                    KernelPoint::new(vec![*a])?;
                }
                orthonormal_columns(&kernel_columns(zeros, cap)?, DEFAULT_RANK_EPSILON)?.0
            }
        };
        parts.push((TruncationGrid::new(vec![cap])?, basis));
    }
    let s = Subspace::from_blocks(parts)?;
    if s.dim() == 0 {
        return Err(Error::DomainError("constructed subspace is zero-dimensional".into()));
    }
    layout.apply(&s, k)
}

/// Builds `S = Θ H^2(D^k) ⊗ Q_1 ⊗ …` and reports whether its compressed
/// tuple is doubly commuting, allowing `tol` plus the truncation defects.
pub fn verify_forward(
    theta: &InnerFunction,
    factors: &[Factor],
    grid: &TruncationGrid,
    tol: f64,
) -> Result<DCReport> {
    let s = mixed_subspace(theta, factors, grid, Layout::Dense)?;
    let mut allowance = tol + theta.defect_bound();
    for (i, f) in factors.iter().enumerate() {
        if let Factor::Model { zeros } = f {
            let g1 = TruncationGrid::new(vec![grid.cap(grid.nvars() - factors.len() + i)])?;
            allowance += InnerFunction::blaschke(&g1, 0, zeros.clone())?.defect_bound();
        }
    }
    crate::subspace::dc_report(&s, allowance)
}

/// Output of [`defect_and_dilate`].
#[derive(Clone, Debug)]
pub struct Dilation {
    /// `D = (∏ (I − T_j T_j^*))^{1/2}`.
    pub defect: OperatorMatrix,
    /// `Π h = Σ_{k ≤ caps} z^k ⊗ D T^{*k} h`, rows indexed by `lin(k)·dim H + e`.
    pub embedding: OperatorMatrix,
    pub caps: MultiIndex,
    /// `‖I − Π^*Π‖`.
    pub isometry_defect: f64,
    /// `‖I − ∏_j (I − T_j^{c_j+1} T_j^{*(c_j+1)})‖`, the closed form of the above.
    pub closed_form_defect: f64,
    /// `‖(I − Π^*Π) − (I − ∏_j (I − T_j^{c_j+1} T_j^{*(c_j+1)}))‖`.
    pub ledger_residual: f64,
    /// `‖Π T_j^* − M_{z_j}^* Π‖` on rows with `k_j < c_j`, maximized over `j`.
    pub intertwining_residual: f64,
}

/// Defect operator and the truncated minimal isometric dilation embedding of
/// a doubly commuting pure tuple.
pub fn defect_and_dilate(ops: &[OperatorMatrix], caps: &MultiIndex, tol: f64) -> Result<Dilation> {
    if ops.is_empty() || ops.len() != caps.len() {
        return Err(Error::GridMismatch(format!("{} operators with caps {caps}", ops.len())));
    }
    let h = ops[0].rows();
    let mats: Vec<&CMatrix> = ops.iter().map(|o| o.as_matrix()).collect();
    for (j, m) in mats.iter().enumerate() {
        if m.nrows() != h || m.ncols() != h {
            return Err(Error::GridMismatch(format!("T_{j} is not {h}x{h}")));
        }
        let nrm = op_norm(m);
        if nrm > 1.0 + 1e-10 {
            return Err(Error::PrereqFailed(format!("T_{j} is not a contraction (norm {nrm})")));
        }
        let rho = spectral_radius(m)?;
        if rho >= 1.0 - 1e-10 {
            return Err(Error::PrereqFailed(format!("T_{j} is not pure (spectral radius {rho})")));
        }
    }
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            let (a, b) = commutator_norms_mat(mats[i], mats[j])?;
            if a.max(b) > tol {
                return Err(Error::PrereqFailed(format!(
                    "T_{i}, T_{j} are not doubly commuting ({:.3e})",
                    a.max(b)
                )));
            }
        }
    }
    let id = CMatrix::identity(h, h);
    let mut prod = id.clone();
    for m in &mats {
        prod = matmul(&prod, &(&id - matmul(m, &m.adjoint())));
    }
    let d = hermitian_sqrt(&OperatorMatrix::new(prod))?;
    let grid = TruncationGrid::new(caps.entries().to_vec())?;
    let adj: Vec<CMatrix> = mats.iter().map(|m| m.adjoint()).collect();
    // X_k = T^{*k}, filled in grid order
    let mut xs: Vec<CMatrix> = Vec::with_capacity(grid.size());
    let mut pi = CMatrix::zeros(grid.size() * h, h);
    for (i, k) in grid.indices().enumerate() {
        let x = if i == 0 {
            id.clone()
        } else {
            let j = (0..k.len()).rev().find(|&j| k.get(j) > 0).expect("nonzero index");
            matmul(&adj[j], &xs[i - grid.stride(j)])
        };
        pi.rows_mut(i * h, h).copy_from(&matmul(d.as_matrix(), &x));
        xs.push(x);
    }
    let numeric = &id - adjoint_matmul(&pi, &pi);
    let mut closed = id.clone();
    for (j, m) in mats.iter().enumerate() {
        let p = matrix_power(m, caps.get(j) + 1);
        closed = matmul(&closed, &(&id - matmul(&p, &p.adjoint())));
    }
    let closed = &id - closed;
    let mut inter = 0.0f64;
    for (j, a) in adj.iter().enumerate() {
        let lhs = block_apply(&pi, h, a);
        for (i, k) in grid.indices().enumerate() {
            if k.get(j) >= caps.get(j) {
                continue;
            }
            let up = i + grid.stride(j);
            let diff = lhs.rows(i * h, h) - pi.rows(up * h, h);
            inter = inter.max(op_norm(&diff.into_owned()));
        }
    }
    Ok(Dilation {
        defect: d,
        embedding: OperatorMatrix::new(pi),
        caps: caps.clone(),
        isometry_defect: op_norm(&numeric),
        closed_form_defect: op_norm(&closed),
        ledger_residual: op_norm(&(numeric - closed)),
        intertwining_residual: inter,
    })
}

fn block_apply(pi: &CMatrix, _h: usize, a: &CMatrix) -> CMatrix {
    matmul(pi, a)
}

fn matrix_power(m: &CMatrix, p: usize) -> CMatrix {
    let mut out = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        out = matmul(&out, m);
    }
    out
}

/// Tuning knobs of [`factorize_mixed`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizeOptions {
    /// Invariance and commutation tolerance for the hypothesis check.
    pub tol: f64,
    /// Relative threshold for rank decisions.
    pub rank_epsilon: f64,
    /// Largest accepted `σ_2/σ_1` of the leading-block matricization.
    pub rank_ratio: f64,
    /// Tolerance of the inner-function check on the recovered `Θ`.
    pub inner_tol: f64,
    /// Eigenvalues closer than this are merged into one repeated zero.
    pub cluster_radius: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions {
            tol: DEFAULT_TOL,
            rank_epsilon: DEFAULT_RANK_EPSILON,
            rank_ratio: 1e-6,
            inner_tol: 1e-2,
            cluster_radius: 1e-4,
        }
    }
}

/// Output of [`factorize_mixed`].
#[derive(Clone, Debug)]
pub struct Factorization {
    pub split: usize,
    /// Recovered `Θ` on the leading variables, unit norm, phase-normalized.
    pub theta: InnerFunction,
    pub factors: Vec<Factor>,
    /// Unimodular constant multiplied into the raw singular vector.
    pub lambda: C64,
    pub residuals: BTreeMap<String, f64>,
    pub wandering_dim: usize,
    pub options: FactorizeOptions,
}

impl Factorization {
    pub fn theta_coeffs(&self) -> HardyElement {
        self.theta.coefficients()
    }
}

/// Rotates `v` so its first significant entry (modulus above `1e-6` of the
/// largest) is real positive; returns the factor applied.
pub fn phase_normalize(v: &mut [C64]) -> C64 {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let Some(first) = v.iter().find(|c| c.norm() > 1e-6 * max) else {
        return ONE;
    };
    let lambda = first.conj() / first.norm();
    for c in v.iter_mut() {
        *c *= lambda;
    }
    lambda
}

/// Factorizes a doubly commuting mixed invariant subspace as
/// `Θ H^2(D^k) ⊗ Q_1 ⊗ … ⊗ Q_{n−k}`.
pub fn factorize_mixed(s: &Subspace, k: usize, opts: &FactorizeOptions) -> Result<Factorization> {
    let n = s.grid().nvars();
    if k == 0 || k >= n {
        return Err(Error::DomainError(format!("split {k} on {n} variables")));
    }
    let mut residuals = BTreeMap::new();
    let cl = classify(s, k, opts.tol)?;
    let fmax = cl.forward_residuals[..k].iter().copied().fold(0.0, f64::max);
    let bmax = cl.backward_residuals[k..].iter().copied().fold(0.0, f64::max);
    residuals.insert("hypothesis_forward".to_string(), fmax);
    residuals.insert("hypothesis_backward".to_string(), bmax);
    residuals.insert("hypothesis_commutator".to_string(), cl.dc.max_commutator);
    if !cl.mixed {
        return Err(Error::PrereqFailed(format!(
            "not mixed invariant at split {k} (forward {fmax:.3e}, backward {bmax:.3e})"
        )));
    }
    if !cl.dc.is_doubly_commuting {
        return Err(Error::PrereqFailed(format!(
            "compressed tuple is not doubly commuting ({:.3e})",
            cl.dc.max_commutator
        )));
    }
    let vars: Vec<usize> = (0..k).collect();
    let w = wandering_with(s, &vars, opts.rank_epsilon)?;
    if w.dim() == 0 {
        return Err(Error::StructureViolation("wandering subspace is trivial".into()));
    }
    let split = GridSplit::new(s.grid().clone(), k)?;
    let aligned = s.blocks().iter().any(|b| b.end() == k);

    let (mut theta, q_hat, ratio) = if aligned {
        let left = kron_blocks(w.blocks().iter().filter(|b| b.end() <= k).map(|b| b.basis()));
        let right = kron_blocks(w.blocks().iter().filter(|b| b.start() >= k).map(|b| b.basis()));
        if left.ncols() != 1 {
            return Err(Error::StructureViolation(format!(
                "leading block of the wandering subspace has dimension {}",
                left.ncols()
            )));
        }
        (left.column(0).iter().copied().collect::<Vec<_>>(), right, 0.0)
    } else {
        let wb = w.basis();
        let cols: Vec<CMatrix> = (0..wb.ncols())
            .map(|i| split.matricize(wb.column(i).as_slice()))
            .collect();
        let (u, sv) = left_singular(&cols)?;
        let ratio = if sv.len() > 1 && sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
        if ratio > opts.rank_ratio {
            return Err(Error::StructureViolation(format!(
                "leading block has numerical rank above one (σ2/σ1 = {ratio:.3e})"
            )));
        }
        let theta: Vec<C64> = u.column(0).iter().copied().collect();
        let th = CMatrix::from_column_slice(theta.len(), 1, &theta);
        let mut qs = CMatrix::zeros(split.right().size(), cols.len());
        for (i, m) in cols.iter().enumerate() {
            let row = adjoint_matmul(&th, m);
            for l in 0..row.ncols() {
                qs[(l, i)] = row[(0, l)];
            }
        }
        let (q, _) = orthonormal_columns(&qs, opts.rank_epsilon)?;
        (theta, q, ratio)
    };
    residuals.insert("leading_rank_ratio".to_string(), ratio);

    let lambda = phase_normalize(&mut theta);
    let theta_el = HardyElement::new(split.left().clone(), theta.clone())?;
    let (ok, defect) = inner_check(&theta_el, opts.inner_tol);
    residuals.insert("theta_inner_defect".to_string(), defect);
    if !ok {
        return Err(Error::StructureViolation(format!(
            "recovered Θ fails the inner check ({defect:.3e} > {})",
            opts.inner_tol
        )));
    }

    let right = split.right();
    let mut factors = Vec::with_capacity(right.nvars());
    let mut fibers = Vec::with_capacity(right.nvars());
    for t in 0..right.nvars() {
        let f = fiber_space(right, t, &q_hat, opts.rank_epsilon)?;
        let cap = right.cap(t);
        let g1 = TruncationGrid::new(vec![cap])?;
        residuals.insert(format!("factor_{t}_backward"), interior_backward_residual(&g1, 0, &f, &f)?);
        if f.ncols() == cap + 1 {
            factors.push(Factor::FullAtTruncation);
        } else {
            let a = interior_backward_compression(&g1, &f)?;
            let ev: Vec<C64> = eigenvalues(&a)?.iter().map(|z| z.conj()).collect();
            factors.push(Factor::Model { zeros: cluster_zeros(&ev, opts.cluster_radius) });
        }
        fibers.push(f);
    }
    let q_rec = kron_blocks(fibers.iter());
    residuals.insert("tensor_reconstruction".to_string(), projector_distance(&q_hat, &q_rec));

    // leading column space of S, and S against L ⊗ Q_rec
    let (l, full) = if aligned {
        let l = kron_blocks(s.blocks().iter().filter(|b| b.end() <= k).map(|b| b.basis()));
        let sr = kron_blocks(s.blocks().iter().filter(|b| b.start() >= k).map(|b| b.basis()));
        (l, projector_distance(&sr, &q_rec))
    } else {
        let sb = s.basis();
        let cols: Vec<CMatrix> = (0..sb.ncols()).map(|i| split.matricize(sb.column(i).as_slice())).collect();
        let (u, sv) = left_singular(&cols)?;
        let rd = crate::numkernel::RankDecision::from_singular_values(sv, opts.rank_epsilon);
        let l = u.columns(0, rd.rank).into_owned();
        let rec = kron(&l, &q_rec);
        (l, projector_distance(&sb, &rec))
    };
    residuals.insert("full_reconstruction".to_string(), full);
    let lsub = Subspace::dense(split.left().clone(), l)?;
    let lw = wandering(&lsub, &vars)?;
    let th = CMatrix::from_column_slice(theta.len(), 1, &theta);
    residuals.insert("leading_wandering_match".to_string(), projector_distance(&lw.basis(), &th));

    Ok(Factorization {
        split: k,
        theta: InnerFunction::raw(theta_el),
        factors,
        lambda,
        residuals,
        wandering_dim: w.dim(),
        options: opts.clone(),
    })
}

fn kron_blocks<'a>(mut it: impl Iterator<Item = &'a CMatrix>) -> CMatrix {
    let first = it.next().cloned().unwrap_or_else(|| CMatrix::identity(1, 1));
    it.fold(first, |acc, b| kron(&acc, b))
}

/// The matrix `A` with `z^* F = F A` on the rows below the cap, by least
/// squares. Truncated kernels only miss that identity in the top row.
fn interior_backward_compression(g1: &TruncationGrid, f: &CMatrix) -> Result<CMatrix> {
    let cap = g1.cap(0);
    let lhs = f.rows(0, cap).into_owned();
    let rhs = backward_shift_rows(g1, 0, f).rows(0, cap).into_owned();
    let (u, sv, v) = thin_svd(&lhs)?;
    let inv = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        sv.len(),
        sv.iter().map(|&x| if x > 0.0 { C64::new(1.0 / x, 0.0) } else { C64::new(0.0, 0.0) }),
    ));
    Ok(matmul(&matmul(&v, &inv), &adjoint_matmul(&u, &rhs)))
}

/// Left singular vectors and values of `[M_1 M_2 …]` (all with equal rows).
fn left_singular(mats: &[CMatrix]) -> Result<(CMatrix, Vec<f64>)> {
    let rows = mats[0].nrows();
    let width: usize = mats.iter().map(|m| m.ncols()).sum();
    // work with the tall adjoint: [M_1 …]^* = Q R, so [M_1 …] = R^* Q^*
    let mut tall = CMatrix::zeros(width, rows);
    let mut at = 0;
    for m in mats {
        tall.rows_mut(at, m.ncols()).copy_from(&m.adjoint());
        at += m.ncols();
    }
    let small = if width > rows { qr_r(&tall).adjoint() } else { tall.adjoint() };
    let (u, sv, _) = thin_svd(&small)?;
    Ok((u, sv))
}

/// Orthonormal basis of the span of all mode-`t` fibers of the columns of `q`.
fn fiber_space(grid: &TruncationGrid, t: usize, q: &CMatrix, eps: f64) -> Result<CMatrix> {
    let cap = grid.cap(t);
    let stride = grid.stride(t);
    let others: Vec<usize> = (0..grid.size()).filter(|&i| grid.degree_at(i, t) == 0).collect();
    let mut m = CMatrix::zeros(cap + 1, others.len() * q.ncols());
    for c in 0..q.ncols() {
        for (o, &base) in others.iter().enumerate() {
            for d in 0..=cap {
                m[(d, c * others.len() + o)] = q[(base + d * stride, c)];
            }
        }
    }
    Ok(orthonormal_columns(&m, eps)?.0)
}

/// Merges eigenvalues within `radius` (single linkage) and replaces each
/// cluster by its mean, repeated by the cluster size.
pub fn cluster_zeros(ev: &[C64], radius: f64) -> Vec<C64> {
    let n = ev.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<C64>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(ev[i]);
    }
    let mut out = Vec::with_capacity(n);
    for g in groups.values() {
        let mean = g.iter().sum::<C64>() / g.len() as f64;
        out.extend(std::iter::repeat_n(mean, g.len()));
    }
    sort_zeros(&mut out);
    out
}

/// Sorts by real part, then imaginary part.
pub fn sort_zeros(z: &mut [C64]) {
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Distance between two zero multisets of equal size: the smallest possible
/// largest pairing distance, by greedy nearest matching.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal sizes");
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

/// `S_N = H^2(D) ⊗ span{K(·, α_1), …, K(·, α_N)}` on a two-variable grid.
pub fn build_sn(alphas: &[C64], grid: &TruncationGrid) -> Result<Subspace> {
    if grid.nvars() != 2 {
        return Err(Error::GridMismatch(format!("S_N lives on two variables, not {grid}")));
    }
    if alphas.is_empty() {
        return Err(Error::DomainError("no kernel points".into()));
    }
    for (i, a) in alphas.iter().enumerate() {
        KernelPoint::new(vec![*a])?;
        if alphas[..i].iter().any(|b| b == a) {
            return Err(Error::DomainError(format!("kernel point {a} repeated")));
        }
    }
    let cap = grid.cap(1);
    let k = kernel_columns(alphas, cap)?;
    let (q, rd) = orthonormal_columns(&k, DEFAULT_RANK_EPSILON)?;
    if rd.rank < alphas.len() {
        return Err(Error::DomainError(format!(
            "kernels are numerically dependent at cap {cap} (rank {} of {})",
            rd.rank,
            alphas.len()
        )));
    }
    let c0 = grid.cap(0);
    Subspace::from_blocks(vec![
        (TruncationGrid::new(vec![c0])?, CMatrix::identity(c0 + 1, c0 + 1)),
        (TruncationGrid::new(vec![cap])?, q),
    ])
}

/// A one-variable contractive symbol with constant modulus on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "c", rename_all = "kebab-case")]
pub enum Symbol1D {
    /// `φ(z) = c`
    Constant(C64),
    /// `φ(z) = c z`
    Linear(C64),
}

impl Symbol1D {
    pub fn coefficient(&self) -> C64 {
        match self {
            Symbol1D::Constant(c) | Symbol1D::Linear(c) => *c,
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Symbol1D::Constant(c) => *c,
            Symbol1D::Linear(c) => c * z,
        }
    }

    fn z_degree(&self) -> usize {
        match self {
            Symbol1D::Constant(_) => 0,
            Symbol1D::Linear(_) => 1,
        }
    }
}

/// Symbols of the kernel-type construction `Θ(z)(w) = ψ ∏_j 1/(1 − φ_j(z) w_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Data {
    pub phis: Vec<Symbol1D>,
    pub psi: C64,
}

impl Theorem5Data {
    /// Data with the constant `ψ = ∏ (1 − |c_j|²)^{1/2}` satisfying the
    /// modulus constraint.
    pub fn balanced(phis: Vec<Symbol1D>) -> Self {
        let psi = phis.iter().map(|p| 1.0 - p.coefficient().norm_sqr()).product::<f64>().sqrt();
        Theorem5Data { phis, psi: C64::new(psi, 0.0) }
    }
}

/// Number of equispaced torus samples used by the boundary checks.
pub const TORUS_SAMPLES: usize = 64;

/// Report of [`theorem5_construct`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Report {
    pub modulus_residual: f64,
    pub forward_residual: f64,
    /// `‖(I − P_S) z_{w_j}^* P_{S ∩ Int_z}‖` for each `w_j`.
    pub backward_residuals: Vec<f64>,
    pub mixed_invariant: bool,
    pub wandering_dim: usize,
    /// `max_t | ‖Θ(e^{it}, ·)‖ − 1 |` over the samples.
    pub torus_max_deviation: f64,
    /// Analytic truncation tail of `‖Θ(e^{it}, ·)‖` plus a roundoff floor.
    pub tail_bound: f64,
    pub samples: usize,
}

/// Builds `S = span{z^p Θ : p ≤ d_z}` on a grid whose `z` cap is enlarged by
/// the `z`-degree of `Θ`, so every element is represented exactly; `Θ` is
/// truncated in the `w` variables only.
pub fn theorem5_construct(data: &Theorem5Data, grid: &TruncationGrid, tol: f64) -> Result<(Subspace, Theorem5Report)> {
    let n = data.phis.len();
    if n == 0 || grid.nvars() != n + 1 {
        return Err(Error::GridMismatch(format!("{n} symbols on {grid}")));
    }
    for p in &data.phis {
        if !(p.coefficient().norm() < 1.0) {
            return Err(Error::DomainError(format!("symbol coefficient {} not in the disc", p.coefficient())));
        }
    }
    let mut modulus = 0.0f64;
    for s in 0..TORUS_SAMPLES {
        let z = C64::from_polar(1.0, 2.0 * PI * s as f64 / TORUS_SAMPLES as f64);
        let rhs: f64 = data.phis.iter().map(|p| 1.0 - p.eval(z).norm_sqr()).product();
        modulus = modulus.max((data.psi.norm_sqr() - rhs).abs());
    }
    if modulus > 1e-8 {
        return Err(Error::DomainError(format!("|ψ|² ≠ ∏(1 − |φ_j|²) on the circle ({modulus:.3e})")));
    }
    let wcaps: Vec<usize> = grid.caps()[1..].to_vec();
    let zdeg: usize = data.phis.iter().zip(&wcaps).map(|(p, d)| p.z_degree() * d).sum();
    let m = grid.cap(0);
    let mut caps = vec![m + zdeg];
    caps.extend_from_slice(&wcaps);
    let big = TruncationGrid::new(caps)?;
    let wgrid = TruncationGrid::new(wcaps.clone())?;

    // Θ coefficients: ψ ∏_j c_j^{l_j} z^{Σ_{linear} l_j} w^l
    let mut theta = vec![ZERO; big.size()];
    for l in wgrid.indices() {
        let mut coef = data.psi;
        let mut zp = 0;
        for (j, p) in data.phis.iter().enumerate() {
            coef *= p.coefficient().powu(l.get(j) as u32);
            zp += p.z_degree() * l.get(j);
        }
        let mut idx = vec![zp];
        idx.extend_from_slice(l.entries());
        theta[big.lin_index_unchecked(&idx)] = coef;
    }
    let mut cols = CMatrix::zeros(big.size(), m + 1);
    for i in 0..big.size() {
        if theta[i] == ZERO {
            continue;
        }
        for p in 0..=m {
            cols[(i + p * big.stride(0), p)] = theta[i];
        }
    }
    let s = Subspace::from_columns(big.clone(), &cols, DEFAULT_RANK_EPSILON)?;

    // declared interior: the generators z^p Θ with p < d_z, whose z-shifts
    // stay among the generators
    let b = s.basis();
    let (interior, _) = orthonormal_columns(&cols.columns(0, m).into_owned(), DEFAULT_RANK_EPSILON)?;
    let shifted = truncated_shift_rows(&big, 0, &interior);
    let forward = residual_outside(&b, &shifted);
    let backward: Vec<f64> = (1..=n)
        .map(|j| interior_backward_residual(&big, j, &b, &interior))
        .collect::<Result<_>>()?;
    let mixed = forward <= tol && backward.iter().all(|r| *r <= tol);
    // W = S ⊖ z (S ∩ Int_z)
    let (w, _) = null_space(&adjoint_matmul(&shifted, &b), DEFAULT_RANK_EPSILON)?;

    // ‖Θ(e^{it}, ·)‖ from the coefficients, against the closed form
    let mut dev = 0.0f64;
    for t in 0..TORUS_SAMPLES {
        let z = C64::from_polar(1.0, 2.0 * PI * t as f64 / TORUS_SAMPLES as f64);
        let mut sq = 0.0;
        for l in 0..wgrid.size() {
            let mut v = ZERO;
            let mut zp = ONE;
            for p in 0..big.cap(0) + 1 {
                v += theta[p * big.stride(0) + l] * zp;
                zp *= z;
            }
            sq += v.norm_sqr();
        }
        dev = dev.max((sq.sqrt() - 1.0).abs());
    }
    let kept: f64 = data
        .phis
        .iter()
        .zip(&wcaps)
        .map(|(p, d)| 1.0 - p.coefficient().norm().powi(2 * (*d as i32 + 1)))
        .product();
    let floor = f64::EPSILON * wgrid.size() as f64 * (big.cap(0) + 1) as f64;
    let tail_bound = (1.0 - kept.sqrt()) + floor;

    let report = Theorem5Report {
        modulus_residual: modulus,
        forward_residual: forward,
        backward_residuals: backward,
        mixed_invariant: mixed,
        wandering_dim: w.ncols(),
        torus_max_deviation: dev,
        tail_bound,
        samples: TORUS_SAMPLES,
    };
    Ok((s, report))
}
