//! Dense complex linear algebra used by the rest of the crate.
//!
//! Matrices are nalgebra types; products, QR and SVD run through faer. On top
//! of that: SVD-based orthonormalization and null spaces with explicit
//! [`RankDecision`]s, a Hermitian square root with documented clamping, and
//! operator norms that are always the largest singular value.

use faer::traits::Conjugate;
use faer::{linalg, Accum, Mat, MatRef, Par};
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::TruncationGrid;
use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues of a Hermitian input in `[-CLAMP, 0)` are treated as zero.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

/// Allowed deviation from Hermitian symmetry, relative to `max(1, ‖A‖)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A complex matrix, optionally tagged with the grids of its domain and
/// codomain.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    mat: CMatrix,
    src: Option<TruncationGrid>,
    dst: Option<TruncationGrid>,
}

impl OperatorMatrix {
    pub fn new(mat: CMatrix) -> Self {
        OperatorMatrix { mat, src: None, dst: None }
    }

    /// Tagged matrix; rows must match `dst` and columns `src`.
    pub fn between(mat: CMatrix, src: TruncationGrid, dst: TruncationGrid) -> Result<Self> {
        if mat.nrows() != dst.size() || mat.ncols() != src.size() {
            return Err(Error::GridMismatch(format!(
                "{}x{} matrix cannot map {src} to {dst}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(OperatorMatrix { mat, src: Some(src), dst: Some(dst) })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(CMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn src_grid(&self) -> Option<&TruncationGrid> {
        self.src.as_ref()
    }

    pub fn dst_grid(&self) -> Option<&TruncationGrid> {
        self.dst.as_ref()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            mat: self.mat.adjoint(),
            src: self.dst.clone(),
            dst: self.src.clone(),
        }
    }

    /// Composition `self · rhs`.
    pub fn mul(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::GridMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        if let (Some(a), Some(b)) = (&self.src, &rhs.dst) {
            if a != b {
                return Err(Error::GridMismatch(format!("composing through {b} into {a}")));
            }
        }
        Ok(OperatorMatrix {
            mat: matmul(&self.mat, &rhs.mat),
            src: rhs.src.clone(),
            dst: self.dst.clone(),
        })
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols() {
            return Err(Error::GridMismatch(format!(
                "vector of length {} for {} columns",
                v.len(),
                self.cols()
            )));
        }
        let x = CVector::from_column_slice(v);
        Ok((&self.mat * x).as_slice().to_vec())
    }

    /// Operator 2-norm.
    pub fn norm(&self) -> f64 {
        op_norm(&self.mat)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.mat)
    }
}

/// Outcome of a numerical rank decision.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankDecision {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
}

impl RankDecision {
    /// Counts the singular values above `rank_epsilon · max(σ_max, 1)`.
    pub fn from_singular_values(mut sv: Vec<f64>, rank_epsilon: f64) -> Self {
        sv.sort_by(|a, b| b.total_cmp(a));
        let smax = sv.first().copied().unwrap_or(0.0);
        let cutoff = rank_epsilon * smax.max(1.0);
        let rank = sv.iter().filter(|s| **s > cutoff).count();
        RankDecision { rank, singular_values: sv, cutoff }
    }

    /// Ratio of the smallest kept singular value to the cutoff; large values
    /// mean the decision is well separated.
    pub fn margin(&self) -> f64 {
        match self.rank {
            0 => f64::INFINITY,
            r => self.singular_values[r - 1] / self.cutoff,
        }
    }
}

pub(crate) fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NumericError(format!("non-finite entry in {what}")))
    }
}

fn check_epsilon(rank_epsilon: f64) -> Result<()> {
    if rank_epsilon > 0.0 && rank_epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("rank epsilon {rank_epsilon} outside (0, 1)")))
    }
}

/// Orthonormal basis of the column space of `columns`.
pub fn orthonormalize(
    columns: &OperatorMatrix,
    rank_epsilon: f64,
) -> Result<(OperatorMatrix, RankDecision)> {
    let (q, rd) = orthonormal_columns(columns.as_matrix(), rank_epsilon)?;
    let out = match columns.dst_grid() {
        Some(g) => OperatorMatrix { mat: q, src: None, dst: Some(g.clone()) },
        None => OperatorMatrix::new(q),
    };
    Ok((out, rd))
}

/// Matrix-level form of [`orthonormalize`].
pub fn orthonormal_columns(a: &CMatrix, rank_epsilon: f64) -> Result<(CMatrix, RankDecision)> {
    check_epsilon(rank_epsilon)?;
    check_finite(a, "orthonormalize input")?;
    if a.ncols() == 0 || a.nrows() == 0 {
        return Ok((
            CMatrix::zeros(a.nrows(), 0),
            RankDecision::from_singular_values(vec![], rank_epsilon),
        ));
    }
    let (u, sv, _) = thin_svd(a)?;
    let rd = RankDecision::from_singular_values(sv, rank_epsilon);
    let q = u.columns(0, rd.rank).into_owned();
    Ok((q, rd))
}

/// Orthonormal basis of the right null space `{x : A x = 0}`.
pub fn null_space(a: &CMatrix, rank_epsilon: f64) -> Result<(CMatrix, RankDecision)> {
    check_epsilon(rank_epsilon)?;
    check_finite(a, "null space input")?;
    let n = a.ncols();
    if n == 0 {
        return Ok((CMatrix::zeros(0, 0), RankDecision::from_singular_values(vec![], rank_epsilon)));
    }
    if a.nrows() == 0 {
        return Ok((
            CMatrix::identity(n, n),
            RankDecision::from_singular_values(vec![0.0; n], rank_epsilon),
        ));
    }
    // reduce to an n×n factor with the same null space
    let square = if a.nrows() > n {
        qr_r(a)
    } else if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let (_, sv, v) = thin_svd(&square)?;
    let rd = RankDecision::from_singular_values(sv, rank_epsilon);
    let kernel = v.columns(rd.rank, n - rd.rank).into_owned();
    Ok((kernel, rd))
}

fn fview(a: &CMatrix) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols())
}

fn from_faer(m: MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn faer_par() -> Par {
    #[cfg(feature = "parallel")]
    if rayon::current_num_threads() > 1 {
        return Par::rayon(0);
    }
    Par::Seq
}

/// Upper triangular `R` (`min(m, n)` rows) of a thin QR factorization.
pub fn qr_r(a: &CMatrix) -> CMatrix {
    if a.nrows() == 0 || a.ncols() == 0 {
        return CMatrix::zeros(a.nrows().min(a.ncols()), a.ncols());
    }
    let qr = fview(a).qr();
    from_faer(qr.thin_R())
}

/// `Q` of a thin QR factorization: orthonormal columns spanning those of a
/// full-column-rank `a`, with no rank decision.
pub fn thin_q(a: &CMatrix) -> CMatrix {
    if a.nrows() == 0 || a.ncols() == 0 {
        return CMatrix::zeros(a.nrows(), a.nrows().min(a.ncols()));
    }
    from_faer(fview(a).qr().compute_thin_Q().as_ref())
}

/// Thin SVD `A = U diag(s) V*` with `s` nonincreasing. Tall inputs are
/// reduced by a QR step first.
pub fn thin_svd(a: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        let k = m.min(n);
        return Ok((CMatrix::zeros(m, k), vec![], CMatrix::zeros(n, k)));
    }
    let svd_err = |e| Error::NumericError(format!("SVD did not converge: {e:?}"));
    if m > 2 * n {
        let qr = fview(a).qr();
        let svd = qr.thin_R().thin_svd().map_err(svd_err)?;
        let q = qr.compute_thin_Q();
        let u = &q * svd.U();
        let s = svd.S().column_vector().iter().map(|x| x.re).collect();
        return Ok((from_faer(u.as_ref()), s, from_faer(svd.V())));
    }
    let svd = fview(a).thin_svd().map_err(svd_err)?;
    let s = svd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((from_faer(svd.U()), s, from_faer(svd.V())))
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return vec![];
    }
    let sv = if a.nrows() > 2 * a.ncols() {
        fview(&qr_r(a)).singular_values()
    } else if a.ncols() > 2 * a.nrows() {
        fview(&qr_r(&a.adjoint())).singular_values()
    } else {
        fview(a).singular_values()
    };
    let mut sv = sv.unwrap_or_else(|_| a.clone().svd(false, false).singular_values.iter().copied().collect());
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Largest singular value, from the Gram matrix of the shorter side.
pub fn op_norm(a: &CMatrix) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    let g = if m > n { adjoint_matmul(a, a) } else { matmul(a, &a.adjoint()) };
    let g = hermitian_part(&g);
    match fview(&g).self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev.iter().copied().fold(0.0f64, f64::max).sqrt(),
        Err(_) => singular_values(a).first().copied().unwrap_or(0.0),
    }
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// `‖A − A*‖`, the distance from Hermitian symmetry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    op_norm(&(a - a.adjoint()))
}

/// Positive square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero; anything more negative
/// is rejected.
pub fn hermitian_sqrt(a: &OperatorMatrix) -> Result<OperatorMatrix> {
    let m = a.as_matrix();
    if m.nrows() != m.ncols() {
        return Err(Error::DomainError("square root of a non-square matrix".into()));
    }
    check_finite(m, "square root input")?;
    let scale = op_norm(m).max(1.0);
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::DomainError(format!("input is not Hermitian (defect {defect:.3e})")));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &l in eig.eigenvalues.iter() {
        if l < -NEGATIVE_CLAMP * scale {
            return Err(Error::DomainError(format!("indefinite input (eigenvalue {l:.3e})")));
        }
        vals.push(C64::new(l.max(0.0).sqrt(), 0.0));
    }
    let v = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&CVector::from_vec(vals));
    let root = hermitian_part(&(v * d * v.adjoint()));
    Ok(OperatorMatrix { mat: root, src: a.src.clone(), dst: a.dst.clone() })
}

/// `(‖AB − BA‖, ‖A*B − BA*‖)`.
pub fn commutator_norms(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<(f64, f64)> {
    commutator_norms_mat(a.as_matrix(), b.as_matrix())
}

pub fn commutator_norms_mat(a: &CMatrix, b: &CMatrix) -> Result<(f64, f64)> {
    if a.nrows() != a.ncols() || b.shape() != a.shape() {
        return Err(Error::GridMismatch(format!(
            "commutator of {:?} and {:?} matrices",
            a.shape(),
            b.shape()
        )));
    }
    let ab = matmul(a, b);
    let ba = matmul(b, a);
    let a_star_b = adjoint_matmul(a, b);
    let b_a_star = matmul(b, &a.adjoint());
    Ok((op_norm(&(ab - ba)), op_norm(&(a_star_b - b_a_star))))
}

/// `‖Q*Q − I‖` for a matrix meant to have orthonormal columns.
pub fn gram_defect(q: &CMatrix) -> f64 {
    let n = q.ncols();
    if n == 0 {
        return 0.0;
    }
    op_norm(&(adjoint_matmul(q, q) - CMatrix::identity(n, n)))
}

/// `‖(I − Q Q*) A‖` for orthonormal `Q`.
pub fn residual_outside(q: &CMatrix, a: &CMatrix) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    if q.ncols() == 0 {
        return op_norm(a);
    }
    let coeffs = adjoint_matmul(q, a);
    op_norm(&(a - matmul(q, &coeffs)))
}

/// Symmetric subspace distance `max(‖(I−P_B)A‖, ‖(I−P_A)B‖)` between the
/// spans of two orthonormal bases.
pub fn projector_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    residual_outside(b, a).max(residual_outside(a, b))
}

/// Eigenvalues of a square complex matrix via the complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DomainError("eigenvalues of a non-square matrix".into()));
    }
    check_finite(a, "eigenvalue input")?;
    match a.nrows() {
        0 => Ok(vec![]),
        1 => Ok(vec![a[(0, 0)]]),
        _ => {
            let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
                .ok_or_else(|| Error::NumericError("Schur iteration did not converge".into()))?;
            let (_, t) = schur.unpack();
            Ok(t.diagonal().iter().copied().collect())
        }
    }
}

/// Spectral radius.
pub fn spectral_radius(a: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn faer_product<L: Conjugate<Canonical = C64>>(a: MatRef<'_, L>, b: MatRef<'_, C64>, par: Par) -> CMatrix {
    let mut out = Mat::<C64>::zeros(a.nrows(), b.ncols());
    linalg::matmul::matmul(out.as_mut(), Accum::Replace, a, b, C64::new(1.0, 0.0), par);
    from_faer(out.as_ref())
}

/// Sequential `A · B`.
pub fn matmul_seq(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a), fview(b), Par::Seq)
}

/// Sequential `A* · B`.
pub fn adjoint_matmul_seq(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a).adjoint(), fview(b), Par::Seq)
}

/// `A · B` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn matmul_par(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a), fview(b), Par::rayon(0))
}

/// `A* · B` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn adjoint_matmul_par(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a).adjoint(), fview(b), Par::rayon(0))
}

/// `A · B`, parallel when the pool has more than one thread.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a), fview(b), faer_par())
}

/// `A* · B`, parallel when the pool has more than one thread.
pub fn adjoint_matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    faer_product(fview(a).adjoint(), fview(b), faer_par())
}

/// Kronecker product with the first factor's index varying slowest.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicate_columns_collapse() {
        let a = CMatrix::from_column_slice(3, 2, &[c(1.0), c(0.0), c(0.0), c(1.0), c(0.0), c(0.0)]);
        let (q, rd) = orthonormal_columns(&a, 1e-8).unwrap();
        assert_eq!(rd.rank, 1);
        assert_eq!(q.ncols(), 1);
        assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_empty_basis() {
        let a = CMatrix::zeros(4, 3);
        let (q, rd) = orthonormal_columns(&a, 1e-8).unwrap();
        assert_eq!(rd.rank, 0);
        assert_eq!(q.ncols(), 0);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(orthonormal_columns(&a, 1e-8), Err(Error::NumericError(_))));
    }

    #[test]
    fn sqrt_examples() {
        let i = OperatorMatrix::identity(3);
        let r = hermitian_sqrt(&i).unwrap();
        assert!((r.as_matrix() - CMatrix::identity(3, 3)).norm() < 1e-14);

        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(4.0), c(9.0)]));
        let r = hermitian_sqrt(&OperatorMatrix::new(d)).unwrap();
        assert!((r.as_matrix()[(0, 0)] - c(2.0)).norm() < 1e-14);
        assert!((r.as_matrix()[(1, 1)] - c(3.0)).norm() < 1e-14);
        assert!(r.as_matrix()[(0, 1)].norm() < 1e-14);

        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(-1e-3)]));
        assert!(matches!(hermitian_sqrt(&OperatorMatrix::new(bad)), Err(Error::DomainError(_))));
        let tiny = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(-1e-12)]));
        let r = hermitian_sqrt(&OperatorMatrix::new(tiny)).unwrap();
        assert_eq!(r.as_matrix()[(1, 1)], c(0.0));

        let mut nh = CMatrix::identity(2, 2);
        nh[(0, 1)] = c(0.5);
        assert!(matches!(hermitian_sqrt(&OperatorMatrix::new(nh)), Err(Error::DomainError(_))));
    }

    #[test]
    fn commutator_examples() {
        let d1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]));
        let d2 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-1.0), c(5.0), C64::new(0.0, 1.0)]));
        let (x, y) = commutator_norms_mat(&d1, &d2).unwrap();
        assert!(x < 1e-14 && y < 1e-14);

        // 4×4 truncated shift: A*A − AA* = diag(1,0,0,-1)
        let mut s = CMatrix::zeros(4, 4);
        for i in 0..3 {
            s[(i + 1, i)] = c(1.0);
        }
        let (x, y) = commutator_norms_mat(&s, &s).unwrap();
        assert_eq!(x, 0.0);
        assert!((y - 1.0).abs() < 1e-14);

        let big = CMatrix::identity(5, 5);
        assert!(matches!(commutator_norms_mat(&s, &big), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = CMatrix::from_row_slice(1, 3, &[c(1.0), c(1.0), c(0.0)]);
        let (k, rd) = null_space(&a, 1e-8).unwrap();
        assert_eq!(rd.rank, 1);
        assert_eq!(k.ncols(), 2);
        assert!(op_norm(&(&a * &k)) < 1e-14);
        assert!(gram_defect(&k) < 1e-14);
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = c(0.5);
        a[(1, 1)] = C64::new(0.0, 0.3);
        a[(2, 2)] = c(-0.2);
        a[(0, 2)] = c(1.0);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert!((ev[0] - c(-0.2)).norm() < 1e-12);
        assert!((ev[1] - C64::new(0.0, 0.3)).norm() < 1e-12);
        assert!((ev[2] - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn thin_norm_matches_svd() {
        let a = CMatrix::from_fn(40, 3, |i, j| C64::new((i * j) as f64 * 0.01, (i + j) as f64 * 0.02));
        let via_svd = singular_values(&a)[0];
        assert!((op_norm(&a) - via_svd).abs() < 1e-12 * via_svd);
    }
}
