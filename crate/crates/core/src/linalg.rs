//! Dense matrix kernels shared by every estimator: SVD with a canonical sign
//! convention, thin SVD for wide matrices, the orthogonal polar factor,
//! column centering and a few Frobenius helpers.
//!
//! Decompositions are delegated to `nalgebra`; this module owns ordering,
//! sign canonicalization, rank flags and validation.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR, SVD};

use crate::error::{dim_err, Error, Result};

/// A singular value is treated as zero when it is below this fraction of the
/// largest singular value.
pub const RANK_RTOL: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;

/// Full singular value decomposition `A = U diag(D) Vᵀ`.
///
/// For a non-square input the factors are economy sized: `U` is `rows × r`
/// and `V` is `cols × r` with `r = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Some singular value falls below `RANK_RTOL` times the largest one.
    pub rank_deficient: bool,
}

impl Svd {
    /// Number of singular values above the rank threshold.
    pub fn rank(&self) -> usize {
        let cutoff = rank_cutoff(&self.singular_values);
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Thin factorization `X = L diag(S) Qᵀ` of an `n × m` matrix with `n < m`.
#[derive(Debug, Clone)]
pub struct ThinFactor {
    /// `n × n` left factor.
    pub l: DMatrix<f64>,
    /// `n` singular values, descending.
    pub s: DVector<f64>,
    /// `m × n` semi-orthogonal basis of the row space.
    pub q: DMatrix<f64>,
    pub rank_deficient: bool,
}

impl ThinFactor {
    /// `X Q = L diag(S)`, the `n × n` projected matrix.
    pub fn projected(&self) -> DMatrix<f64> {
        let mut ls = self.l.clone();
        for (j, s) in self.s.iter().enumerate() {
            ls.column_mut(j).scale_mut(*s);
        }
        ls
    }
}

/// Orthogonal polar factor of a square matrix together with the singular
/// values of that matrix.
#[derive(Debug, Clone)]
pub struct PolarFactor {
    pub orthogonal: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `false` when the input is rank deficient and the maximizer of
    /// `tr(Aᵀ R)` over O(m) is not unique.
    pub unique: bool,
}

pub(crate) fn rank_cutoff(singular_values: &DVector<f64>) -> f64 {
    let largest = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    RANK_RTOL * largest
}

fn is_rank_deficient(singular_values: &DVector<f64>) -> bool {
    let cutoff = rank_cutoff(singular_values);
    singular_values.iter().any(|&s| s <= cutoff)
}

pub fn ensure_finite(a: &DMatrix<f64>, name: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{name} is empty")));
    }
    if let Some(pos) = a.iter().position(|v| !v.is_finite()) {
        // nalgebra storage is column-major
        let (r, c) = (pos % a.nrows(), pos / a.nrows());
        return Err(Error::InvalidInput(format!(
            "{name} has a non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}

/// Singular value decomposition with descending singular values and the
/// canonical sign convention: the largest-magnitude entry of every left
/// singular vector is positive.
pub fn svd_full(a: &DMatrix<f64>) -> Result<Svd> {
    ensure_finite(a, "matrix")?;
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER).ok_or_else(|| {
        Error::Numeric(format!(
            "SVD of a {}x{} matrix did not converge within {SVD_MAX_ITER} iterations (‖A‖_F = {:e})",
            a.nrows(),
            a.ncols(),
            a.norm()
        ))
    })?;
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numeric("SVD did not return singular vectors".into()));
    };
    let mut u = u;
    let mut v = v_t.transpose();
    let mut values = svd.singular_values;

    // nalgebra sorts in `try_new`, but the 2x2/3x3 special paths are trusted
    // only as far as this explicit reorder.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    if order.iter().enumerate().any(|(i, &j)| i != j) {
        u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
        v = DMatrix::from_fn(v.nrows(), order.len(), |r, c| v[(r, order[c])]);
        values = DVector::from_fn(order.len(), |i, _| values[order[i]]);
    }

    for j in 0..values.len() {
        let col = u.column(j);
        let mut pivot = 0;
        for r in 1..col.len() {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }

    let rank_deficient = is_rank_deficient(&values);
    Ok(Svd {
        u,
        singular_values: values,
        v,
        rank_deficient,
    })
}

/// Thin SVD of a wide matrix (`rows < cols`).
///
/// Computed as a Householder QR of `Xᵀ` followed by an `n × n` SVD of the
/// triangular factor, so the cost is `O(m n²)` and no `m × m` matrix is formed.
pub fn thin_svd(x: &DMatrix<f64>) -> Result<ThinFactor> {
    let (n, m) = x.shape();
    if n >= m {
        return Err(dim_err(format!(
            "thin SVD needs rows < cols, got {n}x{m}; use svd_full for tall or square input"
        )));
    }
    ensure_finite(x, "matrix")?;
    let qr = QR::new(x.transpose());
    let basis = qr.q(); // m × n
    let r = qr.r(); // n × n
    // X = Rᵀ Bᵀ with B = basis
    let inner = svd_full(&r.transpose())?;
    let q = basis * &inner.v;
    Ok(ThinFactor {
        l: inner.u,
        s: inner.singular_values,
        q,
        rank_deficient: inner.rank_deficient,
    })
}

/// Orthogonal factor `U Vᵀ` of the polar decomposition of a square matrix,
/// the maximizer of `tr(Aᵀ R)` over O(m).
///
/// When `A` is rank deficient the maximizer is not unique. The null-space
/// block is then completed with the orthogonal map between the two null
/// spaces that is closest to the identity, so symmetric positive
/// semi-definite inputs map to `I` and the result does not depend on the
/// basis the decomposition happened to pick for the null spaces.
pub fn polar_orthogonal_factor(a: &DMatrix<f64>) -> Result<PolarFactor> {
    if !a.is_square() {
        return Err(dim_err(format!(
            "polar factor needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = svd_full(a)?;
    let rank = svd.rank();
    let dim = a.nrows();
    let orthogonal = if rank == dim {
        &svd.u * svd.v.transpose()
    } else {
        let u_r = svd.u.columns(0, rank);
        let v_r = svd.v.columns(0, rank);
        let u_0 = svd.u.columns(rank, dim - rank);
        let v_0 = svd.v.columns(rank, dim - rank);
        let link = svd_full(&(u_0.transpose() * v_0))?;
        let w = &link.u * link.v.transpose();
        u_r * v_r.transpose() + u_0 * w * v_0.transpose()
    };
    Ok(PolarFactor {
        orthogonal,
        singular_values: svd.singular_values,
        unique: rank == dim,
    })
}

/// Subtracts each column's mean: `(I − J/n) X`.
pub fn column_center(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(column_center_with_means(x)?.0)
}

/// Centered matrix together with the removed column means.
pub fn column_center_with_means(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if x.nrows() < 2 {
        return Err(Error::DegenerateCentering);
    }
    ensure_finite(x, "matrix")?;
    let n = x.nrows() as f64;
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut centered = x.clone();
    for (mut col, mean) in centered.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mean);
    }
    Ok((centered, means))
}

/// Frobenius inner product `<A, B> = tr(Aᵀ B)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `‖RᵀR − I‖_F`.
pub fn orthogonality_defect(r: &DMatrix<f64>) -> f64 {
    let gram = r.tr_mul(r);
    (gram - DMatrix::identity(r.ncols(), r.ncols())).norm()
}

/// Element-wise mean with a fixed left-to-right summation order.
pub fn mean_matrix(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
    for m in mats {
        acc += m;
    }
    acc / mats.len() as f64
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending order.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_fn(order.len(), |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}
