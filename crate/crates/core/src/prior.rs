//! von Mises-Fisher prior on O(m): location matrix builders, the
//! unnormalized log-density and the conjugate posterior location.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{ensure_finite, frobenius_inner, polar_orthogonal_factor, svd_full, RANK_RTOL};

/// Where the prior location matrix `F` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorLocation {
    /// `F = I_m`.
    Identity,
    /// `F[i][j] = exp(-‖c_i − c_j‖₂)` from an `m × 3` coordinate table.
    EuclideanKernel(DMatrix<f64>),
    /// A user supplied dense `m × m` matrix.
    Custom(DMatrix<f64>),
}

/// Concentration `k ≥ 0` and location of the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub k: f64,
    pub location: PriorLocation,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::flat()
    }
}

impl PriorSpec {
    pub fn new(k: f64, location: PriorLocation) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::InvalidInput(format!(
                "concentration k must be finite and non-negative, got {k}"
            )));
        }
        Ok(Self { k, location })
    }

    /// `k = 0`: no regularization, the estimators reduce to maximum likelihood.
    pub fn flat() -> Self {
        Self {
            k: 0.0,
            location: PriorLocation::Identity,
        }
    }

    pub fn identity(k: f64) -> Result<Self> {
        Self::new(k, PriorLocation::Identity)
    }

    pub fn is_active(&self) -> bool {
        self.k > 0.0
    }

    /// Short textual form used in run manifests.
    pub fn describe(&self) -> String {
        let kind = match &self.location {
            PriorLocation::Identity => "identity".to_string(),
            PriorLocation::EuclideanKernel(c) => format!("euclidean({} coordinates)", c.nrows()),
            PriorLocation::Custom(f) => format!("custom({}x{})", f.nrows(), f.ncols()),
        };
        format!("k={} location={kind}", self.k)
    }

    /// Checks that the location is consistent with `m` columns.
    pub fn validate(&self, m: usize) -> Result<()> {
        match &self.location {
            PriorLocation::Identity => Ok(()),
            PriorLocation::EuclideanKernel(coords) => {
                if coords.nrows() != m || coords.ncols() != 3 {
                    return Err(dim_err(format!(
                        "coordinates must be {m}x3, got {}x{}",
                        coords.nrows(),
                        coords.ncols()
                    )));
                }
                ensure_finite(coords, "coordinates")
            }
            PriorLocation::Custom(f) => {
                if f.shape() != (m, m) {
                    return Err(dim_err(format!(
                        "prior location must be {m}x{m}, got {}x{}",
                        f.nrows(),
                        f.ncols()
                    )));
                }
                ensure_finite(f, "prior location")
            }
        }
    }
}

/// Spectral summary of a location matrix.
#[derive(Debug, Clone)]
pub struct PriorDiagnostics {
    pub smallest_singular_value: f64,
    pub full_rank: bool,
    /// Orthogonal polar factor of `F`, the mode of the distribution.
    pub mode: DMatrix<f64>,
}

impl PriorDiagnostics {
    pub fn of(f: &DMatrix<f64>) -> Result<Self> {
        let svd = svd_full(f)?;
        let largest = svd.singular_values[0];
        let smallest = svd.singular_values[svd.singular_values.len() - 1];
        let mode = polar_orthogonal_factor(f)?.orthogonal;
        Ok(Self {
            smallest_singular_value: smallest,
            full_rank: smallest > RANK_RTOL * largest,
            mode,
        })
    }
}

fn kernel_entry(coords: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let d = (coords.row(i) - coords.row(j)).norm();
    (-d).exp()
}

/// Euclidean similarity kernel `exp(-‖c_i − c_j‖₂)`.
pub fn euclidean_kernel(coords: &DMatrix<f64>) -> DMatrix<f64> {
    let m = coords.nrows();
    let mut f = DMatrix::identity(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = kernel_entry(coords, i, j);
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    f
}

/// Materializes `F` (an `m × m` matrix) and its diagnostics.
pub fn build_prior_location(spec: &PriorSpec, m: usize) -> Result<(DMatrix<f64>, PriorDiagnostics)> {
    if m == 0 {
        return Err(Error::InvalidInput("prior dimension must be at least 1".into()));
    }
    spec.validate(m)?;
    let f = match &spec.location {
        PriorLocation::Identity => DMatrix::identity(m, m),
        PriorLocation::EuclideanKernel(coords) => euclidean_kernel(coords),
        PriorLocation::Custom(f) => f.clone(),
    };
    let diag = PriorDiagnostics::of(&f)?;
    Ok((f, diag))
}

impl PriorLocation {
    /// `Qiᵀ F Qj` without forming `F` when it is implicit.
    ///
    /// The identity reduces to a Gram matrix of the bases and the Euclidean
    /// kernel is generated one row at a time, so memory stays `O(m n)`.
    pub fn reduced(&self, qi: &DMatrix<f64>, qj: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if qi.nrows() != qj.nrows() {
            return Err(dim_err(format!(
                "bases have {} and {} rows",
                qi.nrows(),
                qj.nrows()
            )));
        }
        match self {
            PriorLocation::Identity => Ok(qi.tr_mul(qj)),
            PriorLocation::Custom(f) => reduce_prior(f, qi, qj),
            PriorLocation::EuclideanKernel(coords) => {
                let m = qi.nrows();
                if coords.nrows() != m {
                    return Err(dim_err(format!(
                        "coordinates have {} rows, bases have {m}",
                        coords.nrows()
                    )));
                }
                let mut out = DMatrix::zeros(qi.ncols(), qj.ncols());
                let mut row = RowDVector::zeros(m);
                for r in 0..m {
                    for c in 0..m {
                        row[c] = if r == c { 1.0 } else { kernel_entry(coords, r, c) };
                    }
                    let f_qj = &row * qj; // 1 × n
                    out += qi.row(r).transpose() * f_qj;
                }
                Ok(out)
            }
        }
    }
}

/// Reduced prior location `Qiᵀ F Qj`.
pub fn reduce_prior(f: &DMatrix<f64>, qi: &DMatrix<f64>, qj: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !f.is_square() || f.nrows() != qi.nrows() || f.ncols() != qj.nrows() {
        return Err(dim_err(format!(
            "cannot form Qiᵀ F Qj with F {}x{}, Qi {}x{}, Qj {}x{}",
            f.nrows(),
            f.ncols(),
            qi.nrows(),
            qi.ncols(),
            qj.nrows(),
            qj.ncols()
        )));
    }
    Ok(qi.tr_mul(&(f * qj)))
}

/// Unnormalized log-density `k tr(Fᵀ R)`.
pub fn vmf_log_kernel(r: &DMatrix<f64>, f: &DMatrix<f64>, k: f64) -> Result<f64> {
    if r.shape() != f.shape() || !r.is_square() {
        return Err(dim_err(format!(
            "R is {}x{} and F is {}x{}",
            r.nrows(),
            r.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    Ok(k * frobenius_inner(f, r))
}

/// Posterior location `crossprod + k F`.
pub fn posterior_location(crossprod: &DMatrix<f64>, k: f64, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if crossprod.shape() != f.shape() || !f.is_square() {
        return Err(dim_err(format!(
            "cross-product is {}x{} and F is {}x{}",
            crossprod.nrows(),
            crossprod.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    Ok(crossprod + f * k)
}
