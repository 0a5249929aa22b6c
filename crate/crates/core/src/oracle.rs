//! Brute-force references used to check the closed-form estimators.

use nalgebra::DMatrix;

use crate::aligner::{CovariancePair, Whitening};
use crate::error::{dim_err, Error, Result};
use crate::linalg::frobenius_inner;
use crate::prior::{build_prior_location, PriorSpec};

/// Best element of the scanned grid over O(2).
#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub rotation: DMatrix<f64>,
    pub trace: f64,
    pub theta: f64,
    /// The maximizer has determinant −1.
    pub reflection: bool,
}

fn planar(theta: f64, reflection: bool) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    if reflection {
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    } else {
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }
}

/// Exhaustive scan of `tr(Aᵀ R)` over rotations `θ ∈ [0, 2π)` and the
/// matching reflections.
pub fn oracle_best_rotation_2d(a: &DMatrix<f64>, grid_step: f64) -> Result<GridOptimum> {
    if a.shape() != (2, 2) {
        return Err(dim_err(format!("expected a 2x2 matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if !(grid_step > 0.0 && grid_step <= 1e-3) {
        return Err(Error::InvalidInput(format!(
            "grid step must be in (0, 1e-3], got {grid_step}"
        )));
    }
    let steps = (std::f64::consts::TAU / grid_step).ceil() as usize;
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let mut best = (f64::NEG_INFINITY, 0.0, false);
    for i in 0..steps {
        let theta = i as f64 * grid_step;
        let (s, c) = theta.sin_cos();
        // tr(AᵀR) = Σ a_ij r_ij
        let rot = a11 * c - a12 * s + a21 * s + a22 * c;
        let refl = a11 * c + a12 * s + a21 * s - a22 * c;
        if rot > best.0 {
            best = (rot, theta, false);
        }
        if refl > best.0 {
            best = (refl, theta, true);
        }
    }
    Ok(GridOptimum {
        rotation: planar(best.1, best.2),
        trace: best.0,
        theta: best.1,
        reflection: best.2,
    })
}

/// Joint log-posterior kernel with constants dropped:
/// `−½ Σ tr{Σm⁻¹ (α⁻¹XR − M)ᵀ Σn⁻¹ (α⁻¹XR − M)} + k Σ tr(Fᵀ R)`.
pub fn joint_objective(
    xs: &[DMatrix<f64>],
    rotations: &[DMatrix<f64>],
    scales: &[f64],
    reference: &DMatrix<f64>,
    cov: &CovariancePair,
    prior: &PriorSpec,
) -> Result<f64> {
    if xs.len() != rotations.len() || xs.len() != scales.len() {
        return Err(dim_err(format!(
            "{} subjects, {} rotations, {} scales",
            xs.len(),
            rotations.len(),
            scales.len()
        )));
    }
    let (n, m) = reference.shape();
    if cov.sigma_n.shape() != (n, n) || cov.sigma_m.shape() != (m, m) {
        return Err(dim_err("covariances do not match the reference"));
    }
    let whitening = Whitening::from_pair(cov)?;
    let location = if prior.is_active() {
        Some(build_prior_location(prior, m)?.0)
    } else {
        None
    };
    let mut total = 0.0;
    for ((x, r), alpha) in xs.iter().zip(rotations).zip(scales) {
        if x.shape() != (n, m) || r.shape() != (m, m) {
            return Err(dim_err("subject or rotation does not match the reference"));
        }
        let residual = x * r / *alpha - reference;
        total -= 0.5 * whitening.mahalanobis_sq(&residual);
        if let Some(f) = &location {
            total += prior.k * frobenius_inner(f, r);
        }
    }
    Ok(total)
}
