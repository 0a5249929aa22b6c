//! Alignment of wide matrices (`n < m`) in an `n`-dimensional space.
//!
//! Each subject is projected on the basis `Q_i` of its own row space
//! (thin SVD, `X_i = L_i S_i Q_iᵀ`), the `n × n` matrices `X_i Q_i` are
//! aligned with the usual loop using the reduced prior `Q_iᵀ F Q_i`, and the
//! result is mapped back with `Q_iᵀ`. Nothing of size `m × m` is formed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::aligner::{
    center_all, run_loop, validate_subjects, AlignmentConfig, AlignmentResult, PriorTerms,
};
use crate::error::{dim_err, Result};
use crate::linalg::{thin_svd, ThinFactor};

/// Subjects expressed in their own row-space bases.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// `X_i Q_i`, each `n × n`.
    pub reduced: Vec<DMatrix<f64>>,
    pub bases: Vec<ThinFactor>,
}

impl ReducedProblem {
    pub fn any_rank_deficient(&self) -> bool {
        self.bases.iter().any(|b| b.rank_deficient)
    }
}

/// Thin-SVD projection of every subject.
pub fn project_subjects(xs: &[DMatrix<f64>]) -> Result<ReducedProblem> {
    for (i, x) in xs.iter().enumerate() {
        if x.nrows() >= x.ncols() {
            return Err(dim_err(format!(
                "subject {i} is {}x{}; the reduced path needs rows < cols, use the full aligner",
                x.nrows(),
                x.ncols()
            )));
        }
    }
    let bases: Vec<ThinFactor> = xs.par_iter().map(thin_svd).collect::<Result<_>>()?;
    let reduced = bases.iter().map(ThinFactor::projected).collect();
    Ok(ReducedProblem { reduced, bases })
}

/// The `m`-space transform `Q R* Qᵀ` implied by a reduced rotation, kept in
/// factored form.
#[derive(Debug, Clone)]
pub struct SubspaceTransform {
    /// `m × n` basis.
    pub basis: DMatrix<f64>,
    /// `n × n` orthogonal matrix.
    pub rotation: DMatrix<f64>,
}

impl SubspaceTransform {
    /// `X Q R* Qᵀ` computed right to left in `O(m n²)`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        (x * &self.basis * &self.rotation) * self.basis.transpose()
    }

    /// Materializes the `m × m` matrix. Only for small `m`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.basis * &self.rotation * self.basis.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct EfficientAlignment {
    /// The loop outcome in the reduced space: `n × n` rotations, `n × n` reference.
    pub reduced: AlignmentResult,
    pub transforms: Vec<SubspaceTransform>,
    /// Back-projected `α̂_i⁻¹ X_i Q_i R*_i Q_iᵀ`, each `n × m`.
    pub aligned: Vec<DMatrix<f64>>,
    pub translations: Vec<DVector<f64>>,
    /// Per subject: the thin SVD had a zero singular value.
    pub rank_deficient: Vec<bool>,
}

impl EfficientAlignment {
    pub fn reduced_rotations(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.transforms.iter().map(|t| &t.rotation)
    }

    /// Element-wise mean of the back-projected matrices (`n × m`).
    pub fn group_mean(&self) -> DMatrix<f64> {
        crate::linalg::mean_matrix(&self.aligned)
    }
}

/// Reduced-space alignment of wide subjects. `Σm` is taken as the identity;
/// `config.covariance_mode` applies to the `n × n` problem.
pub fn align_efficient(xs: &[DMatrix<f64>], config: &AlignmentConfig) -> Result<EfficientAlignment> {
    config.validate()?;
    let (_, m) = validate_subjects(xs)?;
    let (centered, translations) = center_all(xs)?;
    let problem = project_subjects(&centered)?;

    let priors = if config.prior.is_active() {
        config.prior.validate(m)?;
        let locations = problem
            .bases
            .par_iter()
            .map(|b| config.prior.location.reduced(&b.q, &b.q))
            .collect::<Result<Vec<_>>>()?;
        PriorTerms::PerSubject(locations, config.prior.k)
    } else {
        PriorTerms::None
    };

    let reduced = run_loop(&problem.reduced, &priors, config)?;
    let rank_deficient = problem.bases.iter().map(|b| b.rank_deficient).collect();
    let transforms: Vec<SubspaceTransform> = problem
        .bases
        .into_iter()
        .zip(&reduced.rotations)
        .map(|(b, r)| SubspaceTransform {
            basis: b.q,
            rotation: r.clone(),
        })
        .collect();
    let aligned = reduced
        .aligned
        .par_iter()
        .zip(transforms.par_iter())
        .map(|(a, t)| a * t.basis.transpose())
        .collect();
    Ok(EfficientAlignment {
        reduced,
        transforms,
        aligned,
        translations,
        rank_deficient,
    })
}
