//! Joint estimation of per-subject orthogonal transforms, isotropic scales,
//! the shared reference matrix and (optionally) the row/column covariances.
//!
//! The outer loop is generalized Procrustes analysis: each subject is
//! rotated onto the current reference with the closed-form MAP estimator
//! (the polar factor of `Xᵀ Σn⁻¹ M Σm⁻¹ + k F`), the reference is re-estimated
//! as the element-wise mean of the aligned matrices, and covariances are
//! refreshed with the two-stage fixed-point iteration when requested.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    column_center_with_means, ensure_finite, mean_matrix, polar_orthogonal_factor,
    symmetric_eigen,
};
use crate::prior::{build_prior_location, PriorSpec};

/// Relative eigenvalue floor below which a covariance factor counts as singular.
const COVARIANCE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    /// `Σn = I`, `Σm = I` throughout.
    #[default]
    Identity,
    /// Two-stage maximum likelihood estimate of both factors.
    Dutilleul,
}

impl std::str::FromStr for CovarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "dutilleul" => Ok(Self::Dutilleul),
            other => Err(Error::InvalidInput(format!(
                "unknown covariance mode `{other}` (expected identity or dutilleul)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentConfig {
    /// Stop once `‖M̂ − M̂_old‖²` falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    /// Estimate per-subject scales; when off every scale is exactly 1.
    pub scaling: bool,
    pub covariance_mode: CovarianceMode,
    /// Thresholds on the squared change of `Σn` and `Σm` in the inner loop.
    pub epsilon1: f64,
    pub epsilon2: f64,
    /// Cap on inner covariance iterations per outer iteration.
    pub max_covariance_iterations: usize,
    pub prior: PriorSpec,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 30,
            scaling: false,
            covariance_mode: CovarianceMode::Identity,
            epsilon1: 1e-8,
            epsilon2: 1e-8,
            max_covariance_iterations: 1000,
            prior: PriorSpec::flat(),
        }
    }
}

impl AlignmentConfig {
    pub fn with_prior(mut self, prior: PriorSpec) -> Self {
        self.prior = prior;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tol) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !positive(self.epsilon1) || !positive(self.epsilon2) {
            return Err(Error::InvalidInput("epsilon1 and epsilon2 must be positive".into()));
        }
        if self.max_covariance_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_covariance_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row (`n × n`) and column (`m × m`) scale matrices of the matrix-normal error.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_n: DMatrix<f64>,
    pub sigma_m: DMatrix<f64>,
}

impl CovariancePair {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            sigma_n: DMatrix::identity(n, n),
            sigma_m: DMatrix::identity(m, m),
        }
    }
}

/// Inverse and inverse square root of one covariance factor.
#[derive(Debug, Clone)]
struct FactorInverse {
    inv: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    /// Directions left out of the inverse (0 or the constant vector).
    dropped: usize,
}

impl FactorInverse {
    /// For `Σn` computed from column-centered data the constant vector is
    /// always in the null space. That direction carries no information, so
    /// the inverse is taken on its orthogonal complement (a pseudo-inverse
    /// with exactly that null direction). Any other deficiency is an error.
    fn new(sigma: &DMatrix<f64>, factor: &'static str, allow_constant_null: bool) -> Result<Self> {
        let dim = sigma.nrows();
        let asym = (sigma - sigma.transpose()).norm();
        if asym > 1e-8 * sigma.norm().max(1.0) {
            return Err(Error::SingularCovariance { factor });
        }
        let (values, vectors) = symmetric_eigen(sigma)?;
        let largest = values[0];
        if !(largest > 0.0) {
            return Err(Error::SingularCovariance { factor });
        }
        let floor = COVARIANCE_RTOL * largest;
        let small: Vec<usize> = (0..dim).filter(|&i| values[i] <= floor).collect();
        if values.iter().any(|&v| v < -floor) {
            return Err(Error::SingularCovariance { factor });
        }
        if !small.is_empty() {
            let constant_null = allow_constant_null && small.len() == 1 && {
                let v = vectors.column(small[0]);
                (v.sum().abs() / (dim as f64).sqrt()) > 1.0 - 1e-8
            };
            if !constant_null {
                return Err(Error::SingularCovariance { factor });
            }
        }
        let mut inv = DMatrix::zeros(dim, dim);
        let mut inv_sqrt = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            if values[i] <= floor {
                continue;
            }
            let v = vectors.column(i);
            let outer = v * v.transpose();
            inv += &outer / values[i];
            inv_sqrt += outer / values[i].sqrt();
        }
        Ok(Self {
            inv,
            inv_sqrt,
            dropped: small.len(),
        })
    }
}

/// Precomputed inverses of a covariance pair. `None` stands for the identity
/// and keeps the identity mode free of any `m × m` work.
#[derive(Debug, Clone, Default)]
pub struct Whitening {
    n: Option<FactorInverse>,
    m: Option<FactorInverse>,
}

impl Whitening {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_pair(cov: &CovariancePair) -> Result<Self> {
        let is_identity = |s: &DMatrix<f64>| *s == DMatrix::identity(s.nrows(), s.ncols());
        let n = if is_identity(&cov.sigma_n) {
            None
        } else {
            Some(FactorInverse::new(&cov.sigma_n, "sigma_n", true)?)
        };
        let m = if is_identity(&cov.sigma_m) {
            None
        } else {
            Some(FactorInverse::new(&cov.sigma_m, "sigma_m", false)?)
        };
        Ok(Self { n, m })
    }

    /// Keeps the column factor only, for use on a subset of rows.
    pub(crate) fn columns_only(&self) -> Self {
        Self {
            n: None,
            m: self.m.clone(),
        }
    }

    /// `Xᵀ Σn⁻¹ M Σm⁻¹`.
    pub fn crossprod(&self, x: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
        let left = match &self.n {
            Some(f) => x.tr_mul(&(&f.inv * reference)),
            None => x.tr_mul(reference),
        };
        match &self.m {
            Some(f) => left * &f.inv,
            None => left,
        }
    }

    /// `‖Σm^{-1/2} Rᵀ Xᵀ Σn^{-1/2}‖²`.
    pub fn whitened_norm_sq(&self, x: &DMatrix<f64>, rotation: &DMatrix<f64>) -> f64 {
        let mut y = x * rotation;
        if let Some(f) = &self.n {
            y = &f.inv_sqrt * y;
        }
        if let Some(f) = &self.m {
            y *= &f.inv_sqrt;
        }
        y.norm_squared()
    }

    /// `tr{Σm⁻¹ Eᵀ Σn⁻¹ E}`.
    pub fn mahalanobis_sq(&self, e: &DMatrix<f64>) -> f64 {
        let left = match &self.n {
            Some(f) => &f.inv * e,
            None => e.clone(),
        };
        let right = match &self.m {
            Some(f) => e * &f.inv,
            None => e.clone(),
        };
        left.iter().zip(right.iter()).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RotationEstimate {
    pub rotation: DMatrix<f64>,
    /// Singular values of the (prior-augmented) cross-product.
    pub singular_values: DVector<f64>,
    /// `false` when the augmented cross-product is rank deficient.
    pub unique: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ScaleEstimate {
    pub alpha: f64,
    /// The closed form relies on `tr(D)² ≫ ‖·‖²`; set when `tr(D)² < 10 ‖·‖²`.
    pub approximation_warning: bool,
}

fn check_pair_shapes(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<()> {
    if x.shape() != reference.shape() {
        return Err(dim_err(format!(
            "subject is {}x{} but reference is {}x{}",
            x.nrows(),
            x.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    Ok(())
}

fn check_cov_shapes(cov: &CovariancePair, n: usize, m: usize) -> Result<()> {
    if cov.sigma_n.shape() != (n, n) || cov.sigma_m.shape() != (m, m) {
        return Err(dim_err(format!(
            "covariances are {:?} and {:?}, expected ({n}, {n}) and ({m}, {m})",
            cov.sigma_n.shape(),
            cov.sigma_m.shape()
        )));
    }
    Ok(())
}

pub(crate) fn rotation_step(
    x: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    whitening: &Whitening,
    prior: Option<(&DMatrix<f64>, f64)>,
) -> Result<RotationEstimate> {
    let mut target = whitening.crossprod(x, reference);
    if let Some((f, k)) = prior {
        if k > 0.0 {
            if f.shape() != target.shape() {
                return Err(dim_err(format!(
                    "prior location is {}x{} but the cross-product is {}x{}",
                    f.nrows(),
                    f.ncols(),
                    target.nrows(),
                    target.ncols()
                )));
            }
            target += f * k;
        }
    }
    let polar = polar_orthogonal_factor(&target)?;
    Ok(RotationEstimate {
        rotation: polar.orthogonal,
        singular_values: polar.singular_values,
        unique: polar.unique,
    })
}

pub(crate) fn scale_step(
    x: &DMatrix<f64>,
    rotation: &DMatrix<f64>,
    whitening: &Whitening,
    singular_values: &DVector<f64>,
) -> Result<ScaleEstimate> {
    let trace: f64 = singular_values.sum();
    if trace <= 1e-300 {
        return Err(Error::DegenerateScale(trace));
    }
    let numerator = whitening.whitened_norm_sq(x, rotation);
    Ok(ScaleEstimate {
        alpha: numerator / trace,
        approximation_warning: trace * trace < 10.0 * numerator,
    })
}

/// MAP rotation of one subject onto `reference` (maximum likelihood when `k = 0`).
pub fn estimate_rotation(
    x: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    cov: &CovariancePair,
    prior: &PriorSpec,
) -> Result<RotationEstimate> {
    check_pair_shapes(x, reference)?;
    check_cov_shapes(cov, x.nrows(), x.ncols())?;
    let whitening = Whitening::from_pair(cov)?;
    if prior.is_active() {
        let (f, _) = build_prior_location(prior, x.ncols())?;
        rotation_step(x, reference, &whitening, Some((&f, prior.k)))
    } else {
        rotation_step(x, reference, &whitening, None)
    }
}

/// Closed-form scale `‖Σm^{-1/2} Rᵀ Xᵀ Σn^{-1/2}‖² / tr(D)`.
pub fn estimate_scale(
    x: &DMatrix<f64>,
    rotation: &DMatrix<f64>,
    cov: &CovariancePair,
    singular_values: &DVector<f64>,
) -> Result<ScaleEstimate> {
    check_cov_shapes(cov, x.nrows(), x.ncols())?;
    if rotation.shape() != (x.ncols(), x.ncols()) {
        return Err(dim_err(format!(
            "rotation is {}x{}, expected {m}x{m}",
            rotation.nrows(),
            rotation.ncols(),
            m = x.ncols()
        )));
    }
    let whitening = Whitening::from_pair(cov)?;
    scale_step(x, rotation, &whitening, singular_values)
}

/// `N ≥ m/n + 1`, compared exactly as `N n ≥ m + n`.
pub fn check_existence(subjects: usize, n: usize, m: usize) -> bool {
    (subjects as u128) * (n as u128) >= (m as u128) + (n as u128)
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub pair: CovariancePair,
    /// Residuals were all zero; `pair` holds zero matrices.
    pub degenerate: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Two-stage estimate of `(Σn, Σm)` from residuals `X_i − M̂`, starting at `Σm = I`.
pub fn estimate_covariances(
    xs: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
    config: &AlignmentConfig,
) -> Result<CovarianceEstimate> {
    let (n, m) = reference.shape();
    for x in xs {
        check_pair_shapes(x, reference)?;
    }
    match config.covariance_mode {
        CovarianceMode::Identity => Ok(CovarianceEstimate {
            pair: CovariancePair::identity(n, m),
            degenerate: false,
            iterations: 0,
            converged: true,
        }),
        CovarianceMode::Dutilleul => {
            if !check_existence(xs.len(), n, m) {
                return Err(existence_error(xs.len(), n, m));
            }
            two_stage(xs, reference, &CovariancePair::identity(n, m), config)
        }
    }
}

fn existence_error(subjects: usize, n: usize, m: usize) -> Error {
    Error::ExistenceCondition {
        subjects,
        rows: n,
        cols: m,
        required: m as f64 / n as f64 + 1.0,
    }
}

pub(crate) fn two_stage(
    xs: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
    start: &CovariancePair,
    config: &AlignmentConfig,
) -> Result<CovarianceEstimate> {
    let (n, m) = reference.shape();
    let count = xs.len() as f64;
    let residuals: Vec<DMatrix<f64>> = xs.iter().map(|x| x - reference).collect();
    let residual_sq: f64 = residuals.iter().map(|e| e.norm_squared()).sum();
    let data_sq: f64 = xs.iter().map(|x| x.norm_squared()).sum();
    if residual_sq <= 1e-24 * data_sq.max(f64::MIN_POSITIVE) {
        return Ok(CovarianceEstimate {
            pair: CovariancePair {
                sigma_n: DMatrix::zeros(n, n),
                sigma_m: DMatrix::zeros(m, m),
            },
            degenerate: true,
            iterations: 0,
            converged: true,
        });
    }

    let mut sigma_n = start.sigma_n.clone();
    let mut sigma_m = start.sigma_m.clone();
    for iteration in 1..=config.max_covariance_iterations {
        let m_inv = FactorInverse::new(&sigma_m, "sigma_m", false)?.inv;
        let mut next_n = DMatrix::zeros(n, n);
        for e in &residuals {
            next_n += e * &m_inv * e.transpose();
        }
        next_n /= count * m as f64;
        symmetrize(&mut next_n);

        // Centered residuals live in n − 1 row dimensions; the divisor
        // follows the rank actually inverted.
        let n_factor = FactorInverse::new(&next_n, "sigma_n", true)?;
        let mut next_m = DMatrix::zeros(m, m);
        for e in &residuals {
            next_m += e.tr_mul(&(&n_factor.inv * e));
        }
        next_m /= count * (n - n_factor.dropped) as f64;
        symmetrize(&mut next_m);

        let change_n = (&next_n - &sigma_n).norm_squared();
        let change_m = (&next_m - &sigma_m).norm_squared();
        sigma_n = next_n;
        sigma_m = next_m;
        if change_n <= config.epsilon1 && change_m <= config.epsilon2 {
            return Ok(CovarianceEstimate {
                pair: CovariancePair { sigma_n, sigma_m },
                degenerate: false,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(CovarianceEstimate {
        pair: CovariancePair { sigma_n, sigma_m },
        degenerate: false,
        iterations: config.max_covariance_iterations,
        converged: false,
    })
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}

/// Outcome of a full-space alignment.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Orthogonal `m × m` transforms `R̂_i`.
    pub rotations: Vec<DMatrix<f64>>,
    /// `α̂_i`, normalized to geometric mean 1 when scaling is on.
    pub scales: Vec<f64>,
    /// Shared reference `M̂` (`n × m`).
    pub reference: DMatrix<f64>,
    pub covariances: CovariancePair,
    /// `X̂_i = α̂_i⁻¹ X_i R̂_i` for the column-centered inputs.
    pub aligned: Vec<DMatrix<f64>>,
    /// Column means removed from each subject on ingestion.
    pub translations: Vec<DVector<f64>>,
    pub iterations_run: usize,
    /// `‖M̂ − M̂_old‖²` after each iteration.
    pub dist_trace: Vec<f64>,
    pub converged: bool,
    /// Per subject: the final augmented cross-product had full rank.
    pub unique: Vec<bool>,
    /// Per subject: smallest singular value of that cross-product.
    pub posterior_min_singular: Vec<f64>,
    /// Wall time of each iteration in seconds.
    pub iteration_seconds: Vec<f64>,
    /// Per subject: the scale closed form was used outside its regime.
    pub scale_warnings: Vec<bool>,
    /// The covariance update hit all-zero residuals and kept the previous pair.
    pub covariance_degenerate: bool,
}

/// Prior location terms handed to the loop.
pub(crate) enum PriorTerms {
    None,
    Shared(DMatrix<f64>, f64),
    PerSubject(Vec<DMatrix<f64>>, f64),
}

impl PriorTerms {
    fn for_subject(&self, i: usize) -> Option<(&DMatrix<f64>, f64)> {
        match self {
            PriorTerms::None => None,
            PriorTerms::Shared(f, k) => Some((f, *k)),
            PriorTerms::PerSubject(fs, k) => Some((&fs[i], *k)),
        }
    }
}

pub(crate) fn validate_subjects(xs: &[DMatrix<f64>]) -> Result<(usize, usize)> {
    if xs.len() < 2 {
        return Err(Error::InsufficientSubjects {
            required: 2,
            got: xs.len(),
        });
    }
    let shape = xs[0].shape();
    for (i, x) in xs.iter().enumerate() {
        if x.shape() != shape {
            return Err(dim_err(format!(
                "subject {i} is {}x{} but subject 0 is {}x{}",
                x.nrows(),
                x.ncols(),
                shape.0,
                shape.1
            )));
        }
        ensure_finite(x, &format!("subject {i}"))?;
    }
    Ok(shape)
}

pub(crate) fn center_all(xs: &[DMatrix<f64>]) -> Result<(Vec<DMatrix<f64>>, Vec<DVector<f64>>)> {
    let mut centered = Vec::with_capacity(xs.len());
    let mut means = Vec::with_capacity(xs.len());
    for x in xs {
        let (c, mu) = column_center_with_means(x)?;
        centered.push(c);
        means.push(mu);
    }
    Ok((centered, means))
}

/// `α_i` and `M` are identified only up to a common factor (`α_i c`, `M / c`).
/// Left free, that factor creeps every iteration on noisy data and `M̂`
/// shrinks towards zero, so the scales are pinned to geometric mean 1 before
/// dividing them out.
fn normalize_scales(steps: &mut [(RotationEstimate, ScaleEstimate, DMatrix<f64>)]) {
    let log_mean = steps.iter().map(|s| s.1.alpha.ln()).sum::<f64>() / steps.len() as f64;
    let common = log_mean.exp();
    for (_, scale, aligned) in steps.iter_mut() {
        scale.alpha /= common;
        *aligned /= scale.alpha;
    }
}

/// Generalized Procrustes loop over already centered inputs.
pub(crate) fn run_loop(
    xs: &[DMatrix<f64>],
    priors: &PriorTerms,
    config: &AlignmentConfig,
) -> Result<AlignmentResult> {
    let (n, m) = xs[0].shape();
    let mut reference = mean_matrix(xs);
    let mut covariances = CovariancePair::identity(n, m);
    let mut whitening = Whitening::identity();
    let mut dist_trace = Vec::new();
    let mut converged = false;
    let mut covariance_degenerate = false;
    let mut last: Vec<(RotationEstimate, ScaleEstimate, DMatrix<f64>)> = Vec::new();

    let mut iteration_seconds = Vec::new();

    while dist_trace.len() < config.max_iterations {
        let started = Instant::now();
        let mut steps: Vec<(RotationEstimate, ScaleEstimate, DMatrix<f64>)> = xs
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let rot = rotation_step(x, &reference, &whitening, priors.for_subject(i))?;
                let scale = if config.scaling {
                    scale_step(x, &rot.rotation, &whitening, &rot.singular_values)?
                } else {
                    ScaleEstimate {
                        alpha: 1.0,
                        approximation_warning: false,
                    }
                };
                let aligned = x * &rot.rotation;
                Ok((rot, scale, aligned))
            })
            .collect::<Result<_>>()?;

        if config.scaling {
            normalize_scales(&mut steps);
        }

        let previous = std::mem::replace(
            &mut reference,
            mean_matrix(&steps.iter().map(|s| s.2.clone()).collect::<Vec<_>>()),
        );

        if config.covariance_mode == CovarianceMode::Dutilleul {
            let aligned: Vec<DMatrix<f64>> = steps.iter().map(|s| s.2.clone()).collect();
            let estimate = two_stage(&aligned, &reference, &covariances, config)?;
            if estimate.degenerate {
                covariance_degenerate = true;
            } else {
                whitening = Whitening::from_pair(&estimate.pair)?;
                covariances = estimate.pair;
            }
        }

        let dist = (&reference - &previous).norm_squared();
        dist_trace.push(dist);
        iteration_seconds.push(started.elapsed().as_secs_f64());
        last = steps;
        if dist < config.tol {
            converged = true;
            break;
        }
    }

    let mut rotations = Vec::with_capacity(xs.len());
    let mut scales = Vec::with_capacity(xs.len());
    let mut aligned = Vec::with_capacity(xs.len());
    let mut unique = Vec::with_capacity(xs.len());
    let mut posterior_min_singular = Vec::with_capacity(xs.len());
    let mut scale_warnings = Vec::with_capacity(xs.len());
    for (rot, scale, x_hat) in last {
        unique.push(rot.unique);
        posterior_min_singular.push(rot.singular_values.min());
        rotations.push(rot.rotation);
        scales.push(scale.alpha);
        scale_warnings.push(scale.approximation_warning);
        aligned.push(x_hat);
    }
    Ok(AlignmentResult {
        rotations,
        scales,
        reference,
        covariances,
        aligned,
        translations: Vec::new(),
        iterations_run: dist_trace.len(),
        dist_trace,
        converged,
        unique,
        posterior_min_singular,
        iteration_seconds,
        scale_warnings,
        covariance_degenerate,
    })
}

/// Aligns `N ≥ 2` subjects of identical shape `n × m` in the full `m`-dimensional space.
///
/// Inputs are column-centered first; the removed means are reported as
/// `translations`. With `k > 0` in `config.prior` this is the MAP estimator,
/// otherwise maximum likelihood.
pub fn align(xs: &[DMatrix<f64>], config: &AlignmentConfig) -> Result<AlignmentResult> {
    config.validate()?;
    let (n, m) = validate_subjects(xs)?;
    if config.covariance_mode == CovarianceMode::Dutilleul && !check_existence(xs.len(), n, m) {
        return Err(existence_error(xs.len(), n, m));
    }
    let (centered, translations) = center_all(xs)?;
    let priors = if config.prior.is_active() {
        let (f, _) = build_prior_location(&config.prior, m)?;
        PriorTerms::Shared(f, config.prior.k)
    } else {
        PriorTerms::None
    };
    let mut result = run_loop(&centered, &priors, config)?;
    result.translations = translations;
    Ok(result)
}
