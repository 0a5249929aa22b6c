//! Leave-one-subject-out choice of the concentration `k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aligner::{align, rotation_step, scale_step, AlignmentConfig, Whitening};
use crate::efficient::align_efficient;
use crate::error::{Error, Result};
use crate::linalg::{column_center, thin_svd};
use crate::prior::build_prior_location;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KScore {
    pub k: f64,
    /// Held-out error per left-out subject, averaged over the two halves.
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KSelection {
    pub best_k: f64,
    pub table: Vec<KScore>,
}

/// For each candidate `k`: align the other `N − 1` subjects, then split the
/// held-out subject's time points into two contiguous halves. The MAP
/// rotation (and scale) is estimated from one half against the matching
/// rows of the training reference and scored by the Frobenius distance on
/// the other half, then the roles swap. Scoring on the rows used for the fit
/// would always favour `k = 0`, since the unregularized closed form is the
/// exact minimizer of that distance. The smallest mean score wins; ties keep
/// the earlier candidate.
pub fn select_k(
    xs: &[DMatrix<f64>],
    candidates: &[f64],
    config: &AlignmentConfig,
    efficient: bool,
) -> Result<KSelection> {
    if xs.len() < 3 {
        return Err(Error::InsufficientSubjects {
            required: 3,
            got: xs.len(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate values for k".into()));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let mut cfg = config.clone();
        cfg.prior = crate::prior::PriorSpec::new(k, config.prior.location.clone())?;
        let mut fold_scores = Vec::with_capacity(xs.len());
        for held in 0..xs.len() {
            let training: Vec<DMatrix<f64>> = xs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .map(|(_, x)| x.clone())
                .collect();
            let score = if efficient {
                held_out_reduced(&training, &xs[held], &cfg)?
            } else {
                held_out_full(&training, &xs[held], &cfg)?
            };
            fold_scores.push(score);
        }
        let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        table.push(KScore {
            k,
            fold_scores,
            mean_score,
        });
    }
    let best = table
        .iter()
        .fold(None::<&KScore>, |best, s| match best {
            Some(b) if b.mean_score <= s.mean_score => Some(b),
            _ => Some(s),
        })
        .expect("non-empty table");
    Ok(KSelection {
        best_k: best.k,
        table,
    })
}

fn score(
    x: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    whitening: &Whitening,
    prior: Option<(&DMatrix<f64>, f64)>,
    scaling: bool,
) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "held-out scoring needs at least 2 time points, got {n}"
        )));
    }
    let whitening = whitening.columns_only();
    let half = n / 2;
    let first: Vec<usize> = (0..half).collect();
    let second: Vec<usize> = (half..n).collect();
    let mut total = 0.0;
    for (fit_rows, eval_rows) in [(&first, &second), (&second, &first)] {
        let xf = x.select_rows(fit_rows.iter());
        let rot = rotation_step(&xf, &reference.select_rows(fit_rows.iter()), &whitening, prior)?;
        let mut aligned = x.select_rows(eval_rows.iter()) * &rot.rotation;
        if scaling {
            aligned /= scale_step(&xf, &rot.rotation, &whitening, &rot.singular_values)?.alpha;
        }
        total += (aligned - reference.select_rows(eval_rows.iter())).norm();
    }
    Ok(total / 2.0)
}

fn held_out_full(training: &[DMatrix<f64>], held: &DMatrix<f64>, cfg: &AlignmentConfig) -> Result<f64> {
    let fit = align(training, cfg)?;
    let x = column_center(held)?;
    let whitening = Whitening::from_pair(&fit.covariances)?;
    let location = if cfg.prior.is_active() {
        Some(build_prior_location(&cfg.prior, x.ncols())?.0)
    } else {
        None
    };
    score(
        &x,
        &fit.reference,
        &whitening,
        location.as_ref().map(|f| (f, cfg.prior.k)),
        cfg.scaling,
    )
}

fn held_out_reduced(
    training: &[DMatrix<f64>],
    held: &DMatrix<f64>,
    cfg: &AlignmentConfig,
) -> Result<f64> {
    let fit = align_efficient(training, cfg)?;
    let basis = thin_svd(&column_center(held)?)?;
    let x = basis.projected();
    let whitening = Whitening::from_pair(&fit.reduced.covariances)?;
    let location = if cfg.prior.is_active() {
        Some(cfg.prior.location.reduced(&basis.q, &basis.q)?)
    } else {
        None
    };
    score(
        &x,
        &fit.reduced.reference,
        &whitening,
        location.as_ref().map(|f| (f, cfg.prior.k)),
        cfg.scaling,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{random_reference, simulate_dataset, SimulationSpec};

    #[test]
    fn singleton_grid() {
        let m_ref = random_reference(6, 3, 1);
        let data = simulate_dataset(&SimulationSpec::new(4, 6, 3, 0.2, 2), &m_ref).unwrap();
        let sel = select_k(&data.xs, &[0.0], &AlignmentConfig::default(), false).unwrap();
        assert_eq!(sel.best_k, 0.0);
        assert_eq!(sel.table.len(), 1);
        assert!(sel.table[0].mean_score.is_finite());
    }

    #[test]
    fn too_few_subjects() {
        let m_ref = random_reference(6, 3, 1);
        let data = simulate_dataset(&SimulationSpec::new(2, 6, 3, 0.2, 2), &m_ref).unwrap();
        assert!(matches!(
            select_k(&data.xs, &[0.0, 1.0], &AlignmentConfig::default(), false),
            Err(Error::InsufficientSubjects { required: 3, got: 2 })
        ));
    }

    #[test]
    fn pure_noise_scores_are_finite() {
        let zero = DMatrix::zeros(6, 4);
        let data = simulate_dataset(&SimulationSpec::new(4, 6, 4, 1.0, 3), &zero).unwrap();
        let sel =
            select_k(&data.xs, &[0.0, 0.1, 1.0, 10.0], &AlignmentConfig::default(), false).unwrap();
        assert_eq!(sel.table.len(), 4);
        assert!(sel.table.iter().all(|s| s.mean_score.is_finite()));
    }
}
