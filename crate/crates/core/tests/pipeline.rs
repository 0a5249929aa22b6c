use nalgebra::DMatrix;
use promises::linalg::polar_orthogonal_factor;
use promises::oracle::joint_objective;
use promises::simulate::{random_orthogonal, random_reference, simulate_dataset, SimulationSpec};
use promises::{
    align, align_efficient, estimate_rotation, select_k, AlignmentConfig, CovariancePair, PriorSpec,
};

fn near_identity(m: usize, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    (0..count)
        .map(|i| {
            let tilt = random_orthogonal(m, seed + i as u64) * 0.2 + DMatrix::<f64>::identity(m, m);
            polar_orthogonal_factor(&tilt).unwrap().orthogonal
        })
        .collect()
}

#[test]
fn select_k_prefers_a_prior_when_rotations_sit_near_its_mode() {
    let (subjects, n, m) = (6, 8, 16);
    let reference = random_reference(n, m, 100);
    let spec = SimulationSpec {
        planted_rotations: Some(near_identity(m, subjects, 500)),
        ..SimulationSpec::new(subjects, n, m, 0.5, 0)
    };
    let data = simulate_dataset(&spec, &reference).unwrap();
    let config = AlignmentConfig::default().with_prior(PriorSpec::identity(1.0).unwrap());
    let grid = [0.0, 0.1, 1.0, 10.0];
    let selection = select_k(&data.xs, &grid, &config, false).unwrap();
    assert!(selection.best_k > 0.0, "{:?}", selection.table);
    assert_eq!(selection.table.len(), 4);
    for row in &selection.table {
        assert_eq!(row.fold_scores.len(), subjects);
    }

    let reduced = select_k(&data.xs, &grid, &config, true).unwrap();
    assert!(reduced.table.iter().all(|r| r.mean_score.is_finite()));
}

#[test]
fn map_rotation_beats_mle_on_the_posterior_objective() {
    let xs = simulate_dataset(&SimulationSpec::new(4, 12, 5, 0.3, 3), &random_reference(12, 5, 2))
        .unwrap()
        .xs;
    let fit = align(&xs, &AlignmentConfig::default()).unwrap();
    let cov = CovariancePair::identity(12, 5);
    let prior = PriorSpec::identity(2.0).unwrap();
    let map: Vec<_> = xs
        .iter()
        .map(|x| estimate_rotation(x, &fit.reference, &cov, &prior).unwrap().rotation)
        .collect();
    let mle: Vec<_> = xs
        .iter()
        .map(|x| estimate_rotation(x, &fit.reference, &cov, &PriorSpec::flat()).unwrap().rotation)
        .collect();
    let ones = vec![1.0; xs.len()];
    let at_map = joint_objective(&xs, &map, &ones, &fit.reference, &cov, &prior).unwrap();
    let at_mle = joint_objective(&xs, &mle, &ones, &fit.reference, &cov, &prior).unwrap();
    assert!(at_map >= at_mle - 1e-9);
    // and the reverse holds for the likelihood alone
    let flat = PriorSpec::flat();
    let lik_map = joint_objective(&xs, &map, &ones, &fit.reference, &cov, &flat).unwrap();
    let lik_mle = joint_objective(&xs, &mle, &ones, &fit.reference, &cov, &flat).unwrap();
    assert!(lik_mle >= lik_map - 1e-9);
}

#[test]
fn efficient_and_full_reach_the_same_fit_without_prior() {
    // With k = 0 both paths reach the same optimum, up to a common orthogonal
    // transform of the shared space, so the residual loss and the Gram
    // matrices between aligned subjects coincide. The reduced problem is
    // compared in its own n-dimensional coordinates.
    let xs = simulate_dataset(&SimulationSpec::new(4, 6, 20, 0.2, 9), &random_reference(6, 20, 8))
        .unwrap()
        .xs;
    let config = AlignmentConfig {
        tol: 1e-24,
        max_iterations: 500,
        ..Default::default()
    };
    let full = align(&xs, &config).unwrap();
    let efficient = align_efficient(&xs, &config).unwrap();
    let reduced = &efficient.reduced;
    let loss = |aligned: &[DMatrix<f64>], reference: &DMatrix<f64>| -> f64 {
        aligned.iter().map(|x| (x - reference).norm_squared()).sum()
    };
    let full_loss = loss(&full.aligned, &full.reference);
    let reduced_loss = loss(&reduced.aligned, &reduced.reference);
    assert!((full_loss - reduced_loss).abs() <= 1e-8 * full_loss, "{full_loss} vs {reduced_loss}");
    for i in 0..4 {
        for j in 0..4 {
            let a = &full.aligned[i] * full.aligned[j].transpose();
            let b = &reduced.aligned[i] * reduced.aligned[j].transpose();
            assert!((&a - &b).norm() <= 1e-6 * a.norm(), "pair ({i}, {j})");
        }
    }
}

#[test]
fn efficient_transforms_reproduce_aligned_subjects() {
    let xs = simulate_dataset(&SimulationSpec::new(3, 5, 25, 0.1, 12), &random_reference(5, 25, 11))
        .unwrap()
        .xs;
    let fit = align_efficient(&xs, &AlignmentConfig::default().with_prior(PriorSpec::identity(25.0).unwrap())).unwrap();
    for (i, t) in fit.transforms.iter().enumerate() {
        assert_eq!(t.basis.shape(), (25, 5));
        assert_eq!(t.rotation.shape(), (5, 5));
        assert!((t.apply(&xs[i]) - &fit.aligned[i]).norm() < 1e-9);
    }
    assert_eq!(fit.group_mean().shape(), (5, 25));
}

#[test]
fn translations_are_removed_and_reported() {
    let base = simulate_dataset(&SimulationSpec::new(3, 10, 4, 0.1, 14), &random_reference(10, 4, 13))
        .unwrap()
        .xs;
    let shifted: Vec<_> = base
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut y = x.clone();
            for mut col in y.column_iter_mut() {
                col.add_scalar_mut(i as f64 + 1.0);
            }
            y
        })
        .collect();
    let a = align(&base, &AlignmentConfig::default()).unwrap();
    let b = align(&shifted, &AlignmentConfig::default()).unwrap();
    assert!((a.reference - b.reference).norm() < 1e-10);
    assert!((b.translations[2][0] - 3.0).abs() < 1e-12);
}

#[test]
fn simulation_is_reproducible() {
    let reference = random_reference(7, 3, 1);
    let a = simulate_dataset(&SimulationSpec::new(3, 7, 3, 0.1, 42), &reference).unwrap();
    let b = simulate_dataset(&SimulationSpec::new(3, 7, 3, 0.1, 42), &reference).unwrap();
    assert_eq!(a.xs, b.xs);
    assert_eq!(a.rotations, b.rotations);
}
