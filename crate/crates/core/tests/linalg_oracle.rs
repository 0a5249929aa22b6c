//! Factorizations checked against a cyclic Jacobi eigen solver written here,
//! independent of the library's backend.

use nalgebra::DMatrix;
use promises::linalg::{polar_orthogonal_factor, svd_full, thin_svd};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues (descending) and eigenvectors of a symmetric matrix.
fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn jacobi_oracle_diagonalizes() {
    let a = random(5, 5, 1);
    let s = &a + a.transpose();
    let (values, vectors) = jacobi_eigen(&s);
    let back = &vectors * DMatrix::from_diagonal(&values.clone().into()) * vectors.transpose();
    assert!((back - s).norm() < 1e-12);
}

#[test]
fn singular_values_match_oracle_3x3() {
    for seed in 0..20 {
        let a = random(3, 3, 100 + seed);
        let svd = svd_full(&a).unwrap();
        let (eig, right) = jacobi_eigen(&a.tr_mul(&a));
        for i in 0..3 {
            assert!(
                (svd.singular_values[i] - eig[i].max(0.0).sqrt()).abs() < 1e-9,
                "seed {seed}, index {i}"
            );
            // right singular vectors agree up to sign
            let dot = svd.v.column(i).dot(&right.column(i)).abs();
            assert!((dot - 1.0).abs() < 1e-9, "seed {seed}, vector {i}: {dot}");
        }
        assert!((svd.reconstruct() - &a).norm() < 1e-12);
    }
}

#[test]
fn singular_values_match_oracle_rectangular() {
    for (rows, cols) in [(7, 4), (4, 7), (10, 10)] {
        let a = random(rows, cols, rows as u64 * 31 + cols as u64);
        let svd = svd_full(&a).unwrap();
        let gram = if rows >= cols { a.tr_mul(&a) } else { &a * a.transpose() };
        let (eig, _) = jacobi_eigen(&gram);
        for (i, s) in svd.singular_values.iter().enumerate() {
            assert!((s - eig[i].max(0.0).sqrt()).abs() < 1e-9);
        }
    }
}

#[test]
fn polar_factor_matches_oracle_formula() {
    // For nonsingular A, polar(A) = A (AᵀA)^{-1/2}.
    for seed in 0..10 {
        let a = random(4, 4, 200 + seed);
        let (eig, vectors) = jacobi_eigen(&a.tr_mul(&a));
        let inv_sqrt = DMatrix::from_diagonal(&eig.iter().map(|e| 1.0 / e.sqrt()).collect::<Vec<_>>().into());
        let oracle = &a * (&vectors * inv_sqrt * vectors.transpose());
        let polar = polar_orthogonal_factor(&a).unwrap();
        assert!(polar.unique);
        assert!((polar.orthogonal - oracle).norm() < 1e-9, "seed {seed}");
    }
}

#[test]
fn thin_svd_matches_oracle() {
    let x = random(5, 30, 7);
    let thin = thin_svd(&x).unwrap();
    let (eig, _) = jacobi_eigen(&(&x * x.transpose()));
    for i in 0..5 {
        assert!((thin.s[i] - eig[i].sqrt()).abs() < 1e-9);
    }
    assert!((&thin.l * DMatrix::from_diagonal(&thin.s) * thin.q.transpose() - &x).norm() < 1e-10);
    assert!((thin.q.tr_mul(&thin.q) - DMatrix::<f64>::identity(5, 5)).norm() < 1e-10);
}
