//! Seeded synthetic data under `X_i = α_i (M + E_i) R_iᵀ`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{column_center, orthogonality_defect};

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub subjects: usize,
    pub n: usize,
    pub m: usize,
    /// Standard deviation of every entry of `E_i` (`Σn = σ² I`, `Σm = I`).
    pub noise_sigma: f64,
    /// Planted `α_i`; empty means all ones.
    pub scales: Vec<f64>,
    pub seed: u64,
    /// Planted `R_i`; Haar draws when absent.
    pub planted_rotations: Option<Vec<DMatrix<f64>>>,
}

impl SimulationSpec {
    pub fn new(subjects: usize, n: usize, m: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            subjects,
            n,
            m,
            noise_sigma,
            scales: Vec::new(),
            seed,
            planted_rotations: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::InvalidInput("simulation dimensions must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !self.scales.is_empty() && self.scales.len() != self.subjects {
            return Err(dim_err(format!(
                "{} scales given for {} subjects",
                self.scales.len(),
                self.subjects
            )));
        }
        if let Some(a) = self.scales.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput(format!("scales must be positive, got {a}")));
        }
        if let Some(rs) = &self.planted_rotations {
            if rs.len() != self.subjects {
                return Err(dim_err(format!(
                    "{} planted rotations for {} subjects",
                    rs.len(),
                    self.subjects
                )));
            }
            for r in rs {
                if r.shape() != (self.m, self.m) || orthogonality_defect(r) > 1e-8 {
                    return Err(Error::InvalidInput(
                        "planted rotations must be orthogonal m x m matrices".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Column-centered subject matrices.
    pub xs: Vec<DMatrix<f64>>,
    pub rotations: Vec<DMatrix<f64>>,
    pub scales: Vec<f64>,
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix drawn from `rng`.
pub fn random_orthogonal_from(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, m, m);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed orthogonal `m × m` matrix: QR of a Gaussian matrix with
/// the signs of `diag(R)` moved into `Q`.
pub fn random_orthogonal(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_from(&mut rng, m)
}

/// Standard normal `n × m` matrix, useful as a shared reference.
pub fn random_reference(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_matrix(&mut rng, n, m)
}

/// Draws one dataset. Rotations (when not planted) are drawn first, then
/// the noise of every subject in order, all from a single seeded stream.
pub fn simulate_dataset(spec: &SimulationSpec, reference: &DMatrix<f64>) -> Result<SimulatedData> {
    spec.validate()?;
    if reference.shape() != (spec.n, spec.m) {
        return Err(dim_err(format!(
            "reference is {}x{}, simulation expects {}x{}",
            reference.nrows(),
            reference.ncols(),
            spec.n,
            spec.m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rotations = match &spec.planted_rotations {
        Some(rs) => rs.clone(),
        None => (0..spec.subjects)
            .map(|_| random_orthogonal_from(&mut rng, spec.m))
            .collect(),
    };
    let scales = if spec.scales.is_empty() {
        vec![1.0; spec.subjects]
    } else {
        spec.scales.clone()
    };
    let mut xs = Vec::with_capacity(spec.subjects);
    for (r, alpha) in rotations.iter().zip(&scales) {
        let noise = gaussian_matrix(&mut rng, spec.n, spec.m) * spec.noise_sigma;
        let x = (reference + noise) * r.transpose() * *alpha;
        xs.push(if spec.n >= 2 { column_center(&x)? } else { x });
    }
    Ok(SimulatedData {
        xs,
        rotations,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_identity_transform() {
        let m_ref = random_reference(5, 3, 1);
        let spec = SimulationSpec {
            planted_rotations: Some(vec![DMatrix::identity(3, 3); 2]),
            ..SimulationSpec::new(2, 5, 3, 0.0, 9)
        };
        let data = simulate_dataset(&spec, &m_ref).unwrap();
        let centered = column_center(&m_ref).unwrap();
        for x in &data.xs {
            assert_eq!(x, &centered);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m_ref = random_reference(4, 3, 2);
        let spec = SimulationSpec::new(3, 4, 3, 0.5, 17);
        let a = simulate_dataset(&spec, &m_ref).unwrap();
        let b = simulate_dataset(&spec, &m_ref).unwrap();
        assert_eq!(a.xs, b.xs);
        assert_eq!(a.rotations, b.rotations);
        assert_eq!(random_orthogonal(4, 5), random_orthogonal(4, 5));
    }

    #[test]
    fn orthogonal_draws() {
        for seed in 0..20 {
            let r = random_orthogonal(5, seed);
            assert!(orthogonality_defect(&r) < 1e-12);
            assert!((r.determinant().abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn haar_entries_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut sum = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..1000 {
            sum += random_orthogonal_from(&mut rng, 3);
        }
        let mean = sum / 1000.0;
        assert!(mean.iter().all(|v| v.abs() < 0.05), "{mean}");
    }

    #[test]
    fn noise_covariance_is_isotropic() {
        // E_i = X_i - M with R = I, α = 1 and n = m = 2 (before centering).
        let sigma = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let draws = 2000;
        let mut second = DMatrix::<f64>::zeros(4, 4);
        let mut first = nalgebra::DVector::<f64>::zeros(4);
        for _ in 0..draws {
            let e = gaussian_matrix(&mut rng, 2, 2) * sigma;
            let v = nalgebra::DVector::from_column_slice(e.as_slice());
            first += &v;
            second += &v * v.transpose();
        }
        let mean = first / draws as f64;
        let cov = second / draws as f64 - &mean * mean.transpose();
        let target = DMatrix::<f64>::identity(4, 4) * sigma * sigma;
        assert!((cov - &target).norm() / target.norm() < 0.05);
    }

    #[test]
    fn rejects_bad_specs() {
        let m_ref = random_reference(4, 3, 2);
        let mut spec = SimulationSpec::new(2, 4, 3, 0.1, 1);
        spec.scales = vec![1.0];
        assert!(simulate_dataset(&spec, &m_ref).is_err());
        spec.scales = vec![1.0, -2.0];
        assert!(simulate_dataset(&spec, &m_ref).is_err());
        let spec = SimulationSpec::new(2, 5, 3, 0.1, 1);
        assert!(simulate_dataset(&spec, &m_ref).is_err());
    }
}
