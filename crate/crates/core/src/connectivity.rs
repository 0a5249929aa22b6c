//! Seed-based and region-of-interest correlation analyses on a
//! time × variable group matrix.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};

/// Region label for every column, optionally with region names.
#[derive(Debug, Clone)]
pub struct RoiLabels {
    pub labels: Vec<i64>,
    pub region_names: Option<BTreeMap<i64, String>>,
}

impl RoiLabels {
    pub fn new(labels: Vec<i64>) -> Self {
        Self {
            labels,
            region_names: None,
        }
    }

    /// Regions in ascending label order. With a name map every named region
    /// is included, so a named region without columns is detectable.
    pub fn regions(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = self.labels.clone();
        if let Some(names) = &self.region_names {
            ids.extend(names.keys().copied());
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn centered(col: impl Iterator<Item = f64> + Clone, len: usize) -> (Vec<f64>, f64) {
    let mean = col.clone().sum::<f64>() / len as f64;
    let dev: Vec<f64> = col.map(|v| v - mean).collect();
    let ss = dev.iter().map(|d| d * d).sum::<f64>();
    (dev, ss)
}

fn pearson(a: &[f64], ssa: f64, b: &[f64], ssb: f64) -> f64 {
    let cross: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (cross / (ssa.sqrt() * ssb.sqrt())).clamp(-1.0, 1.0)
}

fn zero_variance(ss: f64, scale: f64) -> bool {
    ss <= 1e-28 * scale.max(f64::MIN_POSITIVE)
}

/// Pearson correlation of `seed_column` with every column. Columns with zero
/// variance give `None`.
pub fn seed_correlation(reference: &DMatrix<f64>, seed_column: usize) -> Result<Vec<Option<f64>>> {
    let (n, m) = reference.shape();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 time points, got {n}"
        )));
    }
    if seed_column >= m {
        return Err(dim_err(format!("seed column {seed_column} out of range for {m} columns")));
    }
    let scale = reference.norm_squared() / m as f64;
    let (seed, seed_ss) = centered(reference.column(seed_column).iter().copied(), n);
    if zero_variance(seed_ss, scale) {
        return Err(Error::InvalidInput(format!(
            "seed column {seed_column} has zero variance"
        )));
    }
    Ok((0..m)
        .map(|j| {
            if j == seed_column {
                return Some(1.0);
            }
            let (col, ss) = centered(reference.column(j).iter().copied(), n);
            (!zero_variance(ss, scale)).then(|| pearson(&seed, seed_ss, &col, ss))
        })
        .collect())
}

/// Region mean series, one column per region in `RoiLabels::regions` order.
pub fn region_series(reference: &DMatrix<f64>, rois: &RoiLabels) -> Result<(Vec<i64>, DMatrix<f64>)> {
    let (n, m) = reference.shape();
    if rois.labels.len() != m {
        return Err(dim_err(format!("{} labels for {m} columns", rois.labels.len())));
    }
    let regions = rois.regions();
    if regions.is_empty() {
        return Err(Error::InvalidInput("no regions".into()));
    }
    let index: BTreeMap<i64, usize> = regions.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let mut sums = DMatrix::zeros(n, regions.len());
    let mut counts = vec![0usize; regions.len()];
    for (j, label) in rois.labels.iter().enumerate() {
        let k = index[label];
        counts[k] += 1;
        let mut col = sums.column_mut(k);
        col += reference.column(j);
    }
    let empty: Vec<String> = regions
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == 0)
        .map(|(r, _)| match rois.region_names.as_ref().and_then(|n| n.get(r)) {
            Some(name) => format!("{r} ({name})"),
            None => r.to_string(),
        })
        .collect();
    if !empty.is_empty() {
        return Err(Error::InvalidInput(format!(
            "regions without columns: {}",
            empty.join(", ")
        )));
    }
    for (k, c) in counts.iter().enumerate() {
        sums.column_mut(k).scale_mut(1.0 / *c as f64);
    }
    Ok((regions, sums))
}

/// Correlation matrix between region mean time series.
pub fn roi_correlation(reference: &DMatrix<f64>, rois: &RoiLabels) -> Result<DMatrix<f64>> {
    let (regions, series) = region_series(reference, rois)?;
    let n = series.nrows();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 time points, got {n}"
        )));
    }
    let scale = series.norm_squared() / series.ncols() as f64;
    let mut dev = Vec::with_capacity(regions.len());
    for (k, region) in regions.iter().enumerate() {
        let (d, ss) = centered(series.column(k).iter().copied(), n);
        if zero_variance(ss, scale) {
            return Err(Error::InvalidInput(format!(
                "region {region} has a constant mean series"
            )));
        }
        dev.push((d, ss));
    }
    let count = regions.len();
    let mut out = DMatrix::identity(count, count);
    for a in 0..count {
        for b in (a + 1)..count {
            let r = pearson(&dev[a].0, dev[a].1, &dev[b].0, dev[b].1);
            out[(a, b)] = r;
            out[(b, a)] = r;
        }
    }
    Ok(out)
}

/// Convenience for writing seed maps: `None` becomes NaN.
pub fn seed_map_vector(values: &[Option<f64>]) -> DVector<f64> {
    DVector::from_iterator(values.len(), values.iter().map(|v| v.unwrap_or(f64::NAN)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn seed_self_and_negated() {
        let mut m = random(10, 4, 1);
        let seed = m.column(0).clone_owned();
        m.set_column(1, &seed);
        m.set_column(2, &(-seed));
        let map = seed_correlation(&m, 0).unwrap();
        assert_eq!(map[0], Some(1.0));
        assert!((map[1].unwrap() - 1.0).abs() < 1e-12);
        assert!((map[2].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_matches_two_pass_formula() {
        let m = random(12, 6, 2);
        let map = seed_correlation(&m, 3).unwrap();
        let seed: Vec<f64> = m.column(3).iter().copied().collect();
        for j in 0..6 {
            let col: Vec<f64> = m.column(j).iter().copied().collect();
            assert!((map[j].unwrap() - oracle_pearson(&seed, &col)).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_zero_variance_handling() {
        let mut m = random(5, 3, 3);
        m.column_mut(1).fill(2.0);
        assert!(seed_correlation(&m, 1).is_err());
        let map = seed_correlation(&m, 0).unwrap();
        assert_eq!(map[1], None);
        assert!(seed_correlation(&random(2, 3, 1), 0).is_err());
    }

    #[test]
    fn single_region() {
        let m = random(6, 4, 4);
        let c = roi_correlation(&m, &RoiLabels::new(vec![7; 4])).unwrap();
        assert_eq!(c, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn coinciding_region_means() {
        let mut m = random(8, 4, 5);
        let a = m.column(0).clone_owned();
        m.set_column(2, &a);
        let b = m.column(1).clone_owned();
        m.set_column(3, &b);
        let c = roi_correlation(&m, &RoiLabels::new(vec![1, 1, 2, 2])).unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roi_matrix_properties() {
        let m = random(30, 20, 6);
        let labels = (0..20).map(|j| (j % 5) as i64).collect();
        let c = roi_correlation(&m, &RoiLabels::new(labels)).unwrap();
        assert_eq!(c.shape(), (5, 5));
        assert!((&c - c.transpose()).norm() < 1e-12);
        for i in 0..5 {
            assert!((c[(i, i)] - 1.0).abs() < 1e-12);
        }
        assert!(c.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn empty_named_region_rejected() {
        let m = random(6, 3, 7);
        let mut names = BTreeMap::new();
        names.insert(9, "frontal pole".to_string());
        let rois = RoiLabels {
            labels: vec![1, 1, 2],
            region_names: Some(names),
        };
        let err = roi_correlation(&m, &rois).unwrap_err().to_string();
        assert!(err.contains("9 (frontal pole)"), "{err}");
    }
}
