//! Non-functional baselines for curves with missing samples: column-mean and
//! k-nearest-neighbour imputation on the common grid, and per-curve
//! standardization over the observed entries.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fdata::{Dataset, SampledFunction};

/// A vector on a fixed grid together with its observed positions. Missing
/// entries hold `0.0` and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedVector {
    values: DVector<f64>,
    observed: Vec<bool>,
}

impl MaskedVector {
    pub fn new(values: DVector<f64>, observed: Vec<bool>) -> Result<Self> {
        if values.len() != observed.len() {
            return Err(Error::Contract(format!(
                "{} values but a mask of length {}",
                values.len(),
                observed.len()
            )));
        }
        if !observed.iter().any(|&o| o) {
            return Err(Error::Validation("vector has no observed entry".into()));
        }
        let values = DVector::from_fn(values.len(), |j, _| if observed[j] { values[j] } else { 0.0 });
        Ok(Self { values, observed })
    }

    pub fn complete(values: DVector<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![true; n])
    }

    /// Places the samples of `f` on `grid`; every abscissa of `f` must be a
    /// grid point (relative tolerance 1e-9 of the grid span).
    pub fn from_function(f: &SampledFunction, grid: &[f64]) -> Result<Self> {
        let span = grid.last().zip(grid.first()).map_or(1.0, |(b, a)| (b - a).abs().max(1.0));
        let mut values = DVector::zeros(grid.len());
        let mut observed = vec![false; grid.len()];
        for p in f.points() {
            let j = grid.partition_point(|&g| g < p.x - 1e-9 * span);
            if j == grid.len() || (grid[j] - p.x).abs() > 1e-9 * span {
                return Err(Error::Contract(format!(
                    "abscissa {} of function {} is not on the common grid",
                    p.x,
                    f.id()
                )));
            }
            values[j] = p.y;
            observed[j] = true;
        }
        Self::new(values, observed)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn is_observed(&self, j: usize) -> bool {
        self.observed[j]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Every function of `dataset` on `grid` (typically [`Dataset::common_grid`]).
pub fn mask_dataset(dataset: &Dataset, grid: &[f64]) -> Result<Vec<MaskedVector>> {
    dataset
        .functions()
        .iter()
        .map(|f| MaskedVector::from_function(f, grid))
        .collect()
}

fn check_lengths(data: &[MaskedVector]) -> Result<usize> {
    let p = data.first().map(MaskedVector::len).ok_or_else(|| Error::Imputation("empty dataset".into()))?;
    if data.iter().any(|v| v.len() != p) {
        return Err(Error::Contract("masked vectors of unequal length".into()));
    }
    Ok(p)
}

/// Column means over observed entries, learned on one set and applied to any.
#[derive(Debug, Clone)]
pub struct MeanImputer {
    means: DVector<f64>,
}

impl MeanImputer {
    pub fn fit(data: &[MaskedVector]) -> Result<Self> {
        let p = check_lengths(data)?;
        let mut sum = DVector::<f64>::zeros(p);
        let mut count = vec![0usize; p];
        for v in data {
            for j in 0..p {
                if v.observed[j] {
                    sum[j] += v.values[j];
                    count[j] += 1;
                }
            }
        }
        if let Some(j) = count.iter().position(|&c| c == 0) {
            return Err(Error::Imputation(format!("column {j} is never observed")));
        }
        Ok(Self {
            means: DVector::from_fn(p, |j, _| sum[j] / count[j] as f64),
        })
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn transform(&self, v: &MaskedVector) -> Result<DVector<f64>> {
        if v.len() != self.means.len() {
            return Err(Error::Contract("vector length differs from the fitted columns".into()));
        }
        Ok(DVector::from_fn(v.len(), |j, _| if v.observed[j] { v.values[j] } else { self.means[j] }))
    }
}

pub fn mean_impute(data: &[MaskedVector]) -> Result<Vec<DVector<f64>>> {
    let imp = MeanImputer::fit(data)?;
    data.iter().map(|v| imp.transform(v)).collect()
}

/// Mean squared difference over the coordinates observed in both vectors;
/// `None` when they share none.
pub fn knn_distance(x: &MaskedVector, y: &MaskedVector) -> Option<f64> {
    let mut sum = 0.0;
    let mut shared = 0usize;
    for j in 0..x.len().min(y.len()) {
        if x.observed[j] && y.observed[j] {
            sum += (x.values[j] - y.values[j]).powi(2);
            shared += 1;
        }
    }
    (shared > 0).then(|| sum / shared as f64)
}

/// k-NN imputation against a fixed reference set.
#[derive(Debug, Clone)]
pub struct KnnImputer {
    reference: Vec<MaskedVector>,
    k: usize,
}

impl KnnImputer {
    pub fn new(reference: Vec<MaskedVector>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        check_lengths(&reference)?;
        Ok(Self { reference, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Fills the missing entries of `x`. `skip` excludes one reference
    /// position (the vector itself when imputing the reference set);
    /// `sample` only labels errors.
    pub fn impute(&self, x: &MaskedVector, skip: Option<usize>, sample: usize) -> Result<DVector<f64>> {
        if x.len() != self.reference[0].len() {
            return Err(Error::Contract("vector length differs from the reference set".into()));
        }
        if x.observed.iter().all(|&o| o) {
            return Ok(x.values.clone());
        }
        let mut ranked: Vec<(f64, usize)> = self
            .reference
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .filter_map(|(i, y)| knn_distance(x, y).map(|d| (d, i)))
            .collect();
        if ranked.is_empty() {
            return Err(Error::Incomparable { sample });
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = x.values.clone();
        for j in (0..x.len()).filter(|&j| !x.observed[j]) {
            let (mut sum, mut used) = (0.0, 0usize);
            for &(_, i) in &ranked {
                if self.reference[i].observed[j] {
                    sum += self.reference[i].values[j];
                    used += 1;
                    if used == self.k {
                        break;
                    }
                }
            }
            if used == 0 {
                return Err(Error::Imputation(format!(
                    "no comparable neighbour of sample {sample} observes coordinate {j}"
                )));
            }
            if used < self.k {
                log::warn!("sample {sample}, coordinate {j}: only {used} of {} neighbours qualify", self.k);
            }
            out[j] = sum / used as f64;
        }
        Ok(out)
    }

    /// Imputes the reference set itself, each vector excluded from its own
    /// neighbourhood.
    pub fn impute_reference(&self) -> Result<Vec<DVector<f64>>> {
        self.reference
            .iter()
            .enumerate()
            .map(|(i, x)| self.impute(x, Some(i), i))
            .collect()
    }
}

pub fn knn_impute(data: &[MaskedVector], k: usize) -> Result<Vec<DVector<f64>>> {
    KnnImputer::new(data.to_vec(), k)?.impute_reference()
}

/// Observed entries become `(x_i - m) / sqrt(sum_j (x_j - m)^2)` where `m`
/// and the sum run over the observed entries; the mask is unchanged.
pub fn expert_scale(x: &MaskedVector) -> Result<MaskedVector> {
    let n = x.observed_count() as f64;
    let mean = x.values.iter().zip(&x.observed).filter(|(_, &o)| o).map(|(v, _)| v).sum::<f64>() / n;
    let dev = x
        .values
        .iter()
        .zip(&x.observed)
        .filter(|(_, &o)| o)
        .map(|(v, _)| (v - mean).powi(2))
        .sum::<f64>()
        .sqrt();
    if !(dev > 1e-300) || dev <= 1e-14 * mean.abs() {
        return Err(Error::Scaling);
    }
    MaskedVector::new(x.values.map(|v| (v - mean) / dev), x.observed.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn mv(values: &[f64], observed: &[bool]) -> MaskedVector {
        MaskedVector::new(DVector::from_column_slice(values), observed.to_vec()).unwrap()
    }

    fn random_masked(n: usize, p: usize, missing: f64, seed: u64) -> Vec<MaskedVector> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let mut obs: Vec<bool> = (0..p).map(|_| rng.random::<f64>() >= missing).collect();
                obs[rng.random_range(0..p)] = true;
                mv(&(0..p).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>(), &obs)
            })
            .collect()
    }

    #[test]
    fn complete_data_is_unchanged() {
        let data = random_masked(6, 4, 0.0, 1);
        for (a, b) in mean_impute(&data).unwrap().iter().zip(&data) {
            assert_eq!(a, b.values());
        }
        for (a, b) in knn_impute(&data, 2).unwrap().iter().zip(&data) {
            assert_eq!(a, b.values());
        }
    }

    #[test]
    fn mean_of_observed_column() {
        let data = vec![mv(&[1.0, 5.0], &[true, true]), mv(&[3.0, 0.0], &[true, true]), mv(&[0.0, 2.0], &[false, true])];
        assert_eq!(mean_impute(&data).unwrap()[2][0], 2.0);
    }

    #[test]
    fn unobserved_column_is_an_error() {
        let data = vec![mv(&[1.0, 0.0], &[true, false]), mv(&[3.0, 0.0], &[true, false])];
        assert!(matches!(mean_impute(&data), Err(Error::Imputation(_))));
    }

    #[test]
    fn one_neighbour_copies_the_identical_sample() {
        let data = vec![
            mv(&[1.0, 2.0, 0.0, 4.0], &[true, true, false, true]),
            mv(&[1.0, 2.0, 7.5, 4.0], &[true; 4]),
            mv(&[9.0, -2.0, 1.0, 0.0], &[true; 4]),
        ];
        assert_eq!(knn_impute(&data, 1).unwrap()[0][2], 7.5);
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        let data = vec![
            mv(&[0.0, 0.0], &[true, false]),
            mv(&[1.0, 10.0], &[true; 2]),
            mv(&[-1.0, 20.0], &[true; 2]),
        ];
        assert_eq!(knn_impute(&data, 1).unwrap()[0][1], 10.0);
    }

    #[test]
    fn disjoint_masks_are_incomparable() {
        let data = vec![mv(&[1.0, 0.0], &[true, false]), mv(&[0.0, 2.0], &[false, true])];
        assert!(matches!(knn_impute(&data, 1), Err(Error::Incomparable { sample: 0 })));
    }

    #[test]
    fn fewer_neighbours_than_k_uses_all() {
        let data = vec![mv(&[1.0, 0.0], &[true, false]), mv(&[1.0, 4.0], &[true; 2]), mv(&[2.0, 8.0], &[true; 2])];
        assert_eq!(knn_impute(&data, 5).unwrap()[0][1], 6.0);
    }

    #[test]
    fn grid_placement() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        let f = SampledFunction::from_xy(0, &[0.0, 2.0, 3.0], &[5.0, 6.0, 7.0]).unwrap();
        let v = MaskedVector::from_function(&f, &grid).unwrap();
        assert_eq!(v.observed(), &[true, false, true, true]);
        assert_eq!(v.values()[2], 6.0);
        let off = SampledFunction::from_xy(0, &[0.5], &[1.0]).unwrap();
        assert!(MaskedVector::from_function(&off, &grid).is_err());
    }

    #[test]
    fn two_point_scaling() {
        let s = expert_scale(&mv(&[1.0, 0.0, 3.0], &[true, false, true])).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((s.values()[0] + h).abs() < 1e-15 && (s.values()[2] - h).abs() < 1e-15);
        assert_eq!(s.observed(), &[true, false, true]);
    }

    #[test]
    fn constant_observed_values_cannot_be_scaled() {
        assert!(matches!(expert_scale(&mv(&[2.0, 2.0, 9.0], &[true, true, false])), Err(Error::Scaling)));
        assert!(matches!(expert_scale(&mv(&[2.0, 1.0], &[true, false])), Err(Error::Scaling)));
    }

    proptest! {
        #[test]
        fn observed_entries_survive_imputation(seed in 0u64..1000, k in 1usize..5) {
            let data = random_masked(12, 6, 0.3, seed);
            let m = mean_impute(&data).unwrap_or_default();
            let n = knn_impute(&data, k).unwrap_or_default();
            for out in [m, n] {
                for (o, v) in out.iter().zip(&data) {
                    for j in 0..v.len() {
                        if v.is_observed(j) {
                            prop_assert_eq!(o[j], v.values()[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn knn_distance_is_symmetric(seed in 0u64..1000) {
            let d = random_masked(2, 8, 0.4, seed);
            prop_assert_eq!(knn_distance(&d[0], &d[1]), knn_distance(&d[1], &d[0]));
            prop_assert_eq!(knn_distance(&d[0], &d[0]), Some(0.0));
        }

        #[test]
        fn expert_scale_is_affine_invariant(seed in 0u64..1000, a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], b in -100.0f64..100.0) {
            let x = &random_masked(1, 10, 0.3, seed)[0];
            prop_assume!(x.observed_count() >= 2);
            let y = MaskedVector::new(x.values().map(|v| a * v + b), x.observed().to_vec()).unwrap();
            let (sx, sy) = (expert_scale(x).unwrap(), expert_scale(&y).unwrap());
            let n = sx.observed_count() as f64;
            let mean: f64 = sx.values().iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((sx.values().norm_squared() - 1.0).abs() < 1e-12);
            for j in 0..x.len() {
                if x.is_observed(j) {
                    prop_assert!((sy.values()[j] - a.signum() * sx.values()[j]).abs() < 1e-12);
                }
            }
        }
    }
}
