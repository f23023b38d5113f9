//! Principal component analysis on coordinate vectors.
//!
//! Run on scaled coordinates `beta` this is functional PCA: the principal
//! vectors `tau` are the `beta` coordinates of orthonormal principal
//! functions, whose raw coordinates are `U^{-1} tau`. Run on raw grid
//! vectors with `standardize` set it is the classical centered-and-reduced
//! PCA.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::represent::Representation;

#[derive(Debug, Clone)]
pub struct FpcaModel {
    mean: DVector<f64>,
    scale: Option<DVector<f64>>,
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    spectrum: Vec<f64>,
}

/// Functional PCA on scaled coordinates: centered, not reduced.
pub fn fit_fpca(betas: &[DVector<f64>], components: usize) -> Result<FpcaModel> {
    fit_pca(betas, components, false)
}

/// PCA keeping `components` directions. Eigenvalues are variances with the
/// `1/n` normalisation. With `standardize`, each coordinate is first divided
/// by its standard deviation (coordinates with zero spread are left as is).
pub fn fit_pca(rows: &[DVector<f64>], components: usize, standardize: bool) -> Result<FpcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Rank(format!("PCA needs at least 2 samples, got {n}")));
    }
    let q = rows[0].len();
    if rows.iter().any(|r| r.len() != q) {
        return Err(Error::Contract("PCA rows of unequal length".into()));
    }
    if components == 0 || components > q || components > n {
        return Err(Error::Rank(format!(
            "{components} components requested from {n} samples of dimension {q}"
        )));
    }
    let mut mean = DVector::zeros(q);
    for r in rows {
        mean += r;
    }
    mean /= n as f64;
    let scale = standardize.then(|| {
        let mut var = DVector::zeros(q);
        for r in rows {
            var += (r - &mean).map(|v| v * v);
        }
        (var / n as f64).map(|v: f64| if v > 0.0 { v.sqrt() } else { 1.0 })
    });
    let centered = DMatrix::from_fn(n, q, |i, j| {
        let v = rows[i][j] - mean[j];
        scale.as_ref().map_or(v, |s| v / s[j])
    });
    let cov = centered.tr_mul(&centered) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut comps = DMatrix::zeros(q, components);
    for (c, &i) in order.iter().take(components).enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        let lead = v.iter().enumerate().fold(0, |best, (k, x)| {
            if x.abs() > v[best].abs() {
                k
            } else {
                best
            }
        });
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        comps.set_column(c, &v);
    }
    Ok(FpcaModel {
        mean,
        scale,
        components: comps,
        eigenvalues: spectrum[..components].to_vec(),
        spectrum,
    })
}

impl FpcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `q x k` matrix whose columns are the principal vectors.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_standardized(&self) -> bool {
        self.scale.is_some()
    }

    /// Share of the total variance carried by every eigen-direction, in
    /// decreasing order (all `q` directions, not only the kept ones).
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.spectrum.iter().map(|v| v.max(0.0)).sum();
        self.spectrum.iter().map(|v| v.max(0.0) / total).collect()
    }

    fn prepare(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Contract(format!(
                "vector of length {} for a PCA of dimension {}",
                x.len(),
                self.mean.len()
            )));
        }
        let c = x - &self.mean;
        Ok(match &self.scale {
            Some(s) => c.component_div(s),
            None => c,
        })
    }

    /// `tau_j^T (x - mean)`, divided by `sqrt(lambda_j)` when whitening.
    pub fn scores(&self, x: &DVector<f64>, whiten: bool) -> Result<DVector<f64>> {
        let mut s = self.components.tr_mul(&self.prepare(x)?);
        if whiten {
            let lead = self.eigenvalues[0].max(0.0);
            for (j, &ev) in self.eigenvalues.iter().enumerate() {
                if ev < 1e-12 * lead || ev <= 0.0 {
                    return Err(Error::DegenerateComponent {
                        component: j,
                        eigenvalue: ev,
                    });
                }
                s[j] /= ev.sqrt();
            }
        }
        Ok(s)
    }

    /// Back-projection of unwhitened scores to the input space.
    pub fn reconstruct(&self, scores: &DVector<f64>) -> DVector<f64> {
        let k = scores.len().min(self.n_components());
        let c = self.components.columns(0, k) * scores.rows(0, k);
        let c = match &self.scale {
            Some(s) => c.component_mul(s),
            None => c,
        };
        c + &self.mean
    }

    /// Principal function `j` (0-based): raw coordinates `U^{-1} tau_j`.
    pub fn principal_function(&self, j: usize, basis: &Arc<Basis>) -> Result<Representation> {
        if self.scale.is_some() {
            return Err(Error::Contract("standardized PCA has no principal functions".into()));
        }
        if j >= self.n_components() {
            return Err(Error::Argument(format!(
                "component {j} requested from a model with {}",
                self.n_components()
            )));
        }
        Representation::from_beta(Arc::clone(basis), self.components.column(j).clone_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::seed;
    use rand::Rng;

    fn random_rows(n: usize, q: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = seed::rng(seed);
        let mix = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
        (0..n)
            .map(|_| &mix * DVector::from_fn(q, |i, _| rng.random_range(-1.0..1.0) * (q - i) as f64))
            .collect()
    }

    #[test]
    fn line_data_has_a_single_direction() {
        let dir = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let rows: Vec<_> = (0..10).map(|t| DVector::from_vec(vec![3.0, 1.0, -1.0]) + &dir * (t as f64 * 0.7 - 2.0)).collect();
        let m = fit_fpca(&rows, 3).unwrap();
        let ratio = m.explained_variance_ratio();
        assert!((ratio[0] - 1.0).abs() < 1e-12);
        assert!(ratio[1].abs() < 1e-12 && ratio[2].abs() < 1e-12);
    }

    #[test]
    fn components_orthonormal_sorted_and_signed() {
        let rows = random_rows(40, 6, 1);
        let m = fit_fpca(&rows, 6).unwrap();
        let gram = m.components().tr_mul(m.components());
        assert!((gram - DMatrix::<f64>::identity(6, 6)).amax() < 1e-10);
        assert!(m.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(m.eigenvalues().iter().all(|&v| v >= -1e-12));
        for c in m.components().column_iter() {
            let lead = c.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn mean_scores_to_zero_and_whitening_gives_unit_variance() {
        let rows = random_rows(50, 5, 2);
        let m = fit_fpca(&rows, 4).unwrap();
        assert!(m.scores(m.mean(), false).unwrap().amax() < 1e-12);
        let s: Vec<_> = rows.iter().map(|r| m.scores(r, true).unwrap()).collect();
        for j in 0..4 {
            let var = s.iter().map(|v| v[j] * v[j]).sum::<f64>() / s.len() as f64;
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_error_is_discarded_variance() {
        let rows = random_rows(30, 7, 3);
        let full = fit_fpca(&rows, 7).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=7 {
            let m = fit_fpca(&rows, k).unwrap();
            let err: f64 = rows
                .iter()
                .map(|r| (m.reconstruct(&m.scores(r, false).unwrap()) - r).norm_squared())
                .sum::<f64>()
                / rows.len() as f64;
            let discarded: f64 = full.eigenvalues()[k..].iter().sum();
            assert!((err - discarded).abs() <= 1e-8 * full.eigenvalues()[0]);
            assert!(err <= last + 1e-12);
            last = err;
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn too_many_components_is_a_rank_error() {
        let rows = random_rows(3, 6, 4);
        assert!(matches!(fit_fpca(&rows, 4), Err(Error::Rank(_))));
        assert!(matches!(fit_fpca(&rows[..1], 1), Err(Error::Rank(_))));
    }

    #[test]
    fn whitening_a_null_direction_fails() {
        let rows: Vec<_> = (0..5).map(|t| DVector::from_vec(vec![t as f64, 0.0])).collect();
        let m = fit_fpca(&rows, 2).unwrap();
        assert!(matches!(m.scores(&rows[0], true), Err(Error::DegenerateComponent { component: 1, .. })));
        assert!(m.scores(&rows[0], false).is_ok());
    }

    #[test]
    fn standardized_pca_ignores_column_units() {
        let rows = random_rows(25, 4, 5);
        let scaled: Vec<_> = rows.iter().map(|r| r.component_mul(&DVector::from_vec(vec![1.0, 100.0, 0.01, 7.0]))).collect();
        let a = fit_pca(&rows, 3, true).unwrap();
        let b = fit_pca(&scaled, 3, true).unwrap();
        for (r, s) in rows.iter().zip(&scaled) {
            assert!((a.scores(r, false).unwrap() - b.scores(s, false).unwrap()).amax() < 1e-9);
        }
    }

    #[test]
    fn principal_functions_are_l2_orthonormal() {
        let basis = Basis::new(BasisSpec::bspline_uniform(0.0, 2.0, 6, 4).unwrap()).unwrap();
        let rows = random_rows(30, basis.dim(), 6);
        let m = fit_fpca(&rows, 5).unwrap();
        let xi: Vec<_> = (0..5).map(|j| m.principal_function(j, &basis).unwrap()).collect();
        for j in 0..5 {
            for l in 0..5 {
                let expect = if j == l { 1.0 } else { 0.0 };
                // inner product through alpha^T Phi alpha, independent of beta
                let ip = xi[j].alpha().dot(&(&basis.gram().phi * xi[l].alpha()));
                assert!((ip - expect).abs() < 1e-8);
            }
        }
    }
}
