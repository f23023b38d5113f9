//! Predefined experiment tables on the spectrometric benchmark.

use super::spec::ExperimentSpec;
use crate::error::{Error, Result};

const RBFN: &str = "model = rbfn\n";
const MLP: &str = "model = mlp\npca-components = cv\npca-max-components = 18\nwhiten = on\n";

const TABLE1: &[(&str, &str)] = &[
    ("t1-01-raw", "basis = raw"),
    ("t1-02-pca20", "basis = raw\npca = classical\npca-components = 20"),
    ("t1-03-pca-cv", "basis = raw\npca = classical"),
    ("t1-04-pca-white", "basis = raw\npca = classical\nwhiten = on"),
    ("t1-05-spline4", "basis = bspline\norder = 4"),
    ("t1-06-fpca20", "basis = bspline\norder = 4\npca = functional\npca-components = 20"),
    ("t1-07-fpca-white", "basis = bspline\norder = 4\npca = functional\nwhiten = on"),
    ("t1-08-center-reduce", "basis = bspline\norder = 4\npreproc = center-reduce"),
    ("t1-09-deriv1", "basis = bspline\norder = 5\nmetric = deriv1"),
    ("t1-10-deriv2", "basis = bspline\norder = 6\nmetric = deriv2"),
];

const TABLE2: &[(&str, &str)] = &[
    ("t2-01-pca", "basis = raw\npca = classical"),
    ("t2-02-fpca", "basis = bspline\norder = 4\npca = functional"),
    ("t2-03-fpca-center-reduce", "basis = bspline\norder = 4\npreproc = center-reduce\npca = functional"),
    ("t2-04-fpca-deriv1", "basis = bspline\norder = 5\nmetric = deriv1\npca = functional"),
    ("t2-05-fpca-deriv2", "basis = bspline\norder = 6\nmetric = deriv2\npca = functional"),
];

const TABLE3: &[(&str, &str)] = &[
    ("t3-09-deriv1-holes", "basis = bspline\norder = 5\nmetric = deriv1"),
    ("t3-10-deriv2-holes", "basis = bspline\norder = 6\nmetric = deriv2"),
];

const TABLE3_MLP: &[(&str, &str)] = &[
    ("t3m-02-fpca-holes", "basis = bspline\norder = 4\npca = functional"),
    ("t3m-03-fpca-center-reduce-holes", "basis = bspline\norder = 4\npreproc = center-reduce\npca = functional"),
];

const TABLE4: &[(&str, &str)] = &[
    ("t4-01-mean-impute", "basis = raw\nimpute = mean\npca = classical"),
    ("t4-02-knn-impute", "basis = raw\nimpute = knn\npca = classical"),
];

const TABLE5: &[(&str, &str)] = &[
    ("t5-01-expert-mean-impute", "basis = raw\nexpert-scale = on\nimpute = mean\npca = classical"),
    ("t5-02-expert-knn-impute", "basis = raw\nexpert-scale = on\nimpute = knn\npca = classical"),
];

/// Suite identifiers and what they contain.
pub const SUITES: &[(&str, &str)] = &[
    ("table1", "RBF network, ten preprocessing chains on complete spectra"),
    ("table2", "perceptron on whitened (functional) PCA scores, complete spectra"),
    ("table3", "RBF network on derivatives, spectra with missing samples"),
    ("table3-mlp", "perceptron on functional PCA, spectra with missing samples"),
    ("table4", "perceptron after mean or k-NN imputation and PCA"),
    ("table5", "perceptron after per-spectrum scaling, imputation and PCA"),
];

/// Default deletion fraction of the missing-data tables.
pub const DEFAULT_DROP_FRACTION: f64 = 0.1;

/// Rows of suite `id` with the master `seed`. `drop_fraction` overrides the
/// deletion fraction of the missing-data tables and is ignored by the
/// complete-data ones.
pub fn suite(id: &str, seed: u64, drop_fraction: Option<f64>) -> Result<Vec<ExperimentSpec>> {
    let (rows, model, holes) = match id {
        "table1" => (TABLE1, RBFN, false),
        "table2" => (TABLE2, MLP, false),
        "table3" => (TABLE3, RBFN, true),
        "table3-mlp" => (TABLE3_MLP, MLP, true),
        "table4" => (TABLE4, MLP, true),
        "table5" => (TABLE5, MLP, true),
        other => {
            return Err(Error::Config(format!(
                "unknown suite `{other}` (expected one of {})",
                SUITES.iter().map(|s| s.0).collect::<Vec<_>>().join(", ")
            )))
        }
    };
    let fraction = if holes { drop_fraction.unwrap_or(DEFAULT_DROP_FRACTION) } else { 0.0 };
    rows.iter()
        .map(|(name, body)| {
            ExperimentSpec::parse(&format!(
                "name = {name}\n{body}\n{model}seed = {seed}\ndrop-fraction = {fraction}\n"
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::spec::ModelKind;

    #[test]
    fn table_sizes() {
        let sizes: Vec<usize> = SUITES.iter().map(|(id, _)| suite(id, 1, None).unwrap().len()).collect();
        assert_eq!(sizes, vec![10, 5, 2, 2, 2, 2]);
    }

    #[test]
    fn holes_only_in_missing_data_tables() {
        assert!(suite("table1", 1, Some(0.3)).unwrap().iter().all(|s| s.drop_fraction == 0.0));
        assert!(suite("table3", 1, Some(0.3)).unwrap().iter().all(|s| s.drop_fraction == 0.3));
        assert!(suite("table4", 1, None).unwrap().iter().all(|s| s.drop_fraction == 0.1));
    }

    #[test]
    fn perceptron_rows_whiten() {
        for s in suite("table2", 1, None).unwrap() {
            assert_eq!(s.model, ModelKind::Mlp);
            assert!(s.whiten);
            assert_eq!(s.max_components, 18);
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(suite("table9", 1, None), Err(Error::Config(_))));
    }
}
