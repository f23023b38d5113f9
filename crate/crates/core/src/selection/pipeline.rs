//! End-to-end experiment: representation, fold-wise preprocessing,
//! cross-validated model selection on the training set, refit, and a single
//! evaluation on the held-out test set.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::report::ExperimentReport;
use super::spec::{Components, ExperimentSpec, Impute, InputKind, ModelKind, PcaKind, Preproc, SizeChoice};
use super::{grid_argmin, make_folds, rmse, FoldData, FoldPlan};
use crate::basis::{Basis, BasisKind};
use crate::error::{Error, Result};
use crate::fdata::{Dataset, SplitMode};
use crate::fpca::{fit_pca, FpcaModel};
use crate::imputation::{expert_scale, mask_dataset, KnnImputer, MaskedVector, MeanImputer};
use crate::mlp::{select_meta, train_scaled, MetaGrid, ScaledMlp, TrainConfig};
use crate::rbfn::{median_pairwise_distance, select_centers, train_ols, OlsConfig, RbfnModel};
use crate::represent::{fit_all, select_basis_size, SizeSelection};
use crate::seed;
use crate::transforms::{FunctionalScaler, SemiMetric};

/// Test data behind an access counter: the pipeline checks that selection
/// finished without touching it.
#[derive(Debug)]
pub struct IsolatedTestSet {
    data: Dataset,
    accesses: AtomicUsize,
}

impl IsolatedTestSet {
    pub fn new(data: Dataset) -> Self {
        Self {
            data,
            accesses: AtomicUsize::new(0),
        }
    }

    /// Counted access to the test observations.
    pub fn open(&self) -> &Dataset {
        self.accesses.fetch_add(1, Ordering::SeqCst);
        &self.data
    }

    pub fn accesses(&self) -> usize {
        self.accesses.load(Ordering::SeqCst)
    }
}

/// Leave-one-out basis selections shared between experiments on the same
/// training functions.
#[derive(Debug, Default)]
pub struct BasisCache {
    entries: Mutex<HashMap<(BasisKind, u64), SizeSelection>>,
}

fn fingerprint(data: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    data.domain().0.to_bits().hash(&mut h);
    data.domain().1.to_bits().hash(&mut h);
    for f in data.functions() {
        f.id().hash(&mut h);
        for p in f.points() {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

impl BasisCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn select(&self, data: &Dataset, kind: BasisKind) -> Result<SizeSelection> {
        let key = (kind, fingerprint(data));
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let chosen = select_basis_size(data, kind, &kind.candidate_sizes(data.min_len()))?;
        self.entries.lock().expect("cache lock").insert(key, chosen.clone());
        Ok(chosen)
    }
}

/// Per-observation features that need no fitting across observations.
#[derive(Debug, Clone)]
enum Base {
    Vectors(Vec<DVector<f64>>),
    Masked(Vec<MaskedVector>),
}

impl Base {
    fn len(&self) -> usize {
        match self {
            Self::Vectors(v) => v.len(),
            Self::Masked(v) => v.len(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Vectors(v) => v.first().map_or(0, |x| x.len()),
            Self::Masked(v) => v.first().map_or(0, |x| x.len()),
        }
    }

    fn subset(&self, idx: &[usize]) -> Self {
        match self {
            Self::Vectors(v) => Self::Vectors(idx.iter().map(|&i| v[i].clone()).collect()),
            Self::Masked(v) => Self::Masked(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

struct Extractor {
    basis: Option<Arc<Basis>>,
    grid: Vec<f64>,
    scaler: Option<FunctionalScaler>,
    metric: SemiMetric,
    expert: bool,
}

impl Extractor {
    fn extract(&self, data: &Dataset) -> Result<Base> {
        match &self.basis {
            Some(basis) => {
                let reps = fit_all(data, basis)?;
                reps.iter()
                    .map(|r| match &self.scaler {
                        Some(s) => self.metric.embed(&s.center_reduce(r)?),
                        None => self.metric.embed(r),
                    })
                    .collect::<Result<_>>()
                    .map(Base::Vectors)
            }
            None => {
                let masks = mask_dataset(data, &self.grid)?;
                if self.expert {
                    masks.iter().map(expert_scale).collect::<Result<_>>().map(Base::Masked)
                } else {
                    Ok(Base::Masked(masks))
                }
            }
        }
    }
}

enum Imputer {
    None,
    Mean(MeanImputer),
    Knn(KnnImputer),
}

/// Preprocessing fitted on one set of observations: imputation, then PCA
/// (scores truncated to `n_out`, optionally whitened).
struct Transformer {
    imputer: Imputer,
    pca: Option<FpcaModel>,
    whiten: bool,
}

impl Transformer {
    fn fit(base: &Base, spec: &ExperimentSpec, knn_k: Option<usize>, n_out: usize) -> Result<(Self, Vec<DVector<f64>>)> {
        let (imputer, vectors) = match base {
            Base::Vectors(v) => (Imputer::None, v.clone()),
            Base::Masked(m) => match spec.impute {
                Impute::None => (Imputer::None, complete(m)?),
                Impute::Mean => {
                    let imp = MeanImputer::fit(m)?;
                    let v = m.iter().map(|x| imp.transform(x)).collect::<Result<_>>()?;
                    (Imputer::Mean(imp), v)
                }
                Impute::Knn => {
                    let k = knn_k.ok_or_else(|| Error::Contract("k-NN imputation without k".into()))?;
                    let imp = KnnImputer::new(m.clone(), k)?;
                    let v = imp.impute_reference()?;
                    (Imputer::Knn(imp), v)
                }
            },
        };
        let pca = match spec.pca {
            PcaKind::None => None,
            PcaKind::Classical => Some(fit_pca(&vectors, n_out, true)?),
            PcaKind::Functional => Some(fit_pca(&vectors, n_out, false)?),
        };
        let t = Self {
            imputer,
            pca,
            whiten: spec.whiten,
        };
        let out = t.project(vectors)?;
        Ok((t, out))
    }

    fn project(&self, vectors: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>> {
        match &self.pca {
            None => Ok(vectors),
            Some(p) => vectors.iter().map(|v| p.scores(v, self.whiten)).collect(),
        }
    }

    fn apply(&self, base: &Base) -> Result<Vec<DVector<f64>>> {
        let vectors = match (base, &self.imputer) {
            (Base::Vectors(v), _) => v.clone(),
            (Base::Masked(m), Imputer::None) => complete(m)?,
            (Base::Masked(m), Imputer::Mean(imp)) => m.iter().map(|x| imp.transform(x)).collect::<Result<_>>()?,
            (Base::Masked(m), Imputer::Knn(imp)) => m
                .iter()
                .enumerate()
                .map(|(i, x)| imp.impute(x, None, i))
                .collect::<Result<_>>()?,
        };
        self.project(vectors)
    }
}

fn complete(m: &[MaskedVector]) -> Result<Vec<DVector<f64>>> {
    m.iter()
        .enumerate()
        .map(|(i, x)| {
            if x.observed().iter().all(|&o| o) {
                Ok(x.values().clone())
            } else {
                Err(Error::Config(format!(
                    "observation {i} has missing samples on the common grid; set an imputation"
                )))
            }
        })
        .collect()
}

fn truncate(v: &[DVector<f64>], k: usize) -> Vec<DVector<f64>> {
    v.iter().map(|x| x.rows(0, k).clone_owned()).collect()
}

enum Fitted {
    Rbfn(RbfnModel),
    Mlp(ScaledMlp),
}

impl Fitted {
    fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            Self::Rbfn(m) => m.predict(x),
            Self::Mlp(m) => m.predict(x),
        }
    }
}

/// Winning cell of the model-selection grid.
#[derive(Debug, Clone, Copy)]
struct Choice {
    knn_k: Option<usize>,
    components: usize,
    width: f64,
    ridge: f64,
    centers: usize,
    hidden: usize,
    decay: f64,
    score: f64,
}

fn staged<T>(spec: &ExperimentSpec, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            experiment: spec.name.clone(),
            stage,
            source: Box::new(e),
        },
    })
}

/// Runs `spec` on `train`, touching `test` only for the final evaluation.
pub fn run_experiment(spec: &ExperimentSpec, train: &Dataset, test: &IsolatedTestSet, cache: Option<&BasisCache>) -> Result<ExperimentReport> {
    let started = Instant::now();
    staged(spec, "config", spec.validate())?;
    let mut params: Vec<(String, String)> = Vec::new();

    let (extractor, basis_scores) = staged(spec, "represent", build_extractor(spec, train, cache))?;
    if let Some(b) = &extractor.basis {
        params.push(("q".into(), b.dim().to_string()));
    }
    let base = staged(spec, "represent", extractor.extract(train))?;
    let dim = base.dim();
    let n = base.len();

    let folds = staged(spec, "folds", make_folds(n, spec.cv_folds, seed::derive(spec.seed, "folds", 0)))?;
    let min_fold_train = (0..folds.len()).map(|f| folds.training(f).len()).min().unwrap_or(0);
    let n_pca = match (spec.pca, spec.components) {
        (PcaKind::None, _) => dim,
        (_, Components::Fixed(k)) => {
            if k > dim || k > min_fold_train {
                return staged(
                    spec,
                    "config",
                    Err(Error::Config(format!("{k} components requested from {dim}-dimensional inputs"))),
                );
            }
            k
        }
        (_, Components::Cv) => spec.max_components.min(dim).min(min_fold_train),
    };
    let component_grid: Vec<usize> = match (spec.pca, spec.components) {
        (PcaKind::None, _) | (_, Components::Fixed(_)) => vec![n_pca],
        (_, Components::Cv) => (1..=n_pca).collect(),
    };

    let y = train.targets();
    let choice = staged(spec, "cross-validation", select(spec, &base, y, &folds, n_pca, &component_grid))?;

    let (transformer, inputs) = staged(spec, "refit", Transformer::fit(&base, spec, choice.knn_k, n_pca))?;
    let inputs = truncate(&inputs, choice.components);
    let fitted = staged(spec, "refit", refit(spec, &choice, &inputs, y))?;

    let accesses_before = test.accesses();
    if accesses_before != 0 {
        return staged(
            spec,
            "evaluate",
            Err(Error::Contract(format!("test set accessed {accesses_before} times during selection"))),
        );
    }
    let test_data = test.open();
    let test_rmse = staged(spec, "evaluate", (|| {
        let test_inputs = truncate(&transformer.apply(&extractor.extract(test_data)?)?, choice.components);
        let pred: Vec<f64> = test_inputs.iter().map(|x| fitted.predict(x)).collect::<Result<_>>()?;
        Ok(rmse(&pred, test_data.targets()))
    })())?;

    if let Some(k) = choice.knn_k {
        params.push(("impute-k".into(), k.to_string()));
    }
    if spec.pca != PcaKind::None {
        params.push(("components".into(), choice.components.to_string()));
    } else {
        params.push(("dim".into(), dim.to_string()));
    }
    match spec.model {
        ModelKind::Rbfn => {
            params.push(("width".into(), fmt_num(choice.width)));
            params.push(("ridge".into(), fmt_num(choice.ridge)));
            params.push(("centers".into(), choice.centers.to_string()));
        }
        ModelKind::Mlp => {
            params.push(("hidden".into(), choice.hidden.to_string()));
            params.push(("decay".into(), fmt_num(choice.decay)));
        }
    }
    Ok(ExperimentReport {
        name: spec.name.clone(),
        params,
        cv_mse: choice.score,
        test_rmse,
        seed: spec.seed,
        n_train: n,
        n_test: test_data.len(),
        basis_scores,
        test_accesses_before_evaluation: accesses_before,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Leave-one-out score per candidate size; `None` where the size failed.
type BasisScores = Vec<(usize, Option<f64>)>;

fn build_extractor(spec: &ExperimentSpec, train: &Dataset, cache: Option<&BasisCache>) -> Result<(Extractor, Option<BasisScores>)> {
    match spec.input {
        InputKind::Raw => Ok((
            Extractor {
                basis: None,
                grid: train.common_grid(),
                scaler: None,
                metric: SemiMetric::L2,
                expert: spec.expert_scale,
            },
            None,
        )),
        InputKind::Basis(kind) => {
            let (chosen, scores) = match spec.basis_size {
                SizeChoice::Fixed(q) => (kind.with_size(train.domain(), q)?, None),
                SizeChoice::Loo => {
                    let sel = match cache {
                        Some(c) => c.select(train, kind)?,
                        None => select_basis_size(train, kind, &kind.candidate_sizes(train.min_len()))?,
                    };
                    let scores = sel.scores.iter().map(|c| (c.size, c.outcome.as_ref().ok().copied())).collect();
                    (sel.chosen, Some(scores))
                }
            };
            let basis = Basis::new(chosen)?;
            let scaler = (spec.preproc == Preproc::CenterReduce).then(|| FunctionalScaler::new(&basis));
            Ok((
                Extractor {
                    basis: Some(basis),
                    grid: Vec::new(),
                    scaler,
                    metric: spec.metric,
                    expert: false,
                },
                scores,
            ))
        }
    }
}

fn fold_data(spec: &ExperimentSpec, base: &Base, y: &[f64], folds: &FoldPlan, knn_k: Option<usize>, n_pca: usize) -> Result<Vec<FoldData>> {
    (0..folds.len())
        .map(|f| {
            let tr = folds.training(f);
            let va = folds.validation(f);
            let (t, train_x) = Transformer::fit(&base.subset(&tr), spec, knn_k, n_pca)?;
            let val_x = t.apply(&base.subset(va))?;
            Ok(FoldData {
                train_x,
                train_y: tr.iter().map(|&i| y[i]).collect(),
                val_x,
                val_y: va.iter().map(|&i| y[i]).collect(),
            })
        })
        .collect()
}

fn select(spec: &ExperimentSpec, base: &Base, y: &[f64], folds: &FoldPlan, n_pca: usize, component_grid: &[usize]) -> Result<Choice> {
    let mut best: Option<Choice> = None;
    for knn_k in spec.impute_ks() {
        let data = fold_data(spec, base, y, folds, knn_k, n_pca)?;
        let choice = match spec.model {
            ModelKind::Rbfn => select_rbfn(spec, &data, component_grid, knn_k)?,
            ModelKind::Mlp => {
                let grid = MetaGrid {
                    components: component_grid.to_vec(),
                    hidden: spec.hidden.clone(),
                    decay: spec.decay_grid.clone(),
                    restarts: spec.cv_restarts,
                    max_iter: spec.max_iter,
                };
                let sel = select_meta(&data, &grid, seed::derive(spec.seed, "mlp-cv", 0))?;
                Choice {
                    knn_k,
                    components: sel.best.components,
                    width: 0.0,
                    ridge: 0.0,
                    centers: 0,
                    hidden: sel.best.hidden,
                    decay: sel.best.decay,
                    score: sel.score,
                }
            }
        };
        log::info!("{}: k-NN k {:?} gives CV mean squared error {:.6}", spec.name, knn_k, choice.score);
        if best.is_none_or(|b| choice.score < b.score) {
            best = Some(choice);
        }
    }
    best.ok_or_else(|| Error::Training("empty selection grid".into()))
}

fn select_rbfn(spec: &ExperimentSpec, data: &[FoldData], component_grid: &[usize], knn_k: Option<usize>) -> Result<Choice> {
    let mut cells = Vec::new();
    for &c in component_grid {
        for &w in &spec.width_grid {
            for &r in &spec.ridge_grid {
                cells.push((c, w, r));
            }
        }
    }
    let results: Vec<Result<(usize, f64)>> = cells
        .par_iter()
        .map(|&(c, w, r)| {
            let truncated: Vec<FoldData> = data.iter().map(|d| d.truncated(c)).collect::<Result<_>>()?;
            let sel = select_centers(&truncated, w, r, spec.max_centers, spec.metric)?;
            Ok((sel.count, sel.cv_curve[sel.count - 1]))
        })
        .collect();
    let mut scored = Vec::with_capacity(cells.len());
    for r in results {
        scored.push(r?);
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let i = grid_argmin(&scores).ok_or_else(|| Error::Training("no finite cross-validation score".into()))?;
    let (components, width, ridge) = cells[i];
    Ok(Choice {
        knn_k,
        components,
        width,
        ridge,
        centers: scored[i].0,
        hidden: 0,
        decay: 0.0,
        score: scored[i].1,
    })
}

fn refit(spec: &ExperimentSpec, choice: &Choice, inputs: &[DVector<f64>], y: &[f64]) -> Result<Fitted> {
    match spec.model {
        ModelKind::Rbfn => {
            let width = choice.width * median_pairwise_distance(inputs);
            let width = if width > 0.0 { width } else { choice.width };
            let cap = choice.centers.min(inputs.len());
            let path = train_ols(
                inputs,
                y,
                OlsConfig {
                    width,
                    ridge: choice.ridge,
                    max_centers: cap,
                },
                spec.metric,
            )?;
            Ok(Fitted::Rbfn(path.model(path.len().min(cap))?))
        }
        ModelKind::Mlp => {
            let (net, _) = train_scaled(
                inputs,
                y,
                TrainConfig {
                    hidden: choice.hidden,
                    decay: choice.decay,
                    restarts: spec.restarts,
                    max_iter: spec.max_iter,
                    seed: seed::derive(spec.seed, "mlp-final", 0),
                },
            )?;
            Ok(Fitted::Mlp(net))
        }
    }
}

/// Applies the spec's sample deletion (seeded by the spec seed, identical
/// for every experiment sharing it), splits, and runs the experiment.
pub fn run_on_dataset(spec: &ExperimentSpec, full: &Dataset, test_size: usize, split: SplitMode, cache: Option<&BasisCache>) -> Result<ExperimentReport> {
    let data = if spec.drop_fraction > 0.0 {
        staged(spec, "make-holes", full.drop_random(spec.drop_fraction, seed::derive(spec.seed, "holes", 0)))?
    } else {
        full.clone()
    };
    let (train, test) = staged(spec, "split", data.split(test_size, split))?;
    run_experiment(spec, &train, &IsolatedTestSet::new(test), cache)
}
