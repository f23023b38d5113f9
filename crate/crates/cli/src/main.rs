//! `fdnet`: basis representations, single experiments and experiment
//! suites on sampled-curve regression data.

mod manifest;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use fdnet_core::fpca::fit_pca;
use fdnet_core::represent::{fit_all, fit_with_hat, select_basis_size};
use fdnet_core::selection::{run_on_dataset, suite, write_csv, write_text, write_timings, BasisCache, ExperimentReport, SUITES};
use fdnet_core::transforms::derive;
use fdnet_core::{Basis, BasisKind, DVector, Dataset, DatasetFormat, ExperimentSpec, SplitMode};

use manifest::RunManifest;
use output::write_atomic;

#[derive(Parser, Debug)]
#[command(name = "fdnet", version, about = "Functional regression on sampled curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Data file; defaults to `tecator.csv` inside the data directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory searched for the default data file.
    #[arg(long, env = "FDNET_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "tecator-grid")]
    format: String,
}

impl DataArgs {
    fn path(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.data_dir.join("tecator.csv"))
    }

    fn load(&self) -> Result<(Dataset, PathBuf)> {
        let path = self.path();
        let format = DatasetFormat::from_str(&self.format)?;
        let data = Dataset::load(&path, format).with_context(|| format!("loading {}", path.display()))?;
        Ok((data, path))
    }
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    /// Number of observations held out for testing.
    #[arg(long, default_value_t = 43)]
    test_size: usize,
    #[arg(long, value_enum, default_value_t = SplitKind::Fixed)]
    split: SplitKind,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SplitKind {
    /// Last `test-size` observations form the test set.
    Fixed,
    /// Seeded random test set.
    Random,
}

impl SplitArgs {
    fn mode(&self, seed: u64) -> SplitMode {
        match self.split {
            SplitKind::Fixed => SplitMode::FixedOrder,
            SplitKind::Random => SplitMode::Random { seed },
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BasisFamily {
    Bspline,
    Fourier,
}

/// Candidate size and its leave-one-out score, or the failure message.
type SizeScores = Vec<(usize, String)>;

#[derive(Args, Debug, Clone)]
struct BasisArgs {
    #[arg(long, value_enum, default_value_t = BasisFamily::Bspline)]
    basis: BasisFamily,
    /// B-spline order (degree + 1).
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// `loo` or a fixed number of basis functions.
    #[arg(long, default_value = "loo")]
    basis_size: String,
}

impl BasisArgs {
    fn kind(&self) -> BasisKind {
        match self.basis {
            BasisFamily::Bspline => BasisKind::BSpline { order: self.order },
            BasisFamily::Fourier => BasisKind::Fourier,
        }
    }

    /// Chosen basis and, under leave-one-out selection, the score table.
    fn select(&self, data: &Dataset) -> Result<(Arc<Basis>, SizeScores)> {
        let kind = self.kind();
        if self.basis_size == "loo" {
            let sel = select_basis_size(data, kind, &kind.candidate_sizes(data.min_len()))?;
            let scores = sel
                .scores
                .iter()
                .map(|c| match &c.outcome {
                    Ok(s) => (c.size, format!("{s:.10e}")),
                    Err(e) => (c.size, format!("skipped: {}", e.replace(',', ";"))),
                })
                .collect();
            Ok((Basis::new(sel.chosen)?, scores))
        } else {
            let q: usize = self.basis_size.parse().context("--basis-size expects `loo` or an integer")?;
            Ok((Basis::new(kind.with_size(data.domain(), q)?)?, Vec::new()))
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit every curve on a basis chosen by leave-one-out; write coordinates,
    /// the selection scores and the fitted values at the samples.
    Represent {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        basis: BasisArgs,
        /// Delete this fraction of each curve's samples first.
        #[arg(long, default_value_t = 0.0)]
        drop_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment described by a key-value spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Overrides the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the spec's deletion fraction.
        #[arg(long)]
        drop_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every row of a predefined table.
    Suite {
        /// table1, table2, table3, table3-mlp, table4 or table5.
        table: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deletion fraction of the missing-data tables.
        #[arg(long)]
        drop_fraction: Option<f64>,
        /// Only run rows whose name contains this text.
        #[arg(long)]
        only: Option<String>,
        /// Overrides restarts of the final perceptron fit (quick runs).
        #[arg(long)]
        restarts: Option<usize>,
        /// Overrides restarts per cross-validation cell (quick runs).
        #[arg(long)]
        cv_restarts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Delete a random fraction of every curve's samples and write the result
    /// in the generic-pairs format.
    MakeHoles {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.1)]
        drop_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-ready curve files: samples, spline fits, derivatives and
    /// PCA variance profiles.
    Curves {
        #[command(flatten)]
        data: DataArgs,
        /// Number of curves to export.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Points of the dense evaluation grid.
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the predefined suites.
    Suites,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Represent {
            data,
            basis,
            drop_fraction,
            seed,
            out,
        } => represent(&data, &basis, drop_fraction, seed, &out),
        Command::Experiment {
            spec,
            data,
            split,
            seed,
            drop_fraction,
            out,
        } => experiment(&spec, &data, &split, seed, drop_fraction, &out),
        Command::Suite {
            table,
            data,
            split,
            seed,
            drop_fraction,
            only,
            restarts,
            cv_restarts,
            out,
        } => run_suite(&table, &data, &split, seed, drop_fraction, only.as_deref(), restarts, cv_restarts, &out),
        Command::MakeHoles {
            data,
            drop_fraction,
            seed,
            out,
        } => {
            let (dataset, _) = data.load()?;
            let holes = dataset.drop_random(drop_fraction, fdnet_core::seed::derive(seed, "holes", 0))?;
            let mut buf = Vec::new();
            holes.write_pairs(&mut buf)?;
            write_atomic(&out, &buf)
        }
        Command::Curves { data, count, points, out } => curves(&data, count, points, &out),
        Command::Suites => {
            for (id, what) in SUITES {
                println!("{id:<12} {what}");
            }
            Ok(())
        }
    }
}

fn represent(data: &DataArgs, basis: &BasisArgs, drop_fraction: f64, seed: u64, out: &Path) -> Result<()> {
    let (mut dataset, path) = data.load()?;
    if drop_fraction > 0.0 {
        dataset = dataset.drop_random(drop_fraction, fdnet_core::seed::derive(seed, "holes", 0))?;
    }
    fs::create_dir_all(out)?;
    let (chosen, scores) = basis.select(&dataset).context("represent: basis selection")?;
    let mut loo = String::from("size,loo_score\n");
    for (q, s) in &scores {
        loo.push_str(&format!("{q},{s}\n"));
    }
    write_atomic(&out.join("loo.csv"), loo.as_bytes())?;

    let mut alpha = String::new();
    let mut beta = String::new();
    let mut fitted = Vec::with_capacity(dataset.len());
    for f in dataset.functions() {
        let fit = fit_with_hat(f, &chosen).with_context(|| format!("represent: function {}", f.id()))?;
        let r = &fit.representation;
        alpha.push_str(&row(f.id(), r.alpha().iter()));
        beta.push_str(&row(f.id(), r.beta().iter()));
        let ys: Vec<f64> = f.xs().iter().map(|&x| r.eval(x)).collect::<fdnet_core::Result<_>>()?;
        fitted.push(fdnet_core::SampledFunction::from_xy(f.id(), &f.xs(), &ys)?);
    }
    write_atomic(&out.join("alpha.csv"), alpha.as_bytes())?;
    write_atomic(&out.join("beta.csv"), beta.as_bytes())?;
    let recon = Dataset::new(fitted, dataset.targets().to_vec(), dataset.domain())?;
    let mut buf = Vec::new();
    recon.write_pairs(&mut buf)?;
    write_atomic(&out.join("reconstruction.txt"), &buf)?;

    let order = match basis.kind() {
        BasisKind::BSpline { order } => format!("B-spline order {order}"),
        BasisKind::Fourier => "Fourier".into(),
    };
    let summary = format!("basis: {order}\nselected q: {}\nfunctions: {}\n", chosen.dim(), dataset.len());
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    RunManifest::new("represent", &path, &data.format, seed, out)
        .with("basis-size", &basis.basis_size)
        .with("drop-fraction", &drop_fraction.to_string())
        .write()
}

fn row<'a>(id: usize, values: impl Iterator<Item = &'a f64>) -> String {
    let mut s = id.to_string();
    for v in values {
        s.push_str(&format!(",{v:e}"));
    }
    s.push('\n');
    s
}

fn experiment(spec_path: &Path, data: &DataArgs, split: &SplitArgs, seed: Option<u64>, drop: Option<f64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let mut spec = ExperimentSpec::parse(&text).with_context(|| format!("spec {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(d) = drop {
        spec.drop_fraction = d;
    }
    spec.validate()?;
    let (dataset, path) = data.load()?;
    fs::create_dir_all(out)?;
    let report = run_on_dataset(&spec, &dataset, split.test_size, split.mode(spec.seed), None)?;
    write_reports(out, std::slice::from_ref(&report))?;
    write_atomic(&out.join(format!("{}.spec", spec.name)), spec.to_string().as_bytes())?;
    print_report(&report);
    RunManifest::new("experiment", &path, &data.format, spec.seed, out)
        .with("config", &spec_path.display().to_string())
        .with("split", &split.mode(spec.seed).to_string())
        .with("test-size", &split.test_size.to_string())
        .with_seeds(spec.seed)
        .write()
}

#[allow(clippy::too_many_arguments)]
fn run_suite(
    table: &str,
    data: &DataArgs,
    split: &SplitArgs,
    seed: u64,
    drop: Option<f64>,
    only: Option<&str>,
    restarts: Option<usize>,
    cv_restarts: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut specs = suite(table, seed, drop)?;
    if let Some(filter) = only {
        specs.retain(|s| s.name.contains(filter));
        if specs.is_empty() {
            bail!("no row of {table} matches `{filter}`");
        }
    }
    for s in &mut specs {
        if let Some(r) = restarts {
            s.restarts = r;
        }
        if let Some(r) = cv_restarts {
            s.cv_restarts = r;
        }
        s.validate()?;
    }
    let (dataset, path) = data.load()?;
    let rows_dir = out.join("rows");
    let spec_dir = out.join("specs");
    fs::create_dir_all(&rows_dir)?;
    fs::create_dir_all(&spec_dir)?;
    for spec in &specs {
        write_atomic(&spec_dir.join(format!("{}.spec", spec.name)), spec.to_string().as_bytes())?;
    }
    // rows run concurrently; each is seeded on its own, so results do not
    // depend on scheduling, and reports keep suite order
    let cache = BasisCache::new();
    let reports = specs
        .par_iter()
        .map(|spec| -> Result<ExperimentReport> {
            log::info!("running {}", spec.name);
            let report = run_on_dataset(spec, &dataset, split.test_size, split.mode(seed), Some(&cache))?;
            print_report(&report);
            let mut buf = Vec::new();
            write_text(&mut buf, std::slice::from_ref(&report))?;
            write_atomic(&rows_dir.join(format!("{}.txt", spec.name)), &buf)?;
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    write_reports(out, &reports)?;
    let mut manifest = RunManifest::new("suite", &path, &data.format, seed, out)
        .with("table", table)
        .with("split", &split.mode(seed).to_string())
        .with("test-size", &split.test_size.to_string())
        .with_seeds(seed);
    if let Some(d) = drop {
        manifest = manifest.with("drop-fraction", &d.to_string());
    }
    if let Some(f) = only {
        manifest = manifest.with("only", f);
    }
    if let Some(r) = restarts {
        manifest = manifest.with("restarts", &r.to_string());
    }
    if let Some(r) = cv_restarts {
        manifest = manifest.with("cv-restarts", &r.to_string());
    }
    manifest.write()
}

fn write_reports(out: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut text = Vec::new();
    write_text(&mut text, reports)?;
    write_atomic(&out.join("report.txt"), &text)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, reports)?;
    write_atomic(&out.join("report.csv"), &csv)?;
    let mut timings = Vec::new();
    write_timings(&mut timings, reports)?;
    write_atomic(&out.join("timings.csv"), &timings)
}

fn print_report(r: &ExperimentReport) {
    println!("{:<34} {:<60} test RMSE {:.4}  ({:.1} s)", r.name, r.selected(), r.test_rmse, r.wall_time_secs);
}

fn curves(data: &DataArgs, count: usize, points: usize, out: &Path) -> Result<()> {
    let (dataset, path) = data.load()?;
    fs::create_dir_all(out)?;
    let shown = dataset.subset(&(0..count.min(dataset.len())).collect::<Vec<_>>());
    let (a, b) = dataset.domain();
    let grid: Vec<f64> = (0..points).map(|j| a + (b - a) * j as f64 / (points - 1).max(1) as f64).collect();

    let mut samples = String::from("id,x,y\n");
    for f in shown.functions() {
        for p in f.points() {
            samples.push_str(&format!("{},{},{}\n", f.id(), p.x, p.y));
        }
    }
    write_atomic(&out.join("samples.csv"), samples.as_bytes())?;

    for (order, name) in [(4, "fit_order4"), (5, "deriv1_order5"), (6, "deriv2_order6")] {
        let kind = BasisKind::BSpline { order };
        let sel = select_basis_size(&dataset, kind, &kind.candidate_sizes(dataset.min_len()))?;
        let basis = Basis::new(sel.chosen)?;
        let s = order - 4;
        let mut body = String::from("id,x,value\n");
        for (f, r) in shown.functions().iter().zip(fit_all(&shown, &basis)?) {
            let d = derive(&r, s)?;
            for &x in &grid {
                body.push_str(&format!("{},{x},{}\n", f.id(), d.eval(x)?));
            }
        }
        write_atomic(&out.join(format!("{name}_q{}.csv", basis.dim())), body.as_bytes())?;
    }

    let raw: Vec<_> = dataset
        .functions()
        .iter()
        .map(|f| DVector::from_vec(f.ys()))
        .collect();
    let same_len = raw.iter().all(|v| v.len() == raw[0].len());
    if same_len {
        let pca = fit_pca(&raw, 1, false)?;
        let mut body = String::from("component,ratio,cumulative\n");
        let mut cum = 0.0;
        for (j, r) in pca.explained_variance_ratio().iter().enumerate().take(30) {
            cum += r;
            body.push_str(&format!("{},{r:e},{cum:e}\n", j + 1));
        }
        write_atomic(&out.join("pca_variance.csv"), body.as_bytes())?;
        let mut first = String::from("x,mean,component1\n");
        let xs = dataset.functions()[0].xs();
        for (j, x) in xs.iter().enumerate() {
            first.push_str(&format!("{x},{},{}\n", pca.mean()[j], pca.components()[(j, 0)]));
        }
        write_atomic(&out.join("pca_first_component.csv"), first.as_bytes())?;
    }
    RunManifest::new("curves", &path, &data.format, 0, out)
        .with("count", &count.to_string())
        .with("points", &points.to_string())
        .write()
}
