//! Sampled functional observations and their file carriers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// Wavelength range and channel count of the Tecator spectra.
pub const TECATOR_DOMAIN: (f64, f64) = (850.0, 1050.0);
pub const TECATOR_CHANNELS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
}

/// One observation: `(x, y)` pairs sorted by strictly increasing `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    id: usize,
    points: Vec<SamplePoint>,
}

impl SampledFunction {
    pub fn new(id: usize, points: Vec<SamplePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation(format!("function {id} has no samples")));
        }
        for (j, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::Validation(format!(
                    "function {id}: non-finite sample at position {j}"
                )));
            }
        }
        for (j, w) in points.windows(2).enumerate() {
            if w[1].x <= w[0].x {
                return Err(Error::Validation(format!(
                    "function {id}: abscissas not strictly increasing at position {} ({} then {})",
                    j + 1,
                    w[0].x,
                    w[1].x
                )));
            }
        }
        Ok(Self { id, points })
    }

    pub fn from_xy(id: usize, xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Validation(format!(
                "function {id}: {} abscissas but {} values",
                xs.len(),
                ys.len()
            )));
        }
        let points = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| SamplePoint { x, y })
            .collect();
        Self::new(id, points)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    /// Removes `round(fraction * m)` samples (half rounds up), chosen uniformly
    /// without replacement by a generator seeded with `seed`. The kept samples
    /// stay in order.
    pub fn drop_random(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Argument(format!(
                "drop fraction {fraction} outside [0, 1)"
            )));
        }
        let m = self.points.len();
        let removed = (fraction * m as f64 + 0.5).floor() as usize;
        if removed >= m {
            return Err(Error::Argument(format!(
                "dropping {removed} of {m} samples leaves nothing"
            )));
        }
        let mut rng = seed::rng(seed);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let mut drop = vec![false; m];
        for &j in &order[..removed] {
            drop[j] = true;
        }
        let points = self
            .points
            .iter()
            .zip(&drop)
            .filter(|(_, &d)| !d)
            .map(|(p, _)| *p)
            .collect();
        Ok(Self {
            id: self.id,
            points,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One row per sample: 100 absorbances on the 850–1050 nm grid, then
    /// either water, fat and protein (fat is the target) or a single target.
    TecatorGrid,
    /// One row per sample: the target followed by `x y` pairs. An optional
    /// `@domain a b` line fixes the domain; `#` starts a comment.
    GenericPairs,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tecator-grid" => Ok(Self::TecatorGrid),
            "generic-pairs" => Ok(Self::GenericPairs),
            other => Err(Error::Argument(format!("unknown data format `{other}`"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TecatorGrid => "tecator-grid",
            Self::GenericPairs => "generic-pairs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// First `n - test_size` observations train, the rest test.
    FixedOrder,
    Random { seed: u64 },
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FixedOrder => f.write_str("fixed-order"),
            Self::Random { seed } => write!(f, "random(seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    functions: Vec<SampledFunction>,
    targets: Vec<f64>,
    domain: (f64, f64),
}

impl Dataset {
    pub fn new(functions: Vec<SampledFunction>, targets: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        if !(a < b) {
            return Err(Error::Validation(format!("empty domain [{a}, {b}]")));
        }
        if functions.len() != targets.len() {
            return Err(Error::Validation(format!(
                "{} functions but {} targets",
                functions.len(),
                targets.len()
            )));
        }
        for f in &functions {
            let first = f.points[0].x;
            let last = f.points[f.points.len() - 1].x;
            if first < a || last > b {
                return Err(Error::Validation(format!(
                    "function {} has abscissas outside [{a}, {b}]",
                    f.id
                )));
            }
        }
        if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::Validation(format!("non-finite target {t}")));
        }
        Ok(Self {
            functions,
            targets,
            domain,
        })
    }

    pub fn load(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, format, path)
    }

    pub fn parse(text: &str, format: DatasetFormat, origin: &Path) -> Result<Self> {
        match format {
            DatasetFormat::TecatorGrid => parse_tecator(text, origin),
            DatasetFormat::GenericPairs => parse_pairs(text, origin),
        }
    }

    /// Writes the dataset in the generic-pairs format.
    pub fn write_pairs<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "@domain {:?} {:?}", self.domain.0, self.domain.1)?;
        for (f, t) in self.functions.iter().zip(&self.targets) {
            write!(out, "{t:?}")?;
            for p in &f.points {
                write!(out, ",{:?},{:?}", p.x, p.y)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn functions(&self) -> &[SampledFunction] {
        &self.functions
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.functions.iter().map(|f| f.id).collect()
    }

    pub fn min_len(&self) -> usize {
        self.functions.iter().map(|f| f.len()).min().unwrap_or(0)
    }

    /// Applies [`SampledFunction::drop_random`] to every function, each with a
    /// seed derived from `seed` and the function id.
    pub fn drop_random(&self, fraction: f64, seed: u64) -> Result<Self> {
        let functions = self
            .functions
            .iter()
            .map(|f| f.drop_random(fraction, seed::derive(seed, "holes", f.id as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            functions,
            targets: self.targets.clone(),
            domain: self.domain,
        })
    }

    pub fn split(&self, test_size: usize, mode: SplitMode) -> Result<(Self, Self)> {
        let n = self.len();
        if test_size >= n {
            return Err(Error::Argument(format!(
                "test size {test_size} must be smaller than dataset size {n}"
            )));
        }
        let mut is_test = vec![false; n];
        match mode {
            SplitMode::FixedOrder => is_test[n - test_size..].iter_mut().for_each(|t| *t = true),
            SplitMode::Random { seed } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut seed::rng(seed::derive(seed, "split", 0)));
                for &i in &order[..test_size] {
                    is_test[i] = true;
                }
            }
        }
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let test: Vec<usize> = (0..n).filter(|&i| is_test[i]).collect();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Observations at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            functions: positions.iter().map(|&i| self.functions[i].clone()).collect(),
            targets: positions.iter().map(|&i| self.targets[i]).collect(),
            domain: self.domain,
        }
    }

    /// Sorted union of all abscissas.
    pub fn common_grid(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.functions.iter().flat_map(|f| f.xs()).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    Dataset::load(path, format)
}

/// Abscissas of the uniform Tecator channel grid.
pub fn tecator_grid() -> Vec<f64> {
    let (a, b) = TECATOR_DOMAIN;
    let step = (b - a) / (TECATOR_CHANNELS - 1) as f64;
    (0..TECATOR_CHANNELS).map(|j| a + j as f64 * step).collect()
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

fn parse_numbers(line: &str, lineno: usize, origin: &Path) -> Result<Vec<f64>> {
    tokens(line)
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

fn is_blank(line: &str) -> bool {
    let l = line.trim();
    l.is_empty() || l.starts_with('#')
}

fn parse_tecator(text: &str, origin: &Path) -> Result<Dataset> {
    let grid = tecator_grid();
    let mut functions = Vec::new();
    let mut targets = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if is_blank(line) {
            continue;
        }
        let lineno = k + 1;
        let values = parse_numbers(line, lineno, origin)?;
        let target = match values.len() {
            n if n == TECATOR_CHANNELS + 3 => values[TECATOR_CHANNELS + 1],
            n if n == TECATOR_CHANNELS + 1 => values[TECATOR_CHANNELS],
            n => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: format!(
                        "expected {} absorbances plus 1 or 3 targets, found {n} values",
                        TECATOR_CHANNELS
                    ),
                })
            }
        };
        let id = functions.len();
        functions.push(SampledFunction::from_xy(id, &grid, &values[..TECATOR_CHANNELS])?);
        targets.push(target);
    }
    if functions.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    Dataset::new(functions, targets, TECATOR_DOMAIN)
}

fn parse_pairs(text: &str, origin: &Path) -> Result<Dataset> {
    let mut domain = None;
    let mut functions = Vec::new();
    let mut targets = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("@domain") {
            let v = parse_numbers(rest, lineno, origin)?;
            if v.len() != 2 {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: "@domain needs two bounds".into(),
                });
            }
            domain = Some((v[0], v[1]));
            continue;
        }
        if is_blank(line) {
            continue;
        }
        let values = parse_numbers(line, lineno, origin)?;
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message: "expected a target followed by x,y pairs".into(),
            });
        }
        let xs: Vec<f64> = values[1..].iter().step_by(2).copied().collect();
        let ys: Vec<f64> = values[2..].iter().step_by(2).copied().collect();
        let id = functions.len();
        let f = SampledFunction::from_xy(id, &xs, &ys).map_err(|e| match e {
            Error::Validation(message) => Error::Parse {
                path: origin.to_path_buf(),
                line: lineno,
                message,
            },
            other => other,
        })?;
        functions.push(f);
        targets.push(values[0]);
    }
    if functions.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    let domain = domain.unwrap_or_else(|| {
        let lo = functions.iter().map(|f| f.points[0].x).fold(f64::INFINITY, f64::min);
        let hi = functions
            .iter()
            .map(|f| f.points[f.len() - 1].x)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    Dataset::new(functions, targets, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn here() -> &'static Path {
        Path::new("<test>")
    }

    fn ramp(id: usize, m: usize) -> SampledFunction {
        let xs: Vec<f64> = (0..m).map(|j| j as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        SampledFunction::from_xy(id, &xs, &ys).unwrap()
    }

    fn tecator_text(rows: usize) -> String {
        (0..rows)
            .map(|i| {
                let mut v: Vec<String> = (0..100).map(|j| format!("{}", 2.5 + 0.01 * j as f64 + i as f64 * 0.1)).collect();
                v.extend(["60.5".into(), format!("{}", 10.0 + i as f64), "17.1".into()]);
                v.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn tecator_rows_parse_onto_the_channel_grid() {
        let d = Dataset::parse(&tecator_text(3), DatasetFormat::TecatorGrid, here()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.domain(), (850.0, 1050.0));
        assert!(d.functions().iter().all(|f| f.len() == 100));
        assert_eq!(d.targets(), &[10.0, 11.0, 12.0]);
        let xs = d.functions()[0].xs();
        assert_eq!(xs[0], 850.0);
        assert!((xs[99] - 1050.0).abs() < 1e-12);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        for fmt in [DatasetFormat::TecatorGrid, DatasetFormat::GenericPairs] {
            assert!(matches!(Dataset::parse("", fmt, here()), Err(Error::Parse { .. })));
        }
    }

    #[test]
    fn malformed_row_names_its_line() {
        let mut text = tecator_text(2);
        text.push_str("\n1,2,3\n");
        match Dataset::parse(&text, DatasetFormat::TecatorGrid, here()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn irregular_pairs_keep_their_lengths() {
        let text = "@domain 0 10\n# two curves\n1.5, 0 1, 1 2, 2 3, 3 4, 4 5\n2.5 0 0 1 1 2 2 3 3 4 4 5 5 6 6\n";
        let d = Dataset::parse(text, DatasetFormat::GenericPairs, here()).unwrap();
        assert_eq!(d.functions()[0].len(), 5);
        assert_eq!(d.functions()[1].len(), 7);
        assert_eq!(d.targets(), &[1.5, 2.5]);
        assert_eq!(d.domain(), (0.0, 10.0));
    }

    #[test]
    fn non_monotone_or_duplicate_abscissas_rejected() {
        for row in ["1, 0 1, 2 2, 1 3", "1, 0 1, 1 2, 1 3"] {
            match Dataset::parse(row, DatasetFormat::GenericPairs, here()) {
                Err(Error::Parse { line: 1, .. }) => {}
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn pairs_round_trip_through_writer() {
        let d = Dataset::new(vec![ramp(0, 5), ramp(1, 8)], vec![0.25, -3.0], (0.0, 9.0)).unwrap();
        let mut buf = Vec::new();
        d.write_pairs(&mut buf).unwrap();
        let back = Dataset::parse(std::str::from_utf8(&buf).unwrap(), DatasetFormat::GenericPairs, here()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn ten_percent_of_a_spectrum_leaves_ninety() {
        let f = ramp(0, 100);
        assert_eq!(f.drop_random(0.10, 3).unwrap().len(), 90);
        assert_eq!(f.drop_random(0.0, 3).unwrap(), f);
    }

    #[test]
    fn drop_is_seed_deterministic() {
        let f = ramp(0, 100);
        assert_eq!(f.drop_random(0.1, 11).unwrap(), f.drop_random(0.1, 11).unwrap());
        assert_ne!(f.drop_random(0.1, 11).unwrap(), f.drop_random(0.1, 12).unwrap());
    }

    #[test]
    fn drop_rejects_bad_fraction() {
        let f = ramp(0, 10);
        assert!(matches!(f.drop_random(1.0, 0), Err(Error::Argument(_))));
        assert!(matches!(f.drop_random(-0.1, 0), Err(Error::Argument(_))));
        assert!(matches!(ramp(0, 1).drop_random(0.6, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn half_rounds_up() {
        // 0.25 * 10 = 2.5 -> 3 removed
        assert_eq!(ramp(0, 10).drop_random(0.25, 1).unwrap().len(), 7);
    }

    fn dataset(n: usize) -> Dataset {
        Dataset::new((0..n).map(|i| ramp(i, 4)).collect(), (0..n).map(|i| i as f64).collect(), (0.0, 3.0)).unwrap()
    }

    #[test]
    fn fixed_split_keeps_last_block_for_test() {
        let (train, test) = dataset(215).split(43, SplitMode::FixedOrder).unwrap();
        assert_eq!(train.len(), 172);
        assert_eq!(test.len(), 43);
        assert_eq!(test.ids(), (172..215).collect::<Vec<_>>());
    }

    #[test]
    fn split_edge_cases() {
        let d = dataset(10);
        let (train, test) = d.split(0, SplitMode::Random { seed: 1 }).unwrap();
        assert_eq!(train.len(), 10);
        assert!(test.is_empty());
        assert!(matches!(d.split(10, SplitMode::FixedOrder), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn drop_is_an_ordered_subsequence(m in 1usize..200, frac in 0.0f64..0.9, seed in any::<u64>()) {
            let f = ramp(0, m);
            let removed = (frac * m as f64 + 0.5).floor() as usize;
            prop_assume!(removed < m);
            let g = f.drop_random(frac, seed).unwrap();
            prop_assert_eq!(g.len(), m - removed);
            let mut it = f.points().iter();
            for p in g.points() {
                prop_assert!(it.any(|q| q == p));
            }
        }

        #[test]
        fn random_split_partitions_ids(n in 2usize..120, seed in any::<u64>(), t in 0usize..120) {
            prop_assume!(t < n);
            let (train, test) = dataset(n).split(t, SplitMode::Random { seed }).unwrap();
            prop_assert_eq!(test.len(), t);
            let mut ids = train.ids();
            ids.extend(test.ids());
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
        }
    }
}
