//! Experiment outcomes and their text and CSV forms.
//!
//! The report files hold only seed-determined quantities so that reruns are
//! byte-identical; wall times go to a separate timings file.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    /// Selected meta-parameters in pipeline order.
    pub params: Vec<(String, String)>,
    /// Mean validation mean squared error of the winning cell.
    pub cv_mse: f64,
    pub test_rmse: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Summed leave-one-out score per candidate basis size (`None` when the
    /// size was skipped).
    pub basis_scores: Option<Vec<(usize, Option<f64>)>>,
    pub test_accesses_before_evaluation: usize,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn selected(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Aligned table: experiment, selected meta-parameters, test RMSE.
pub fn write_text<W: Write>(mut out: W, reports: &[ExperimentReport]) -> Result<()> {
    let w_name = reports.iter().map(|r| r.name.len()).chain([10]).max().unwrap_or(10);
    let w_sel = reports.iter().map(|r| r.selected().len()).chain([8]).max().unwrap_or(8);
    writeln!(out, "{:<w_name$}  {:<w_sel$}  {:>9}", "experiment", "selected", "test-rmse")?;
    for r in reports {
        writeln!(out, "{:<w_name$}  {:<w_sel$}  {:>9.4}", r.name, r.selected(), r.test_rmse)?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(mut out: W, reports: &[ExperimentReport]) -> Result<()> {
    writeln!(out, "experiment,selected,cv_mse,test_rmse,seed")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.10e},{:.10e},{}",
            r.name,
            r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
            r.cv_mse,
            r.test_rmse,
            r.seed
        )?;
    }
    Ok(())
}

pub fn write_timings<W: Write>(mut out: W, reports: &[ExperimentReport]) -> Result<()> {
    writeln!(out, "experiment,wall_time_s")?;
    for r in reports {
        writeln!(out, "{},{:.3}", r.name, r.wall_time_secs)?;
    }
    Ok(())
}
