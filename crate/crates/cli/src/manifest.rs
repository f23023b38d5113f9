//! `manifest.txt`: everything needed to rerun a command exactly.

use std::path::Path;

use anyhow::Result;
use fdnet_core::seed;

use crate::output::write_atomic;

pub struct RunManifest {
    out: std::path::PathBuf,
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, data: &Path, format: &str, master_seed: u64, out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            entries: vec![
                ("toolkit".into(), format!("fdnet {}", env!("CARGO_PKG_VERSION"))),
                ("command".into(), command.into()),
                ("data".into(), data.display().to_string()),
                ("format".into(), format.into()),
                ("seed".into(), master_seed.to_string()),
                ("output".into(), out.display().to_string()),
            ],
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    /// Records the derived stream seeds of an experiment run.
    pub fn with_seeds(self, master: u64) -> Self {
        self.with("seed.holes", &seed::derive(master, "holes", 0).to_string())
            .with("seed.folds", &seed::derive(master, "folds", 0).to_string())
            .with("seed.mlp-cv", &seed::derive(master, "mlp-cv", 0).to_string())
            .with("seed.mlp-final", &seed::derive(master, "mlp-final", 0).to_string())
    }

    pub fn write(self) -> Result<()> {
        let body: String = self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        write_atomic(&self.out.join("manifest.txt"), body.as_bytes())
    }
}
