//! Run configuration: one serializable document recording everything a
//! subcommand needs, written next to each run's outputs so any run can be
//! reproduced from that file alone.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use fairtrade_core::cevae::TrainConfig;
use fairtrade_core::{AuxConfig, ForestConfig};

/// Resolved settings of one pipeline run.
///
/// Every field has a default, so a config file may carry only what it needs;
/// command-line flags override file values field by field. After resolution
/// the subcommand writes the full document next to its outputs, and
/// re-running with `--config <that file>` reproduces the run bit for bit
/// (paths are kept as given, so relative paths must be resolvable from the
/// same working directory).
///
/// Randomness: `seed` is the single source. Each stage derives its own
/// stream from it by name (`gen-data`, `cevae`, `aux`, `sweep/rep/<r>`,
/// `audit`, ...). The `seed` fields inside the nested `train`/`aux`/`forest`
/// sections are overwritten with the derived values before use and recorded
/// for transparency; editing them by hand has no effect.
///
/// Scalar fields stay ahead of the nested tables so the document serializes
/// to TOML without reordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Subcommand this config resolves; informational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Builtin graph name or graph JSON file (identifiability queries).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    /// Data-generating process: a builtin name or `chain:<a>,<b>,<c>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dgp: Option<String>,
    /// Records to sample (gen-data and the oracle metrics).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Master seed; all stage randomness derives from it by name.
    pub seed: u64,
    /// Dataset stem: reads `<stem>.csv` + `<stem>.schema.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// VAE checkpoint path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Auxiliary-model checkpoint path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_model: Option<PathBuf>,
    /// Output stem, directory, or file, depending on the subcommand.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Also write retained noise columns (gen-data).
    pub with_noise: bool,
    /// Single input selection, e.g. `"Z,B,R*"` (train-aux).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    /// Selection ladder for sweep; empty means the standard five steps.
    pub selections: Vec<String>,
    /// Base sensitive value for `R*` decodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_a: Option<f64>,
    /// Comma-separated path specs, e.g. `"A>X>Y,A>Y"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<String>,
    /// Metric list for eval; empty means `accuracy,sp`.
    pub metrics: Vec<String>,
    /// Repetitions (sweep defaults to 5, audit to 20).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Sensitive values contrasted by pse.
    pub a_active: f64,
    pub a_base: f64,
    /// Audit adapter spec: `builtin:<name>` or `cmd:<command line>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapter: Option<String>,
    /// Train share of train/test splits.
    pub train_frac: f64,
    /// External-adapter timeout in seconds.
    pub timeout_secs: u64,
    /// Worker threads for repetition loops.
    pub jobs: usize,
    /// VAE training hyperparameters.
    pub train: TrainConfig,
    /// Auxiliary-classifier hyperparameters (also the audit LR models).
    pub aux: AuxConfig,
    /// Random-forest hyperparameters (audit builtin).
    pub forest: ForestConfig,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            command: None,
            graph: None,
            dgp: None,
            n: None,
            seed: 0,
            data: None,
            checkpoint: None,
            aux_model: None,
            out: None,
            with_noise: false,
            selection: None,
            selections: Vec::new(),
            base_a: None,
            paths: None,
            metrics: Vec::new(),
            reps: None,
            a_active: 1.0,
            a_base: 0.0,
            adapter: None,
            train_frac: 0.9,
            timeout_secs: 30,
            jobs: 1,
            train: TrainConfig::default(),
            aux: AuxConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse a config file. `.json` files are parsed as JSON; anything else
    /// is tried as TOML first, then as JSON.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            return serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()));
        }
        match toml::from_str(&text) {
            Ok(cfg) => Ok(cfg),
            Err(toml_err) => serde_json::from_str(&text).map_err(|_| {
                anyhow::Error::new(toml_err)
                    .context(format!("invalid config {}", path.display()))
            }),
        }
    }

    /// Write the resolved document as TOML.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("config serialization failed")?;
        std::fs::write(path, text)
            .with_context(|| format!("cannot write config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn busy_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.command = Some("sweep".into());
        cfg.dgp = Some("fig1c-synthetic".into());
        cfg.n = Some(12_345);
        cfg.seed = 99;
        cfg.data = Some(PathBuf::from("runs/data"));
        cfg.checkpoint = Some(PathBuf::from("runs/checkpoint.json"));
        cfg.selections = vec!["Z".into(), "Z,B,R*".into()];
        cfg.base_a = Some(0.0);
        cfg.metrics = vec!["accuracy".into(), "sp".into()];
        cfg.reps = Some(7);
        cfg.train.learning_rate = 1e-4;
        cfg.train.epochs = 3;
        cfg.aux.hidden = 37;
        cfg.forest.n_trees = 11;
        cfg.train_frac = 0.8;
        cfg
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let cfg = busy_config();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        // Defaults round-trip too, including awkward floats.
        let mut odd = PipelineConfig::default();
        odd.train.learning_rate = 0.1 + 0.2; // 0.30000000000000004
        odd.base_a = Some(1.0);
        let back: PipelineConfig = toml::from_str(&toml::to_string_pretty(&odd).unwrap()).unwrap();
        assert_eq!(back, odd);
    }

    #[test]
    fn json_files_and_json_fallback_are_accepted() {
        let cfg = busy_config();
        let dir = tempfile::tempdir().unwrap();

        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        assert_eq!(PipelineConfig::load(&json_path).unwrap(), cfg);

        // JSON content under a non-.json name still loads via the fallback.
        let sneaky = dir.path().join("run.cfg");
        std::fs::write(&sneaky, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(PipelineConfig::load(&sneaky).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<PipelineConfig>("sede = 3\n").unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
    }

    #[test]
    fn partial_documents_fill_in_defaults() {
        let cfg: PipelineConfig = toml::from_str("seed = 5\n[train]\nepochs = 2\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.d_z, TrainConfig::default().d_z);
        assert_eq!(cfg.train_frac, 0.9);
    }
}
