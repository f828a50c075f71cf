//! TOML run configuration. Relative paths resolve against the directory of
//! the config file and are checked when the file is loaded.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use molgen::curation::{CurationOptions, SAMPLE_RANGE};
use molgen::decoding::Strategy;
use molgen::editing::DEFAULT_TOLERANCE_SIGMAS;
use molgen::model::{ModelConfig, TrainConfig, DEFAULT_HARD_THRESHOLD};
use molgen::numerics::Adam;
use molgen::scaffolds::DEFAULT_MIN_DIST;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub data: DataSection,
    #[serde(default)]
    pub curation: CurationSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub edit: Option<EditSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub smiles: PathBuf,
    pub properties: PathBuf,
    pub schema: Vec<String>,
    pub valid_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationSection {
    pub min_dist: usize,
    pub sample_min: usize,
    pub sample_max: usize,
    pub hard_threshold: f64,
    /// Epochs for the unconditional model that scores hard examples.
    pub scoring_epochs: usize,
}

impl Default for CurationSection {
    fn default() -> Self {
        CurationSection {
            min_dist: DEFAULT_MIN_DIST,
            sample_min: SAMPLE_RANGE.0,
            sample_max: SAMPLE_RANGE.1,
            hard_threshold: DEFAULT_HARD_THRESHOLD,
            scoring_epochs: TrainConfig::default().epochs,
        }
    }
}

impl CurationSection {
    pub fn options(&self) -> CurationOptions {
        CurationOptions {
            min_dist: self.min_dist,
            sample_range: (self.sample_min, self.sample_max),
            hard_threshold: self.hard_threshold,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub conditional: bool,
    pub embed_dim: Option<usize>,
    pub latent_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub window: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            conditional: true,
            embed_dim: None,
            latent_dim: None,
            hidden_dim: None,
            window: None,
        }
    }
}

impl ModelSection {
    pub fn apply(&self, c: &mut ModelConfig) {
        if let Some(v) = self.embed_dim {
            c.embed_dim = v;
        }
        if let Some(v) = self.latent_dim {
            c.latent_dim = v;
        }
        if let Some(v) = self.hidden_dim {
            c.hidden_dim = v;
        }
        if let Some(v) = self.window {
            c.window = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSet {
    /// Example set plus challenging set from `curate`.
    Curated,
    /// Every training-split molecule with at least one property.
    TrainSplit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub set: TrainingSet,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub beta: f64,
    pub warmup_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            set: TrainingSet::Curated,
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: Adam::DEFAULT_LR,
            weight_decay: Adam::DEFAULT_WEIGHT_DECAY,
            max_grad_norm: 5.0,
            beta: d.beta,
            warmup_epochs: d.warmup_epochs,
        }
    }
}

impl TrainSection {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            weight_decay: self.weight_decay,
            max_grad_norm: self.max_grad_norm,
            beta: self.beta,
            warmup_epochs: self.warmup_epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    TopK,
    TopP,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub strategy: StrategyName,
    pub k: usize,
    pub p: f64,
    pub temperature: f64,
    pub count: usize,
    pub keep_ratio: f64,
    pub max_len: Option<usize>,
    /// Samples drawn per test-set condition.
    pub per_condition: usize,
}

impl Default for DecodeSection {
    fn default() -> Self {
        DecodeSection {
            strategy: StrategyName::TopP,
            k: 3,
            p: 0.9,
            temperature: 1.0,
            count: 500,
            keep_ratio: 1.0,
            max_len: None,
            per_condition: 10,
        }
    }
}

impl DecodeSection {
    pub fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyName::TopK => Strategy::TopK(self.k),
            StrategyName::TopP => Strategy::TopP(self.p),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub radius: usize,
    pub width: usize,
    pub edge_property: Option<String>,
    pub edge_lo: f64,
    pub edge_hi: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            radius: molgen::fingerprints::DEFAULT_RADIUS,
            width: molgen::fingerprints::DEFAULT_WIDTH,
            edge_property: None,
            edge_lo: f64::NEG_INFINITY,
            edge_hi: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub property: String,
    pub bin_low: f64,
    pub bin_high: f64,
    pub patterns: Option<PathBuf>,
    pub use_counts: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            property: "LogP_approx".into(),
            bin_low: molgen::analysis::BIN_LOW,
            bin_high: molgen::analysis::BIN_HIGH,
            patterns: None,
            use_counts: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditSection {
    pub source: String,
    pub target: String,
    pub target_value: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_sigmas: f64,
    #[serde(default)]
    pub random_mask_rate: f64,
    #[serde(default)]
    pub required_fragments: Vec<String>,
    #[serde(default = "default_edit_count")]
    pub count: usize,
}

fn default_mu() -> f64 {
    0.5
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE_SIGMAS
}

fn default_edit_count() -> usize {
    100
}

/// A parsed config together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: PathBuf,
    pub text: String,
}

fn resolve(base: &Path, p: &mut PathBuf, what: &str) -> Result<()> {
    if p.is_relative() {
        *p = base.join(&*p);
    }
    if !p.is_file() {
        bail!("{what} {} does not exist", p.display());
    }
    Ok(())
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut config.data.smiles, "data.smiles")?;
        resolve(base, &mut config.data.properties, "data.properties")?;
        if let Some(p) = config.analysis.patterns.as_mut() {
            resolve(base, p, "analysis.patterns")?;
        }
        config.validate()?;
        Ok(LoadedConfig {
            config,
            path: path.to_path_buf(),
            text,
        })
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.data.schema.is_empty() {
            bail!("data.schema must name at least one property column");
        }
        let c = &self.curation;
        if c.min_dist == 0 {
            bail!("curation.min_dist must be at least 1");
        }
        if c.sample_min == 0 || c.sample_min > c.sample_max {
            bail!("curation.sample_min and sample_max must satisfy 1 <= min <= max");
        }
        let t = &self.train;
        if t.batch_size == 0 || !(t.lr > 0.0) || t.beta < 0.0 || !(t.max_grad_norm > 0.0) {
            bail!("train: batch_size, lr and max_grad_norm must be positive and beta non-negative");
        }
        let d = &self.decode;
        if d.per_condition == 0 || !(0.0..=1.0).contains(&d.keep_ratio) || !(d.temperature > 0.0) {
            bail!("decode: per_condition must be positive, keep_ratio in [0, 1], temperature positive");
        }
        if let Some(e) = &self.edit {
            if !self.data.schema.contains(&e.target) {
                bail!("edit.target {} is not in data.schema", e.target);
            }
            if !(e.tolerance_sigmas > 0.0) || !(0.0..=1.0).contains(&e.mu) {
                bail!("edit: tolerance_sigmas must be positive and mu in [0, 1]");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA: &str = "[data]\nsmiles = \"mols.smi\"\nproperties = \"props.tsv\"\nschema = [\"MolWt\"]\nvalid_size = 0\ntest_size = 0\n";

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn defaults_and_resolution() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "mols.smi", "CCO\n");
        write(dir.path(), "props.tsv", "smiles\tMolWt\nCCO\t46.07\n");
        let cfg = write(dir.path(), "run.toml", &format!("seed = 4\n{DATA}"));
        let loaded = LoadedConfig::load(&cfg).unwrap();
        let c = &loaded.config;
        assert_eq!(c.seed, 4);
        assert_eq!(c.data.smiles, dir.path().join("mols.smi"));
        assert_eq!(c.train.lr, Adam::DEFAULT_LR);
        assert_eq!(c.train.max_grad_norm, 5.0);
        assert_eq!(c.curation.min_dist, 3);
        assert_eq!(c.curation.hard_threshold, 0.25);
        assert_eq!(c.decode.keep_ratio, 1.0);
    }

    #[test]
    fn rejects_missing_files_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "a.toml", &format!("seed = 0\n{DATA}"));
        assert!(LoadedConfig::load(&cfg).is_err());
        write(dir.path(), "mols.smi", "C\n");
        write(dir.path(), "props.tsv", "smiles\tMolWt\nC\t16.04\n");
        assert!(LoadedConfig::load(&cfg).is_ok());
        let cfg = write(dir.path(), "b.toml", &format!("seed = 0\ncolour = 1\n{DATA}"));
        assert!(LoadedConfig::load(&cfg).is_err());
        let cfg = write(dir.path(), "c.toml", DATA);
        assert!(LoadedConfig::load(&cfg).is_err());
        let cfg = write(dir.path(), "d.toml", &format!("seed = 0\n{DATA}[edit]\nsource = \"C\"\ntarget = \"QED\"\ntarget_value = 1.0\n"));
        assert!(LoadedConfig::load(&cfg).is_err());
    }
}
