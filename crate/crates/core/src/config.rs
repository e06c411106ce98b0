//! Plain-text `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{BaselineParams, DEFAULT_EDIT_THRESHOLD, DEFAULT_NGUYEN_ALPHA};
use crate::error::{Error, Result};
use crate::eval::Gain;
use crate::index::POOL_DEPTH;
use crate::kb::{AdjacencyMode, MlmParams};
use crate::matching::Variant;
use crate::ranker::{ForestParams, DEFAULT_FOLDS, DEFAULT_MAX_FEATURES, DEFAULT_TREES};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    pub kb_catalog: Option<PathBuf>,
    pub kb_links: Option<PathBuf>,
    pub kb_redirects: Option<PathBuf>,
    pub word_embeddings: Option<PathBuf>,
    pub graph_embeddings: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub variant: Variant,
    pub edit_threshold: f64,
    pub nguyen_alpha: f64,
    pub trees: usize,
    pub max_features: usize,
    pub folds: usize,
    pub pool_depth: usize,
    pub mlm_label_weight: f64,
    pub mlm_abstract_weight: f64,
    pub seed: u64,
    pub adjacency: AdjacencyMode,
    pub gain: Gain,
    pub normalize_late_sum: bool,
    pub precision: Precision,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            kb_catalog: None,
            kb_links: None,
            kb_redirects: None,
            word_embeddings: None,
            graph_embeddings: None,
            queries: None,
            qrels: None,
            work_dir: PathBuf::from("work"),
            variant: Variant::Crab2,
            edit_threshold: DEFAULT_EDIT_THRESHOLD,
            nguyen_alpha: DEFAULT_NGUYEN_ALPHA,
            trees: DEFAULT_TREES,
            max_features: DEFAULT_MAX_FEATURES,
            folds: DEFAULT_FOLDS,
            pool_depth: POOL_DEPTH,
            mlm_label_weight: 0.2,
            mlm_abstract_weight: 0.8,
            seed: DEFAULT_SEED,
            adjacency: AdjacencyMode::Either,
            gain: Gain::Exponential,
            normalize_late_sum: false,
            precision: Precision::F64,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("bad boolean `{value}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 23] = [
        "corpus",
        "kb_catalog",
        "kb_links",
        "kb_redirects",
        "word_embeddings",
        "graph_embeddings",
        "queries",
        "qrels",
        "work_dir",
        "variant",
        "edit_threshold",
        "nguyen_alpha",
        "trees",
        "max_features",
        "folds",
        "pool_depth",
        "mlm_label_weight",
        "mlm_abstract_weight",
        "seed",
        "adjacency",
        "gain",
        "normalize_late_sum",
        "precision",
    ];

    /// Read a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_str(&text, base)
    }

    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.work_dir = base.join(&cfg.work_dir);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                what: "config",
                line: n + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            })?;
            cfg.set_with_base(k.trim(), v.trim(), base).map_err(|e| Error::Format {
                what: "config",
                line: n + 1,
                reason: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Override one key; paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_with_base(key, value, Path::new(""))
    }

    fn set_with_base(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        // an empty value unsets a path
        let path = || (!value.is_empty()).then(|| base.join(value));
        match key {
            "corpus" => self.corpus = path(),
            "kb_catalog" => self.kb_catalog = path(),
            "kb_links" => self.kb_links = path(),
            "kb_redirects" => self.kb_redirects = path(),
            "word_embeddings" => self.word_embeddings = path(),
            "graph_embeddings" => self.graph_embeddings = path(),
            "queries" => self.queries = path(),
            "qrels" => self.qrels = path(),
            "work_dir" => self.work_dir = base.join(value),
            "variant" => self.variant = value.parse()?,
            "edit_threshold" => self.edit_threshold = parse(key, value)?,
            "nguyen_alpha" => self.nguyen_alpha = parse(key, value)?,
            "trees" => self.trees = parse(key, value)?,
            "max_features" => self.max_features = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "pool_depth" => self.pool_depth = parse(key, value)?,
            "mlm_label_weight" => self.mlm_label_weight = parse(key, value)?,
            "mlm_abstract_weight" => self.mlm_abstract_weight = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "adjacency" => {
                self.adjacency = match value {
                    "either" | "or" => AdjacencyMode::Either,
                    "mutual" | "and" => AdjacencyMode::Mutual,
                    _ => return Err(Error::Invalid(format!("bad adjacency `{value}`"))),
                }
            }
            "gain" => {
                self.gain = match value {
                    "exponential" => Gain::Exponential,
                    "linear" => Gain::Linear,
                    _ => return Err(Error::Invalid(format!("bad gain `{value}`"))),
                }
            }
            "normalize_late_sum" => self.normalize_late_sum = parse_bool(key, value)?,
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Invalid(format!("bad precision `{value}`"))),
                }
            }
            _ => return Err(Error::Invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.edit_threshold) {
            return Err(Error::Invalid("edit_threshold must lie in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.nguyen_alpha) {
            return Err(Error::Invalid("nguyen_alpha must lie in [0,1]".into()));
        }
        if self.trees == 0 || self.max_features == 0 || self.pool_depth == 0 {
            return Err(Error::Invalid("trees, max_features and pool_depth must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Invalid("folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn forest(&self) -> ForestParams {
        ForestParams {
            trees: self.trees,
            max_features: self.max_features,
            seed: self.seed,
        }
    }

    pub fn baselines(&self) -> BaselineParams {
        BaselineParams {
            edit_threshold: self.edit_threshold,
            nguyen_alpha: self.nguyen_alpha,
        }
    }

    pub fn mlm(&self) -> MlmParams {
        MlmParams {
            label_weight: self.mlm_label_weight,
            abstract_weight: self.mlm_abstract_weight,
            ..MlmParams::default()
        }
    }

    /// The resolved configuration, one `key = value` per line in [`Self::KEYS`] order.
    pub fn resolved_lines(&self) -> Vec<String> {
        let p = |v: &Option<PathBuf>| v.as_ref().map_or(String::new(), |p| p.display().to_string());
        let values = [
            p(&self.corpus),
            p(&self.kb_catalog),
            p(&self.kb_links),
            p(&self.kb_redirects),
            p(&self.word_embeddings),
            p(&self.graph_embeddings),
            p(&self.queries),
            p(&self.qrels),
            self.work_dir.display().to_string(),
            self.variant.to_string(),
            self.edit_threshold.to_string(),
            self.nguyen_alpha.to_string(),
            self.trees.to_string(),
            self.max_features.to_string(),
            self.folds.to_string(),
            self.pool_depth.to_string(),
            self.mlm_label_weight.to_string(),
            self.mlm_abstract_weight.to_string(),
            self.seed.to_string(),
            match self.adjacency {
                AdjacencyMode::Either => "either".into(),
                AdjacencyMode::Mutual => "mutual".into(),
            },
            match self.gain {
                Gain::Exponential => "exponential".into(),
                Gain::Linear => "linear".into(),
            },
            self.normalize_late_sum.to_string(),
            match self.precision {
                Precision::F32 => "f32".into(),
                Precision::F64 => "f64".into(),
            },
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.resolved_lines() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}
