use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use opinionkb::applying::{Hyper, ModelKind};
use opinionkb::crowd::{AggregationParams, CostModel};
use opinionkb::scalar::{fraction_from_f64, Fraction};
use opinionkb::selection::Algorithm;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Simulate,
    Serve,
}

/// Pipeline settings. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kb: PathBuf,
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    pub scenario: Option<PathBuf>,
    pub mode: Mode,
    pub seed: u64,

    pub min_similarity: f64,
    pub k: usize,
    pub delta: f64,
    pub algo: String,

    pub sample_budget: usize,
    #[serde(rename = "theta_A")]
    pub theta_a: f64,
    #[serde(rename = "theta_P")]
    pub theta_p: f64,
    pub workers_per_hit: usize,
    pub reward: f64,
    pub fee: f64,
    pub bind_address: String,
    /// Seconds to wait for crowd answers in serve mode; 0 waits indefinitely.
    pub serve_timeout: u64,

    pub classifier: String,
    pub max_depth: usize,
    pub neighbors: usize,
    pub folds: usize,
    pub include_relations: bool,

    pub fixpoint: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kb: PathBuf::new(),
            corpus: PathBuf::new(),
            lexicon: PathBuf::new(),
            scenario: None,
            mode: Mode::Simulate,
            seed: 0,
            min_similarity: opinionkb::extraction::DEFAULT_MIN_SIMILARITY,
            k: 5,
            delta: 0.5,
            algo: "div-fgreedy".into(),
            sample_budget: 200,
            theta_a: 0.1,
            theta_p: 0.3,
            workers_per_hit: 5,
            reward: 0.02,
            fee: 0.01,
            bind_address: "127.0.0.1:8080".into(),
            serve_timeout: 0,
            classifier: "decision_tree".into(),
            max_depth: 5,
            neighbors: 5,
            folds: 5,
            include_relations: true,
            fixpoint: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.kb);
        join(&mut self.corpus);
        join(&mut self.lexicon);
        if let Some(s) = self.scenario.as_mut() {
            join(s);
        }
    }

    /// Checks paths and ranges before any stage runs.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("kb", &self.kb), ("corpus", &self.corpus), ("lexicon", &self.lexicon)] {
            if p.as_os_str().is_empty() {
                bail!("config: {name} path is not set");
            }
            if !p.is_file() {
                bail!("config: {name} path {} does not exist", p.display());
            }
        }
        match (&self.scenario, self.mode) {
            (None, Mode::Simulate) => bail!("config: simulate mode needs a scenario path"),
            (Some(s), _) if !s.is_file() => bail!("config: scenario path {} does not exist", s.display()),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.min_similarity) {
            bail!("config: min_similarity must lie in [0, 1]");
        }
        if self.k == 0 {
            bail!("config: k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.delta) {
            bail!("config: delta must lie in [0, 1]");
        }
        self.algorithm()?;
        if self.sample_budget == 0 {
            bail!("config: sample_budget must be at least 1");
        }
        self.aggregation()?.validate()?;
        self.cost_model()?;
        self.model_kind()?;
        if self.max_depth == 0 {
            bail!("config: max_depth must be at least 1");
        }
        if self.neighbors.is_multiple_of(2) {
            bail!("config: neighbors must be odd");
        }
        if self.folds < 2 {
            bail!("config: folds must be at least 2");
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Ok(self.algo.parse()?)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        Ok(self.classifier.parse()?)
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            max_depth: self.max_depth,
            neighbors: self.neighbors,
        }
    }

    pub fn aggregation(&self) -> Result<AggregationParams> {
        Ok(AggregationParams {
            theta_a: fraction_from_f64(self.theta_a)?,
            theta_p: fraction_from_f64(self.theta_p)?,
            workers_per_hit: self.workers_per_hit,
        })
    }

    pub fn cost_model(&self) -> Result<CostModel<Fraction>> {
        let m = CostModel {
            reward_per_assignment: fraction_from_f64(self.reward)?,
            platform_fee_per_assignment: fraction_from_f64(self.fee)?,
        };
        if m.reward_per_assignment < Fraction::from_integer(0) || m.platform_fee_per_assignment < Fraction::from_integer(0) {
            bail!("config: reward and fee must be non-negative");
        }
        Ok(m)
    }
}
