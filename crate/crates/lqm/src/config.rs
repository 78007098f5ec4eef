//! JSON run configuration.

use std::path::{Path, PathBuf};

use lqm_core::condenser::CondenseConfig;
use lqm_core::continual::{CglConfig, SplitRatios};
use lqm_core::evaluation::EvalConfig;
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};
use crate::formats::read_json;

/// Node features in `data` are propagated over this edge list first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInput {
    pub edges: PathBuf,
    #[serde(default = "default_hops")]
    pub hops: usize,
}

fn default_hops() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub runs: usize,
    pub classifier: EvalConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { runs: 5, classifier: EvalConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinualSection {
    pub classes_per_task: usize,
    pub split: SplitRatios,
    /// Replay memory per task as a fraction of its training records.
    pub budget_ratio: f64,
    pub runs: usize,
    pub classifier: EvalConfig,
}

impl Default for ContinualSection {
    fn default() -> Self {
        let cgl = CglConfig::default();
        ContinualSection {
            classes_per_task: 2,
            split: SplitRatios::default(),
            budget_ratio: cgl.budget_ratio,
            runs: cgl.runs,
            classifier: cgl.classifier,
        }
    }
}

/// Everything one CLI invocation needs. Relative paths are resolved against
/// the directory of the config file. The top-level `seed` replaces every
/// nested seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub graph: Option<GraphInput>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub condense: CondenseConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub continual: ContinualSection,
    #[serde(default)]
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> IoError {
    IoError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data);
        fix(&mut self.output);
        if let Some(t) = &mut self.test {
            fix(t);
        }
        if let Some(g) = &mut self.graph {
            fix(&mut g.edges);
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Rejects values outside the documented ranges.
    pub fn validate(&self) -> Result<()> {
        let c = &self.condense;
        c.validate().map_err(|e| invalid(format!("condense: {e}")))?;
        if c.learning_rate.is_nan() || c.learning_rate <= 0.0 {
            return Err(invalid(format!("condense.learning_rate must be > 0, got {}", c.learning_rate)));
        }
        if c.iterations > 10_000_000 {
            return Err(invalid(format!("condense.iterations must be at most 10000000, got {}", c.iterations)));
        }
        for (name, ec) in [("eval.classifier", &self.eval.classifier), ("continual.classifier", &self.continual.classifier)] {
            ec.train.validate().map_err(|e| invalid(format!("{name}.train: {e}")))?;
            if ec.train.learning_rate <= 0.0 {
                return Err(invalid(format!("{name}.train.learning_rate must be > 0")));
            }
            if ec.hidden.contains(&0) {
                return Err(invalid(format!("{name}.hidden widths must be positive, got {:?}", ec.hidden)));
            }
        }
        if self.eval.runs == 0 {
            return Err(invalid("eval.runs must be at least 1"));
        }
        let k = &self.continual;
        if k.classes_per_task == 0 {
            return Err(invalid("continual.classes_per_task must be at least 1"));
        }
        k.split.validate().map_err(|e| invalid(format!("continual.split: {e}")))?;
        if !(k.budget_ratio > 0.0 && k.budget_ratio <= 1.0) {
            return Err(invalid(format!("continual.budget_ratio must be in (0, 1], got {}", k.budget_ratio)));
        }
        if k.runs == 0 {
            return Err(invalid("continual.runs must be at least 1"));
        }
        if let Some(g) = &self.graph {
            if g.hops > 64 {
                return Err(invalid(format!("graph.hops must be at most 64, got {}", g.hops)));
            }
        }
        Ok(())
    }

    pub fn condense_config(&self) -> CondenseConfig {
        CondenseConfig { seed: self.seed, ..self.condense.clone() }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig { seed: self.seed, ..self.eval.classifier.clone() }
    }

    pub fn cgl_config(&self) -> CglConfig {
        CglConfig {
            classifier: self.continual.classifier.clone(),
            runs: self.continual.runs,
            budget_ratio: self.continual.budget_ratio,
            seed: self.seed,
        }
    }
}
