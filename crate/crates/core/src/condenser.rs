//! The condensation loop.
//!
//! Every outer iteration draws one fresh random extractor shared by all
//! classes. Each class then embeds a real mini-batch and its synthetic
//! records, evaluates the matching loss, and takes one plain gradient step
//! on its synthetic records through the extractor.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::{lqm_loss_with_targets, mmd_loss, quantile_targets, Distance, LossResult, LqmOptions};
use crate::nn::{backward_input_from_trace, forward, forward_trace, sample_params};
use crate::quantiles::{Criterion, QuantileSet};
use crate::rng::{self, derive_seed, rng_for};
use crate::tensor::Matrix;

/// How many synthetic records each class receives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// The same count for every class present in the data.
    PerClass(usize),
    /// `ceil(ratio · N)` records split across classes in proportion to their
    /// frequency, at least one per class.
    Ratio(f64),
    /// One count per class label.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CondenseConfig {
    pub budget: Budget,
    pub iterations: usize,
    pub learning_rate: f64,
    pub real_batch_size: usize,
    pub distance: Distance,
    pub quantile_criterion: Criterion,
    /// Extractor widths after the input layer; the last one is the
    /// embedding width.
    pub extractor_widths: Vec<usize>,
    pub lqm: LqmOptions,
    /// Shrink budgets larger than a class instead of failing.
    pub clamp_budget: bool,
    pub seed: u64,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        CondenseConfig {
            budget: Budget::PerClass(10),
            iterations: 2000,
            learning_rate: 0.1,
            real_batch_size: 256,
            distance: Distance::Lqm,
            quantile_criterion: Criterion::Cvm,
            extractor_widths: vec![128, 128],
            lqm: LqmOptions::default(),
            clamp_budget: false,
            seed: 0,
        }
    }
}

impl CondenseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.real_batch_size == 0 {
            return Err(Error::InvalidConfig("real_batch_size must be at least 1".into()));
        }
        if self.extractor_widths.is_empty() || self.extractor_widths.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "extractor_widths must be non-empty and positive, got {:?}",
                self.extractor_widths
            )));
        }
        match &self.budget {
            Budget::PerClass(0) => return Err(Error::BudgetMustBePositive),
            Budget::Ratio(r) if !(*r > 0.0 && *r <= 1.0) => {
                return Err(Error::InvalidConfig(format!("budget ratio must be in (0, 1], got {r}")))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn extractor_dims(&self, input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend_from_slice(&self.extractor_widths);
        dims
    }
}

/// Splits `total` across classes proportionally to `counts` by largest
/// remainder, giving every non-empty class at least one record.
pub fn allocate_proportional(total: usize, counts: &[usize]) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let total = total.max(present);
    let mut alloc: Vec<usize> = counts.iter().map(|&c| if c > 0 { 1 } else { 0 }).collect();
    let remaining = total - present;
    let shares: Vec<f64> = counts.iter().map(|&c| remaining as f64 * c as f64 / n as f64).collect();
    let mut given = 0;
    for (a, s) in alloc.iter_mut().zip(&shares) {
        let whole = libm::floor(*s) as usize;
        *a += whole;
        given += whole;
    }
    let mut order: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - libm::floor(shares[a]);
        let rb = shares[b] - libm::floor(shares[b]);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(remaining - given) {
        alloc[c] += 1;
    }
    alloc
}

/// Per-class budgets (indexed by label) for `budget` over `counts`.
pub fn resolve_budgets(budget: &Budget, counts: &[usize]) -> Result<Vec<usize>> {
    Ok(match budget {
        Budget::PerClass(k) => counts.iter().map(|&c| if c > 0 { *k } else { 0 }).collect(),
        Budget::Ratio(r) => {
            let n: usize = counts.iter().sum();
            allocate_proportional(libm::ceil(r * n as f64) as usize, counts)
        }
        Budget::Explicit(b) => {
            if b.len() != counts.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} explicit budgets for {} classes",
                    b.len(),
                    counts.len()
                )));
            }
            b.clone()
        }
    })
}

/// Learnable records of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClass {
    pub label: usize,
    pub records: Matrix,
}

/// Where a synthetic dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub config: Option<CondenseConfig>,
    pub seed: u64,
    pub iterations_completed: usize,
    pub real_records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    classes: Vec<SyntheticClass>,
    num_classes: usize,
    dim: usize,
    pub provenance: Provenance,
}

impl SyntheticDataset {
    pub fn new(classes: Vec<SyntheticClass>, num_classes: usize, dim: usize, provenance: Provenance) -> Result<Self> {
        for c in &classes {
            if c.label >= num_classes {
                return Err(Error::LabelOutOfRange { label: c.label, classes: num_classes });
            }
            if c.records.cols() != dim {
                return Err(Error::ShapeMismatch {
                    context: "SyntheticDataset::new",
                    expected: (c.records.rows(), dim),
                    found: c.records.shape(),
                });
            }
            if !c.records.is_finite() {
                return Err(Error::NonFinite("synthetic records"));
            }
        }
        Ok(SyntheticDataset { classes, num_classes, dim, provenance })
    }

    /// Uses every record of `data` as synthetic records.
    pub fn from_labeled(data: &LabeledDataset) -> SyntheticDataset {
        let classes = data
            .present_classes()
            .into_iter()
            .map(|label| SyntheticClass { label, records: data.class_features(label) })
            .collect();
        SyntheticDataset {
            classes,
            num_classes: data.num_classes(),
            dim: data.dim(),
            provenance: Provenance { real_records: data.len(), ..Provenance::default() },
        }
    }

    pub fn classes(&self) -> &[SyntheticClass] {
        &self.classes
    }

    pub fn class(&self, label: usize) -> Option<&SyntheticClass> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(|c| c.records.rows()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Synthetic size over real size.
    pub fn condensation_ratio(&self) -> Option<f64> {
        (self.provenance.real_records > 0).then(|| self.len() as f64 / self.provenance.real_records as f64)
    }

    /// Flattens into a labeled dataset, classes in stored order.
    pub fn to_labeled(&self) -> LabeledDataset {
        let mut features = Matrix::zeros(0, self.dim);
        let mut labels = Vec::with_capacity(self.len());
        for c in &self.classes {
            features.append_rows(&c.records).expect("widths checked at construction");
            labels.extend(core::iter::repeat_n(c.label, c.records.rows()));
        }
        LabeledDataset::with_num_classes(features, labels, self.num_classes).expect("labels checked at construction")
    }
}

/// Picks `budgets[c]` distinct real records of every class uniformly at
/// random. Classes with a zero budget are left out.
pub fn init_synthetic(real: &LabeledDataset, budgets: &[usize], seed: u64, clamp: bool) -> Result<SyntheticDataset> {
    if real.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if budgets.len() != real.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "{} budgets for {} classes",
            budgets.len(),
            real.num_classes()
        )));
    }
    let mut classes = Vec::new();
    for (label, &wanted) in budgets.iter().enumerate() {
        if wanted == 0 {
            continue;
        }
        let rows = real.class_indices(label);
        let mut budget = wanted;
        if rows.len() < budget {
            if !clamp || rows.is_empty() {
                return Err(Error::BudgetExceedsClassSize { class: label, budget, available: rows.len() });
            }
            log::warn!("class {label}: budget {budget} clamped to class size {}", rows.len());
            budget = rows.len();
        }
        let mut rng = rng_for(seed, &[rng::TAG_INIT, label as u64]);
        let mut picked: Vec<usize> = index::sample(&mut rng, rows.len(), budget).into_iter().map(|i| rows[i]).collect();
        picked.sort_unstable();
        classes.push(SyntheticClass { label, records: real.features().select_rows(&picked) });
    }
    SyntheticDataset::new(
        classes,
        real.num_classes(),
        real.dim(),
        Provenance { config: None, seed, iterations_completed: 0, real_records: real.len() },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct CondenseOutcome {
    pub synthetic: SyntheticDataset,
    /// Mean loss over classes at each iteration, before that iteration's
    /// update.
    pub loss_trace: Vec<f64>,
}

/// Stateful condensation run. [`condense`] drives it to completion.
#[derive(Debug)]
pub struct Condenser<'a> {
    real: &'a LabeledDataset,
    cfg: CondenseConfig,
    class_rows: Vec<Vec<usize>>,
    synthetic: SyntheticDataset,
    quantiles: BTreeMap<usize, QuantileSet>,
    loss_trace: Vec<f64>,
}

impl<'a> Condenser<'a> {
    pub fn new(real: &'a LabeledDataset, cfg: CondenseConfig) -> Result<Self> {
        cfg.validate()?;
        if real.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let budgets = resolve_budgets(&cfg.budget, &real.class_counts())?;
        let mut synthetic = init_synthetic(real, &budgets, cfg.seed, cfg.clamp_budget)?;
        synthetic.provenance.config = Some(cfg.clone());
        let mut quantiles = BTreeMap::new();
        for c in synthetic.classes() {
            let k = c.records.rows();
            if k > cfg.real_batch_size {
                log::warn!(
                    "class {}: real batch size {} is smaller than the budget {k}",
                    c.label,
                    cfg.real_batch_size
                );
            }
            if cfg.distance == Distance::Lqm && !quantiles.contains_key(&k) {
                quantiles.insert(k, QuantileSet::optimal(k, cfg.quantile_criterion)?);
            }
        }
        let class_rows = (0..real.num_classes()).map(|c| real.class_indices(c)).collect();
        Ok(Condenser { real, cfg, class_rows, synthetic, quantiles, loss_trace: Vec::new() })
    }

    pub fn synthetic(&self) -> &SyntheticDataset {
        &self.synthetic
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn iterations_completed(&self) -> usize {
        self.synthetic.provenance.iterations_completed
    }

    /// Runs the next iteration over all classes in label order.
    pub fn step(&mut self) -> Result<f64> {
        let order: Vec<usize> = (0..self.synthetic.classes.len()).collect();
        self.step_in_order(&order)
    }

    /// Runs the next iteration visiting classes (positions in
    /// [`SyntheticDataset::classes`]) in the given order. The result does
    /// not depend on the order.
    pub fn step_in_order(&mut self, order: &[usize]) -> Result<f64> {
        let iteration = self.iterations_completed();
        let dims = self.cfg.extractor_dims(self.real.dim());
        let extractor = sample_params(&dims, derive_seed(self.cfg.seed, &[rng::TAG_EXTRACTOR, iteration as u64]))?;
        let mut total = 0.0;
        for &pos in order {
            let label = self.synthetic.classes[pos].label;
            let batch = self.real_batch(iteration, label);
            let real_emb = forward(&extractor, &batch)?;
            let records = &self.synthetic.classes[pos].records;
            let trace = forward_trace(&extractor, records)?;
            let loss = self.loss(&real_emb, trace.output())?;
            if !loss.value.is_finite() {
                return Err(Error::NonFiniteLoss { iteration, class: label });
            }
            total += loss.value;
            let grad = backward_input_from_trace(&extractor, &trace, &loss.grad_syn)?;
            let records = &mut self.synthetic.classes[pos].records;
            records.axpy(-self.cfg.learning_rate, &grad)?;
            if !records.is_finite() {
                return Err(Error::NonFiniteLoss { iteration, class: label });
            }
        }
        let mean = total / order.len().max(1) as f64;
        self.loss_trace.push(mean);
        self.synthetic.provenance.iterations_completed += 1;
        Ok(mean)
    }

    fn loss(&self, real_emb: &Matrix, syn_emb: &Matrix) -> Result<LossResult> {
        match self.cfg.distance {
            Distance::Mmd => mmd_loss(real_emb, syn_emb),
            Distance::Lqm => {
                let q = &self.quantiles[&syn_emb.rows()];
                let targets = quantile_targets(real_emb, q)?;
                lqm_loss_with_targets(&targets, syn_emb, self.cfg.lqm)
            }
        }
    }

    /// Uniform mini-batch of one class: without replacement when the class
    /// is large enough, with replacement otherwise.
    fn real_batch(&self, iteration: usize, label: usize) -> Matrix {
        let rows = &self.class_rows[label];
        let size = self.cfg.real_batch_size;
        let mut rng = rng_for(self.cfg.seed, &[rng::TAG_REAL_BATCH, iteration as u64, label as u64]);
        let picked: Vec<usize> = if rows.len() >= size {
            index::sample(&mut rng, rows.len(), size).into_iter().map(|i| rows[i]).collect()
        } else {
            (0..size).map(|_| rows[rng.random_range(0..rows.len())]).collect()
        };
        self.real.features().select_rows(&picked)
    }

    pub fn finish(self) -> CondenseOutcome {
        CondenseOutcome { synthetic: self.synthetic, loss_trace: self.loss_trace }
    }
}

/// Initializes synthetic records from real ones and runs all configured
/// iterations.
pub fn condense(real: &LabeledDataset, cfg: &CondenseConfig) -> Result<CondenseOutcome> {
    let mut run = Condenser::new(real, cfg.clone())?;
    for _ in 0..cfg.iterations {
        run.step()?;
    }
    Ok(run.finish())
}
