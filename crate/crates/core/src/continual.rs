//! Class-incremental continual learning with condensed replay.
//!
//! A dataset is split into tasks with disjoint class sets. At each stage a
//! method sees only the current task's training data (plus whatever memory
//! it keeps) and is then tested on every task seen so far, filling one row
//! of a lower-triangular accuracy matrix. Classifier heads cover all
//! classes from the start; logits of classes not yet seen are masked out
//! during both training and evaluation, and no task identifier is ever used
//! at inference.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::condenser::{allocate_proportional, condense, Budget, CondenseConfig};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::evaluation::{mean_std, EvalConfig};
use crate::nn::{accuracy_masked, train_classifier_masked, ClassifierParams};
use crate::rng::{self, derive_seed, rng_for};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || self.train <= 0.0 || self.test <= 0.0 {
            return Err(Error::InvalidConfig(format!("invalid split ratios {all:?}")));
        }
        if libm::fabs(all.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::InvalidConfig(format!("split ratios must sum to 1, got {all:?}")));
        }
        Ok(())
    }

    /// Record counts `(train, val, test)` for a class of `n >= 3` records.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let nf = n as f64;
        let mut val = libm::round(self.val * nf) as usize;
        if self.val > 0.0 {
            val = val.max(1);
        }
        let mut train = (libm::round(self.train * nf) as usize).max(1);
        while train + val >= n {
            if train > 1 {
                train -= 1;
            } else {
                val -= 1;
            }
        }
        (train, val, n - train - val)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub classes: Vec<usize>,
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSequence {
    tasks: Vec<Task>,
    num_classes: usize,
}

impl TaskSequence {
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// True when no class appears in two tasks.
    pub fn classes_disjoint(&self) -> bool {
        let mut seen = vec![false; self.num_classes];
        for t in &self.tasks {
            for &c in &t.classes {
                if seen[c] {
                    return false;
                }
                seen[c] = true;
            }
        }
        true
    }

    /// Union of all task training splits.
    pub fn joint_train(&self) -> Result<LabeledDataset> {
        let dim = self.tasks.first().map_or(0, |t| t.train.dim());
        let mut all = LabeledDataset::empty(dim, self.num_classes);
        for t in &self.tasks {
            all.extend(&t.train)?;
        }
        Ok(all)
    }

    fn seen_mask(&self, stage: usize) -> Vec<bool> {
        let mut mask = vec![false; self.num_classes];
        for t in &self.tasks[..=stage] {
            for &c in &t.classes {
                mask[c] = true;
            }
        }
        mask
    }
}

/// `(class, train rows, val rows, test rows)`.
type ClassSplit = (usize, Vec<usize>, Vec<usize>, Vec<usize>);

/// Stratified per-class split, then classes grouped in label order into
/// tasks of `classes_per_task`.
pub fn build_task_sequence(
    data: &LabeledDataset,
    classes_per_task: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<TaskSequence> {
    ratios.validate()?;
    if classes_per_task == 0 {
        return Err(Error::InvalidConfig("classes_per_task must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = data.present_classes();
    if !classes.len().is_multiple_of(classes_per_task) {
        log::warn!(
            "{} classes do not divide into tasks of {classes_per_task}; the last task is smaller",
            classes.len()
        );
    }
    let mut splits = Vec::with_capacity(classes.len());
    for &c in &classes {
        let mut rows = data.class_indices(c);
        if rows.len() < 3 {
            return Err(Error::ClassTooSmall { class: c, records: rows.len() });
        }
        rows.shuffle(&mut rng_for(seed, &[rng::TAG_SPLIT, c as u64]));
        let (n_train, n_val, _) = ratios.counts(rows.len());
        let test = rows.split_off(n_train + n_val);
        let val = rows.split_off(n_train);
        splits.push((c, rows, val, test));
    }
    let tasks = splits
        .chunks(classes_per_task)
        .map(|group| {
            let gather = |pick: fn(&ClassSplit) -> &Vec<usize>| {
                let idx: Vec<usize> = group.iter().flat_map(|g| pick(g).iter().copied()).collect();
                data.subset(&idx)
            };
            Task {
                classes: group.iter().map(|g| g.0).collect(),
                train: gather(|g| &g.1),
                val: gather(|g| &g.2),
                test: gather(|g| &g.3),
            }
        })
        .collect();
    let seq = TaskSequence { tasks, num_classes: data.num_classes() };
    assert!(seq.classes_disjoint());
    Ok(seq)
}

/// Lower-triangular matrix of test accuracies: `get(k, i)` is the accuracy
/// on task `i` after training stage `k` (both 1-based, `i <= k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(num_tasks: usize) -> Self {
        AccuracyMatrix { rows: (1..=num_tasks).map(|k| vec![None; k]).collect() }
    }

    /// Builds from full rows; row `k` must have `k` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = AccuracyMatrix::new(rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::InvalidConfig(format!("row {} has {} entries", k + 1, row.len())));
            }
            for (i, &v) in row.iter().enumerate() {
                m.set(k + 1, i + 1, v)?;
            }
        }
        Ok(m)
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn set(&mut self, stage: usize, task: usize, value: f64) -> Result<()> {
        self.check(stage, task)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!("accuracy {value} outside [0, 1]")));
        }
        self.rows[stage - 1][task - 1] = Some(value);
        Ok(())
    }

    pub fn get(&self, stage: usize, task: usize) -> Result<f64> {
        self.check(stage, task)?;
        self.rows[stage - 1][task - 1].ok_or(Error::MissingAccuracy { stage, task })
    }

    /// Every filled entry as `(stage, task, accuracy)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, row) in self.rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    out.push((k + 1, i + 1, *v));
                }
            }
        }
        out
    }

    fn check(&self, stage: usize, task: usize) -> Result<()> {
        if stage == 0 || stage > self.rows.len() {
            return Err(Error::IndexOutOfRange { what: "stage", index: stage, len: self.rows.len() });
        }
        if task == 0 || task > stage {
            return Err(Error::IndexOutOfRange { what: "task", index: task, len: stage });
        }
        Ok(())
    }
}

/// `AA_k = (1/k) Σ_{i<=k} A[k][i]`.
pub fn average_accuracy(a: &AccuracyMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > a.num_tasks() {
        return Err(Error::IndexOutOfRange { what: "stage", index: k, len: a.num_tasks() });
    }
    let mut sum = 0.0;
    for i in 1..=k {
        sum += a.get(k, i)?;
    }
    Ok(sum / k as f64)
}

/// `BWT_k = (1/(k-1)) Σ_{i<k} (A[k][i] - A[i][i])`.
pub fn backward_transfer(a: &AccuracyMatrix, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::BwtUndefined);
    }
    if k > a.num_tasks() {
        return Err(Error::IndexOutOfRange { what: "stage", index: k, len: a.num_tasks() });
    }
    let mut sum = 0.0;
    for i in 1..k {
        sum += a.get(k, i)? - a.get(i, i)?;
    }
    Ok(sum / (k - 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CglMethod {
    /// Condense each task into a memory of synthetic records and train a
    /// fresh classifier on the whole memory at every stage.
    CondensedReplay(CondenseConfig),
    /// Keep training one classifier on each task's raw data only.
    Finetuning,
    /// Train once on all tasks' data together.
    Joint,
}

impl CglMethod {
    pub fn name(&self) -> String {
        match self {
            CglMethod::CondensedReplay(cfg) => format!("replay-{:?}", cfg.distance).to_lowercase(),
            CglMethod::Finetuning => "finetune".into(),
            CglMethod::Joint => "joint".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CglConfig {
    pub classifier: EvalConfig,
    pub runs: usize,
    /// Per-task memory budget as a fraction of the task's training size.
    pub budget_ratio: f64,
    pub seed: u64,
}

impl Default for CglConfig {
    fn default() -> Self {
        CglConfig { classifier: EvalConfig::default(), runs: 5, budget_ratio: 0.01, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Summary {
        let (mean, std) = mean_std(values);
        Summary { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CglRun {
    pub matrix: AccuracyMatrix,
    pub average_accuracy: f64,
    pub backward_transfer: Option<f64>,
    /// Replay memory size after each stage (empty for other methods).
    pub memory_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CglReport {
    pub method: String,
    pub runs: Vec<CglRun>,
    pub average_accuracy: Summary,
    pub backward_transfer: Option<Summary>,
}

/// Per-task budgets (by label) for condensing `task`.
pub fn task_budgets(task: &Task, ratio: f64) -> Vec<usize> {
    let total = libm::ceil(ratio * task.train.len() as f64) as usize;
    allocate_proportional(total, &task.train.class_counts())
}

pub fn run_cgl(tasks: &TaskSequence, method: &CglMethod, cfg: &CglConfig) -> Result<CglReport> {
    if tasks.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    if !(cfg.budget_ratio > 0.0 && cfg.budget_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!("budget_ratio must be in (0, 1], got {}", cfg.budget_ratio)));
    }
    cfg.classifier.train.validate()?;
    let runs = (0..cfg.runs as u64)
        .map(|r| run_once(tasks, method, cfg, derive_seed(cfg.seed, &[rng::TAG_CGL_RUN, r])))
        .collect::<Result<Vec<_>>>()?;
    let aa: Vec<f64> = runs.iter().map(|r| r.average_accuracy).collect();
    let bwt: Option<Vec<f64>> = runs.iter().map(|r| r.backward_transfer).collect();
    Ok(CglReport {
        method: method.name(),
        average_accuracy: Summary::of(&aa),
        backward_transfer: bwt.map(|b| Summary::of(&b)),
        runs,
    })
}

fn stage_seed(run_seed: u64, stage: usize, part: u64) -> u64 {
    derive_seed(run_seed, &[rng::TAG_CGL_STAGE, stage as u64, part])
}

fn fresh_classifier(tasks: &TaskSequence, cfg: &CglConfig, seed: u64) -> Result<ClassifierParams> {
    let dim = tasks.tasks[0].train.dim();
    ClassifierParams::sample(dim, &cfg.classifier.hidden, tasks.num_classes().max(2), seed)
}

fn test_row(tasks: &TaskSequence, model: &ClassifierParams, stage: usize, matrix: &mut AccuracyMatrix) -> Result<()> {
    let mask = tasks.seen_mask(stage);
    for (i, task) in tasks.tasks[..=stage].iter().enumerate() {
        let acc = accuracy_masked(model, &task.test, Some(&mask))?;
        matrix.set(stage + 1, i + 1, acc)?;
    }
    Ok(())
}

fn run_once(tasks: &TaskSequence, method: &CglMethod, cfg: &CglConfig, seed: u64) -> Result<CglRun> {
    let b = tasks.len();
    let mut matrix = AccuracyMatrix::new(b);
    let mut memory_sizes = Vec::new();
    let train_cfg = &cfg.classifier.train;
    match method {
        CglMethod::CondensedReplay(base) => {
            let dim = tasks.tasks[0].train.dim();
            let mut memory = LabeledDataset::empty(dim, tasks.num_classes());
            for (stage, task) in tasks.tasks.iter().enumerate() {
                let condense_cfg = CondenseConfig {
                    budget: Budget::Explicit(task_budgets(task, cfg.budget_ratio)),
                    clamp_budget: true,
                    seed: stage_seed(seed, stage, 0),
                    ..base.clone()
                };
                let out = condense(&task.train, &condense_cfg)?;
                memory.extend(&out.synthetic.to_labeled())?;
                memory_sizes.push(memory.len());
                let init = fresh_classifier(tasks, cfg, stage_seed(seed, stage, 1))?;
                let mask = tasks.seen_mask(stage);
                let model = train_classifier_masked(&init, &memory, train_cfg, stage_seed(seed, stage, 2), Some(&mask))?;
                test_row(tasks, &model, stage, &mut matrix)?;
            }
        }
        CglMethod::Finetuning => {
            let mut model = fresh_classifier(tasks, cfg, stage_seed(seed, 0, 1))?;
            for (stage, task) in tasks.tasks.iter().enumerate() {
                let mask = tasks.seen_mask(stage);
                model = train_classifier_masked(&model, &task.train, train_cfg, stage_seed(seed, stage, 2), Some(&mask))?;
                test_row(tasks, &model, stage, &mut matrix)?;
            }
        }
        CglMethod::Joint => {
            let init = fresh_classifier(tasks, cfg, stage_seed(seed, 0, 1))?;
            let all = tasks.joint_train()?;
            let mask = tasks.seen_mask(b - 1);
            let model = train_classifier_masked(&init, &all, train_cfg, stage_seed(seed, 0, 2), Some(&mask))?;
            test_row(tasks, &model, b - 1, &mut matrix)?;
        }
    }
    let average_accuracy = average_accuracy(&matrix, b)?;
    let backward_transfer = match method {
        CglMethod::Joint => None,
        _ if b >= 2 => Some(backward_transfer(&matrix, b)?),
        _ => None,
    };
    Ok(CglRun { matrix, average_accuracy, backward_transfer, memory_sizes })
}
