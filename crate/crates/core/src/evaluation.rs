//! Train-on-synthetic evaluation and latent-space diagnostics.
//!
//! The diagnostics train one probe classifier on the synthetic data and use
//! its last hidden layer as the extractor in which real and synthetic
//! latent distributions are compared, per class and per feature.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::condenser::SyntheticDataset;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{accuracy, last_hidden, train_classifier, ClassifierParams, TrainConfig};
use crate::quantiles::cvm_optimal_quantiles;
use crate::rng::{self, derive_seed};
use crate::stats::{cvm_two_sample_sorted, extreme_value_fraction, quantile_of_sorted, sort_ascending};
use crate::tensor::Matrix;

/// Classifier architecture and training recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { hidden: vec![64, 64], train: TrainConfig::default(), seed: 0 }
    }
}

impl EvalConfig {
    /// Probe settings: 500 training epochs.
    pub fn probe() -> Self {
        EvalConfig { train: TrainConfig { epochs: 500, ..TrainConfig::default() }, ..EvalConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub accuracies: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Trains one freshly initialized classifier on `train` for run `run`.
pub fn train_fresh(train: &LabeledDataset, num_classes: usize, cfg: &EvalConfig, run: u64) -> Result<ClassifierParams> {
    let init_seed = derive_seed(cfg.seed, &[rng::TAG_EVAL_RUN, run, rng::TAG_TRAIN_INIT]);
    let init = ClassifierParams::sample(train.dim(), &cfg.hidden, num_classes.max(2), init_seed)?;
    train_classifier(&init, train, &cfg.train, derive_seed(cfg.seed, &[rng::TAG_EVAL_RUN, run]))
}

/// Trains `runs` independently seeded classifiers on `train` and reports
/// their test accuracy.
pub fn evaluate_labeled(train: &LabeledDataset, test: &LabeledDataset, runs: usize, cfg: &EvalConfig) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = train.num_classes().max(test.num_classes());
    let accuracies = (0..runs as u64)
        .map(|run| {
            let model = train_fresh(train, classes, cfg, run)?;
            accuracy(&model, test)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&accuracies);
    Ok(EvalReport { mean, std, accuracies })
}

pub fn evaluate_synthetic(syn: &SyntheticDataset, test: &LabeledDataset, runs: usize, cfg: &EvalConfig) -> Result<EvalReport> {
    if syn.is_empty() {
        return Err(Error::EmptyDataset);
    }
    evaluate_labeled(&syn.to_labeled(), test, runs, cfg)
}

/// Per-class diagnostic values and their equal-weight mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub per_class: Vec<ClassDiagnostic>,
    pub overall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnostic {
    pub class: usize,
    pub value: f64,
}

/// Classifier trained on the synthetic data whose last hidden layer serves
/// as the diagnostic extractor.
pub fn train_probe(syn: &SyntheticDataset, probe_seed: u64, cfg: &EvalConfig) -> Result<ClassifierParams> {
    if syn.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.hidden.is_empty() {
        return Err(Error::InvalidConfig("probe needs at least one hidden layer".into()));
    }
    let data = syn.to_labeled();
    let init = ClassifierParams::sample(data.dim(), &cfg.hidden, syn.num_classes().max(2), derive_seed(probe_seed, &[rng::TAG_PROBE, 0]))?;
    train_classifier(&init, &data, &cfg.train, derive_seed(probe_seed, &[rng::TAG_PROBE, 1]))
}

struct ClassLatents {
    class: usize,
    real: Matrix,
    syn: Matrix,
}

fn class_latents(real: &LabeledDataset, syn: &SyntheticDataset, probe: &ClassifierParams) -> Result<Vec<ClassLatents>> {
    if real.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::new();
    for c in syn.classes() {
        if c.records.rows() == 0 {
            continue;
        }
        let real_rows = real.class_features(c.label);
        if real_rows.rows() == 0 {
            continue;
        }
        out.push(ClassLatents {
            class: c.label,
            real: last_hidden(probe.mlp(), &real_rows)?,
            syn: last_hidden(probe.mlp(), &c.records)?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

fn report(per_class: Vec<ClassDiagnostic>) -> DiagnosticReport {
    let overall = per_class.iter().map(|c| c.value).sum::<f64>() / per_class.len() as f64;
    DiagnosticReport { per_class, overall }
}

fn sorted_column(m: &Matrix, f: usize) -> Vec<f64> {
    let mut col = m.column(f);
    sort_ascending(&mut col);
    col
}

/// Mean two-sample CvM statistic over latent features, per class.
pub fn diagnose_cvm(real: &LabeledDataset, syn: &SyntheticDataset, probe_seed: u64, cfg: &EvalConfig) -> Result<DiagnosticReport> {
    let probe = train_probe(syn, probe_seed, cfg)?;
    diagnose_cvm_with(real, syn, &probe)
}

pub fn diagnose_cvm_with(real: &LabeledDataset, syn: &SyntheticDataset, probe: &ClassifierParams) -> Result<DiagnosticReport> {
    let per_class = class_latents(real, syn, probe)?
        .into_iter()
        .map(|l| {
            let features = l.real.cols();
            let total: f64 = (0..features)
                .map(|f| cvm_two_sample_sorted(&sorted_column(&l.real, f), &sorted_column(&l.syn, f)))
                .sum();
            ClassDiagnostic { class: l.class, value: total / features as f64 }
        })
        .collect();
    Ok(report(per_class))
}

/// Percentage of synthetic latent values outside the real latent range, per
/// class.
pub fn diagnose_extremes(real: &LabeledDataset, syn: &SyntheticDataset, probe_seed: u64, cfg: &EvalConfig) -> Result<DiagnosticReport> {
    let probe = train_probe(syn, probe_seed, cfg)?;
    diagnose_extremes_with(real, syn, &probe)
}

pub fn diagnose_extremes_with(real: &LabeledDataset, syn: &SyntheticDataset, probe: &ClassifierParams) -> Result<DiagnosticReport> {
    let per_class = class_latents(real, syn, probe)?
        .into_iter()
        .map(|l| Ok(ClassDiagnostic { class: l.class, value: extreme_value_fraction(&l.real, &l.syn)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(per_class))
}

/// One grid point of the exported step functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub value: f64,
    pub real: f64,
    pub syn: f64,
    /// ECDF of the optimal k-point approximation (mass `1/k` at each real
    /// quantile target), with `k` the class's synthetic count.
    pub optimal: f64,
}

/// ECDFs of one latent feature of one class for real, synthetic and optimal
/// k-point data, over the sorted pooled grid of their values.
pub fn export_ecdf(
    real: &LabeledDataset,
    syn: &SyntheticDataset,
    class: usize,
    feature: usize,
    probe_seed: u64,
    cfg: &EvalConfig,
) -> Result<Vec<EcdfRow>> {
    let probe = train_probe(syn, probe_seed, cfg)?;
    export_ecdf_with(real, syn, class, feature, &probe)
}

pub fn export_ecdf_with(
    real: &LabeledDataset,
    syn: &SyntheticDataset,
    class: usize,
    feature: usize,
    probe: &ClassifierParams,
) -> Result<Vec<EcdfRow>> {
    let latents = class_latents(real, syn, probe)?;
    let Some(l) = latents.iter().find(|l| l.class == class) else {
        return Err(Error::IndexOutOfRange { what: "class", index: class, len: syn.num_classes() });
    };
    if feature >= l.real.cols() {
        return Err(Error::IndexOutOfRange { what: "feature", index: feature, len: l.real.cols() });
    }
    let real_col = sorted_column(&l.real, feature);
    let syn_col = sorted_column(&l.syn, feature);
    let q = cvm_optimal_quantiles(syn_col.len())?;
    let optimal = q.probs().iter().map(|&p| quantile_of_sorted(&real_col, p)).collect::<Result<Vec<f64>>>()?;

    let mut grid: Vec<f64> = real_col.iter().chain(&syn_col).chain(&optimal).copied().collect();
    sort_ascending(&mut grid);
    grid.dedup();
    let ecdf = |sorted: &[f64], x: f64| sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64;
    Ok(grid
        .into_iter()
        .map(|x| EcdfRow { value: x, real: ecdf(&real_col, x), syn: ecdf(&syn_col, x), optimal: ecdf(&optimal, x) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condenser::init_synthetic;
    use crate::rng::rng_for;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(per_class: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng_for(seed, &[17]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3usize {
            let angle = c as f64 * 2.0 * core::f64::consts::PI / 3.0;
            for _ in 0..per_class {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                rows.push([4.0 * libm::cos(angle) + a, 4.0 * libm::sin(angle) + b]);
                labels.push(c);
            }
        }
        LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    fn quick() -> EvalConfig {
        EvalConfig { hidden: vec![16, 16], train: TrainConfig { epochs: 30, learning_rate: 0.05, batch_size: 32 }, seed: 1 }
    }

    #[test]
    fn evaluation_is_reproducible_and_matches_full_data() {
        let train = blobs(60, 1);
        let test = blobs(60, 2);
        let syn = SyntheticDataset::from_labeled(&train);
        let a = evaluate_synthetic(&syn, &test, 1, &quick()).unwrap();
        let b = evaluate_synthetic(&syn, &test, 1, &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, evaluate_labeled(&train, &test, 1, &quick()).unwrap());
        assert!(a.mean > 0.9);
        assert_eq!(a.std, 0.0);
    }

    #[test]
    fn evaluation_errors() {
        let test = blobs(5, 2);
        assert!(evaluate_labeled(&test, &test, 0, &quick()).is_err());
        let empty = SyntheticDataset::from_labeled(&LabeledDataset::empty(2, 3));
        assert_eq!(evaluate_synthetic(&empty, &test, 1, &quick()), Err(Error::EmptyDataset));
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - libm::sqrt(0.08 / 3.0)).abs() < 1e-12);
        let (m2, s2) = mean_std(&[0.9, 0.5, 0.7]);
        assert!((m - m2).abs() < 1e-15 && (s - s2).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_vanish_on_copy_of_real() {
        let real = blobs(30, 3);
        let syn = SyntheticDataset::from_labeled(&real);
        let cvm = diagnose_cvm(&real, &syn, 5, &quick()).unwrap();
        assert!(cvm.per_class.iter().all(|c| c.value == 0.0));
        assert_eq!(cvm.overall, 0.0);
        let ext = diagnose_extremes(&real, &syn, 5, &quick()).unwrap();
        assert_eq!(ext.overall, 0.0);
        assert_eq!(cvm, diagnose_cvm(&real, &syn, 5, &quick()).unwrap());
    }

    #[test]
    fn subset_has_no_extremes() {
        let real = blobs(40, 4);
        let syn = init_synthetic(&real, &[5, 5, 5], 2, false).unwrap();
        let ext = diagnose_extremes(&real, &syn, 1, &quick()).unwrap();
        assert_eq!(ext.overall, 0.0);
        let cvm = diagnose_cvm(&real, &syn, 1, &quick()).unwrap();
        assert!(cvm.overall >= 0.0);
    }

    #[test]
    fn extremes_are_percentages() {
        let real = blobs(40, 4);
        let mut syn = init_synthetic(&real, &[5, 5, 5], 2, false).unwrap();
        let mut classes = syn.classes().to_vec();
        classes[0].records.scale(25.0);
        syn = SyntheticDataset::new(classes, 3, 2, syn.provenance.clone()).unwrap();
        let ext = diagnose_extremes(&real, &syn, 1, &quick()).unwrap();
        assert!(ext.per_class.iter().all(|c| (0.0..=100.0).contains(&c.value)));
        assert!(ext.per_class[0].value > 0.0);
    }

    #[test]
    fn ecdf_export_properties() {
        let real = blobs(30, 6);
        let copy = SyntheticDataset::from_labeled(&real);
        let rows = export_ecdf(&real, &copy, 1, 0, 3, &quick()).unwrap();
        assert!(rows.iter().all(|r| r.real == r.syn));
        assert!(rows.windows(2).all(|w| w[0].value < w[1].value
            && w[0].real <= w[1].real && w[0].syn <= w[1].syn && w[0].optimal <= w[1].optimal));
        let last = rows.last().unwrap();
        assert_eq!((last.real, last.syn, last.optimal), (1.0, 1.0, 1.0));

        let one = init_synthetic(&real, &[1, 1, 1], 1, false).unwrap();
        let probe = train_probe(&one, 3, &quick()).unwrap();
        let rows = export_ecdf_with(&real, &one, 2, 1, &probe).unwrap();
        let latent = last_hidden(probe.mlp(), &real.class_features(2)).unwrap();
        let mut col = latent.column(1);
        sort_ascending(&mut col);
        let median = quantile_of_sorted(&col, 0.5).unwrap();
        for r in &rows {
            assert_eq!(r.optimal, if r.value >= median { 1.0 } else { 0.0 });
        }

        assert!(export_ecdf_with(&real, &one, 7, 0, &probe).is_err());
        assert!(export_ecdf_with(&real, &one, 0, 999, &probe).is_err());
    }
}
