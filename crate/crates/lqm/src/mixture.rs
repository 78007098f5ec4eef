//! Gaussian mixture benchmark data.

use lqm_core::data::LabeledDataset;
use lqm_core::rng::rng_for;
use lqm_core::tensor::Matrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{IoError, Result};

/// Mean of class `c`. With at least as many dimensions as classes the means
/// sit at `separation · e_c`; otherwise they are spread evenly on a circle
/// of radius `separation` in the first two coordinates (on a line with
/// spacing `separation` in one dimension).
pub fn class_mean(c: usize, classes: usize, dim: usize, separation: f64) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    if dim >= classes {
        mean[c] = separation;
    } else if dim >= 2 {
        let angle = std::f64::consts::TAU * c as f64 / classes as f64;
        mean[0] = separation * angle.cos();
        mean[1] = separation * angle.sin();
    } else {
        mean[0] = separation * c as f64;
    }
    mean
}

/// `per_class` unit-covariance Gaussian records for each of `classes`
/// classes, grouped by class.
pub fn gen_mixture(classes: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    if classes == 0 || per_class == 0 || dim == 0 {
        return Err(IoError::Config(format!(
            "classes, per_class and dim must be positive, got {classes}, {per_class}, {dim}"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(IoError::Config(format!("separation must be finite and non-negative, got {separation}")));
    }
    let mut data = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let mean = class_mean(c, classes, dim, separation);
        let mut rng = rng_for(seed, &[c as u64]);
        for _ in 0..per_class {
            data.extend(mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
            labels.push(c);
        }
    }
    let features = Matrix::from_vec(classes * per_class, dim, data)?;
    Ok(LabeledDataset::with_num_classes(features, labels, classes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_deterministic() {
        let d = gen_mixture(3, 1000, 2, 4.0, 7).unwrap();
        assert_eq!(d.len(), 3000);
        assert_eq!(d.class_counts(), vec![1000; 3]);
        assert_eq!(d, gen_mixture(3, 1000, 2, 4.0, 7).unwrap());
        assert_ne!(d, gen_mixture(3, 1000, 2, 4.0, 8).unwrap());
    }

    #[test]
    fn class_statistics() {
        let d = gen_mixture(4, 4000, 5, 3.0, 1).unwrap();
        for c in 0..4 {
            let x = d.class_features(c);
            let means = x.column_means();
            let want = class_mean(c, 4, 5, 3.0);
            for j in 0..5 {
                // Standard error is 1/sqrt(4000) ~ 0.016.
                assert!((means[j] - want[j]).abs() < 0.08, "class {c} feature {j}: {}", means[j]);
                let var = x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / 4000.0;
                assert!((var - 1.0).abs() < 0.1);
            }
        }
    }

    #[test]
    fn circle_layout_when_dims_are_few() {
        let m: Vec<Vec<f64>> = (0..4).map(|c| class_mean(c, 4, 2, 2.0)).collect();
        for v in &m {
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 2.0).abs() < 1e-12);
        }
        assert!((m[1][1] - 2.0).abs() < 1e-12);
        assert_eq!(class_mean(2, 3, 1, 1.5), vec![3.0]);
    }

    #[test]
    fn zero_separation_is_chance() {
        let train = gen_mixture(4, 250, 3, 0.0, 1).unwrap();
        let test = gen_mixture(4, 250, 3, 0.0, 2).unwrap();
        let cfg = lqm_core::evaluation::EvalConfig::default();
        let acc = lqm_core::evaluation::evaluate_labeled(&train, &test, 1, &cfg).unwrap().mean;
        let sigma = (0.25f64 * 0.75 / 1000.0).sqrt();
        assert!((acc - 0.25).abs() <= 3.0 * sigma, "accuracy {acc}");
    }

    #[test]
    fn invalid_arguments() {
        assert!(gen_mixture(0, 1, 1, 1.0, 0).is_err());
        assert!(gen_mixture(1, 1, 1, -1.0, 0).is_err());
        assert!(gen_mixture(1, 1, 1, f64::NAN, 0).is_err());
    }
}
