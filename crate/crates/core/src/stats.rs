//! Statistics over empirical samples: ECDF, quantiles, Cramér–von Mises
//! statistics and the extreme latent value diagnostic.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// A non-empty sample of finite reals, stored in construction order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Sample { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Sample::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ecdf(&self) -> Ecdf {
        let mut sorted = self.values.clone();
        sort_ascending(&mut sorted);
        Ecdf { sorted }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        empirical_quantile(self, q)
    }
}

/// Empirical CDF of a sample; `F(x) = #{v <= x} / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        quantile_of_sorted(&self.sorted, q)
    }
}

/// Stable ascending sort of finite values.
pub fn sort_ascending(values: &mut [f64]) {
    values.sort_by(f64::total_cmp);
}

/// Quantile by linear interpolation between order statistics at position
/// `q * (n - 1)`.
pub fn empirical_quantile(sample: &Sample, q: f64) -> Result<f64> {
    let mut sorted = sample.values.clone();
    sort_ascending(&mut sorted);
    quantile_of_sorted(&sorted, q)
}

/// Same rule as [`empirical_quantile`] for an already sorted slice.
pub fn quantile_of_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::QuantileOutOfRange(q));
    }
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    if lo + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// One-sample Cramér–von Mises statistic of `k` ascending points against a
/// continuous CDF: `1/(12k) + Σ (F(x_(i)) - (2i-1)/(2k))²`.
pub fn cvm_one_sample_vs_points<F>(cdf: F, points: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Unsorted);
    }
    let k = points.len() as f64;
    let tail: f64 = points
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = cdf(x) - (2.0 * (i + 1) as f64 - 1.0) / (2.0 * k);
            d * d
        })
        .sum();
    Ok(1.0 / (12.0 * k) + tail)
}

/// Two-sample Cramér–von Mises statistic in pooled-ECDF form:
/// `n·m/(n+m)² · Σ_z (F_a(z) - F_b(z))²` over every pooled value `z`.
///
/// Identical multisets score exactly zero.
pub fn cvm_two_sample(a: &Sample, b: &Sample) -> f64 {
    cvm_two_sample_sorted(&a.ecdf().sorted, &b.ecdf().sorted)
}

/// [`cvm_two_sample`] on already sorted slices. Both must be non-empty.
pub fn cvm_two_sample_sorted(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let fa = |z: f64| a.partition_point(|&v| v <= z) as f64 / n;
    let fb = |z: f64| b.partition_point(|&v| v <= z) as f64 / m;
    let sum: f64 = a
        .iter()
        .chain(b.iter())
        .map(|&z| {
            let d = fa(z) - fb(z);
            d * d
        })
        .sum();
    n * m / ((n + m) * (n + m)) * sum
}

/// Percentage of synthetic latent entries lying outside the per-feature
/// range of the real latent entries.
pub fn extreme_value_fraction(real_emb: &Matrix, syn_emb: &Matrix) -> Result<f64> {
    if real_emb.cols() != syn_emb.cols() {
        return Err(Error::ShapeMismatch {
            context: "extreme_value_fraction",
            expected: (syn_emb.rows(), real_emb.cols()),
            found: syn_emb.shape(),
        });
    }
    if real_emb.rows() == 0 || syn_emb.rows() == 0 || real_emb.cols() == 0 {
        return Err(Error::EmptySample);
    }
    let features = real_emb.cols();
    let mut lo = real_emb.row(0).to_vec();
    let mut hi = lo.clone();
    for r in 1..real_emb.rows() {
        for (f, &v) in real_emb.row(r).iter().enumerate() {
            lo[f] = lo[f].min(v);
            hi[f] = hi[f].max(v);
        }
    }
    let mut extreme = 0usize;
    for r in 0..syn_emb.rows() {
        for (f, &v) in syn_emb.row(r).iter().enumerate() {
            if v > hi[f] || v < lo[f] {
                extreme += 1;
            }
        }
    }
    Ok(100.0 * extreme as f64 / (syn_emb.rows() * features) as f64)
}
