//! Optimal quantile sets for k-point discrete approximations.
//!
//! The Cramér–von Mises optimum has the closed form `(2i-1)/(2k)`. The
//! Anderson–Darling optimum is the fixed point of an alternating update
//! between cell midpoints `q_i` and cell boundaries `Q_i`:
//!
//! ```text
//! q_i <- (Q_{i-1} + Q_i) / 2
//! Q_i <- ln((1-q_i)/(1-q_{i+1})) / ln(q_{i+1}(1-q_i) / (q_i(1-q_{i+1})))
//! ```
//!
//! with `Q_0 = 0` and `Q_k = 1` (the limit of the boundary update as
//! `q_{k+1} -> 1`). Convergence is measured on the cell masses
//! `p_i = Q_i - Q_{i-1}`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_AD_EPS: f64 = 1e-10;
pub const DEFAULT_AD_MAX_ITERS: usize = 10_000;

/// Goodness-of-fit statistic a quantile set is optimal for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Cvm,
    Ad,
}

/// Ascending probabilities in `(0, 1)`, symmetric about one half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSet {
    probs: Vec<f64>,
    criterion: Criterion,
}

impl QuantileSet {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Optimal set of size `k` for `criterion` with default AD settings.
    pub fn optimal(k: usize, criterion: Criterion) -> Result<Self> {
        match criterion {
            Criterion::Cvm => cvm_optimal_quantiles(k),
            Criterion::Ad => ad_optimal_quantiles(k, DEFAULT_AD_EPS, DEFAULT_AD_MAX_ITERS),
        }
    }
}

/// `{(2i-1)/(2k) : i = 1..k}`.
pub fn cvm_optimal_quantiles(k: usize) -> Result<QuantileSet> {
    if k == 0 {
        return Err(Error::BudgetMustBePositive);
    }
    let denom = (2 * k) as f64;
    let probs = (1..=k).map(|i| (2 * i - 1) as f64 / denom).collect();
    Ok(QuantileSet { probs, criterion: Criterion::Cvm })
}

/// Converged state of the Anderson–Darling iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct AdSolution {
    /// Midpoints `q_1..q_k`.
    pub quantiles: Vec<f64>,
    /// Interior and end boundaries `Q_1..Q_k` (`Q_0 = 0` is implicit).
    pub boundaries: Vec<f64>,
    pub iterations: usize,
    pub last_eps: f64,
}

impl AdSolution {
    pub fn into_set(self) -> QuantileSet {
        QuantileSet { probs: self.quantiles, criterion: Criterion::Ad }
    }
}

/// Anderson–Darling optimal quantiles, starting from equal cells
/// `Q_i = i/k`.
pub fn ad_optimal_quantiles(k: usize, eps_max: f64, max_iters: usize) -> Result<QuantileSet> {
    ad_solve(k, eps_max, max_iters).map(AdSolution::into_set)
}

pub fn ad_solve(k: usize, eps_max: f64, max_iters: usize) -> Result<AdSolution> {
    if k == 0 {
        return Err(Error::BudgetMustBePositive);
    }
    let boundaries: Vec<f64> = (1..=k).map(|i| i as f64 / k as f64).collect();
    ad_refine(&boundaries, eps_max, max_iters)
}

/// Runs the fixed-point iteration from the given boundaries `Q_1..Q_k`.
///
/// Feeding a converged solution's boundaries back in terminates after one
/// step.
pub fn ad_refine(boundaries: &[f64], eps_max: f64, max_iters: usize) -> Result<AdSolution> {
    let k = boundaries.len();
    if k == 0 {
        return Err(Error::BudgetMustBePositive);
    }
    if eps_max.is_nan() || eps_max <= 0.0 {
        return Err(Error::InvalidConfig(alloc::format!("eps_max must be positive, got {eps_max}")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be positive".into()));
    }
    let valid = boundaries.iter().all(|b| b.is_finite() && *b > 0.0 && *b <= 1.0)
        && boundaries.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(Error::InvalidConfig(
            "boundaries must be strictly increasing in (0, 1]".into(),
        ));
    }

    let mut upper = boundaries.to_vec();
    upper[k - 1] = 1.0;
    let mut mass = masses(&upper);
    let mut mid = alloc::vec![0.0; k];
    let mut last_eps = f64::INFINITY;

    for t in 1..=max_iters {
        for i in 0..k {
            let lower = if i == 0 { 0.0 } else { upper[i - 1] };
            mid[i] = 0.5 * (lower + upper[i]);
        }
        for i in 0..k - 1 {
            upper[i] = boundary_between(mid[i], mid[i + 1]);
        }
        upper[k - 1] = 1.0;
        let next_mass = masses(&upper);
        last_eps = next_mass
            .iter()
            .zip(&mass)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max);
        mass = next_mass;
        if !last_eps.is_finite() {
            break;
        }
        if last_eps <= eps_max {
            return Ok(AdSolution { quantiles: mid, boundaries: upper, iterations: t, last_eps });
        }
    }
    Err(Error::NotConverged { iterations: max_iters, last_eps })
}

/// Boundary between adjacent cells with midpoints `a < b`.
fn boundary_between(a: f64, b: f64) -> f64 {
    let num = libm::log((1.0 - a) / (1.0 - b));
    let den = libm::log(b * (1.0 - a) / (a * (1.0 - b)));
    num / den
}

fn masses(upper: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    upper
        .iter()
        .map(|&u| {
            let p = u - prev;
            prev = u;
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::cvm_one_sample_vs_points;
    use alloc::string::ToString;
    use alloc::vec;

    /// Independent re-implementation: recomputes every midpoint from scratch
    /// out of the full boundary vector `[0, Q_1, .., Q_k]` each sweep.
    fn ad_oracle(k: usize, eps: f64) -> Vec<f64> {
        let mut cuts: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let mut p: Vec<f64> = vec![1.0 / k as f64; k];
        loop {
            let q: Vec<f64> = (1..=k).map(|i| (cuts[i - 1] + cuts[i]) / 2.0).collect();
            let mut next = vec![0.0];
            for i in 0..k {
                if i + 1 == k {
                    next.push(1.0);
                } else {
                    let (a, b) = (q[i], q[i + 1]);
                    let num = ((1.0 - a) / (1.0 - b)).ln();
                    let den = (b / (1.0 - b)).ln() - (a / (1.0 - a)).ln();
                    next.push(num / den);
                }
            }
            let np: Vec<f64> = (1..=k).map(|i| next[i] - next[i - 1]).collect();
            let e = np.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            cuts = next;
            p = np;
            if e <= eps {
                return q;
            }
        }
    }

    #[test]
    fn cvm_examples() {
        assert_eq!(cvm_optimal_quantiles(1).unwrap().probs(), &[0.5]);
        assert_eq!(cvm_optimal_quantiles(2).unwrap().probs(), &[0.25, 0.75]);
        assert_eq!(cvm_optimal_quantiles(4).unwrap().probs(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(cvm_optimal_quantiles(0), Err(Error::BudgetMustBePositive));
        assert_eq!(Error::BudgetMustBePositive.to_string(), "budget must be positive");
    }

    #[test]
    fn cvm_spacing_and_symmetry() {
        for k in 1..50 {
            let q = cvm_optimal_quantiles(k).unwrap();
            let p = q.probs();
            for i in 0..k {
                assert_eq!(p[i] + p[k - 1 - i], 1.0);
            }
            for w in p.windows(2) {
                assert!((w[1] - w[0] - 1.0 / k as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cvm_set_minimizes_one_sample_statistic() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in [1usize, 3, 5, 10] {
            let opt = cvm_optimal_quantiles(k).unwrap();
            let best = cvm_one_sample_vs_points(uniform, opt.probs()).unwrap();
            for _ in 0..1000 {
                let mut pts: Vec<f64> =
                    opt.probs().iter().map(|p| p + (next() - 0.5) * 0.1).collect();
                pts.sort_by(f64::total_cmp);
                assert!(cvm_one_sample_vs_points(uniform, &pts).unwrap() > best);
            }
        }
    }

    #[test]
    fn ad_single_point_is_median() {
        let q = ad_optimal_quantiles(1, DEFAULT_AD_EPS, DEFAULT_AD_MAX_ITERS).unwrap();
        assert_eq!(q.probs(), &[0.5]);
        assert_eq!(q.criterion(), Criterion::Ad);
    }

    #[test]
    fn ad_odd_k_has_exact_median() {
        let q = ad_optimal_quantiles(3, DEFAULT_AD_EPS, DEFAULT_AD_MAX_ITERS).unwrap();
        assert_eq!(q.probs()[1], 0.5);
    }

    #[test]
    fn ad_two_points_match_oracle() {
        let q = ad_optimal_quantiles(2, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
        let oracle = ad_oracle(2, 1e-10);
        let p = q.probs();
        assert!(p[0] > 0.0 && p[0] < 0.5 && p[0] < p[1]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!((p[0] - oracle[0]).abs() < 1e-12);
        // Regression value: the equal-cell start is already the fixed point.
        assert_eq!(p, &[0.25, 0.75]);
    }

    #[test]
    fn ad_matches_oracle_for_larger_k() {
        for k in [3usize, 4, 8, 16] {
            let q = ad_optimal_quantiles(k, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
            let oracle = ad_oracle(k, 1e-10);
            for (a, b) in q.probs().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
            }
        }
        // Regression constants for k = 3 and k = 4.
        let q3 = ad_optimal_quantiles(3, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
        assert!((q3.probs()[0] - 0.154_546_130_660_362_4).abs() < 1e-9);
        let q4 = ad_optimal_quantiles(4, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
        assert!((q4.probs()[0] - 0.107_230_704_276_372_8).abs() < 1e-9);
    }

    #[test]
    fn ad_is_idempotent() {
        for k in [2usize, 5, 9] {
            let sol = ad_solve(k, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
            let again = ad_refine(&sol.boundaries, 1e-10, DEFAULT_AD_MAX_ITERS).unwrap();
            assert_eq!(again.iterations, 1);
            for (a, b) in again.quantiles.iter().zip(&sol.quantiles) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ad_reports_non_convergence() {
        match ad_optimal_quantiles(16, 1e-14, 3) {
            Err(Error::NotConverged { iterations, last_eps }) => {
                assert_eq!(iterations, 3);
                assert!(last_eps > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(ad_optimal_quantiles(0, 1e-10, 10).is_err());
        assert!(ad_optimal_quantiles(3, 0.0, 10).is_err());
    }
}
