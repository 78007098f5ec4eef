//! Distribution matching distances between real and synthetic embeddings,
//! with gradients with respect to the synthetic embeddings.
//!
//! Both functions take `D x F` real and `B x F` synthetic embedding batches.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantiles::QuantileSet;
use crate::stats::{quantile_of_sorted, sort_ascending};
use crate::tensor::Matrix;

/// Loss value and its gradient with respect to the synthetic embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_syn: Matrix,
}

/// Which distance to match latent distributions with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Lqm,
    Mmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LqmOptions {
    /// Also divide the loss by the feature count.
    pub normalize_features: bool,
}

fn check_widths(real: &Matrix, syn: &Matrix, context: &'static str) -> Result<()> {
    if real.rows() == 0 || syn.rows() == 0 {
        return Err(Error::EmptySample);
    }
    if real.cols() != syn.cols() {
        return Err(Error::ShapeMismatch { context, expected: (syn.rows(), real.cols()), found: syn.shape() });
    }
    Ok(())
}

/// Per-feature real quantile targets: row `i` holds every feature's value
/// at probability `quantiles[i]`.
pub fn quantile_targets(real_emb: &Matrix, quantiles: &QuantileSet) -> Result<Matrix> {
    if real_emb.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let (k, features) = (quantiles.len(), real_emb.cols());
    let mut targets = Matrix::zeros(k, features);
    let mut column = Vec::with_capacity(real_emb.rows());
    for f in 0..features {
        column.clear();
        column.extend((0..real_emb.rows()).map(|r| real_emb.get(r, f)));
        sort_ascending(&mut column);
        for (i, &q) in quantiles.probs().iter().enumerate() {
            targets.set(i, f, quantile_of_sorted(&column, q)?);
        }
    }
    Ok(targets)
}

/// Latent quantile matching loss
/// `(1/B) Σ_f Σ_i (t_{i,f} - s_{(i),f})²`, where `s_{(i),f}` is the `i`-th
/// smallest synthetic value of feature `f` and `t_{i,f}` the real value of
/// feature `f` at the `i`-th optimal quantile.
///
/// Targets are constants. The gradient for the synthetic row holding rank
/// `i` in feature `f` is `(2/B)(s_{(i),f} - t_{i,f})`; ties are ranked by
/// original row index.
pub fn lqm_loss(
    real_emb: &Matrix,
    syn_emb: &Matrix,
    quantiles: &QuantileSet,
    opts: LqmOptions,
) -> Result<LossResult> {
    check_widths(real_emb, syn_emb, "lqm_loss")?;
    let budget = syn_emb.rows();
    if quantiles.len() != budget {
        return Err(Error::ShapeMismatch {
            context: "lqm_loss quantile count",
            expected: (budget, 1),
            found: (quantiles.len(), 1),
        });
    }
    let targets = quantile_targets(real_emb, quantiles)?;
    lqm_loss_with_targets(&targets, syn_emb, opts)
}

/// [`lqm_loss`] against precomputed targets (`B x F`).
pub fn lqm_loss_with_targets(targets: &Matrix, syn_emb: &Matrix, opts: LqmOptions) -> Result<LossResult> {
    if targets.shape() != syn_emb.shape() {
        return Err(Error::ShapeMismatch {
            context: "lqm_loss targets",
            expected: syn_emb.shape(),
            found: targets.shape(),
        });
    }
    let (budget, features) = syn_emb.shape();
    if budget == 0 {
        return Err(Error::EmptySample);
    }
    let mut scale = 1.0 / budget as f64;
    if opts.normalize_features {
        scale /= features as f64;
    }
    let mut grad_syn = Matrix::zeros(budget, features);
    let mut value = 0.0;
    let mut order: Vec<usize> = (0..budget).collect();
    for f in 0..features {
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.sort_by(|&a, &b| syn_emb.get(a, f).total_cmp(&syn_emb.get(b, f)));
        for (rank, &row) in order.iter().enumerate() {
            let diff = syn_emb.get(row, f) - targets.get(rank, f);
            value += diff * diff;
            grad_syn.set(row, f, 2.0 * scale * diff);
        }
    }
    Ok(LossResult { value: value * scale, grad_syn })
}

/// Linear-kernel MMD `||μ_T - μ_S||²` between per-feature means, with
/// synthetic gradient rows `-(2/B)(μ_T - μ_S)`.
pub fn mmd_loss(real_emb: &Matrix, syn_emb: &Matrix) -> Result<LossResult> {
    check_widths(real_emb, syn_emb, "mmd_loss")?;
    let mu_real = real_emb.column_means();
    let mu_syn = syn_emb.column_means();
    let diff: Vec<f64> = mu_real.iter().zip(&mu_syn).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|d| d * d).sum();
    let budget = syn_emb.rows();
    let coeff = -2.0 / budget as f64;
    let mut grad_syn = Matrix::zeros(budget, syn_emb.cols());
    for r in 0..budget {
        for (g, d) in grad_syn.row_mut(r).iter_mut().zip(&diff) {
            *g = coeff * d;
        }
    }
    Ok(LossResult { value, grad_syn })
}
