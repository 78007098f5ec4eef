//! Feedforward ReLU networks with reverse-mode gradients.
//!
//! A network maps `D x in` batches to `D x out` through affine layers with
//! ReLU between them and identity on the output. Weights are stored `in x
//! out` so a layer is `X · W + b`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{self, rng_for};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::InvalidDims(format!(
                "bias of length {} for a {}x{} weight",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(Layer { weight, bias })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDims("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::InvalidDims(format!(
                    "layer output {} does not feed layer input {}",
                    w[0].fan_out(),
                    w[1].fan_in()
                )));
            }
        }
        Ok(MlpParams { layers })
    }

    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer { weight: Matrix::zeros(w[0], w[1]), bias: vec![0.0; w[1]] })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in()];
        dims.extend(self.layers.iter().map(Layer::fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.rows() * l.weight.cols() + l.bias.len()).sum()
    }

    fn apply_update(&mut self, grads: &[LayerGrad], step: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            for (w, gw) in layer.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()) {
                *w -= step * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= step * gb;
            }
        }
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidDims("need at least input and output widths".into()));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidDims(format!("zero width in {layer_dims:?}")));
    }
    Ok(())
}

/// Draws weights i.i.d. `N(0, 2/fan_in)` and zero biases.
pub fn sample_params(layer_dims: &[usize], seed: u64) -> Result<MlpParams> {
    validate_dims(layer_dims)?;
    let mut rng = rng_for(seed, &[rng::TAG_EXTRACTOR]);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let std = libm::sqrt(2.0 / w[0] as f64);
            let data = (0..w[0] * w[1]).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            Layer { weight: Matrix::from_vec(w[0], w[1], data).expect("sized"), bias: vec![0.0; w[1]] }
        })
        .collect();
    Ok(MlpParams { layers })
}

/// Activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `inputs[l]` is what layer `l` consumed.
    inputs: Vec<Matrix>,
    /// Pre-activation of every hidden layer.
    hidden_pre: Vec<Matrix>,
    output: Matrix,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }

    /// Post-ReLU activation of the last hidden layer, or the input for a
    /// single-layer network.
    pub fn last_hidden(&self) -> &Matrix {
        &self.inputs[self.inputs.len() - 1]
    }
}

fn affine(layer: &Layer, x: &Matrix) -> Result<Matrix> {
    let mut z = x.matmul(&layer.weight)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(z)
}

fn relu(z: &Matrix) -> Matrix {
    let mut a = z.clone();
    a.as_mut_slice().iter_mut().for_each(|v| {
        if *v <= 0.0 {
            *v = 0.0
        }
    });
    a
}

fn check_input(params: &MlpParams, x: &Matrix) -> Result<()> {
    if x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            context: "forward",
            expected: (x.rows(), params.input_dim()),
            found: x.shape(),
        });
    }
    Ok(())
}

pub fn forward_trace(params: &MlpParams, x: &Matrix) -> Result<ForwardTrace> {
    check_input(params, x)?;
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut hidden_pre = Vec::with_capacity(n - 1);
    let mut current = x.clone();
    for layer in &params.layers[..n - 1] {
        let z = affine(layer, &current)?;
        let a = relu(&z);
        inputs.push(current);
        hidden_pre.push(z);
        current = a;
    }
    let output = affine(&params.layers[n - 1], &current)?;
    inputs.push(current);
    Ok(ForwardTrace { inputs, hidden_pre, output })
}

pub fn forward(params: &MlpParams, x: &Matrix) -> Result<Matrix> {
    check_input(params, x)?;
    let mut current = affine(&params.layers[0], x)?;
    for layer in &params.layers[1..] {
        current = affine(layer, &relu(&current))?;
    }
    Ok(current)
}

/// Activation of the last hidden layer (after ReLU). Fails for a network
/// without hidden layers.
pub fn last_hidden(params: &MlpParams, x: &Matrix) -> Result<Matrix> {
    if params.layers.len() < 2 {
        return Err(Error::InvalidDims("network has no hidden layer".into()));
    }
    check_input(params, x)?;
    let mut current = x.clone();
    for layer in &params.layers[..params.layers.len() - 1] {
        current = relu(&affine(layer, &current)?);
    }
    Ok(current)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub input: Matrix,
    pub layers: Vec<LayerGrad>,
}

fn backward_impl(
    params: &MlpParams,
    trace: &ForwardTrace,
    upstream: &Matrix,
    want_params: bool,
) -> Result<(Matrix, Vec<LayerGrad>)> {
    if upstream.shape() != trace.output.shape() {
        return Err(Error::ShapeMismatch {
            context: "backward",
            expected: trace.output.shape(),
            found: upstream.shape(),
        });
    }
    let n = params.layers.len();
    let mut layer_grads = Vec::new();
    let mut delta = upstream.clone();
    for l in (0..n).rev() {
        let layer = &params.layers[l];
        if want_params {
            let weight = trace.inputs[l].transposed_matmul(&delta)?;
            let mut bias = vec![0.0; layer.fan_out()];
            for r in 0..delta.rows() {
                for (b, d) in bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            layer_grads.push(LayerGrad { weight, bias });
        }
        let mut back = delta.matmul_transposed(&layer.weight)?;
        if l > 0 {
            // ReLU subgradient is 0 at exactly 0.
            let pre = &trace.hidden_pre[l - 1];
            for (g, z) in back.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        delta = back;
    }
    layer_grads.reverse();
    Ok((delta, layer_grads))
}

/// Gradients of `<upstream, forward(params, x)>` with respect to the input
/// and to every layer's parameters.
pub fn backward(params: &MlpParams, trace: &ForwardTrace, upstream: &Matrix) -> Result<Gradients> {
    let (input, layers) = backward_impl(params, trace, upstream, true)?;
    Ok(Gradients { input, layers })
}

/// Input gradient only, from a recorded trace.
pub fn backward_input_from_trace(
    params: &MlpParams,
    trace: &ForwardTrace,
    upstream: &Matrix,
) -> Result<Matrix> {
    backward_impl(params, trace, upstream, false).map(|(g, _)| g)
}

/// Contracts `upstream` (`D x out`) with the Jacobian of the forward map at
/// `x`, giving a `D x in` gradient.
pub fn backward_to_input(params: &MlpParams, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    let trace = forward_trace(params, x)?;
    backward_input_from_trace(params, &trace, upstream)
}

/// A network whose outputs are class logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams(MlpParams);

impl ClassifierParams {
    pub fn new(params: MlpParams) -> Result<Self> {
        if params.output_dim() < 2 {
            return Err(Error::InvalidDims("classifier needs at least two outputs".into()));
        }
        Ok(ClassifierParams(params))
    }

    /// Randomly initialized classifier `[input, hidden.., classes]`.
    pub fn sample(input: usize, hidden: &[usize], classes: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        ClassifierParams::new(sample_params(&dims, seed)?)
    }

    pub fn mlp(&self) -> &MlpParams {
        &self.0
    }

    pub fn into_mlp(self) -> MlpParams {
        self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.output_dim()
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        forward(&self.0, x)
    }
}

/// Mini-batch SGD settings for softmax cross-entropy training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, learning_rate: 0.05, batch_size: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_labels(params: &ClassifierParams, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = params.num_classes();
    if let Some(&label) = data.labels().iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    if data.dim() != params.mlp().input_dim() {
        return Err(Error::ShapeMismatch {
            context: "classifier input",
            expected: (data.len(), params.mlp().input_dim()),
            found: data.features().shape(),
        });
    }
    Ok(())
}

/// Softmax over the active logits; inactive classes get probability 0.
fn masked_softmax_row(logits: &[f64], active: Option<&[bool]>, out: &mut [f64]) {
    let is_active = |c: usize| active.is_none_or(|m| m[c]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(c, _)| is_active(*c))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (c, (o, &v)) in out.iter_mut().zip(logits).enumerate() {
        *o = if is_active(c) { libm::exp(v - max) } else { 0.0 };
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Trains with softmax cross-entropy over all classes.
pub fn train_classifier(
    params: &ClassifierParams,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ClassifierParams> {
    train_classifier_masked(params, data, cfg, seed, None)
}

/// Trains with softmax cross-entropy restricted to the `active` classes;
/// logits of inactive classes are treated as `-inf`.
pub fn train_classifier_masked(
    params: &ClassifierParams,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    seed: u64,
    active: Option<&[bool]>,
) -> Result<ClassifierParams> {
    check_labels(params, data)?;
    cfg.validate()?;
    let classes = params.num_classes();
    if let Some(mask) = active {
        if mask.len() != classes {
            return Err(Error::InvalidConfig(format!(
                "class mask has {} entries for {} classes",
                mask.len(),
                classes
            )));
        }
        if let Some(&label) = data.labels().iter().find(|&&l| !mask[l]) {
            return Err(Error::InvalidConfig(format!("label {label} is masked out during training")));
        }
    }
    let mut model = params.0.clone();
    let mut rng = rng_for(seed, &[rng::TAG_TRAIN_SHUFFLE]);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut probs = vec![0.0; classes];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = data.features().select_rows(batch);
            let trace = forward_trace(&model, &x)?;
            let logits = trace.output();
            let mut upstream = Matrix::zeros(batch.len(), classes);
            let inv = 1.0 / batch.len() as f64;
            for (r, &idx) in batch.iter().enumerate() {
                masked_softmax_row(logits.row(r), active, &mut probs);
                let row = upstream.row_mut(r);
                for c in 0..classes {
                    row[c] = probs[c] * inv;
                }
                row[data.labels()[idx]] -= inv;
            }
            let grads = backward(&model, &trace, &upstream)?;
            model.apply_update(&grads.layers, cfg.learning_rate);
        }
    }
    if model.layers.iter().any(|l| !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite())) {
        return Err(Error::NonFinite("classifier parameters after training"));
    }
    Ok(ClassifierParams(model))
}

/// Argmax prediction per row; ties go to the lowest class index.
pub fn predict(params: &ClassifierParams, x: &Matrix, active: Option<&[bool]>) -> Result<Vec<usize>> {
    let logits = params.logits(x)?;
    Ok((0..logits.rows())
        .map(|r| {
            let mut best = None::<(usize, f64)>;
            for (c, &v) in logits.row(r).iter().enumerate() {
                if active.is_some_and(|m| !m[c]) {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((c, v));
                }
            }
            best.map_or(0, |(c, _)| c)
        })
        .collect())
}

/// Fraction of records whose argmax logit equals the label.
pub fn accuracy(params: &ClassifierParams, data: &LabeledDataset) -> Result<f64> {
    accuracy_masked(params, data, None)
}

pub fn accuracy_masked(
    params: &ClassifierParams,
    data: &LabeledDataset,
    active: Option<&[bool]>,
) -> Result<f64> {
    check_labels(params, data)?;
    let pred = predict(params, data.features(), active)?;
    let hits = pred.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rng_for(seed, &[99]);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn naive_forward(params: &MlpParams, x: &Matrix) -> Matrix {
        let layers = params.layers();
        let mut cur: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
        for (li, layer) in layers.iter().enumerate() {
            cur = cur
                .iter()
                .map(|row| {
                    (0..layer.fan_out())
                        .map(|j| {
                            let mut s = layer.bias[j];
                            for (i, v) in row.iter().enumerate() {
                                s += v * layer.weight.get(i, j);
                            }
                            if li + 1 < layers.len() && s < 0.0 {
                                0.0
                            } else {
                                s
                            }
                        })
                        .collect()
                })
                .collect();
        }
        Matrix::from_rows(&cur).unwrap()
    }

    /// `sum(upstream ⊙ forward(x))`, the scalar whose gradient `backward`
    /// computes.
    fn contracted(params: &MlpParams, x: &Matrix, upstream: &Matrix) -> f64 {
        let y = naive_forward(params, x);
        y.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs().max(b.abs()).max(1e-8))
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        assert_eq!(sample_params(&[2, 4], 7).unwrap(), sample_params(&[2, 4], 7).unwrap());
        assert_ne!(sample_params(&[2, 4], 7).unwrap(), sample_params(&[2, 4], 8).unwrap());
        let p = sample_params(&[3, 5, 2], 1).unwrap();
        assert!(p.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert!(sample_params(&[3], 1).is_err());
        assert!(sample_params(&[3, 0, 2], 1).is_err());
    }

    #[test]
    fn init_standard_deviation() {
        let p = sample_params(&[1000, 1000], 11).unwrap();
        let w = p.layers()[0].weight.as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let want = (2.0f64 / 1000.0).sqrt();
        assert!((std - want).abs() / want < 0.05, "std {std} vs {want}");
    }

    #[test]
    fn forward_examples() {
        let zeros = MlpParams::zeros(&[3, 4, 2]).unwrap();
        let x = random_matrix(5, 3, 1);
        assert!(forward(&zeros, &x).unwrap().as_slice().iter().all(|&v| v == 0.0));

        let ident = MlpParams::from_layers(vec![Layer::new(Matrix::identity(3), vec![0.0; 3]).unwrap()]).unwrap();
        assert_eq!(forward(&ident, &x).unwrap(), x);

        let p = sample_params(&[3, 8, 6, 4], 5).unwrap();
        let got = forward(&p, &x).unwrap();
        let want = naive_forward(&p, &x);
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(forward(&p, &random_matrix(2, 4, 1)).is_err());
        assert_eq!(forward_trace(&p, &x).unwrap().output(), &got);
    }

    #[test]
    fn forward_is_positively_homogeneous_without_biases() {
        let p = sample_params(&[4, 16, 16, 3], 9).unwrap();
        let x = random_matrix(6, 4, 2);
        let mut cx = x.clone();
        cx.scale(2.5);
        let y = forward(&p, &x).unwrap();
        let cy = forward(&p, &cx).unwrap();
        for (a, b) in y.as_slice().iter().zip(cy.as_slice()) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_examples() {
        let p = sample_params(&[3, 5, 2], 3).unwrap();
        let x = random_matrix(4, 3, 3);
        let g = backward_to_input(&p, &x, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));

        let single = sample_params(&[3, 2], 4).unwrap();
        let up = random_matrix(4, 2, 5);
        let g = backward_to_input(&single, &x, &up).unwrap();
        let want = up.matmul(&single.layers()[0].weight.transpose()).unwrap();
        assert_eq!(g, want);

        assert!(backward_to_input(&p, &x, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..10u64 {
            let p = sample_params(&[3, 6, 5, 2], seed).unwrap();
            let x = random_matrix(4, 3, seed + 100);
            let up = random_matrix(4, 2, seed + 200);
            let trace = forward_trace(&p, &x).unwrap();
            let g = backward(&p, &trace, &up).unwrap();
            for i in 0..x.as_slice().len() {
                let mut xp = x.clone();
                xp.as_mut_slice()[i] += h;
                let mut xm = x.clone();
                xm.as_mut_slice()[i] -= h;
                let fd = (contracted(&p, &xp, &up) - contracted(&p, &xm, &up)) / (2.0 * h);
                assert!(rel_err(fd, g.input.as_slice()[i]) < 1e-6, "input {i}: {fd} vs {}", g.input.as_slice()[i]);
            }
            for l in 0..p.layers().len() {
                for i in 0..p.layers()[l].weight.as_slice().len() {
                    let mut pp = p.clone();
                    pp.layers_mut()[l].weight.as_mut_slice()[i] += h;
                    let mut pm = p.clone();
                    pm.layers_mut()[l].weight.as_mut_slice()[i] -= h;
                    let fd = (contracted(&pp, &x, &up) - contracted(&pm, &x, &up)) / (2.0 * h);
                    assert!(rel_err(fd, g.layers[l].weight.as_slice()[i]) < 1e-6);
                }
                for i in 0..p.layers()[l].bias.len() {
                    let mut pp = p.clone();
                    pp.layers_mut()[l].bias[i] += h;
                    let mut pm = p.clone();
                    pm.layers_mut()[l].bias[i] -= h;
                    let fd = (contracted(&pp, &x, &up) - contracted(&pm, &x, &up)) / (2.0 * h);
                    assert!(rel_err(fd, g.layers[l].bias[i]) < 1e-6);
                }
            }
        }
    }

    fn blobs(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng_for(seed, &[1]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -3.0 } else { 3.0 };
            rows.push([centre + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            labels.push(c);
        }
        LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn training_separates_linearly_separable_classes() {
        let data = blobs(100, 1);
        // Oracle: the separating line x = 0 classifies every record.
        assert!(data
            .labels()
            .iter()
            .enumerate()
            .all(|(i, &l)| (data.features().get(i, 0) > 0.0) == (l == 1)));
        let init = ClassifierParams::sample(2, &[16], 2, 3).unwrap();
        let cfg = TrainConfig { epochs: 200, learning_rate: 0.05, batch_size: 16 };
        let trained = train_classifier(&init, &data, &cfg, 4).unwrap();
        assert_eq!(accuracy(&trained, &data).unwrap(), 1.0);
        assert_eq!(trained, train_classifier(&init, &data, &cfg, 4).unwrap());
    }

    #[test]
    fn zero_epochs_leave_parameters_unchanged() {
        let data = blobs(10, 2);
        let init = ClassifierParams::sample(2, &[4], 2, 3).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert_eq!(train_classifier(&init, &data, &cfg, 1).unwrap(), init);
    }

    #[test]
    fn training_errors() {
        let init = ClassifierParams::sample(2, &[4], 2, 3).unwrap();
        let empty = LabeledDataset::empty(2, 2);
        assert_eq!(
            train_classifier(&init, &empty, &TrainConfig::default(), 1),
            Err(Error::EmptyDataset)
        );
        let bad = LabeledDataset::new(Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), vec![2]).unwrap();
        assert!(matches!(
            train_classifier(&init, &bad, &TrainConfig::default(), 1),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(ClassifierParams::new(MlpParams::zeros(&[2, 1]).unwrap()).is_err());
    }

    #[test]
    fn accuracy_with_constant_logits() {
        let mut p = MlpParams::zeros(&[1, 2]).unwrap();
        p.layers_mut()[0].bias = vec![1.0, 0.0];
        let clf = ClassifierParams::new(p).unwrap();
        let x = Matrix::from_rows(&[[0.3], [0.1], [-2.0]]).unwrap();
        let zeros = LabeledDataset::with_num_classes(x.clone(), vec![0, 0, 0], 2).unwrap();
        let ones = LabeledDataset::with_num_classes(x, vec![1, 1, 1], 2).unwrap();
        assert_eq!(accuracy(&clf, &zeros).unwrap(), 1.0);
        assert_eq!(accuracy(&clf, &ones).unwrap(), 0.0);
        // Masking class 0 out flips every prediction.
        assert_eq!(accuracy_masked(&clf, &ones, Some(&[false, true])).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let clf = ClassifierParams::new(MlpParams::zeros(&[1, 3]).unwrap()).unwrap();
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(predict(&clf, &x, None).unwrap(), vec![0]);
    }

    #[test]
    fn untrained_network_is_at_chance_on_random_labels() {
        let mut rng = rng_for(5, &[2]);
        let n = 10_000;
        let x: Vec<[f64; 4]> = (0..n).map(|_| core::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let labels = (0..n).map(|_| rng.random_range(0..2usize)).collect();
        let data = LabeledDataset::new(Matrix::from_rows(&x).unwrap(), labels).unwrap();
        let clf = ClassifierParams::sample(4, &[16], 2, 6).unwrap();
        let acc = accuracy(&clf, &data).unwrap();
        assert!((acc - 0.5).abs() <= 0.02, "accuracy {acc}");
    }
}
