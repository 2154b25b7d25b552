//! Softmax classifiers with exact gradients for distribution targets.
//!
//! Two architectures: a linear map and a one-hidden-layer tanh network, both
//! ending in a max-subtracted softmax. Two losses over the output
//! distribution: categorical cross-entropy `−Σ target·ln(pred)` and summed
//! squared error `Σ (pred − target)²`. Gradients are hand-derived
//! backpropagation; the finite-difference tests hold them to a relative error
//! of 1e-4.
//!
//! Everything here is pure and deterministic: same params, same batch, same
//! result, bit for bit.

use std::path::Path;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, Featurizer, SoftExample};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::label_core::LabelDistribution;
use crate::rng::{self, domain};

/// Predictions are clamped below at this value before taking logs, keeping
/// cross-entropy finite. The perturbation is orders of magnitude below every
/// test tolerance.
pub const LOG_CLAMP: f64 = 1e-12;

/// Classifier shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Linear,
    OneHidden { hidden: usize },
}

/// Loss over an output distribution and a target distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Categorical cross-entropy, −Σ target·ln(pred), natural log.
    Cce,
    /// Squared error summed (not averaged) over classes.
    Mse,
}

/// One affine layer; weights are row-major, `out_dim` rows of `in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (row, o) in out.iter_mut().enumerate() {
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            *o += w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
        }
        out
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.in_dim == other.in_dim && self.out_dim == other.out_dim
    }
}

/// All parameters of one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub arch: Architecture,
    pub input_dim: usize,
    pub classes: usize,
    pub layers: Vec<Layer>,
}

/// ∂loss/∂θ, shape-congruent with the [`ClassifierParams`] it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Layer>,
}

fn layer_dims(arch: Architecture, input_dim: usize, classes: usize) -> Vec<(usize, usize)> {
    match arch {
        Architecture::Linear => vec![(input_dim, classes)],
        Architecture::OneHidden { hidden } => vec![(input_dim, hidden), (hidden, classes)],
    }
}

/// Initialize weights uniformly in `[−s, s]` with `s = sqrt(6/(fan_in +
/// fan_out))` per layer; biases start at zero. Draws happen layer by layer
/// in row-major order, so a seed pins every weight.
pub fn init_params(
    arch: Architecture,
    input_dim: usize,
    classes: usize,
    seed: u64,
) -> Result<ClassifierParams> {
    if input_dim < 1 {
        return Err(Error::BadConfig("input_dim must be >= 1".into()));
    }
    if classes < 2 {
        return Err(Error::BadConfig(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if let Architecture::OneHidden { hidden } = arch {
        if hidden < 1 {
            return Err(Error::BadConfig("hidden width must be >= 1".into()));
        }
    }
    let mut rng = rng::stream(seed, domain::PARAM_INIT, 0);
    let layers = layer_dims(arch, input_dim, classes)
        .into_iter()
        .map(|(in_dim, out_dim)| {
            let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
            Layer {
                in_dim,
                out_dim,
                weights: (0..in_dim * out_dim)
                    .map(|_| rng.random_range(-s..s))
                    .collect(),
                bias: vec![0.0; out_dim],
            }
        })
        .collect();
    Ok(ClassifierParams {
        arch,
        input_dim,
        classes,
        layers,
    })
}

impl ClassifierParams {
    /// Gradient set of the same shape, all zeros.
    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    /// θ ← θ − lr·g, elementwise.
    pub fn sgd_step(&self, grads: &GradientSet, lr: f64) -> Result<ClassifierParams> {
        if grads.layers.len() != self.layers.len()
            || self
                .layers
                .iter()
                .zip(&grads.layers)
                .any(|(p, g)| !p.same_shape(g))
        {
            return Err(Error::ShapeMismatch);
        }
        let mut out = self.clone();
        for (layer, grad) in out.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                *b -= lr * g;
            }
        }
        Ok(out)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

struct ForwardTrace {
    /// tanh activations of the hidden layer, absent for linear models.
    hidden: Option<Vec<f64>>,
    probs: Vec<f64>,
}

fn forward_trace(params: &ClassifierParams, x: &FeatureVector) -> Result<ForwardTrace> {
    if x.dim() != params.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim,
            actual: x.dim(),
        });
    }
    match params.arch {
        Architecture::Linear => {
            let logits = params.layers[0].affine(x.values());
            Ok(ForwardTrace {
                hidden: None,
                probs: softmax(&logits),
            })
        }
        Architecture::OneHidden { .. } => {
            let mut hidden = params.layers[0].affine(x.values());
            for h in hidden.iter_mut() {
                *h = h.tanh();
            }
            let logits = params.layers[1].affine(&hidden);
            Ok(ForwardTrace {
                probs: softmax(&logits),
                hidden: Some(hidden),
            })
        }
    }
}

/// Class distribution predicted for `x` (max-subtracted softmax output).
pub fn forward(params: &ClassifierParams, x: &FeatureVector) -> Result<LabelDistribution> {
    let trace = forward_trace(params, x)?;
    LabelDistribution::new(trace.probs)
        .map_err(|e| Error::Internal(format!("softmax produced an invalid distribution: {e}")))
}

/// −Σ target·ln(pred), with predictions clamped below at [`LOG_CLAMP`].
/// For a one-hot target this reduces to −ln(pred[class]).
pub fn cce_loss(pred: &LabelDistribution, target: &LabelDistribution) -> Result<f64> {
    if pred.k() != target.k() {
        return Err(Error::DimensionMismatch {
            expected: target.k(),
            actual: pred.k(),
        });
    }
    Ok(pred
        .probs()
        .iter()
        .zip(target.probs())
        .map(|(&p, &t)| -t * p.max(LOG_CLAMP).ln())
        .sum())
}

/// Σ (pred − target)², summed over classes.
pub fn mse_loss(pred: &LabelDistribution, target: &LabelDistribution) -> Result<f64> {
    if pred.k() != target.k() {
        return Err(Error::DimensionMismatch {
            expected: target.k(),
            actual: pred.k(),
        });
    }
    Ok(pred
        .probs()
        .iter()
        .zip(target.probs())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum())
}

/// Loss of `kind` between one prediction and its target.
pub fn loss_value(
    kind: LossKind,
    pred: &LabelDistribution,
    target: &LabelDistribution,
) -> Result<f64> {
    match kind {
        LossKind::Cce => cce_loss(pred, target),
        LossKind::Mse => mse_loss(pred, target),
    }
}

fn loss_on_probs(kind: LossKind, probs: &[f64], target: &[f64]) -> f64 {
    match kind {
        LossKind::Cce => probs
            .iter()
            .zip(target)
            .map(|(&p, &t)| -t * p.max(LOG_CLAMP).ln())
            .sum(),
        LossKind::Mse => probs
            .iter()
            .zip(target)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum(),
    }
}

/// ∂loss/∂probs; the clamped region of cross-entropy has zero derivative.
fn loss_grad_on_probs(kind: LossKind, probs: &[f64], target: &[f64]) -> Vec<f64> {
    match kind {
        LossKind::Cce => probs
            .iter()
            .zip(target)
            .map(|(&p, &t)| if p > LOG_CLAMP { -t / p } else { 0.0 })
            .collect(),
        LossKind::Mse => probs
            .iter()
            .zip(target)
            .map(|(&p, &t)| 2.0 * (p - t))
            .collect(),
    }
}

/// dL/dlogits from dL/dprobs through the softmax Jacobian:
/// δ_i = p_i·(g_i − Σ_j g_j·p_j).
fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = grad_probs.iter().zip(probs).map(|(g, p)| g * p).sum();
    probs
        .iter()
        .zip(grad_probs)
        .map(|(&p, &g)| p * (g - dot))
        .collect()
}

fn accumulate_outer(layer: &mut Layer, delta: &[f64], input: &[f64]) {
    for (row, &d) in delta.iter().enumerate() {
        let w = &mut layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
        for (wi, &xi) in w.iter_mut().zip(input) {
            *wi += d * xi;
        }
        layer.bias[row] += d;
    }
}

/// Mean loss over `batch` and the exact gradient of that mean.
///
/// For a linear model under cross-entropy the per-example logit gradient is
/// the closed form `pred − target`; the backpropagation here reproduces it
/// and generalizes to the hidden-layer model and to squared error.
pub fn gradient(
    params: &ClassifierParams,
    batch: &[SoftExample],
    loss: LossKind,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grads = params.zero_gradients();
    let mut total_loss = 0.0;
    for example in batch {
        if example.target.k() != params.classes {
            return Err(Error::DimensionMismatch {
                expected: params.classes,
                actual: example.target.k(),
            });
        }
        let trace = forward_trace(params, &example.features)?;
        let target = example.target.probs();
        total_loss += loss_on_probs(loss, &trace.probs, target);

        let grad_probs = loss_grad_on_probs(loss, &trace.probs, target);
        let delta_logits = softmax_backward(&trace.probs, &grad_probs);
        match &trace.hidden {
            None => {
                accumulate_outer(&mut grads.layers[0], &delta_logits, example.features.values())
            }
            Some(hidden) => {
                let output_layer = &params.layers[1];
                accumulate_outer(&mut grads.layers[1], &delta_logits, hidden);
                // Back through tanh: δ_hidden = (W2ᵀ δ_logits) ⊙ (1 − a²).
                let mut delta_hidden = vec![0.0; hidden.len()];
                for (row, &d) in delta_logits.iter().enumerate() {
                    let w = &output_layer.weights
                        [row * output_layer.in_dim..(row + 1) * output_layer.in_dim];
                    for (dh, &wi) in delta_hidden.iter_mut().zip(w) {
                        *dh += wi * d;
                    }
                }
                for (dh, &a) in delta_hidden.iter_mut().zip(hidden) {
                    *dh *= 1.0 - a * a;
                }
                accumulate_outer(&mut grads.layers[0], &delta_hidden, example.features.values());
            }
        }
    }

    let scale = 1.0 / batch.len() as f64;
    for layer in grads.layers.iter_mut() {
        for w in layer.weights.iter_mut() {
            *w *= scale;
        }
        for b in layer.bias.iter_mut() {
            *b *= scale;
        }
    }
    Ok((total_loss * scale, grads))
}

/// Mean loss over a dataset without computing gradients.
pub fn mean_loss(params: &ClassifierParams, data: &[SoftExample], loss: LossKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    for example in data {
        let trace = forward_trace(params, &example.features)?;
        total += loss_on_probs(loss, &trace.probs, example.target.probs());
    }
    Ok(total / data.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    arch: Architecture,
    input_dim: usize,
    classes: usize,
    layers: Vec<CheckpointLayer>,
    featurizer: Option<Featurizer>,
}

/// Write a checkpoint as JSON. Weight and bias arrays are printed at 17
/// significant digits, so loading reproduces the parameters bit-exactly.
pub fn save_checkpoint(
    params: &ClassifierParams,
    featurizer: Option<&Featurizer>,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("{\"arch\":");
    out.push_str(&serde_json::to_string(&params.arch).map_err(|e| Error::json(path, e))?);
    out.push_str(&format!(
        ",\"input_dim\":{},\"classes\":{},\"layers\":[",
        params.input_dim, params.classes
    ));
    for (i, layer) in params.layers.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"weights\":");
        out.push_str(&jsonl::f64_array_sig17(&layer.weights));
        out.push_str(",\"bias\":");
        out.push_str(&jsonl::f64_array_sig17(&layer.bias));
        out.push('}');
    }
    out.push_str("],\"featurizer\":");
    out.push_str(&serde_json::to_string(&featurizer).map_err(|e| Error::json(path, e))?);
    out.push_str("}\n");
    jsonl::write_string(path, &out)
}

/// Load a checkpoint written by [`save_checkpoint`], validating shapes.
pub fn load_checkpoint(path: &Path) -> Result<(ClassifierParams, Option<Featurizer>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let dims = layer_dims(file.arch, file.input_dim, file.classes);
    if dims.len() != file.layers.len() {
        return Err(Error::BadConfig(format!(
            "checkpoint has {} layers, architecture needs {}",
            file.layers.len(),
            dims.len()
        )));
    }
    let layers = dims
        .into_iter()
        .zip(file.layers)
        .enumerate()
        .map(|(i, ((in_dim, out_dim), l))| {
            if l.weights.len() != in_dim * out_dim || l.bias.len() != out_dim {
                return Err(Error::BadConfig(format!(
                    "checkpoint layer {i} has wrong shape for {in_dim}x{out_dim}"
                )));
            }
            Ok(Layer {
                in_dim,
                out_dim,
                weights: l.weights,
                bias: l.bias,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ClassifierParams {
            arch: file.arch,
            input_dim: file.input_dim,
            classes: file.classes,
            layers,
        },
        file.featurizer,
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::label_core::ClassLabel;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    fn dist(probs: &[f64]) -> LabelDistribution {
        LabelDistribution::new(probs.to_vec()).unwrap()
    }

    fn example(values: &[f64], target: &[f64]) -> SoftExample {
        SoftExample {
            features: fv(values),
            target: dist(target),
            counts: None,
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let a = init_params(Architecture::Linear, 4, 3, 7).unwrap();
        let b = init_params(Architecture::Linear, 4, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers.len(), 1);
        assert_eq!(a.layers[0].weights.len(), 12);
        assert_eq!(a.layers[0].bias, vec![0.0; 3]);

        let c = init_params(Architecture::OneHidden { hidden: 5 }, 4, 3, 7).unwrap();
        assert_eq!(c.layers[0].weights.len(), 20);
        assert_eq!(c.layers[1].weights.len(), 15);
        assert!(c.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));

        let d = init_params(Architecture::Linear, 4, 3, 8).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn zero_params_predict_uniform() {
        let params = ClassifierParams {
            arch: Architecture::Linear,
            input_dim: 2,
            classes: 4,
            layers: vec![Layer::zeros(2, 4)],
        };
        let p = forward(&params, &fv(&[0.3, -0.7])).unwrap();
        for &x in p.probs() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_form() {
        let mut params = ClassifierParams {
            arch: Architecture::Linear,
            input_dim: 1,
            classes: 3,
            layers: vec![Layer::zeros(1, 3)],
        };
        params.layers[0].bias = vec![0.0f64, 2f64.ln(), 0.0];
        let p = forward(&params, &fv(&[0.0])).unwrap();
        assert!((p.probs()[0] - 0.25).abs() < 1e-15);
        assert!((p.probs()[1] - 0.5).abs() < 1e-15);
        assert!((p.probs()[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn forward_is_stable_under_huge_logits() {
        let params = init_params(Architecture::Linear, 3, 3, 1).unwrap();
        let p = forward(&params, &fv(&[1e6, -1e6, 1e6])).unwrap();
        let sum: f64 = p.probs().iter().sum();
        assert!(p.probs().iter().all(|x| x.is_finite()));
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_output_is_normalized() {
        let params = init_params(Architecture::OneHidden { hidden: 6 }, 5, 3, 2).unwrap();
        let p = forward(&params, &fv(&[0.1, -0.4, 2.0, 0.0, 1.0])).unwrap();
        let sum: f64 = p.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_checks_dimensions() {
        let params = init_params(Architecture::Linear, 3, 2, 0).unwrap();
        assert!(matches!(
            forward(&params, &fv(&[1.0])),
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 1
            })
        ));
    }

    #[test]
    fn cce_one_hot_reduction() {
        let target = LabelDistribution::one_hot(ClassLabel(1), 3).unwrap();
        let pred = dist(&[0.25, 0.5, 0.25]);
        let loss = cce_loss(&pred, &target).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        // Exactly −ln(pred[class]).
        assert_eq!(loss, -0.5f64.ln());
    }

    #[test]
    fn cce_of_target_with_itself_is_its_entropy() {
        let d = dist(&[0.005, 0.839, 0.156]);
        let loss = cce_loss(&d, &d).unwrap();
        assert!((loss - d.entropy()).abs() < 1e-12);
    }

    #[test]
    fn cce_matches_term_by_term_oracle() {
        let pred: [f64; 3] = [0.2, 0.5, 0.3];
        let target = [0.005, 0.839, 0.156];
        let expected: f64 = pred.iter().zip(&target).map(|(&p, &t)| -t * p.ln()).sum();
        let loss = cce_loss(&dist(&pred), &dist(&target)).unwrap();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.7774).abs() < 1e-4);
    }

    #[test]
    fn mse_examples() {
        let a = dist(&[1.0, 0.0, 0.0]);
        let b = dist(&[0.0, 1.0, 0.0]);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &b).unwrap(), 2.0);

        let pred = [0.2, 0.5, 0.3];
        let target = [0.005, 0.839, 0.156];
        let expected: f64 = pred
            .iter()
            .zip(&target)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        let loss = mse_loss(&dist(&pred), &dist(&target)).unwrap();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.17368).abs() < 1e-5);
    }

    #[test]
    fn gradient_vanishes_when_prediction_equals_target() {
        let params = init_params(Architecture::Linear, 4, 3, 3).unwrap();
        let x = fv(&[0.5, -1.0, 0.25, 2.0]);
        let target = forward(&params, &x).unwrap();
        let batch = [SoftExample {
            features: x,
            target,
            counts: None,
        }];
        let (_, grads) = gradient(&params, &batch, LossKind::Cce).unwrap();
        for layer in &grads.layers {
            assert!(layer.weights.iter().all(|&g| g.abs() < 1e-15));
            assert!(layer.bias.iter().all(|&g| g.abs() < 1e-15));
        }
    }

    #[test]
    fn duplicating_an_example_leaves_the_mean_gradient_unchanged() {
        let params = init_params(Architecture::OneHidden { hidden: 4 }, 3, 3, 5).unwrap();
        let e = example(&[0.2, -0.3, 0.9], &[0.1, 0.6, 0.3]);
        let (loss_once, grads_once) = gradient(&params, &[e.clone()], LossKind::Mse).unwrap();
        let (loss_twice, grads_twice) = gradient(&params, &[e.clone(), e], LossKind::Mse).unwrap();
        assert_eq!(loss_once, loss_twice);
        assert_eq!(grads_once, grads_twice);
    }

    /// Central finite differences over every parameter, comparing against
    /// the analytic gradient. The full 50-configuration sweep lives in the
    /// acceptance suite; this is the fast smoke version.
    #[test]
    fn gradient_matches_finite_differences() {
        for (arch, loss) in [
            (Architecture::Linear, LossKind::Cce),
            (Architecture::Linear, LossKind::Mse),
            (Architecture::OneHidden { hidden: 3 }, LossKind::Cce),
            (Architecture::OneHidden { hidden: 3 }, LossKind::Mse),
        ] {
            let params = init_params(arch, 4, 3, 11).unwrap();
            let batch = vec![
                example(&[0.5, -1.0, 0.25, 2.0], &[0.2, 0.5, 0.3]),
                example(&[1.5, 0.0, -0.75, 0.1], &[0.7, 0.1, 0.2]),
            ];
            let (_, grads) = gradient(&params, &batch, loss).unwrap();
            check_against_fd(&params, &batch, loss, &grads);
        }
    }

    pub(crate) fn check_against_fd(
        params: &ClassifierParams,
        batch: &[SoftExample],
        loss: LossKind,
        grads: &GradientSet,
    ) {
        let h = 1e-5;
        for layer_idx in 0..params.layers.len() {
            let n_weights = params.layers[layer_idx].weights.len();
            let n_bias = params.layers[layer_idx].bias.len();
            for slot in 0..n_weights + n_bias {
                let read = |p: &ClassifierParams| {
                    let l = &p.layers[layer_idx];
                    if slot < n_weights {
                        l.weights[slot]
                    } else {
                        l.bias[slot - n_weights]
                    }
                };
                let write = |p: &mut ClassifierParams, v: f64| {
                    let l = &mut p.layers[layer_idx];
                    if slot < n_weights {
                        l.weights[slot] = v;
                    } else {
                        l.bias[slot - n_weights] = v;
                    }
                };
                let analytic = {
                    let l = &grads.layers[layer_idx];
                    if slot < n_weights {
                        l.weights[slot]
                    } else {
                        l.bias[slot - n_weights]
                    }
                };
                if analytic.abs() <= 1e-8 {
                    continue;
                }
                let base = read(params);
                let mut plus = params.clone();
                write(&mut plus, base + h);
                let mut minus = params.clone();
                write(&mut minus, base - h);
                let numeric = (mean_loss(&plus, batch, loss).unwrap()
                    - mean_loss(&minus, batch, loss).unwrap())
                    / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
                assert!(
                    rel < 1e-4,
                    "layer {layer_idx} slot {slot}: analytic {analytic}, numeric {numeric}, rel {rel}"
                );
            }
        }
    }

    #[test]
    fn sgd_step_contract() {
        let params = init_params(Architecture::Linear, 3, 2, 1).unwrap();
        let batch = [example(&[1.0, 0.0, -1.0], &[0.9, 0.1])];
        let (loss_before, grads) = gradient(&params, &batch, LossKind::Cce).unwrap();

        let unchanged = params.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(unchanged, params);

        let zero = params.sgd_step(&params.zero_gradients(), 0.5).unwrap();
        assert_eq!(zero, params);

        let stepped = params.sgd_step(&grads, 0.05).unwrap();
        let (loss_after, _) = gradient(&stepped, &batch, LossKind::Cce).unwrap();
        assert!(loss_after < loss_before, "{loss_after} !< {loss_before}");

        let other = init_params(Architecture::OneHidden { hidden: 2 }, 3, 2, 1).unwrap();
        assert!(matches!(
            other.sgd_step(&grads, 0.1),
            Err(Error::ShapeMismatch)
        ));
    }

    #[test]
    fn aoc_expansion_equals_soft_cce_on_one_item() {
        use crate::dataset::build_aoc_dataset;
        let params = init_params(Architecture::Linear, 2, 3, 9).unwrap();
        let item = SoftExample::from_counts(fv(&[0.4, -0.2]), vec![6, 3, 1], 0.0).unwrap();
        let expansion = build_aoc_dataset(std::slice::from_ref(&item)).unwrap();
        let hard_as_soft: Vec<SoftExample> = expansion
            .iter()
            .map(|h| SoftExample {
                features: h.features.clone(),
                target: LabelDistribution::one_hot(h.label, 3).unwrap(),
                counts: None,
            })
            .collect();
        let (hard_mean_loss, hard_grads) = gradient(&params, &hard_as_soft, LossKind::Cce).unwrap();
        let (soft_loss, soft_grads) = gradient(&params, &[item], LossKind::Cce).unwrap();
        assert!((hard_mean_loss - soft_loss).abs() < 1e-12);
        for (hl, sl) in hard_grads.layers.iter().zip(&soft_grads.layers) {
            for (a, b) in hl.weights.iter().zip(&sl.weights) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        let params = init_params(Architecture::OneHidden { hidden: 4 }, 6, 3, 13).unwrap();
        let featurizer = Featurizer::new(16).unwrap();
        save_checkpoint(&params, Some(&featurizer), &path).unwrap();
        let (loaded, loaded_feat) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_feat, Some(featurizer));
        assert_eq!(loaded.arch, params.arch);
        for (a, b) in loaded.layers.iter().zip(&params.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.bias.iter().zip(&b.bias) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        // Re-saving produces identical bytes.
        let first = std::fs::read(&path).unwrap();
        save_checkpoint(&loaded, loaded_feat.as_ref(), &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn checkpoint_rejects_wrong_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"arch":{"kind":"linear"},"input_dim":2,"classes":3,"layers":[{"weights":[1.0],"bias":[0.0,0.0,0.0]}],"featurizer":null}"#,
        )
        .unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::BadConfig(_))));
    }
}
