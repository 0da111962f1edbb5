//! Mixture-of-experts predictor: linear experts with sigmoid outputs and a
//! softmax gate whose logits are linear in the input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FeamoeError, Result};

/// Lower clamp for expert probabilities so outputs stay strictly inside (0,1)
/// even when a linear score saturates the sigmoid.
const PROB_FLOOR: f64 = 1e-15;

/// Gradient norms below this are treated as degenerate when computing the
/// distance to the decision boundary.
pub const DEGENERATE_GRADIENT_NORM: f64 = 1e-12;

/// Numerically stable logistic function, clamped to the open interval (0,1).
pub fn sigmoid(t: f64) -> f64 {
    let p = if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Softmax with max-subtraction; every output is strictly positive.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp().max(1e-300)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// One linear expert: score(x) = weights . x + bias, probability = sigmoid(score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ExpertParams {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// One gate unit; the gate logit for its expert is weights . x + bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateUnit {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl GateUnit {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Everything the forward pass produces for one input.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    /// Gate-weighted mean of expert probabilities, strictly in (0,1).
    pub mixture_probability: f64,
    /// Softmax gate outputs; nonnegative, sum to 1.
    pub gate_weights: Vec<f64>,
    /// Per-expert sigmoid probabilities.
    pub expert_probabilities: Vec<f64>,
    /// Per-expert linear scores (pre-sigmoid).
    pub expert_logits: Vec<f64>,
    /// Gate-weighted mean of expert scores: s(x) = sum_i g_i(x) (w_i.x + b_i).
    pub gated_logit: f64,
}

/// First-order distance from an input to the s(x)=0 surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDistance {
    pub value: f64,
    /// Set when the frozen-gate score gradient had near-zero norm and the
    /// distance was reported as 0.
    pub degenerate: bool,
}

/// The complete learned state: expert parameters plus gate parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MixtureModel {
    feature_dim: usize,
    experts: Vec<ExpertParams>,
    gate: Vec<GateUnit>,
}

impl MixtureModel {
    /// Build a model from explicit parameters, validating shape and finiteness.
    pub fn new(feature_dim: usize, experts: Vec<ExpertParams>, gate: Vec<GateUnit>) -> Result<Self> {
        if feature_dim == 0 {
            return Err(FeamoeError::InvalidConfig("feature dimension must be >= 1".into()));
        }
        if experts.is_empty() {
            return Err(FeamoeError::InvalidConfig("a mixture needs at least one expert".into()));
        }
        if experts.len() != gate.len() {
            return Err(FeamoeError::InvalidConfig(format!(
                "expert count {} does not match gate count {}",
                experts.len(),
                gate.len()
            )));
        }
        for e in &experts {
            if e.weights.len() != feature_dim {
                return Err(FeamoeError::DimensionMismatch { expected: feature_dim, got: e.weights.len() });
            }
            if !e.is_finite() {
                return Err(FeamoeError::InvalidConfig("non-finite expert parameter".into()));
            }
        }
        for g in &gate {
            if g.weights.len() != feature_dim {
                return Err(FeamoeError::DimensionMismatch { expected: feature_dim, got: g.weights.len() });
            }
            if !g.is_finite() {
                return Err(FeamoeError::InvalidConfig("non-finite gate parameter".into()));
            }
        }
        Ok(Self { feature_dim, experts, gate })
    }

    /// A single zero-initialized expert with a zero gate (output 0.5 everywhere).
    pub fn single(feature_dim: usize) -> Result<Self> {
        Self::new(
            feature_dim,
            vec![ExpertParams::zeros(feature_dim)],
            vec![GateUnit::zeros(feature_dim)],
        )
    }

    /// Random model with parameters uniform in [-scale, scale]; for tests and fixtures.
    pub fn random<R: Rng>(feature_dim: usize, expert_count: usize, scale: f64, rng: &mut R) -> Self {
        let mut experts = Vec::with_capacity(expert_count);
        let mut gate = Vec::with_capacity(expert_count);
        for _ in 0..expert_count {
            experts.push(ExpertParams {
                weights: (0..feature_dim).map(|_| rng.random_range(-scale..=scale)).collect(),
                bias: rng.random_range(-scale..=scale),
            });
            gate.push(GateUnit {
                weights: (0..feature_dim).map(|_| rng.random_range(-scale..=scale)).collect(),
                bias: rng.random_range(-scale..=scale),
            });
        }
        Self { feature_dim, experts, gate }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    pub fn experts(&self) -> &[ExpertParams] {
        &self.experts
    }

    pub fn gate(&self) -> &[GateUnit] {
        &self.gate
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(FeamoeError::DimensionMismatch { expected: self.feature_dim, got: x.len() });
        }
        Ok(())
    }

    /// Gate softmax, per-expert probabilities and the combined outputs for one input.
    pub fn forward(&self, x: &[f64]) -> Result<ModelOutput> {
        self.check_dim(x)?;
        let gate_logits: Vec<f64> = self.gate.iter().map(|g| g.logit(x)).collect();
        let gate_weights = softmax(&gate_logits);
        let expert_logits: Vec<f64> = self.experts.iter().map(|e| e.score(x)).collect();
        let expert_probabilities: Vec<f64> = expert_logits.iter().map(|&t| sigmoid(t)).collect();
        let mixture_probability = gate_weights
            .iter()
            .zip(&expert_probabilities)
            .map(|(g, y)| g * y)
            .sum();
        let gated_logit = gate_weights.iter().zip(&expert_logits).map(|(g, e)| g * e).sum();
        Ok(ModelOutput {
            mixture_probability,
            gate_weights,
            expert_probabilities,
            expert_logits,
            gated_logit,
        })
    }

    /// Hard label: 1 when the mixture probability reaches the 0.5 threshold.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(if self.forward(x)?.mixture_probability >= 0.5 { 1 } else { 0 })
    }

    /// |s(x)| / ||sum_i g_i(x) w_i||, with gate weights frozen at x.
    ///
    /// Reduces to the exact point-to-hyperplane distance for a single expert.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<BoundaryDistance> {
        let out = self.forward(x)?;
        Ok(self.boundary_distance_from_output(&out))
    }

    /// Same as [`boundary_distance`](Self::boundary_distance) but reusing a forward pass.
    pub fn boundary_distance_from_output(&self, out: &ModelOutput) -> BoundaryDistance {
        let mut grad = vec![0.0; self.feature_dim];
        for (g, e) in out.gate_weights.iter().zip(&self.experts) {
            for (acc, w) in grad.iter_mut().zip(&e.weights) {
                *acc += g * w;
            }
        }
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < DEGENERATE_GRADIENT_NORM {
            BoundaryDistance { value: 0.0, degenerate: true }
        } else {
            BoundaryDistance { value: out.gated_logit.abs() / norm, degenerate: false }
        }
    }

    /// Append a zero expert whose initial gate share is at most `share` for
    /// every input, leaving mixture outputs almost unchanged.
    ///
    /// The new gate uses the mean of the existing gate weight vectors, offset
    /// so the share would be exactly `share` if all existing gates agreed;
    /// with unequal gates the realized share can only be smaller.
    pub fn add_expert_with_gate_share(&mut self, share: f64) {
        let m = self.experts.len();
        let d = self.feature_dim;
        let mut mean_w = vec![0.0; d];
        let mut mean_b = 0.0;
        for g in &self.gate {
            for (acc, w) in mean_w.iter_mut().zip(&g.weights) {
                *acc += w / m as f64;
            }
            mean_b += g.bias / m as f64;
        }
        let offset = (share * m as f64 / (1.0 - share)).ln();
        self.experts.push(ExpertParams::zeros(d));
        self.gate.push(GateUnit { weights: mean_w, bias: mean_b + offset });
    }

    /// Append a supplied expert with the same low-share gate initialization.
    pub fn add_expert_params_with_gate_share(&mut self, expert: ExpertParams, share: f64) -> Result<()> {
        if expert.weights.len() != self.feature_dim {
            return Err(FeamoeError::DimensionMismatch {
                expected: self.feature_dim,
                got: expert.weights.len(),
            });
        }
        self.add_expert_with_gate_share(share);
        *self.experts.last_mut().expect("just pushed") = expert;
        Ok(())
    }

    /// Total number of scalar parameters (expert weights+biases, gate weights+biases).
    pub fn param_count(&self) -> usize {
        2 * self.experts.len() * (self.feature_dim + 1)
    }

    /// Flatten all parameters: experts first (weights then bias, per expert),
    /// then gate units in the same layout.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for e in &self.experts {
            out.extend_from_slice(&e.weights);
            out.push(e.bias);
        }
        for g in &self.gate {
            out.extend_from_slice(&g.weights);
            out.push(g.bias);
        }
        out
    }

    /// Overwrite all parameters from the flat layout produced by [`params`](Self::params).
    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(FeamoeError::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        let d = self.feature_dim;
        let mut idx = 0;
        for e in &mut self.experts {
            e.weights.copy_from_slice(&p[idx..idx + d]);
            e.bias = p[idx + d];
            idx += d + 1;
        }
        for g in &mut self.gate {
            g.weights.copy_from_slice(&p[idx..idx + d]);
            g.bias = p[idx + d];
            idx += d + 1;
        }
        Ok(())
    }

    /// One SGD step: params -= lr * grad, with grad in the flat layout.
    pub fn apply_gradient_step(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.param_count() {
            return Err(FeamoeError::DimensionMismatch { expected: self.param_count(), got: grad.len() });
        }
        let d = self.feature_dim;
        let mut idx = 0;
        for e in &mut self.experts {
            for (w, g) in e.weights.iter_mut().zip(&grad[idx..idx + d]) {
                *w -= lr * g;
            }
            e.bias -= lr * grad[idx + d];
            idx += d + 1;
        }
        for gu in &mut self.gate {
            for (w, g) in gu.weights.iter_mut().zip(&grad[idx..idx + d]) {
                *w -= lr * g;
            }
            gu.bias -= lr * grad[idx + d];
            idx += d + 1;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
