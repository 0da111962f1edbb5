//! Shapley-value attributions: closed-form per-expert values combined by
//! gate weights, an exact enumeration oracle, and a sampling kernel
//! estimator for timing comparisons.
//!
//! All attributions explain the gated logit s(x), where per-expert values
//! are exact in closed form.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FeamoeError, Result};
use crate::loss::StreamInstance;
use crate::model::{dot, softmax, ExpertParams, MixtureModel};

/// Largest feature count the exact enumeration oracle accepts (2^D coalitions).
pub const MAX_EXACT_FEATURES: usize = 20;

/// Reference point: per-feature background expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Background {
    pub feature_means: Vec<f64>,
}

impl Background {
    pub fn new(feature_means: Vec<f64>) -> Result<Self> {
        if feature_means.is_empty() {
            return Err(FeamoeError::InvalidConfig("background needs at least one feature".into()));
        }
        if feature_means.iter().any(|v| !v.is_finite()) {
            return Err(FeamoeError::InvalidConfig("non-finite background mean".into()));
        }
        Ok(Self { feature_means })
    }

    /// Feature means of a reference set.
    pub fn from_instances(instances: &[StreamInstance]) -> Result<Self> {
        let first = instances.first().ok_or(FeamoeError::EmptyDataset)?;
        let dim = first.features.len();
        let mut means = vec![0.0; dim];
        for inst in instances {
            if inst.features.len() != dim {
                return Err(FeamoeError::DimensionMismatch { expected: dim, got: inst.features.len() });
            }
            for (m, v) in means.iter_mut().zip(&inst.features) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= instances.len() as f64;
        }
        Self::new(means)
    }

    pub fn dim(&self) -> usize {
        self.feature_means.len()
    }
}

/// Attributions live on the gated-logit scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AttributionScale {
    Logit,
}

/// Which coalition value function was explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ShapGame {
    /// Gate weights held fixed at the full input; expert scores masked.
    FrozenGate,
    /// Gates recomputed on every masked input.
    FullModel,
}

/// Per-feature Shapley values plus the base value for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub scale: AttributionScale,
}

impl Attribution {
    /// base + sum(phi): equals the explained model value when efficiency holds.
    pub fn reconstructed_value(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// One line of batch attribution output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributionRecord {
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub explained_value: f64,
    pub game: ShapGame,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_phi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_max_gap: Option<f64>,
}

/// Closed-form Shapley values for one linear expert:
/// phi_j = w_j (x_j - mu_j), base = w.mu + b.
pub fn linear_expert_shap(expert: &ExpertParams, x: &[f64], background: &Background) -> Result<Attribution> {
    let dim = expert.weights.len();
    if x.len() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: x.len() });
    }
    if background.dim() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: background.dim() });
    }
    let phi = expert
        .weights
        .iter()
        .zip(x.iter().zip(&background.feature_means))
        .map(|(w, (xi, mu))| w * (xi - mu))
        .collect();
    let base_value = dot(&expert.weights, &background.feature_means) + expert.bias;
    Ok(Attribution { phi, base_value, scale: AttributionScale::Logit })
}

/// Gate-weighted combination of per-expert closed-form values, with gates
/// evaluated at the full input and treated as fixed coefficients. Explains
/// the gated logit s(x).
pub fn mixture_shap(model: &MixtureModel, x: &[f64], background: &Background) -> Result<Attribution> {
    let out = model.forward(x)?;
    if background.dim() != model.feature_dim() {
        return Err(FeamoeError::DimensionMismatch {
            expected: model.feature_dim(),
            got: background.dim(),
        });
    }
    let mut phi = vec![0.0; model.feature_dim()];
    let mut base_value = 0.0;
    for (g, expert) in out.gate_weights.iter().zip(model.experts()) {
        let part = linear_expert_shap(expert, x, background)?;
        for (acc, p) in phi.iter_mut().zip(&part.phi) {
            *acc += g * p;
        }
        base_value += g * part.base_value;
    }
    Ok(Attribution { phi, base_value, scale: AttributionScale::Logit })
}

/// Coalition value: features outside the mask are replaced by background
/// means; the gate is either frozen at the full input or recomputed.
fn coalition_value(
    model: &MixtureModel,
    x: &[f64],
    background: &Background,
    frozen_gates: Option<&[f64]>,
    mask: u32,
) -> f64 {
    let dim = model.feature_dim();
    let mut masked = background.feature_means.clone();
    for (j, slot) in masked.iter_mut().enumerate().take(dim) {
        if mask & (1 << j) != 0 {
            *slot = x[j];
        }
    }
    match frozen_gates {
        Some(gates) => gates
            .iter()
            .zip(model.experts())
            .map(|(g, e)| g * e.score(&masked))
            .sum(),
        None => {
            let out = model.forward(&masked).expect("dimension already validated");
            out.gated_logit
        }
    }
}

/// Exact Shapley values by enumerating all 2^D coalitions of the chosen game.
pub fn exact_shap_oracle(
    model: &MixtureModel,
    x: &[f64],
    background: &Background,
    game: ShapGame,
) -> Result<Attribution> {
    let dim = model.feature_dim();
    if dim > MAX_EXACT_FEATURES {
        return Err(FeamoeError::TooManyFeatures { got: dim, max: MAX_EXACT_FEATURES });
    }
    if x.len() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: x.len() });
    }
    if background.dim() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: background.dim() });
    }

    let frozen = match game {
        ShapGame::FrozenGate => {
            let gate_logits: Vec<f64> = model.gate().iter().map(|g| g.logit(x)).collect();
            Some(softmax(&gate_logits))
        }
        ShapGame::FullModel => None,
    };

    let n_masks = 1usize << dim;
    let mut values = vec![0.0; n_masks];
    for (mask, slot) in values.iter_mut().enumerate() {
        *slot = coalition_value(model, x, background, frozen.as_deref(), mask as u32);
    }

    // weight(k) = k! (D-1-k)! / D! = 1 / (D * C(D-1, k)).
    let weights: Vec<f64> = (0..dim).map(|k| 1.0 / (dim as f64 * binomial(dim - 1, k))).collect();

    let mut phi = vec![0.0; dim];
    for mask in 0..n_masks {
        let size = (mask as u32).count_ones() as usize;
        for (j, phi_j) in phi.iter_mut().enumerate() {
            let bit = 1usize << j;
            if mask & bit == 0 {
                *phi_j += weights[size] * (values[mask | bit] - values[mask]);
            }
        }
    }
    Ok(Attribution { phi, base_value: values[0], scale: AttributionScale::Logit })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64;
        out /= (i + 1) as f64;
    }
    out
}

/// Least-squares estimate over sampled coalitions of the full-model game.
/// Coalition sizes are drawn from the Shapley kernel distribution, so samples
/// enter the regression unweighted; the efficiency constraint is eliminated
/// exactly.
pub fn kernel_shap_estimate(
    model: &MixtureModel,
    x: &[f64],
    background: &Background,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    let dim = model.feature_dim();
    if x.len() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: x.len() });
    }
    if background.dim() != dim {
        return Err(FeamoeError::DimensionMismatch { expected: dim, got: background.dim() });
    }
    if n_samples < dim + 2 {
        return Err(FeamoeError::InvalidConfig(format!(
            "kernel estimator needs at least dim + 2 = {} samples, got {n_samples}",
            dim + 2
        )));
    }

    let full_mask = if dim >= 32 { u32::MAX } else { (1u32 << dim) - 1 };
    let v_empty = coalition_value(model, x, background, None, 0);
    let v_full = coalition_value(model, x, background, None, full_mask);
    let delta = v_full - v_empty;

    if dim == 1 {
        return Ok(Attribution { phi: vec![delta], base_value: v_empty, scale: AttributionScale::Logit });
    }

    // P(size = k) proportional to (D-1) / (k (D-k)), k in 1..=D-1.
    let size_weights: Vec<f64> =
        (1..dim).map(|k| (dim - 1) as f64 / ((k * (dim - k)) as f64)).collect();
    let weight_total: f64 = size_weights.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feature_pool: Vec<usize> = (0..dim).collect();

    let q = dim - 1;
    let mut normal = vec![vec![0.0; q]; q];
    let mut rhs = vec![0.0; q];
    for _ in 0..n_samples {
        let mut pick = rng.random_range(0.0..weight_total);
        let mut size = 1;
        for (k, w) in size_weights.iter().enumerate() {
            if pick < *w {
                size = k + 1;
                break;
            }
            pick -= w;
        }
        // Partial Fisher-Yates draw of `size` distinct features.
        for i in 0..size {
            let j = rng.random_range(i..dim);
            feature_pool.swap(i, j);
        }
        let mut mask = 0u32;
        for &f in &feature_pool[..size] {
            mask |= 1 << f;
        }

        let value = coalition_value(model, x, background, None, mask);
        let z_last = f64::from(mask >> q & 1);
        let target = value - v_empty - z_last * delta;
        let mut row = vec![0.0; q];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = f64::from(mask >> j & 1) - z_last;
        }
        for a in 0..q {
            for b in 0..q {
                normal[a][b] += row[a] * row[b];
            }
            rhs[a] += row[a] * target;
        }
    }

    let reduced = solve_linear(&mut normal, &mut rhs).map_err(|()| {
        FeamoeError::DegenerateKernelSystem(format!(
            "normal matrix is singular for {n_samples} sampled coalitions over {dim} features; \
             increase the sample count"
        ))
    })?;

    let mut phi = reduced;
    let last = delta - phi.iter().sum::<f64>();
    phi.push(last);
    Ok(Attribution { phi, base_value: v_empty, scale: AttributionScale::Logit })
}

/// Gaussian elimination with partial pivoting on the normal system.
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> std::result::Result<Vec<f64>, ()> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).expect("finite"))
            .expect("non-empty");
        if a[pivot_row][col].abs() < 1e-10 {
            return Err(());
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut sum = b[col];
        for k in col + 1..n {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Ok(x)
}
