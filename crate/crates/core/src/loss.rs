//! Per-case training loss: accuracy term plus three fairness penalties, with
//! exact analytic gradients over every expert and gate parameter.

use serde::{Deserialize, Serialize};

use crate::error::{FeamoeError, Result};
use crate::model::{dot, MixtureModel, ModelOutput, DEGENERATE_GRADIENT_NORM};

/// One labeled observation: features, binary label, binary protected group
/// (0 = underprivileged, 1 = privileged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamInstance {
    pub features: Vec<f64>,
    pub label: u8,
    pub group: u8,
}

impl StreamInstance {
    pub fn new(features: Vec<f64>, label: u8, group: u8) -> Result<Self> {
        if label > 1 {
            return Err(FeamoeError::InvalidConfig(format!("label must be 0 or 1, got {label}")));
        }
        if group > 1 {
            return Err(FeamoeError::InvalidConfig(format!("group must be 0 or 1, got {group}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(FeamoeError::InvalidConfig("non-finite feature value".into()));
        }
        Ok(Self { features, label, group })
    }
}

/// Current fairness weights and their per-growth increments.
///
/// Each lambda is derived as (growth events) x (increment) so the weights are
/// exact integer multiples with no accumulation drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FairnessSchedule {
    growth_events: u64,
    delta_lambda: [f64; 3],
}

impl FairnessSchedule {
    pub fn new(delta_spd: f64, delta_aod: f64, delta_burden: f64) -> Result<Self> {
        for d in [delta_spd, delta_aod, delta_burden] {
            if !d.is_finite() || d < 0.0 {
                return Err(FeamoeError::InvalidConfig(format!(
                    "lambda increments must be finite and >= 0, got {d}"
                )));
            }
        }
        Ok(Self { growth_events: 0, delta_lambda: [delta_spd, delta_aod, delta_burden] })
    }

    pub fn growth_events(&self) -> u64 {
        self.growth_events
    }

    pub fn record_growth(&mut self) {
        self.growth_events += 1;
    }

    pub fn delta_lambda(&self) -> [f64; 3] {
        self.delta_lambda
    }

    /// Current weights [lambda1, lambda2, lambda3] for SPD, AOD and burden.
    pub fn lambdas(&self) -> [f64; 3] {
        [
            self.growth_events as f64 * self.delta_lambda[0],
            self.growth_events as f64 * self.delta_lambda[1],
            self.growth_events as f64 * self.delta_lambda[2],
        ]
    }
}

/// Per-group exponential moving averages of boundary distance over
/// negatively classified instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BurdenState {
    beta: f64,
    mu: [f64; 2],
    counts: [u64; 2],
}

impl BurdenState {
    pub const DEFAULT_BETA: f64 = 0.99;

    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) || beta <= 0.0 {
            return Err(FeamoeError::InvalidConfig(format!("EMA decay must be in (0,1), got {beta}")));
        }
        Ok(Self { beta, mu: [0.0, 0.0], counts: [0, 0] })
    }

    /// Mean estimate for a group; 0 until that group has seen a
    /// negatively classified instance.
    pub fn mu(&self, group: u8) -> f64 {
        self.mu[group as usize]
    }

    pub fn is_cold(&self, group: u8) -> bool {
        self.counts[group as usize] == 0
    }

    /// |mu0 - mu1| with cold groups contributing 0.
    pub fn gap(&self) -> f64 {
        (self.mu[0] - self.mu[1]).abs()
    }

    /// Subgradient sign of the gap with respect to `group`'s mean: sign of
    /// mu_group - mu_other, 0 at the kink.
    pub fn gap_sign(&self, group: u8) -> f64 {
        let diff = self.mu[group as usize] - self.mu[1 - group as usize];
        if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// Fold one observed distance into a group's EMA. The first observation
    /// sets the mean directly.
    pub fn observe(&mut self, group: u8, distance: f64) {
        let g = group as usize;
        if self.counts[g] == 0 {
            self.mu[g] = distance;
        } else {
            self.mu[g] = self.beta * self.mu[g] + (1.0 - self.beta) * distance;
        }
        self.counts[g] += 1;
    }
}

/// The four loss components and their weighted total for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossBreakdown {
    pub e_acc: f64,
    pub e_spd: f64,
    pub e_aod: f64,
    pub e_burden: f64,
    pub total: f64,
}

/// Coefficients of the burden surrogate, frozen at the start of a gradient
/// step: whether the instance was classified negative and the sign of the
/// group-mean gap at that moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurdenStepContext {
    pub applies: bool,
    pub sign: f64,
}

impl BurdenStepContext {
    /// No burden contribution; used when lambda3 is zero or for pure
    /// accuracy-term evaluation.
    pub fn inactive() -> Self {
        Self { applies: false, sign: 0.0 }
    }
}

/// Demographic-parity penalty value given the mixture probability:
/// 1 - p for the underprivileged group, p for the privileged group.
pub fn spd_value(group: u8, mixture_probability: f64) -> f64 {
    if group == 0 {
        1.0 - mixture_probability
    } else {
        mixture_probability
    }
}

/// Equalized-odds penalty value: 1 - p for positive-label instances,
/// p for negative-label instances; exactly one indicator fires per case.
pub fn aod_value(label: u8, mixture_probability: f64) -> f64 {
    if label == 1 {
        1.0 - mixture_probability
    } else {
        mixture_probability
    }
}

/// Negative log of the gate-weighted Gaussian-kernel likelihood:
/// -log sum_i g_i exp(-0.5 (d - y_i)^2).
pub fn accuracy_loss(model: &MixtureModel, instance: &StreamInstance) -> Result<f64> {
    let out = model.forward(&instance.features)?;
    Ok(accuracy_loss_from_output(&out, instance.label))
}

fn accuracy_loss_from_output(out: &ModelOutput, label: u8) -> f64 {
    let d = label as f64;
    let mix: f64 = out
        .gate_weights
        .iter()
        .zip(&out.expert_probabilities)
        .map(|(g, y)| g * (-0.5 * (d - y) * (d - y)).exp())
        .sum();
    -mix.ln()
}

pub fn spd_penalty(model: &MixtureModel, instance: &StreamInstance) -> Result<f64> {
    let out = model.forward(&instance.features)?;
    Ok(spd_value(instance.group, out.mixture_probability))
}

pub fn aod_penalty(model: &MixtureModel, instance: &StreamInstance) -> Result<f64> {
    let out = model.forward(&instance.features)?;
    Ok(aod_value(instance.label, out.mixture_probability))
}

/// Update the burden EMAs with this instance (when it is classified negative)
/// and return the post-update group-mean gap.
pub fn burden_penalty(
    model: &MixtureModel,
    instance: &StreamInstance,
    state: &mut BurdenState,
) -> Result<f64> {
    let out = model.forward(&instance.features)?;
    if out.mixture_probability < 0.5 {
        let dist = model.boundary_distance_from_output(&out);
        state.observe(instance.group, dist.value);
    }
    Ok(state.gap())
}

/// The scalar objective one SGD step descends, with the burden surrogate's
/// frozen coefficients supplied explicitly. This is the function the analytic
/// gradient differentiates; finite-difference checks must perturb it.
pub fn surrogate_total_loss(
    model: &MixtureModel,
    instance: &StreamInstance,
    lambdas: [f64; 3],
    ctx: &BurdenStepContext,
) -> Result<f64> {
    let out = model.forward(&instance.features)?;
    let e_acc = accuracy_loss_from_output(&out, instance.label);
    let e_spd = spd_value(instance.group, out.mixture_probability);
    let e_aod = aod_value(instance.label, out.mixture_probability);
    let burden_term = if ctx.applies {
        ctx.sign * model.boundary_distance_from_output(&out).value
    } else {
        0.0
    };
    Ok(e_acc + lambdas[0] * e_spd + lambdas[1] * e_aod + lambdas[2] * burden_term)
}

/// Combined loss and its exact gradient over all expert and gate parameters,
/// in the flat layout of [`MixtureModel::params`].
///
/// The burden EMAs in `state` are treated as constants for the gradient
/// (their sign is read before the update) and then advanced with this
/// instance's boundary distance when it is classified negative; the reported
/// `e_burden` is the post-update gap.
pub fn total_loss_and_gradients(
    model: &MixtureModel,
    instance: &StreamInstance,
    schedule: &FairnessSchedule,
    state: &mut BurdenState,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let out = model.forward(&instance.features)?;
    let lambdas = schedule.lambdas();
    let ctx = BurdenStepContext {
        applies: out.mixture_probability < 0.5,
        sign: state.gap_sign(instance.group),
    };

    let gradient = gradient_from_output(model, instance, &out, lambdas, &ctx);

    let e_acc = accuracy_loss_from_output(&out, instance.label);
    let e_spd = spd_value(instance.group, out.mixture_probability);
    let e_aod = aod_value(instance.label, out.mixture_probability);
    if ctx.applies {
        let dist = model.boundary_distance_from_output(&out);
        state.observe(instance.group, dist.value);
    }
    let e_burden = state.gap();
    let total = e_acc + lambdas[0] * e_spd + lambdas[1] * e_aod + lambdas[2] * e_burden;

    Ok((LossBreakdown { e_acc, e_spd, e_aod, e_burden, total }, gradient))
}

/// Analytic gradient of [`surrogate_total_loss`] in the flat parameter layout.
pub fn gradient_from_output(
    model: &MixtureModel,
    instance: &StreamInstance,
    out: &ModelOutput,
    lambdas: [f64; 3],
    ctx: &BurdenStepContext,
) -> Vec<f64> {
    let dim = model.feature_dim();
    let m = model.expert_count();
    let x = &instance.features;
    let d = instance.label as f64;
    let g = &out.gate_weights;
    let y = &out.expert_probabilities;
    let eta = &out.expert_logits;
    let y_hat = out.mixture_probability;
    let s = out.gated_logit;

    // Accuracy-term posterior h_i = g_i k_i / sum_k g_k k_k.
    let kappa: Vec<f64> = y.iter().map(|&yi| (-0.5 * (d - yi) * (d - yi)).exp()).collect();
    let kappa_mix: f64 = g.iter().zip(&kappa).map(|(gi, ki)| gi * ki).sum();
    let h: Vec<f64> = g.iter().zip(&kappa).map(|(gi, ki)| gi * ki / kappa_mix).collect();

    // d(fairness)/d(y_hat): SPD slopes -1 for group 0 / +1 for group 1,
    // AOD slopes -1 for label 1 / +1 for label 0.
    let spd_slope = if instance.group == 0 { -1.0 } else { 1.0 };
    let aod_slope = if instance.label == 1 { -1.0 } else { 1.0 };
    let fairness_slope = lambdas[0] * spd_slope + lambdas[1] * aod_slope;

    // Burden surrogate pieces, all with gates frozen at x:
    //   dist = |s| / n,  n = ||sum_i g_i w_i||.
    let mut burden = None;
    if ctx.applies && ctx.sign != 0.0 && lambdas[2] > 0.0 {
        let mut grad_x = vec![0.0; dim];
        for (gi, e) in g.iter().zip(model.experts()) {
            for (acc, w) in grad_x.iter_mut().zip(&e.weights) {
                *acc += gi * w;
            }
        }
        let n = grad_x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n >= DEGENERATE_GRADIENT_NORM {
            let sg = if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            };
            burden = Some((grad_x, n, sg));
        }
    }

    let mut grad = vec![0.0; model.param_count()];
    let gate_base = m * (dim + 1);
    for i in 0..m {
        // d(loss)/d(expert logit eta_i) and d(loss)/d(gate logit z_i).
        let dacc_deta = h[i] * (y[i] - d) * y[i] * (1.0 - y[i]);
        let dacc_dz = g[i] - h[i];
        let dyhat_deta = g[i] * y[i] * (1.0 - y[i]);
        let dyhat_dz = g[i] * (y[i] - y_hat);

        let deta = dacc_deta + fairness_slope * dyhat_deta;
        let mut dz = dacc_dz + fairness_slope * dyhat_dz;

        let expert_off = i * (dim + 1);
        let gate_off = gate_base + i * (dim + 1);

        if let Some((grad_x, n, sg)) = &burden {
            let coeff = lambdas[2] * ctx.sign;
            let n = *n;
            let sg = *sg;
            // Expert weights pick up an extra term from the norm in the
            // denominator; expert biases only enter through s, and the gate
            // contribution chains through z_i like every other term.
            let w_i = &model.experts()[i].weights;
            for j in 0..dim {
                let ddist_dw = sg * g[i] * x[j] / n - s.abs() * grad_x[j] * g[i] / (n * n * n);
                grad[expert_off + j] += coeff * ddist_dw;
            }
            grad[expert_off + dim] += coeff * sg * g[i] / n;
            let gw = dot(grad_x, w_i);
            let ddist_dz = sg * g[i] * (eta[i] - s) / n - s.abs() * g[i] * (gw - n * n) / (n * n * n);
            dz += coeff * ddist_dz;
        }

        for j in 0..dim {
            grad[expert_off + j] += deta * x[j];
            grad[gate_off + j] += dz * x[j];
        }
        grad[expert_off + dim] += deta;
        grad[gate_off + dim] += dz;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpertParams, GateUnit};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(features: Vec<f64>, label: u8, group: u8) -> StreamInstance {
        StreamInstance::new(features, label, group).unwrap()
    }

    /// Model whose experts output fixed probabilities with an even gate split.
    fn fixed_probability_model(probs: &[f64]) -> MixtureModel {
        let experts = probs
            .iter()
            .map(|&p| ExpertParams { weights: vec![0.0], bias: (p / (1.0 - p)).ln() })
            .collect();
        let gate = probs.iter().map(|_| GateUnit::zeros(1)).collect();
        MixtureModel::new(1, experts, gate).unwrap()
    }

    #[test]
    fn accuracy_loss_perfect_prediction_tends_to_zero() {
        let model = MixtureModel::new(
            1,
            vec![ExpertParams { weights: vec![50.0], bias: 0.0 }],
            vec![GateUnit::zeros(1)],
        )
        .unwrap();
        let loss = accuracy_loss(&model, &instance(vec![1.0], 1, 0)).unwrap();
        assert!(loss >= 0.0);
        assert!(loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn accuracy_loss_matches_direct_arithmetic() {
        // g = [0.5, 0.5], y = [0.3, 0.8], d = 1.
        let model = fixed_probability_model(&[0.3, 0.8]);
        let loss = accuracy_loss(&model, &instance(vec![0.0], 1, 0)).unwrap();
        let expected = -(0.5 * (-0.245f64).exp() + 0.5 * (-0.02f64).exp()).ln();
        assert_abs_diff_eq!(loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_loss_identical_experts_collapse_to_single() {
        let pair = fixed_probability_model(&[0.7, 0.7]);
        let single = fixed_probability_model(&[0.7]);
        let inst = instance(vec![0.0], 0, 1);
        assert_abs_diff_eq!(
            accuracy_loss(&pair, &inst).unwrap(),
            accuracy_loss(&single, &inst).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn spd_values_match_formula() {
        assert_abs_diff_eq!(spd_value(0, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spd_value(1, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spd_value(0, 0.3), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn aod_indicator_branches() {
        assert_abs_diff_eq!(aod_value(1, 1.0), 0.0, epsilon = 1e-15); // a=0,d=1 case
        assert_abs_diff_eq!(aod_value(0, 0.2), 0.2, epsilon = 1e-15); // a=1,d=0 case
        assert_abs_diff_eq!(aod_value(0, 0.2), 0.2, epsilon = 1e-15); // a=0,d=0 case
        // Exactly one branch fires for each (group, label) cell; over the four
        // cells the value is determined by the label alone.
        for group in [0u8, 1] {
            for label in [0u8, 1] {
                let v = aod_value(label, 0.25);
                let expected = if label == 1 { 0.75 } else { 0.25 };
                assert_abs_diff_eq!(v, expected, epsilon = 1e-15);
                let _ = group;
            }
        }
    }

    #[test]
    fn burden_cold_start_and_equal_means() {
        let mut state = BurdenState::new(0.9).unwrap();
        assert_eq!(state.gap(), 0.0);

        // Negative-classified instance in group 0 at distance 2.
        let model = MixtureModel::new(
            1,
            vec![ExpertParams { weights: vec![1.0], bias: 0.0 }],
            vec![GateUnit::zeros(1)],
        )
        .unwrap();
        let inst = instance(vec![-2.0], 0, 0);
        assert_eq!(model.predict(&[-2.0]).unwrap(), 0);
        let gap = burden_penalty(&model, &inst, &mut state).unwrap();
        assert_abs_diff_eq!(gap, 2.0, epsilon = 1e-12);
        assert!(state.is_cold(1));

        // The same distance observed in group 1 closes the gap.
        let inst1 = instance(vec![-2.0], 0, 1);
        let gap = burden_penalty(&model, &inst1, &mut state).unwrap();
        assert_abs_diff_eq!(gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn burden_positive_classification_leaves_state_unchanged() {
        let model = MixtureModel::new(
            1,
            vec![ExpertParams { weights: vec![1.0], bias: 0.0 }],
            vec![GateUnit::zeros(1)],
        )
        .unwrap();
        let mut state = BurdenState::new(0.9).unwrap();
        state.observe(0, 3.0);
        let before = state.clone();
        let gap = burden_penalty(&model, &instance(vec![2.0], 1, 1), &mut state).unwrap();
        assert_eq!(state, before);
        assert_abs_diff_eq!(gap, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_distance_stream_drives_gap_to_zero() {
        let mut state = BurdenState::new(0.99).unwrap();
        for round in 0..200 {
            let dist = 1.0 + (round % 5) as f64;
            state.observe(0, dist);
            state.observe(1, dist);
        }
        assert_abs_diff_eq!(state.gap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_lambdas_reduce_to_accuracy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = MixtureModel::random(3, 2, 1.0, &mut rng);
        let inst = instance(vec![0.4, -1.0, 0.7], 1, 0);
        let schedule = FairnessSchedule::new(0.0, 0.0, 0.0).unwrap();
        let mut state = BurdenState::new(0.99).unwrap();
        let (breakdown, grad) = total_loss_and_gradients(&model, &inst, &schedule, &mut state).unwrap();
        assert_abs_diff_eq!(breakdown.total, breakdown.e_acc, epsilon = 1e-15);

        // Finite differences of the bare accuracy loss.
        let fd = finite_difference(&model, &inst, [0.0; 3], &BurdenStepContext::inactive());
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "analytic {a} vs fd {b}");
        }
    }

    #[test]
    fn single_expert_accuracy_gradient_reduces_to_logistic_form() {
        let model = MixtureModel::new(
            2,
            vec![ExpertParams { weights: vec![0.3, -0.2], bias: 0.1 }],
            vec![GateUnit::zeros(2)],
        )
        .unwrap();
        let inst = instance(vec![1.5, -0.5], 1, 0);
        let out = model.forward(&inst.features).unwrap();
        let y = out.expert_probabilities[0];
        let d = 1.0;
        let expected_deta = (y - d) * y * (1.0 - y);
        let grad = gradient_from_output(&model, &inst, &out, [0.0; 3], &BurdenStepContext::inactive());
        // Bias slot holds d(loss)/d(eta) directly.
        assert_abs_diff_eq!(grad[2], expected_deta, epsilon = 1e-14);
        assert_abs_diff_eq!(grad[0], expected_deta * 1.5, epsilon = 1e-14);
    }

    /// Central finite differences of the surrogate loss, step 1e-6.
    fn finite_difference(
        model: &MixtureModel,
        inst: &StreamInstance,
        lambdas: [f64; 3],
        ctx: &BurdenStepContext,
    ) -> Vec<f64> {
        let step = 1e-6;
        let base = model.params();
        let mut out = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += step;
            let mut minus = base.clone();
            minus[i] -= step;
            let mut m_plus = model.clone();
            m_plus.set_params(&plus).unwrap();
            let mut m_minus = model.clone();
            m_minus.set_params(&minus).unwrap();
            let lp = surrogate_total_loss(&m_plus, inst, lambdas, ctx).unwrap();
            let lm = surrogate_total_loss(&m_minus, inst, lambdas, ctx).unwrap();
            out.push((lp - lm) / (2.0 * step));
        }
        out
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 100 {
            let dim = rng.random_range(1..5);
            let m = rng.random_range(1..4);
            let model = MixtureModel::random(dim, m, 1.5, &mut rng);
            let features: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let inst = instance(features, rng.random_range(0..2), rng.random_range(0..2));
            let lambdas = [
                rng.random_range(0.01..0.5),
                rng.random_range(0.01..0.5),
                rng.random_range(0.01..0.5),
            ];
            let out = model.forward(&inst.features).unwrap();
            // Stay away from the |s| kink and degenerate norms so the central
            // difference is valid.
            if out.gated_logit.abs() < 1e-3 {
                continue;
            }
            let ctx = BurdenStepContext {
                applies: out.mixture_probability < 0.5,
                sign: if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 },
            };
            let analytic = gradient_from_output(&model, &inst, &out, lambdas, &ctx);
            let fd = finite_difference(&model, &inst, lambdas, &ctx);
            for (a, b) in analytic.iter().zip(&fd) {
                let scale = a.abs().max(b.abs()).max(1e-4);
                assert!(
                    (a - b).abs() / scale < 1e-5,
                    "analytic {a} vs fd {b} (dim {dim}, m {m})"
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn breakdown_total_is_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut schedule = FairnessSchedule::new(0.02, 0.03, 0.04).unwrap();
        schedule.record_growth();
        schedule.record_growth();
        let mut state = BurdenState::new(0.99).unwrap();
        for _ in 0..50 {
            let model = MixtureModel::random(3, 2, 1.0, &mut rng);
            let features: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let inst = instance(features, rng.random_range(0..2), rng.random_range(0..2));
            let (b, _) = total_loss_and_gradients(&model, &inst, &schedule, &mut state).unwrap();
            let [l1, l2, l3] = schedule.lambdas();
            assert_abs_diff_eq!(
                b.total,
                b.e_acc + l1 * b.e_spd + l2 * b.e_aod + l3 * b.e_burden,
                epsilon = 1e-12
            );
            assert!(b.e_acc >= 0.0 && b.e_spd >= 0.0 && b.e_aod >= 0.0 && b.e_burden >= 0.0);
        }
    }

    #[test]
    fn lambda_values_are_exact_multiples() {
        let mut schedule = FairnessSchedule::new(0.02, 0.02, 0.02).unwrap();
        for _ in 0..1000 {
            schedule.record_growth();
        }
        assert_eq!(schedule.lambdas()[0], 1000.0 * 0.02);
        assert_eq!(schedule.growth_events(), 1000);
    }

    proptest! {
        #[test]
        fn spd_complement_sums_to_one(p in 0.0f64..=1.0) {
            prop_assert!((spd_value(0, p) + spd_value(1, p) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn spd_is_monotone_in_probability(lo in 0.0f64..0.5, hi in 0.5f64..1.0) {
            prop_assume!(lo < hi);
            // Increasing y_hat strictly decreases the group-0 penalty and
            // strictly increases the group-1 penalty.
            prop_assert!(spd_value(0, hi) < spd_value(0, lo));
            prop_assert!(spd_value(1, hi) > spd_value(1, lo));
        }
    }
}
