//! Online single-pass training: SGD over the combined loss, expert addition
//! on a fixed interval or on individual-fairness saturation, and fairness
//! weights ramped per growth event.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::StreamEvent;
use crate::error::{FeamoeError, Result};
use crate::loss::{
    total_loss_and_gradients, BurdenState, FairnessSchedule, LossBreakdown, StreamInstance,
};
use crate::metrics::MetricsSink;
use crate::model::{ExpertParams, MixtureModel};

/// When a new expert joins the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GrowthPolicy {
    /// Grow every k instances.
    FixedInterval,
    /// Grow once n instances have failed the flip-the-attribute check.
    IndividualFairnessSaturation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainerConfig {
    /// Instances per growth interval under the fixed-interval policy.
    pub k: u64,
    pub learning_rate: f64,
    pub delta_lambda: [f64; 3],
    pub growth_policy: GrowthPolicy,
    /// Violations that trigger growth under the saturation policy.
    pub saturation_threshold: u64,
    /// Constant added to the logged loss when an instance fails the
    /// individual-fairness check.
    pub individual_fairness_penalty: f64,
    pub max_experts: usize,
    pub seed: u64,
    /// EMA decay for the burden group means.
    pub burden_beta: f64,
    /// Initial gate share of a newly added expert.
    pub new_expert_gate_share: f64,
    /// Encoded position of the protected-attribute feature; required by the
    /// saturation policy's flip check.
    pub protected_feature_index: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            k: 1000,
            learning_rate: 0.05,
            delta_lambda: [0.02, 0.02, 0.02],
            growth_policy: GrowthPolicy::FixedInterval,
            saturation_threshold: 50,
            individual_fairness_penalty: 0.4,
            max_experts: 32,
            seed: 0,
            burden_beta: BurdenState::DEFAULT_BETA,
            new_expert_gate_share: 1e-6,
            protected_feature_index: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(FeamoeError::InvalidConfig("k must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(FeamoeError::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        for d in self.delta_lambda {
            if !d.is_finite() || d < 0.0 {
                return Err(FeamoeError::InvalidConfig(format!(
                    "lambda increments must be finite and >= 0, got {d}"
                )));
            }
        }
        if self.max_experts == 0 {
            return Err(FeamoeError::InvalidConfig("maxExperts must be >= 1".into()));
        }
        if self.saturation_threshold == 0 {
            return Err(FeamoeError::InvalidConfig("saturation threshold must be >= 1".into()));
        }
        if !(self.individual_fairness_penalty.is_finite() && self.individual_fairness_penalty >= 0.0) {
            return Err(FeamoeError::InvalidConfig(
                "individual fairness penalty must be finite and >= 0".into(),
            ));
        }
        if !(self.new_expert_gate_share > 0.0 && self.new_expert_gate_share < 0.5) {
            return Err(FeamoeError::InvalidConfig(format!(
                "new-expert gate share must be in (0, 0.5), got {}",
                self.new_expert_gate_share
            )));
        }
        if matches!(self.growth_policy, GrowthPolicy::IndividualFairnessSaturation)
            && self.protected_feature_index.is_none()
        {
            return Err(FeamoeError::InvalidConfig(
                "saturation policy needs protectedFeatureIndex (the protected attribute must be \
                 part of the feature vector)"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One growth event: where it happened and the weights after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GrowthEvent {
    pub stream_position: u64,
    pub expert_count: usize,
    pub lambdas: [f64; 3],
}

/// JSON sidecar written next to a serialized model: the full configuration,
/// the growth-event log (which is also the lambda trajectory), and counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetadata {
    pub config: TrainerConfig,
    pub feature_dim: usize,
    pub instances_seen: u64,
    pub final_expert_count: usize,
    pub final_lambdas: [f64; 3],
    pub growth_events: Vec<GrowthEvent>,
    pub anomalies: u64,
    pub burden: BurdenState,
    pub background_means: Vec<f64>,
}

/// Per-instance outcome of a training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub breakdown: LossBreakdown,
    /// Breakdown total plus the individual-fairness penalty when violated.
    pub logged_total: f64,
    pub individual_violation: bool,
    /// The parameter update was skipped because the gradient was non-finite.
    pub skipped: bool,
}

/// Full trainer state; mutation is single-writer.
#[derive(Debug, Clone)]
pub struct TrainerState {
    model: MixtureModel,
    schedule: FairnessSchedule,
    burden: BurdenState,
    config: TrainerConfig,
    instances_seen: u64,
    instances_since_growth: u64,
    violations_since_growth: u64,
    anomalies: u64,
    growth_log: Vec<GrowthEvent>,
    feature_sums: Vec<f64>,
    rng: ChaCha8Rng,
}

impl TrainerState {
    pub fn model(&self) -> &MixtureModel {
        &self.model
    }

    pub fn schedule(&self) -> &FairnessSchedule {
        &self.schedule
    }

    pub fn burden(&self) -> &BurdenState {
        &self.burden
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn instances_seen(&self) -> u64 {
        self.instances_seen
    }

    pub fn instances_since_growth(&self) -> u64 {
        self.instances_since_growth
    }

    pub fn violations_since_growth(&self) -> u64 {
        self.violations_since_growth
    }

    /// Steps whose parameter update was skipped on a non-finite gradient.
    pub fn anomalies(&self) -> u64 {
        self.anomalies
    }

    pub fn growth_log(&self) -> &[GrowthEvent] {
        &self.growth_log
    }

    /// Running feature means of everything seen; the default explanation
    /// background.
    pub fn feature_means(&self) -> Vec<f64> {
        if self.instances_seen == 0 {
            vec![0.0; self.feature_sums.len()]
        } else {
            self.feature_sums.iter().map(|s| s / self.instances_seen as f64).collect()
        }
    }

    pub fn run_metadata(&self) -> RunMetadata {
        RunMetadata {
            config: self.config.clone(),
            feature_dim: self.model.feature_dim(),
            instances_seen: self.instances_seen,
            final_expert_count: self.model.expert_count(),
            final_lambdas: self.schedule.lambdas(),
            growth_events: self.growth_log.clone(),
            anomalies: self.anomalies,
            burden: self.burden.clone(),
            background_means: self.feature_means(),
        }
    }
}

/// Fresh state with a single zero-initialized expert and all lambdas at 0.
pub fn init_trainer(config: &TrainerConfig, feature_dim: usize) -> Result<TrainerState> {
    config.validate()?;
    if let Some(idx) = config.protected_feature_index {
        if idx >= feature_dim {
            return Err(FeamoeError::InvalidConfig(format!(
                "protectedFeatureIndex {idx} is out of range for {feature_dim} features"
            )));
        }
    }
    Ok(TrainerState {
        model: MixtureModel::single(feature_dim)?,
        schedule: FairnessSchedule::new(
            config.delta_lambda[0],
            config.delta_lambda[1],
            config.delta_lambda[2],
        )?,
        burden: BurdenState::new(config.burden_beta)?,
        config: config.clone(),
        instances_seen: 0,
        instances_since_growth: 0,
        violations_since_growth: 0,
        anomalies: 0,
        growth_log: Vec::new(),
        feature_sums: vec![0.0; feature_dim],
        rng: rand::SeedableRng::seed_from_u64(config.seed),
    })
}

/// Mixture over supplied experts with a fresh uniform gate and a fresh
/// schedule; training may continue from here.
pub fn warm_start_from_models(config: &TrainerConfig, experts: Vec<ExpertParams>) -> Result<TrainerState> {
    config.validate()?;
    let first = experts
        .first()
        .ok_or_else(|| FeamoeError::InvalidConfig("warm start needs at least one expert".into()))?;
    let feature_dim = first.weights.len();
    for e in &experts {
        if e.weights.len() != feature_dim {
            return Err(FeamoeError::DimensionMismatch { expected: feature_dim, got: e.weights.len() });
        }
    }
    let gate = experts.iter().map(|_| crate::model::GateUnit::zeros(feature_dim)).collect();
    let mut state = init_trainer(config, feature_dim)?;
    state.model = MixtureModel::new(feature_dim, experts, gate)?;
    Ok(state)
}

impl TrainerState {
    /// One SGD step over all current expert and gate parameters. The
    /// individual-fairness check (saturation policy) runs against the model
    /// that scored the instance, before the update.
    pub fn step_one(&mut self, instance: &StreamInstance) -> Result<StepOutcome> {
        if instance.features.len() != self.model.feature_dim() {
            return Err(FeamoeError::DimensionMismatch {
                expected: self.model.feature_dim(),
                got: instance.features.len(),
            });
        }

        let individual_violation = match self.config.growth_policy {
            GrowthPolicy::IndividualFairnessSaturation => self.fails_individual_fairness(instance)?,
            GrowthPolicy::FixedInterval => false,
        };

        let (breakdown, gradient) =
            total_loss_and_gradients(&self.model, instance, &self.schedule, &mut self.burden)?;

        let mut skipped = false;
        if gradient.iter().all(|g| g.is_finite()) {
            if self.config.learning_rate != 0.0 {
                self.model.apply_gradient_step(&gradient, self.config.learning_rate)?;
            }
        } else {
            skipped = true;
            self.anomalies += 1;
        }

        self.instances_seen += 1;
        self.instances_since_growth += 1;
        if individual_violation {
            self.violations_since_growth += 1;
        }
        for (sum, v) in self.feature_sums.iter_mut().zip(&instance.features) {
            *sum += v;
        }

        let logged_total = breakdown.total
            + if individual_violation { self.config.individual_fairness_penalty } else { 0.0 };
        Ok(StepOutcome { breakdown, logged_total, individual_violation, skipped })
    }

    /// Flip the protected feature and re-predict; a changed prediction is a
    /// violation.
    fn fails_individual_fairness(&self, instance: &StreamInstance) -> Result<bool> {
        let idx = self
            .config
            .protected_feature_index
            .expect("validated for the saturation policy");
        let original = self.model.predict(&instance.features)?;
        let mut flipped = instance.features.clone();
        flipped[idx] = 1.0 - flipped[idx];
        let counterfactual = self.model.predict(&flipped)?;
        Ok(original != counterfactual)
    }

    /// Add an expert and bump every lambda when the active policy's counter
    /// has reached its threshold. Growth and lambda increments freeze at the
    /// expert cap.
    pub fn maybe_grow(&mut self) -> bool {
        let triggered = match self.config.growth_policy {
            GrowthPolicy::FixedInterval => self.instances_since_growth >= self.config.k,
            GrowthPolicy::IndividualFairnessSaturation => {
                self.violations_since_growth >= self.config.saturation_threshold
            }
        };
        if !triggered {
            return false;
        }
        self.instances_since_growth = 0;
        self.violations_since_growth = 0;
        if self.model.expert_count() >= self.config.max_experts {
            return false;
        }
        self.model.add_expert_with_gate_share(self.config.new_expert_gate_share);
        self.schedule.record_growth();
        self.growth_log.push(GrowthEvent {
            stream_position: self.instances_seen,
            expert_count: self.model.expert_count(),
            lambdas: self.schedule.lambdas(),
        });
        true
    }

    /// Seeded generator reserved for stochastic extensions; training itself
    /// is deterministic.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Single pass over a stream: each instance is scored for the sink first
/// (test-then-train), then used for one SGD step; growth runs after every
/// step. Stream errors are propagated with their position.
pub fn train_stream<I, S>(config: &TrainerConfig, feature_dim: usize, stream: I, sink: &mut S) -> Result<TrainerState>
where
    I: IntoIterator<Item = Result<StreamEvent>>,
    S: MetricsSink + ?Sized,
{
    let mut state = init_trainer(config, feature_dim)?;
    train_stream_from(&mut state, stream, sink)?;
    Ok(state)
}

/// Continue training an existing state over a stream; used after warm starts.
pub fn train_stream_from<I, S>(state: &mut TrainerState, stream: I, sink: &mut S) -> Result<()>
where
    I: IntoIterator<Item = Result<StreamEvent>>,
    S: MetricsSink + ?Sized,
{
    for item in stream {
        let position = state.instances_seen;
        let event = item.map_err(|e| FeamoeError::Stream { position, source: Box::new(e) })?;
        match event {
            StreamEvent::Instance(instance) => {
                let out = state
                    .model
                    .forward(&instance.features)
                    .map_err(|e| FeamoeError::Stream { position, source: Box::new(e) })?;
                let predicted = u8::from(out.mixture_probability >= 0.5);
                let distance = state.model.boundary_distance_from_output(&out).value;
                sink.observe(predicted, instance.label, instance.group, distance);

                state
                    .step_one(&instance)
                    .map_err(|e| FeamoeError::Stream { position, source: Box::new(e) })?;
                state.maybe_grow();
            }
            StreamEvent::SegmentBoundary { .. } => sink.segment_boundary(),
        }
    }
    Ok(())
}
