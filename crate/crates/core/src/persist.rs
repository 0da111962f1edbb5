//! Model serialization: one JSON document carrying the feature dimension,
//! the expert and gate parameter arrays, and the fairness-schedule state.
//! Floats are emitted as shortest round-trippable decimals, so a round trip
//! is lossless to full binary precision.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::loss::FairnessSchedule;
use crate::model::{ExpertParams, GateUnit, MixtureModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelFile {
    pub feature_dim: usize,
    pub experts: Vec<ExpertParams>,
    pub gate: Vec<GateUnit>,
    pub schedule: FairnessSchedule,
}

impl ModelFile {
    pub fn new(model: &MixtureModel, schedule: &FairnessSchedule) -> Self {
        Self {
            feature_dim: model.feature_dim(),
            experts: model.experts().to_vec(),
            gate: model.gate().to_vec(),
            schedule: schedule.clone(),
        }
    }

    /// Rebuild the validated model and schedule.
    pub fn into_parts(self) -> Result<(MixtureModel, FairnessSchedule)> {
        let model = MixtureModel::new(self.feature_dim, self.experts, self.gate)?;
        Ok((model, self.schedule))
    }
}

/// Write a value as pretty JSON plus a trailing newline.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_model(path: &Path, model: &MixtureModel, schedule: &FairnessSchedule) -> Result<()> {
    save_json(path, &ModelFile::new(model, schedule))
}

pub fn load_model(path: &Path) -> Result<(MixtureModel, FairnessSchedule)> {
    let file: ModelFile = load_json(path)?;
    file.into_parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let dim = rng.random_range(1..6);
            let m = rng.random_range(1..5);
            let mut model = MixtureModel::random(dim, m, 10.0, &mut rng);
            // Mix in values with awkward decimal expansions.
            let mut params = model.params();
            params[0] = 0.1 + 0.2;
            if params.len() > 1 {
                params[1] = 1e-300;
            }
            if params.len() > 2 {
                params[2] = -1.234_567_890_123_456_7e18;
            }
            model.set_params(&params).unwrap();

            let mut schedule = FairnessSchedule::new(0.02, 0.007, 1.0 / 3.0).unwrap();
            schedule.record_growth();
            schedule.record_growth();

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            save_model(&path, &model, &schedule).unwrap();
            let (loaded, loaded_schedule) = load_model(&path).unwrap();

            assert_eq!(loaded_schedule, schedule);
            assert_eq!(loaded.feature_dim(), model.feature_dim());
            for (a, b) in loaded.params().iter().zip(&model.params()) {
                assert_eq!(a.to_bits(), b.to_bits(), "float mangled in round trip");
            }
        }
    }

    #[test]
    fn loading_validates_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let text = r#"{
            "featureDim": 2,
            "experts": [{"weights": [1.0], "bias": 0.0}],
            "gate": [{"weights": [1.0, 2.0], "bias": 0.0}],
            "schedule": {"growthEvents": 0, "deltaLambda": [0.0, 0.0, 0.0]}
        }"#;
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn save_emits_camel_case_document() {
        let model = MixtureModel::single(2).unwrap();
        let schedule = FairnessSchedule::new(0.02, 0.02, 0.02).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &model, &schedule).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["featureDim", "experts", "gate", "schedule", "growthEvents", "deltaLambda"] {
            assert!(text.contains(key), "missing key {key} in {text}");
        }
    }
}
