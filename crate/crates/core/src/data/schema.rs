//! Declared CSV layout and its deterministic encoded feature layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FeamoeError, Result};

/// User-declared dataset layout, normally loaded from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Schema {
    /// Feature columns in encoding order.
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub group_column: String,
    /// When true the group column must appear in `feature_columns` and is
    /// encoded as the raw 0/1 group bit.
    #[serde(default)]
    pub group_included_as_feature: bool,
    /// Raw value mapped to label 1.
    pub positive_label_value: String,
    /// Raw value mapped to group 1 (privileged).
    pub privileged_group_value: String,
    /// Categorical columns with their declared category sets; expansion
    /// order is lexicographic over the declared categories.
    #[serde(default)]
    pub categorical_columns: BTreeMap<String, Vec<String>>,
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(FeamoeError::Schema("featureColumns must not be empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.feature_columns {
            if !seen.insert(c) {
                return Err(FeamoeError::Schema(format!("duplicate feature column '{c}'")));
            }
        }
        if self.feature_columns.iter().any(|c| c == &self.label_column) {
            return Err(FeamoeError::Schema(format!(
                "label column '{}' cannot be a feature",
                self.label_column
            )));
        }
        let group_listed = self.feature_columns.iter().any(|c| c == &self.group_column);
        if self.group_included_as_feature && !group_listed {
            return Err(FeamoeError::Schema(format!(
                "groupIncludedAsFeature is set but '{}' is not in featureColumns",
                self.group_column
            )));
        }
        if !self.group_included_as_feature && group_listed {
            return Err(FeamoeError::Schema(format!(
                "group column '{}' is a feature but groupIncludedAsFeature is not set",
                self.group_column
            )));
        }
        for (col, categories) in &self.categorical_columns {
            if !self.feature_columns.iter().any(|c| c == col) {
                return Err(FeamoeError::Schema(format!(
                    "categorical column '{col}' is not a feature column"
                )));
            }
            if col == &self.group_column {
                return Err(FeamoeError::Schema(format!(
                    "group column '{col}' is encoded as the group bit, not one-hot"
                )));
            }
            if categories.is_empty() {
                return Err(FeamoeError::Schema(format!("categorical column '{col}' declares no categories")));
            }
            let mut cats = std::collections::BTreeSet::new();
            for cat in categories {
                if !cats.insert(cat) {
                    return Err(FeamoeError::Schema(format!(
                        "categorical column '{col}' declares duplicate category '{cat}'"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolve the deterministic encoded layout.
    pub fn encode(&self) -> Result<EncodedSchema> {
        self.validate()?;
        let mut slots = Vec::new();
        let mut feature_names = Vec::new();
        let mut protected_feature_index = None;
        let mut numeric_slots = 0;
        for col in &self.feature_columns {
            if col == &self.group_column {
                protected_feature_index = Some(feature_names.len());
                feature_names.push(col.clone());
                slots.push(SlotKind::GroupBit);
            } else if let Some(categories) = self.categorical_columns.get(col) {
                let mut sorted = categories.clone();
                sorted.sort();
                for cat in &sorted {
                    feature_names.push(format!("{col}={cat}"));
                }
                slots.push(SlotKind::OneHot { column: col.clone(), categories: sorted });
            } else {
                feature_names.push(col.clone());
                slots.push(SlotKind::Numeric { index: numeric_slots });
                numeric_slots += 1;
            }
        }
        Ok(EncodedSchema {
            schema: self.clone(),
            slots,
            feature_names,
            protected_feature_index,
            numeric_slots,
        })
    }
}

/// How one declared feature column maps into the encoded vector.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotKind {
    /// Standardized numeric value; `index` addresses the standardizer.
    Numeric { index: usize },
    /// One slot per category, lexicographic order, values 0/1.
    OneHot { column: String, categories: Vec<String> },
    /// The raw 0/1 group bit.
    GroupBit,
}

/// A validated schema plus its resolved feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSchema {
    pub schema: Schema,
    pub slots: Vec<SlotKind>,
    pub feature_names: Vec<String>,
    /// Encoded position of the group bit, when included as a feature.
    pub protected_feature_index: Option<usize>,
    pub numeric_slots: usize,
}

impl EncodedSchema {
    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_schema() -> Schema {
        Schema {
            feature_columns: vec!["age".into(), "color".into()],
            label_column: "outcome".into(),
            group_column: "sex".into(),
            group_included_as_feature: false,
            positive_label_value: "yes".into(),
            privileged_group_value: "m".into(),
            categorical_columns: BTreeMap::from([(
                "color".to_string(),
                vec!["red".to_string(), "blue".to_string()],
            )]),
        }
    }

    #[test]
    fn encoding_order_is_deterministic_and_lexicographic() {
        let enc = base_schema().encode().unwrap();
        assert_eq!(enc.feature_names, vec!["age", "color=blue", "color=red"]);
        assert_eq!(enc.numeric_slots, 1);
        assert_eq!(enc.protected_feature_index, None);
    }

    #[test]
    fn group_as_feature_gets_a_bit_slot() {
        let mut schema = base_schema();
        schema.feature_columns.push("sex".into());
        schema.group_included_as_feature = true;
        let enc = schema.encode().unwrap();
        assert_eq!(enc.feature_names, vec!["age", "color=blue", "color=red", "sex"]);
        assert_eq!(enc.protected_feature_index, Some(3));
    }

    #[test]
    fn label_as_feature_is_rejected() {
        let mut schema = base_schema();
        schema.feature_columns.push("outcome".into());
        assert!(schema.validate().is_err());
    }

    #[test]
    fn group_feature_flag_mismatch_is_rejected() {
        let mut schema = base_schema();
        schema.group_included_as_feature = true;
        assert!(schema.validate().is_err());

        let mut schema = base_schema();
        schema.feature_columns.push("sex".into());
        assert!(schema.validate().is_err());
    }

    #[test]
    fn unknown_categorical_column_is_rejected() {
        let mut schema = base_schema();
        schema.categorical_columns.insert("nope".into(), vec!["x".into()]);
        assert!(schema.validate().is_err());
    }

    #[test]
    fn schema_round_trips_through_json() {
        let schema = base_schema();
        let text = serde_json::to_string(&schema).unwrap();
        let back: Schema = serde_json::from_str(&text).unwrap();
        assert_eq!(schema, back);
    }
}
