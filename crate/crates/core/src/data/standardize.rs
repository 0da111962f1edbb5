//! Online z-scoring with Welford accumulators, strictly causal: each row is
//! transformed with statistics from the rows before it.

use serde::{Deserialize, Serialize};

/// Variances below this leave the feature uncentered.
pub const LOW_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn update(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Sample variance; defined from two observations.
    fn variance(&self) -> Option<f64> {
        if self.count < 2 {
            None
        } else {
            Some(self.m2 / (self.count - 1) as f64)
        }
    }
}

/// Running mean/variance per numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    accumulators: Vec<Welford>,
    passthrough_rows: u64,
}

impl Standardizer {
    pub fn new(numeric_features: usize) -> Self {
        Self { accumulators: vec![Welford::default(); numeric_features], passthrough_rows: 0 }
    }

    pub fn numeric_features(&self) -> usize {
        self.accumulators.len()
    }

    pub fn count(&self) -> u64 {
        self.accumulators.first().map_or(0, |a| a.count)
    }

    /// Rows in which at least one feature passed through unscaled because its
    /// variance was still below [`LOW_VARIANCE`].
    pub fn passthrough_rows(&self) -> u64 {
        self.passthrough_rows
    }

    /// Transform one row with the statistics accumulated so far, then fold
    /// the raw row in. Low-variance features pass through raw.
    pub fn standardize_then_update(&mut self, raw: &mut [f64]) {
        debug_assert_eq!(raw.len(), self.accumulators.len());
        let mut any_passthrough = false;
        let transformed: Vec<f64> = raw
            .iter()
            .zip(&self.accumulators)
            .map(|(&v, acc)| match acc.variance() {
                Some(var) if var >= LOW_VARIANCE => (v - acc.mean) / var.sqrt(),
                _ => {
                    any_passthrough = true;
                    v
                }
            })
            .collect();
        if any_passthrough && !raw.is_empty() {
            self.passthrough_rows += 1;
        }
        for (acc, &v) in self.accumulators.iter_mut().zip(raw.iter()) {
            acc.update(v);
        }
        raw.copy_from_slice(&transformed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_two_rows_pass_through() {
        let mut s = Standardizer::new(1);
        let mut row = [1.0];
        s.standardize_then_update(&mut row);
        assert_eq!(row, [1.0]);
        let mut row = [3.0];
        s.standardize_then_update(&mut row);
        assert_eq!(row, [3.0]);
        assert_eq!(s.passthrough_rows(), 2);
    }

    #[test]
    fn third_row_uses_stats_of_first_two() {
        let mut s = Standardizer::new(1);
        for v in [1.0, 3.0] {
            let mut row = [v];
            s.standardize_then_update(&mut row);
        }
        // Mean 2, sample variance 2.
        let mut row = [5.0];
        s.standardize_then_update(&mut row);
        assert_abs_diff_eq!(row[0], (5.0 - 2.0) / 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn constant_feature_keeps_passing_through() {
        let mut s = Standardizer::new(1);
        for _ in 0..10 {
            let mut row = [7.0];
            s.standardize_then_update(&mut row);
            assert_eq!(row, [7.0]);
        }
        assert_eq!(s.passthrough_rows(), 10);
    }

    #[test]
    fn replay_is_bit_identical() {
        let values = [0.5, -1.25, 3.75, 2.0, -0.125, 9.5];
        let run = |vals: &[f64]| -> Vec<u64> {
            let mut s = Standardizer::new(1);
            vals.iter()
                .map(|&v| {
                    let mut row = [v];
                    s.standardize_then_update(&mut row);
                    row[0].to_bits()
                })
                .collect()
        };
        assert_eq!(run(&values), run(&values));
    }
}
