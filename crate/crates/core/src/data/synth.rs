//! Synthetic stream generators: the two-segment toy drift scenario and a
//! group-biased stream for fairness-penalty studies. Generators are pure
//! functions of (spec, seed).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::StreamEvent;
use crate::loss::StreamInstance;
use crate::metrics::{MetricsWindow, WindowEntry};
use crate::model::ExpertParams;

const TOY_NOISE: f64 = 0.5;
const TOY_SEG1_CENTER_X: f64 = 2.0;
const TOY_SEG2_CENTER_Y: f64 = 3.0;

/// The hyperplane separating segment 1 of the toy stream: x0 = 0.
pub fn toy_segment1_separator() -> ExpertParams {
    ExpertParams { weights: vec![4.0, 0.0], bias: 0.0 }
}

/// Two-segment toy stream (features (x0, x1), D = 2).
///
/// Segment 1: label blobs at x0 = +/-2 on the x0 axis, separable by x0 = 0,
/// with the privileged group overrepresented in the positive blob. Segment 2:
/// new blobs where x0 tracks the group and x1 tracks the label, so the
/// segment-1 separator collapses to near-chance accuracy and large AOD while
/// x1 > 0 classifies the segment perfectly.
pub fn toy_two_segment_stream(segment_sizes: [usize; 2], seed: u64) -> Vec<StreamEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, TOY_NOISE).expect("valid sigma");
    let mut events = Vec::with_capacity(segment_sizes[0] + segment_sizes[1] + 2);

    for _ in 0..segment_sizes[0] {
        let label = u8::from(rng.random_range(0..2) == 1);
        let privileged_share = if label == 1 { 0.75 } else { 0.25 };
        let group = u8::from(rng.random::<f64>() < privileged_share);
        let cx = if label == 1 { TOY_SEG1_CENTER_X } else { -TOY_SEG1_CENTER_X };
        let x = vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)];
        events.push(StreamEvent::Instance(StreamInstance::new(x, label, group).expect("valid")));
    }
    events.push(StreamEvent::SegmentBoundary { index: 0 });

    for _ in 0..segment_sizes[1] {
        let label = u8::from(rng.random_range(0..2) == 1);
        let group = u8::from(rng.random_range(0..2) == 1);
        let cx = if group == 1 { TOY_SEG1_CENTER_X } else { -TOY_SEG1_CENTER_X };
        let cy = if label == 1 { TOY_SEG2_CENTER_Y } else { -TOY_SEG2_CENTER_Y };
        let x = vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)];
        events.push(StreamEvent::Instance(StreamInstance::new(x, label, group).expect("valid")));
    }
    events.push(StreamEvent::SegmentBoundary { index: 1 });
    events
}

/// What the generator guarantees about its own geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySelfTest {
    pub separator_accuracy_on_segment1: f64,
    pub frozen_accuracy_on_segment2: f64,
    pub frozen_aod_on_segment2: f64,
}

/// Score the generator's frozen segment-1 separator on both segments.
pub fn toy_self_test(segment_sizes: [usize; 2], seed: u64) -> ToySelfTest {
    let separator = toy_segment1_separator();
    let events = toy_two_segment_stream(segment_sizes, seed);
    let mut segment = 0usize;
    let mut windows = [
        MetricsWindow::new(segment_sizes[0].max(1)).expect("capacity"),
        MetricsWindow::new(segment_sizes[1].max(1)).expect("capacity"),
    ];
    for event in &events {
        match event {
            StreamEvent::Instance(inst) => {
                let score = separator.score(&inst.features);
                let predicted = u8::from(score >= 0.0);
                let norm = separator.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                windows[segment].push(WindowEntry {
                    predicted,
                    label: inst.label,
                    group: inst.group,
                    distance: score.abs() / norm,
                });
            }
            StreamEvent::SegmentBoundary { .. } => segment = (segment + 1).min(1),
        }
    }
    ToySelfTest {
        separator_accuracy_on_segment1: windows[0].accuracy().0,
        frozen_accuracy_on_segment2: windows[1].accuracy().0,
        frozen_aod_on_segment2: windows[1].aod().0,
    }
}

/// Encoded position of the group bit in [`biased_stream`] features.
pub const BIASED_PROTECTED_FEATURE_INDEX: usize = 2;

/// Group-biased labeled stream (features (proxy, signal, group bit), D = 3).
///
/// Labels lean on a clean signal feature plus a group-dependent offset, and a
/// noisy proxy feature tracks the group; an unconstrained learner therefore
/// acquires a sizable positive-rate gap that the fairness penalties can
/// trade away at modest accuracy cost.
pub fn biased_stream(n: usize, seed: u64) -> Vec<StreamInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");
    (0..n)
        .map(|_| {
            let group = u8::from(rng.random_range(0..2) == 1);
            let direction = if group == 1 { 1.0 } else { -1.0 };
            let proxy = 1.5 * direction + unit.sample(&mut rng);
            let signal: f64 = unit.sample(&mut rng);
            let p = crate::model::sigmoid(3.0 * signal + 1.25 * direction);
            let label = u8::from(rng.random::<f64>() < p);
            StreamInstance::new(vec![proxy, signal, f64::from(group)], label, group).expect("valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_stream_is_seed_deterministic() {
        let a = toy_two_segment_stream([50, 50], 9);
        let b = toy_two_segment_stream([50, 50], 9);
        assert_eq!(a, b);
        let c = toy_two_segment_stream([50, 50], 10);
        assert_ne!(a, c);
    }

    #[test]
    fn toy_layout_sizes_and_boundaries() {
        let events = toy_two_segment_stream([30, 20], 1);
        assert_eq!(events.len(), 52);
        assert!(matches!(events[30], StreamEvent::SegmentBoundary { index: 0 }));
        assert!(matches!(events[51], StreamEvent::SegmentBoundary { index: 1 }));
    }

    #[test]
    fn generator_self_test_holds() {
        for seed in [0, 1, 2, 3, 4] {
            let report = toy_self_test([2000, 2000], seed);
            assert!(
                report.separator_accuracy_on_segment1 >= 0.99,
                "segment-1 accuracy {report:?}"
            );
            assert!(report.frozen_accuracy_on_segment2 <= 0.6, "frozen accuracy {report:?}");
            assert!(report.frozen_aod_on_segment2 >= 0.2, "frozen AOD {report:?}");
        }
    }

    #[test]
    fn biased_stream_has_group_skew() {
        let instances = biased_stream(4000, 3);
        let rate = |g: u8| {
            let of_group: Vec<_> = instances.iter().filter(|i| i.group == g).collect();
            of_group.iter().filter(|i| i.label == 1).count() as f64 / of_group.len() as f64
        };
        assert!(rate(1) - rate(0) > 0.15, "rates {} vs {}", rate(1), rate(0));
        for inst in &instances {
            assert_eq!(inst.features[BIASED_PROTECTED_FEATURE_INDEX], f64::from(inst.group));
        }
    }

    #[test]
    fn biased_stream_is_seed_deterministic() {
        assert_eq!(biased_stream(100, 5), biased_stream(100, 5));
    }
}
