//! Protected-attribute-flip drift stream: the base stream followed by a
//! group-flipped copy ordered by realism (distance to k-means centers of the
//! base data) and truncated to the requested fraction.

use crate::data::kmeans::{k_means, nearest_center, squared_distance};
use crate::data::StreamEvent;
use crate::error::{FeamoeError, Result};
use crate::loss::StreamInstance;

const REALISM_CLUSTERS: usize = 10;
const REALISM_KMEANS_ITERATIONS: usize = 50;

/// Flip one instance's group bit, and its group feature slot when present.
pub fn flip_group(instance: &StreamInstance, protected_feature_index: Option<usize>) -> StreamInstance {
    let mut flipped = instance.clone();
    flipped.group = 1 - flipped.group;
    if let Some(idx) = protected_feature_index {
        flipped.features[idx] = 1.0 - flipped.features[idx];
    }
    flipped
}

/// Emit `base`, a segment boundary, then the most realistic
/// `realism_sort_fraction` of its group-flipped copy, nearest-to-center
/// first, and a final boundary.
pub fn attribute_flip_stream(
    base: &[StreamInstance],
    realism_sort_fraction: f64,
    seed: u64,
    protected_feature_index: Option<usize>,
) -> Result<Vec<StreamEvent>> {
    if !(realism_sort_fraction > 0.0 && realism_sort_fraction <= 1.0) {
        return Err(FeamoeError::InvalidConfig(format!(
            "realism sort fraction must be in (0, 1], got {realism_sort_fraction}"
        )));
    }
    if let Some(idx) = protected_feature_index {
        if let Some(inst) = base.first() {
            if idx >= inst.features.len() {
                return Err(FeamoeError::DimensionMismatch { expected: inst.features.len(), got: idx });
            }
        }
    }

    let base_points: Vec<Vec<f64>> = base.iter().map(|i| i.features.clone()).collect();
    let centers = k_means(&base_points, REALISM_CLUSTERS, REALISM_KMEANS_ITERATIONS, seed);

    let mut ranked: Vec<(f64, usize, StreamInstance)> = base
        .iter()
        .enumerate()
        .map(|(idx, inst)| {
            let flipped = flip_group(inst, protected_feature_index);
            let distance = if centers.is_empty() {
                0.0
            } else {
                let c = nearest_center(&flipped.features, &centers);
                squared_distance(&flipped.features, &centers[c]).sqrt()
            };
            (distance, idx, flipped)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let keep = ((realism_sort_fraction * base.len() as f64).round() as usize).min(base.len());

    let mut events: Vec<StreamEvent> =
        base.iter().cloned().map(StreamEvent::Instance).collect();
    events.push(StreamEvent::SegmentBoundary { index: 0 });
    events.extend(ranked.into_iter().take(keep).map(|(_, _, inst)| StreamEvent::Instance(inst)));
    events.push(StreamEvent::SegmentBoundary { index: 1 });
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::biased_stream;

    #[test]
    fn flipping_twice_restores_groups() {
        let base = biased_stream(40, 1);
        for inst in &base {
            let twice = flip_group(&flip_group(inst, Some(2)), Some(2));
            assert_eq!(&twice, inst);
        }
    }

    #[test]
    fn non_group_fields_are_preserved() {
        let base = biased_stream(40, 2);
        for inst in &base {
            let flipped = flip_group(inst, Some(2));
            assert_eq!(flipped.label, inst.label);
            assert_eq!(flipped.features[0], inst.features[0]);
            assert_eq!(flipped.features[1], inst.features[1]);
            assert_eq!(flipped.group, 1 - inst.group);
            assert_eq!(flipped.features[2], 1.0 - inst.features[2]);
        }
    }

    #[test]
    fn full_fraction_keeps_every_flipped_instance() {
        let base = biased_stream(60, 3);
        let events = attribute_flip_stream(&base, 1.0, 3, Some(2)).unwrap();
        let instances = events.iter().filter(|e| e.instance().is_some()).count();
        assert_eq!(instances, 120);
        assert_eq!(events.len(), 122);
    }

    #[test]
    fn fraction_selects_nearest_to_assigned_centers() {
        let base = biased_stream(100, 4);
        let events = attribute_flip_stream(&base, 0.1, 4, Some(2)).unwrap();
        let flipped_kept: Vec<&StreamInstance> = events
            .iter()
            .skip(101) // base plus first boundary
            .filter_map(StreamEvent::instance)
            .collect();
        assert_eq!(flipped_kept.len(), 10);

        // Brute-force oracle: rank all flipped copies by distance to their
        // nearest base-data center and keep the 10 smallest.
        let base_points: Vec<Vec<f64>> = base.iter().map(|i| i.features.clone()).collect();
        let centers = k_means(&base_points, 10, 50, 4);
        let mut distances: Vec<(f64, usize)> = base
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let flipped = flip_group(inst, Some(2));
                let c = nearest_center(&flipped.features, &centers);
                (squared_distance(&flipped.features, &centers[c]).sqrt(), i)
            })
            .collect();
        distances.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<StreamInstance> =
            distances[..10].iter().map(|&(_, i)| flip_group(&base[i], Some(2))).collect();
        for (got, want) in flipped_kept.iter().zip(&expected) {
            assert_eq!(*got, want);
        }
    }

    #[test]
    fn invalid_fraction_is_rejected() {
        let base = biased_stream(10, 5);
        assert!(attribute_flip_stream(&base, 0.0, 5, None).is_err());
        assert!(attribute_flip_stream(&base, 1.5, 5, None).is_err());
    }
}
