//! Plain Lloyd k-means, used to rank synthetic drift points by realism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster centers after `iterations` Lloyd steps (or earlier convergence),
/// initialized by sampling distinct points. With fewer points than k every
/// point becomes a center.
pub fn k_means(points: &[Vec<f64>], k: usize, iterations: usize, seed: u64) -> Vec<Vec<f64>> {
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let k = k.min(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut indices: Vec<usize> = (0..points.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut centers: Vec<Vec<f64>> = indices[..k].iter().map(|&i| points[i].clone()).collect();

    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..iterations {
        let mut changed = false;
        for (p, slot) in points.iter().zip(assignment.iter_mut()) {
            let nearest = nearest_center(p, &centers);
            if nearest != *slot {
                *slot = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; points[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            if count > 0 {
                centers[c] = sum.into_iter().map(|v| v / count as f64).collect();
            }
            // Empty clusters keep their previous center.
        }
    }
    centers
}

/// Index of the nearest center; ties resolve to the lowest index.
pub fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_cluster_converges_to_mean() {
        let points = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 2.0]];
        let centers = k_means(&points, 1, 50, 0);
        assert_eq!(centers.len(), 1);
        assert_abs_diff_eq!(centers[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(centers[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn separated_blobs_are_found() {
        let mut points = Vec::new();
        for i in 0..20 {
            let jitter = (i % 5) as f64 * 0.01;
            points.push(vec![10.0 + jitter, 0.0]);
            points.push(vec![-10.0 - jitter, 0.0]);
        }
        let mut centers = k_means(&points, 2, 50, 7);
        centers.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!(centers[0][0] < -9.0);
        assert!(centers[1][0] > 9.0);
    }

    #[test]
    fn fewer_points_than_k() {
        let points = vec![vec![1.0], vec![2.0]];
        let centers = k_means(&points, 10, 50, 3);
        assert_eq!(centers.len(), 2);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let points: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
        assert_eq!(k_means(&points, 3, 50, 11), k_means(&points, 3, 50, 11));
    }
}
