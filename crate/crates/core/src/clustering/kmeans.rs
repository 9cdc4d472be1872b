//! Lloyd-style k-Means with seeded random initialization.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_k, nearest, objective_to_centroids, sample_distinct_rows, Assignment, Centers,
    ClusterError, ClusterResult, KMeansParams,
};
use crate::scalar::Real;
use crate::vectorspace::SessionMatrix;

/// Run k-Means: centroids start as k distinct random rows, then alternate
/// nearest-center assignment (ties to the lowest cluster index) and mean
/// updates until assignments stop changing, the objective change drops to
/// `j_epsilon`, or `max_iterations` is hit. Empty clusters keep their
/// previous centroid unless `reseed_empty` is set.
pub fn kmeans_run<T: Real>(
    x: &SessionMatrix<T>,
    p: &KMeansParams<T>,
) -> Result<ClusterResult<T>, ClusterError> {
    let start = Instant::now();
    check_k(p.k, x)?;
    let m = x.m();

    let mut centroids: Vec<Vec<T>> = sample_distinct_rows(m, p.k, p.seed)
        .into_iter()
        .map(|i| x.row(i).to_vec())
        .collect();
    // Dedicated stream for reseeding so it cannot perturb initialization.
    let mut reseed_rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_add(1));

    let mut labels: Vec<usize> = Vec::new();
    let mut j_prev: Option<T> = None;
    let mut j = T::zero();
    let mut j_history = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let new_labels: Vec<usize> =
            (0..m).map(|i| nearest(x.row(i), centroids.iter())).collect();
        if new_labels == labels {
            break;
        }
        labels = new_labels;

        let members = Assignment::from_cluster_indices(labels.clone()).members(p.k);
        for (j_idx, mem) in members.iter().enumerate() {
            if mem.is_empty() {
                if p.reseed_empty {
                    let row = reseed_rng.gen_range(0..m);
                    centroids[j_idx] = x.row(row).to_vec();
                }
            } else {
                centroids[j_idx] = x.mean_of(mem);
            }
        }

        j = objective_to_centroids(x, &labels, &centroids);
        j_history.push(j);
        let converged_j = j_prev.map_or(false, |prev| (prev - j).abs() <= p.j_epsilon);
        j_prev = Some(j);
        if converged_j || iterations >= p.max_iterations {
            break;
        }
    }

    let assignment = Assignment::from_cluster_indices(labels);
    let empty_cluster_count = assignment.empty_cluster_count(p.k);
    Ok(ClusterResult {
        assignment,
        centers: Centers::Centroids(centroids),
        objective_j: j,
        iterations,
        empty_cluster_count,
        noise_count: 0,
        elapsed: start.elapsed(),
        seed: p.seed,
        j_history,
    })
}
