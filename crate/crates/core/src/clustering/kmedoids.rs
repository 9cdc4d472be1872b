//! Alternating k-Medoids over a pairwise distance table computed once.

use std::time::Instant;

use super::{
    check_k, sample_distinct_rows, Assignment, Centers, ClusterError, ClusterResult,
    KMedoidsParams,
};
use crate::scalar::Real;
use crate::vectorspace::{sqdist, SessionMatrix};

/// Full m×m table of squared distances, built once and reused every
/// iteration.
pub(crate) struct DistTable<T> {
    d: Vec<T>,
    m: usize,
}

impl<T: Real> DistTable<T> {
    pub(crate) fn build(x: &SessionMatrix<T>) -> Self {
        let m = x.m();
        let mut d = vec![T::zero(); m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let v = sqdist(x.row(i), x.row(j));
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        Self { d, m }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> T {
        self.d[i * self.m + j]
    }
}

/// Medoid of a cluster: the member minimizing the sum of squared distances
/// to the other members, ties to the lowest row index.
pub(crate) fn medoid_of<T: Real>(table: &DistTable<T>, members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_cost = T::infinity();
    for &cand in members {
        let cost: T = members.iter().map(|&o| table.get(cand, o)).sum();
        if cost < best_cost {
            best_cost = cost;
            best = cand;
        }
    }
    best
}

fn objective<T: Real>(table: &DistTable<T>, labels: &[usize], medoids: &[usize]) -> T {
    labels.iter().enumerate().map(|(i, &j)| table.get(i, medoids[j])).sum()
}

/// Run alternating k-Medoids: medoids start as k distinct random rows, each
/// point joins its nearest medoid (squared distance, ties to the lowest
/// cluster index), then each non-empty cluster's medoid is recomputed.
/// Termination mirrors k-Means.
pub fn kmedoids_run<T: Real>(
    x: &SessionMatrix<T>,
    p: &KMedoidsParams<T>,
) -> Result<ClusterResult<T>, ClusterError> {
    let start = Instant::now();
    check_k(p.k, x)?;
    let m = x.m();
    let table = DistTable::build(x);

    let mut medoids = sample_distinct_rows(m, p.k, p.seed);
    let mut labels: Vec<usize> = Vec::new();
    let mut j_prev: Option<T> = None;
    let mut j = T::zero();
    let mut j_history = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let new_labels: Vec<usize> = (0..m)
            .map(|i| {
                let mut best = 0;
                let mut best_d = T::infinity();
                for (c, &med) in medoids.iter().enumerate() {
                    let d = table.get(i, med);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect();
        if new_labels == labels {
            break;
        }
        labels = new_labels;

        let members = Assignment::from_cluster_indices(labels.clone()).members(p.k);
        for (c, mem) in members.iter().enumerate() {
            if !mem.is_empty() {
                medoids[c] = medoid_of(&table, mem);
            }
        }

        j = objective(&table, &labels, &medoids);
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
        centers: Centers::Medoids(medoids),
        objective_j: j,
        iterations,
        empty_cluster_count,
        noise_count: 0,
        elapsed: start.elapsed(),
        seed: p.seed,
        j_history,
    })
}
