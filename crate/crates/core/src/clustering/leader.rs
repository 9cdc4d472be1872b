//! Single-pass Leader clustering with a squared-distance threshold.

use std::time::Instant;

use super::{Assignment, Centers, ClusterError, ClusterResult, LeaderParams};
use crate::scalar::Real;
use crate::vectorspace::{sqdist, SessionMatrix};

/// Run Leader clustering: row 0 founds the first cluster; each subsequent
/// row joins its nearest existing leader when `d² < alpha` (ties to the
/// earliest leader), otherwise it becomes a new leader. Single pass, no
/// randomness. The reported objective is the sum of squared distances of
/// members to their leaders.
pub fn leader_run<T: Real>(
    x: &SessionMatrix<T>,
    p: &LeaderParams<T>,
) -> Result<ClusterResult<T>, ClusterError> {
    let start = Instant::now();
    let m = x.m();
    let mut leaders: Vec<usize> = vec![0];
    let mut labels: Vec<usize> = Vec::with_capacity(m);
    labels.push(0);
    let mut objective = T::zero();

    for i in 1..m {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (c, &l) in leaders.iter().enumerate() {
            let d = sqdist(x.row(i), x.row(l));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if best_d < p.alpha {
            labels.push(best);
            objective += best_d;
        } else {
            leaders.push(i);
            labels.push(leaders.len() - 1);
        }
    }

    let assignment = Assignment::from_cluster_indices(labels);
    Ok(ClusterResult {
        assignment,
        centers: Centers::Leaders(leaders),
        objective_j: objective,
        iterations: 1,
        empty_cluster_count: 0,
        noise_count: 0,
        elapsed: start.elapsed(),
        seed: 0,
        j_history: vec![objective],
    })
}
