//! DBSCAN with a squared-distance neighborhood threshold.

use std::collections::VecDeque;
use std::time::Instant;

use super::{Assignment, Centers, ClusterError, ClusterResult, DbscanParams, Label};
use crate::scalar::Real;
use crate::vectorspace::{sqdist, SessionMatrix};

/// Run DBSCAN: a point is core when its neighborhood (`d² ≤ epsilon`, self
/// included) holds at least `eta` points; clusters are maximal
/// density-connected sets, expanded in deterministic row order so border
/// points join the first cluster that reaches them. Unreached points are
/// noise. The reported objective is the sum of squared distances of
/// clustered points to their cluster's coordinate-wise mean.
pub fn dbscan_run<T: Real>(
    x: &SessionMatrix<T>,
    p: &DbscanParams<T>,
) -> Result<ClusterResult<T>, ClusterError> {
    let start = Instant::now();
    let m = x.m();

    let neighborhoods: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| sqdist(x.row(i), x.row(j)) <= p.epsilon)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighborhoods.iter().map(|n| n.len() >= p.eta).collect();

    let mut labels = vec![Label::Noise; m];
    let mut cluster_count = 0;
    for seed_point in 0..m {
        if !core[seed_point] || labels[seed_point] != Label::Noise {
            continue;
        }
        let cluster = cluster_count;
        cluster_count += 1;
        labels[seed_point] = Label::Cluster(cluster);
        let mut queue = VecDeque::from([seed_point]);
        while let Some(q) = queue.pop_front() {
            for &r in &neighborhoods[q] {
                if labels[r] == Label::Noise {
                    labels[r] = Label::Cluster(cluster);
                    if core[r] {
                        queue.push_back(r);
                    }
                }
            }
        }
    }

    let assignment = Assignment { labels };
    let noise_count = assignment.noise_count();
    let members = assignment.members(cluster_count);
    let mut objective = T::zero();
    for mem in &members {
        let mean = x.mean_of(mem);
        for &i in mem {
            objective += sqdist(x.row(i), &mean);
        }
    }

    Ok(ClusterResult {
        assignment,
        centers: Centers::None,
        objective_j: objective,
        iterations: 1,
        empty_cluster_count: 0,
        noise_count,
        elapsed: start.elapsed(),
        seed: 0,
        j_history: vec![objective],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> SessionMatrix<f64> {
        SessionMatrix::from_rows(values.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn derived_three_group_example() {
        // ε on d²: 0.25, η = 2 → clusters {0,1,2}, {3,4}; point 5 is noise.
        let x = one_d(&[0.0, 0.1, 0.2, 10.0, 10.1, 50.0]);
        let r = dbscan_run(&x, &DbscanParams { epsilon: 0.25, eta: 2 }).unwrap();
        assert_eq!(
            r.assignment.labels,
            vec![
                Label::Cluster(0),
                Label::Cluster(0),
                Label::Cluster(0),
                Label::Cluster(1),
                Label::Cluster(1),
                Label::Noise
            ]
        );
        assert_eq!(r.noise_count, 1);
        assert_eq!(r.cluster_slots(), 2);
    }

    #[test]
    fn eta_above_m_is_all_noise() {
        let x = one_d(&[0.0, 0.1, 0.2]);
        let r = dbscan_run(&x, &DbscanParams { epsilon: 100.0, eta: 4 }).unwrap();
        assert_eq!(r.noise_count, 3);
        assert_eq!(r.cluster_slots(), 0);
        assert_eq!(r.objective_j, 0.0);
    }

    #[test]
    fn identical_points_form_one_cluster_without_noise() {
        let x = one_d(&[2.0, 2.0, 2.0, 2.0]);
        let r = dbscan_run(&x, &DbscanParams { epsilon: 0.0, eta: 4 }).unwrap();
        assert_eq!(r.noise_count, 0);
        assert_eq!(r.cluster_slots(), 1);
    }

    #[test]
    fn objective_is_sum_to_cluster_means() {
        let x = one_d(&[0.0, 1.0, 10.0, 11.0]);
        let r = dbscan_run(&x, &DbscanParams { epsilon: 1.0, eta: 2 }).unwrap();
        // clusters {0,1} mean 0.5 and {2,3} mean 10.5: J = 4 * 0.25
        assert_eq!(r.objective_j, 1.0);
    }

    #[test]
    fn determinism() {
        let x = one_d(&[0.0, 0.3, 0.6, 4.0, 4.2, 9.0]);
        let p = DbscanParams { epsilon: 0.5, eta: 2 };
        assert!(dbscan_run(&x, &p).unwrap().same_outcome(&dbscan_run(&x, &p).unwrap()));
    }
}
