//! Cluster validity scoring: SSE, Davies-Bouldin index and C-index.
//!
//! Clustering objectives use squared distance; DB and C-index run on
//! unsquared Euclidean distance. Noise points are excluded from all scores.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{Centers, ClusterResult};
use crate::scalar::Real;
use crate::vectorspace::{dist, sqdist, SessionMatrix};

/// How a cluster's diameter is measured for the DB index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterMode {
    /// Mean unsquared distance of members to the cluster centroid.
    #[default]
    MeanToCentroid,
    /// Maximum pairwise member distance.
    MaxPairwise,
}

/// Scores for one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport<T> {
    pub sse: T,
    pub db_index: Option<T>,
    pub c_index: Option<T>,
    /// Non-empty clusters only.
    pub cluster_count: usize,
    pub noise_count: usize,
    pub elapsed: Duration,
}

/// Sum of squared distances of clustered points to their cluster's center:
/// centroid, medoid row or leader row per the algorithm, and the per-cluster
/// coordinate-wise mean when no centers exist (DBSCAN). Noise is excluded.
pub fn sse<T: Real>(x: &SessionMatrix<T>, r: &ClusterResult<T>) -> T {
    let slots = r.cluster_slots();
    let members = r.assignment.members(slots);
    let mut total = T::zero();
    match &r.centers {
        Centers::Centroids(centroids) => {
            for (c, mem) in members.iter().enumerate() {
                for &i in mem {
                    total += sqdist(x.row(i), &centroids[c]);
                }
            }
        }
        Centers::Medoids(rows) | Centers::Leaders(rows) => {
            for (c, mem) in members.iter().enumerate() {
                for &i in mem {
                    total += sqdist(x.row(i), x.row(rows[c]));
                }
            }
        }
        Centers::None => {
            for mem in &members {
                let mean = x.mean_of(mem);
                for &i in mem {
                    total += sqdist(x.row(i), &mean);
                }
            }
        }
    }
    total
}

/// Non-empty clusters as member lists, noise excluded.
fn non_empty_members<T: Real>(r: &ClusterResult<T>) -> Vec<Vec<usize>> {
    r.assignment
        .members(r.cluster_slots())
        .into_iter()
        .filter(|m| !m.is_empty())
        .collect()
}

/// Davies-Bouldin index over non-empty clusters. `None` when fewer than two
/// clusters exist or a required pair of centroids coincides.
pub fn davies_bouldin<T: Real>(
    x: &SessionMatrix<T>,
    r: &ClusterResult<T>,
    mode: DiameterMode,
) -> Option<T> {
    let clusters = non_empty_members(r);
    let k = clusters.len();
    if k < 2 {
        return None;
    }
    let centroids: Vec<Vec<T>> = clusters.iter().map(|m| x.mean_of(m)).collect();
    let diams: Vec<T> = clusters
        .iter()
        .zip(&centroids)
        .map(|(mem, c)| match mode {
            DiameterMode::MeanToCentroid => {
                let sum: T = mem.iter().map(|&i| dist(x.row(i), c)).sum();
                sum / T::from_usize_lossy(mem.len())
            }
            DiameterMode::MaxPairwise => {
                let mut max = T::zero();
                for (a, &i) in mem.iter().enumerate() {
                    for &j in &mem[a + 1..] {
                        max = max.max(dist(x.row(i), x.row(j)));
                    }
                }
                max
            }
        })
        .collect();

    let mut total = T::zero();
    for i in 0..k {
        let mut worst = T::neg_infinity();
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist(&centroids[i], &centroids[j]);
            if sep == T::zero() {
                return None;
            }
            worst = worst.max((diams[i] + diams[j]) / sep);
        }
        total += worst;
    }
    Some(total / T::from_usize_lossy(k))
}

/// C-index on unsquared distances over clustered points. `None` when no
/// within-cluster pair exists; 0 when all pairwise distances are equal.
pub fn c_index<T: Real>(x: &SessionMatrix<T>, r: &ClusterResult<T>) -> Option<T> {
    let clusters = non_empty_members(r);
    let clustered: Vec<usize> = clusters.iter().flatten().copied().collect();
    let mut cluster_of = vec![usize::MAX; x.m()];
    for (c, mem) in clusters.iter().enumerate() {
        for &i in mem {
            cluster_of[i] = c;
        }
    }

    let mut s = T::zero();
    let mut within_pairs = 0usize;
    let mut all: Vec<T> = Vec::new();
    for (a, &i) in clustered.iter().enumerate() {
        for &j in &clustered[a + 1..] {
            let d = dist(x.row(i), x.row(j));
            all.push(d);
            if cluster_of[i] == cluster_of[j] {
                s += d;
                within_pairs += 1;
            }
        }
    }
    if within_pairs == 0 {
        return None;
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let s_min: T = all[..within_pairs].iter().copied().sum();
    let s_max: T = all[all.len() - within_pairs..].iter().copied().sum();
    if s_max == s_min {
        return Some(T::zero());
    }
    // rounding can push the ratio a hair outside [0,1] near degeneracy
    Some(((s - s_min) / (s_max - s_min)).max(T::zero()).min(T::one()))
}

/// Score a run with all three indices, timing the evaluation.
pub fn score<T: Real>(
    x: &SessionMatrix<T>,
    r: &ClusterResult<T>,
    mode: DiameterMode,
) -> ValidityReport<T> {
    let start = Instant::now();
    let sse_v = sse(x, r);
    let db = davies_bouldin(x, r, mode);
    let ci = c_index(x, r);
    ValidityReport {
        sse: sse_v,
        db_index: db,
        c_index: ci,
        cluster_count: non_empty_members(r).len(),
        noise_count: r.assignment.noise_count(),
        elapsed: start.elapsed(),
    }
}

/// Wire form of a [`ValidityReport`]; undefined indices serialize as null.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityReportJson {
    pub sse: f64,
    pub db_index: Option<f64>,
    pub c_index: Option<f64>,
    pub clusters: usize,
    pub noise: usize,
    pub elapsed_ms: f64,
    /// Distance/diameter conventions used, for report provenance.
    pub metadata: ValidityMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityMetadata {
    pub index_distance: String,
    pub diameter: DiameterMode,
}

impl ValidityReportJson {
    pub fn from_report<T: Real>(r: &ValidityReport<T>, mode: DiameterMode) -> Self {
        Self {
            sse: r.sse.as_f64(),
            db_index: r.db_index.map(Real::as_f64),
            c_index: r.c_index.map(Real::as_f64),
            clusters: r.cluster_count,
            noise: r.noise_count,
            elapsed_ms: r.elapsed.as_secs_f64() * 1000.0,
            metadata: ValidityMetadata {
                index_distance: "euclidean_unsquared".to_string(),
                diameter: mode,
            },
        }
    }
}
