//! The four clustering engines: k-Means, k-Medoids, Leader and DBSCAN.
//!
//! Each run consumes a [`SessionMatrix`] and produces a [`ClusterResult`].
//! All tie-breaking is lowest-index and every run is deterministic given its
//! inputs and seed.

mod dbscan;
mod kmeans;
mod kmedoids;
mod leader;

pub use dbscan::dbscan_run;
pub use kmeans::kmeans_run;
pub use kmedoids::kmedoids_run;
pub use leader::leader_run;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::vectorspace::{sqdist, SessionMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("invalid cluster count k={k} for m={m} points")]
    InvalidK { k: usize, m: usize },
}

/// Per-point cluster label. `Noise` only ever appears in DBSCAN output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(j) => Some(j),
            Label::Noise => None,
        }
    }

    pub fn is_noise(self) -> bool {
        self == Label::Noise
    }
}

/// Row-wise encoding of the binary membership matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<Label>,
}

impl Assignment {
    pub fn from_cluster_indices(labels: Vec<usize>) -> Self {
        Self { labels: labels.into_iter().map(Label::Cluster).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_noise()).count()
    }

    /// Member row indices per cluster, for clusters `0..k`.
    pub fn members(&self, k: usize) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); k];
        for (i, l) in self.labels.iter().enumerate() {
            if let Label::Cluster(j) = l {
                members[*j].push(i);
            }
        }
        members
    }

    pub fn empty_cluster_count(&self, k: usize) -> usize {
        self.members(k).iter().filter(|m| m.is_empty()).count()
    }
}

/// Cluster representatives, by algorithm.
#[derive(Debug, Clone, PartialEq)]
pub enum Centers<T> {
    /// k-Means: coordinate-wise mean vectors.
    Centroids(Vec<Vec<T>>),
    /// k-Medoids: matrix row indices.
    Medoids(Vec<usize>),
    /// Leader: matrix row indices in discovery order.
    Leaders(Vec<usize>),
    /// DBSCAN has no explicit representatives.
    None,
}

impl<T> Centers<T> {
    /// Number of clusters the centers imply, if any.
    pub fn k(&self) -> Option<usize> {
        match self {
            Centers::Centroids(v) => Some(v.len()),
            Centers::Medoids(v) | Centers::Leaders(v) => Some(v.len()),
            Centers::None => None,
        }
    }
}

/// Outcome of one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<T> {
    pub assignment: Assignment,
    pub centers: Centers<T>,
    pub objective_j: T,
    pub iterations: usize,
    pub empty_cluster_count: usize,
    pub noise_count: usize,
    pub elapsed: Duration,
    pub seed: u64,
    /// Objective value after each iteration; diagnostic.
    pub j_history: Vec<T>,
}

impl<T> ClusterResult<T> {
    /// Number of cluster slots (k for partitional algorithms, discovered
    /// count for Leader/DBSCAN).
    pub fn cluster_slots(&self) -> usize {
        self.centers.k().unwrap_or_else(|| {
            self.assignment
                .labels
                .iter()
                .filter_map(|l| l.cluster())
                .max()
                .map_or(0, |j| j + 1)
        })
    }

    /// Equality ignoring wall-clock time, for determinism checks.
    pub fn same_outcome(&self, other: &Self) -> bool
    where
        T: PartialEq,
    {
        self.assignment == other.assignment
            && self.centers == other.centers
            && self.objective_j == other.objective_j
            && self.iterations == other.iterations
            && self.empty_cluster_count == other.empty_cluster_count
            && self.noise_count == other.noise_count
            && self.seed == other.seed
            && self.j_history == other.j_history
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams<T> {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop when the objective changes by at most this much between
    /// iterations.
    pub j_epsilon: T,
    /// Replace an empty cluster's centroid with a random row instead of
    /// freezing it. Off by default so empty-cluster counts stay observable.
    pub reseed_empty: bool,
}

impl<T: Real> KMeansParams<T> {
    pub fn new(k: usize) -> Self {
        Self { k, max_iterations: 100, seed: 0, j_epsilon: T::zero(), reseed_empty: false }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsParams<T> {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub j_epsilon: T,
}

impl<T: Real> KMedoidsParams<T> {
    pub fn new(k: usize) -> Self {
        Self { k, max_iterations: 100, seed: 0, j_epsilon: T::zero() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Leader clustering threshold, applied to squared distance: a point joins
/// its nearest leader when `d² < alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderParams<T> {
    pub alpha: T,
}

/// DBSCAN parameters. `epsilon` is applied to squared distance: a point is
/// in the neighborhood when `d² ≤ epsilon`. `eta` is the minimum neighborhood
/// size (self included) for a core point.
#[derive(Debug, Clone, PartialEq)]
pub struct DbscanParams<T> {
    pub epsilon: T,
    pub eta: usize,
}

pub(crate) fn check_k<T>(k: usize, x: &SessionMatrix<T>) -> Result<(), ClusterError>
where
    T: Real,
{
    if k < 1 || k > x.m() {
        Err(ClusterError::InvalidK { k, m: x.m() })
    } else {
        Ok(())
    }
}

/// Sample `k` distinct row indices uniformly with a seeded RNG.
pub(crate) fn sample_distinct_rows(m: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, m, k).into_vec()
}

/// Index of the nearest center by squared distance, ties to the lowest index.
pub(crate) fn nearest<T: Real>(point: &[T], centers: impl Iterator<Item = impl AsRef<[T]>>) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (j, c) in centers.enumerate() {
        let d = sqdist(point, c.as_ref());
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Wire form of a [`ClusterResult`] for the result JSON files. Noise points
/// serialize with label -1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterResultJson {
    pub algo: String,
    pub labels: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centroids: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub medoids: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaders: Option<Vec<usize>>,
    pub objective_j: f64,
    pub iterations: usize,
    pub empty_clusters: usize,
    pub noise_count: usize,
    pub elapsed_ms: f64,
    pub seed: u64,
}

impl ClusterResultJson {
    pub fn from_result<T: Real>(algo: &str, r: &ClusterResult<T>) -> Self {
        let labels = r
            .assignment
            .labels
            .iter()
            .map(|l| l.cluster().map_or(-1, |j| j as i64))
            .collect();
        let (centroids, medoids, leaders) = match &r.centers {
            Centers::Centroids(v) => (
                Some(v.iter().map(|c| c.iter().map(|&w| w.as_f64()).collect()).collect()),
                None,
                None,
            ),
            Centers::Medoids(v) => (None, Some(v.clone()), None),
            Centers::Leaders(v) => (None, None, Some(v.clone())),
            Centers::None => (None, None, None),
        };
        Self {
            algo: algo.to_string(),
            labels,
            centroids,
            medoids,
            leaders,
            objective_j: r.objective_j.as_f64(),
            iterations: r.iterations,
            empty_clusters: r.empty_cluster_count,
            noise_count: r.noise_count,
            elapsed_ms: r.elapsed.as_secs_f64() * 1000.0,
            seed: r.seed,
        }
    }

    pub fn into_result<T: Real>(self) -> ClusterResult<T> {
        let labels = self
            .labels
            .iter()
            .map(|&l| if l < 0 { Label::Noise } else { Label::Cluster(l as usize) })
            .collect();
        let centers = if let Some(c) = self.centroids {
            Centers::Centroids(
                c.into_iter()
                    .map(|row| row.into_iter().map(T::from_f64_lossy).collect())
                    .collect(),
            )
        } else if let Some(m) = self.medoids {
            Centers::Medoids(m)
        } else if let Some(l) = self.leaders {
            Centers::Leaders(l)
        } else {
            Centers::None
        };
        ClusterResult {
            assignment: Assignment { labels },
            centers,
            objective_j: T::from_f64_lossy(self.objective_j),
            iterations: self.iterations,
            empty_cluster_count: self.empty_clusters,
            noise_count: self.noise_count,
            elapsed: Duration::from_secs_f64(self.elapsed_ms / 1000.0),
            seed: self.seed,
            j_history: Vec::new(),
        }
    }
}

/// Sum of squared distances from each point to its assigned center.
pub(crate) fn objective_to_centroids<T: Real>(
    x: &SessionMatrix<T>,
    labels: &[usize],
    centroids: &[Vec<T>],
) -> T {
    labels
        .iter()
        .enumerate()
        .map(|(i, &j)| sqdist(x.row(i), &centroids[j]))
        .sum()
}
