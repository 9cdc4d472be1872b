//! Web usage mining toolkit: access-log ingestion, sessionization,
//! session-vector construction, four clustering algorithms (k-Means,
//! k-Medoids, Leader, DBSCAN), validity indices (SSE, Davies-Bouldin,
//! C-index) and a parameter-sweep harness.
//!
//! The numeric pipeline is generic over the scalar type via [`scalar::Real`];
//! the aliases below pin the common concrete choices.

pub mod clustering;
pub mod harness;
pub mod logingest;
pub mod scalar;
pub mod sessionize;
pub mod validity;
pub mod vectorspace;

pub use scalar::Real;

/// f64 session matrix, the default for the CLI pipeline.
pub type SessionMatrixF64 = vectorspace::SessionMatrix<f64>;
pub type SessionMatrixF32 = vectorspace::SessionMatrix<f32>;

pub type ClusterResultF64 = clustering::ClusterResult<f64>;
pub type ClusterResultF32 = clustering::ClusterResult<f32>;

pub type ValidityReportF64 = validity::ValidityReport<f64>;
pub type ValidityReportF32 = validity::ValidityReport<f32>;
