//! Session-vector space: URL index, weight matrix construction and the
//! squared Euclidean distance shared by every clustering algorithm.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::sessionize::Session;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("input is empty")]
    EmptyInput,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("malformed matrix file: {0}")]
    MalformedMatrix(String),
}

/// Bijective map between URL strings and dense ids in `[0, n)`.
///
/// Ids are assigned in first-appearance order over the session stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UrlIndex {
    urls: Vec<String>,
    by_url: HashMap<String, usize>,
}

impl UrlIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, url: &str) -> usize {
        if let Some(&id) = self.by_url.get(url) {
            return id;
        }
        let id = self.urls.len();
        self.urls.push(url.to_string());
        self.by_url.insert(url.to_string(), id);
        id
    }

    pub fn id_of(&self, url: &str) -> Option<usize> {
        self.by_url.get(url).copied()
    }

    pub fn url_of(&self, id: usize) -> Option<&str> {
        self.urls.get(id).map(String::as_str)
    }

    pub fn urls(&self) -> &[String] {
        &self.urls
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }
}

/// Feature weighting applied when turning a session into a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    /// 1 if the URL occurs in the session, 0 otherwise.
    Binary,
    /// Occurrence count of the URL within the session.
    Frequency,
    /// Seconds spent on the URL (gap to the next hit; last hit gets the
    /// session-mean duration, 0 for single-hit sessions).
    Duration,
    /// Total bytes downloaded for the URL; absent byte counts are 0.
    Bytes,
}

impl WeightingMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binary" => Some(Self::Binary),
            "frequency" => Some(Self::Frequency),
            "duration" => Some(Self::Duration),
            "bytes" => Some(Self::Bytes),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Frequency => "frequency",
            Self::Duration => "duration",
            Self::Bytes => "bytes",
        }
    }
}

/// One row of the session matrix: length-n weight vector plus the id of the
/// session it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionVector<T> {
    pub session_id: usize,
    pub weights: Vec<T>,
}

/// Dense m×n matrix of session weight vectors sharing one [`UrlIndex`].
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMatrix<T> {
    rows: Vec<SessionVector<T>>,
    n: usize,
}

impl<T: Real> SessionMatrix<T> {
    /// Build a matrix from raw rows; session ids default to row indices.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, VectorError> {
        if rows.is_empty() {
            return Err(VectorError::EmptyInput);
        }
        let n = rows[0].len();
        for r in &rows {
            if r.len() != n {
                return Err(VectorError::DimensionMismatch { left: n, right: r.len() });
            }
        }
        Ok(Self {
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, weights)| SessionVector { session_id: i, weights })
                .collect(),
            n,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i].weights
    }

    pub fn session_id(&self, i: usize) -> usize {
        self.rows[i].session_id
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.rows.iter().map(|r| r.weights.as_slice())
    }

    /// Coordinate-wise mean of the rows selected by `indices`.
    pub fn mean_of(&self, indices: &[usize]) -> Vec<T> {
        let mut mean = vec![T::zero(); self.n];
        for &i in indices {
            for (m, &v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let count = T::from_usize_lossy(indices.len());
        if !indices.is_empty() {
            for m in mean.iter_mut() {
                *m = *m / count;
            }
        }
        mean
    }
}

/// Squared Euclidean distance `Σ_k (x_k − y_k)²` with dimension checking.
pub fn squared_euclidean<T: Real>(x: &[T], y: &[T]) -> Result<T, VectorError> {
    if x.len() != y.len() {
        return Err(VectorError::DimensionMismatch { left: x.len(), right: y.len() });
    }
    Ok(sqdist(x, y))
}

/// Unchecked squared Euclidean distance for matrix-internal loops where the
/// shared dimension is already guaranteed.
pub(crate) fn sqdist<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

/// Unsquared Euclidean distance, used by the validity indices.
pub(crate) fn dist<T: Real>(x: &[T], y: &[T]) -> T {
    sqdist(x, y).sqrt()
}

/// Build the m×n weight matrix and its URL index from a session store.
pub fn build_matrix<T: Real>(
    sessions: &[Session],
    mode: WeightingMode,
) -> Result<(SessionMatrix<T>, UrlIndex), VectorError> {
    if sessions.is_empty() {
        return Err(VectorError::EmptyInput);
    }
    let mut index = UrlIndex::new();
    for s in sessions {
        for h in &s.hits {
            index.intern(&h.url);
        }
    }
    let n = index.len();
    let rows = sessions
        .iter()
        .enumerate()
        .map(|(sid, s)| {
            let mut weights = vec![T::zero(); n];
            match mode {
                WeightingMode::Binary => {
                    for h in &s.hits {
                        weights[index.id_of(&h.url).unwrap()] = T::one();
                    }
                }
                WeightingMode::Frequency => {
                    for h in &s.hits {
                        weights[index.id_of(&h.url).unwrap()] += T::one();
                    }
                }
                WeightingMode::Duration => {
                    let durs = hit_durations(s);
                    for (h, d) in s.hits.iter().zip(durs) {
                        weights[index.id_of(&h.url).unwrap()] += T::from_f64_lossy(d);
                    }
                }
                WeightingMode::Bytes => {
                    for h in &s.hits {
                        weights[index.id_of(&h.url).unwrap()] +=
                            T::from_f64_lossy(h.bytes.unwrap_or(0) as f64);
                    }
                }
            }
            SessionVector { session_id: sid, weights }
        })
        .collect();
    Ok((SessionMatrix { rows, n }, index))
}

/// Per-hit dwell times in seconds. A hit's duration is the gap to the next
/// hit in the same session; the last hit is imputed as the mean of the other
/// hits' durations, 0 for single-hit sessions.
fn hit_durations(s: &Session) -> Vec<f64> {
    let k = s.hits.len();
    if k == 1 {
        return vec![0.0];
    }
    let mut durs = Vec::with_capacity(k);
    for w in s.hits.windows(2) {
        durs.push((w[1].ts - w[0].ts).num_milliseconds() as f64 / 1000.0);
    }
    let mean = durs.iter().sum::<f64>() / durs.len() as f64;
    durs.push(mean);
    durs
}

/// Write the matrix as CSV: header row of URL strings, one row per session.
pub fn write_matrix_csv<T: Real, W: Write>(
    matrix: &SessionMatrix<T>,
    index: &UrlIndex,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(index.urls())?;
    for row in matrix.rows() {
        w.write_record(row.iter().map(|v| v.as_f64().to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar JSON mapping matrix row index to session id.
pub fn write_row_map<T, W: Write>(
    matrix: &SessionMatrix<T>,
    out: W,
) -> Result<(), serde_json::Error> {
    let map: Vec<usize> = matrix.rows.iter().map(|r| r.session_id).collect();
    serde_json::to_writer(out, &map)
}

/// Read a matrix file written by [`write_matrix_csv`].
pub fn read_matrix_csv<T: Real, R: Read>(
    input: R,
) -> Result<(SessionMatrix<T>, UrlIndex), VectorError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut index = UrlIndex::new();
    let headers = rdr
        .headers()
        .map_err(|e| VectorError::MalformedMatrix(e.to_string()))?
        .clone();
    for url in headers.iter() {
        index.intern(url);
    }
    let n = index.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| VectorError::MalformedMatrix(e.to_string()))?;
        if rec.len() != n {
            return Err(VectorError::DimensionMismatch { left: n, right: rec.len() });
        }
        let weights = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map(T::from_f64_lossy)
                    .map_err(|e| VectorError::MalformedMatrix(format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()?;
        rows.push(SessionVector { session_id: i, weights });
    }
    if rows.is_empty() {
        return Err(VectorError::EmptyInput);
    }
    Ok((SessionMatrix { rows, n }, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sessionize::{Hit, Session, UserKey};
    use chrono::{TimeZone, Utc};

    fn session(urls: &[(&str, i64, Option<u64>)]) -> Session {
        let hits: Vec<Hit> = urls
            .iter()
            .map(|&(u, secs, bytes)| Hit {
                url: u.to_string(),
                ts: Utc.timestamp_opt(secs, 0).unwrap(),
                bytes,
            })
            .collect();
        Session {
            user: UserKey { client_ip: "10.0.0.1".into(), user_agent: None },
            start: hits.first().unwrap().ts,
            end: hits.last().unwrap().ts,
            hits,
        }
    }

    #[test]
    fn binary_mode_marks_presence() {
        let sessions = vec![
            session(&[("a", 0, None), ("b", 1, None), ("c", 2, None)]),
            session(&[("a", 0, None), ("c", 1, None)]),
        ];
        let (m, idx) = build_matrix::<f64>(&sessions, WeightingMode::Binary).unwrap();
        assert_eq!(idx.id_of("a"), Some(0));
        assert_eq!(idx.id_of("b"), Some(1));
        assert_eq!(idx.id_of("c"), Some(2));
        assert_eq!(m.row(1), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn frequency_mode_counts_occurrences() {
        let sessions = vec![session(&[("a", 0, None), ("a", 5, None), ("b", 9, None)])];
        let (m, _) = build_matrix::<f64>(&sessions, WeightingMode::Frequency).unwrap();
        assert_eq!(m.row(0), &[2.0, 1.0]);
    }

    #[test]
    fn duration_mode_imputes_last_hit_with_mean() {
        // a@0s, b@60s: a dwells 60s, b gets the mean fallback 60s.
        let sessions = vec![session(&[("a", 0, None), ("b", 60, None)])];
        let (m, _) = build_matrix::<f64>(&sessions, WeightingMode::Duration).unwrap();
        assert_eq!(m.row(0), &[60.0, 60.0]);
    }

    #[test]
    fn duration_mode_single_hit_is_zero() {
        let sessions = vec![session(&[("a", 0, None)])];
        let (m, _) = build_matrix::<f64>(&sessions, WeightingMode::Duration).unwrap();
        assert_eq!(m.row(0), &[0.0]);
    }

    #[test]
    fn bytes_mode_sums_bytes_absent_is_zero() {
        let sessions = vec![session(&[("a", 0, Some(100)), ("a", 5, Some(50)), ("b", 9, None)])];
        let (m, _) = build_matrix::<f64>(&sessions, WeightingMode::Bytes).unwrap();
        assert_eq!(m.row(0), &[150.0, 0.0]);
    }

    #[test]
    fn squared_euclidean_examples() {
        assert_eq!(squared_euclidean(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(squared_euclidean(&[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(squared_euclidean(&[2.0, 1.0], &[0.0, 0.0]).unwrap(), 5.0);
    }

    #[test]
    fn squared_euclidean_dimension_mismatch() {
        assert_eq!(
            squared_euclidean(&[1.0], &[1.0, 2.0]),
            Err(VectorError::DimensionMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(
            build_matrix::<f64>(&[], WeightingMode::Binary).unwrap_err(),
            VectorError::EmptyInput
        );
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let sessions = vec![
            session(&[("a", 0, Some(3)), ("b", 7, None)]),
            session(&[("b", 0, None), ("c", 2, Some(9))]),
        ];
        for mode in [
            WeightingMode::Binary,
            WeightingMode::Frequency,
            WeightingMode::Duration,
            WeightingMode::Bytes,
        ] {
            let (m1, i1) = build_matrix::<f64>(&sessions, mode).unwrap();
            let (m2, i2) = build_matrix::<f64>(&sessions, mode).unwrap();
            assert_eq!(m1, m2);
            assert_eq!(i1, i2);
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let sessions = vec![
            session(&[("/a", 0, None), ("/b", 1, None)]),
            session(&[("/b", 0, None)]),
        ];
        let (m, idx) = build_matrix::<f64>(&sessions, WeightingMode::Binary).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&m, &idx, &mut buf).unwrap();
        let (m2, idx2) = read_matrix_csv::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(idx, idx2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_and_zero_iff_equal(
                x in proptest::collection::vec(-100.0f64..100.0, 1..16),
                y in proptest::collection::vec(-100.0f64..100.0, 1..16),
            ) {
                let n = x.len().min(y.len());
                let (x, y) = (&x[..n], &y[..n]);
                let dxy = squared_euclidean(x, y).unwrap();
                let dyx = squared_euclidean(y, x).unwrap();
                prop_assert_eq!(dxy, dyx);
                if x == y {
                    prop_assert_eq!(dxy, 0.0);
                } else {
                    prop_assert!(dxy > 0.0);
                }
            }

            #[test]
            fn binary_distance_equals_hamming(
                x in proptest::collection::vec(0u8..2, 1..20),
                y in proptest::collection::vec(0u8..2, 1..20),
            ) {
                let n = x.len().min(y.len());
                let xf: Vec<f64> = x[..n].iter().map(|&v| v as f64).collect();
                let yf: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
                let hamming = x[..n].iter().zip(&y[..n]).filter(|(a, b)| a != b).count();
                prop_assert_eq!(squared_euclidean(&xf, &yf).unwrap(), hamming as f64);
            }
        }
    }
}
