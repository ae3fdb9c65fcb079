//! Exact k-nearest-neighbor search.
//!
//! Brute force is the reference path: every distance is computed, so recall
//! is 1.0 by construction. Queries parallelize over rows; per-row results do
//! not depend on evaluation order, so the output is deterministic.

use crate::num::{cosine_distance, euclidean, Real};
use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ManifoldError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn distance<T: Real>(self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => cosine_distance(a, b),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric \"{other}\"")),
        }
    }
}

/// Neighbor lists sorted ascending by distance, ties broken by lower index.
#[derive(Debug, Clone)]
pub struct KnnGraph<T: Real> {
    pub k: usize,
    pub metric: Metric,
    /// `neighbors[i]` holds `min(k, n-1)` entries `(node, distance)`.
    pub neighbors: Vec<Vec<(usize, T)>>,
}

impl<T: Real> KnnGraph<T> {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }
}

/// Exact kNN over the rows of `x`. `k >= n` is clamped to `n - 1` with a
/// warning; self-matches are excluded.
pub fn build_knn<T: Real>(x: ArrayView2<'_, T>, k: usize, metric: Metric) -> Result<KnnGraph<T>> {
    let n = x.nrows();
    if n < 2 {
        return Err(ManifoldError::TooFewPoints(n));
    }
    if k == 0 {
        return Err(ManifoldError::InvalidParam("k must be >= 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ManifoldError::NonFiniteInput);
    }
    let k = if k >= n {
        log::warn!("k={k} >= n={n}; clamping to {}", n - 1);
        n - 1
    } else {
        k
    };

    let rows: Vec<&[T]> = (0..n).map(|i| x.row(i).to_slice().expect("contiguous")).collect();
    let neighbors: Vec<Vec<(usize, T)>> = (0..n)
        .into_par_iter()
        .map(|i| k_nearest(&rows, i, k, metric))
        .collect();
    Ok(KnnGraph { k, metric, neighbors })
}

/// Neighbors of a single query row against a fixed set of rows (used by
/// out-of-sample transform, where the query is not part of the set).
pub fn k_nearest_external<T: Real>(
    rows: &[&[T]],
    query: &[T],
    k: usize,
    metric: Metric,
) -> Vec<(usize, T)> {
    let mut dists: Vec<(usize, T)> = rows
        .iter()
        .enumerate()
        .map(|(j, r)| (j, metric.distance(query, r)))
        .collect();
    sort_by_distance(&mut dists);
    dists.truncate(k.min(rows.len()));
    dists
}

fn k_nearest<T: Real>(rows: &[&[T]], i: usize, k: usize, metric: Metric) -> Vec<(usize, T)> {
    let mut dists: Vec<(usize, T)> = rows
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, r)| (j, metric.distance(rows[i], r)))
        .collect();
    sort_by_distance(&mut dists);
    dists.truncate(k);
    dists
}

fn sort_by_distance<T: Real>(dists: &mut [(usize, T)]) {
    dists.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances").then(a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn line_points_k1() {
        let x = array![[0.0f64], [1.0], [2.0], [10.0]];
        let g = build_knn(x.view(), 1, Metric::Euclidean).unwrap();
        assert_eq!(g.neighbors[0][0].0, 1);
        // node 1 is equidistant from 0 and 2; tie broken by lower index
        assert_eq!(g.neighbors[1][0].0, 0);
        assert_eq!(g.neighbors[2][0].0, 1);
        assert_eq!(g.neighbors[3][0].0, 2);
    }

    #[test]
    fn k_equals_n_minus_one_is_complete() {
        let x = array![[0.0f64, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let g = build_knn(x.view(), 3, Metric::Euclidean).unwrap();
        for nb in &g.neighbors {
            assert_eq!(nb.len(), 3);
        }
    }

    #[test]
    fn oversized_k_clamps() {
        let x = array![[0.0f64], [1.0], [2.0]];
        let g = build_knn(x.view(), 100, Metric::Euclidean).unwrap();
        assert_eq!(g.k, 2);
        assert!(g.neighbors.iter().all(|nb| nb.len() == 2));
    }

    #[test]
    fn duplicate_points_allowed_with_zero_distance() {
        let x = array![[1.0f64, 2.0], [1.0, 2.0], [5.0, 5.0]];
        let g = build_knn(x.view(), 1, Metric::Euclidean).unwrap();
        assert_eq!(g.neighbors[0][0], (1, 0.0));
        assert_eq!(g.neighbors[1][0], (0, 0.0));
    }

    #[test]
    fn cosine_metric_ranks_by_angle() {
        let x = array![[1.0f64, 0.0], [10.0, 0.1], [0.0, 1.0]];
        let g = build_knn(x.view(), 2, Metric::Cosine).unwrap();
        // row 1 is nearly collinear with row 0 despite the larger magnitude
        assert_eq!(g.neighbors[0][0].0, 1);
    }
}
