//! Fuzzy neighborhood graph via smooth kNN distances.
//!
//! Per node i: `rho_i` is the nearest-neighbor distance and `sigma_i` is
//! solved by binary search so that
//! `sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k)`.
//! Directed memberships are then symmetrized with the probabilistic t-conorm
//! `w = a + b - a*b`.

use crate::num::Real;

use super::knn::KnnGraph;

const SMOOTH_ITERS: usize = 64;
const SIGMA_FLOOR: f64 = 1e-3;
const TARGET_TOLERANCE: f64 = 1e-5;

/// Symmetric weighted neighborhood graph; weights in `(0, 1]`, no self loops.
#[derive(Debug, Clone)]
pub struct FuzzyGraph<T: Real> {
    n: usize,
    /// Symmetric adjacency: `adj[i]` sorted by neighbor index, and
    /// `(j, w) in adj[i]` iff `(i, w) in adj[j]`.
    adj: Vec<Vec<(usize, T)>>,
}

impl<T: Real> FuzzyGraph<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &[Vec<(usize, T)>] {
        &self.adj
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// BFS connectivity over the undirected structure.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Solve for `sigma` so the smoothed membership mass hits `target = log2(k)`.
/// Distances must be sorted ascending. Returns `(rho, sigma)`.
///
/// `rho` is the nearest distance under local connectivity 1: the first
/// non-zero entry, so exact duplicates keep weight 1 without flattening the
/// scale of every other neighbor.
pub fn smooth_knn_scale(distances: &[f64], target: f64) -> (f64, f64) {
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut mid = 1.0f64;
    for _ in 0..SMOOTH_ITERS {
        let mass: f64 = distances.iter().map(|&d| (-((d - rho).max(0.0)) / mid).exp()).sum();
        if (mass - target).abs() < TARGET_TOLERANCE {
            break;
        }
        if mass > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    (rho, mid.max(SIGMA_FLOOR))
}

/// Build the symmetric fuzzy graph from a kNN graph.
pub fn fuzzy_simplicial_set<T: Real>(graph: &KnnGraph<T>) -> FuzzyGraph<T> {
    let n = graph.n();
    // Directed memberships, computed in f64 for a stable sigma search.
    let mut directed: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for nb in &graph.neighbors {
        let dists: Vec<f64> = nb.iter().map(|&(_, d)| d.as_f64()).collect();
        let target = (nb.len().max(1) as f64).log2().max(f64::MIN_POSITIVE);
        let (rho, sigma) = smooth_knn_scale(&dists, target);
        directed.push(
            nb.iter()
                .zip(&dists)
                .map(|(&(j, _), &d)| (j, (-((d - rho).max(0.0)) / sigma).exp()))
                .collect(),
        );
    }

    // Symmetrize: w = a + b - a*b over the union of directed edges.
    let mut undirected: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); n];
    for (i, edges) in directed.iter().enumerate() {
        for &(j, w) in edges {
            debug_assert_ne!(i, j);
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let back = directed[j].iter().find(|&&(t, _)| t == i).map(|&(_, w)| w).unwrap_or(0.0);
            // combine once per unordered pair
            if i < j || back == 0.0 {
                let combined = w + back - w * back;
                undirected[a].insert(b, combined);
            }
        }
    }

    let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (i, edges) in undirected.iter().enumerate() {
        for (&j, &w) in edges {
            if w > 0.0 {
                let w = T::from_f64_lossy(w.min(1.0));
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
    }
    for a in &mut adj {
        a.sort_by_key(|&(j, _)| j);
    }
    FuzzyGraph { n, adj }
}
