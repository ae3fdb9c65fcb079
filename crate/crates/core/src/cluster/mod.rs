//! Community detection over the projected manifold.
//!
//! The neighbor graph of the layout is clustered with the Leiden algorithm
//! under resolution-parameterized modularity. Every returned community
//! induces a connected subgraph.

pub mod leiden;

pub use leiden::{leiden, leiden_with_trace};

use crate::manifold::fuzzy::{fuzzy_simplicial_set, FuzzyGraph};
use crate::manifold::knn::{build_knn, Metric};
use crate::manifold::ManifoldError;
use crate::num::Real;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("graph construction: {0}")]
    Manifold(#[from] ManifoldError),
    #[error("edge weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("self loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("node index {0} out of range for {1} nodes")]
    NodeOutOfRange(usize, usize),
    #[error("partition covers {got} nodes, graph has {expected}")]
    PartitionMismatch { got: usize, expected: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Undirected weighted graph: symmetric adjacency, positive weights, no
/// self loops.
#[derive(Debug, Clone)]
pub struct WeightedGraph<T: Real> {
    n: usize,
    adj: Vec<Vec<(usize, T)>>,
}

impl<T: Real> WeightedGraph<T> {
    /// Build from an undirected edge list; parallel edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        let mut maps: Vec<std::collections::BTreeMap<usize, T>> = vec![Default::default(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(ClusterError::NodeOutOfRange(u.max(v), n));
            }
            if u == v {
                return Err(ClusterError::SelfLoop(u));
            }
            if w <= T::zero() {
                return Err(ClusterError::NonPositiveWeight(w.as_f64()));
            }
            *maps[u].entry(v).or_insert_with(T::zero) += w;
            *maps[v].entry(u).or_insert_with(T::zero) += w;
        }
        let adj = maps.into_iter().map(|m| m.into_iter().collect()).collect();
        Ok(WeightedGraph { n, adj })
    }

    pub fn from_fuzzy(fuzzy: &FuzzyGraph<T>) -> Self {
        WeightedGraph { n: fuzzy.n(), adj: fuzzy.adjacency().to_vec() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &[Vec<(usize, T)>] {
        &self.adj
    }

    /// Sum of undirected edge weights W.
    pub fn total_weight(&self) -> f64 {
        self.adj.iter().flatten().map(|&(_, w)| w.as_f64()).sum::<f64>() / 2.0
    }

    /// Sum of weighted degrees 2W.
    pub fn two_m(&self) -> f64 {
        self.total_weight() * 2.0
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.adj[node].iter().map(|&(_, w)| w.as_f64()).sum()
    }

    /// Debug export: one `u<TAB>v<TAB>w` line per undirected edge.
    pub fn write_edge_list_tsv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, adj) in self.adj.iter().enumerate() {
            for &(v, weight) in adj {
                if u < v {
                    writeln!(w, "{u}\t{v}\t{weight}")?;
                }
            }
        }
        Ok(())
    }
}

/// Total assignment of nodes to dense community ids `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    community_of: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Construct from raw labels, renumbering them densely in order of
    /// first appearance.
    pub fn from_labels(labels: &[usize]) -> Partition {
        let mut remap: std::collections::HashMap<usize, usize> = Default::default();
        let mut community_of = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = remap.len();
            let id = *remap.entry(l).or_insert(next);
            community_of.push(id);
        }
        Partition { community_of, k: remap.len() }
    }

    pub fn n(&self) -> usize {
        self.community_of.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.community_of[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.community_of
    }

    /// Member lists per community, each sorted ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (node, &c) in self.community_of.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// Export as `id,community` CSV aligned with the supplied ids.
    pub fn write_csv<W: std::io::Write>(&self, ids: &[String], mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,community")?;
        for (id, &c) in ids.iter().zip(&self.community_of) {
            writeln!(w, "{id},{c}")?;
        }
        Ok(())
    }
}

/// Neighbor graph of the projected coordinates: exact kNN under the
/// Euclidean metric, smoothed and symmetrized into fuzzy weights.
pub fn graph_from_projection<T: Real>(
    u: ArrayView2<'_, T>,
    k_graph: usize,
) -> Result<WeightedGraph<T>> {
    let knn = build_knn(u, k_graph, Metric::Euclidean)?;
    let fuzzy = fuzzy_simplicial_set(&knn);
    Ok(WeightedGraph::from_fuzzy(&fuzzy))
}

/// Resolution-parameterized modularity:
/// `Q = sum_c [ w_in(c)/W - gamma * (w_tot(c) / 2W)^2 ]`.
pub fn modularity<T: Real>(graph: &WeightedGraph<T>, partition: &Partition, gamma: f64) -> f64 {
    assert_eq!(
        partition.n(),
        graph.n(),
        "partition must cover every node of the graph"
    );
    let w_total = graph.total_weight();
    if w_total <= 0.0 {
        return 0.0;
    }
    let mut w_in = vec![0.0f64; partition.k()];
    let mut w_tot = vec![0.0f64; partition.k()];
    for (u, adj) in graph.adjacency().iter().enumerate() {
        let cu = partition.community_of(u);
        for &(v, w) in adj {
            let w = w.as_f64();
            w_tot[cu] += w;
            if partition.community_of(v) == cu && u < v {
                w_in[cu] += w;
            }
        }
    }
    let two_w = 2.0 * w_total;
    w_in.iter()
        .zip(&w_tot)
        .map(|(&win, &wtot)| win / w_total - gamma * (wtot / two_w).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_triangles_with_bridge() -> WeightedGraph<f64> {
        // nodes 0..3 and 3..6, bridge 2-3
        let edges = [
            (0, 1, 1.0),
            (1, 2, 1.0),
            (0, 2, 1.0),
            (3, 4, 1.0),
            (4, 5, 1.0),
            (3, 5, 1.0),
            (2, 3, 1.0),
        ];
        WeightedGraph::from_edges(6, &edges).unwrap()
    }

    #[test]
    fn modularity_of_two_triangles() {
        let g = two_triangles_with_bridge();
        let p = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let q = modularity(&g, &p, 1.0);
        // per community: 3/7 - (7/14)^2, times two communities
        let expected = 2.0 * (3.0 / 7.0 - 0.25);
        assert!((q - expected).abs() < 1e-12, "q={q}");
        assert!((q - 0.3571).abs() < 1e-4);
    }

    #[test]
    fn single_community_q_is_one_minus_gamma() {
        let g = two_triangles_with_bridge();
        let p = Partition::from_labels(&[0; 6]);
        assert!((modularity(&g, &p, 1.0)).abs() < 1e-12);
        assert!((modularity(&g, &p, 1.5) - (1.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn edgeless_singletons_q_is_zero() {
        let g = WeightedGraph::<f64>::from_edges(4, &[]).unwrap();
        let p = Partition::from_labels(&[0, 1, 2, 3]);
        assert_eq!(modularity(&g, &p, 1.0), 0.0);
    }

    #[test]
    fn two_points_make_single_unit_edge() {
        let u = array![[0.0f64, 0.0], [1.0, 0.0]];
        let g = graph_from_projection(u.view(), 1).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.adjacency()[0].len(), 1);
        assert!((g.adjacency()[0][0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_blobs_have_no_cross_edges() {
        // two 10-point blobs separated by a huge gap
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push([i as f64 * 0.01, 0.0]);
        }
        for i in 0..10 {
            rows.push([1000.0 + i as f64 * 0.01, 0.0]);
        }
        let u = ndarray::Array2::from_shape_vec(
            (20, 2),
            rows.into_iter().flatten().collect(),
        )
        .unwrap();
        let g = graph_from_projection(u.view(), 5).unwrap();
        for (node, adj) in g.adjacency().iter().enumerate() {
            for &(other, _) in adj {
                assert_eq!(node < 10, other < 10, "edge {node}-{other} crosses blobs");
            }
        }
    }

    #[test]
    fn from_edges_rejects_self_loops_and_bad_weights() {
        assert!(matches!(
            WeightedGraph::from_edges(2, &[(0, 0, 1.0)]),
            Err(ClusterError::SelfLoop(0))
        ));
        assert!(matches!(
            WeightedGraph::from_edges(2, &[(0, 1, 0.0)]),
            Err(ClusterError::NonPositiveWeight(_))
        ));
    }

    #[test]
    fn partition_ids_are_dense_by_first_appearance() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.k(), 3);
    }
}
