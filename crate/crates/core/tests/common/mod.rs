//! Shared test support: independent oracles and planted-data generators.
//!
//! Everything here stays deliberately naive (quadratic scans, exhaustive
//! enumeration) so it can serve as ground truth for the library paths it
//! checks.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use polfield::cluster::{Partition, WeightedGraph};
use polfield::corpus::{Regime, RegimeAssignment};
use polfield::embed::Embeddings;
use polfield::num::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Naive all-pairs kNN used as ground truth for the library's search.
pub fn brute_force_knn<T: Real>(
    x: ArrayView2<'_, T>,
    k: usize,
    dist: impl Fn(&[T], &[T]) -> T,
) -> Vec<Vec<(usize, T)>> {
    let n = x.nrows();
    let rows: Vec<Vec<T>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    (0..n)
        .map(|i| {
            let mut all: Vec<(usize, T)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, dist(&rows[i], &rows[j])))
                .collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k.min(n - 1));
            all
        })
        .collect()
}

/// Trustworthiness of a low-dimensional layout w.r.t. the original space,
/// computed from exact neighbor ranks in both spaces.
pub fn trustworthiness<T: Real>(
    high: ArrayView2<'_, T>,
    low: ArrayView2<'_, T>,
    k: usize,
) -> f64 {
    let n = high.nrows();
    assert!(n == low.nrows() && n > k);
    let euclid = |a: &[T], b: &[T]| polfield::num::euclidean(a, b);

    // rank of j among i's neighbors in the high-dimensional space (1-based)
    let high_nb = brute_force_knn(high, n - 1, euclid);
    let mut rank = vec![vec![0usize; n]; n];
    for (i, nbs) in high_nb.iter().enumerate() {
        for (pos, &(j, _)) in nbs.iter().enumerate() {
            rank[i][j] = pos + 1;
        }
    }

    let low_nb = brute_force_knn(low, k, euclid);
    let mut penalty = 0.0f64;
    for (i, nbs) in low_nb.iter().enumerate() {
        for &(j, _) in nbs {
            let r = rank[i][j];
            if r > k {
                penalty += (r - k) as f64;
            }
        }
    }
    let n = n as f64;
    let k = k as f64;
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ka = a.iter().max().map(|&m| m + 1).unwrap_or(0);
    let kb = b.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_cols: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = choose2(a.len() as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}

/// Exhaustive search for the maximum-modularity partition: enumerates every
/// set partition of the nodes via restricted growth strings. Usable up to
/// ~12 nodes.
pub fn best_partition_exhaustive<T: Real>(
    graph: &WeightedGraph<T>,
    gamma: f64,
) -> (Vec<usize>, f64) {
    let n = graph.n();
    assert!(n <= 12, "exhaustive search is factorial; keep n small");
    let mut labels = vec![0usize; n];
    let mut best = (vec![0usize; n], f64::NEG_INFINITY);
    enumerate_partitions(graph, gamma, &mut labels, 1, 1, &mut best);
    best
}

fn enumerate_partitions<T: Real>(
    graph: &WeightedGraph<T>,
    gamma: f64,
    labels: &mut Vec<usize>,
    pos: usize,
    max_label: usize,
    best: &mut (Vec<usize>, f64),
) {
    if pos == labels.len() {
        let partition = Partition::from_labels(labels);
        let q = polfield::cluster::modularity(graph, &partition, gamma);
        if q > best.1 {
            *best = (labels.clone(), q);
        }
        return;
    }
    for label in 0..=max_label {
        labels[pos] = label;
        let next_max = max_label.max(label + 1);
        enumerate_partitions(graph, gamma, labels, pos + 1, next_max, best);
    }
    labels[pos] = 0;
}

/// Planted-partition random graph: `blocks x per_block` nodes, edge
/// probability `p_in` within a block and `p_out` across blocks.
pub fn planted_partition_graph(
    blocks: usize,
    per_block: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (WeightedGraph<f64>, Vec<usize>) {
    let n = blocks * per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i / per_block).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    (WeightedGraph::from_edges(n, &edges).unwrap(), labels)
}

/// How per-topic regime-B offsets are planted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffsetKind {
    /// One shared direction for every topic (aligned field).
    Shared,
    /// Independent random direction per topic (multidimensional field).
    Independent,
}

/// A synthetic corpus planted directly in embedding space: Gaussian topic
/// blobs whose regime-B halves are displaced by offsets of a fixed norm.
pub struct PlantedCorpus {
    pub embeddings: Embeddings<f32>,
    pub topic_of: Vec<usize>,
    pub partition: Partition,
    pub assignment: RegimeAssignment,
    pub ids: Vec<String>,
    pub offsets: Vec<Vec<f64>>,
}

pub struct PlantedSpec {
    pub n: usize,
    pub m: usize,
    pub topics: usize,
    pub offset_norm: f64,
    pub sigma: f64,
    pub center_separation: f64,
    pub offsets: OffsetKind,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n: 500,
            m: 64,
            topics: 5,
            offset_norm: 2.0,
            sigma: 0.3,
            center_separation: 10.0,
            offsets: OffsetKind::Independent,
        }
    }
}

pub fn planted_corpus(spec: &PlantedSpec, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assert!(spec.topics <= spec.m, "need one axis per topic center");
    let per_topic = spec.n / spec.topics;
    assert!(per_topic >= 2, "each topic needs at least one doc per regime");

    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..spec.m).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let shared = unit(&mut rng);
    let offsets: Vec<Vec<f64>> = (0..spec.topics)
        .map(|_| {
            let dir = match spec.offsets {
                OffsetKind::Shared => shared.clone(),
                OffsetKind::Independent => unit(&mut rng),
            };
            dir.into_iter().map(|x| x * spec.offset_norm).collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(spec.n * spec.m);
    let mut topic_of = Vec::with_capacity(spec.n);
    let mut regimes = Vec::with_capacity(spec.n);
    for topic in 0..spec.topics {
        for i in 0..per_topic {
            let regime = if i % 2 == 0 { Regime::A } else { Regime::B };
            for dim in 0..spec.m {
                let center = if dim == topic { spec.center_separation } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                let shift = if regime == Regime::B { offsets[topic][dim] } else { 0.0 };
                rows.push((center + shift + noise * spec.sigma) as f32);
            }
            topic_of.push(topic);
            regimes.push(regime);
        }
    }
    let n_actual = topic_of.len();
    let ids: Vec<String> = (0..n_actual).map(|i| format!("doc{i:04}")).collect();
    let matrix = Array2::from_shape_vec((n_actual, spec.m), rows).unwrap();
    let embeddings = Embeddings::new(matrix, ids.clone(), "planted".into()).unwrap();
    let partition = Partition::from_labels(&topic_of);
    let assignment =
        RegimeAssignment::new(ids.clone(), regimes, "planted boundary".into()).unwrap();
    PlantedCorpus { embeddings, topic_of, partition, assignment, ids, offsets }
}

/// Isotropic Gaussian blobs with centers `separation * sigma` apart along
/// distinct axes.
pub fn gaussian_blobs(
    n: usize,
    m: usize,
    blobs: usize,
    sigma: f64,
    separation_in_sigmas: f64,
    seed: u64,
) -> (Array2<f32>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assert!(blobs <= m);
    let sep = separation_in_sigmas * sigma;
    let mut rows = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let blob = i % blobs;
        for dim in 0..m {
            let center = if dim == blob { sep } else { 0.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            rows.push((center + noise * sigma) as f32);
        }
        labels.push(blob);
    }
    (Array2::from_shape_vec((n, m), rows).unwrap(), labels)
}

pub fn embeddings_from_matrix(x: Array2<f32>, tag: &str) -> Embeddings<f32> {
    let ids = (0..x.nrows()).map(|i| format!("d{i}")).collect();
    Embeddings::new(x, ids, tag.into()).unwrap()
}

/// Blobs with intrinsic 2-D structure: each blob is a jittered
/// `side x side` grid living in the first two dimensions, centered on its
/// own axis. Unlike isotropic high-dimensional Gaussians (whose pairwise
/// distances all concentrate at sigma*sqrt(2m), leaving no local geometry),
/// these have genuine neighborhoods for a manifold method to preserve.
pub fn structured_blobs(
    side: usize,
    m: usize,
    blobs: usize,
    spacing: f64,
    noise: f64,
    separation: f64,
    seed: u64,
) -> (Array2<f32>, Vec<usize>) {
    assert!(blobs + 2 <= m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blobs * side * side;
    let mut rows = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for blob in 0..blobs {
        for gy in 0..side {
            for gx in 0..side {
                for dim in 0..m {
                    let base = match dim {
                        0 => gx as f64 * spacing,
                        1 => gy as f64 * spacing,
                        d if d == 2 + blob => separation,
                        _ => 0.0,
                    };
                    let jitter: f64 = StandardNormal.sample(&mut rng);
                    rows.push((base + jitter * noise) as f32);
                }
                labels.push(blob);
            }
        }
    }
    (Array2::from_shape_vec((n, m), rows).unwrap(), labels)
}
