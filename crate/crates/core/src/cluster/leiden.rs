//! Leiden community detection.
//!
//! Three phases per level: greedy local moving, randomized refinement under
//! the well-connectedness constraint, then aggregation of the refined
//! partition. Local moves only accept strictly positive modularity gains, so
//! the flat modularity trace is non-decreasing across levels. Refinement
//! merges nodes only into sub-communities they are connected to, which keeps
//! every community connected; a final component split enforces the same
//! guarantee defensively on the output.

use super::{ClusterError, Partition, Result, WeightedGraph};
use crate::num::Real;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAIN_EPS: f64 = 1e-12;
const MAX_LOCAL_PASSES: usize = 50;
/// Randomness of the refinement merge step.
const THETA: f64 = 0.01;

/// Working graph for one aggregation level. Aggregated levels carry self
/// loops (internal weight of the merged sub-community); degrees count self
/// loops twice.
struct LevelGraph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
    m2: f64,
    /// Original node ids contained in each super-node.
    members: Vec<Vec<usize>>,
}

impl LevelGraph {
    fn from_graph<T: Real>(graph: &WeightedGraph<T>) -> LevelGraph {
        let n = graph.n();
        let adj: Vec<Vec<(usize, f64)>> = graph
            .adjacency()
            .iter()
            .map(|a| a.iter().map(|&(j, w)| (j, w.as_f64())).collect())
            .collect();
        let degrees: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();
        let m2 = degrees.iter().sum();
        let members = (0..n).map(|i| vec![i]).collect();
        LevelGraph { n, adj, degrees, m2, members }
    }

    /// Collapse refined sub-communities into super-nodes. Returns the new
    /// level plus, for every old node, the id of its super-node.
    fn aggregate(&self, refined: &[usize]) -> (LevelGraph, Vec<usize>) {
        let mut remap: std::collections::HashMap<usize, usize> = Default::default();
        let mut node_of = vec![0usize; self.n];
        for (v, &label) in refined.iter().enumerate() {
            let next = remap.len();
            node_of[v] = *remap.entry(label).or_insert(next);
        }
        let k = remap.len();
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for v in 0..self.n {
            let sv = node_of[v];
            members[sv].extend(self.members[v].iter().copied());
            for &(u, w) in &self.adj[v] {
                let su = node_of[u];
                if v < u || (v == u) {
                    if sv == su {
                        *maps[sv].entry(sv).or_insert(0.0) += w;
                    } else {
                        *maps[sv].entry(su).or_insert(0.0) += w;
                        *maps[su].entry(sv).or_insert(0.0) += w;
                    }
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> =
            maps.into_iter().map(|m| m.into_iter().collect()).collect();
        let degrees: Vec<f64> = (0..k)
            .map(|i| {
                adj[i]
                    .iter()
                    .map(|&(j, w)| if j == i { 2.0 * w } else { w })
                    .sum()
            })
            .collect();
        let m2 = degrees.iter().sum();
        for m in &mut members {
            m.sort_unstable();
        }
        (LevelGraph { n: k, adj, degrees, m2, members }, node_of)
    }
}

/// Run Leiden and return the partition.
pub fn leiden<T: Real>(
    graph: &WeightedGraph<T>,
    resolution: f64,
    seed: u64,
) -> Result<Partition> {
    leiden_with_trace(graph, resolution, seed).map(|(p, _)| p)
}

/// Run Leiden, also returning the flat modularity after each outer
/// local-moving phase (non-decreasing by construction).
pub fn leiden_with_trace<T: Real>(
    graph: &WeightedGraph<T>,
    resolution: f64,
    seed: u64,
) -> Result<(Partition, Vec<f64>)> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(ClusterError::NonPositiveResolution(resolution));
    }
    let original_n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = LevelGraph::from_graph(graph);
    let mut comm: Vec<usize> = (0..level.n).collect();
    let mut trace = Vec::new();

    if level.m2 <= 0.0 {
        // Edgeless graph: nothing to optimize, every node is its own topic.
        let labels: Vec<usize> = (0..original_n).collect();
        return Ok((Partition::from_labels(&labels), vec![0.0]));
    }

    loop {
        local_move(&level, &mut comm, resolution, &mut rng);
        trace.push(level_modularity(&level, &comm, resolution));

        let k = count_labels(&comm);
        if k == level.n || k <= 1 {
            break;
        }

        let refined = refine(&level, &comm, resolution, &mut rng);
        let (next, node_of) = level.aggregate(&refined);
        // Aggregated nodes inherit the phase-1 community of their members,
        // so the flat partition is unchanged by aggregation. Labels are
        // renumbered densely to stay within the new node range.
        let mut next_comm = vec![0usize; next.n];
        for v in 0..level.n {
            next_comm[node_of[v]] = comm[v];
        }
        let mut remap: std::collections::HashMap<usize, usize> = Default::default();
        for c in next_comm.iter_mut() {
            let fresh = remap.len();
            *c = *remap.entry(*c).or_insert(fresh);
        }
        if next.n == level.n {
            break;
        }
        level = next;
        comm = next_comm;
    }

    // Flatten to original nodes.
    let mut labels = vec![0usize; original_n];
    for (node, members) in level.members.iter().enumerate() {
        for &orig in members {
            labels[orig] = comm[node];
        }
    }

    let labels = split_disconnected(graph, &labels);
    Ok((Partition::from_labels(&labels), trace))
}

fn count_labels(comm: &[usize]) -> usize {
    let mut seen = std::collections::HashSet::new();
    for &c in comm {
        seen.insert(c);
    }
    seen.len()
}

fn level_modularity(level: &LevelGraph, comm: &[usize], gamma: f64) -> f64 {
    let w_total = level.m2 / 2.0;
    if w_total <= 0.0 {
        return 0.0;
    }
    let k = comm.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut w_in = vec![0.0f64; k];
    let mut w_tot = vec![0.0f64; k];
    for v in 0..level.n {
        let cv = comm[v];
        w_tot[cv] += level.degrees[v];
        for &(u, w) in &level.adj[v] {
            if u == v {
                w_in[cv] += w; // self loop is fully internal
            } else if comm[u] == cv && v < u {
                w_in[cv] += w;
            }
        }
    }
    w_in.iter()
        .zip(&w_tot)
        .map(|(&win, &wtot)| win / w_total - gamma * (wtot / level.m2).powi(2))
        .sum()
}

/// Greedy local moving: sweep nodes in seeded-shuffled order, moving each to
/// the first neighboring community with maximal positive gain, until a full
/// pass makes no move.
fn local_move(level: &LevelGraph, comm: &mut [usize], gamma: f64, rng: &mut ChaCha8Rng) {
    let m2 = level.m2;
    let mut comm_tot = vec![0.0f64; level.n];
    for v in 0..level.n {
        comm_tot[comm[v]] += level.degrees[v];
    }
    let mut order: Vec<usize> = (0..level.n).collect();
    let mut weight_to: Vec<f64> = vec![0.0; level.n];
    let mut touched: Vec<usize> = Vec::new();

    for _pass in 0..MAX_LOCAL_PASSES {
        order.shuffle(rng);
        let mut moved = false;
        for &v in &order {
            let current = comm[v];
            let deg_v = level.degrees[v];
            comm_tot[current] -= deg_v;

            for &c in &touched {
                weight_to[c] = 0.0;
            }
            touched.clear();
            for &(u, w) in &level.adj[v] {
                if u == v {
                    continue;
                }
                let cu = comm[u];
                if weight_to[cu] == 0.0 {
                    touched.push(cu);
                }
                weight_to[cu] += w;
            }

            let removal = -weight_to[current] / m2
                + gamma * comm_tot[current] * deg_v / (m2 * m2);
            let mut best = current;
            let mut best_gain = 0.0;
            for &target in &touched {
                if target == current {
                    continue;
                }
                let gain = removal + weight_to[target] / m2
                    - gamma * comm_tot[target] * deg_v / (m2 * m2);
                if gain > best_gain + GAIN_EPS {
                    best_gain = gain;
                    best = target;
                }
            }
            if best != current {
                comm[v] = best;
                moved = true;
            }
            comm_tot[comm[v]] += deg_v;
        }
        if !moved {
            break;
        }
    }
}

/// Randomized refinement: within each phase-1 community, grow connected
/// sub-communities by merging singleton nodes into well-connected targets,
/// choosing among non-negative-gain candidates with probability
/// proportional to `exp(gain / theta)`.
fn refine(
    level: &LevelGraph,
    comm: &[usize],
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let m2 = level.m2;
    let mut sub: Vec<usize> = (0..level.n).collect();
    let mut sub_tot: Vec<f64> = level.degrees.clone();
    let mut sub_size: Vec<usize> = vec![1; level.n];
    // w(C, S \ C) per sub-community, updated incrementally.
    let mut sub_ext: Vec<f64> = vec![0.0; level.n];

    let mut communities: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (v, &c) in comm.iter().enumerate() {
        communities.entry(c).or_default().push(v);
    }

    let mut weight_to: Vec<f64> = vec![0.0; level.n];
    let mut touched: Vec<usize> = Vec::new();

    for (_, nodes) in communities {
        if nodes.len() <= 1 {
            continue;
        }
        let in_s: std::collections::HashSet<usize> = nodes.iter().copied().collect();
        let k_s: f64 = nodes.iter().map(|&v| level.degrees[v]).sum();

        // connection of each node to the rest of its community
        let mut node_ext = std::collections::HashMap::new();
        for &v in &nodes {
            let ext: f64 = level.adj[v]
                .iter()
                .filter(|&&(u, _)| u != v && in_s.contains(&u))
                .map(|&(_, w)| w)
                .sum();
            node_ext.insert(v, ext);
            sub_ext[v] = ext;
        }

        let mut candidates: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&v| {
                let kv = level.degrees[v];
                node_ext[&v] >= gamma * kv * (k_s - kv) / m2 - GAIN_EPS
            })
            .collect();
        candidates.shuffle(rng);

        for &v in &candidates {
            if sub_size[sub[v]] > 1 {
                continue; // only singletons are merged
            }
            let deg_v = level.degrees[v];

            for &c in &touched {
                weight_to[c] = 0.0;
            }
            touched.clear();
            for &(u, w) in &level.adj[v] {
                if u == v || !in_s.contains(&u) {
                    continue;
                }
                let su = sub[u];
                if weight_to[su] == 0.0 {
                    touched.push(su);
                }
                weight_to[su] += w;
            }

            // Staying put is always a candidate with zero gain.
            let mut options: Vec<(usize, f64)> = vec![(sub[v], 0.0)];
            for &target in &touched {
                if target == sub[v] {
                    continue;
                }
                let well_connected = sub_ext[target]
                    >= gamma * sub_tot[target] * (k_s - sub_tot[target]) / m2 - GAIN_EPS;
                if !well_connected {
                    continue;
                }
                let gain = weight_to[target] / m2
                    - gamma * sub_tot[target] * deg_v / (m2 * m2);
                if gain >= -GAIN_EPS {
                    options.push((target, gain));
                }
            }

            let max_gain = options.iter().map(|&(_, g)| g).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> =
                options.iter().map(|&(_, g)| ((g - max_gain) / THETA).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = options[0].0;
            for (&(target, _), &w) in options.iter().zip(&weights) {
                if draw < w {
                    chosen = target;
                    break;
                }
                draw -= w;
            }

            if chosen != sub[v] {
                let own = sub[v];
                sub_ext[chosen] += node_ext[&v] - 2.0 * weight_to[chosen];
                sub_tot[chosen] += deg_v;
                sub_size[chosen] += 1;
                sub_tot[own] = 0.0;
                sub_size[own] = 0;
                sub_ext[own] = 0.0;
                sub[v] = chosen;
            }
        }
    }
    sub
}

/// Split any community that does not induce a connected subgraph into its
/// connected components. A no-op for partitions the algorithm produces; kept
/// as a hard guarantee on the output contract.
fn split_disconnected<T: Real>(graph: &WeightedGraph<T>, labels: &[usize]) -> Vec<usize> {
    let n = labels.len();
    let mut out = vec![usize::MAX; n];
    let mut next_label = 0usize;
    let mut stack = Vec::new();
    for start in 0..n {
        if out[start] != usize::MAX {
            continue;
        }
        let label = labels[start];
        let fresh = next_label;
        next_label += 1;
        out[start] = fresh;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(u, _) in &graph.adjacency()[v] {
                if out[u] == usize::MAX && labels[u] == label {
                    out[u] = fresh;
                    stack.push(u);
                }
            }
        }
    }
    out
}
