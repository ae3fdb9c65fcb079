//! Spectral initialization of the low-dimensional layout.
//!
//! When the fuzzy graph is connected, the embedding starts from the first
//! non-trivial eigenvectors of the symmetric normalized Laplacian, rescaled
//! to a +/-10 box with a small seeded jitter. Disconnected graphs (and
//! graphs too large for a dense eigendecomposition) fall back to a seeded
//! Gaussian start.

use crate::num::Real;
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fuzzy::FuzzyGraph;

/// Dense eigendecomposition is cubic; beyond this size the Gaussian
/// fallback is used instead.
const SPECTRAL_MAX_N: usize = 2000;

const INIT_RANGE: f64 = 10.0;
const INIT_JITTER: f64 = 1e-4;

/// Spectral layout, or `None` when the graph is unsuitable (too large for a
/// dense eigendecomposition, or too small for `dim + 1` eigenpairs).
///
/// A disconnected graph is laid out per connected component: each component
/// gets its own spectral solution, scaled into a box around a distinct
/// anchor, so within-component structure is preserved even when the
/// neighborhood graph splits.
pub fn spectral_init<T: Real>(graph: &FuzzyGraph<T>, dim: usize, seed: u64) -> Option<Array2<T>> {
    let n = graph.n();
    if n > SPECTRAL_MAX_N {
        log::warn!("n={n} exceeds dense spectral limit {SPECTRAL_MAX_N}; using Gaussian init");
        return None;
    }
    if dim + 1 >= n {
        return None;
    }

    let components = connected_components(graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut coords = Array2::<f64>::zeros((n, dim));

    let single = components.len() == 1;
    for (c, nodes) in components.iter().enumerate() {
        // anchor for this component; a lone component is centered
        let anchor = if single {
            vec![0.0; dim]
        } else {
            component_anchor(c, components.len(), dim)
        };
        let box_radius = if single { INIT_RANGE } else { INIT_RANGE * 0.3 };

        let local = if nodes.len() > dim + 1 {
            component_spectral(graph, nodes, dim)
        } else {
            None
        };
        match local {
            Some(local) => {
                let max_abs = local.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                let scale = if max_abs > 0.0 { box_radius / max_abs } else { 0.0 };
                for (row, &node) in nodes.iter().enumerate() {
                    for d in 0..dim {
                        coords[[node, d]] = anchor[d] + local[[row, d]] * scale;
                    }
                }
            }
            None => {
                // tiny or degenerate component: jitter around the anchor
                for &node in nodes {
                    for d in 0..dim {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        coords[[node, d]] = anchor[d] + noise * box_radius * 0.1;
                    }
                }
            }
        }
    }

    let out = coords.mapv(|v| {
        let noise: f64 = StandardNormal.sample(&mut rng);
        T::from_f64_lossy(v + noise * INIT_JITTER)
    });
    Some(out)
}

/// Deterministic anchor positions: components spread on a circle in the
/// first two layout dimensions.
fn component_anchor(index: usize, count: usize, dim: usize) -> Vec<f64> {
    let mut anchor = vec![0.0; dim];
    if count <= 1 {
        return anchor;
    }
    let theta = 2.0 * std::f64::consts::PI * index as f64 / count as f64;
    anchor[0] = 0.6 * INIT_RANGE * theta.cos();
    if dim > 1 {
        anchor[1] = 0.6 * INIT_RANGE * theta.sin();
    }
    anchor
}

fn connected_components<T: Real>(graph: &FuzzyGraph<T>) -> Vec<Vec<usize>> {
    let n = graph.n();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut nodes = Vec::new();
        while let Some(v) = stack.pop() {
            nodes.push(v);
            for &(u, _) in &graph.adjacency()[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        nodes.sort_unstable();
        components.push(nodes);
    }
    components
}

/// Eigenvectors 1..=dim of the normalized Laplacian of one component.
fn component_spectral<T: Real>(
    graph: &FuzzyGraph<T>,
    nodes: &[usize],
    dim: usize,
) -> Option<Array2<f64>> {
    let k = nodes.len();
    let local_of: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(local, &node)| (node, local)).collect();
    let mut degrees = vec![0.0f64; k];
    for (local, &node) in nodes.iter().enumerate() {
        degrees[local] = graph.adjacency()[node]
            .iter()
            .filter(|(u, _)| local_of.contains_key(u))
            .map(|&(_, w)| w.as_f64())
            .sum();
    }
    if degrees.iter().any(|&d| d <= 0.0) {
        return None;
    }
    let mut lap = DMatrix::<f64>::identity(k, k);
    for (local, &node) in nodes.iter().enumerate() {
        for &(u, w) in &graph.adjacency()[node] {
            if let Some(&lu) = local_of.get(&u) {
                lap[(local, lu)] -= w.as_f64() / (degrees[local] * degrees[lu]).sqrt();
            }
        }
    }

    let eigen = lap.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eigen.eigenvalues[x].partial_cmp(&eigen.eigenvalues[y]).unwrap());

    let mut coords = Array2::<f64>::zeros((k, dim));
    for (c, &ev_idx) in order[1..=dim].iter().enumerate() {
        let col = eigen.eigenvectors.column(ev_idx);
        // deterministic sign: largest-magnitude component positive
        let mut pivot = 0usize;
        for r in 1..k {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..k {
            coords[[r, c]] = col[r] * flip;
        }
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(coords)
}

/// Seeded Gaussian layout used when spectral initialization is unavailable.
pub fn gaussian_init<T: Real>(n: usize, dim: usize, seed: u64) -> Array2<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
    Array2::from_shape_fn((n, dim), |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        T::from_f64_lossy(v * INIT_RANGE / 3.0)
    })
}
