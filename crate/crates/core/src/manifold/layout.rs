//! Stochastic gradient layout optimization.
//!
//! Edges of the fuzzy graph are sampled in proportion to their weight
//! (epoch-based scheduling), pulling endpoints together along the gradient
//! of the fitted rational curve `1 / (1 + a d^{2b})` while negative samples
//! push random pairs apart. Single-threaded by contract: the layout must be
//! bit-reproducible for a fixed seed.

use crate::num::Real;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_CLIP: f64 = 4.0;

/// Fit `(a, b)` so `1/(1 + a x^{2b})` approximates the target curve that is
/// 1 below `min_dist` and decays as `exp(-(x - min_dist)/spread)` beyond it.
/// Plain Levenberg-Marquardt on a 300-point grid, all in f64.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let m = 300usize;
    let xs: Vec<f64> = (0..m).map(|i| 3.0 * spread * (i as f64) / (m as f64)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();

    let f = |a: f64, b: f64, x: f64| 1.0 / (1.0 + a * x.powf(2.0 * b));
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter().zip(&ys).map(|(&x, &y)| (y - f(a, b, x)).powi(2)).sum()
    };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut err = sse(a, b);
    for _ in 0..200 {
        // Jacobian of residual r = y - f w.r.t. (a, b)
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue; // f == 1 independent of (a, b) at x = 0
            }
            let xp = x.powf(2.0 * b);
            let denom = (1.0 + a * xp).powi(2);
            let dfda = -xp / denom;
            let dfdb = -2.0 * a * xp * x.ln() / denom;
            let (ja, jb) = (-dfda, -dfdb); // d r / d p = -d f / d p
            let r = y - f(a, b, x);
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        jtj[1][0] = jtj[0][1];

        let mut improved = false;
        for _ in 0..20 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let m01 = jtj[0][1];
            let det = m00 * m11 - m01 * m01;
            if det.abs() < 1e-30 {
                break;
            }
            let da = (jtr[0] * m11 - jtr[1] * m01) / det;
            let db = (jtr[1] * m00 - jtr[0] * m01) / det;
            let (na, nb) = (a - da, b - db);
            if na > 0.0 && nb > 0.0 {
                let new_err = sse(na, nb);
                if new_err < err {
                    a = na;
                    b = nb;
                    err = new_err;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 3.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// Per-edge sampling schedule: the strongest edge fires every epoch, weaker
/// edges proportionally less often. Edges below `w_max / n_epochs` never
/// fire and are dropped by the caller.
pub fn epochs_per_sample(weights: &[f64], n_epochs: usize) -> Vec<f64> {
    let w_max = weights.iter().cloned().fold(0.0f64, f64::max);
    let threshold = w_max / n_epochs as f64;
    weights
        .iter()
        .map(|&w| if w >= threshold && w > 0.0 { w_max / w } else { f64::INFINITY })
        .collect()
}

pub struct LayoutOpts {
    pub n_epochs: usize,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub initial_alpha: f64,
    pub negative_sample_rate: usize,
}

#[inline]
fn attract_coeff(a: f64, b: f64, dist_sq: f64) -> f64 {
    if dist_sq > 0.0 {
        (-2.0 * a * b * dist_sq.powf(b - 1.0)) / (1.0 + a * dist_sq.powf(b))
    } else {
        0.0
    }
}

#[inline]
fn repulse_coeff(a: f64, b: f64, gamma: f64, dist_sq: f64) -> f64 {
    if dist_sq > 0.0 {
        (2.0 * gamma * b) / ((1e-3 + dist_sq) * (1.0 + a * dist_sq.powf(b)))
    } else {
        0.0
    }
}

#[inline]
fn sq_dist_rows<T: Real>(coords: &Array2<T>, i: usize, j: usize) -> f64 {
    let (ri, rj) = (coords.row(i), coords.row(j));
    ri.iter()
        .zip(rj.iter())
        .map(|(&x, &y)| {
            let d = (x - y).as_f64();
            d * d
        })
        .sum()
}

#[inline]
fn sq_dist_between<T: Real>(
    head: &Array2<T>,
    i: usize,
    tail: &Array2<T>,
    j: usize,
) -> f64 {
    head.row(i)
        .iter()
        .zip(tail.row(j).iter())
        .map(|(&x, &y)| {
            let d = (x - y).as_f64();
            d * d
        })
        .sum()
}

/// Optimize a layout where both edge endpoints move (model fitting).
/// `edges` holds directed pairs; a symmetric graph contributes each
/// undirected edge twice, once per direction.
pub fn optimize_fit<T: Real>(
    coords: &mut Array2<T>,
    edges: &[(usize, usize)],
    schedule: &[f64],
    opts: &LayoutOpts,
    seed: u64,
) {
    let n = coords.nrows();
    let dim = coords.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut next_sample: Vec<f64> = schedule.to_vec();
    let neg_schedule: Vec<f64> =
        schedule.iter().map(|&e| e / opts.negative_sample_rate as f64).collect();
    let mut next_negative: Vec<f64> = neg_schedule.clone();

    for epoch in 0..opts.n_epochs {
        let alpha = opts.initial_alpha * (1.0 - epoch as f64 / opts.n_epochs as f64);
        let epoch_f = epoch as f64;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if next_sample[e] > epoch_f {
                continue;
            }
            let dist_sq = sq_dist_rows(coords, i, j);
            let coeff = attract_coeff(opts.a, opts.b, dist_sq);
            for d in 0..dim {
                let delta = (coords[[i, d]] - coords[[j, d]]).as_f64();
                let grad = (coeff * delta).clamp(-GRAD_CLIP, GRAD_CLIP) * alpha;
                coords[[i, d]] = coords[[i, d]] + T::from_f64_lossy(grad);
                coords[[j, d]] = coords[[j, d]] - T::from_f64_lossy(grad);
            }
            next_sample[e] += schedule[e];

            let n_neg =
                ((epoch_f - next_negative[e]) / neg_schedule[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let t = rng.random_range(0..n);
                if t == i {
                    continue;
                }
                let dist_sq = sq_dist_rows(coords, i, t);
                let coeff = repulse_coeff(opts.a, opts.b, opts.gamma, dist_sq);
                for d in 0..dim {
                    let grad = if coeff > 0.0 {
                        let delta = (coords[[i, d]] - coords[[t, d]]).as_f64();
                        (coeff * delta).clamp(-GRAD_CLIP, GRAD_CLIP)
                    } else {
                        GRAD_CLIP
                    } * alpha;
                    coords[[i, d]] = coords[[i, d]] + T::from_f64_lossy(grad);
                }
            }
            next_negative[e] += n_neg as f64 * neg_schedule[e];
        }
    }
}

/// Optimize new points against a frozen reference layout (transform).
/// Only `head_coords` moves; negatives are drawn from the reference.
pub fn optimize_transform<T: Real>(
    head_coords: &mut Array2<T>,
    tail_coords: &Array2<T>,
    edges: &[(usize, usize)],
    schedule: &[f64],
    opts: &LayoutOpts,
    seed: u64,
) {
    let n_tail = tail_coords.nrows();
    let dim = head_coords.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491_4f6c_dd1d);
    let mut next_sample: Vec<f64> = schedule.to_vec();
    let neg_schedule: Vec<f64> =
        schedule.iter().map(|&e| e / opts.negative_sample_rate as f64).collect();
    let mut next_negative: Vec<f64> = neg_schedule.clone();

    for epoch in 0..opts.n_epochs {
        let alpha = opts.initial_alpha * (1.0 - epoch as f64 / opts.n_epochs as f64);
        let epoch_f = epoch as f64;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if next_sample[e] > epoch_f {
                continue;
            }
            let dist_sq = sq_dist_between(head_coords, i, tail_coords, j);
            let coeff = attract_coeff(opts.a, opts.b, dist_sq);
            for d in 0..dim {
                let delta = (head_coords[[i, d]] - tail_coords[[j, d]]).as_f64();
                let grad = (coeff * delta).clamp(-GRAD_CLIP, GRAD_CLIP) * alpha;
                head_coords[[i, d]] = head_coords[[i, d]] + T::from_f64_lossy(grad);
            }
            next_sample[e] += schedule[e];

            let n_neg =
                ((epoch_f - next_negative[e]) / neg_schedule[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let t = rng.random_range(0..n_tail);
                let dist_sq = sq_dist_between(head_coords, i, tail_coords, t);
                // a new point coinciding with a training point is a valid
                // placement here, not a degenerate pair to kick apart
                if dist_sq <= 0.0 {
                    continue;
                }
                let coeff = repulse_coeff(opts.a, opts.b, opts.gamma, dist_sq);
                for d in 0..dim {
                    let delta = (head_coords[[i, d]] - tail_coords[[t, d]]).as_f64();
                    let grad = (coeff * delta).clamp(-GRAD_CLIP, GRAD_CLIP) * alpha;
                    head_coords[[i, d]] = head_coords[[i, d]] + T::from_f64_lossy(grad);
                }
            }
            next_negative[e] += n_neg as f64 * neg_schedule[e];
        }
    }
}
