//! Manifold learning: kNN graphs and UMAP-style projection with
//! out-of-sample transform.

pub mod fuzzy;
pub mod knn;
pub mod layout;
pub mod spectral;

pub use fuzzy::{fuzzy_simplicial_set, FuzzyGraph};
pub use knn::{build_knn, KnnGraph, Metric};

use crate::embed::Embeddings;
use crate::matrix_io::{self, MatrixIoError};
use crate::num::Real;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("output dims d={d} must be < input dims m={m}")]
    DimsTooLarge { d: usize, m: usize },
    #[error("need n > k: n={n}, k={k}")]
    TooFewForNeighbors { n: usize, k: usize },
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix io: {0}")]
    MatrixIo(#[from] MatrixIoError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("projection header: {0}")]
    Header(String),
    #[error("projection ids do not match the supplied training embeddings")]
    TrainingMismatch,
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// Projection hyperparameters. Defaults follow the standard pipeline
/// configuration: 100 neighbors into a 50-dimensional layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub out_dims: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub repulsion_strength: f64,
    pub metric: Metric,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_neighbors: 100,
            out_dims: 50,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 200,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            repulsion_strength: 1.0,
            metric: Metric::Cosine,
        }
    }
}

impl UmapParams {
    pub fn with_dims(mut self, d: usize) -> Self {
        self.out_dims = d;
        self
    }

    pub fn with_neighbors(mut self, k: usize) -> Self {
        self.n_neighbors = k;
        self
    }
}

/// Fitted projection: training coordinates, curve parameters and everything
/// needed to place out-of-sample points into the same layout.
#[derive(Debug, Clone)]
pub struct Projection<T: Real> {
    coords: Array2<T>,
    ids: Vec<String>,
    params: UmapParams,
    seed: u64,
    curve_a: f64,
    curve_b: f64,
    training: Array2<T>,
}

impl<T: Real> Projection<T> {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    /// Training layout U (n x d).
    pub fn coords(&self) -> &Array2<T> {
        &self.coords
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn params(&self) -> &UmapParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn curve(&self) -> (f64, f64) {
        (self.curve_a, self.curve_b)
    }

    /// Map new rows (same input dimensionality as the training matrix) into
    /// the fitted layout. Training coordinates are not modified.
    pub fn transform(&self, xnew: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let m = self.training.ncols();
        if xnew.ncols() != m {
            return Err(ManifoldError::DimensionMismatch { expected: m, got: xnew.ncols() });
        }
        if xnew.iter().any(|v| !v.is_finite()) {
            return Err(ManifoldError::NonFiniteInput);
        }
        let n_new = xnew.nrows();
        if n_new == 0 {
            return Ok(Array2::zeros((0, self.dims())));
        }
        let k = self.params.n_neighbors.min(self.training.nrows());
        let train_rows: Vec<&[T]> = (0..self.training.nrows())
            .map(|i| self.training.row(i).to_slice().expect("contiguous"))
            .collect();

        // Per new point: neighbors in the input space, smoothed memberships,
        // weighted-mean initialization over neighbor layout coordinates.
        let mut init = Array2::<T>::zeros((n_new, self.dims()));
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n_new {
            let row = xnew.row(i);
            let q = row.to_slice().expect("contiguous");
            let nb = knn::k_nearest_external(&train_rows, q, k, self.params.metric);
            let dists: Vec<f64> = nb.iter().map(|&(_, d)| d.as_f64()).collect();
            let target = (nb.len().max(1) as f64).log2().max(f64::MIN_POSITIVE);
            let (rho, sigma) = fuzzy::smooth_knn_scale(&dists, target);
            let w: Vec<f64> =
                dists.iter().map(|&d| (-((d - rho).max(0.0)) / sigma).exp()).collect();
            let total: f64 = w.iter().sum();
            for (&(j, _), &wj) in nb.iter().zip(&w) {
                let frac = if total > 0.0 { wj / total } else { 1.0 / nb.len() as f64 };
                for d in 0..self.dims() {
                    init[[i, d]] =
                        init[[i, d]] + T::from_f64_lossy(frac * self.coords[[j, d]].as_f64());
                }
                edges.push((i, j));
                weights.push(wj);
            }
        }

        let n_epochs = (self.params.n_epochs / 3).max(30);
        let schedule = layout::epochs_per_sample(&weights, n_epochs);
        let (kept_edges, kept_schedule): (Vec<_>, Vec<_>) = edges
            .into_iter()
            .zip(schedule)
            .filter(|&(_, s)| s.is_finite())
            .unzip();
        let opts = layout::LayoutOpts {
            n_epochs,
            a: self.curve_a,
            b: self.curve_b,
            gamma: self.params.repulsion_strength,
            // out-of-sample refinement runs at a quarter of the fit rate so
            // new points settle instead of bouncing between neighbors
            initial_alpha: self.params.learning_rate / 4.0,
            negative_sample_rate: self.params.negative_sample_rate,
        };
        let mut coords = init;
        layout::optimize_transform(
            &mut coords,
            &self.coords,
            &kept_edges,
            &kept_schedule,
            &opts,
            self.seed,
        );
        Ok(coords)
    }
}

/// Fit a projection of the embedding matrix. Deterministic for a fixed seed.
pub fn fit_umap<T: Real>(
    embeddings: &Embeddings<T>,
    params: &UmapParams,
    seed: u64,
) -> Result<Projection<T>> {
    let x = embeddings.rows();
    let (n, m) = x.dim();
    if params.out_dims < 2 {
        return Err(ManifoldError::InvalidParam("output dims must be >= 2".into()));
    }
    if params.out_dims >= m {
        return Err(ManifoldError::DimsTooLarge { d: params.out_dims, m });
    }
    if n <= params.n_neighbors {
        return Err(ManifoldError::TooFewForNeighbors { n, k: params.n_neighbors });
    }
    if params.n_epochs == 0 {
        return Err(ManifoldError::InvalidParam("n_epochs must be >= 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ManifoldError::NonFiniteInput);
    }

    let knn_graph = build_knn(x.view(), params.n_neighbors, params.metric)?;
    let fuzzy_graph = fuzzy_simplicial_set(&knn_graph);

    let mut coords = match spectral::spectral_init::<T>(&fuzzy_graph, params.out_dims, seed) {
        Some(c) => c,
        None => spectral::gaussian_init::<T>(n, params.out_dims, seed),
    };

    // Directed edge list: each undirected edge contributes both directions.
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (i, adj) in fuzzy_graph.adjacency().iter().enumerate() {
        for &(j, w) in adj {
            edges.push((i, j));
            weights.push(w.as_f64());
        }
    }
    let schedule = layout::epochs_per_sample(&weights, params.n_epochs);
    let (kept_edges, kept_schedule): (Vec<_>, Vec<_>) = edges
        .into_iter()
        .zip(schedule)
        .filter(|&(_, s)| s.is_finite())
        .unzip();

    let (curve_a, curve_b) = layout::find_ab_params(params.spread, params.min_dist);
    let opts = layout::LayoutOpts {
        n_epochs: params.n_epochs,
        a: curve_a,
        b: curve_b,
        gamma: params.repulsion_strength,
        initial_alpha: params.learning_rate,
        negative_sample_rate: params.negative_sample_rate,
    };
    layout::optimize_fit(&mut coords, &kept_edges, &kept_schedule, &opts, seed);

    if coords.iter().any(|v| !v.is_finite()) {
        return Err(ManifoldError::InvalidParam(
            "layout diverged to non-finite coordinates".into(),
        ));
    }

    Ok(Projection {
        coords,
        ids: embeddings.ids().to_vec(),
        params: params.clone(),
        seed,
        curve_a,
        curve_b,
        training: x.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct ProjectionHeader {
    rows: usize,
    cols: usize,
    crc32: u32,
    ids: Vec<String>,
    params: UmapParams,
    seed: u64,
    a: f64,
    b: f64,
}

/// Persist the layout matrix plus a JSON header. The training matrix is not
/// duplicated on disk; reloading reattaches it from the embeddings artifact.
pub fn save_projection<T: Real>(projection: &Projection<T>, path: &Path) -> Result<()> {
    let crc = matrix_io::write_matrix(path, projection.coords.view())?;
    let header = ProjectionHeader {
        rows: projection.n(),
        cols: projection.dims(),
        crc32: crc,
        ids: projection.ids.clone(),
        params: projection.params.clone(),
        seed: projection.seed,
        a: projection.curve_a,
        b: projection.curve_b,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(crate::embed::sidecar_path(path), json)?;
    Ok(())
}

/// Load a persisted projection, reattaching the training matrix.
pub fn load_projection<T: Real>(
    path: &Path,
    training: &Embeddings<T>,
) -> Result<Projection<T>> {
    let (coords, crc) = matrix_io::read_matrix::<T>(path)?;
    let raw = std::fs::read_to_string(crate::embed::sidecar_path(path))?;
    let header: ProjectionHeader =
        serde_json::from_str(&raw).map_err(|e| ManifoldError::Header(e.to_string()))?;
    if header.crc32 != crc {
        return Err(ManifoldError::Header(format!(
            "header crc {:#010x} does not match matrix crc {:#010x}",
            header.crc32, crc
        )));
    }
    if header.rows != coords.nrows() || header.cols != coords.ncols() {
        return Err(ManifoldError::Header("header shape does not match matrix".into()));
    }
    if header.ids.len() != coords.nrows() {
        return Err(ManifoldError::Header("header ids do not match matrix rows".into()));
    }
    if header.ids != training.ids() {
        return Err(ManifoldError::TrainingMismatch);
    }
    Ok(Projection {
        coords,
        ids: header.ids,
        params: header.params,
        seed: header.seed,
        curve_a: header.a,
        curve_b: header.b,
        training: training.rows().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Embeddings;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob_embeddings(n: usize, m: usize, blobs: usize, seed: u64) -> Embeddings<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = Array2::from_shape_fn((n, m), |(i, j)| {
            let blob = i % blobs;
            let center = if j == blob { 12.0 } else { 0.0 };
            center + rng.random_range(-0.5..0.5)
        });
        let ids = (0..n).map(|i| format!("d{i}")).collect();
        Embeddings::new(rows, ids, "test".into()).unwrap()
    }

    fn small_params(d: usize, k: usize) -> UmapParams {
        UmapParams {
            n_neighbors: k,
            out_dims: d,
            n_epochs: 60,
            metric: Metric::Euclidean,
            ..UmapParams::default()
        }
    }

    #[test]
    fn fit_is_bit_reproducible() {
        let e = blob_embeddings(60, 8, 3, 1);
        let p = small_params(2, 10);
        let u1 = fit_umap(&e, &p, 42).unwrap();
        let u2 = fit_umap(&e, &p, 42).unwrap();
        assert_eq!(u1.coords(), u2.coords());
        let u3 = fit_umap(&e, &p, 43).unwrap();
        assert_ne!(u3.coords(), u1.coords());
    }

    #[test]
    fn dims_must_be_below_input() {
        let e = blob_embeddings(30, 4, 2, 1);
        let err = fit_umap(&e, &small_params(4, 5), 0).unwrap_err();
        assert!(matches!(err, ManifoldError::DimsTooLarge { .. }));
    }

    #[test]
    fn n_must_exceed_k() {
        let e = blob_embeddings(10, 8, 2, 1);
        let err = fit_umap(&e, &small_params(2, 10), 0).unwrap_err();
        assert!(matches!(err, ManifoldError::TooFewForNeighbors { .. }));
    }

    #[test]
    fn transform_rejects_wrong_width() {
        let e = blob_embeddings(40, 8, 2, 1);
        let p = fit_umap(&e, &small_params(2, 8), 0).unwrap();
        let bad = Array2::<f32>::zeros((3, 5));
        assert!(matches!(
            p.transform(bad.view()).unwrap_err(),
            ManifoldError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn transform_is_deterministic_and_leaves_model_untouched() {
        let e = blob_embeddings(40, 8, 2, 1);
        let p = fit_umap(&e, &small_params(2, 8), 0).unwrap();
        let before = p.coords().clone();
        let xnew = e.rows().slice(ndarray::s![0..5, ..]).to_owned();
        let t1 = p.transform(xnew.view()).unwrap();
        let t2 = p.transform(xnew.view()).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(p.coords(), &before);
    }

    #[test]
    fn projection_round_trips_through_disk() {
        let e = blob_embeddings(40, 8, 2, 1);
        let p = fit_umap(&e, &small_params(2, 8), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("projection.bin");
        save_projection(&p, &path).unwrap();
        let back = load_projection::<f32>(&path, &e).unwrap();
        assert_eq!(back.coords(), p.coords());
        assert_eq!(back.seed(), 5);
        assert_eq!(back.curve(), p.curve());
    }
}
