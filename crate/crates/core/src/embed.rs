//! Document embedding: pluggable providers and persisted matrices.
//!
//! Three providers cover the practical range: `synthetic` derives a unit
//! vector from a hash of the text (fully offline and deterministic, used by
//! the test suite end to end), `file` aligns a precomputed matrix to the
//! corpus by document id, and `remote` speaks the OpenAI-compatible
//! `/v1/embeddings` JSON protocol with batching and retry.

use crate::corpus::Corpus;
use crate::matrix_io::{self, MatrixIoError};
use crate::num::{l2_norm, Real};
use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("matrix io: {0}")]
    MatrixIo(#[from] MatrixIoError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sidecar metadata: {0}")]
    Sidecar(String),
    #[error("embedding matrix needs at least 2 columns, provider returned {0}")]
    TooNarrow(usize),
    #[error("embedding id alignment failed: corpus document \"{id}\" not present in file")]
    Alignment { id: String },
    #[error("provider config invalid: {0}")]
    Config(String),
    #[error("auth env var \"{0}\" is not set")]
    Auth(String),
    #[error("embedding request failed after {attempts} attempts; last status {status}: {body}")]
    Http { attempts: u32, status: String, body: String },
    #[error("embedding response malformed: {0}")]
    BadResponse(String),
    #[error("embedding dimension mismatch: batch returned {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("non-finite embedding value for document \"{id}\"")]
    NonFinite { id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("ids do not align with matrix rows: {0} ids for {1} rows")]
    IdCount(usize, usize),
    #[error("duplicate id \"{0}\" in embedding matrix")]
    DuplicateId(String),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

/// Dense document-embedding matrix with its id index.
#[derive(Debug, Clone)]
pub struct Embeddings<T: Real> {
    rows: Array2<T>,
    ids: Vec<String>,
    model_tag: String,
}

impl<T: Real> Embeddings<T> {
    pub fn new(rows: Array2<T>, ids: Vec<String>, model_tag: String) -> Result<Self> {
        if ids.len() != rows.nrows() {
            return Err(EmbedError::IdCount(ids.len(), rows.nrows()));
        }
        if rows.ncols() < 2 {
            return Err(EmbedError::TooNarrow(rows.ncols()));
        }
        let mut seen = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if seen.insert(id.clone(), i).is_some() {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
        }
        for (i, row) in rows.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { id: ids[i].clone() });
            }
        }
        Ok(Embeddings { rows, ids, model_tag })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.rows.row(i)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    File,
    Synthetic,
}

/// Provider selection and transport knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Full URL of an OpenAI-compatible embeddings endpoint (remote only).
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub batch_size: usize,
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: Option<String>,
    /// L2-normalize returned rows.
    pub normalize: bool,
    /// Output dimensionality of the synthetic provider.
    pub synthetic_dim: usize,
    /// Matrix path for the file provider.
    pub path: Option<PathBuf>,
    /// Upper bound on concurrently dispatched remote batches.
    pub max_in_flight: usize,
}

impl ProviderConfig {
    pub fn synthetic(dim: usize) -> Self {
        ProviderConfig {
            kind: ProviderKind::Synthetic,
            endpoint: None,
            model: None,
            batch_size: 64,
            max_retries: 3,
            timeout_secs: 30,
            auth_env: None,
            normalize: false,
            synthetic_dim: dim,
            path: None,
            max_in_flight: 4,
        }
    }

    pub fn file(path: PathBuf) -> Self {
        ProviderConfig { kind: ProviderKind::File, path: Some(path), ..Self::synthetic(64) }
    }

    pub fn remote(endpoint: String, model: String) -> Self {
        ProviderConfig {
            kind: ProviderKind::Remote,
            endpoint: Some(endpoint),
            model: Some(model),
            ..Self::synthetic(64)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(EmbedError::Config("batch size must be >= 1".into()));
        }
        match self.kind {
            ProviderKind::Remote => {
                if self.endpoint.is_none() || self.model.is_none() {
                    return Err(EmbedError::Config(
                        "remote provider requires endpoint and model".into(),
                    ));
                }
            }
            ProviderKind::File => {
                if self.path.is_none() {
                    return Err(EmbedError::Config("file provider requires a path".into()));
                }
            }
            ProviderKind::Synthetic => {
                if self.synthetic_dim < 2 {
                    return Err(EmbedError::Config("synthetic dim must be >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// Embed every document, one row per document in corpus order.
pub fn embed_corpus<T: Real>(corpus: &Corpus, provider: &ProviderConfig) -> Result<Embeddings<T>> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let ids = corpus.ids();
    let texts: Vec<&str> = corpus.documents().iter().map(|d| d.text.as_str()).collect();
    embed_texts(&ids, &texts, provider)
}

/// Embed arbitrary texts with their ids (used for corpora and lexicon terms).
pub fn embed_texts<T: Real>(
    ids: &[String],
    texts: &[&str],
    provider: &ProviderConfig,
) -> Result<Embeddings<T>> {
    provider.validate()?;
    let (rows, tag) = match provider.kind {
        ProviderKind::Synthetic => (synthetic_rows(texts, provider.synthetic_dim), {
            format!("synthetic-{}", provider.synthetic_dim)
        }),
        ProviderKind::File => {
            let loaded: Embeddings<T> = load_embeddings(provider.path.as_ref().unwrap())?;
            let index: HashMap<&str, usize> =
                loaded.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            let mut rows = Array2::zeros((ids.len(), loaded.dim()));
            for (i, id) in ids.iter().enumerate() {
                let &src = index
                    .get(id.as_str())
                    .ok_or_else(|| EmbedError::Alignment { id: id.clone() })?;
                rows.row_mut(i).assign(&loaded.rows.row(src));
            }
            (rows, loaded.model_tag)
        }
        ProviderKind::Remote => remote_rows(ids, texts, provider)?,
    };
    let rows = if provider.normalize { normalize_rows(rows) } else { rows };
    Embeddings::new(rows, ids.to_vec(), tag)
}

/// Like [`embed_texts`] but per-text failures are skipped instead of fatal.
/// Returns surviving embeddings plus the skipped ids. Used for lexicon terms,
/// where a handful of misses should not abort the benchmark.
pub fn embed_texts_lossy<T: Real>(
    ids: &[String],
    texts: &[&str],
    provider: &ProviderConfig,
) -> Result<(Embeddings<T>, Vec<String>)> {
    provider.validate()?;
    match provider.kind {
        ProviderKind::Synthetic => Ok((embed_texts(ids, texts, provider)?, Vec::new())),
        ProviderKind::File => {
            let loaded: Embeddings<T> = load_embeddings(provider.path.as_ref().unwrap())?;
            let index: HashMap<&str, usize> =
                loaded.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            let mut kept_ids = Vec::new();
            let mut kept_rows = Vec::new();
            let mut skipped = Vec::new();
            for id in ids {
                match index.get(id.as_str()) {
                    Some(&src) => {
                        kept_ids.push(id.clone());
                        kept_rows.push(loaded.rows.row(src).to_vec());
                    }
                    None => skipped.push(id.clone()),
                }
            }
            if !skipped.is_empty() {
                log::warn!("{} of {} texts missing from embedding file", skipped.len(), ids.len());
            }
            let dim = loaded.dim();
            let flat: Vec<T> = kept_rows.into_iter().flatten().collect();
            let rows = Array2::from_shape_vec((kept_ids.len(), dim), flat)
                .expect("row collection shape");
            let rows = if provider.normalize { normalize_rows(rows) } else { rows };
            Ok((Embeddings::new(rows, kept_ids, loaded.model_tag)?, skipped))
        }
        ProviderKind::Remote => {
            // Batch failures drop only the affected texts.
            let mut kept_ids = Vec::new();
            let mut kept_rows: Vec<Vec<T>> = Vec::new();
            let mut skipped = Vec::new();
            let mut tag = String::new();
            for (chunk_ids, chunk_texts) in
                ids.chunks(provider.batch_size).zip(texts.chunks(provider.batch_size))
            {
                match remote_rows::<T>(chunk_ids, chunk_texts, provider) {
                    Ok((rows, t)) => {
                        tag = t;
                        for (id, row) in chunk_ids.iter().zip(rows.outer_iter()) {
                            kept_ids.push(id.clone());
                            kept_rows.push(row.to_vec());
                        }
                    }
                    Err(e) => {
                        log::warn!("embedding batch failed, skipping {} texts: {e}", chunk_ids.len());
                        skipped.extend(chunk_ids.iter().cloned());
                    }
                }
            }
            if kept_ids.is_empty() {
                return Err(EmbedError::BadResponse("all embedding batches failed".into()));
            }
            let dim = kept_rows[0].len();
            let flat: Vec<T> = kept_rows.into_iter().flatten().collect();
            let rows = Array2::from_shape_vec((kept_ids.len(), dim), flat)
                .expect("row collection shape");
            let rows = if provider.normalize { normalize_rows(rows) } else { rows };
            Ok((Embeddings::new(rows, kept_ids, tag)?, skipped))
        }
    }
}

/// Deterministic pseudo-embedding: a unit vector seeded from the SHA-256 of
/// the text bytes. Equal texts get equal rows on every platform.
pub fn synthetic_embedding<T: Real>(text: &str, dim: usize) -> Vec<T> {
    let digest = Sha256::digest(text.as_bytes());
    let seed = u64::from_le_bytes(digest[..8].try_into().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter()
        .map(|v| T::from_f64_lossy(if norm > 0.0 { v / norm } else { 0.0 }))
        .collect()
}

fn synthetic_rows<T: Real>(texts: &[&str], dim: usize) -> Array2<T> {
    let flat: Vec<T> = texts.iter().flat_map(|t| synthetic_embedding::<T>(t, dim)).collect();
    Array2::from_shape_vec((texts.len(), dim), flat).expect("synthetic shape")
}

fn normalize_rows<T: Real>(mut rows: Array2<T>) -> Array2<T> {
    for mut row in rows.rows_mut() {
        let slice = row.as_slice().expect("contiguous row");
        let norm = l2_norm(slice);
        if norm > T::zero() {
            row.mapv_inplace(|v| v / norm);
        }
    }
    rows
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

fn remote_rows<T: Real>(
    ids: &[String],
    texts: &[&str],
    cfg: &ProviderConfig,
) -> Result<(Array2<T>, String)> {
    let endpoint = cfg.endpoint.as_deref().unwrap();
    let model = cfg.model.as_deref().unwrap();
    let token = match &cfg.auth_env {
        Some(var) => Some(std::env::var(var).map_err(|_| EmbedError::Auth(var.clone()))?),
        None => None,
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| EmbedError::Config(e.to_string()))?;

    let batches: Vec<&[&str]> = texts.chunks(cfg.batch_size).collect();
    let mut results: Vec<Option<Vec<Vec<f64>>>> = vec![None; batches.len()];

    // Dispatch up to max_in_flight batches at a time; responses are written
    // back by batch index so corpus order survives any completion order.
    let wave = cfg.max_in_flight.max(1);
    for (wave_start, window) in batches.chunks(wave).enumerate().map(|(w, c)| (w * wave, c)) {
        let outputs: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = window
                .iter()
                .map(|batch| {
                    let client = &client;
                    let token = token.as_deref();
                    scope.spawn(move || post_batch(client, endpoint, model, token, batch, cfg))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("embed worker panicked")).collect()
        });
        for (offset, out) in outputs.into_iter().enumerate() {
            results[wave_start + offset] = Some(out?);
        }
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
    for r in results {
        vectors.extend(r.expect("all batches resolved"));
    }
    let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
    if dim < 2 {
        return Err(EmbedError::TooNarrow(dim));
    }
    let mut rows = Array2::zeros((vectors.len(), dim));
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(EmbedError::DimensionMismatch { got: v.len(), expected: dim });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite { id: ids[i].clone() });
        }
        for (j, &x) in v.iter().enumerate() {
            rows[[i, j]] = T::from_f64_lossy(x);
        }
    }
    Ok((rows, model.to_string()))
}

fn post_batch(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    model: &str,
    token: Option<&str>,
    batch: &[&str],
    cfg: &ProviderConfig,
) -> Result<Vec<Vec<f64>>> {
    let attempts = cfg.max_retries + 1;
    let mut last_status = String::from("no response");
    let mut last_body = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let backoff = Duration::from_millis(250u64.saturating_mul(1 << (attempt - 1).min(5)));
            std::thread::sleep(backoff);
        }
        let mut req = client.post(endpoint).json(&EmbeddingsRequest { model, input: batch });
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let parsed: EmbeddingsResponse = resp
                        .json()
                        .map_err(|e| EmbedError::BadResponse(e.to_string()))?;
                    if parsed.data.len() != batch.len() {
                        return Err(EmbedError::BadResponse(format!(
                            "{} vectors for {} inputs",
                            parsed.data.len(),
                            batch.len()
                        )));
                    }
                    let mut data = parsed.data;
                    data.sort_by_key(|d| d.index);
                    return Ok(data.into_iter().map(|d| d.embedding).collect());
                }
                last_status = status.to_string();
                last_body = resp.text().unwrap_or_default();
                // 4xx other than 429 will not improve with retries
                if status.is_client_error() && status.as_u16() != 429 {
                    break;
                }
            }
            Err(e) => {
                last_status = "transport error".to_string();
                last_body = e.to_string();
            }
        }
    }
    Err(EmbedError::Http { attempts, status: last_status, body: last_body })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rows: usize,
    cols: usize,
    crc32: u32,
    model_tag: String,
    ids: Vec<String>,
}

/// Sidecar path for a matrix file (`embeddings.bin` -> `embeddings.json`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Persist matrix + id sidecar. Lossless for `f32` pipelines.
pub fn save_embeddings<T: Real>(matrix: &Embeddings<T>, path: &Path) -> Result<()> {
    let crc = matrix_io::write_matrix(path, matrix.rows.view())?;
    let sidecar = Sidecar {
        rows: matrix.n(),
        cols: matrix.dim(),
        crc32: crc,
        model_tag: matrix.model_tag.clone(),
        ids: matrix.ids.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Load matrix + sidecar, verifying the checksum pins the pair together.
pub fn load_embeddings<T: Real>(path: &Path) -> Result<Embeddings<T>> {
    let (rows, crc) = matrix_io::read_matrix::<T>(path)?;
    let sidecar_file = sidecar_path(path);
    let raw = std::fs::read_to_string(&sidecar_file)?;
    let sidecar: Sidecar =
        serde_json::from_str(&raw).map_err(|e| EmbedError::Sidecar(e.to_string()))?;
    if sidecar.crc32 != crc {
        return Err(EmbedError::Sidecar(format!(
            "sidecar crc {:#010x} does not match matrix crc {:#010x}",
            sidecar.crc32, crc
        )));
    }
    if sidecar.rows != rows.nrows() || sidecar.cols != rows.ncols() {
        return Err(EmbedError::Sidecar("sidecar shape does not match matrix".into()));
    }
    Embeddings::new(rows, sidecar.ids, sidecar.model_tag)
}
