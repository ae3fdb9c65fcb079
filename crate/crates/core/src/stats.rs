//! Field-level statistics, permutation significance testing and the
//! perturbation sweep harness.
//!
//! The null model permutes the regime labels globally (topic composition
//! fixed), rebuilds eligibility, centroids and vectors from scratch for
//! every permutation, and compares mean drift magnitudes. The reported
//! p-value is `(1 + #{null >= observed}) / (N + 1)`, so it is never zero.

use crate::cluster::{graph_from_projection, leiden, ClusterError, Partition};
use crate::corpus::{permute_assignment, RegimeAssignment};
use crate::embed::Embeddings;
use crate::field::{self, FieldError, PolarityField};
use crate::manifold::{fit_umap, ManifoldError, Metric, UmapParams};
use crate::num::{cosine_similarity, Real};
use ndarray::ArrayView2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no eligible polarity vectors")]
    NoEligibleVectors,
    #[error("need at least 2 usable (non-zero) vectors for pairwise cosine, found {0}")]
    TooFewForCosine(usize),
    #[error("permutation count must be >= 1")]
    ZeroPermutations,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("manifold: {0}")]
    Manifold(#[from] ManifoldError),
    #[error("cluster: {0}")]
    Cluster(#[from] ClusterError),
    #[error("table parse: {0}")]
    TableParse(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Mean drift magnitude over eligible vectors.
pub fn mean_magnitude<T: Real>(field: &PolarityField<T>) -> Result<f64> {
    let mags: Vec<f64> = field.eligible().map(|v| v.magnitude.as_f64()).collect();
    if mags.is_empty() {
        return Err(StatsError::NoEligibleVectors);
    }
    Ok(mags.iter().sum::<f64>() / mags.len() as f64)
}

/// Mean cosine similarity over unordered pairs of eligible vectors.
/// Zero-magnitude vectors cannot be normalized and are excluded with a
/// warning; fewer than two usable vectors is an error.
pub fn mean_pairwise_cosine<T: Real>(field: &PolarityField<T>) -> Result<f64> {
    let cosines = pairwise_cosines(field)?;
    Ok(cosines.iter().sum::<f64>() / cosines.len() as f64)
}

fn pairwise_cosines<T: Real>(field: &PolarityField<T>) -> Result<Vec<f64>> {
    let vectors: Vec<&Vec<T>> = field
        .eligible()
        .filter_map(|t| {
            if t.magnitude > T::zero() {
                t.v.as_ref()
            } else {
                log::warn!("topic {} has zero magnitude; excluded from cosine", t.topic);
                None
            }
        })
        .collect();
    if vectors.len() < 2 {
        return Err(StatsError::TooFewForCosine(vectors.len()));
    }
    let mut out = Vec::with_capacity(vectors.len() * (vectors.len() - 1) / 2);
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            out.push(cosine_similarity(vectors[i], vectors[j]).as_f64());
        }
    }
    Ok(out)
}

/// Summary triple used throughout the sweep tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMeanMax {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl MinMeanMax {
    fn over(values: &[f64]) -> Option<MinMeanMax> {
        if values.is_empty() {
            return None;
        }
        Some(MinMeanMax {
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Field-level statistics in the shape of the report tables: the mean drift
/// magnitude and mean pairwise cosine, plus min/mean/max spreads (magnitude
/// spread over vectors, cosine spread over pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub m_bar: f64,
    pub s_bar: Option<f64>,
    pub eligible: usize,
    pub magnitudes: Vec<f64>,
    pub magnitude_spread: MinMeanMax,
    pub cosine_spread: Option<MinMeanMax>,
}

/// Compute the full statistics block. Requires at least two eligible
/// vectors (the pairwise cosine is undefined below that).
pub fn field_stats<T: Real>(field: &PolarityField<T>) -> Result<FieldStats> {
    let magnitudes: Vec<f64> = field.eligible().map(|v| v.magnitude.as_f64()).collect();
    if magnitudes.len() < 2 {
        return Err(StatsError::TooFewForCosine(magnitudes.len()));
    }
    let m_bar = magnitudes.iter().sum::<f64>() / magnitudes.len() as f64;
    let cosines = pairwise_cosines(field)?;
    let s_bar = cosines.iter().sum::<f64>() / cosines.len() as f64;
    debug_assert!(m_bar >= 0.0);
    debug_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s_bar));
    Ok(FieldStats {
        m_bar,
        s_bar: Some(s_bar),
        eligible: magnitudes.len(),
        magnitude_spread: MinMeanMax::over(&magnitudes).expect("non-empty"),
        cosine_spread: MinMeanMax::over(&cosines),
        magnitudes,
    })
}

/// Observed-vs-null drift comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub observed_m_bar: f64,
    pub n_permutations: usize,
    pub null_m_bars: Vec<f64>,
    pub p_value: f64,
    pub seed: u64,
}

/// Permutation significance test. For each of `n_permutations` derived
/// seeds, the regime labels are globally permuted, eligibility recomputed,
/// and the mean drift magnitude recorded; a permutation that starves every
/// topic contributes 0 with a warning. Deterministic for a fixed seed and
/// order-independent (iterations carry their own derived seeds).
pub fn permutation_test<T: Real>(
    u: ArrayView2<'_, T>,
    partition: &Partition,
    ids: &[String],
    assignment: &RegimeAssignment,
    tau: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationReport> {
    if n_permutations == 0 {
        return Err(StatsError::ZeroPermutations);
    }
    let observed_field = field::build_field(partition, ids, assignment, u, tau)?;
    let observed_m_bar = mean_magnitude(&observed_field)?;

    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let iter_seeds: Vec<u64> = (0..n_permutations).map(|_| seeder.next_u64()).collect();

    let null_m_bars: Vec<f64> = iter_seeds
        .par_iter()
        .map(|&iter_seed| {
            let permuted = permute_assignment(assignment, iter_seed);
            let mags = field::eligible_magnitudes(partition, permuted.regimes(), u, tau);
            if mags.is_empty() {
                log::warn!("permutation starved every topic; null m_bar recorded as 0");
                0.0
            } else {
                mags.iter().map(|m| m.as_f64()).sum::<f64>() / mags.len() as f64
            }
        })
        .collect();

    let exceed = null_m_bars.iter().filter(|&&m| m >= observed_m_bar).count();
    let p_value = (1 + exceed) as f64 / (n_permutations + 1) as f64;
    Ok(PermutationReport {
        observed_m_bar,
        n_permutations,
        null_m_bars,
        p_value,
        seed,
    })
}

/// One (d, k, r) cell of the perturbation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub k: usize,
    pub r: f64,
}

/// The grid used by the perturbation harness: the default setup plus one
/// deviation per knob (higher d, larger neighborhoods, coarser resolution).
pub fn default_sweep_grid() -> Vec<SweepConfig> {
    vec![
        SweepConfig { d: 50, k: 100, r: 1.5 },
        SweepConfig { d: 75, k: 100, r: 1.5 },
        SweepConfig { d: 50, k: 150, r: 1.5 },
        SweepConfig { d: 50, k: 100, r: 1.0 },
    ]
}

/// Random-baseline rows: spreads of the per-permutation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomRows {
    pub n_permutations: usize,
    pub m_bar: MinMeanMax,
    pub s_bar: Option<MinMeanMax>,
    /// Permutations whose pairwise cosine was undefined (starved topics).
    pub undefined_s: usize,
}

/// One grid cell outcome; failures are recorded, not propagated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub config: SweepConfig,
    pub observed: Option<FieldStats>,
    pub random: Option<RandomRows>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub seed: u64,
}

/// Shared knobs for every sweep configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOptions {
    pub tau: usize,
    pub n_permutations: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub metric: Metric,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tau: 3,
            n_permutations: 1000,
            min_dist: 0.1,
            n_epochs: 200,
            metric: Metric::Cosine,
        }
    }
}

/// Full refit / recluster / refield per configuration, with an observed row
/// and a random-baseline row each. Configurations run in parallel; each is
/// internally deterministic under the shared seed.
pub fn robustness_sweep<T: Real>(
    embeddings: &Embeddings<T>,
    assignment: &RegimeAssignment,
    grid: &[SweepConfig],
    options: &SweepOptions,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(StatsError::EmptyGrid);
    }
    let entries: Vec<SweepEntry> = grid
        .par_iter()
        .map(|&config| match sweep_one(embeddings, assignment, config, options, seed) {
            Ok((observed, random)) => SweepEntry {
                config,
                observed: Some(observed),
                random: Some(random),
                error: None,
            },
            Err(e) => SweepEntry { config, observed: None, random: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(SweepResult { entries, seed })
}

fn sweep_one<T: Real>(
    embeddings: &Embeddings<T>,
    assignment: &RegimeAssignment,
    config: SweepConfig,
    options: &SweepOptions,
    seed: u64,
) -> Result<(FieldStats, RandomRows)> {
    let params = UmapParams {
        n_neighbors: config.k,
        out_dims: config.d,
        min_dist: options.min_dist,
        n_epochs: options.n_epochs,
        metric: options.metric,
        ..UmapParams::default()
    };
    let projection = fit_umap(embeddings, &params, seed)?;
    let graph = graph_from_projection(projection.coords().view(), config.k)?;
    let partition = leiden(&graph, config.r, seed)?;

    let ids = embeddings.ids();
    let u = projection.coords().view();
    let observed_field = field::build_field(&partition, ids, assignment, u, options.tau)?;
    let observed = field_stats(&observed_field)?;

    let mut seeder = ChaCha8Rng::seed_from_u64(seed ^ 0xa076_1d64_78bd_642f);
    let iter_seeds: Vec<u64> = (0..options.n_permutations).map(|_| seeder.next_u64()).collect();
    let per_perm: Vec<(f64, Option<f64>)> = iter_seeds
        .iter()
        .map(|&iter_seed| {
            let permuted = permute_assignment(assignment, iter_seed);
            let vectors = field::displacements(&partition, permuted.regimes(), u, options.tau);
            let kept: Vec<Vec<T>> = vectors.into_iter().flatten().collect();
            let mags: Vec<f64> =
                kept.iter().map(|v| crate::num::l2_norm(v).as_f64()).collect();
            let m_bar = if mags.is_empty() {
                0.0
            } else {
                mags.iter().sum::<f64>() / mags.len() as f64
            };
            let usable: Vec<&Vec<T>> =
                kept.iter().filter(|v| crate::num::l2_norm(v) > T::zero()).collect();
            let s_bar = if usable.len() < 2 {
                None
            } else {
                let mut acc = 0.0;
                let mut count = 0usize;
                for i in 0..usable.len() {
                    for j in (i + 1)..usable.len() {
                        acc += cosine_similarity(usable[i], usable[j]).as_f64();
                        count += 1;
                    }
                }
                Some(acc / count as f64)
            };
            (m_bar, s_bar)
        })
        .collect();

    let m_bars: Vec<f64> = per_perm.iter().map(|&(m, _)| m).collect();
    let s_bars: Vec<f64> = per_perm.iter().filter_map(|&(_, s)| s).collect();
    let random = RandomRows {
        n_permutations: options.n_permutations,
        m_bar: MinMeanMax::over(&m_bars).expect("n_permutations >= 1"),
        s_bar: MinMeanMax::over(&s_bars),
        undefined_s: options.n_permutations - s_bars.len(),
    };
    Ok((observed, random))
}

const TABLE_COLS: [&str; 6] = ["m_min", "m_mean", "m_max", "s_min", "s_mean", "s_max"];

/// Render the sweep as an aligned plain-text table: one block per
/// configuration, an observed row and a random row each, six statistic
/// columns. The output parses back via [`parse_sweep_table`].
pub fn render_sweep_table(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}\n",
        "CB", TABLE_COLS[0], TABLE_COLS[1], TABLE_COLS[2], TABLE_COLS[3], TABLE_COLS[4], TABLE_COLS[5]
    ));
    for entry in &result.entries {
        out.push_str(&format!(
            "# config d={} k={} r={}\n",
            entry.config.d, entry.config.k, entry.config.r
        ));
        match (&entry.observed, &entry.random) {
            (Some(observed), Some(random)) => {
                let s = observed.cosine_spread.unwrap_or(MinMeanMax {
                    min: f64::NAN,
                    mean: f64::NAN,
                    max: f64::NAN,
                });
                out.push_str(&render_row("Observed", &observed.magnitude_spread, &s));
                let rs = random.s_bar.unwrap_or(MinMeanMax {
                    min: f64::NAN,
                    mean: f64::NAN,
                    max: f64::NAN,
                });
                out.push_str(&render_row("Random", &random.m_bar, &rs));
            }
            _ => {
                out.push_str(&format!(
                    "! failed: {}\n",
                    entry.error.as_deref().unwrap_or("unknown error")
                ));
            }
        }
    }
    out
}

fn render_row(label: &str, m: &MinMeanMax, s: &MinMeanMax) -> String {
    format!(
        "{:<10}{:>12.6}{:>12.6}{:>12.6}{:>12.6}{:>12.6}{:>12.6}\n",
        label, m.min, m.mean, m.max, s.min, s.mean, s.max
    )
}

/// Parsed-back view of one rendered block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSweepBlock {
    pub config: SweepConfig,
    pub observed_m: MinMeanMax,
    pub observed_s: Option<MinMeanMax>,
    pub random_m: MinMeanMax,
    pub random_s: Option<MinMeanMax>,
}

/// Parse the plain-text sweep table back into per-config summaries.
pub fn parse_sweep_table(text: &str) -> Result<Vec<ParsedSweepBlock>> {
    let mut blocks = Vec::new();
    let mut config: Option<SweepConfig> = None;
    let mut observed: Option<(MinMeanMax, Option<MinMeanMax>)> = None;
    let bad = |msg: &str| StatsError::TableParse(msg.to_string());

    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with("CB") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# config ") {
            config = Some(parse_config(rest)?);
            observed = None;
            continue;
        }
        if line.starts_with('!') {
            config = None;
            continue;
        }
        let mut parts = line.split_whitespace();
        let label = parts.next().ok_or_else(|| bad("missing row label"))?;
        let nums: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|e| bad(&format!("bad number {p}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 6 {
            return Err(bad(&format!("expected 6 columns, got {}", nums.len())));
        }
        let m = MinMeanMax { min: nums[0], mean: nums[1], max: nums[2] };
        let s = if nums[3].is_nan() {
            None
        } else {
            Some(MinMeanMax { min: nums[3], mean: nums[4], max: nums[5] })
        };
        match label {
            "Observed" => observed = Some((m, s)),
            "Random" => {
                let cfg = config.ok_or_else(|| bad("Random row before config header"))?;
                let (om, os) =
                    observed.take().ok_or_else(|| bad("Random row before Observed row"))?;
                blocks.push(ParsedSweepBlock {
                    config: cfg,
                    observed_m: om,
                    observed_s: os,
                    random_m: m,
                    random_s: s,
                });
            }
            other => return Err(bad(&format!("unknown row label {other}"))),
        }
    }
    Ok(blocks)
}

fn parse_config(rest: &str) -> Result<SweepConfig> {
    let mut d = None;
    let mut k = None;
    let mut r = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("d=") {
            d = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("k=") {
            k = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("r=") {
            r = v.parse().ok();
        }
    }
    match (d, k, r) {
        (Some(d), Some(k), Some(r)) => Ok(SweepConfig { d, k, r }),
        _ => Err(StatsError::TableParse(format!("bad config line: {rest}"))),
    }
}
