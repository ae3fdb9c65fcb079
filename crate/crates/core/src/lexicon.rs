//! Sentiment-centric benchmark: normalized classifier sentiment scores and
//! lexicon-anchored valence/arousal/dominance (VAD) displacement per topic.
//!
//! Lexicon terms are embedded as bare terms, projected through the fitted
//! layout, clustered into term communities, and each polarity endpoint is
//! assigned to its most cosine-similar community centroid. The VAD shift of
//! a topic is the difference of mean VAD between the communities of its two
//! endpoints.

use crate::cluster::{graph_from_projection, leiden, ClusterError, Partition};
use crate::corpus::{Regime, RegimeAssignment};
use crate::embed::{embed_texts_lossy, EmbedError, ProviderConfig};
use crate::field::PolarityField;
use crate::manifold::{ManifoldError, Projection};
use crate::num::{cosine_similarity, l2_norm, Real};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate lexicon term \"{0}\"")]
    DuplicateTerm(String),
    #[error("lexicon is empty")]
    Empty,
    #[error("probability record {record}: {message}")]
    Probability { record: usize, message: String },
    #[error("class probabilities must be non-negative and sum to > 0")]
    DegenerateProbabilities,
    #[error("document \"{0}\" has no sentiment probabilities")]
    MissingScore(String),
    #[error("regime {0} is empty")]
    EmptyRegime(Regime),
    #[error("embedding: {0}")]
    Embed(#[from] EmbedError),
    #[error("manifold: {0}")]
    Manifold(#[from] ManifoldError),
    #[error("cluster: {0}")]
    Cluster(#[from] ClusterError),
    #[error("need at least {needed} projected terms, got {got}")]
    TooFewTerms { needed: usize, got: usize },
    #[error("no communities to assign endpoints to")]
    NoCommunities,
    #[error("cannot assign a zero vector endpoint by cosine similarity")]
    ZeroEndpoint,
    #[error("topic {0} carries no vector (ineligible)")]
    IneligibleTopic(usize),
}

pub type Result<T> = std::result::Result<T, LexiconError>;

/// Term -> (valence, arousal, dominance) lookup.
#[derive(Debug, Clone)]
pub struct VadLexicon {
    entries: Vec<(String, [f64; 3])>,
    index: HashMap<String, usize>,
    value_range: (f64, f64),
}

impl VadLexicon {
    pub fn from_entries(entries: Vec<(String, [f64; 3])>) -> Result<VadLexicon> {
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut normalized = Vec::with_capacity(entries.len());
        for (term, vad) in entries {
            let term = term.trim().to_lowercase();
            if vad.iter().any(|v| !v.is_finite()) {
                return Err(LexiconError::Parse {
                    line: 0,
                    message: format!("non-finite VAD for term {term}"),
                });
            }
            if index.insert(term.clone(), normalized.len()).is_some() {
                return Err(LexiconError::DuplicateTerm(term));
            }
            for &v in &vad {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            normalized.push((term, vad));
        }
        Ok(VadLexicon { entries: normalized, index, value_range: (lo, hi) })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn vad(&self, term: &str) -> Option<[f64; 3]> {
        self.index.get(term).map(|&i| self.entries[i].1)
    }

    /// Inferred (min, max) across all stored values; values are taken from
    /// the file as-is, never rescaled.
    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }
}

/// Load a TSV lexicon: `term<TAB>valence<TAB>arousal<TAB>dominance`, with an
/// optional header line. Terms are lowercased; duplicates are rejected.
pub fn load_lexicon(path: &Path) -> Result<VadLexicon> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(LexiconError::Parse {
                line: lineno,
                message: format!("expected 4 tab-separated columns, got {}", cols.len()),
            });
        }
        let nums: std::result::Result<Vec<f64>, _> =
            cols[1..4].iter().map(|c| c.trim().parse::<f64>()).collect();
        match nums {
            Ok(values) => {
                entries.push((cols[0].to_string(), [values[0], values[1], values[2]]))
            }
            Err(e) => {
                if lineno == 1 {
                    continue; // header line
                }
                return Err(LexiconError::Parse { line: lineno, message: e.to_string() });
            }
        }
    }
    VadLexicon::from_entries(entries)
}

/// Per-document classifier probabilities `(p_pos, p_neu, p_neg)`.
#[derive(Debug, Clone, Default)]
pub struct ClassProbabilities {
    map: HashMap<String, [f64; 3]>,
}

impl ClassProbabilities {
    pub fn insert(&mut self, id: String, p: [f64; 3]) -> Result<()> {
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) || p.iter().sum::<f64>() <= 0.0 {
            return Err(LexiconError::DegenerateProbabilities);
        }
        self.map.insert(id, p);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<[f64; 3]> {
        self.map.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Deserialize)]
struct ProbRecord {
    id: String,
    p_pos: f64,
    p_neu: f64,
    p_neg: f64,
}

/// Load `{"id", "p_pos", "p_neu", "p_neg"}` JSONL.
pub fn load_probabilities(path: &Path) -> Result<ClassProbabilities> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = ClassProbabilities::default();
    for (i, line) in reader.lines().enumerate() {
        let record = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ProbRecord = serde_json::from_str(&line)
            .map_err(|e| LexiconError::Probability { record, message: e.to_string() })?;
        out.insert(parsed.id, [parsed.p_pos, parsed.p_neu, parsed.p_neg])
            .map_err(|_| LexiconError::Probability {
                record,
                message: "probabilities must be non-negative with positive sum".into(),
            })?;
    }
    Ok(out)
}

/// Normalized class-probability difference in `[-1, 1]`:
/// `(p_pos - p_neg) / (p_pos + p_neu + p_neg)`.
pub fn sentiment_score(p: [f64; 3]) -> Result<f64> {
    let sum = p[0] + p[1] + p[2];
    if p.iter().any(|&v| v < 0.0) || sum <= 0.0 {
        return Err(LexiconError::DegenerateProbabilities);
    }
    Ok((p[0] - p[2]) / sum)
}

/// Per-topic sentiment gap; `None` when a topic misses one regime side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicGap {
    pub topic: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub gap: Option<f64>,
}

/// Regime-level sentiment comparison: `mean(B) - mean(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub gap: f64,
    pub per_topic: Option<Vec<TopicGap>>,
}

/// Global (and optionally per-topic) sentiment gap across the boundary.
pub fn regime_sentiment_gap(
    scores: &ClassProbabilities,
    assignment: &RegimeAssignment,
    partition: Option<&Partition>,
) -> Result<GapReport> {
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    let mut sentiments = Vec::with_capacity(assignment.len());
    for (id, &regime) in assignment.ids().iter().zip(assignment.regimes()) {
        let p = scores.get(id).ok_or_else(|| LexiconError::MissingScore(id.clone()))?;
        let s = sentiment_score(p)?;
        sentiments.push((regime, s));
        match regime {
            Regime::A => sum_a += s,
            Regime::B => sum_b += s,
        }
    }
    let (n_a, n_b) = (assignment.n_a(), assignment.n_b());
    if n_a == 0 {
        return Err(LexiconError::EmptyRegime(Regime::A));
    }
    if n_b == 0 {
        return Err(LexiconError::EmptyRegime(Regime::B));
    }
    let mean_a = sum_a / n_a as f64;
    let mean_b = sum_b / n_b as f64;

    let per_topic = partition.map(|partition| {
        let mut acc: Vec<(f64, usize, f64, usize)> = vec![(0.0, 0, 0.0, 0); partition.k()];
        for (row, &(regime, s)) in sentiments.iter().enumerate() {
            let c = partition.community_of(row);
            match regime {
                Regime::A => {
                    acc[c].0 += s;
                    acc[c].1 += 1;
                }
                Regime::B => {
                    acc[c].2 += s;
                    acc[c].3 += 1;
                }
            }
        }
        acc.into_iter()
            .enumerate()
            .map(|(topic, (sa, na, sb, nb))| TopicGap {
                topic,
                n_a: na,
                n_b: nb,
                gap: if na > 0 && nb > 0 {
                    Some(sb / nb as f64 - sa / na as f64)
                } else {
                    None
                },
            })
            .collect()
    });

    Ok(GapReport { mean_a, mean_b, gap: mean_b - mean_a, per_topic })
}

/// Lexicon terms placed into the discourse layout.
#[derive(Debug, Clone)]
pub struct ProjectedLexicon<T: Real> {
    pub terms: Vec<String>,
    pub coords: Array2<T>,
    pub skipped: usize,
}

/// Embed each term as bare text and transform it through the fitted
/// projection. Terms whose embedding fails are skipped with a warning.
pub fn project_lexicon<T: Real>(
    lexicon: &VadLexicon,
    provider: &ProviderConfig,
    model: &Projection<T>,
) -> Result<ProjectedLexicon<T>> {
    if lexicon.is_empty() {
        return Ok(ProjectedLexicon {
            terms: Vec::new(),
            coords: Array2::zeros((0, model.dims())),
            skipped: 0,
        });
    }
    let ids: Vec<String> = lexicon.terms().map(str::to_string).collect();
    let texts: Vec<&str> = lexicon.terms().collect();
    let (embedded, skipped) = embed_texts_lossy::<T>(&ids, &texts, provider)?;
    if skipped.len() > 0 {
        log::warn!("{} lexicon terms skipped during embedding", skipped.len());
    }
    let coords = model.transform(embedded.rows().view())?;
    Ok(ProjectedLexicon {
        terms: embedded.ids().to_vec(),
        coords,
        skipped: skipped.len(),
    })
}

/// A community of lexicon terms with its layout centroid and mean VAD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VadCommunity<T: Real> {
    pub id: usize,
    pub terms: Vec<String>,
    pub centroid: Vec<T>,
    pub mean_vad: [f64; 3],
}

/// Leiden over the projected terms; per community, the coordinate centroid
/// and the arithmetic mean of member VAD triples.
pub fn cluster_lexicon<T: Real>(
    projected: &ProjectedLexicon<T>,
    lexicon: &VadLexicon,
    k_graph: usize,
    resolution: f64,
    seed: u64,
) -> Result<Vec<VadCommunity<T>>> {
    let n = projected.terms.len();
    if n < 2 {
        if n == 1 {
            // single term: one singleton community
            let term = projected.terms[0].clone();
            let vad = lexicon.vad(&term).unwrap_or([0.0; 3]);
            return Ok(vec![VadCommunity {
                id: 0,
                terms: vec![term],
                centroid: projected.coords.row(0).to_vec(),
                mean_vad: vad,
            }]);
        }
        return Err(LexiconError::TooFewTerms { needed: 2, got: n });
    }
    let graph = graph_from_projection(projected.coords.view(), k_graph.min(n - 1))?;
    let partition = leiden(&graph, resolution, seed)?;
    let mut communities = Vec::with_capacity(partition.k());
    for (id, members) in partition.communities().into_iter().enumerate() {
        let mut centroid = vec![T::zero(); projected.coords.ncols()];
        let mut vad = [0.0f64; 3];
        let mut terms = Vec::with_capacity(members.len());
        for &row in &members {
            for (acc, &x) in centroid.iter_mut().zip(projected.coords.row(row)) {
                *acc += x;
            }
            let term = &projected.terms[row];
            let tv = lexicon.vad(term).unwrap_or([0.0; 3]);
            for (a, v) in vad.iter_mut().zip(tv) {
                *a += v;
            }
            terms.push(term.clone());
        }
        let count = T::from_f64_lossy(members.len() as f64);
        centroid.iter_mut().for_each(|x| *x /= count);
        vad.iter_mut().for_each(|v| *v /= members.len() as f64);
        communities.push(VadCommunity { id, terms, centroid, mean_vad: vad });
    }
    Ok(communities)
}

/// Community whose centroid is most cosine-similar to the endpoint.
/// Ties resolve to the lower community id; a zero endpoint is an error.
pub fn assign_endpoint<T: Real>(
    endpoint: &[T],
    communities: &[VadCommunity<T>],
) -> Result<usize> {
    if communities.is_empty() {
        return Err(LexiconError::NoCommunities);
    }
    if l2_norm(endpoint) == T::zero() {
        return Err(LexiconError::ZeroEndpoint);
    }
    let mut best = 0usize;
    let mut best_sim = f64::NEG_INFINITY;
    for community in communities {
        let sim = cosine_similarity(endpoint, &community.centroid).as_f64();
        if sim > best_sim {
            best_sim = sim;
            best = community.id;
        }
    }
    Ok(best)
}

/// Per-topic displacement in VAD space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadShift {
    pub topic: usize,
    pub dv: f64,
    pub da: f64,
    pub dd: f64,
    pub community_a: usize,
    pub community_b: usize,
}

/// For every eligible topic, assign both centroid endpoints to their VAD
/// communities and subtract the community mean VADs (`B` minus `A`).
pub fn vad_shift<T: Real>(
    field: &PolarityField<T>,
    communities: &[VadCommunity<T>],
) -> Result<Vec<VadShift>> {
    let by_id: HashMap<usize, &VadCommunity<T>> =
        communities.iter().map(|c| (c.id, c)).collect();
    let mut shifts = Vec::new();
    for topic in field.eligible() {
        let mu_a = topic.mu_a.as_ref().ok_or(LexiconError::IneligibleTopic(topic.topic))?;
        let mu_b = topic.mu_b.as_ref().ok_or(LexiconError::IneligibleTopic(topic.topic))?;
        let ca = assign_endpoint(mu_a, communities)?;
        let cb = assign_endpoint(mu_b, communities)?;
        let va = by_id[&ca].mean_vad;
        let vb = by_id[&cb].mean_vad;
        shifts.push(VadShift {
            topic: topic.topic,
            dv: vb[0] - va[0],
            da: vb[1] - va[1],
            dd: vb[2] - va[2],
            community_a: ca,
            community_b: cb,
        });
    }
    Ok(shifts)
}
