//! Contrastive explanation of polarity vectors.
//!
//! For an eligible topic, the documents nearest to each regime centroid are
//! assembled into a two-section prompt; the model labels each dimension of
//! change with verbatim evidence, keywords and a coverage estimate. The
//! supporting/contradicting ratio is recomputed locally and attached as a
//! reliability score. Coverage numbers are model-asserted estimates over the
//! provided neighborhoods, not recomputed.

pub mod client;
pub mod prompt;

pub use client::{ChatClient, ChatMessage, HttpChatClient, ScriptedClient};

use crate::corpus::Corpus;
use crate::field::{CentroidPair, TopicCluster};
use crate::num::{sq_euclidean, Real};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("topic {0} is not eligible (one regime side is empty)")]
    IneligibleTopic(usize),
    #[error("neighborhood size n must be >= 1")]
    ZeroNeighborhood,
    #[error("document row {0} out of range for the corpus")]
    RowOutOfRange(usize),
    #[error("config invalid: {0}")]
    Config(String),
    #[error("auth env var \"{0}\" is not set")]
    Auth(String),
    #[error("chat request failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("chat response malformed: {0}")]
    BadResponse(String),
    #[error("response did not match the output schema after reprompt; raw response: {raw}")]
    SchemaInvalid { raw: String },
}

pub type Result<T> = std::result::Result<T, ExplainError>;

/// Explainer endpoint and prompt-budget knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub auth_env: Option<String>,
    /// Documents taken per regime side.
    pub n: usize,
    /// Per-document token budget before tail truncation.
    pub max_doc_tokens: usize,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            max_output_tokens: 4096,
            timeout_secs: 120,
            max_retries: 2,
            auth_env: None,
            n: 25,
            max_doc_tokens: 2000,
        }
    }
}

/// One document in a centroid neighborhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborDoc {
    pub id: String,
    pub text: String,
    pub distance: f64,
}

/// The two centroid neighborhoods of a topic, nearest-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodPair {
    pub topic: usize,
    pub n: usize,
    pub docs_a: Vec<NeighborDoc>,
    pub docs_b: Vec<NeighborDoc>,
}

/// One contrastively labeled axis of change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityDimension {
    pub label_a: String,
    pub label_b: String,
    pub coverage_a: f64,
    pub coverage_b: f64,
    pub supporting: Vec<String>,
    pub contradicting: Vec<String>,
    pub keywords_a: Vec<String>,
    pub keywords_b: Vec<String>,
    pub reliability: f64,
}

/// Supporting-to-contradicting sentence ratio, floored denominator.
pub fn reliability(supporting: usize, contradicting: usize) -> f64 {
    supporting as f64 / contradicting.max(1) as f64
}

/// Full explanation artifact for one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub topic: usize,
    pub dimensions: Vec<PolarityDimension>,
    pub prompt_hash: String,
    pub model_tag: String,
    pub truncation_flags: Vec<String>,
}

/// Select the `n` nearest documents to each regime centroid, drawn only
/// from that topic's regime-side members, Euclidean nearest-first.
pub fn select_neighborhoods<T: Real>(
    cluster: &TopicCluster,
    u: ArrayView2<'_, T>,
    corpus: &Corpus,
    centroids: &CentroidPair<T>,
    n: usize,
) -> Result<NeighborhoodPair> {
    if n == 0 {
        return Err(ExplainError::ZeroNeighborhood);
    }
    if cluster.members_a.is_empty() || cluster.members_b.is_empty() {
        return Err(ExplainError::IneligibleTopic(cluster.topic));
    }
    let side = |rows: &[usize], centroid: &[T]| -> Result<Vec<NeighborDoc>> {
        let mut scored: Vec<(usize, f64)> = rows
            .iter()
            .map(|&row| {
                let coords = u.row(row);
                let d = sq_euclidean(coords.to_slice().expect("contiguous"), centroid);
                (row, d.as_f64().sqrt())
            })
            .collect();
        scored.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(n)
            .map(|(row, distance)| {
                let doc = corpus
                    .documents()
                    .get(row)
                    .ok_or(ExplainError::RowOutOfRange(row))?;
                Ok(NeighborDoc { id: doc.id.clone(), text: doc.text.clone(), distance })
            })
            .collect()
    };
    Ok(NeighborhoodPair {
        topic: cluster.topic,
        n,
        docs_a: side(&cluster.members_a, &centroids.mu_a)?,
        docs_b: side(&cluster.members_b, &centroids.mu_b)?,
    })
}

#[derive(Deserialize)]
struct RawDimension {
    label_a: String,
    label_b: String,
    coverage_a: f64,
    coverage_b: f64,
    #[serde(default)]
    supporting: Vec<String>,
    #[serde(default)]
    contradicting: Vec<String>,
    #[serde(default)]
    keywords_a: Vec<String>,
    #[serde(default)]
    keywords_b: Vec<String>,
}

/// Parse and validate the model output. Dimensions with empty labels are
/// dropped; an empty array is a valid no-signal result.
fn parse_dimensions(raw: &str) -> std::result::Result<Vec<PolarityDimension>, String> {
    let parsed: Vec<RawDimension> =
        serde_json::from_str(raw.trim()).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(parsed.len());
    for dim in parsed {
        if !(0.0..=1.0).contains(&dim.coverage_a) || !(0.0..=1.0).contains(&dim.coverage_b) {
            return Err(format!(
                "coverage out of [0,1]: ({}, {})",
                dim.coverage_a, dim.coverage_b
            ));
        }
        if dim.label_a.trim().is_empty() || dim.label_b.trim().is_empty() {
            log::warn!("dropping dimension with empty pole label");
            continue;
        }
        let rel = reliability(dim.supporting.len(), dim.contradicting.len());
        out.push(PolarityDimension {
            label_a: dim.label_a,
            label_b: dim.label_b,
            coverage_a: dim.coverage_a,
            coverage_b: dim.coverage_b,
            supporting: dim.supporting,
            contradicting: dim.contradicting,
            keywords_a: dim.keywords_a,
            keywords_b: dim.keywords_b,
            reliability: rel,
        });
    }
    Ok(out)
}

/// Ask the model to label the polarity dimensions of one topic. A response
/// that fails the output schema triggers exactly one corrective reprompt;
/// a second failure surfaces the raw response for audit.
pub fn explain_vector(
    pair: &NeighborhoodPair,
    cfg: &ExplainerConfig,
    chat: &dyn ChatClient,
) -> Result<Explanation> {
    if pair.docs_a.is_empty() || pair.docs_b.is_empty() {
        return Err(ExplainError::IneligibleTopic(pair.topic));
    }
    let (system, user, truncation_flags) = prompt::build_prompt(pair, cfg);
    let hash = prompt::prompt_hash(&system, &user);
    let mut messages =
        vec![ChatMessage::system(system.clone()), ChatMessage::user(user.clone())];

    let first = chat.complete(&messages, cfg)?;
    let dimensions = match parse_dimensions(&first) {
        Ok(dims) => dims,
        Err(parse_err) => {
            log::warn!("schema-invalid response for topic {} ({parse_err}); reprompting", pair.topic);
            messages.push(ChatMessage { role: "assistant".into(), content: first });
            messages.push(ChatMessage::user(format!(
                "The previous response was not valid: {parse_err}. \
                 Respond again with ONLY the JSON array described in the instructions."
            )));
            let second = chat.complete(&messages, cfg)?;
            parse_dimensions(&second)
                .map_err(|_| ExplainError::SchemaInvalid { raw: second })?
        }
    };
    Ok(Explanation {
        topic: pair.topic,
        dimensions,
        prompt_hash: hash,
        model_tag: cfg.model.clone(),
        truncation_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_dimension_json() -> String {
        serde_json::json!([
            {
                "label_a": "complaints about breakage",
                "label_b": "praise for durability",
                "coverage_a": 0.8,
                "coverage_b": 0.6,
                "supporting": ["It broke in a week.", "Still going strong after a year.", "Snapped on day two.", "Feels indestructible.", "The hinge failed.", "Survived two drops."],
                "contradicting": ["One unit arrived already broken.", "Mine cracked eventually."],
                "keywords_a": ["broke", "failed"],
                "keywords_b": ["sturdy", "durable"]
            },
            {
                "label_a": "informal tone",
                "label_b": "formal tone",
                "coverage_a": 0.4,
                "coverage_b": 0.5,
                "supporting": ["omg this thing rocks", "We hereby confirm satisfactory performance."],
                "contradicting": [],
                "keywords_a": ["omg"],
                "keywords_b": ["hereby"]
            }
        ])
        .to_string()
    }

    #[test]
    fn reliability_examples() {
        assert_eq!(reliability(6, 2), 3.0);
        assert_eq!(reliability(0, 0), 0.0);
        assert_eq!(reliability(4, 0), 4.0);
    }

    #[test]
    fn canned_two_dimension_response_parses() {
        let dims = parse_dimensions(&two_dimension_json()).unwrap();
        assert_eq!(dims.len(), 2);
        assert_eq!(dims[0].reliability, 3.0);
        assert_eq!(dims[1].reliability, 2.0);
        assert_eq!(dims[0].label_b, "praise for durability");
    }

    #[test]
    fn empty_array_is_valid_no_signal() {
        assert_eq!(parse_dimensions("[]").unwrap(), vec![]);
        assert_eq!(parse_dimensions("  []  ").unwrap(), vec![]);
    }

    #[test]
    fn empty_labels_are_dropped() {
        let raw = serde_json::json!([{
            "label_a": "  ",
            "label_b": "something",
            "coverage_a": 0.5,
            "coverage_b": 0.5,
            "supporting": [],
            "contradicting": [],
            "keywords_a": [],
            "keywords_b": []
        }])
        .to_string();
        assert_eq!(parse_dimensions(&raw).unwrap().len(), 0);
    }

    #[test]
    fn out_of_range_coverage_is_schema_invalid() {
        let raw = serde_json::json!([{
            "label_a": "a",
            "label_b": "b",
            "coverage_a": 1.5,
            "coverage_b": 0.5,
            "supporting": [],
            "contradicting": [],
            "keywords_a": [],
            "keywords_b": []
        }])
        .to_string();
        assert!(parse_dimensions(&raw).is_err());
    }
}
