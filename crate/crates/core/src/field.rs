//! Polarity field construction: per-topic regime centroids and their
//! displacement vectors.
//!
//! Topics whose per-regime document counts fall below the eligibility
//! threshold stay visible in the field (flagged ineligible, zero magnitude)
//! rather than disappearing, so an operator can see exactly which topics a
//! boundary starves.

use crate::cluster::Partition;
use crate::corpus::{Regime, RegimeAssignment};
use crate::num::{l2_norm, Real};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("partition covers {partition} nodes but {ids} ids were supplied")]
    PartitionIdMismatch { partition: usize, ids: usize },
    #[error("assignment covers {assignment} documents but {ids} ids were supplied")]
    AssignmentIdMismatch { assignment: usize, ids: usize },
    #[error("id \"{0}\" missing from the regime assignment")]
    UnknownId(String),
    #[error("coordinate matrix has {rows} rows for {ids} documents")]
    CoordinateMismatch { rows: usize, ids: usize },
    #[error("cannot compute centroids: regime {0} side of the topic is empty")]
    EmptySide(Regime),
    #[error(
        "no topic is eligible at threshold tau={tau}: every community has a \
         regime side below the threshold; revise the boundary or lower tau"
    )]
    NoEligibleTopics { tau: usize },
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// A topic community split into its regime sides (row indices into U).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicCluster {
    pub topic: usize,
    pub members_a: Vec<usize>,
    pub members_b: Vec<usize>,
}

impl TopicCluster {
    pub fn n_a(&self) -> usize {
        self.members_a.len()
    }

    pub fn n_b(&self) -> usize {
        self.members_b.len()
    }

    pub fn len(&self) -> usize {
        self.n_a() + self.n_b()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Arithmetic means of the two regime sides of a topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CentroidPair<T: Real> {
    pub mu_a: Vec<T>,
    pub mu_b: Vec<T>,
}

/// Per-topic displacement across the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PolarityVector<T: Real> {
    #[serde(rename = "id")]
    pub topic: usize,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_B")]
    pub n_b: usize,
    pub eligible: bool,
    #[serde(rename = "mu_A")]
    pub mu_a: Option<Vec<T>>,
    #[serde(rename = "mu_B")]
    pub mu_b: Option<Vec<T>>,
    pub v: Option<Vec<T>>,
    pub magnitude: T,
}

/// Boundary provenance carried along with the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeta {
    pub description: String,
    #[serde(rename = "n_A")]
    pub n_a: usize,
    #[serde(rename = "n_B")]
    pub n_b: usize,
}

/// All polarity vectors rooted at a common origin, one per topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PolarityField<T: Real> {
    pub d: usize,
    pub boundary: BoundaryMeta,
    pub topics: Vec<PolarityVector<T>>,
}

impl<T: Real> PolarityField<T> {
    pub fn eligible(&self) -> impl Iterator<Item = &PolarityVector<T>> {
        self.topics.iter().filter(|v| v.eligible)
    }

    pub fn eligible_count(&self) -> usize {
        self.eligible().count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field serializes")
    }

    pub fn from_json(raw: &str) -> serde_json::Result<Self> {
        serde_json::from_str(raw)
    }
}

/// Split every community into its regime sides with exact counts.
pub fn split_clusters(
    partition: &Partition,
    ids: &[String],
    assignment: &RegimeAssignment,
) -> Result<Vec<TopicCluster>> {
    let regimes = regimes_for_ids(ids, assignment)?;
    if partition.n() != ids.len() {
        return Err(FieldError::PartitionIdMismatch { partition: partition.n(), ids: ids.len() });
    }
    Ok(split_clusters_by_row(partition, &regimes))
}

/// Same split, taking regimes already aligned with row order.
pub fn split_clusters_by_row(partition: &Partition, regimes: &[Regime]) -> Vec<TopicCluster> {
    let mut clusters: Vec<TopicCluster> = (0..partition.k())
        .map(|topic| TopicCluster { topic, members_a: Vec::new(), members_b: Vec::new() })
        .collect();
    for (row, &regime) in regimes.iter().enumerate() {
        let c = partition.community_of(row);
        match regime {
            Regime::A => clusters[c].members_a.push(row),
            Regime::B => clusters[c].members_b.push(row),
        }
    }
    clusters
}

/// Arithmetic-mean centroids of the two sides. Errors when a side is empty.
pub fn compute_centroids<T: Real>(
    cluster: &TopicCluster,
    u: ArrayView2<'_, T>,
) -> Result<CentroidPair<T>> {
    if cluster.members_a.is_empty() {
        return Err(FieldError::EmptySide(Regime::A));
    }
    if cluster.members_b.is_empty() {
        return Err(FieldError::EmptySide(Regime::B));
    }
    Ok(CentroidPair {
        mu_a: mean_rows(u, &cluster.members_a),
        mu_b: mean_rows(u, &cluster.members_b),
    })
}

fn mean_rows<T: Real>(u: ArrayView2<'_, T>, rows: &[usize]) -> Vec<T> {
    let d = u.ncols();
    let mut sum = vec![T::zero(); d];
    for &r in rows {
        for (acc, &x) in sum.iter_mut().zip(u.row(r)) {
            *acc += x;
        }
    }
    let n = T::from_f64_lossy(rows.len() as f64);
    sum.iter_mut().for_each(|x| *x /= n);
    sum
}

/// Displacement `v = mu_B - mu_A` with its Euclidean magnitude.
pub fn polarity_vector<T: Real>(topic: usize, pair: &CentroidPair<T>) -> (Vec<T>, T) {
    let _ = topic;
    let v: Vec<T> = pair.mu_b.iter().zip(&pair.mu_a).map(|(&b, &a)| b - a).collect();
    let magnitude = l2_norm(&v);
    (v, magnitude)
}

/// Assemble the full field. Every community is represented; only topics with
/// at least `tau` documents on each side carry a vector.
pub fn build_field<T: Real>(
    partition: &Partition,
    ids: &[String],
    assignment: &RegimeAssignment,
    u: ArrayView2<'_, T>,
    tau: usize,
) -> Result<PolarityField<T>> {
    if u.nrows() != ids.len() {
        return Err(FieldError::CoordinateMismatch { rows: u.nrows(), ids: ids.len() });
    }
    let regimes = regimes_for_ids(ids, assignment)?;
    if partition.n() != ids.len() {
        return Err(FieldError::PartitionIdMismatch { partition: partition.n(), ids: ids.len() });
    }

    let tau = tau.max(1); // a centroid needs at least one document per side
    let clusters = split_clusters_by_row(partition, &regimes);
    let mut topics = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let eligible = cluster.n_a() >= tau && cluster.n_b() >= tau;
        if eligible {
            let pair = compute_centroids(cluster, u)?;
            let (v, magnitude) = polarity_vector(cluster.topic, &pair);
            topics.push(PolarityVector {
                topic: cluster.topic,
                n_a: cluster.n_a(),
                n_b: cluster.n_b(),
                eligible: true,
                mu_a: Some(pair.mu_a),
                mu_b: Some(pair.mu_b),
                v: Some(v),
                magnitude,
            });
        } else {
            topics.push(PolarityVector {
                topic: cluster.topic,
                n_a: cluster.n_a(),
                n_b: cluster.n_b(),
                eligible: false,
                mu_a: None,
                mu_b: None,
                v: None,
                magnitude: T::zero(),
            });
        }
    }

    if !topics.iter().any(|t| t.eligible) {
        return Err(FieldError::NoEligibleTopics { tau });
    }

    Ok(PolarityField {
        d: u.ncols(),
        boundary: BoundaryMeta {
            description: assignment.description().to_string(),
            n_a: assignment.n_a(),
            n_b: assignment.n_b(),
        },
        topics,
    })
}

/// Eligible-topic displacement magnitudes for an arbitrary regime labeling
/// of the rows. Shared by the observed field and the permutation null so
/// the two paths cannot drift apart; a labeling that starves every topic
/// yields an empty vector rather than an error.
pub fn eligible_magnitudes<T: Real>(
    partition: &Partition,
    regimes: &[Regime],
    u: ArrayView2<'_, T>,
    tau: usize,
) -> Vec<T> {
    displacements(partition, regimes, u, tau)
        .into_iter()
        .flatten()
        .map(|v| l2_norm(&v))
        .collect()
}

/// Per-topic displacement vectors under an arbitrary regime labeling;
/// `None` marks ineligible topics.
pub fn displacements<T: Real>(
    partition: &Partition,
    regimes: &[Regime],
    u: ArrayView2<'_, T>,
    tau: usize,
) -> Vec<Option<Vec<T>>> {
    let tau = tau.max(1); // a centroid needs at least one document per side
    let clusters = split_clusters_by_row(partition, regimes);
    clusters
        .iter()
        .map(|cluster| {
            if cluster.n_a() >= tau && cluster.n_b() >= tau {
                let pair = compute_centroids(cluster, u).expect("sides checked non-empty");
                Some(polarity_vector(cluster.topic, &pair).0)
            } else {
                None
            }
        })
        .collect()
}

fn regimes_for_ids(ids: &[String], assignment: &RegimeAssignment) -> Result<Vec<Regime>> {
    if assignment.len() != ids.len() {
        return Err(FieldError::AssignmentIdMismatch {
            assignment: assignment.len(),
            ids: ids.len(),
        });
    }
    // Fast path: identical order (the common case, both derive from the corpus).
    if assignment.ids() == ids {
        return Ok(assignment.regimes().to_vec());
    }
    let index: std::collections::HashMap<&str, Regime> = assignment
        .ids()
        .iter()
        .zip(assignment.regimes())
        .map(|(id, &r)| (id.as_str(), r))
        .collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| FieldError::UnknownId(id.clone()))
        })
        .collect()
}
