//! Lexicon benchmark behavior on planted geometry: term communities with
//! known VAD structure and topic endpoints with known community membership.

mod common;

use ndarray::Array2;
use polfield::corpus::{Regime, RegimeAssignment};
use polfield::field::{BoundaryMeta, PolarityField, PolarityVector};
use polfield::lexicon::{
    cluster_lexicon, regime_sentiment_gap, vad_shift, ClassProbabilities, ProjectedLexicon,
    VadLexicon,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two term blobs far apart in a 2-D layout: blob 0 near (10, 0) with
/// positive valence, blob 1 near (-10, 0) with negative valence.
fn planted_lexicon(per_blob: usize, seed: u64) -> (VadLexicon, ProjectedLexicon<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut terms = Vec::new();
    let mut coords = Vec::new();
    for blob in 0..2 {
        for i in 0..per_blob {
            let term = format!("{}{}", if blob == 0 { "pos" } else { "neg" }, i);
            let valence = if blob == 0 { 0.8 } else { -0.8 } + rng.random_range(-0.05..0.05);
            entries.push((term.clone(), [valence, 0.4, 0.1]));
            let cx = if blob == 0 { 10.0 } else { -10.0 };
            coords.push([cx + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
            terms.push(term);
        }
    }
    let lexicon = VadLexicon::from_entries(entries).unwrap();
    let coords =
        Array2::from_shape_vec((terms.len(), 2), coords.into_iter().flatten().collect())
            .unwrap();
    (lexicon, ProjectedLexicon { terms, coords, skipped: 0 })
}

#[test]
fn planted_term_blobs_become_two_communities_with_opposite_valence() {
    let (lexicon, projected) = planted_lexicon(12, 3);
    let communities = cluster_lexicon(&projected, &lexicon, 11, 1.0, 0).unwrap();
    assert_eq!(communities.len(), 2, "expected exactly the two planted blobs");
    let mut valences: Vec<f64> = communities.iter().map(|c| c.mean_vad[0]).collect();
    valences.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(valences[0] < -0.5, "negative blob mean valence {}", valences[0]);
    assert!(valences[1] > 0.5, "positive blob mean valence {}", valences[1]);
    // centroids sit near the planted blob centers
    for c in &communities {
        assert!(c.centroid[0].abs() > 8.0);
    }
}

#[test]
fn single_term_is_a_singleton_community_with_its_own_vad() {
    let lexicon = VadLexicon::from_entries(vec![("only".into(), [0.3, 0.2, 0.1])]).unwrap();
    let projected = ProjectedLexicon::<f64> {
        terms: vec!["only".into()],
        coords: Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap(),
        skipped: 0,
    };
    let communities = cluster_lexicon(&projected, &lexicon, 5, 1.0, 0).unwrap();
    assert_eq!(communities.len(), 1);
    assert_eq!(communities[0].mean_vad, [0.3, 0.2, 0.1]);
    assert_eq!(communities[0].terms, vec!["only".to_string()]);
}

#[test]
fn community_mean_vad_is_arithmetic_mean_on_a_three_term_fixture() {
    let lexicon = VadLexicon::from_entries(vec![
        ("t0".into(), [0.9, 0.0, 0.3]),
        ("t1".into(), [0.6, 0.3, 0.0]),
        ("t2".into(), [0.3, 0.6, 0.6]),
    ])
    .unwrap();
    // all three terms in one tight blob -> one community
    let projected = ProjectedLexicon::<f64> {
        terms: vec!["t0".into(), "t1".into(), "t2".into()],
        coords: Array2::from_shape_vec((3, 2), vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.1]).unwrap(),
        skipped: 0,
    };
    let communities = cluster_lexicon(&projected, &lexicon, 2, 1.0, 0).unwrap();
    assert_eq!(communities.len(), 1);
    let vad = communities[0].mean_vad;
    assert!((vad[0] - 0.6).abs() < 1e-12);
    assert!((vad[1] - 0.3).abs() < 1e-12);
    assert!((vad[2] - 0.3).abs() < 1e-12);
}

/// Planted positive-shift scenario: every topic's A endpoint sits in the
/// negative-valence region and its B endpoint in the positive one.
#[test]
fn planted_positive_shift_gives_positive_delta_valence_for_every_topic() {
    let (lexicon, projected) = planted_lexicon(12, 5);
    let communities = cluster_lexicon(&projected, &lexicon, 11, 1.0, 0).unwrap();

    let topics: Vec<PolarityVector<f64>> = (0..4)
        .map(|topic| {
            let y = topic as f64;
            PolarityVector {
                topic,
                n_a: 5,
                n_b: 5,
                eligible: true,
                mu_a: Some(vec![-9.0, y * 0.1]),
                mu_b: Some(vec![9.5, y * 0.1]),
                v: Some(vec![18.5, 0.0]),
                magnitude: 18.5,
            }
        })
        .collect();
    let field = PolarityField {
        d: 2,
        boundary: BoundaryMeta { description: "planted".into(), n_a: 20, n_b: 20 },
        topics,
    };
    let shifts = vad_shift(&field, &communities).unwrap();
    assert_eq!(shifts.len(), 4);
    for shift in &shifts {
        assert!(shift.dv > 1.0, "topic {} delta-valence {}", shift.topic, shift.dv);
        assert_ne!(shift.community_a, shift.community_b);
    }
}

#[test]
fn delta_valence_sign_tracks_sentiment_gap_sign() {
    // planted: regime B documents are positive, regime A negative
    let ids: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
    let regimes: Vec<Regime> =
        (0..10).map(|i| if i % 2 == 0 { Regime::A } else { Regime::B }).collect();
    let assignment = RegimeAssignment::new(ids.clone(), regimes, "planted".into()).unwrap();
    let mut scores = ClassProbabilities::default();
    for (i, id) in ids.iter().enumerate() {
        let p = if i % 2 == 0 { [0.1, 0.2, 0.7] } else { [0.8, 0.1, 0.1] };
        scores.insert(id.clone(), p).unwrap();
    }
    let gap = regime_sentiment_gap(&scores, &assignment, None).unwrap();
    assert!(gap.gap > 0.0);

    let (lexicon, projected) = planted_lexicon(10, 8);
    let communities = cluster_lexicon(&projected, &lexicon, 9, 1.0, 0).unwrap();
    let field = PolarityField {
        d: 2,
        boundary: BoundaryMeta { description: "planted".into(), n_a: 5, n_b: 5 },
        topics: vec![PolarityVector {
            topic: 0,
            n_a: 5,
            n_b: 5,
            eligible: true,
            mu_a: Some(vec![-9.0, 0.0]),
            mu_b: Some(vec![9.0, 0.0]),
            v: Some(vec![18.0, 0.0]),
            magnitude: 18.0,
        }],
    };
    let shifts = vad_shift(&field, &communities).unwrap();
    let delta_valence: f64 = shifts.iter().map(|s| s.dv).sum();
    assert_eq!(
        delta_valence.signum(),
        gap.gap.signum(),
        "planted valence geometry should agree with the sentiment gap"
    );
}
