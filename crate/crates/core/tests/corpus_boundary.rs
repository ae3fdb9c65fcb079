//! Corpus loading and boundary-assignment behavior against golden files and
//! an exact-enumeration permutation oracle.

mod common;

use polfield::corpus::{
    apply_boundary, load_corpus, permute_assignment, AttrValue, BoundarySpec, CorpusFormat,
    Regime, RegimeAssignment,
};
use proptest::prelude::*;
use std::io::Write;

#[test]
fn csv_timestamp_column_round_trips_through_golden_file() {
    // golden file: a small CSV with a "date" attribute column
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("speeches.csv");
    std::fs::write(
        &path,
        "id,text,date,venue\n\
         s1,rates were held,2007-04-30,london\n\
         s2,liquidity support announced,2007-05-01T09:30:00Z,new york\n\
         s3,inflation outlook revised,2008-01-15,frankfurt\n",
    )
    .unwrap();
    let corpus = load_corpus(&path, CorpusFormat::Csv).unwrap();
    assert_eq!(corpus.len(), 3);
    // dates parse to day granularity
    assert_eq!(
        corpus.documents()[0].attributes["date"],
        AttrValue::parse("2007-04-30")
    );
    assert_eq!(
        corpus.documents()[1].attributes["date"].canonical(),
        "2007-05-01"
    );
    assert_eq!(corpus.documents()[2].attributes["venue"].canonical(), "frankfurt");

    // threshold on the parsed dates reproduces the expected split
    let spec = BoundarySpec::ByThreshold {
        attribute: "date".into(),
        cut: AttrValue::parse("2007-05-01"),
    };
    let assignment = apply_boundary(&corpus, &spec).unwrap();
    assert_eq!(assignment.regime_of("s1"), Some(Regime::A));
    assert_eq!(assignment.regime_of("s2"), Some(Regime::B));
    assert_eq!(assignment.regime_of("s3"), Some(Regime::B));

    // assignment exports as id,regime csv
    let mut out = Vec::new();
    assignment.write_csv(&mut out).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "id,regime\ns1,A\ns2,B\ns3,B\n"
    );
}

#[test]
fn label_boundary_on_numeric_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reviews.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for (id, rating) in [("r1", 1), ("r2", 2), ("r3", 4), ("r4", 5)] {
        writeln!(f, r#"{{"id":"{id}","text":"review body {id}","rating":{rating}}}"#).unwrap();
    }
    let corpus = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
    let spec = BoundarySpec::ByLabel {
        attribute: "rating".into(),
        map: [
            ("1".to_string(), Regime::A),
            ("2".to_string(), Regime::A),
            ("4".to_string(), Regime::B),
            ("5".to_string(), Regime::B),
        ]
        .into_iter()
        .collect(),
    };
    let assignment = apply_boundary(&corpus, &spec).unwrap();
    assert_eq!(assignment.n_a(), 2);
    assert_eq!(assignment.n_b(), 2);

    // a rating outside the map is a hard error
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(f, r#"{{"id":"r5","text":"meh","rating":3}}"#).unwrap();
    let corpus = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
    let err = apply_boundary(&corpus, &spec).unwrap_err();
    assert!(err.to_string().contains("r5"), "error should name the document: {err}");
}

/// Exact enumeration oracle: a 4-document corpus with n_A = 2 has C(4,2) = 6
/// distinct label arrangements, so a uniform permutation must hit each with
/// frequency 1/6. Checked over 10,000 seeds with a chi-square statistic.
#[test]
fn permutation_is_uniform_over_label_arrangements() {
    let ids: Vec<String> = (0..4).map(|i| format!("d{i}")).collect();
    let regimes = vec![Regime::A, Regime::A, Regime::B, Regime::B];
    let assignment = RegimeAssignment::new(ids, regimes, "base".into()).unwrap();

    // enumerate the 6 arrangements
    let mut arrangement_index = std::collections::HashMap::new();
    let mut count = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut arr = [Regime::B; 4];
            arr[i] = Regime::A;
            arr[j] = Regime::A;
            arrangement_index.insert(arr.to_vec(), count);
            count += 1;
        }
    }
    assert_eq!(count, 6);

    let trials = 10_000usize;
    let mut observed = [0usize; 6];
    for seed in 0..trials as u64 {
        let permuted = permute_assignment(&assignment, seed);
        assert_eq!(permuted.n_a(), 2, "multiset must be preserved");
        let idx = arrangement_index[&permuted.regimes().to_vec()];
        observed[idx] += 1;
    }

    let expected = trials as f64 / 6.0;
    for (i, &obs) in observed.iter().enumerate() {
        let freq = obs as f64 / trials as f64;
        assert!(
            (freq - 1.0 / 6.0).abs() <= 0.02,
            "arrangement {i} frequency {freq} outside 1/6 +/- 0.02"
        );
    }
    let chi_square: f64 =
        observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // df = 5; 16.75 is the 0.5% critical value
    assert!(chi_square < 16.75, "chi-square {chi_square} too large for uniformity");
}

proptest! {
    /// The permuted label multiset equals the input multiset for every seed.
    #[test]
    fn permutation_preserves_multiset(n_a in 1usize..20, n_b in 1usize..20, seed in any::<u64>()) {
        let n = n_a + n_b;
        let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let regimes: Vec<Regime> =
            (0..n).map(|i| if i < n_a { Regime::A } else { Regime::B }).collect();
        let assignment = RegimeAssignment::new(ids, regimes, "p".into()).unwrap();
        let permuted = permute_assignment(&assignment, seed);
        prop_assert_eq!(permuted.n_a(), n_a);
        prop_assert_eq!(permuted.n_b(), n_b);
        prop_assert_eq!(permuted.len(), n);
    }
}
