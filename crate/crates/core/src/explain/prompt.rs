//! Prompt assembly for the contrastive explanation request.
//!
//! Assembly is a pure function of (neighborhoods, config): identical inputs
//! produce byte-identical prompts, which the golden-file test pins down.
//! Documents beyond the per-document budget are truncated tail-first with a
//! visible marker, and the affected ids are reported for the audit log.

use super::{ExplainerConfig, NeighborhoodPair};

/// Approximate characters per token used for the per-document budget.
const CHARS_PER_TOKEN: usize = 4;

pub const TRUNCATION_MARKER: &str = " ...[truncated]";

pub const SYSTEM_PROMPT: &str = r#"You compare two sets of documents drawn from the opposite ends of a semantic displacement within one topic and report the distinct dimensions of change between them.

For each coherent dimension of difference you find, you must:
1. Assign a short descriptive label to each pole: label_a describes SET A, label_b describes SET B.
2. Extract the exact sentences from the documents that support the dimension (supporting) and the exact sentences that contradict it (contradicting). Copy sentences verbatim; never invent or paraphrase.
3. List the distinguishing keywords for each direction of the shift (keywords_a, keywords_b).
4. Estimate coverage_a and coverage_b: the fraction of the provided documents in each set that exhibit the corresponding pole, as a number between 0 and 1.

Output requirements:
- Respond with a JSON array only. No prose, no code fences.
- Each element must be an object with exactly these keys: "label_a", "label_b", "coverage_a", "coverage_b", "supporting", "contradicting", "keywords_a", "keywords_b".
- "supporting" and "contradicting" are arrays of verbatim sentences; "keywords_a" and "keywords_b" are arrays of single words or short phrases.
- If the two sets show no coherent difference, respond with exactly [].
- Never fabricate evidence: a sentence may appear in "supporting" or "contradicting" only if it occurs in the documents above.

Example of a valid response with one dimension:
[{"label_a": "doubt and hedging", "label_b": "confident assertion", "coverage_a": 0.8, "coverage_b": 0.7, "supporting": ["We cannot yet be sure the measures will work.", "The committee is confident the target will be met."], "contradicting": ["Some uncertainty remains in both periods."], "keywords_a": ["perhaps", "uncertain"], "keywords_b": ["will", "confident"]}]

Example of a valid response with no coherent signal:
[]"#;

/// Truncate to the per-document character budget, tail-first.
fn truncate_doc(text: &str, budget_chars: usize) -> (String, bool) {
    if text.chars().count() <= budget_chars {
        return (text.to_string(), false);
    }
    let kept: String = text.chars().take(budget_chars).collect();
    (format!("{kept}{TRUNCATION_MARKER}"), true)
}

/// Build the (system, user) message pair. Returns the ids of documents that
/// were truncated to fit the per-document token budget.
pub fn build_prompt(
    pair: &NeighborhoodPair,
    cfg: &ExplainerConfig,
) -> (String, String, Vec<String>) {
    let budget_chars = cfg.max_doc_tokens.saturating_mul(CHARS_PER_TOKEN).max(1);
    let mut truncated = Vec::new();
    let mut user = String::new();
    user.push_str(&format!(
        "Topic {} split into two document sets by a contextual boundary.\n",
        pair.topic
    ));
    for (name, docs) in [("A", &pair.docs_a), ("B", &pair.docs_b)] {
        user.push_str(&format!(
            "\n===== SET {name} ({} documents, nearest to the regime-{name} centroid first) =====\n",
            docs.len()
        ));
        for (i, doc) in docs.iter().enumerate() {
            let (text, was_truncated) = truncate_doc(&doc.text, budget_chars);
            if was_truncated {
                truncated.push(doc.id.clone());
            }
            user.push_str(&format!("<<<DOC {name}{} id={}>>>\n{}\n<<<END>>>\n", i + 1, doc.id, text));
        }
    }
    user.push_str(
        "\nReport the dimensions of change from SET A to SET B as specified. JSON array only.",
    );
    (SYSTEM_PROMPT.to_string(), user, truncated)
}

/// Hex SHA-256 of the assembled prompt, for the audit trail.
pub fn prompt_hash(system: &str, user: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(system.as_bytes());
    hasher.update([0u8]);
    hasher.update(user.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::NeighborDoc;

    fn pair() -> NeighborhoodPair {
        NeighborhoodPair {
            topic: 3,
            n: 2,
            docs_a: vec![
                NeighborDoc { id: "a1".into(), text: "alpha one".into(), distance: 0.1 },
                NeighborDoc { id: "a2".into(), text: "alpha two".into(), distance: 0.2 },
            ],
            docs_b: vec![NeighborDoc {
                id: "b1".into(),
                text: "beta one".into(),
                distance: 0.05,
            }],
        }
    }

    #[test]
    fn prompt_is_pure() {
        let cfg = ExplainerConfig::default();
        let (s1, u1, t1) = build_prompt(&pair(), &cfg);
        let (s2, u2, t2) = build_prompt(&pair(), &cfg);
        assert_eq!(s1, s2);
        assert_eq!(u1, u2);
        assert_eq!(t1, t2);
        assert_eq!(prompt_hash(&s1, &u1), prompt_hash(&s2, &u2));
    }

    #[test]
    fn long_documents_are_truncated_with_marker() {
        let mut cfg = ExplainerConfig::default();
        cfg.max_doc_tokens = 3; // 12 characters
        let mut p = pair();
        p.docs_a[0].text = "0123456789abcdef".into();
        let (_, user, truncated) = build_prompt(&p, &cfg);
        assert_eq!(truncated, vec!["a1".to_string()]);
        assert!(user.contains(&format!("0123456789ab{TRUNCATION_MARKER}")));
        assert!(!user.contains("cdef"));
    }

    #[test]
    fn prompt_contains_both_sections_in_order() {
        let (_, user, _) = build_prompt(&pair(), &ExplainerConfig::default());
        let a = user.find("===== SET A").unwrap();
        let b = user.find("===== SET B").unwrap();
        assert!(a < b);
        assert!(user.contains("<<<DOC A1 id=a1>>>"));
        assert!(user.contains("<<<DOC B1 id=b1>>>"));
    }
}
