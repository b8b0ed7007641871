use std::collections::BTreeSet;

use num_rational::Ratio;
use patclass_core::corpus::{filter_admitted, split, RawRecord};
use patclass_core::ensemble::{combine, PredictionRanking};
use patclass_core::metrics::{accuracy, percent_2dp, recall_at_n, GoldLabels, ImprovementRow};
use patclass_core::textprep::{build_vocabulary, decode, encode, tokenize, PAD, UNK_TOKEN};
use proptest::prelude::*;

/// Documents with a random permutation of `num_labels` as ranking and a random gold label.
fn rankings() -> impl Strategy<Value = (usize, Vec<PredictionRanking>, GoldLabels)> {
    (2usize..12).prop_flat_map(|n| {
        let doc = (Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 0..n);
        (Just(n), prop::collection::vec(doc, 1..40))
    })
    .prop_map(|(n, docs)| {
        let mut rs = Vec::new();
        let mut gold = GoldLabels::new();
        for (i, (order, g)) in docs.into_iter().enumerate() {
            let id = format!("d{i}");
            rs.push(PredictionRanking {
                doc_id: id.clone(),
                probabilities: (0..n).map(|l| 1.0 / (1 + order.iter().position(|&x| x == l).unwrap()) as f64).collect(),
                order,
            });
            gold.insert(id, g);
        }
        (n, rs, gold)
    })
}

fn probability_vector(n: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(0.001f32..1.0, n).prop_map(|v| {
        let s: f32 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn section() -> impl Strategy<Value = String> {
    prop_oneof![Just(String::new()), Just("  \t".to_string()), "[a-z ]{1,12}"]
}

fn record() -> impl Strategy<Value = RawRecord> {
    let label = prop_oneof![
        Just(None),
        Just(Some("G06F 17/30".to_string())),
        Just(Some("H04L".to_string())),
        Just(Some("bogus".to_string())),
    ];
    ("d[0-5]", section(), section(), section(), label).prop_map(|(doc_id, t, d, c, l)| RawRecord {
        doc_id,
        title_abstract: t,
        description: d,
        claims: c,
        main_classification: l,
    })
}

proptest! {
    #[test]
    fn recall_at_one_is_accuracy((n, rs, gold) in rankings()) {
        prop_assert_eq!(recall_at_n(&rs, &gold, 1).unwrap(), accuracy(&rs, &gold).unwrap());
        prop_assert_eq!(recall_at_n(&rs, &gold, n).unwrap(), Ratio::from_integer(1));
    }

    #[test]
    fn recall_is_nondecreasing_in_n((n, rs, gold) in rankings()) {
        let mut prev = Ratio::from_integer(0);
        for k in 1..=n + 2 {
            let r = recall_at_n(&rs, &gold, k).unwrap();
            prop_assert!(r >= prev && r <= Ratio::from_integer(1));
            prev = r;
        }
    }

    #[test]
    fn metrics_ignore_document_order((_n, mut rs, gold) in rankings(), k in 1usize..6) {
        let before = (accuracy(&rs, &gold).unwrap(), recall_at_n(&rs, &gold, k).unwrap());
        rs.reverse();
        let half = rs.len() / 2;
        rs.rotate_left(half);
        prop_assert_eq!(before, (accuracy(&rs, &gold).unwrap(), recall_at_n(&rs, &gold, k).unwrap()));
    }

    #[test]
    fn combine_of_identical_inputs_is_identity(p in probability_vector(7)) {
        let c = combine(&p, &p, &p).unwrap();
        prop_assert!(c.iter().zip(&p).all(|(&a, &b)| a == b as f64));
    }

    #[test]
    fn combine_is_the_symmetric_mean(p in probability_vector(5), q in probability_vector(5), r in probability_vector(5)) {
        let c = combine(&p, &q, &r).unwrap();
        prop_assert_eq!(&c, &combine(&r, &p, &q).unwrap());
        for i in 0..5 {
            let mean = (p[i] as f64 + q[i] as f64 + r[i] as f64) / 3.0;
            prop_assert!((c[i] - mean).abs() <= 1e-15);
        }
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn split_partitions_ids(n in 10usize..400, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let m = split(&ids, seed).unwrap();
        prop_assert_eq!(m.train.len(), (8 * n + 5) / 10);
        prop_assert_eq!(m.validation.len(), (n + 5) / 10);
        let all: BTreeSet<&String> = m.train.iter().chain(&m.validation).chain(&m.test).collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(&m, &split(&ids, seed).unwrap());
    }

    #[test]
    fn filtering_is_idempotent(records in prop::collection::vec(record(), 0..20)) {
        let once = filter_admitted(&records);
        let again = filter_admitted(&once.iter().cloned().map(|d| d.into_record()).collect::<Vec<_>>());
        prop_assert_eq!(&once, &again);
        let ids: BTreeSet<&str> = once.iter().map(|d| d.doc_id.as_str()).collect();
        prop_assert_eq!(ids.len(), once.len());
        for d in &once {
            prop_assert!(!d.title_abstract.trim().is_empty() && !d.description.trim().is_empty() && !d.claims.trim().is_empty());
        }
    }

    #[test]
    fn tokenizer_output_is_a_fixed_point(text in "\\PC{0,60}") {
        let toks = tokenize(&text);
        prop_assert!(toks.iter().all(|t| !t.is_empty() && t.chars().all(char::is_alphanumeric)));
        prop_assert_eq!(tokenize(&toks.join(" ")), toks);
    }

    #[test]
    fn encoding_pads_truncates_and_decodes(
        train in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 0..8), 1..5),
        doc in prop::collection::vec("[a-g]{1,2}", 0..12),
        target in 1usize..10,
    ) {
        let vocab = build_vocabulary(&train, 1);
        let seq = encode("d", &doc, &vocab, target);
        prop_assert_eq!(seq.indices.len(), target);
        prop_assert_eq!(seq.true_length, doc.len().min(target));
        prop_assert!(seq.indices[seq.true_length..].iter().all(|&i| i == PAD));
        let expected: Vec<String> = doc
            .iter()
            .take(target)
            .map(|t| if vocab.contains(t) { t.clone() } else { UNK_TOKEN.to_string() })
            .collect();
        prop_assert_eq!(decode(&seq, &vocab), expected);
    }

    #[test]
    fn ensemble_equal_to_mean_improves_by_zero(a in 1i128..10_000, b in 1i128..10_000, c in 1i128..10_000) {
        let members = [Ratio::new(a, 10_000), Ratio::new(b, 10_000), Ratio::new(c, 10_000)];
        let mean = (members[0] + members[1] + members[2]) / Ratio::from_integer(3);
        let row = ImprovementRow::new("x", members, mean);
        prop_assert_eq!(row.improvement_2dp(), "0.00");
        prop_assert_eq!(row.mean_pct(), percent_2dp(mean));
    }
}
