use std::collections::BTreeMap;

use proptest::prelude::*;

use deckforge::kb::{normalize_word, BeliefTable, KnowledgeBase, Ontology, Variant, ACTION, OBJECT};

fn subs(mc: &str) -> Vec<String> {
    Ontology::default().sub_concepts(mc).unwrap().iter().cloned().collect()
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![Just("pie".to_string()), Just("Pie  Chart".to_string()), Just("graph".to_string()), "[a-z]{1,6}"]
}

/// (word index, sub-concept index) pairs over a small vocabulary so entries collide.
fn ops() -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0usize..4, 0usize..16), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn beliefs_stay_normalized(seq in ops()) {
        let s = subs(OBJECT);
        let mut kb = BeliefTable::new(Ontology::default());
        for (w, sc) in &seq {
            kb.observe(OBJECT, &format!("w{w}"), &s[sc % s.len()]).unwrap();
        }
        for w in 0..4 {
            if let Some(e) = kb.entry(OBJECT, &format!("w{w}")) {
                let total: f64 = e.dist.values().sum();
                prop_assert!((total - 1.0).abs() <= 1e-9, "sum {}", total);
                prop_assert!(e.dist.values().all(|b| (0.0..=1.0).contains(b)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn beliefs_equal_observation_frequencies(seq in proptest::collection::vec(0usize..16, 1..80)) {
        let s = subs(OBJECT);
        let mut kb = BeliefTable::new(Ontology::default());
        let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
        for sc in &seq {
            let sc = &s[sc % s.len()];
            kb.observe(OBJECT, "w", sc).unwrap();
            *counts.entry(sc).or_default() += 1.0;
        }
        for sc in &s {
            let expected = counts.get(sc.as_str()).copied().unwrap_or(0.0) / seq.len() as f64;
            prop_assert!((kb.belief(OBJECT, sc, "w") - expected).abs() < 1e-9);
        }
        prop_assert_eq!(kb.entry(OBJECT, "w").unwrap().l, seq.len() as u64);
    }

    #[test]
    fn feedback_is_monotone(seq in proptest::collection::vec(0usize..16, 0..30), next in 0usize..16) {
        let s = subs(OBJECT);
        let mut kb = BeliefTable::new(Ontology::default());
        for sc in &seq {
            kb.observe(OBJECT, "w", &s[sc % s.len()]).unwrap();
        }
        let before: Vec<f64> = s.iter().map(|sc| kb.belief(OBJECT, sc, "w")).collect();
        let chosen = next % s.len();
        kb.observe(OBJECT, "w", &s[chosen]).unwrap();
        for (i, sc) in s.iter().enumerate() {
            let after = kb.belief(OBJECT, sc, "w");
            if i == chosen {
                prop_assert!(after > before[i] || before[i] == 1.0);
            } else {
                prop_assert!(after <= before[i]);
            }
        }
    }

    #[test]
    fn infer_is_argmax_with_lexicographic_ties(seq in proptest::collection::vec(0usize..16, 1..30)) {
        let s = subs(ACTION);
        let mut kb = BeliefTable::new(Ontology::default());
        for sc in &seq {
            kb.observe(ACTION, "go", &s[sc % s.len()]).unwrap();
        }
        let e = kb.entry(ACTION, "go").unwrap();
        let best = e.dist.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut tied: Vec<&String> = e.dist.iter().filter(|(_, b)| **b == best).map(|(k, _)| k).collect();
        tied.sort();
        prop_assert_eq!(kb.infer(ACTION, "go").unwrap(), Some(tied[0].as_str()));
    }

    #[test]
    fn forgetting_follows_closed_form(m in 1u32..200) {
        let mut kb = BeliefTable::new(Ontology::default());
        kb.observe(OBJECT, "w", "piechart").unwrap();
        for _ in 0..m {
            kb.observe(OBJECT, "w", "barchart").unwrap();
        }
        let m = f64::from(m);
        prop_assert!((kb.belief(OBJECT, "piechart", "w") - 1.0 / (m + 1.0)).abs() <= 1e-12);
        prop_assert!((kb.belief(OBJECT, "barchart", "w") - m / (m + 1.0)).abs() <= 1e-12);
        let expected = if m >= 2.0 { "barchart" } else { "barchart".min("piechart") };
        prop_assert_eq!(kb.infer(OBJECT, "w").unwrap(), Some(expected));
    }

    #[test]
    fn nkb_mappings_never_change(seq in proptest::collection::vec((word(), 0usize..16), 1..40)) {
        let s = subs(OBJECT);
        let mut kb = KnowledgeBase::new(Variant::Nkb, Ontology::default());
        let mut first: BTreeMap<String, String> = BTreeMap::new();
        for (w, sc) in &seq {
            let sc = &s[sc % s.len()];
            kb.learn(OBJECT, w, sc).unwrap();
            first.entry(normalize_word(w)).or_insert_with(|| sc.clone());
            for (known, mapped) in &first {
                prop_assert_eq!(kb.infer(OBJECT, known).unwrap(), Some(mapped.as_str()));
            }
        }
        let back = KnowledgeBase::from_json(&kb.to_json()).unwrap();
        prop_assert_eq!(back, kb);
    }

    #[test]
    fn rkb_json_round_trip(seq in proptest::collection::vec((word(), 0usize..16), 1..40)) {
        let s = subs(OBJECT);
        let mut kb = KnowledgeBase::new(Variant::Rkb, Ontology::default());
        for (w, sc) in &seq {
            kb.learn(OBJECT, w, &s[sc % s.len()]).unwrap();
        }
        let back = KnowledgeBase::from_json(&kb.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), kb.to_json());
        for (w, _) in &seq {
            prop_assert_eq!(back.infer(OBJECT, w).unwrap(), kb.infer(OBJECT, w).unwrap());
        }
    }
}
