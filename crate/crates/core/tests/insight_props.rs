use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use deckforge::insights::{
    default_templates, evaluate, generate_insights, rank_and_select, Insight, Primitive, PrimitiveKind, ScoringConfig,
};
use deckforge::timeseries::ValueSeries;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
}

fn insight() -> impl Strategy<Value = Insight> {
    (0usize..6, 0usize..3, proptest::collection::vec(0u8..6, 3)).prop_map(|(kind, subject, scores)| Insight {
        primitive: Primitive::new(PrimitiveKind::ALL[kind]),
        subject: ["AAPL", "F", "TSLA"][subject].to_string(),
        value: 0.0,
        period: (start(), start()),
        utility_scores: ["magnitude", "peer", "prev_period"].iter().zip(scores).map(|(n, s)| (n.to_string(), f64::from(s))).collect(),
        aggregate: 0.0,
        text: String::new(),
    })
}

fn config() -> impl Strategy<Value = ScoringConfig> {
    (proptest::collection::vec(0u8..4, 3), 1usize..6).prop_map(|(w, k)| {
        let mut weights: BTreeMap<String, f64> =
            ["magnitude", "peer", "prev_period"].iter().zip(w).map(|(n, w)| (n.to_string(), f64::from(w))).collect();
        if weights.values().all(|w| *w == 0.0) {
            weights.insert("peer".into(), 1.0);
        }
        ScoringConfig { weights, k }
    })
}

type Key = (f64, String, String);

/// Stable sort by the documented key, then truncate.
fn brute_force(items: &[Insight], cfg: &ScoringConfig) -> Vec<Key> {
    let mut keys: Vec<Key> = items
        .iter()
        .map(|i| {
            let agg = cfg.weights.iter().map(|(n, w)| w * i.utility_scores[n]).sum();
            (agg, i.subject.clone(), i.primitive.name().to_string())
        })
        .collect();
    keys.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    keys.truncate(cfg.k);
    keys
}

fn positive_series() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1.0..500.0f64, 25..60)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn selection_equals_sort_then_truncate(items in proptest::collection::vec(insight(), 0..15), cfg in config()) {
        let got = rank_and_select(items.clone(), &cfg).unwrap();
        prop_assert_eq!(got.len(), cfg.k.min(items.len()));
        let got: Vec<Key> = got.iter().map(|i| (i.aggregate, i.subject.clone(), i.primitive.name().to_string())).collect();
        prop_assert_eq!(got, brute_force(&items, &cfg));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn primitives_under_positive_scaling(xs in positive_series(), c in 0.01..100.0f64) {
        let base = ValueSeries::from_values("X", start(), xs.clone());
        let scaled = ValueSeries::from_values("X", start(), xs.iter().map(|x| x * c).collect());
        for kind in PrimitiveKind::ALL {
            let p = Primitive::new(kind);
            let (Ok(a), Ok(b)) = (evaluate(&base, &p), evaluate(&scaled, &p)) else { continue };
            let equivariant = matches!(kind, PrimitiveKind::Minimum | PrimitiveKind::Maximum | PrimitiveKind::RollingAverage);
            let expected = if equivariant { a.value * c } else { a.value };
            prop_assert!(close(b.value, expected), "{:?}: {} vs {}", kind, b.value, expected);
        }
    }

    #[test]
    fn generated_insights_respect_k(xs in positive_series(), peer in positive_series(), k in 1usize..5) {
        let current = ValueSeries::from_values("X", start(), xs.clone());
        let peers = vec![ValueSeries::from_values("P", start(), peer)];
        let cfg = ScoringConfig { k, ..ScoringConfig::default() };
        let out = generate_insights(&current, &current, &peers, &default_templates(), &cfg).unwrap();
        prop_assert!(out.len() <= k);
        prop_assert!(out.iter().all(|i| !i.text.is_empty()));
        prop_assert!(out.windows(2).all(|w| w[0].aggregate >= w[1].aggregate));
    }
}
