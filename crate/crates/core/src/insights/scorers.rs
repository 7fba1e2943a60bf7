//! Utility scorers. The scoring functions are stand-ins: anomaly against the
//! primitive's own recent history, anomaly against peers over the same period,
//! and a plain magnitude ratio.

use std::collections::BTreeMap;

use super::primitives::{evaluate, mean, sample_std, Primitive};
use super::Insight;
use crate::timeseries::{TimeSeries, ValueSeries};

pub const PREV_PERIOD: &str = "prev_period";
pub const PEER: &str = "peer";
pub const MAGNITUDE: &str = "magnitude";
pub const SCORER_NAMES: [&str; 3] = [PREV_PERIOD, PEER, MAGNITUDE];

/// How many earlier evaluations of a primitive form its history.
pub const HISTORY_LOOKBACK: usize = 20;

/// `|value - mean(reference)| / std(reference)`, or 0 when the spread is degenerate.
pub fn abs_z(value: f64, reference: &[f64]) -> f64 {
    if reference.len() < 2 {
        return 0.0;
    }
    let sd = sample_std(reference);
    if sd == 0.0 || !sd.is_finite() {
        return 0.0;
    }
    ((value - mean(reference)) / sd).abs()
}

fn period_range(series: &ValueSeries, insight: &Insight) -> Option<(usize, usize)> {
    let (start, end) = insight.period;
    let lo = series.dates.partition_point(|d| *d < start);
    let hi = series.dates.partition_point(|d| *d <= end);
    (lo < hi).then_some((lo, hi))
}

/// The same primitive evaluated over equal-length windows ending 1..=lookback points earlier.
fn history(series: &ValueSeries, p: &Primitive, lo: usize, hi: usize) -> Vec<f64> {
    let len = hi - lo;
    (1..=HISTORY_LOOKBACK)
        .filter(|&shift| lo >= shift)
        .filter_map(|shift| evaluate(&series.slice(lo - shift, lo - shift + len), p).ok())
        .map(|v| v.value)
        .collect()
}

pub fn score_on(insight: &Insight, series: &ValueSeries, peers: &[ValueSeries]) -> BTreeMap<String, f64> {
    let p = &insight.primitive;
    let prev = period_range(series, insight)
        .map(|(lo, hi)| abs_z(insight.value, &history(series, p, lo, hi)))
        .unwrap_or(0.0);
    let peer_values: Vec<f64> = peers
        .iter()
        .filter_map(|s| {
            let (lo, hi) = period_range(s, insight)?;
            evaluate(&s.slice(lo, hi), p).ok().map(|v| v.value)
        })
        .collect();
    let peer = abs_z(insight.value, &peer_values);
    let m = if series.is_empty() { 0.0 } else { mean(&series.values) };
    let magnitude = if m == 0.0 || !m.is_finite() { 0.0 } else { (insight.value / m).abs() };
    BTreeMap::from([
        (PREV_PERIOD.to_string(), prev),
        (PEER.to_string(), peer),
        (MAGNITUDE.to_string(), magnitude),
    ])
}

/// Scores an insight over close prices of its subject and peers.
pub fn builtin_scorers(insight: &Insight, series: &TimeSeries, peers: &[TimeSeries]) -> BTreeMap<String, f64> {
    let peers: Vec<ValueSeries> = peers.iter().map(TimeSeries::closes).collect();
    score_on(insight, &series.closes(), &peers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insights::primitives::PrimitiveKind;
    use chrono::NaiveDate;

    fn d0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, 1).unwrap()
    }

    fn insight(kind: PrimitiveKind, value: f64, series: &ValueSeries) -> Insight {
        Insight {
            primitive: Primitive::new(kind),
            subject: series.name.clone(),
            value,
            period: (series.dates[0], *series.dates.last().unwrap()),
            utility_scores: BTreeMap::new(),
            aggregate: 0.0,
            text: String::new(),
        }
    }

    #[test]
    fn value_at_history_mean_scores_zero() {
        assert_eq!(abs_z(2.0, &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(abs_z(2.0, &[2.0, 2.0]), 0.0);
        assert_eq!(abs_z(2.0, &[]), 0.0);
    }

    #[test]
    fn three_peer_fixture() {
        let subject = ValueSeries::from_values("S", d0(), vec![5.0, 13.0]);
        let peers: Vec<ValueSeries> = [9.0, 10.0, 11.0]
            .iter()
            .enumerate()
            .map(|(i, &top)| ValueSeries::from_values(&format!("P{i}"), d0(), vec![1.0, top]))
            .collect();
        let ins = insight(PrimitiveKind::Maximum, 13.0, &subject);
        let scores = score_on(&ins, &subject, &peers);
        assert!((scores[PEER] - 3.0).abs() < 1e-9);
        assert_eq!(score_on(&ins, &subject, &[])[PEER], 0.0);
        assert_eq!(score_on(&ins, &subject, &[subject.clone()])[PEER], 0.0);
    }

    #[test]
    fn history_uses_shifted_windows() {
        // maxima of the shifted 2-point windows are 4, 3, 2, 1 around the current 5
        let full = ValueSeries::from_values("S", d0(), vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let current = full.slice(4, 6);
        let ins = insight(PrimitiveKind::Maximum, 5.0, &current);
        let hist = [4.0, 3.0, 2.0, 1.0];
        let want = abs_z(5.0, &hist);
        assert!((score_on(&ins, &full, &[])[PREV_PERIOD] - want).abs() < 1e-12);
        assert!((score_on(&ins, &full, &[])[MAGNITUDE] - 5.0 / (16.0 / 6.0)).abs() < 1e-12);
    }
}
