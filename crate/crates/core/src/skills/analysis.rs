//! The slide builders. Each analysis is a pure function of the subject
//! series, its comparables, the deck parameters and the slide date.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SkillError;
use crate::deck::{ChartKind, ChartSpec, DataSeries, DeckParameters, Slide, SlideObject, TableSpec};
use crate::insights::primitives::{mean, rolling_mean, sample_std, simple_returns};
use crate::insights::{generate_insights, InsightTemplate, ScoringConfig};
use crate::timeseries::{weekly, Aggregation, TimeSeries, ValueSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    SharePricePerformance,
    VolumeTraded,
    MovingAverage,
    Drawdown,
    RelativePerformance,
    VolatilityComparison,
    WeeklyReturns,
    VolumeShare,
    TradingRange,
    KeyStatistics,
}

impl Analysis {
    pub const ALL: [Analysis; 10] = [
        Analysis::SharePricePerformance,
        Analysis::VolumeTraded,
        Analysis::MovingAverage,
        Analysis::Drawdown,
        Analysis::RelativePerformance,
        Analysis::VolatilityComparison,
        Analysis::WeeklyReturns,
        Analysis::VolumeShare,
        Analysis::TradingRange,
        Analysis::KeyStatistics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::SharePricePerformance => "share_price_performance",
            Analysis::VolumeTraded => "volume_traded",
            Analysis::MovingAverage => "moving_average",
            Analysis::Drawdown => "drawdown",
            Analysis::RelativePerformance => "relative_performance",
            Analysis::VolatilityComparison => "volatility_comparison",
            Analysis::WeeklyReturns => "weekly_returns",
            Analysis::VolumeShare => "volume_share",
            Analysis::TradingRange => "trading_range",
            Analysis::KeyStatistics => "key_statistics",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn title(self) -> &'static str {
        match self {
            Analysis::SharePricePerformance => "Share Price Performance",
            Analysis::VolumeTraded => "Volume Traded Analysis",
            Analysis::MovingAverage => "Moving Average",
            Analysis::Drawdown => "Drawdown from Peak",
            Analysis::RelativePerformance => "Relative Performance vs Comparables",
            Analysis::VolatilityComparison => "Volatility Comparison",
            Analysis::WeeklyReturns => "Weekly Returns",
            Analysis::VolumeShare => "Volume Share vs Comparables",
            Analysis::TradingRange => "Trading Range",
            Analysis::KeyStatistics => "Key Statistics",
        }
    }

    /// The object sub-concept this analysis is produced by.
    pub fn object(self) -> &'static str {
        match self {
            Analysis::SharePricePerformance | Analysis::MovingAverage | Analysis::Drawdown => "linechart",
            Analysis::VolumeTraded | Analysis::RelativePerformance | Analysis::VolatilityComparison | Analysis::WeeklyReturns => {
                "barchart"
            }
            Analysis::VolumeShare => "piechart",
            Analysis::TradingRange | Analysis::KeyStatistics => "table",
        }
    }

    /// Analyses for an object, default first.
    pub fn for_object(object: &str) -> Vec<Analysis> {
        let mut v: Vec<Analysis> = Self::ALL.into_iter().filter(|a| a.object() == object).collect();
        let default = match object {
            "barchart" => Some(Analysis::VolumeTraded),
            "table" => Some(Analysis::TradingRange),
            _ => None,
        };
        if let Some(d) = default {
            v.retain(|a| *a != d);
            v.insert(0, d);
        }
        v
    }

    fn keywords(self) -> &'static [&'static str] {
        match self {
            Analysis::SharePricePerformance => &["share price", "price performance", "share performance"],
            Analysis::VolumeTraded => &["volume traded", "trading volume", "volume"],
            Analysis::MovingAverage => &["moving average", "rolling average"],
            Analysis::Drawdown => &["drawdown"],
            Analysis::RelativePerformance => &["relative performance", "returns vs", "total return"],
            Analysis::VolatilityComparison => &["volatility"],
            Analysis::WeeklyReturns => &["weekly returns", "weekly return"],
            Analysis::VolumeShare => &["volume share", "share of volume"],
            Analysis::TradingRange => &["trading range", "price range"],
            Analysis::KeyStatistics => &["key statistics", "statistics", "stats"],
        }
    }

    /// Longest keyword mention in `text` among analyses valid for `object`.
    pub fn detect(text: &str, object: &str) -> Option<Analysis> {
        let lower = text.to_lowercase();
        Self::for_object(object)
            .into_iter()
            .flat_map(|a| a.keywords().iter().map(move |k| (k.len(), a, *k)))
            .filter(|(_, _, k)| lower.contains(k))
            .max_by_key(|(len, a, _)| (*len, std::cmp::Reverse(*a)))
            .map(|(_, a, _)| a)
    }
}

pub struct BuildInput<'a> {
    pub subject: &'a TimeSeries,
    pub peers: &'a [TimeSeries],
    pub params: &'a DeckParameters,
    pub date: NaiveDate,
    pub templates: &'a [InsightTemplate],
    pub scoring: &'a ScoringConfig,
}

pub fn slide_title(ticker: &str, analysis: Analysis) -> String {
    format!("{ticker} {}", analysis.title())
}

fn week_labels(rows: &[(NaiveDate, f64)]) -> Vec<String> {
    rows.iter().map(|(d, _)| d.to_string()).collect()
}

/// Peer weekly values on the subject's weeks: carried forward over gaps, back-filled at the start.
fn align(weeks: &[NaiveDate], peer: &[(NaiveDate, f64)]) -> Option<Vec<f64>> {
    let first = peer.first()?.1;
    let map: BTreeMap<NaiveDate, f64> = peer.iter().copied().collect();
    let mut last = None;
    Some(
        weeks
            .iter()
            .map(|w| {
                if let Some(v) = map.get(w) {
                    last = Some(*v);
                } else if let Some((_, v)) = map.range(..*w).next_back() {
                    last = Some(*v);
                }
                last.unwrap_or(first)
            })
            .collect(),
    )
}

fn weekly_comparison(subject: &ValueSeries, peers: &[ValueSeries], agg: Aggregation) -> (Vec<String>, Vec<DataSeries>) {
    let rows = weekly(subject, agg);
    let weeks: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let mut series = vec![DataSeries { label: subject.name.clone(), values: rows.iter().map(|(_, v)| *v).collect() }];
    for p in peers {
        if let Some(values) = align(&weeks, &weekly(p, agg)) {
            series.push(DataSeries { label: p.name.clone(), values });
        }
    }
    (week_labels(&rows), series)
}

fn total_return_pct(xs: &[f64]) -> f64 {
    match (xs.first(), xs.last()) {
        (Some(a), Some(b)) if *a != 0.0 => (b / a - 1.0) * 100.0,
        _ => 0.0,
    }
}

fn volatility_pct(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    sample_std(&simple_returns(xs)) * 100.0
}

fn per_firm(label: &str, firms: &[&ValueSeries], f: impl Fn(&[f64]) -> f64) -> (Vec<String>, Vec<DataSeries>) {
    let labels = firms.iter().map(|s| s.name.clone()).collect();
    let values = firms.iter().map(|s| f(&s.values)).collect();
    (labels, vec![DataSeries { label: label.into(), values }])
}

fn chart(kind: ChartKind, title: &str, (x_labels, series): (Vec<String>, Vec<DataSeries>)) -> Result<SlideObject, SkillError> {
    Ok(SlideObject::Chart(ChartSpec::new(kind, title, series, x_labels)?))
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

pub fn build_slide(analysis: Analysis, input: &BuildInput<'_>) -> Result<Slide, SkillError> {
    let horizon = input.params.horizon_months;
    let slice = input.subject.trailing_months(horizon);
    let (Some(start), Some(end)) = (slice.first_date(), slice.last_date()) else {
        return Err(SkillError::Data(format!("dataset '{}' has no rows", input.subject.name())));
    };
    let peers: Vec<TimeSeries> = input
        .peers
        .iter()
        .map(|p| p.between(start, end))
        .filter(|p| !p.is_empty())
        .collect();
    let agg = input.params.aggregation_metric;
    let ticker = input.subject.name();
    let title = slide_title(ticker, analysis);
    let closes = slice.closes();
    let volumes = slice.volumes();
    let peer_closes: Vec<ValueSeries> = peers.iter().map(TimeSeries::closes).collect();
    let peer_volumes: Vec<ValueSeries> = peers.iter().map(TimeSeries::volumes).collect();
    let firm_closes: Vec<&ValueSeries> = std::iter::once(&closes).chain(&peer_closes).collect();
    let firm_volumes: Vec<&ValueSeries> = std::iter::once(&volumes).chain(&peer_volumes).collect();

    let object = match analysis {
        Analysis::SharePricePerformance => chart(ChartKind::Linechart, &title, weekly_comparison(&closes, &peer_closes, agg))?,
        Analysis::VolumeTraded => chart(ChartKind::Barchart, &title, weekly_comparison(&volumes, &peer_volumes, agg))?,
        Analysis::MovingAverage => {
            let w = 20.min(closes.len());
            let avg = rolling_mean(&closes.values, w);
            let labels = closes.dates[w - 1..].iter().map(|d| d.to_string()).collect();
            let series = vec![
                DataSeries { label: ticker.to_string(), values: closes.values[w - 1..].to_vec() },
                DataSeries { label: format!("{w}-day average"), values: avg },
            ];
            chart(ChartKind::Linechart, &title, (labels, series))?
        }
        Analysis::Drawdown => {
            let mut peak = f64::NEG_INFINITY;
            let values = closes
                .values
                .iter()
                .map(|c| {
                    peak = peak.max(*c);
                    (c / peak - 1.0) * 100.0
                })
                .collect();
            let labels = closes.dates.iter().map(|d| d.to_string()).collect();
            chart(ChartKind::Linechart, &title, (labels, vec![DataSeries { label: "drawdown %".into(), values }]))?
        }
        Analysis::RelativePerformance => chart(ChartKind::Barchart, &title, per_firm("return %", &firm_closes, total_return_pct))?,
        Analysis::VolatilityComparison => {
            chart(ChartKind::Barchart, &title, per_firm("daily volatility %", &firm_closes, volatility_pct))?
        }
        Analysis::WeeklyReturns => {
            let rows = weekly(&closes, agg);
            let values = rows.windows(2).map(|w| (w[1].1 / w[0].1 - 1.0) * 100.0).collect();
            let labels = week_labels(&rows).into_iter().skip(1).collect();
            chart(ChartKind::Barchart, &title, (labels, vec![DataSeries { label: "weekly return %".into(), values }]))?
        }
        Analysis::VolumeShare => chart(ChartKind::Piechart, &title, per_firm("total volume", &firm_volumes, |v| v.iter().sum()))?,
        Analysis::TradingRange => {
            let labels = firm_closes.iter().map(|s| s.name.clone()).collect();
            let stat = |f: fn(&[f64]) -> f64| firm_closes.iter().map(|s| f(&s.values)).collect::<Vec<_>>();
            let series = vec![
                DataSeries { label: "low".into(), values: stat(|v| v.iter().copied().fold(f64::INFINITY, f64::min)) },
                DataSeries { label: "high".into(), values: stat(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max)) },
                DataSeries { label: "last".into(), values: stat(|v| v[v.len() - 1]) },
            ];
            chart(ChartKind::Table, &title, (labels, series))?
        }
        Analysis::KeyStatistics => {
            let c = &closes.values;
            let rows = vec![
                vec!["Period".into(), format!("{start} to {end}")],
                vec!["Last close".into(), fmt2(c[c.len() - 1])],
                vec!["Period high".into(), fmt2(c.iter().copied().fold(f64::NEG_INFINITY, f64::max))],
                vec!["Period low".into(), fmt2(c.iter().copied().fold(f64::INFINITY, f64::min))],
                vec!["Return %".into(), fmt2(total_return_pct(c))],
                vec!["Daily volatility %".into(), fmt2(volatility_pct(c))],
                vec![format!("Average daily volume ({})", agg.as_str()), fmt2(agg.apply(&volumes.values))],
                vec!["Mean close".into(), fmt2(mean(c))],
            ];
            let table = TableSpec { headers: vec!["Metric".into(), ticker.to_string()], rows };
            table.validate()?;
            SlideObject::Table(table)
        }
    };

    let is_volume = matches!(analysis, Analysis::VolumeTraded | Analysis::VolumeShare);
    let (current, history, peer_hist) = if is_volume {
        (volumes, input.subject.volumes(), input.peers.iter().map(TimeSeries::volumes).collect::<Vec<_>>())
    } else {
        (closes, input.subject.closes(), input.peers.iter().map(TimeSeries::closes).collect::<Vec<_>>())
    };
    let insights = generate_insights(&current, &history, &peer_hist, input.templates, input.scoring)?;

    let mut objects = vec![object];
    if !insights.is_empty() {
        objects.push(SlideObject::Insight { lines: insights.into_iter().map(|i| i.text).collect() });
    }
    let slide = Slide { title, date: input.date, objects };
    slide.validate()?;
    Ok(slide)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_mapping_and_defaults() {
        assert_eq!(Analysis::for_object("barchart")[0], Analysis::VolumeTraded);
        assert_eq!(Analysis::for_object("table"), vec![Analysis::TradingRange, Analysis::KeyStatistics]);
        assert_eq!(Analysis::for_object("piechart"), vec![Analysis::VolumeShare]);
        let covered: usize = ["linechart", "barchart", "piechart", "table"].iter().map(|o| Analysis::for_object(o).len()).sum();
        assert_eq!(covered, Analysis::ALL.len());
    }

    #[test]
    fn keyword_detection() {
        assert_eq!(Analysis::detect("make a linechart of the moving average", "linechart"), Some(Analysis::MovingAverage));
        assert_eq!(Analysis::detect("barchart of volume share", "piechart"), Some(Analysis::VolumeShare));
        assert_eq!(Analysis::detect("barchart of volatility", "barchart"), Some(Analysis::VolatilityComparison));
        assert_eq!(Analysis::detect("plain barchart", "barchart"), None);
    }

    #[test]
    fn alignment_fills_gaps() {
        let d = |day| NaiveDate::from_ymd_opt(2024, 1, day).unwrap();
        let weeks = [d(1), d(8), d(15), d(22)];
        let peer = [(d(8), 2.0), (d(22), 4.0)];
        assert_eq!(align(&weeks, &peer).unwrap(), vec![2.0, 2.0, 2.0, 4.0]);
        assert_eq!(align(&weeks, &[]), None);
    }
}
