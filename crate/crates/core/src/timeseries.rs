//! Daily OHLCV market data and the slicing/aggregation helpers the skills use.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("io error reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error on row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("ordering error on row {row}: dates must be strictly increasing")]
    Ordering { row: usize },
    #[error("validation error on row {row}: {message}")]
    Validation { row: usize, message: String },
    #[error("series {0} is empty")]
    Empty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ohlcv {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Ohlcv {
    fn check(&self) -> Result<(), String> {
        let finite = [self.open, self.high, self.low, self.close, self.volume]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value".into());
        }
        if self.high < self.open.max(self.close) {
            return Err("high must be >= max(open, close)".into());
        }
        if self.low > self.open.min(self.close) {
            return Err("low must be <= min(open, close)".into());
        }
        if self.volume < 0.0 {
            return Err("volume must be non-negative".into());
        }
        Ok(())
    }
}

/// A named, validated daily price series. Construct through [`TimeSeries::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    points: Vec<Ohlcv>,
}

impl TimeSeries {
    /// Validates ordering and per-row price invariants. Row numbers in errors are 1-based.
    pub fn new(name: impl Into<String>, points: Vec<Ohlcv>) -> Result<Self, SeriesError> {
        for (i, p) in points.iter().enumerate() {
            p.check()
                .map_err(|message| SeriesError::Validation { row: i + 1, message })?;
            if i > 0 && points[i - 1].date >= p.date {
                return Err(SeriesError::Ordering { row: i + 1 });
            }
        }
        Ok(Self { name: name.into(), points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Ohlcv] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.points.first().map(|p| p.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.points.last().map(|p| p.date)
    }

    pub fn closes(&self) -> ValueSeries {
        self.project("close", |p| p.close)
    }

    pub fn volumes(&self) -> ValueSeries {
        self.project("volume", |p| p.volume)
    }

    fn project(&self, field: &str, f: impl Fn(&Ohlcv) -> f64) -> ValueSeries {
        ValueSeries {
            name: self.name.clone(),
            field: field.to_string(),
            dates: self.points.iter().map(|p| p.date).collect(),
            values: self.points.iter().map(f).collect(),
        }
    }

    /// Points dated strictly after `last_date - months`.
    pub fn trailing_months(&self, months: u32) -> TimeSeries {
        let Some(last) = self.last_date() else {
            return self.clone();
        };
        let cutoff = last
            .checked_sub_months(Months::new(months))
            .unwrap_or(NaiveDate::MIN);
        let points = self.points.iter().filter(|p| p.date > cutoff).copied().collect();
        TimeSeries { name: self.name.clone(), points }
    }

    /// Points dated within `[start, end]`.
    pub fn between(&self, start: NaiveDate, end: NaiveDate) -> TimeSeries {
        let points = self.points.iter().filter(|p| p.date >= start && p.date <= end).copied().collect();
        TimeSeries { name: self.name.clone(), points }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// A single numeric column of a series, paired with its dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSeries {
    pub name: String,
    pub field: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ValueSeries {
    pub fn from_values(name: &str, start: NaiveDate, values: Vec<f64>) -> Self {
        let dates = (0..values.len())
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect();
        Self { name: name.to_string(), field: "value".to_string(), dates, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> ValueSeries {
        ValueSeries {
            name: self.name.clone(),
            field: self.field.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Median,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    (v[n / 2 - 1] + v[n / 2]) / 2.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
        }
    }
}

/// Groups values by ISO week and aggregates each group. Each week is labelled by its Monday.
pub fn weekly(series: &ValueSeries, agg: Aggregation) -> Vec<(NaiveDate, f64)> {
    let mut buckets: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (d, v) in series.dates.iter().zip(&series.values) {
        let week = d.iso_week();
        let monday = NaiveDate::from_isoywd_opt(week.year(), week.week(), Weekday::Mon)
            .expect("valid iso week");
        buckets.entry(monday).or_default().push(*v);
    }
    buckets.into_iter().map(|(k, v)| (k, agg.apply(&v))).collect()
}

pub fn load_timeseries_csv(path: impl AsRef<Path>) -> Result<TimeSeries, SeriesError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_timeseries_csv(&name, &text)
}

/// Parses OHLCV CSV text. Data rows are numbered from 1 (the header is row 0).
pub fn parse_timeseries_csv(name: &str, text: &str) -> Result<TimeSeries, SeriesError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SeriesError::Format(e.to_string()))?
        .clone();
    let mut index = [0usize; 6];
    for (slot, col) in index.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(col))
            .ok_or_else(|| SeriesError::Format(format!("missing column '{col}'")))?;
    }

    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SeriesError::Parse { row, message: e.to_string() })?;
        let cell = |k: usize| record.get(index[k]).unwrap_or("");
        let date = NaiveDate::parse_from_str(cell(0), "%Y-%m-%d").map_err(|e| {
            SeriesError::Parse { row, message: format!("bad date '{}': {e}", cell(0)) }
        })?;
        let mut nums = [0.0; 5];
        for (k, n) in nums.iter_mut().enumerate() {
            let raw = cell(k + 1);
            *n = raw.parse::<f64>().map_err(|_| SeriesError::Parse {
                row,
                message: format!("non-numeric {} '{raw}'", CSV_HEADER[k + 1]),
            })?;
        }
        let p = Ohlcv { date, open: nums[0], high: nums[1], low: nums[2], close: nums[3], volume: nums[4] };
        p.check().map_err(|message| SeriesError::Validation { row, message })?;
        if let Some(prev) = points.last() {
            let prev: &Ohlcv = prev;
            if prev.date >= date {
                return Err(SeriesError::Ordering { row });
            }
        }
        points.push(p);
    }
    TimeSeries::new(name, points)
}

pub fn timeseries_to_csv(series: &TimeSeries) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for p in series.points() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.date, p.open, p.high, p.low, p.close, p.volume
        ));
    }
    out
}

/// Business days (Mon-Fri) starting at `start`, `count` of them.
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Deterministic geometric random walk used for sample datasets and fixtures.
pub fn synthetic_ohlcv(name: &str, start: NaiveDate, days: usize, start_price: f64, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut close = start_price;
    let points = business_days(start, days)
        .into_iter()
        .map(|date| {
            let open = close;
            let ret: f64 = rng.gen_range(-0.03..0.03);
            close = round6((open * (1.0 + ret)).max(0.01));
            let high = round6(open.max(close) * (1.0 + rng.gen_range(0.0..0.01)));
            let low = round6(open.min(close) * (1.0 - rng.gen_range(0.0..0.01)));
            let volume = rng.gen_range(1_000_000u64..5_000_000u64) as f64;
            Ohlcv { date, open, high, low, close, volume }
        })
        .collect();
    TimeSeries::new(name, points).expect("generator respects invariants")
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn three_row_file_loads() {
        let text = "date,open,high,low,close,volume\n\
                    2024-01-02,10,11,9,10.5,100\n\
                    2024-01-03,10.5,12,10,11,200\n\
                    2024-01-04,11,11.5,10.2,10.8,150\n";
        let ts = parse_timeseries_csv("X", text).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.points()[1].close, 11.0);
    }

    #[test]
    fn high_below_close_cites_row() {
        let text = "date,open,high,low,close,volume\n\
                    2024-01-02,10,11,9,10.5,100\n\
                    2024-01-03,10.5,10.9,10,11,200\n";
        match parse_timeseries_csv("X", text) {
            Err(SeriesError::Validation { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_cells() {
        let e = parse_timeseries_csv("X", "date,open,high,low,close\n").unwrap_err();
        assert!(matches!(e, SeriesError::Format(ref m) if m.contains("volume")));

        let e = parse_timeseries_csv("X", "date,open,high,low,close,volume\n2024-01-02,a,1,1,1,1\n")
            .unwrap_err();
        assert!(matches!(e, SeriesError::Parse { row: 1, .. }));

        let text = "date,open,high,low,close,volume\n\
                    2024-01-03,1,1,1,1,1\n\
                    2024-01-02,1,1,1,1,1\n";
        assert_eq!(parse_timeseries_csv("X", text).unwrap_err(), SeriesError::Ordering { row: 2 });
    }

    #[test]
    fn trailing_three_months_of_a_business_year() {
        let ts = synthetic_ohlcv("S", d("2023-01-02"), 250, 100.0, 7);
        let slice = ts.trailing_months(3);
        // independent count: weekdays in (last - 3 months, last]
        let last = ts.last_date().unwrap();
        let cutoff = last.checked_sub_months(Months::new(3)).unwrap();
        let mut expected = 0;
        let mut day = cutoff.succ_opt().unwrap();
        while day <= last {
            if day.weekday().num_days_from_monday() < 5 {
                expected += 1;
            }
            day = day.succ_opt().unwrap();
        }
        assert_eq!(slice.len(), expected);
        assert!((60..=67).contains(&slice.len()), "got {}", slice.len());
    }

    #[test]
    fn csv_round_trip_keeps_six_decimals() {
        let ts = synthetic_ohlcv("S", d("2023-01-02"), 20, 123.456789, 3);
        let back = parse_timeseries_csv("S", &timeseries_to_csv(&ts)).unwrap();
        assert_eq!(ts, back);
    }

    #[test]
    fn weekly_median_groups_by_iso_week() {
        // Mon..Fri then Mon..Tue
        let vs = ValueSeries {
            name: "X".into(),
            field: "close".into(),
            dates: business_days(d("2024-01-01"), 7),
            values: vec![5.0, 1.0, 3.0, 2.0, 4.0, 10.0, 20.0],
        };
        let w = weekly(&vs, Aggregation::Median);
        assert_eq!(w, vec![(d("2024-01-01"), 3.0), (d("2024-01-08"), 15.0)]);
        let m = weekly(&vs, Aggregation::Mean);
        assert_eq!(m[0].1, 3.0);
    }
}
