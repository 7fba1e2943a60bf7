use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::InsightError;
use crate::timeseries::{TimeSeries, ValueSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Minimum,
    Maximum,
    RollingAverage,
    Volatility,
    DistanceToMean,
    ComparativeFactor,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 6] = [
        PrimitiveKind::Minimum,
        PrimitiveKind::Maximum,
        PrimitiveKind::RollingAverage,
        PrimitiveKind::Volatility,
        PrimitiveKind::DistanceToMean,
        PrimitiveKind::ComparativeFactor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Minimum => "minimum",
            PrimitiveKind::Maximum => "maximum",
            PrimitiveKind::RollingAverage => "rolling_average",
            PrimitiveKind::Volatility => "volatility",
            PrimitiveKind::DistanceToMean => "distance_to_mean",
            PrimitiveKind::ComparativeFactor => "comparative_factor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn uses_window(self) -> bool {
        matches!(self, PrimitiveKind::RollingAverage | PrimitiveKind::ComparativeFactor)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    /// Trailing window length for rolling_average and comparative_factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind) -> Self {
        Self { kind, window: None }
    }

    pub fn windowed(kind: PrimitiveKind, window: usize) -> Self {
        Self { kind, window: Some(window) }
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveValue {
    pub primitive: Primitive,
    /// Headline number (for rolling_average, the latest window mean).
    pub value: f64,
    /// Full output; a single element except for rolling_average.
    pub values: Vec<f64>,
    pub period: (NaiveDate, NaiveDate),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean of each trailing window, one output per complete window.
pub fn rolling_mean(xs: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || window > xs.len() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(xs.len() - window + 1);
    let mut sum: f64 = xs[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..xs.len() {
        sum += xs[i] - xs[i - window];
        out.push(sum / window as f64);
    }
    out
}

pub fn simple_returns(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn window_of(p: &Primitive, len: usize) -> Result<usize, InsightError> {
    let w = p.window.unwrap_or(20);
    if w == 0 || w > len {
        return Err(InsightError::Window { window: w, len });
    }
    Ok(w)
}

pub fn evaluate(series: &ValueSeries, p: &Primitive) -> Result<PrimitiveValue, InsightError> {
    let xs = &series.values;
    if xs.is_empty() {
        return Err(InsightError::Empty(series.name.clone()));
    }
    let period = (series.dates[0], *series.dates.last().expect("non-empty"));
    let single = |v: f64| (v, vec![v]);
    let (value, values) = match p.kind {
        PrimitiveKind::Minimum => single(xs.iter().copied().fold(f64::INFINITY, f64::min)),
        PrimitiveKind::Maximum => single(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        PrimitiveKind::RollingAverage => {
            let r = rolling_mean(xs, window_of(p, xs.len())?);
            (*r.last().expect("window <= len"), r)
        }
        PrimitiveKind::Volatility => {
            if xs.len() < 2 {
                return Err(InsightError::InsufficientData(format!(
                    "volatility needs at least 2 points, {} has {}",
                    series.name,
                    xs.len()
                )));
            }
            single(sample_std(&simple_returns(xs)))
        }
        PrimitiveKind::DistanceToMean => {
            let sd = sample_std(xs);
            if sd == 0.0 {
                return Err(InsightError::InsufficientData(format!(
                    "distance_to_mean undefined: {} has zero spread",
                    series.name
                )));
            }
            single((xs[xs.len() - 1] - mean(xs)) / sd)
        }
        PrimitiveKind::ComparativeFactor => {
            let w = window_of(p, xs.len())?;
            let trailing = mean(&xs[xs.len() - w..]);
            if trailing == 0.0 {
                return Err(InsightError::InsufficientData("trailing mean is zero".into()));
            }
            single(xs[xs.len() - 1] / trailing)
        }
    };
    Ok(PrimitiveValue { primitive: *p, value, values, period })
}

pub fn compute_on(series: &ValueSeries, requested: &[Primitive]) -> Result<Vec<PrimitiveValue>, InsightError> {
    requested.iter().map(|p| evaluate(series, p)).collect()
}

/// Evaluates primitives over close prices.
pub fn compute_primitives(series: &TimeSeries, requested: &[Primitive]) -> Result<Vec<PrimitiveValue>, InsightError> {
    compute_on(&series.closes(), requested)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(values: &[f64]) -> ValueSeries {
        ValueSeries::from_values("X", NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), values.to_vec())
    }

    #[test]
    fn min_max() {
        let s = vs(&[1.0, 2.0, 3.0]);
        let out = compute_on(&s, &[Primitive::new(PrimitiveKind::Minimum), Primitive::new(PrimitiveKind::Maximum)]).unwrap();
        assert_eq!(out[0].value, 1.0);
        assert_eq!(out[1].value, 3.0);
    }

    #[test]
    fn constant_series() {
        let s = vs(&[5.0; 6]);
        assert_eq!(evaluate(&s, &Primitive::new(PrimitiveKind::Volatility)).unwrap().value, 0.0);
        assert!(matches!(
            evaluate(&s, &Primitive::new(PrimitiveKind::DistanceToMean)),
            Err(InsightError::InsufficientData(_))
        ));
    }

    #[test]
    fn rolling_average_matches_brute_force() {
        let xs = [10.0, 12.0, 11.0, 13.0];
        let got = evaluate(&vs(&xs), &Primitive::windowed(PrimitiveKind::RollingAverage, 2)).unwrap();
        assert_eq!(got.values, vec![11.0, 11.5, 12.0]);
        for w in 1..=xs.len() {
            let fast = rolling_mean(&xs, w);
            let slow: Vec<f64> = (0..=xs.len() - w).map(|i| xs[i..i + w].iter().sum::<f64>() / w as f64).collect();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_and_length_errors() {
        let s = vs(&[1.0, 2.0]);
        assert_eq!(
            evaluate(&s, &Primitive::windowed(PrimitiveKind::RollingAverage, 3)).unwrap_err(),
            InsightError::Window { window: 3, len: 2 }
        );
        assert!(matches!(
            evaluate(&vs(&[1.0]), &Primitive::new(PrimitiveKind::Volatility)),
            Err(InsightError::InsufficientData(_))
        ));
    }

    #[test]
    fn comparative_factor_and_distance() {
        let s = vs(&[1.0, 2.0, 3.0, 6.0]);
        let cf = evaluate(&s, &Primitive::windowed(PrimitiveKind::ComparativeFactor, 2)).unwrap();
        assert!((cf.value - 6.0 / 4.5).abs() < 1e-12);
        let d = evaluate(&s, &Primitive::new(PrimitiveKind::DistanceToMean)).unwrap();
        let sd = (((1.0f64 - 3.0).powi(2) + 1.0 + 0.0 + 9.0) / 3.0).sqrt();
        assert!((d.value - 3.0 / sd).abs() < 1e-12);
    }
}
