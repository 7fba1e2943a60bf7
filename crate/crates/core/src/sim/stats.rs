use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Trailing moving average; the first `window - 1` points average what is available.
pub fn rolling_mean_trailing(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// First index where the curve reaches `fraction` of its plateau (mean of the last 10%).
pub fn time_to_fraction_of_plateau(curve: &[f64], fraction: f64) -> Option<usize> {
    if curve.is_empty() {
        return None;
    }
    let tail = (curve.len() / 10).max(1);
    let plateau = curve[curve.len() - tail..].iter().sum::<f64>() / tail as f64;
    curve.iter().position(|v| *v >= fraction * plateau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub mean: f64,
    pub stddev: f64,
    pub t: f64,
    /// P(mean difference <= 0) under the null.
    pub p_value: f64,
}

/// One-sided paired t-test of H1: mean(diffs) > 0.
pub fn one_sided_paired_t(diffs: &[f64]) -> TTest {
    let n = diffs.len();
    let mean = if n == 0 { 0.0 } else { diffs.iter().sum::<f64>() / n as f64 };
    let stddev = if n < 2 {
        0.0
    } else {
        (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    if n < 2 || stddev == 0.0 {
        // no spread: the sign of the mean decides
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        let t = if mean > 0.0 { f64::INFINITY } else if mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        return TTest { mean, stddev, t, p_value: p };
    }
    let t = mean / (stddev / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    TTest { mean, stddev, t, p_value: 1.0 - dist.cdf(t) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_partial_windows() {
        assert_eq!(rolling_mean_trailing(&[2.0, 4.0, 6.0, 8.0], 2), vec![2.0, 3.0, 5.0, 7.0]);
        assert_eq!(rolling_mean_trailing(&[1.0], 20), vec![1.0]);
    }

    #[test]
    fn plateau_time() {
        let curve: Vec<f64> = (0..100).map(|i| (i as f64).min(50.0)).collect();
        assert_eq!(time_to_fraction_of_plateau(&curve, 0.9), Some(45));
        assert_eq!(time_to_fraction_of_plateau(&[], 0.9), None);
    }

    #[test]
    fn t_test_against_closed_form() {
        // mean 1, sd sqrt(4/3), n = 4 gives t = sqrt(3); the 3-df cdf has a closed form
        let r = one_sided_paired_t(&[0.0, 0.0, 2.0, 2.0]);
        assert!((r.t - 3f64.sqrt()).abs() < 1e-12);
        let t = r.t;
        let cdf = 0.5 + (t / (3f64.sqrt() * (1.0 + t * t / 3.0)) + (t / 3f64.sqrt()).atan()) / std::f64::consts::PI;
        assert!((r.p_value - (1.0 - cdf)).abs() < 1e-9);
        assert_eq!(one_sided_paired_t(&[0.5; 5]).p_value, 0.0);
        assert_eq!(one_sided_paired_t(&[0.0; 5]).p_value, 1.0);
    }
}
