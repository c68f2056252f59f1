//! Reward-curve statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

/// Bootstrap resample count used by [`ci95`].
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Trailing moving average. The first `window - 1` entries average the
/// prefix that is available so far.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    // Direct sums rather than a running total, so no drift accumulates.
    let window = window.max(1);
    (0..series.len())
        .map(|i| mean(&series[(i + 1).saturating_sub(window)..=i]))
        .collect()
}

/// Trapezoidal area under a per-episode curve with unit spacing, divided by 1000.
pub fn auc(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Std,
}

impl Statistic {
    pub fn of(self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => mean(values),
            Statistic::Std => std_dev(values),
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Percentile-bootstrap 95% interval of `stat` over `values`.
///
/// Quantiles use linear interpolation between order statistics. The interval
/// is widened to contain the point estimate if resampling noise excludes it.
pub fn ci95(values: &[f64], seed: u64, stat: Statistic) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(ExpError::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut sample = vec![0.0; n];
    let mut stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for s in sample.iter_mut() {
                *s = values[rng.random_range(0..n)];
            }
            stat.of(&sample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let point = stat.of(values);
    let lo = quantile(&stats, 0.025).min(point);
    let hi = quantile(&stats, 0.975).max(point);
    Ok((lo, hi))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Mean of the last `k` entries (all entries if shorter).
pub fn tail_mean(series: &[f64], k: usize) -> f64 {
    mean(&series[series.len().saturating_sub(k)..])
}

/// Mean of the first `k` entries (all entries if shorter).
pub fn head_mean(series: &[f64], k: usize) -> f64 {
    mean(&series[..k.min(series.len())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 10.0, 20.0];
        assert_eq!(quantile(&s, 0.5), 10.0);
        assert_eq!(quantile(&s, 0.25), 5.0);
        assert_eq!(quantile(&s, 1.0), 20.0);
    }

    #[test]
    fn head_and_tail() {
        let s: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(tail_mean(&s, 2), 8.5);
        assert_eq!(head_mean(&s, 2), 0.5);
        assert_eq!(tail_mean(&s, 50), 4.5);
    }
}
