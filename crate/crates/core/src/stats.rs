//! Ensemble statistics with a fixed summation order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::realization_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// |value - reference| in units of the standard error, with `floor`
    /// standing in for a vanishing error.
    pub fn z_score(&self, reference: f64, floor: f64) -> f64 {
        (self.value - reference).abs() / self.std_error.max(floor)
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and unbiased variance (zero for a single sample).
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, pairwise_sum(&dev) / (n - 1.0))
}

pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let (mean, var) = mean_variance(xs);
    Estimate {
        value: mean,
        std_error: (var / xs.len() as f64).sqrt(),
    }
}

/// Unbiased sample variance with its large-sample standard error
/// √((μ₄ - σ⁴(n-3)/(n-1))/n).
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let (mean, var) = mean_variance(xs);
    if xs.len() < 4 {
        return Estimate {
            value: var,
            std_error: f64::INFINITY,
        };
    }
    let m4 = pairwise_sum(&xs.iter().map(|x| (x - mean).powi(4)).collect::<Vec<_>>()) / n;
    let v = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    Estimate {
        value: var,
        std_error: v.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges on [0, 1].
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn unit_interval(values: impl Iterator<Item = f64>, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        for v in values {
            let k = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self {
            edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub samples: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub std_error: Vec<f64>,
    pub histograms: Vec<Histogram>,
}

pub const HISTOGRAM_BINS: usize = 20;

/// Per-state statistics of final population vectors.
pub fn ensemble_statistics(finals: &[Vec<f64>]) -> Result<EnsembleSummary> {
    let Some(first) = finals.first() else {
        return Err(Error::Domain("ensemble statistics need at least one sample".into()));
    };
    let d = first.len();
    if finals.iter().any(|f| f.len() != d) {
        return Err(Error::Domain("population vectors have different lengths".into()));
    }
    let n = finals.len() as f64;
    let mut out = EnsembleSummary {
        samples: finals.len(),
        mean: Vec::with_capacity(d),
        variance: Vec::with_capacity(d),
        std_error: Vec::with_capacity(d),
        histograms: Vec::with_capacity(d),
    };
    for j in 0..d {
        let col: Vec<f64> = finals.iter().map(|f| f[j]).collect();
        let (mean, var) = mean_variance(&col);
        out.mean.push(mean);
        out.variance.push(var);
        out.std_error.push((var / n).sqrt());
        out.histograms
            .push(Histogram::unit_interval(col.into_iter(), HISTOGRAM_BINS));
    }
    Ok(out)
}

/// Bootstrap standard error of the mean from `resamples` resamplings.
pub fn bootstrap_standard_error(values: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if values.is_empty() || resamples < 2 {
        return Err(Error::Domain("bootstrap needs data and at least two resamples".into()));
    }
    let mut rng = realization_rng(seed, 0);
    let n = values.len();
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    Ok(mean_variance(&means).1.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_have_zero_variance() {
        let finals = vec![vec![0.25, 0.75]; 10];
        let s = ensemble_statistics(&finals).unwrap();
        assert_eq!(s.variance, vec![0.0, 0.0]);
        assert_eq!(s.mean, vec![0.25, 0.75]);
        assert_eq!(s.histograms[0].counts[5], 10);
    }

    #[test]
    fn two_point_sample() {
        let n = 50;
        let finals: Vec<Vec<f64>> = (0..n).map(|k| vec![(k % 2) as f64]).collect();
        let s = ensemble_statistics(&finals).unwrap();
        assert!((s.mean[0] - 0.5).abs() < 1e-15);
        let expected = n as f64 / (n as f64 - 1.0) * 0.25;
        assert!((s.variance[0] - expected).abs() < 1e-15);
        assert!(ensemble_statistics(&[]).is_err());
    }

    #[test]
    fn bootstrap_matches_bernoulli_se() {
        let mut rng = realization_rng(42, 0);
        let p = 0.3;
        let draws: Vec<f64> = (0..1000)
            .map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        let est = mean_estimate(&draws);
        let analytic = (est.value * (1.0 - est.value) / 1000.0).sqrt();
        let boot = bootstrap_standard_error(&draws, 2000, 7).unwrap();
        assert!((boot / analytic - 1.0).abs() < 0.1, "{boot} vs {analytic}");
    }

    #[test]
    fn variance_error_for_normal_data() {
        let mut rng = realization_rng(9, 3);
        let xs: Vec<f64> = (0..20000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let v = variance_estimate(&xs);
        // Var(s²) = 2σ⁴/(n-1) for Gaussian data
        assert!((v.std_error / (2.0f64 / 19999.0).sqrt() - 1.0).abs() < 0.05);
        assert!(v.z_score(1.0, 0.0) < 4.0);
    }
}
