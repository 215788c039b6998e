//! Time-series estimates with autocorrelation-aware error bars.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Integrated autocorrelation time `τ = 1/2 + Σ_{t≥1} ρ(t)`, in samples.
    pub autocorrelation_time: f64,
}

/// Window constant of the automatic windowing rule `M ≥ c τ(M)`.
const WINDOW_C: f64 = 6.0;

impl Estimate {
    /// Mean of `series`, with error `sqrt(2τ var / n)`.
    ///
    /// # Panics
    /// If `series` is empty.
    pub fn from_series(series: &[f64]) -> Estimate {
        assert!(!series.is_empty(), "an estimate needs at least one sample");
        let n = series.len();
        let mean = series.iter().sum::<f64>() / n as f64;
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let tau = if var > 0.0 { integrated_autocorrelation_time(series, mean, var) } else { 0.5 };
        let std_error = (2.0 * tau * var / n as f64).sqrt();
        Estimate { mean, std_error, n_samples: n, autocorrelation_time: tau }
    }

    /// Effective number of independent samples, `n / 2τ`.
    pub fn effective_samples(&self) -> f64 {
        self.n_samples as f64 / (2.0 * self.autocorrelation_time)
    }
}

fn integrated_autocorrelation_time(series: &[f64], mean: f64, var: f64) -> f64 {
    let n = series.len();
    let mut tau = 0.5;
    let max_lag = n / 4;
    for t in 1..=max_lag {
        let cov = series[..n - t].iter().zip(&series[t..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>()
            / (n - t) as f64;
        tau += cov / var;
        if t as f64 >= WINDOW_C * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// 95% Wilson score interval for `successes` out of `n` (fractional `n` allowed for
/// effective sample sizes).
pub fn wilson_interval(fraction: f64, n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (fraction + z2 / (2.0 * n)) / denom;
    let half = z * (fraction * (1.0 - fraction) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn iid_series_has_unit_tau() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let e = Estimate::from_series(&xs);
        assert!((e.mean - 0.5).abs() < 4.0 * e.std_error);
        assert!((e.autocorrelation_time - 0.5).abs() < 0.1);
    }

    #[test]
    fn ar1_tau_matches_closed_form() {
        // ρ(t) = φ^t gives τ = 1/2 + φ/(1-φ).
        let phi: f64 = 0.8;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = phi * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let e = Estimate::from_series(&xs);
        let expected = 0.5 + phi / (1.0 - phi);
        assert!((e.autocorrelation_time - expected).abs() < 0.1 * expected, "{e:?}");
    }

    #[test]
    fn error_shrinks_with_sample_size() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let small = Estimate::from_series(&xs[..16_000]);
        let large = Estimate::from_series(&xs);
        let ratio = small.std_error / large.std_error;
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn constant_series() {
        let e = Estimate::from_series(&[1.0; 10]);
        assert_eq!((e.mean, e.std_error, e.autocorrelation_time), (1.0, 0.0, 0.5));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(1.0, 100.0);
        assert!(lo > 0.95 && hi == 1.0);
        let (lo, hi) = wilson_interval(0.5, 100.0);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }
}
