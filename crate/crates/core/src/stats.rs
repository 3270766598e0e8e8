//! Small estimators shared by the experiment labs.

use statrs::distribution::{Beta, ContinuousCDF};

/// Sample mean and its standard error (sample standard deviation over √N).
///
/// Returns `(NaN, NaN)` for an empty slice and a zero standard error for a
/// single observation.
pub fn mean_std_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Exact (Clopper–Pearson) two-sided confidence interval for a binomial
/// proportion with `successes` out of `trials`.
///
/// The lower end is the `α/2` quantile of `Beta(k, N − k + 1)` (0 when
/// `k = 0`), the upper end the `1 − α/2` quantile of `Beta(k + 1, N − k)`
/// (1 when `k = N`).
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials, "successes exceed trials");
    assert!((0.0..1.0).contains(&confidence), "confidence must be in [0, 1)");
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("valid beta shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("valid beta shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}
