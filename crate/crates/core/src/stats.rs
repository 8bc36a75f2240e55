//! Small statistics toolkit: blocking errors for correlated series,
//! jackknife, weighted least squares.

use serde::{Deserialize, Serialize};

/// A point estimate with a one-standard-error bar.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(mean: f64, error: f64) -> Self {
        Self { mean, error }
    }

    /// Whether `|self - other| <= n_sigma * sqrt(σ₁² + σ₂²)`.
    pub fn agrees_with(&self, other: &Estimate, n_sigma: f64) -> bool {
        (self.mean - other.mean).abs() <= n_sigma * self.error.hypot(other.error)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.mean * c, self.error * c.abs())
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Smallest number of blocks a blocking level may have and still be trusted.
const MIN_BLOCKS: usize = 16;

/// Standard error of the mean of a correlated series by repeated pairwise
/// blocking (Flyvbjerg–Petersen).
///
/// The error estimate grows with the block length until blocks decorrelate.
/// The first level whose successor stays within the successor's own
/// statistical uncertainty is taken as the plateau; if none plateaus the
/// largest estimate over trusted levels is returned.
pub fn blocking_error(xs: &[f64]) -> f64 {
    let levels = blocking_levels(xs);
    if levels.is_empty() {
        return f64::NAN;
    }
    for w in levels.windows(2) {
        let (e0, _) = w[0];
        let (e1, n1) = w[1];
        let delta = e1 / (2.0 * (n1 as f64 - 1.0)).sqrt();
        if e1 <= e0 + delta {
            return e0.max(e1);
        }
    }
    levels.iter().map(|(e, _)| *e).fold(0.0, f64::max)
}

/// `(error estimate, number of blocks)` for every trusted blocking level.
pub fn blocking_levels(xs: &[f64]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    let mut cur = xs.to_vec();
    while cur.len() >= MIN_BLOCKS {
        let n = cur.len();
        out.push(((variance(&cur) / n as f64).sqrt(), n));
        cur = cur.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    if out.is_empty() && xs.len() >= 2 {
        out.push(((variance(xs) / xs.len() as f64).sqrt(), xs.len()));
    }
    out
}

/// Mean and blocking error of a series.
pub fn blocked_estimate(xs: &[f64]) -> Estimate {
    Estimate::new(mean(xs), blocking_error(xs))
}

/// Ratio of means `Σa / Σb` with a delta-method blocking error.
pub fn ratio_estimate(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let mb = mean(b);
    let r = mean(a) / mb;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    Estimate::new(r, blocking_error(&resid) / mb.abs())
}

/// Jackknife mean and error from leave-one-out estimates.
pub fn jackknife(leave_one_out: &[f64]) -> Estimate {
    let n = leave_one_out.len() as f64;
    let m = mean(leave_one_out);
    let ss: f64 = leave_one_out.iter().map(|x| (x - m) * (x - m)).sum();
    Estimate::new(m, ((n - 1.0) / n * ss).sqrt())
}

/// Straight-line fit `y = a + b x` with weights `1/σ²`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_err: f64,
    pub slope_err: f64,
}

pub fn weighted_line_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Option<LineFit> {
    if x.len() < 2 || x.len() != y.len() || x.len() != sigma.len() {
        return None;
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (sigma[i] * sigma[i]);
        if !w.is_finite() {
            return None;
        }
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let det = s * sxx - sx * sx;
    if det.abs() <= f64::EPSILON * s * sxx {
        return None;
    }
    Some(LineFit {
        intercept: (sxx * sy - sx * sxy) / det,
        slope: (s * sxy - sx * sy) / det,
        intercept_err: (sxx / det).sqrt(),
        slope_err: (s / det).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_relative_eq!(variance(&xs), 5.0 / 3.0);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn blocking_matches_naive_error_for_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..1 << 16).map(|_| rng.gen::<f64>()).collect();
        let naive = (variance(&xs) / xs.len() as f64).sqrt();
        let b = blocking_error(&xs);
        assert!((b / naive - 1.0).abs() < 0.15, "{b} vs {naive}");
    }

    #[test]
    fn blocking_inflates_error_for_correlated_series() {
        // AR(1) with φ = 0.9: integrated autocorrelation time (1+φ)/(1-φ) = 19.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi: f64 = 0.9;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..1 << 18)
            .map(|_| {
                x = phi * x + rng.gen::<f64>() - 0.5;
                x
            })
            .collect();
        let naive = (variance(&xs) / xs.len() as f64).sqrt();
        let ratio = blocking_error(&xs) / naive;
        let expected = ((1.0 + phi) / (1.0 - phi)).sqrt();
        assert!((ratio / expected - 1.0).abs() < 0.2, "{ratio} vs {expected}");
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let n = xs.len() as f64;
        let total: f64 = xs.iter().sum();
        let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (n - 1.0)).collect();
        let jk = jackknife(&loo);
        assert_relative_eq!(jk.mean, mean(&xs), epsilon = 1e-12);
        assert_relative_eq!(jk.error, (variance(&xs) / n).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = weighted_line_fit(&x, &y, &[1.0; 4]).unwrap();
        assert_relative_eq!(f.intercept, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-12);
        assert!(weighted_line_fit(&[1.0], &[1.0], &[1.0]).is_none());
    }
}
