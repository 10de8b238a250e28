//! Agreement and concordance statistics.
//!
//! All functions are pure. Variances use the population (divide by n) form.

use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("invalid lag grid: {0}")]
    InvalidGrid(String),
    #[error("sequence of {len} samples is too short for a {max_lag_s} s lag grid; reduce the grid's max lag below {limit_s:.2} s")]
    GridTooLong { len: usize, max_lag_s: f64, limit_s: f64 },
    #[error("every annotator pair was skipped (constant traces)")]
    NoValidPairs,
    #[error("{0}")]
    InvalidArgument(String),
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort { needed: 2, got: x.len() });
    }
    Ok(())
}

/// Means, population variances and covariance of a pair.
#[derive(Clone, Copy, Debug)]
pub struct PairMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

pub fn pair_moments(x: &[f64], y: &[f64]) -> PairMoments {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut c) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mean_x, b - mean_y);
        vx += da * da;
        vy += db * db;
        c += da * db;
    }
    PairMoments {
        mean_x,
        mean_y,
        var_x: vx / n,
        var_y: vy / n,
        cov: c / n,
    }
}

/// Pearson's correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(MetricError::Degenerate("pearson of a constant sequence"));
    }
    let m = pair_moments(x, y);
    Ok((m.cov / (m.var_x.sqrt() * m.var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Concordance correlation coefficient:
/// `2 cov / (var_x + var_y + (mean_x - mean_y)^2)`.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let m = pair_moments(x, y);
    let gap = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + gap * gap;
    if denom <= 0.0 || (is_constant(x) && is_constant(y) && x[0] == y[0]) {
        return Err(MetricError::Degenerate("ccc of two identical constant sequences"));
    }
    Ok((2.0 * m.cov / denom).clamp(-1.0, 1.0))
}

/// True when every sample equals the first one.
pub fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Uniform grid of non-negative lags `{0, step, ..., max_lag}` in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagGrid {
    step_s: f64,
    max_lag_s: f64,
    sample_rate: f64,
}

impl LagGrid {
    pub fn new(step_s: f64, max_lag_s: f64, sample_rate: f64) -> Result<Self, MetricError> {
        if !(step_s > 0.0) || !(max_lag_s >= 0.0) || !(sample_rate > 0.0) {
            return Err(MetricError::InvalidGrid(format!(
                "step {step_s} s, max lag {max_lag_s} s, rate {sample_rate} Hz"
            )));
        }
        let step_samples = step_s * sample_rate;
        if (step_samples - step_samples.round()).abs() > 1e-9 || step_samples.round() < 1.0 {
            return Err(MetricError::InvalidGrid(format!(
                "step {step_s} s is not a whole number of samples at {sample_rate} Hz"
            )));
        }
        let ratio = max_lag_s / step_s;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(MetricError::InvalidGrid(format!("max lag {max_lag_s} s is not a multiple of step {step_s} s")));
        }
        Ok(LagGrid {
            step_s,
            max_lag_s,
            sample_rate,
        })
    }

    /// 100 ms steps up to 10 s.
    pub fn standard(sample_rate: f64) -> Self {
        LagGrid::new(0.1, 10.0, sample_rate).expect("standard grid is valid at integer-multiple-of-10 Hz rates")
    }

    /// The zero-lag grid `{0}`.
    pub fn zero(sample_rate: f64) -> Self {
        LagGrid {
            step_s: 1.0 / sample_rate,
            max_lag_s: 0.0,
            sample_rate,
        }
    }

    pub fn step_s(&self) -> f64 {
        self.step_s
    }

    pub fn max_lag_s(&self) -> f64 {
        self.max_lag_s
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        (self.max_lag_s / self.step_s).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lags in seconds.
    pub fn lags_s(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.step_s).collect()
    }

    /// Lags in whole samples.
    pub fn lags_samples(&self) -> Vec<usize> {
        let step = (self.step_s * self.sample_rate).round() as usize;
        (0..self.len()).map(|i| i * step).collect()
    }

    pub fn max_lag_samples(&self) -> usize {
        *self.lags_samples().last().unwrap()
    }
}

/// CCC of `x` against `y` delayed by every lag of the grid. Each lag `k`
/// compares the overlap `x[k..]` with `y[..len - k]`.
pub fn cross_ccc_profile(x: &[f64], y: &[f64], grid: &LagGrid) -> Result<Vec<f64>, MetricError> {
    check_pair(x, y)?;
    let t = x.len();
    let max = grid.max_lag_samples();
    if max + 2 > t {
        return Err(MetricError::GridTooLong {
            len: t,
            max_lag_s: grid.max_lag_s(),
            limit_s: t.saturating_sub(2) as f64 / grid.sample_rate(),
        });
    }
    grid.lags_samples().into_iter().map(|k| ccc(&x[k..], &y[..t - k])).collect()
}

/// Mean of [`cross_ccc_profile`] over the grid.
pub fn cross_ccc(x: &[f64], y: &[f64], grid: &LagGrid) -> Result<f64, MetricError> {
    let profile = cross_ccc_profile(x, y, grid)?;
    Ok(profile.iter().sum::<f64>() / profile.len() as f64)
}

/// Standardized two-item Cronbach's alpha for a pair with correlation `r`.
pub fn two_item_alpha(r: f64) -> f64 {
    2.0 * r / (1.0 + r)
}

/// Mean two-item standardized alpha over all unordered annotator pairs.
///
/// Pairs involving a constant trace are skipped with a warning.
pub fn pairwise_cronbach_alpha<T: AsRef<[f64]>>(traces: &[T]) -> Result<f64, MetricError> {
    if traces.len() < 2 {
        return Err(MetricError::TooShort {
            needed: 2,
            got: traces.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            match pearson(traces[i].as_ref(), traces[j].as_ref()) {
                Ok(r) => {
                    total += two_item_alpha(r);
                    count += 1;
                }
                Err(MetricError::Degenerate(_)) => {
                    warn!("skipping annotator pair ({i}, {j}): constant trace");
                }
                Err(e) => return Err(e),
            }
        }
    }
    if count == 0 {
        return Err(MetricError::NoValidPairs);
    }
    Ok(total / count as f64)
}

/// Per-recording agreement values with their mean and population variance.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub per_recording_alpha: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl AgreementReport {
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self, MetricError> {
        if alphas.is_empty() {
            return Err(MetricError::TooShort { needed: 1, got: 0 });
        }
        let n = alphas.len() as f64;
        let mean = alphas.iter().sum::<f64>() / n;
        let variance = alphas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        Ok(AgreementReport {
            per_recording_alpha: alphas,
            mean,
            variance,
        })
    }
}

const FISHER_LIMIT: f64 = 1.0 - 1e-6;

/// Fisher r-to-z transform; values with `|r| >= 1` are clamped to
/// `±(1 - 1e-6)` first.
pub fn fisher_z(r: f64) -> f64 {
    let clamped = if r.abs() >= 1.0 {
        warn!("agreement value {r} outside (-1, 1); clamped for the Fisher transform");
        r.signum() * FISHER_LIMIT
    } else {
        r
    };
    clamped.atanh()
}

/// Paired one-tailed comparison of two agreement samples after the Fisher
/// transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherComparison {
    /// Mean of `z(b) - z(a)` over recordings.
    pub mean_z_diff: f64,
    /// Paired t statistic of the z differences.
    pub t: f64,
    /// `P(T >= t)` under the null, i.e. evidence that `b` exceeds `a`.
    pub p_one_tailed: f64,
}

/// Tests whether agreement values `b` are larger than `a` (matched by
/// position) using a paired one-tailed t-test on Fisher z values.
pub fn fisher_alpha_comparison(a: &[f64], b: &[f64]) -> Result<FisherComparison, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricError::TooShort { needed: 2, got: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| fisher_z(y) - fisher_z(x)).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = if sd > 0.0 {
        mean / (sd / n.sqrt())
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    };
    let p = if t.is_infinite() {
        if t > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| MetricError::InvalidArgument(e.to_string()))?;
        1.0 - dist.cdf(t)
    };
    Ok(FisherComparison {
        mean_z_diff: mean,
        t,
        p_one_tailed: p,
    })
}
