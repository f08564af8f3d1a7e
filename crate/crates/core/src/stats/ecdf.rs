//! Empirical distributions and the Kolmogorov-Smirnov distance.

use super::law::{Interval, ReferenceLaw};
use crate::error::{LabError, Result};

/// Sorted sample of a real random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(LabError::Invalid("empirical distribution needs at least one sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(LabError::Invalid("NaN in samples".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Right-continuous ecdf, `#{s <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.count() as f64
    }

    /// Left limit, `#{s < x} / n`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s < x) as f64 / self.count() as f64
    }

    /// Fraction of samples in the open interval.
    pub fn mass(&self, interval: &Interval) -> f64 {
        (self.cdf_left(interval.b) - self.cdf(interval.a)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Unbiased sample variance (zero for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.count();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

/// Sup-norm distance between the ecdf and the law's distribution function.
///
/// Both step functions are compared at every jump point from either side, so
/// the value is exact for continuous, atomic and empirical laws alike.
pub fn ks_distance(emp: &EmpiricalDistribution, law: &ReferenceLaw) -> f64 {
    let mut d: f64 = 0.0;
    match law {
        ReferenceLaw::Gaussian { .. } => {
            // Continuous reference: only the ecdf jumps.
            let n = emp.count() as f64;
            let s = emp.samples();
            let mut i = 0;
            while i < s.len() {
                let t = s[i];
                let mut j = i;
                while j < s.len() && s[j] == t {
                    j += 1;
                }
                let f = law.cdf(t);
                d = d.max((j as f64 / n - f).abs()).max((f - i as f64 / n).abs());
                i = j;
            }
        }
        _ => {
            let mut check = |t: f64| {
                d = d.max((emp.cdf(t) - law.cdf(t)).abs()).max((emp.cdf_left(t) - law.cdf_left(t)).abs());
            };
            for &t in emp.samples() {
                check(t);
            }
            for &t in law.atoms() {
                check(t);
            }
        }
    }
    d.min(1.0)
}
