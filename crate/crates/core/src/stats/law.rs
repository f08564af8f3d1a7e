//! Limiting laws and intervals.

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::ecdf::EmpiricalDistribution;
use crate::error::{LabError, Result};

/// Standard normal distribution function.
#[inline]
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Reference law `S` of a distributional limit theorem.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceLaw {
    Gaussian { variance: f64 },
    DiracAtZero,
    Empirical(EmpiricalDistribution),
}

impl ReferenceLaw {
    /// Centred Gaussian; variance zero collapses to the Dirac mass at zero.
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(LabError::Invalid(format!("gaussian variance {variance} must be >= 0")));
        }
        Ok(if variance == 0.0 { ReferenceLaw::DiracAtZero } else { ReferenceLaw::Gaussian { variance } })
    }

    /// `P(S <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ReferenceLaw::Gaussian { variance } => standard_normal_cdf(x / variance.sqrt()),
            ReferenceLaw::DiracAtZero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ReferenceLaw::Empirical(e) => e.cdf(x),
        }
    }

    /// `P(S < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            ReferenceLaw::Gaussian { .. } => self.cdf(x),
            ReferenceLaw::DiracAtZero => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ReferenceLaw::Empirical(e) => e.cdf_left(x),
        }
    }

    /// Points carrying positive mass.
    pub fn atoms(&self) -> &[f64] {
        match self {
            ReferenceLaw::Gaussian { .. } => &[],
            ReferenceLaw::DiracAtZero => &[0.0],
            ReferenceLaw::Empirical(e) => e.samples(),
        }
    }

    /// `P(S in (a, b))` for an interval whose endpoints carry no mass.
    pub fn mass(&self, interval: &Interval) -> Result<f64> {
        interval.validate_for(self)?;
        Ok((self.cdf_left(interval.b) - self.cdf(interval.a)).clamp(0.0, 1.0))
    }

    /// `E exp(i t S)`.
    pub fn characteristic_function(&self, t: f64) -> Complex64 {
        match self {
            ReferenceLaw::Gaussian { variance } => Complex64::new((-variance * t * t / 2.0).exp(), 0.0),
            ReferenceLaw::DiracAtZero => Complex64::new(1.0, 0.0),
            ReferenceLaw::Empirical(e) => {
                let n = e.count() as f64;
                let (c, s) = e.samples().iter().fold((0.0, 0.0), |(c, s), x| (c + (t * x).cos(), s + (t * x).sin()));
                Complex64::new(c / n, s / n)
            }
        }
    }

    pub fn describe(&self) -> LawSummary {
        match self {
            ReferenceLaw::Gaussian { variance } => LawSummary { kind: "gaussian", variance: Some(*variance) },
            ReferenceLaw::DiracAtZero => LawSummary { kind: "dirac_at_zero", variance: Some(0.0) },
            ReferenceLaw::Empirical(_) => LawSummary { kind: "empirical", variance: None },
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LawSummary {
    pub kind: &'static str,
    pub variance: Option<f64>,
}

/// Open interval `(a, b)`, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || !(a < b) {
            return Err(LabError::InvalidInterval(format!("need a < b, got ({a}, {b})")));
        }
        Ok(Interval { a, b })
    }

    pub fn whole_line() -> Self {
        Interval { a: f64::NEG_INFINITY, b: f64::INFINITY }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    /// Rejects endpoints that are atoms of the law, `P(S in {a, b}) > 0`.
    pub fn validate_for(&self, law: &ReferenceLaw) -> Result<()> {
        for end in [self.a, self.b] {
            if end.is_finite() && law.cdf(end) - law.cdf_left(end) > 0.0 {
                return Err(LabError::InvalidInterval(format!("endpoint {end} is an atom of the limiting law")));
            }
        }
        Ok(())
    }
}
