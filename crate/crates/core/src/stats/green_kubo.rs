//! Green-Kubo estimate of the CLT variance.

use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::Observable;
use crate::dynamics::PhaseSpaceSystem;
use crate::error::{LabError, Result};
use crate::rng::Stream;
use crate::summation::CompensatedSum;

pub const MAX_LAG: usize = 1000;

/// Each sampled orbit averages lag products over this many multiples of
/// `lag_max` starting times.
pub const WINDOW_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenKuboEstimate {
    /// Clamped at zero.
    pub variance: f64,
    /// `C(0) + 2 sum_{n=1}^{lag_max} C(n)` before clamping.
    pub raw_variance: f64,
    /// `C(n)` for `n = 0..=lag_max`.
    pub autocovariances: Vec<f64>,
    /// `2 sum C(n)` over the last decade of lags, relative to the estimate.
    pub tail_fraction: f64,
    pub tail_ok: bool,
    pub warnings: Vec<String>,
}

/// `Var(f) + 2 sum_{n=1}^{lag_max} Cov(f, f o T^n)`.
///
/// Autocovariances are centred at the exact mean of `f` and averaged over
/// `4 * lag_max` starting times along each of `n_samples` independent orbits.
pub fn variance_green_kubo(
    sys: &PhaseSpaceSystem,
    f: &Observable,
    lag_max: usize,
    n_samples: usize,
    stream: &Stream,
) -> Result<GreenKuboEstimate> {
    f.check_system(sys)?;
    if lag_max == 0 || lag_max > MAX_LAG {
        return Err(LabError::Invalid(format!("lag_max must lie in 1..=1000, got {lag_max}")));
    }
    if n_samples == 0 {
        return Err(LabError::Invalid("n_samples must be positive".into()));
    }
    let window = WINDOW_FACTOR * lag_max;
    let mean = f.exact_mean;
    let per_orbit: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = stream.substream(i);
            let mut p = sys.sample_measure(&mut s);
            let values: Vec<f64> = (0..window + lag_max)
                .map(|_| {
                    let v = f.eval(sys, &p) - mean;
                    p = sys.step(&p);
                    v
                })
                .collect();
            (0..=lag_max).map(|n| (0..window).map(|k| values[k] * values[k + n]).sum::<f64>() / window as f64).collect()
        })
        .collect();
    let autocovariances: Vec<f64> = (0..=lag_max)
        .map(|n| per_orbit.iter().map(|o| o[n]).sum::<CompensatedSum>().value() / n_samples as f64)
        .collect();
    let raw_variance = autocovariances[0] + 2.0 * autocovariances[1..].iter().sum::<f64>();
    let tail_start = (lag_max - lag_max / 10).max(1);
    let tail = 2.0 * autocovariances[tail_start..].iter().sum::<f64>();
    let mut warnings = Vec::new();
    let variance = if raw_variance < 0.0 {
        warnings.push(format!("truncated Green-Kubo sum {raw_variance:.3e} is negative; clamped to 0"));
        0.0
    } else {
        raw_variance
    };
    let tail_fraction = if variance > 0.0 {
        tail.abs() / variance
    } else if tail == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let tail_ok = tail_fraction < 0.01;
    if !tail_ok {
        warnings
            .push(format!("last-decade lags carry {:.2}% of the variance; increase lag_max", 100.0 * tail_fraction));
    }
    Ok(GreenKuboEstimate { variance, raw_variance, autocovariances, tail_fraction, tail_ok, warnings })
}
