use rayon::prelude::*;
use serde::Serialize;

use super::MatrixCocycle;
use crate::error::{LabError, Result};
use crate::linalg::Matrix;
use crate::rng::Stream;

pub const MIN_LYAPUNOV_STEPS: u64 = 1000;

/// Aggregated Lyapunov spectrum over independent orbits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Nonincreasing.
    pub exponents: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Standard error of the per-orbit sum of all exponents.
    pub sum_standard_error: f64,
    pub n_used: u64,
    pub n_orbits: usize,
    pub stream_key: u64,
    /// False when the two halves of the orbit sample disagree by more than
    /// 10 combined standard errors in some exponent.
    pub converged: bool,
    /// Orbits dropped after a non-generic event.
    pub aborted_orbits: usize,
    pub time_unit: &'static str,
    #[serde(skip)]
    pub per_orbit: Vec<Vec<f64>>,
}

impl LyapunovEstimate {
    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    /// `Lambda_k`, the sum of the top `k` exponents.
    pub fn partial_sum(&self, k: usize) -> f64 {
        self.exponents[..k].iter().sum()
    }

    pub fn sum(&self) -> f64 {
        self.partial_sum(self.exponents.len())
    }

    /// True when the top exponent is separated from the second by more than
    /// three combined standard errors.
    pub fn top_is_simple(&self) -> bool {
        match (self.exponents.get(1), self.standard_errors.get(1)) {
            (Some(l2), Some(s2)) => self.exponents[0] - l2 > 3.0 * self.standard_errors[0].hypot(*s2),
            _ => true,
        }
    }

    /// Whether each of the first `k` exponents of two runs agree within three
    /// combined standard errors.
    pub fn agrees_with(&self, other: &LyapunovEstimate, k: usize) -> bool {
        (0..k.min(self.exponents.len()).min(other.exponents.len())).all(|i| {
            let se = self.standard_errors[i].hypot(other.standard_errors[i]);
            (self.exponents[i] - other.exponents[i]).abs() <= 3.0 * se.max(f64::EPSILON)
        })
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Combines per-orbit spectra into means, standard errors and a convergence
/// flag.
pub(crate) fn aggregate(per_orbit: Vec<Vec<f64>>, n_used: u64, stream_key: u64) -> LyapunovEstimate {
    let m = per_orbit[0].len();
    let n_orbits = per_orbit.len();
    let mut pairs: Vec<(f64, f64)> = (0..m).map(|i| mean_and_se(per_orbit.iter().map(move |o| o[i]))).collect();
    let (_, sum_se) = mean_and_se(per_orbit.iter().map(|o| o.iter().sum::<f64>()));
    let half = n_orbits / 2;
    let converged = half < 2
        || (0..m).all(|i| {
            let (a, sa) = mean_and_se(per_orbit[..half].iter().map(move |o| o[i]));
            let (b, sb) = mean_and_se(per_orbit[half..].iter().map(move |o| o[i]));
            (a - b).abs() <= 10.0 * sa.hypot(sb) + 1e-12 * (1.0 + a.abs())
        });
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    LyapunovEstimate {
        exponents: pairs.iter().map(|p| p.0).collect(),
        standard_errors: pairs.iter().map(|p| p.1).collect(),
        sum_standard_error: sum_se,
        n_used,
        n_orbits,
        stream_key,
        converged,
        aborted_orbits: 0,
        time_unit: "cocycle steps",
        per_orbit,
    }
}

/// Benettin estimate of the Lyapunov spectrum.
///
/// Each orbit starts at a `mu`-sample drawn from `stream.substream(i)`, runs
/// `n_steps / 10` unrecorded steps so the frame aligns with the Oseledets
/// filtration, then accumulates the log-diagonal of the QR factorisation
/// taken every `renorm_period` steps over `n_steps` further steps.
pub fn lyapunov_spectrum(
    coc: &MatrixCocycle,
    n_steps: u64,
    n_orbits: usize,
    stream: &Stream,
) -> Result<LyapunovEstimate> {
    if n_steps < MIN_LYAPUNOV_STEPS {
        return Err(LabError::Invalid(format!("lyapunov_spectrum needs N >= 1000, got {n_steps}")));
    }
    if n_orbits == 0 {
        return Err(LabError::Invalid("n_orbits must be positive".into()));
    }
    let per_orbit: Vec<Vec<f64>> =
        (0..n_orbits as u64).into_par_iter().map(|i| orbit_spectrum(coc, n_steps, &mut stream.substream(i))).collect();
    let est = aggregate(per_orbit, n_steps, stream.key());
    if est.exponents.iter().any(|l| !l.is_finite()) {
        return Err(LabError::Diagnostic("Lyapunov exponents are not finite".into()));
    }
    Ok(est)
}

fn orbit_spectrum(coc: &MatrixCocycle, n_steps: u64, stream: &mut Stream) -> Vec<f64> {
    let m = coc.dim();
    let period = coc.renorm_period() as u64;
    let x = coc.base().sample_measure(stream);
    let mut q = Matrix::identity(m);
    let mut tmp = Matrix::zeros(m);
    let mut logs = vec![0.0; m];
    let burn_in = n_steps / 10;
    let total = burn_in + n_steps;
    let mut step = 0u64;
    coc.walk(&x, total, |a| {
        a.mul_into(&q, &mut tmp);
        std::mem::swap(&mut q, &mut tmp);
        step += 1;
        if step.is_multiple_of(period) || step == burn_in || step == total {
            let (nq, diag) = q.qr_positive();
            q = nq;
            if step > burn_in {
                for (l, d) in logs.iter_mut().zip(&diag) {
                    *l += d.ln();
                }
            }
        }
    });
    logs.iter().map(|l| l / n_steps as f64).collect()
}
