//! Monte Carlo estimators for plain, conditional and mixing limit theorems.
//!
//! Sample `i` of every estimator is drawn from `stream.substream(i)`, so two
//! estimators run with the same stream see the same points, and results do
//! not depend on how samples are spread over threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::ecdf::{ks_distance, EmpiricalDistribution};
use super::events::{Event, EventKind};
use super::law::Interval;
use crate::birkhoff::{orbit_sum, NormalizingScheme, Observable};
use crate::cocycle::{sample_direction, MatrixCocycle, Section};
use crate::dynamics::{PhaseSpaceSystem, Point};
use crate::error::{LabError, Result};
use crate::rng::Stream;
use crate::summation::CompensatedSum;

pub const MIN_SAMPLES: usize = 100;

/// `sqrt(n) * E[D_n]` in the large-`n` limit, used as the KS standard error
/// scale.
pub const KS_SCALE: f64 = 0.8687;

/// Largest `|t|` accepted by [`char_fn_estimate`].
pub const MAX_CHAR_FN_T: f64 = 100.0;

/// The quantity whose normalised law is estimated.
#[derive(Debug, Clone)]
pub enum Functional {
    /// Birkhoff sums of an observable.
    Birkhoff { system: PhaseSpaceSystem, observable: Observable },
    /// `sigma(x, v, N)` with `(x, v)` drawn from `mu x nu`.
    CocycleVector(MatrixCocycle),
    /// `sigma(x, N)`.
    CocycleNorm(MatrixCocycle),
    /// `sigma(x, s(x), N)`.
    CocycleSection { cocycle: MatrixCocycle, section: Section },
}

/// One sampled orbit segment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub start: Point,
    pub start_direction: Option<Vec<f64>>,
    /// `S_N`, already normalised.
    pub value: f64,
    pub end: Point,
    pub end_direction: Option<Vec<f64>>,
}

impl Functional {
    pub fn birkhoff(system: PhaseSpaceSystem, observable: Observable) -> Result<Self> {
        observable.check_system(&system)?;
        Ok(Functional::Birkhoff { system, observable })
    }

    pub fn system(&self) -> &PhaseSpaceSystem {
        match self {
            Functional::Birkhoff { system, .. } => system,
            Functional::CocycleVector(c) | Functional::CocycleNorm(c) => c.base(),
            Functional::CocycleSection { cocycle, .. } => cocycle.base(),
        }
    }

    pub fn is_cocycle(&self) -> bool {
        !matches!(self, Functional::Birkhoff { .. })
    }

    fn has_directions(&self) -> bool {
        matches!(self, Functional::CocycleVector(_) | Functional::CocycleSection { .. })
    }

    /// Column name for sample dumps.
    pub fn sample_label(&self) -> &'static str {
        if self.is_cocycle() {
            "sigma"
        } else {
            "S_N"
        }
    }

    /// Draws one outcome from `stream`.
    pub fn outcome(&self, scheme: &NormalizingScheme, n: u64, stream: &mut Stream) -> Result<Outcome> {
        let sys = self.system();
        let x = sys.sample_measure(stream);
        let (raw, end, v, end_dir) = match self {
            Functional::Birkhoff { system, observable } => {
                let (s, end) = orbit_sum(system, observable, &x, n)?;
                (s, end, None, None)
            }
            Functional::CocycleVector(c) => {
                let v = sample_direction(c.dim(), stream);
                let (s, end, dir) = c.sigma_vec_with_endpoint(&x, &v, n)?;
                (s, end, Some(v), Some(dir))
            }
            Functional::CocycleNorm(c) => {
                let (s, end) = c.sigma_norm_with_endpoint(&x, n);
                (s, end, None, None)
            }
            Functional::CocycleSection { cocycle, section } => {
                let v = section.eval(&x)?;
                let (s, end, dir) = cocycle.sigma_vec_with_endpoint(&x, &v, n)?;
                (s, end, Some(v), Some(dir))
            }
        };
        Ok(Outcome { start: x, start_direction: v, value: scheme.normalize(raw, n)?, end, end_direction: end_dir })
    }

    fn check_event(&self, e: &Event) -> Result<()> {
        e.require_positive_mass()?;
        let sys = self.system();
        match &e.kind {
            EventKind::ProjectiveCap { center, .. } => {
                let dim = match self {
                    Functional::CocycleVector(c) | Functional::CocycleSection { cocycle: c, .. } => c.dim(),
                    _ => {
                        return Err(LabError::TypeMismatch(
                            "projective events need a cocycle functional with directions".into(),
                        ))
                    }
                };
                if center.len() != dim {
                    return Err(LabError::TypeMismatch("cap dimension differs from the cocycle".into()));
                }
            }
            EventKind::TorusBox { .. } if sys.torus_dim().is_none() => {
                return Err(LabError::TypeMismatch("torus box on a non-torus system".into()))
            }
            EventKind::ShiftCylinder { .. } if !sys.is_shift() => {
                return Err(LabError::TypeMismatch("cylinder on a non-shift system".into()))
            }
            _ => {}
        }
        debug_assert!(self.has_directions() || !matches!(e.kind, EventKind::ProjectiveCap { .. }));
        Ok(())
    }
}

/// Runs `map` on the outcomes for samples `0..n_samples`, in order.
pub fn draw_outcomes<R: Send>(
    func: &Functional,
    scheme: &NormalizingScheme,
    n: u64,
    n_samples: usize,
    stream: &Stream,
    map: impl Fn(Outcome) -> R + Sync,
) -> Result<Vec<R>> {
    if n_samples < MIN_SAMPLES {
        return Err(LabError::Invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    (0..n_samples as u64).into_par_iter().map(|i| func.outcome(scheme, n, &mut stream.substream(i)).map(&map)).collect()
}

/// Acceptance budget `max(floor, se_multiple * SE)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub floor: f64,
    pub se_multiple: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { floor: 0.02, se_multiple: 5.0 }
    }
}

impl Tolerance {
    pub fn budget(&self, std_error: f64) -> f64 {
        self.floor.max(self.se_multiple * std_error)
    }
}

/// A single estimate against its target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub n_samples: usize,
    pub estimate: f64,
    pub target: f64,
    pub deviation: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    #[allow(clippy::too_many_arguments)]
    fn new(
        experiment: &str,
        stream: &Stream,
        n: u64,
        n_samples: usize,
        estimate: f64,
        target: f64,
        std_error: f64,
        tol: Tolerance,
    ) -> Self {
        let deviation = (estimate - target).abs();
        let tolerance = tol.budget(std_error);
        Report {
            experiment: experiment.to_string(),
            seed: stream.key(),
            n,
            n_samples,
            estimate,
            target,
            deviation,
            std_error,
            tolerance,
            pass: deviation <= tolerance,
            notes: Vec::new(),
        }
    }
}

fn binomial(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Result of [`estimate_plain_dlt`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlainDltReport {
    /// Per `N`: the KS distance to the reference law.
    pub ks: Vec<Report>,
    /// Per `N`, when an interval was given: `mu(S_N in (a, b))` against
    /// `P(S in (a, b))`.
    pub interval: Vec<Report>,
    /// KS distances never increase along the `N` list.
    pub ks_nonincreasing: bool,
    /// Normalised samples for the last `N`.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl PlainDltReport {
    pub fn pass(&self) -> bool {
        self.ks.iter().chain(&self.interval).all(|r| r.pass)
    }
}

/// Empirical law of `S_N` for each `N` against the scheme's law.
pub fn estimate_plain_dlt(
    func: &Functional,
    scheme: &NormalizingScheme,
    n_list: &[u64],
    n_samples: usize,
    interval: Option<Interval>,
    tol: Tolerance,
    stream: &Stream,
) -> Result<PlainDltReport> {
    if n_list.is_empty() {
        return Err(LabError::Invalid("N list is empty".into()));
    }
    if let Some(i) = &interval {
        i.validate_for(&scheme.law)?;
    }
    let mut out = PlainDltReport { ks: Vec::new(), interval: Vec::new(), ks_nonincreasing: true, samples: Vec::new() };
    for &n in n_list {
        let values = draw_outcomes(func, scheme, n, n_samples, stream, |o| o.value)?;
        let emp = EmpiricalDistribution::new(values.clone())?;
        let ks = ks_distance(&emp, &scheme.law);
        out.ks.push(Report::new("plain_dlt", stream, n, n_samples, ks, 0.0, KS_SCALE / (n_samples as f64).sqrt(), tol));
        if let Some(i) = &interval {
            let hits = values.iter().filter(|&&v| i.contains(v)).count();
            let (p, se) = binomial(hits, n_samples);
            out.interval.push(Report::new("plain_dlt_interval", stream, n, n_samples, p, scheme.law.mass(i)?, se, tol));
        }
        out.samples = values;
    }
    out.ks_nonincreasing = out.ks.windows(2).all(|w| w[1].estimate <= w[0].estimate);
    Ok(out)
}

/// Estimate of `mu(x in A, S_N(x) in (a, b))` against `mu(A) P(S in (a, b))`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_conditional_dlt(
    func: &Functional,
    scheme: &NormalizingScheme,
    a: &Event,
    interval: Interval,
    n: u64,
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<(Report, Vec<f64>)> {
    func.check_event(a)?;
    interval.validate_for(&scheme.law)?;
    let sys = func.system();
    let draws = draw_outcomes(func, scheme, n, n_samples, stream, |o| {
        (a.contains(sys, &o.start, o.start_direction.as_deref()), o.value)
    })?;
    let hits = draws.iter().filter(|(ina, v)| *ina && interval.contains(*v)).count();
    let (p, se) = binomial(hits, n_samples);
    let target = a.exact_mass * scheme.law.mass(&interval)?;
    let report = Report::new("conditional_dlt", stream, n, n_samples, p, target, se, tol);
    Ok((report, draws.into_iter().map(|d| d.1).collect()))
}

/// Estimate of `mu(x in A, S_N(x) in (a, b), T^N x in B)` against
/// `mu(A) P(S in (a, b)) mu(B)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mixing_dlt(
    func: &Functional,
    scheme: &NormalizingScheme,
    a: &Event,
    b: &Event,
    interval: Interval,
    n: u64,
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<(Report, Vec<f64>)> {
    func.check_event(a)?;
    func.check_event(b)?;
    interval.validate_for(&scheme.law)?;
    let sys = func.system();
    let draws = draw_outcomes(func, scheme, n, n_samples, stream, |o| {
        let inside = a.contains(sys, &o.start, o.start_direction.as_deref())
            && b.contains(sys, &o.end, o.end_direction.as_deref());
        (inside, o.value)
    })?;
    let hits = draws.iter().filter(|(inside, v)| *inside && interval.contains(*v)).count();
    let (p, se) = binomial(hits, n_samples);
    let target = a.exact_mass * scheme.law.mass(&interval)? * b.exact_mass;
    let mut report = Report::new("mixing_dlt", stream, n, n_samples, p, target, se, tol);
    if !sys.has_companion() {
        report.notes.push("no companion map: the contraction and adaptedness hypotheses are unverifiable".into());
    }
    Ok((report, draws.into_iter().map(|d| d.1).collect()))
}

/// `|mu(A n T^{-N} B) - mu(A) mu(B)|` for each `N`.
pub fn estimate_mixing_correlation(
    sys: &PhaseSpaceSystem,
    a: &Event,
    b: &Event,
    n_list: &[u64],
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<Vec<Report>> {
    let func = Functional::birkhoff(sys.clone(), Observable::constant(0.0))?;
    func.check_event(a)?;
    func.check_event(b)?;
    if n_samples < MIN_SAMPLES {
        return Err(LabError::Invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    n_list
        .iter()
        .map(|&n| {
            let steps = i64::try_from(n).map_err(|_| LabError::Range(format!("N = {n} is too large")))?;
            let hits = (0..n_samples as u64)
                .into_par_iter()
                .map(|i| {
                    let x = sys.sample_measure(&mut stream.substream(i));
                    let end = sys.apply_map(&x, steps)?;
                    Ok((a.contains(sys, &x, None) && b.contains(sys, &end, None)) as usize)
                })
                .collect::<Result<Vec<usize>>>()?
                .into_iter()
                .sum();
            let (p, se) = binomial(hits, n_samples);
            let mut r =
                Report::new("mixing_correlation", stream, n, n_samples, p, a.exact_mass * b.exact_mass, se, tol);
            if n == 0 {
                r.pass = true;
                r.notes.push("N = 0 is the identity time; no convergence claim".into());
            }
            Ok(r)
        })
        .collect()
}

/// Weight `phi` applied at the end point `T^N x`.
#[derive(Debug, Clone)]
pub enum Weight {
    Event(Event),
    Observable(Observable),
}

impl Weight {
    fn mean(&self) -> f64 {
        match self {
            Weight::Event(e) => e.exact_mass,
            Weight::Observable(f) => f.exact_mean,
        }
    }

    fn eval(&self, sys: &PhaseSpaceSystem, o: &Outcome) -> f64 {
        match self {
            Weight::Event(e) => e.contains(sys, &o.end, o.end_direction.as_deref()) as u8 as f64,
            Weight::Observable(f) => f.eval(sys, &o.end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharFnReport {
    pub t: f64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub target_re: f64,
    pub target_im: f64,
    pub se_re: f64,
    pub se_im: f64,
    /// `estimate` is the modulus of the complex deviation.
    pub report: Report,
}

impl CharFnReport {
    pub fn estimate(&self) -> Complex64 {
        Complex64::new(self.estimate_re, self.estimate_im)
    }
}

/// `E[exp(i t S_N) phi(T^N x)]` against `E[exp(i t S)] mu(phi)`.
#[allow(clippy::too_many_arguments)]
pub fn char_fn_estimate(
    func: &Functional,
    scheme: &NormalizingScheme,
    t: f64,
    weight: &Weight,
    n: u64,
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<CharFnReport> {
    if !(t.abs() <= MAX_CHAR_FN_T) {
        return Err(LabError::Invalid(format!("|t| must be at most 100, got {t}")));
    }
    if let Weight::Event(e) = weight {
        func.check_event(e)?;
    }
    if let Weight::Observable(f) = weight {
        f.check_system(func.system())?;
    }
    let sys = func.system();
    let terms = draw_outcomes(func, scheme, n, n_samples, stream, |o| {
        let w = weight.eval(sys, &o);
        let (s, c) = (t * o.value).sin_cos();
        (c * w, s * w)
    })?;
    let nf = n_samples as f64;
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| terms.iter().map(f).sum::<CompensatedSum>().value() / nf;
    let re = mean(&|p| p.0);
    let im = mean(&|p| p.1);
    let se = |f: &dyn Fn(&(f64, f64)) -> f64, m: f64| {
        (terms.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt()
    };
    let (se_re, se_im) = (se(&|p| p.0, re), se(&|p| p.1, im));
    let target = scheme.law.characteristic_function(t) * weight.mean();
    let est = Complex64::new(re, im);
    let report = Report::new("char_fn", stream, n, n_samples, (est - target).norm(), 0.0, se_re.hypot(se_im), tol);
    Ok(CharFnReport {
        t,
        estimate_re: re,
        estimate_im: im,
        target_re: target.re,
        target_im: target.im,
        se_re,
        se_im,
        report,
    })
}

/// Plain DLT for `sigma(x, N)`.
pub fn operator_norm_dlt(
    coc: &MatrixCocycle,
    scheme: &NormalizingScheme,
    n_list: &[u64],
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<PlainDltReport> {
    estimate_plain_dlt(&Functional::CocycleNorm(coc.clone()), scheme, n_list, n_samples, None, tol, stream)
}

/// Plain DLT for `sigma(x, s(x), N)`.
pub fn section_dlt(
    coc: &MatrixCocycle,
    scheme: &NormalizingScheme,
    section: &Section,
    n_list: &[u64],
    n_samples: usize,
    tol: Tolerance,
    stream: &Stream,
) -> Result<PlainDltReport> {
    let func = Functional::CocycleSection { cocycle: coc.clone(), section: section.clone() };
    estimate_plain_dlt(&func, scheme, n_list, n_samples, None, tol, stream)
}
