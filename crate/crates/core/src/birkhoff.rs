//! Birkhoff sums, their normalisations and the adaptedness diagnostic.

use std::f64::consts::TAU;

use crate::dynamics::{turns_to_f64, PhaseSpaceSystem, Point, SystemKind};
use crate::error::{LabError, Result};
use crate::stats::law::ReferenceLaw;
use crate::summation::CompensatedSum;

/// Longest orbit segment accepted by the Birkhoff routines.
pub const MAX_BIRKHOFF_LENGTH: u64 = 100_000_000;

/// Longest custom `(A_N)` / `(V_N)` table.
pub const MAX_TABLE_LENGTH: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    /// `cos(2 pi <k, x>)` on a torus.
    CoordinateCosine {
        frequency: Vec<i64>,
    },
    /// The symbol at a fixed index of a shift point.
    CoordinateSymbol {
        index: i64,
    },
    Constant {
        value: f64,
    },
}

/// Bounded observable with its analytic mean and Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub kind: ObservableKind,
    pub lipschitz_bound: f64,
    pub sup_bound: f64,
    pub exact_mean: f64,
}

impl Observable {
    pub fn coordinate_cosine(sys: &PhaseSpaceSystem, frequency: Vec<i64>) -> Result<Self> {
        let d =
            sys.torus_dim().ok_or_else(|| LabError::TypeMismatch("coordinate_cosine needs a torus system".into()))?;
        if frequency.len() != d {
            return Err(LabError::Invalid(format!("frequency must have {d} components")));
        }
        let k_norm = frequency.iter().map(|&k| (k as f64).powi(2)).sum::<f64>().sqrt();
        let exact_mean = if frequency.iter().all(|&k| k == 0) { 1.0 } else { 0.0 };
        Ok(Observable {
            kind: ObservableKind::CoordinateCosine { frequency },
            lipschitz_bound: TAU * k_norm,
            sup_bound: 1.0,
            exact_mean,
        })
    }

    pub fn coordinate_symbol(sys: &PhaseSpaceSystem, index: i64) -> Result<Self> {
        let weights =
            sys.weights().ok_or_else(|| LabError::TypeMismatch("coordinate_symbol needs a shift system".into()))?;
        if index.abs() > 60 {
            return Err(LabError::Invalid("symbol index must satisfy |index| <= 60".into()));
        }
        let top = (weights.len() - 1) as f64;
        Ok(Observable {
            kind: ObservableKind::CoordinateSymbol { index },
            // Differing symbols at `index` force d(x, y) >= 2^-|index|.
            lipschitz_bound: top * (index.abs() as f64).exp2(),
            sup_bound: top,
            exact_mean: weights.iter().enumerate().map(|(s, w)| s as f64 * w).sum(),
        })
    }

    pub fn constant(value: f64) -> Self {
        Observable {
            kind: ObservableKind::Constant { value },
            lipschitz_bound: 0.0,
            sup_bound: value.abs(),
            exact_mean: value,
        }
    }

    /// Checks that the observable can be evaluated on `sys`.
    pub fn check_system(&self, sys: &PhaseSpaceSystem) -> Result<()> {
        match &self.kind {
            ObservableKind::CoordinateCosine { frequency } if Some(frequency.len()) != sys.torus_dim() => {
                Err(LabError::TypeMismatch("observable dimension does not match the torus".into()))
            }
            ObservableKind::CoordinateSymbol { .. } if !sys.is_shift() => {
                Err(LabError::TypeMismatch("symbol observable on a non-shift system".into()))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, sys: &PhaseSpaceSystem, p: &Point) -> f64 {
        match (&self.kind, p) {
            (ObservableKind::Constant { value }, _) => *value,
            (ObservableKind::CoordinateCosine { frequency }, Point::Torus(t)) => {
                // The phase <k, x> mod 1 is exact in turn arithmetic.
                let phase = frequency
                    .iter()
                    .zip(t.turns())
                    .fold(0u64, |acc, (&k, &x)| acc.wrapping_add((k as u64).wrapping_mul(x)));
                (TAU * turns_to_f64(phase)).cos()
            }
            (ObservableKind::CoordinateSymbol { index }, Point::Symbolic(s)) => sys.symbol(s, *index) as f64,
            _ => panic!("observable evaluated on an incompatible point"),
        }
    }
}

/// Averaging sequence `A_N`.
#[derive(Debug, Clone, PartialEq)]
pub enum Averaging {
    /// `A_N = rate * N`; the law-of-large-numbers centring when `rate` is the
    /// mean of the observable (or the top Lyapunov exponent of a cocycle).
    Linear(f64),
    Zero,
    /// `A_N = table[N - 1]`.
    Table(Vec<f64>),
}

/// Normalizing sequence `V_N`.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalizing {
    Linear,
    Sqrt,
    /// `V_N = table[N - 1]`.
    Table(Vec<f64>),
}

/// `(A_N, V_N)` together with the reference law `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizingScheme {
    pub averaging: Averaging,
    pub normalizing: Normalizing,
    pub law: ReferenceLaw,
}

impl NormalizingScheme {
    pub fn new(averaging: Averaging, normalizing: Normalizing, law: ReferenceLaw) -> Result<Self> {
        for table in [
            if let Averaging::Table(t) = &averaging { Some(t) } else { None },
            if let Normalizing::Table(t) = &normalizing { Some(t) } else { None },
        ]
        .into_iter()
        .flatten()
        {
            if table.is_empty() || table.len() > MAX_TABLE_LENGTH {
                return Err(LabError::Scheme(format!("custom tables need 1..={MAX_TABLE_LENGTH} entries")));
            }
        }
        if let Normalizing::Table(t) = &normalizing {
            if let Some(v) = t.iter().find(|v| !(**v > 0.0)) {
                return Err(LabError::Scheme(format!("normalizing table entry {v} is not positive")));
            }
        }
        Ok(NormalizingScheme { averaging, normalizing, law })
    }

    /// Law of large numbers: `A_N = N * mean`, `V_N = N`, Dirac limit.
    pub fn lln(mean: f64) -> Self {
        NormalizingScheme {
            averaging: Averaging::Linear(mean),
            normalizing: Normalizing::Linear,
            law: ReferenceLaw::DiracAtZero,
        }
    }

    /// Central limit theorem: `A_N = N * mean`, `V_N = sqrt N`, Gaussian limit.
    pub fn clt(mean: f64, variance: f64) -> Result<Self> {
        Ok(NormalizingScheme {
            averaging: Averaging::Linear(mean),
            normalizing: Normalizing::Sqrt,
            law: ReferenceLaw::gaussian(variance)?,
        })
    }

    pub fn averaging_at(&self, n: u64) -> Result<f64> {
        match &self.averaging {
            Averaging::Linear(rate) => Ok(rate * n as f64),
            Averaging::Zero => Ok(0.0),
            Averaging::Table(t) => table_entry(t, n, "averaging"),
        }
    }

    pub fn normalizing_at(&self, n: u64) -> Result<f64> {
        let v = match &self.normalizing {
            Normalizing::Linear => n as f64,
            Normalizing::Sqrt => (n as f64).sqrt(),
            Normalizing::Table(t) => table_entry(t, n, "normalizing")?,
        };
        if !(v > 0.0) {
            return Err(LabError::Scheme(format!("V_{n} = {v} is not positive")));
        }
        Ok(v)
    }

    /// `(raw - A_N) / V_N`.
    ///
    /// A difference within a few ulps of `max(|raw|, |A_N|)` is not resolved
    /// by double precision and is returned as exactly zero.
    #[inline]
    pub fn normalize(&self, raw: f64, n: u64) -> Result<f64> {
        let a = self.averaging_at(n)?;
        let v = self.normalizing_at(n)?;
        let diff = raw - a;
        if diff.abs() <= 8.0 * f64::EPSILON * raw.abs().max(a.abs()) {
            return Ok(0.0);
        }
        Ok(diff / v)
    }
}

fn table_entry(t: &[f64], n: u64, what: &str) -> Result<f64> {
    if n == 0 {
        return Err(LabError::Scheme(format!("{what} table starts at N = 1")));
    }
    t.get(n as usize - 1).copied().ok_or_else(|| LabError::Scheme(format!("{what} table has no entry for N = {n}")))
}

fn check_length(n: u64) -> Result<()> {
    if n > MAX_BIRKHOFF_LENGTH {
        return Err(LabError::Range(format!("N = {n} exceeds 10^8")));
    }
    Ok(())
}

/// `sum_{n<N} f(T^n x)` together with the end point `T^N x`.
pub fn orbit_sum(sys: &PhaseSpaceSystem, f: &Observable, x: &Point, n: u64) -> Result<(f64, Point)> {
    check_length(n)?;
    sys.check_point(x)?;
    f.check_system(sys)?;
    let mut acc = CompensatedSum::new();
    match (&f.kind, x, sys.kind()) {
        (ObservableKind::CoordinateSymbol { index }, Point::Symbolic(s), SystemKind::TwoSidedShift { .. }) => {
            for k in 0..n as i64 {
                acc += sys.symbol(s, index + k) as f64;
            }
            let end = sys.apply_map(x, n as i64)?;
            Ok((acc.value(), end))
        }
        _ => {
            let mut p = *x;
            for _ in 0..n {
                acc += f.eval(sys, &p);
                p = sys.step(&p);
            }
            Ok((acc.value(), p))
        }
    }
}

/// `sum_{n=0}^{N-1} f(T^n x)`, compensated.
pub fn birkhoff_sum(sys: &PhaseSpaceSystem, f: &Observable, x: &Point, n: u64) -> Result<f64> {
    orbit_sum(sys, f, x, n).map(|(s, _)| s)
}

/// `S_N(x) = (sum_{n<N} f(T^n x) - A_N) / V_N`.
pub fn corrected_sum(
    sys: &PhaseSpaceSystem,
    f: &Observable,
    scheme: &NormalizingScheme,
    x: &Point,
    n: u64,
) -> Result<f64> {
    scheme.normalize(birkhoff_sum(sys, f, x, n)?, n)
}

/// The same normalisation along the inverse map:
/// `(sum_{n<N} f(T^{-n} x) - A_N) / V_N`.
pub fn reversed_corrected_sum(
    sys: &PhaseSpaceSystem,
    f: &Observable,
    scheme: &NormalizingScheme,
    x: &Point,
    n: u64,
) -> Result<f64> {
    check_length(n)?;
    sys.check_point(x)?;
    f.check_system(sys)?;
    let mut acc = CompensatedSum::new();
    let mut p = *x;
    for _ in 0..n {
        acc += f.eval(sys, &p);
        p = sys.step_back(&p);
    }
    scheme.normalize(acc.value(), n)
}

/// Cumulative discrepancy along companion-perturbed orbits.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptednessProfile {
    /// `sum_{n=0}^{N} |f(T^n U x) - f(T^n x)|` for `N = 0..=N_max`.
    pub partial_sums: Vec<f64>,
    /// `partial_sums[N] / V_N` for `N = 1..=N_max` when a scheme was supplied.
    pub ratios: Option<Vec<f64>>,
}

impl AdaptednessProfile {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// Relative growth of the profile between `N_max / 10` and `N_max`.
    pub fn final_decade_growth(&self) -> f64 {
        final_decade_growth(&self.partial_sums)
    }
}

/// Relative increase of a nondecreasing sequence over its last decade of
/// indices; zero for an identically vanishing sequence.
pub fn final_decade_growth(seq: &[f64]) -> f64 {
    let Some(&last) = seq.last() else { return 0.0 };
    let early = seq[(seq.len() - 1) / 10];
    if last == 0.0 {
        0.0
    } else if early == 0.0 {
        f64::INFINITY
    } else {
        (last - early) / early
    }
}

pub fn adaptedness_profile(
    sys: &PhaseSpaceSystem,
    f: &Observable,
    x: &Point,
    n_max: usize,
    scheme: Option<&NormalizingScheme>,
) -> Result<AdaptednessProfile> {
    f.check_system(sys)?;
    let mut acc = CompensatedSum::new();
    let partial_sums: Vec<f64> = sys
        .companion_orbit(x)?
        .take(n_max + 1)
        .map(|(base, comp)| {
            acc += (f.eval(sys, &comp) - f.eval(sys, &base)).abs();
            acc.value()
        })
        .collect();
    let ratios = scheme
        .map(|s| (1..=n_max).map(|n| Ok(partial_sums[n] / s.normalizing_at(n as u64)?)).collect::<Result<Vec<f64>>>())
        .transpose()?;
    Ok(AdaptednessProfile { partial_sums, ratios })
}
