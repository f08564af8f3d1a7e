use serde::Serialize;

use super::{CompanionCocycle, MatrixCocycle, NormTracker, VectorTracker};
use crate::birkhoff::final_decade_growth;
use crate::dynamics::{turns_to_f64, Point};
use crate::error::{LabError, Result};
use crate::linalg::Matrix;
use crate::rng::Stream;

/// Longest profile the diagnostics compute.
pub const MAX_PROFILE_LENGTH: usize = 1_000_000;

/// A deviation sequence indexed by `N = 1..=N_max` with its running maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationProfile {
    pub deviations: Vec<f64>,
    pub running_max: Vec<f64>,
}

impl DeviationProfile {
    fn from_deviations(deviations: Vec<f64>) -> Self {
        let mut m: f64 = 0.0;
        let running_max = deviations.iter().map(|&d| {
            m = m.max(d);
            m
        });
        DeviationProfile { running_max: running_max.collect(), deviations }
    }

    pub fn max(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> f64 {
        self.deviations.last().copied().unwrap_or(0.0)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.max() == 0.0
    }

    /// Relative growth of the running maximum over the last decade of `N`.
    pub fn final_decade_growth(&self) -> f64 {
        final_decade_growth(&self.running_max)
    }

    /// The running maximum stops growing over the last decade of `N`.
    pub fn stabilizes(&self, tolerance: f64) -> bool {
        self.final_decade_growth() <= tolerance
    }
}

fn check_length(n_max: usize) -> Result<()> {
    if n_max == 0 || n_max > MAX_PROFILE_LENGTH {
        return Err(LabError::Range(format!("N_max must lie in 1..=10^6, got {n_max}")));
    }
    Ok(())
}

/// `|sigma(x, v, N) - sigma(x, w, N)|`.
pub fn dominated_splitting_profile(
    coc: &MatrixCocycle,
    x: &Point,
    v: &[f64],
    w: &[f64],
    n_max: usize,
) -> Result<DeviationProfile> {
    coc.base().check_point(x)?;
    check_length(n_max)?;
    coc.check_vector(v)?;
    coc.check_vector(w)?;
    let mut tv = VectorTracker::new(v, coc.renorm_period())?;
    let mut tw = VectorTracker::new(w, coc.renorm_period())?;
    let mut out = Vec::with_capacity(n_max);
    coc.walk(x, n_max as u64, |a| {
        tv.push(a);
        tw.push(a);
        out.push((tv.sigma() - tw.sigma()).abs());
    });
    Ok(DeviationProfile::from_deviations(out))
}

/// `|sigma(x, v, N) - sigma(x, N)|`.
pub fn strong_splitting_profile(coc: &MatrixCocycle, x: &Point, v: &[f64], n_max: usize) -> Result<DeviationProfile> {
    coc.base().check_point(x)?;
    check_length(n_max)?;
    coc.check_vector(v)?;
    let mut tv = VectorTracker::new(v, coc.renorm_period())?;
    let mut tn = NormTracker::new(coc.dim(), coc.renorm_period());
    let mut out = Vec::with_capacity(n_max);
    coc.walk(x, n_max as u64, |a| {
        tv.push(a);
        tn.push(a);
        out.push((tn.sigma() - tv.sigma()).abs());
    });
    Ok(DeviationProfile::from_deviations(out))
}

/// A vector field `x -> v(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    Constant {
        vector: Vec<f64>,
    },
    /// `v(x) = base + sum_k cos(2 pi <k, x>) a_k + sin(2 pi <k, x>) b_k` on a torus.
    Trigonometric {
        base: Vec<f64>,
        terms: Vec<SectionTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionTerm {
    pub frequency: Vec<i64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Section {
    pub fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        let v = match self {
            Section::Constant { vector } => vector.clone(),
            Section::Trigonometric { base, terms } => {
                let t =
                    x.as_torus().ok_or_else(|| LabError::TypeMismatch("trigonometric sections live on tori".into()))?;
                let mut v = base.clone();
                for term in terms {
                    if term.frequency.len() != t.dim() || term.cos.len() != v.len() || term.sin.len() != v.len() {
                        return Err(LabError::TypeMismatch("inconsistent section term".into()));
                    }
                    let phase = term
                        .frequency
                        .iter()
                        .zip(t.turns())
                        .fold(0u64, |acc, (&k, &x)| acc.wrapping_add((k as u64).wrapping_mul(x)));
                    let (s, c) = (std::f64::consts::TAU * turns_to_f64(phase)).sin_cos();
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi += c * term.cos[i] + s * term.sin[i];
                    }
                }
                v
            }
        };
        if v.iter().all(|&c| c == 0.0) {
            return Err(LabError::Domain(format!("section vanishes at {}", x.describe())));
        }
        Ok(v)
    }
}

/// `|sigma(x, s(x), N) - sigma(x, w, N)|`.
pub fn section_genericity_profile(
    coc: &MatrixCocycle,
    section: &Section,
    x: &Point,
    w: &[f64],
    n_max: usize,
) -> Result<DeviationProfile> {
    let v = section.eval(x)?;
    dominated_splitting_profile(coc, x, &v, w, n_max)
}

/// `|sigma(x, v, N) - sigma(Ux, D(x, 1) v, N)|`.
pub fn cocycle_adaptedness_profile(
    coc: &MatrixCocycle,
    companion: &CompanionCocycle,
    x: &Point,
    v: &[f64],
    n_max: usize,
) -> Result<DeviationProfile> {
    check_length(n_max)?;
    coc.check_vector(v)?;
    let base = coc.base();
    let orbit = base.companion_orbit(x)?;
    if let CompanionCocycle::Custom(g) = companion {
        if g.dim() != coc.dim() {
            return Err(LabError::TypeMismatch("companion cocycle dimension differs".into()));
        }
        g.check_system(base)?;
    }
    let mut tv = VectorTracker::new(v, coc.renorm_period())?;
    let mut tu = VectorTracker::new(&companion.transport(base, x, v), coc.renorm_period())?;
    let gen = coc.generator();
    let (mut s1, mut s2) = (Matrix::zeros(coc.dim()), Matrix::zeros(coc.dim()));
    let mut out = Vec::with_capacity(n_max);
    for (p, q) in orbit.take(n_max) {
        tv.push(gen.matrix_at(base, &p, &mut s1));
        tu.push(gen.matrix_at(base, &q, &mut s2));
        out.push((tv.sigma() - tu.sigma()).abs());
    }
    Ok(DeviationProfile::from_deviations(out))
}

/// `|sigma(x, v, N) / N - lambda_1| <= 3 SE`: the finite-`N` reading of
/// future Oseledets genericity.
pub fn is_oseledets_generic(
    coc: &MatrixCocycle,
    x: &Point,
    v: &[f64],
    n: u64,
    estimate: &super::LyapunovEstimate,
) -> Result<bool> {
    let s = coc.sigma_vec(x, v, n as i64)? / n as f64;
    Ok((s - estimate.top()).abs() <= 3.0 * estimate.standard_errors[0].max(f64::EPSILON))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub n_samples: usize,
    /// Over samples of `max(0, sigma(x, 1))`.
    pub max_forward: f64,
    pub mean_forward: f64,
    /// Over samples of `max(0, sigma(x, -1))`.
    pub max_backward: f64,
    pub mean_backward: f64,
    pub log_norm_bound: f64,
    pub pass: bool,
    /// Sample attaining the larger maximum when the bound is violated.
    pub witness: Option<String>,
}

impl BoundednessReport {
    pub fn into_result(self) -> Result<Self> {
        match &self.witness {
            Some(w) => Err(LabError::Diagnostic(format!(
                "one-step expansion exceeds log_norm_bound {:.6} at {w}",
                self.log_norm_bound
            ))),
            None => Ok(self),
        }
    }
}

/// Empirical one-step expansion in both time directions against the declared
/// `log_norm_bound`.
pub fn boundedness_check(coc: &MatrixCocycle, n_samples: usize, stream: &Stream) -> Result<BoundednessReport> {
    if n_samples == 0 {
        return Err(LabError::Invalid("n_samples must be positive".into()));
    }
    let bound = coc.generator().log_norm_bound();
    let mut s = stream.named("boundedness");
    let (mut max_f, mut max_b, mut sum_f, mut sum_b) = (0.0f64, 0.0f64, 0.0, 0.0);
    let mut worst: Option<(f64, Point)> = None;
    for _ in 0..n_samples {
        let x = coc.base().sample_measure(&mut s);
        let f = coc.sigma_norm(&x, 1)?.max(0.0);
        let b = coc.sigma_norm(&x, -1)?.max(0.0);
        max_f = max_f.max(f);
        max_b = max_b.max(b);
        sum_f += f;
        sum_b += b;
        let m = f.max(b);
        if worst.as_ref().is_none_or(|(w, _)| m > *w) {
            worst = Some((m, x));
        }
    }
    let tolerance = 1e-12 * (1.0 + bound);
    let pass = max_f.max(max_b) <= bound + tolerance;
    Ok(BoundednessReport {
        n_samples,
        max_forward: max_f,
        mean_forward: sum_f / n_samples as f64,
        max_backward: max_b,
        mean_backward: sum_b / n_samples as f64,
        log_norm_bound: bound,
        pass,
        witness: if pass { None } else { worst.map(|(_, x)| x.describe()) },
    })
}
