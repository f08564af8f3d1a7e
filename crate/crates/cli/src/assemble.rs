//! Turns a validated config into library objects.

use mixlimit::birkhoff::{Averaging, Normalizing, NormalizingScheme, Observable};
use mixlimit::cocycle::{
    lyapunov_spectrum, CocycleGenerator, CompanionCocycle, MatrixCocycle, Section, SectionTerm, TrigFamily, TrigTerm,
};
use mixlimit::dynamics::{CompanionKind, PhaseSpaceSystem, SystemKind};
use mixlimit::linalg::{IntMatrix, Matrix};
use mixlimit::rng::Stream;
use mixlimit::stats::{variance_green_kubo, Event, Functional, GreenKuboEstimate, Interval, ReferenceLaw, Tolerance};
use mixlimit::{LabError, Result};
use serde::Serialize;

use crate::config::*;

fn config_error(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config_error(format!("matrix must be square and nonempty, got {n} rows")));
    }
    Matrix::from_row_major(n, rows.concat())
}

pub fn system(cfg: &ExperimentConfig) -> Result<PhaseSpaceSystem> {
    let spec = cfg.system.as_ref().ok_or_else(|| config_error("missing [system] section"))?;
    let sys = match spec {
        SystemSpec::TorusAutomorphism { matrix } => {
            let rows: Vec<&[i64]> = matrix.iter().map(Vec::as_slice).collect();
            PhaseSpaceSystem::torus_automorphism(IntMatrix::from_rows(&rows)?)?
        }
        SystemSpec::TwoSidedShift { weights } => PhaseSpaceSystem::two_sided_shift(weights.clone())?,
        SystemSpec::TorusTranslation { vector } => PhaseSpaceSystem::torus_translation(vector.clone())?,
    };
    match &cfg.companion {
        None => Ok(sys),
        Some(c) => sys.with_companion(match c {
            CompanionSpec::StableTranslation { amplitude } => {
                CompanionKind::StableTranslation { amplitude: *amplitude }
            }
            CompanionSpec::Identity {} => CompanionKind::Identity,
            CompanionSpec::TorusTranslation { vector } => CompanionKind::TorusTranslation { vector: vector.clone() },
        }),
    }
}

pub fn observable(cfg: &ExperimentConfig, sys: &PhaseSpaceSystem) -> Result<Option<Observable>> {
    let Some(spec) = &cfg.observable else { return Ok(None) };
    let f = match spec {
        ObservableSpec::CoordinateCosine { frequency } => Observable::coordinate_cosine(sys, frequency.clone())?,
        ObservableSpec::CoordinateSymbol { index } => Observable::coordinate_symbol(sys, *index)?,
        ObservableSpec::Constant { value } => Observable::constant(*value),
    };
    f.check_system(sys)?;
    Ok(Some(f))
}

fn generator(spec: &GeneratorSpec, sys: &PhaseSpaceSystem) -> Result<CocycleGenerator> {
    match spec {
        GeneratorSpec::Constant { matrix: m } => CocycleGenerator::constant(matrix(m)?),
        GeneratorSpec::SymbolTable { matrices } => {
            CocycleGenerator::symbol_table(matrices.iter().map(|m| matrix(m)).collect::<Result<_>>()?)
        }
        GeneratorSpec::SmoothTorus { base, terms } => {
            let d = sys.torus_dim().ok_or_else(|| config_error("smooth_torus generator needs a torus system"))?;
            let family = TrigFamily {
                base: matrix(base)?,
                terms: terms
                    .iter()
                    .map(|t| {
                        Ok(TrigTerm { frequency: t.frequency.clone(), cos: matrix(&t.cos)?, sin: matrix(&t.sin)? })
                    })
                    .collect::<Result<_>>()?,
            };
            CocycleGenerator::smooth_torus(family, d)
        }
        GeneratorSpec::Identity { dim } => Ok(CocycleGenerator::identity(*dim)),
        GeneratorSpec::Derivative {} => match sys.kind() {
            SystemKind::TorusAutomorphism { matrix } => CocycleGenerator::constant(matrix.to_f64()),
            _ => Err(config_error("the derivative generator needs a torus automorphism")),
        },
    }
}

pub fn cocycle(cfg: &ExperimentConfig, sys: &PhaseSpaceSystem) -> Result<Option<MatrixCocycle>> {
    let Some(c) = &cfg.cocycle else { return Ok(None) };
    let mut gen = generator(&c.generator, sys)?;
    if let Some(b) = c.log_norm_bound {
        gen = gen.with_log_norm_bound(b)?;
    }
    let mut coc = match c.renorm_period {
        Some(p) => MatrixCocycle::with_renorm_period(sys.clone(), gen, p)?,
        None => MatrixCocycle::new(sys.clone(), gen)?,
    };
    if let Some(k) = c.exterior {
        coc = coc.exterior_power(k)?;
    }
    Ok(Some(coc))
}

pub fn companion_cocycle(cfg: &ExperimentConfig) -> Result<CompanionCocycle> {
    match cfg.cocycle.as_ref().and_then(|c| c.companion_matrix.as_ref()) {
        None => Ok(CompanionCocycle::IdentityTransport),
        Some(m) => Ok(CompanionCocycle::Custom(CocycleGenerator::constant(matrix(m)?)?)),
    }
}

pub fn section(spec: &SectionSpec) -> Section {
    match spec {
        SectionSpec::Constant { vector } => Section::Constant { vector: vector.clone() },
        SectionSpec::Trigonometric { base, terms } => Section::Trigonometric {
            base: base.clone(),
            terms: terms
                .iter()
                .map(|t| SectionTerm { frequency: t.frequency.clone(), cos: t.cos.clone(), sin: t.sin.clone() })
                .collect(),
        },
    }
}

/// Everything a run needs, built once.
pub struct Setup {
    pub system: PhaseSpaceSystem,
    pub observable: Option<Observable>,
    pub cocycle: Option<MatrixCocycle>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let system = system(cfg)?;
        let observable = observable(cfg, &system)?;
        let cocycle = cocycle(cfg, &system)?;
        Ok(Setup { system, observable, cocycle })
    }

    /// The estimated quantity: the cocycle when one is configured, the
    /// observable otherwise.
    pub fn functional(&self, cfg: &ExperimentConfig) -> Result<Functional> {
        if let Some(coc) = &self.cocycle {
            let c = cfg.cocycle.as_ref().unwrap();
            return match c.functional {
                CocycleFunctional::Vector => Ok(Functional::CocycleVector(coc.clone())),
                CocycleFunctional::Norm => Ok(Functional::CocycleNorm(coc.clone())),
                CocycleFunctional::Section => {
                    let s = c
                        .section
                        .as_ref()
                        .ok_or_else(|| config_error("functional = \"section\" needs [cocycle.section]"))?;
                    Ok(Functional::CocycleSection { cocycle: coc.clone(), section: section(s) })
                }
            };
        }
        match &self.observable {
            Some(f) => Functional::birkhoff(self.system.clone(), f.clone()),
            None => Err(config_error("need an [observable] or a [cocycle] section")),
        }
    }
}

/// Quantities computed while resolving the scheme.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SchemeProvenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_top_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_kubo: Option<GreenKuboEstimate>,
}

pub fn scheme(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<(NormalizingScheme, SchemeProvenance)> {
    let s = cfg.scheme.as_ref().ok_or_else(|| config_error("missing [scheme] section"))?;
    let mut prov = SchemeProvenance::default();
    let averaging = match s.averaging {
        AveragingSpec::Zero => Averaging::Zero,
        AveragingSpec::Linear => {
            Averaging::Linear(s.rate.ok_or_else(|| config_error("averaging = \"linear\" needs scheme.rate"))?)
        }
        AveragingSpec::Mean => {
            let f = setup
                .observable
                .as_ref()
                .filter(|_| setup.cocycle.is_none())
                .ok_or_else(|| config_error("averaging = \"mean\" needs an observable and no cocycle"))?;
            Averaging::Linear(f.exact_mean)
        }
        AveragingSpec::TopExponent => {
            let coc =
                setup.cocycle.as_ref().ok_or_else(|| config_error("averaging = \"top_exponent\" needs a cocycle"))?;
            let prior = s.prior.clone().unwrap_or_default();
            let est = lyapunov_spectrum(coc, prior.n_steps, prior.n_orbits, &stream.named("prior_spectrum"))?;
            prov.prior_top_exponent = Some(est.top());
            prov.prior_standard_error = Some(est.standard_errors[0]);
            Averaging::Linear(est.top())
        }
    };
    let normalizing = match s.normalizing {
        NormalizingSpec::Linear => Normalizing::Linear,
        NormalizingSpec::Sqrt => Normalizing::Sqrt,
    };
    let law = match (s.law, &s.variance) {
        (LawSpec::Dirac, None) => ReferenceLaw::DiracAtZero,
        (LawSpec::Dirac, Some(_)) => return Err(config_error("law = \"dirac\" takes no variance")),
        (LawSpec::Gaussian, None) => return Err(config_error("law = \"gaussian\" needs scheme.variance")),
        (LawSpec::Gaussian, Some(VarianceSpec::Value(v))) => ReferenceLaw::gaussian(*v)?,
        (LawSpec::Gaussian, Some(VarianceSpec::Method(VarianceMethod::GreenKubo))) => {
            let f = setup
                .observable
                .as_ref()
                .filter(|_| setup.cocycle.is_none())
                .ok_or_else(|| config_error("variance = \"green_kubo\" needs an observable and no cocycle"))?;
            let gk_cfg = s.green_kubo.clone().unwrap_or_default();
            let gk =
                variance_green_kubo(&setup.system, f, gk_cfg.lag_max, gk_cfg.n_samples, &stream.named("green_kubo"))?;
            if !gk.tail_ok {
                return Err(LabError::Diagnostic(format!(
                    "Green-Kubo tail holds {:.3}% of the variance (limit 1%); raise green_kubo.lag_max",
                    100.0 * gk.tail_fraction
                )));
            }
            let law = ReferenceLaw::gaussian(gk.variance)?;
            prov.green_kubo = Some(gk);
            law
        }
    };
    Ok((NormalizingScheme::new(averaging, normalizing, law)?, prov))
}

pub fn event(spec: &EventSpec, sys: &PhaseSpaceSystem) -> Result<Event> {
    match spec {
        EventSpec::TorusBox { lower, upper } => Event::torus_box(sys, lower.clone(), upper.clone()),
        EventSpec::Cylinder { start, symbols } => Event::shift_cylinder(sys, *start, symbols.clone()),
        EventSpec::ProjectiveCap { center, radius } => Event::projective_cap(center.clone(), *radius),
        EventSpec::FullSpace {} => Ok(Event::full_space()),
    }
}

pub fn events(cfg: &ExperimentConfig, sys: &PhaseSpaceSystem) -> Result<(Option<Event>, Option<Event>)> {
    let a = cfg.events.a.as_ref().map(|s| event(s, sys)).transpose()?;
    let b = cfg.events.b.as_ref().map(|s| event(s, sys)).transpose()?;
    Ok((a, b))
}

pub fn interval(cfg: &ExperimentConfig) -> Result<Option<Interval>> {
    cfg.events.interval.map(|[a, b]| Interval::new(a, b)).transpose()
}

pub fn tolerance(cfg: &ExperimentConfig) -> Result<Tolerance> {
    let r = &cfg.run;
    if r.tolerance_floor.is_nan() || r.tolerance_floor < 0.0 || r.se_multiple.is_nan() || r.se_multiple < 0.0 {
        return Err(config_error("run.tolerance_floor and run.se_multiple must be nonnegative"));
    }
    Ok(Tolerance { floor: r.tolerance_floor, se_multiple: r.se_multiple })
}

pub fn n_schedule(cfg: &ExperimentConfig) -> Result<&[u64]> {
    if cfg.run.n.is_empty() {
        return Err(config_error("run.n must list at least one orbit length"));
    }
    Ok(&cfg.run.n)
}
