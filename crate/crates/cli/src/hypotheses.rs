//! Diagnostics for the hypotheses behind the limit theorems.

use mixlimit::birkhoff::{adaptedness_profile, final_decade_growth};
use mixlimit::cocycle::{
    boundedness_check, cocycle_adaptedness_profile, dominated_splitting_profile, strong_splitting_profile,
    ProjectiveSampler,
};
use mixlimit::dynamics::CompanionKind;
use mixlimit::rng::Stream;
use mixlimit::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::assemble::{self, Setup};
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub hypothesis: &'static str,
    pub status: Status,
    /// Why the section does not apply, or a summary of the witness profile.
    pub summary: Value,
}

impl Section {
    fn skipped(hypothesis: &'static str, reason: &str) -> Self {
        Section { hypothesis, status: Status::NotApplicable, summary: json!({ "reason": reason }) }
    }
}

/// All hypothesis sections for the configured system, observable and
/// cocycle. No section fails means the check passes.
pub fn check(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<Vec<Section>> {
    Ok(vec![
        contraction(cfg, setup, &stream.named("contraction"))?,
        adaptedness(cfg, setup, &stream.named("adaptedness"))?,
        boundedness(cfg, setup, &stream.named("boundedness"))?,
        splitting(cfg, setup, &stream.named("dominated_splitting"), false)?,
        splitting(cfg, setup, &stream.named("strong_splitting"), true)?,
        cocycle_adaptedness(cfg, setup, &stream.named("cocycle_adaptedness"))?,
    ])
}

fn contraction(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<Section> {
    const NAME: &str = "contracting_pair";
    let sys = &setup.system;
    let Some(kind) = sys.companion() else {
        return Ok(Section::skipped(NAME, "no companion map configured"));
    };
    let x = sys.sample_measure(&mut stream.clone());
    let n_max = cfg.check.contraction_n_max;
    let prof = sys.contraction_profile(&x, n_max)?;
    let first = prof.distances[0];
    let last = *prof.distances.last().unwrap();
    let mut summary = json!({
        "n_max": n_max,
        "first_distance": first,
        "last_distance": last,
        "identically_zero": prof.is_identically_zero(),
        "slope": prof.slope,
    });
    let status = if prof.is_identically_zero() {
        Status::Pass
    } else if let (CompanionKind::StableTranslation { .. }, Some(stable), Some(slope)) =
        (kind, sys.stable_direction(), prof.slope)
    {
        let expected = stable.eigenvalue.abs().ln();
        let rel = ((slope - expected) / expected).abs();
        let from = 20.min(n_max);
        summary["expected_slope"] = json!(expected);
        summary["relative_slope_error"] = json!(rel);
        summary["hyperbolic_constant"] = json!(prof.hyperbolic_constant(slope.exp(), from));
        Status::from_bool(prof.is_contracting() && rel <= cfg.check.slope_tolerance)
    } else {
        Status::from_bool(prof.is_contracting())
    };
    Ok(Section { hypothesis: NAME, status, summary })
}

fn adaptedness(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<Section> {
    const NAME: &str = "adapted_observable";
    let sys = &setup.system;
    let Some(f) = &setup.observable else {
        return Ok(Section::skipped(NAME, "no observable configured"));
    };
    if !sys.has_companion() {
        return Ok(Section::skipped(NAME, "no companion map configured"));
    }
    let x = sys.sample_measure(&mut stream.clone());
    let n_max = cfg.check.adaptedness_n_max;
    let prof = adaptedness_profile(sys, f, &x, n_max, None)?;
    let growth = prof.final_decade_growth();
    let summary = json!({
        "n_max": n_max,
        "total_discrepancy": prof.total(),
        "final_decade_growth": growth,
    });
    Ok(Section { hypothesis: NAME, status: Status::from_bool(growth <= cfg.check.growth_tolerance), summary })
}

fn boundedness(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<Section> {
    const NAME: &str = "log_integrable_cocycle";
    let Some(coc) = &setup.cocycle else {
        return Ok(Section::skipped(NAME, "no cocycle configured"));
    };
    let report = boundedness_check(coc, cfg.check.boundedness_samples, stream)?;
    let status = Status::from_bool(report.pass);
    Ok(Section { hypothesis: NAME, status, summary: serde_json::to_value(&report).unwrap() })
}

fn splitting(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream, strong: bool) -> Result<Section> {
    let name = if strong { "strong_dominated_splitting" } else { "simple_dominated_splitting" };
    let Some(coc) = &setup.cocycle else {
        return Ok(Section::skipped(name, "no cocycle configured"));
    };
    if coc.dim() < 2 && !strong {
        return Ok(Section::skipped(name, "one-dimensional cocycle"));
    }
    let n_max = cfg.check.splitting_n_max;
    let sampler = ProjectiveSampler { dim: coc.dim() };
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    let mut failing = 0usize;
    for i in 0..cfg.check.n_directions as u64 {
        let mut s = stream.substream(i);
        let x = coc.base().sample_measure(&mut s);
        let v = sampler.sample(&mut s);
        let prof = if strong {
            strong_splitting_profile(coc, &x, &v, n_max)?
        } else {
            let w = sampler.sample(&mut s);
            dominated_splitting_profile(coc, &x, &v, &w, n_max)?
        };
        let g = prof.final_decade_growth();
        worst = worst.max(g);
        largest = largest.max(prof.max());
        if g > cfg.check.growth_tolerance {
            failing += 1;
        }
    }
    let summary = json!({
        "n_max": n_max,
        "n_directions": cfg.check.n_directions,
        "worst_final_decade_growth": worst,
        "largest_deviation": largest,
        "directions_growing": failing,
    });
    Ok(Section { hypothesis: name, status: Status::from_bool(failing == 0), summary })
}

fn cocycle_adaptedness(cfg: &ExperimentConfig, setup: &Setup, stream: &Stream) -> Result<Section> {
    const NAME: &str = "adapted_cocycle_pair";
    let Some(coc) = &setup.cocycle else {
        return Ok(Section::skipped(NAME, "no cocycle configured"));
    };
    if !coc.base().has_companion() {
        return Ok(Section::skipped(NAME, "no companion map configured"));
    }
    let companion = assemble::companion_cocycle(cfg)?;
    let mut s = stream.clone();
    let x = coc.base().sample_measure(&mut s);
    let v = ProjectiveSampler { dim: coc.dim() }.sample(&mut s);
    let n_max = cfg.check.adaptedness_n_max;
    let prof = cocycle_adaptedness_profile(coc, &companion, &x, &v, n_max)?;
    let growth = final_decade_growth(&prof.running_max);
    let summary = json!({
        "n_max": n_max,
        "max_deviation": prof.max(),
        "final_decade_growth": growth,
    });
    Ok(Section { hypothesis: NAME, status: Status::from_bool(growth <= cfg.check.growth_tolerance), summary })
}
