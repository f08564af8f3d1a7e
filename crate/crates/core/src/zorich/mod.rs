//! Interval exchange transformations, Rauzy-Veech induction and the Zorich
//! cocycle.
//!
//! An IET on `d` intervals is stored as a pair of rows of labels: the order of
//! the intervals before (`top`) and after (`bottom`) the exchange. Labels are
//! 0-based internally; permutations are read and written in 1-based one-line
//! notation, where entry `i` is the position after the exchange of the
//! interval in position `i` before it.

mod surd;

pub use surd::{Length, QuadraticSurd, TIE_TOLERANCE};

use std::cmp::Ordering;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{aggregate, LyapunovEstimate};
use crate::error::{LabError, Result};
use crate::linalg::Matrix;
use crate::rng::Stream;

/// Largest number of Rauzy steps in one Zorich step.
pub const MAX_RUN_LENGTH: u64 = 1_000_000;

/// Visitation entries beyond this stop the exact integer bookkeeping.
pub const VISITATION_LIMIT: i64 = 1 << 62;

/// Fraction of orbits that must survive a spectrum run.
pub const MIN_SURVIVING_FRACTION: f64 = 0.9;

/// Parses one-line notation: either whitespace or comma separated integers,
/// or a string of single digits such as `"4321"`.
pub fn parse_permutation(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    let parts: Vec<&str> = if text.contains(|c: char| c == ',' || c.is_whitespace()) {
        text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect()
    } else {
        text.split("").filter(|s| !s.is_empty()).collect()
    };
    let perm = parts
        .iter()
        .map(|p| p.parse::<usize>().map_err(|_| LabError::Config(format!("bad permutation entry {p:?}"))))
        .collect::<Result<Vec<_>>>()?;
    validate_permutation(&perm)?;
    Ok(perm)
}

fn validate_permutation(perm: &[usize]) -> Result<()> {
    let d = perm.len();
    let mut seen = vec![false; d];
    for &p in perm {
        if p == 0 || p > d || seen[p - 1] {
            return Err(LabError::Config(format!("{perm:?} is not a permutation of 1..{d}")));
        }
        seen[p - 1] = true;
    }
    Ok(())
}

/// No proper prefix `{1..k}` is mapped onto itself.
pub fn is_irreducible(perm: &[usize]) -> bool {
    let mut max = 0;
    for (k, &p) in perm.iter().enumerate().take(perm.len().saturating_sub(1)) {
        max = max.max(p);
        if max == k + 1 {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iet<L = f64> {
    top: Vec<usize>,
    bottom: Vec<usize>,
    lengths: Vec<L>,
}

impl<L: Length> Iet<L> {
    /// Lengths are indexed by position in the top row and must be positive
    /// and sum to 1.
    pub fn new(permutation: &[usize], lengths: Vec<L>) -> Result<Self> {
        validate_permutation(permutation)?;
        let d = permutation.len();
        if !is_irreducible(permutation) {
            return Err(LabError::Config(format!("permutation {permutation:?} is reducible")));
        }
        if lengths.len() != d {
            return Err(LabError::Invalid(format!("{} lengths for {d} intervals", lengths.len())));
        }
        if !lengths.iter().all(Length::is_positive) {
            return Err(LabError::Invalid("interval lengths must be positive".into()));
        }
        let total = lengths.iter().fold(L::zero(), |acc, l| acc.plus(l)).to_f64();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::Invalid(format!("interval lengths sum to {total}, not 1")));
        }
        let mut bottom = vec![0; d];
        for (label, &pos) in permutation.iter().enumerate() {
            bottom[pos - 1] = label;
        }
        Ok(Iet { top: (0..d).collect(), bottom, lengths })
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    /// Lengths indexed by label.
    pub fn lengths(&self) -> &[L] {
        &self.lengths
    }

    pub fn top_row(&self) -> &[usize] {
        &self.top
    }

    pub fn bottom_row(&self) -> &[usize] {
        &self.bottom
    }

    pub fn total_length(&self) -> L {
        self.lengths.iter().fold(L::zero(), |acc, l| acc.plus(l))
    }

    /// One-line notation of the current pair of rows.
    pub fn permutation(&self) -> Vec<usize> {
        self.top.iter().map(|label| self.bottom.iter().position(|b| b == label).unwrap() + 1).collect()
    }
}

impl Iet<f64> {
    /// Uniform random lengths on the simplex.
    pub fn random(permutation: &[usize], stream: &mut Stream) -> Result<Self> {
        let mut lengths: Vec<f64> = (0..permutation.len()).map(|_| Exp1.sample(stream)).collect();
        let total: f64 = lengths.iter().sum();
        lengths.iter_mut().for_each(|l| *l /= total);
        Self::new(permutation, lengths)
    }

    /// The exchange map on `[0, total_length)`.
    pub fn apply(&self, t: f64) -> Result<f64> {
        let total = self.total_length();
        if !(0.0..total).contains(&t) {
            return Err(LabError::Domain(format!("{t} lies outside [0, {total})")));
        }
        let mut start = 0.0;
        for (k, &label) in self.top.iter().enumerate() {
            let end = start + self.lengths[label];
            if t < end || k + 1 == self.top.len() {
                if (k > 0 && t - start <= 1e-14) || (k + 1 < self.top.len() && end - t <= 1e-14) {
                    return Err(LabError::Discontinuity(format!(
                        "{t} is within 1e-14 of a discontinuity; resample the point"
                    )));
                }
                let image_start: f64 = self.bottom.iter().take_while(|&&b| b != label).map(|&b| self.lengths[b]).sum();
                return Ok(t - start + image_start);
            }
            start = end;
        }
        unreachable!("t lies in some interval")
    }
}

/// See [`iet_apply`].
pub fn iet_apply(iet: &Iet<f64>, t: f64) -> Result<f64> {
    iet.apply(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InductionType {
    /// The last top interval is longer.
    Top,
    /// The last bottom interval is longer.
    Bottom,
    None,
}

/// An IET together with its accumulated Rauzy-Veech visitation matrix
/// `V`, for which `lengths_initial = V^T lengths_current`.
#[derive(Debug, Clone, PartialEq)]
pub struct RauzyState<L = f64> {
    iet: Iet<L>,
    visitation: Option<Vec<i64>>,
    step_count: u64,
    last_type: InductionType,
    /// Sum of `-ln` of the renormalisation factors applied so far.
    time: f64,
}

/// Outcome of one Zorich step.
#[derive(Debug, Clone, PartialEq)]
pub struct ZorichStep {
    pub kind: InductionType,
    pub run_length: u64,
    /// The product of the run's elementary matrices, row-major.
    pub matrix: Vec<i64>,
    /// `-ln` of the total length after the run.
    pub time: f64,
}

impl<L: Length> RauzyState<L> {
    pub fn new(iet: Iet<L>) -> Self {
        let d = iet.dim();
        RauzyState { visitation: Some(identity(d)), iet, step_count: 0, last_type: InductionType::None, time: 0.0 }
    }

    pub fn iet(&self) -> &Iet<L> {
        &self.iet
    }

    /// `None` once an entry has passed `2^62`.
    pub fn visitation(&self) -> Option<&[i64]> {
        self.visitation.as_deref()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn last_type(&self) -> InductionType {
        self.last_type
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Type of the next Rauzy step.
    pub fn next_type(&self) -> Result<InductionType> {
        let iet = &self.iet;
        let a = &iet.lengths[*iet.top.last().unwrap()];
        let b = &iet.lengths[*iet.bottom.last().unwrap()];
        match a.compare(b, &iet.total_length()) {
            Some(Ordering::Greater) => Ok(InductionType::Top),
            Some(_) => Ok(InductionType::Bottom),
            None => Err(LabError::NonGeneric(format!(
                "tie between the last intervals after {} Rauzy steps",
                self.step_count
            ))),
        }
    }

    /// One Rauzy-Veech step; returns `(winner, loser)`.
    pub fn rauzy_step(&mut self) -> Result<(usize, usize)> {
        let kind = self.next_type()?;
        let d = self.iet.dim();
        let alpha = self.iet.top[d - 1];
        let beta = self.iet.bottom[d - 1];
        let (winner, loser) = match kind {
            InductionType::Top => {
                let pos = self.iet.bottom.iter().position(|&l| l == alpha).unwrap();
                self.iet.bottom.pop();
                self.iet.bottom.insert(pos + 1, beta);
                (alpha, beta)
            }
            _ => {
                let pos = self.iet.top.iter().position(|&l| l == beta).unwrap();
                self.iet.top.pop();
                self.iet.top.insert(pos + 1, alpha);
                (beta, alpha)
            }
        };
        self.iet.lengths[winner] = self.iet.lengths[winner].minus(&self.iet.lengths[loser]);
        if let Some(v) = &mut self.visitation {
            if !add_row(v, d, loser, winner) {
                self.visitation = None;
            }
        }
        self.step_count += 1;
        self.last_type = kind;
        Ok((winner, loser))
    }

    /// Rauzy steps through one maximal run of constant type, then lengths
    /// rescaled to sum 1.
    pub fn zorich_step(&mut self) -> Result<ZorichStep> {
        let d = self.iet.dim();
        let kind = self.next_type()?;
        let mut matrix = identity(d);
        let mut run = 0u64;
        loop {
            let (w, l) = self.rauzy_step()?;
            add_row(&mut matrix, d, l, w);
            run += 1;
            if self.next_type()? != kind {
                break;
            }
            if run >= MAX_RUN_LENGTH {
                return Err(LabError::DegenerateOrbit(format!("Zorich run exceeded {MAX_RUN_LENGTH} Rauzy steps")));
            }
        }
        let total = self.iet.total_length();
        let time = -total.to_f64().ln();
        for l in &mut self.iet.lengths {
            *l = l.divide(&total);
        }
        self.time += time;
        Ok(ZorichStep { kind, run_length: run, matrix, time })
    }
}

fn identity(d: usize) -> Vec<i64> {
    let mut m = vec![0; d * d];
    for i in 0..d {
        m[i * d + i] = 1;
    }
    m
}

/// Row `target += row source`; false once an entry passes the limit.
fn add_row(m: &mut [i64], d: usize, target: usize, source: usize) -> bool {
    let mut ok = true;
    for j in 0..d {
        let v = m[target * d + j].saturating_add(m[source * d + j]);
        ok &= v <= VISITATION_LIMIT;
        m[target * d + j] = v;
    }
    ok
}

/// See [`RauzyState::rauzy_step`].
pub fn rauzy_step<L: Length>(mut state: RauzyState<L>) -> Result<RauzyState<L>> {
    state.rauzy_step()?;
    Ok(state)
}

/// See [`RauzyState::zorich_step`].
pub fn zorich_step<L: Length>(mut state: RauzyState<L>) -> Result<RauzyState<L>> {
    state.zorich_step()?;
    Ok(state)
}

/// Lyapunov spectrum of the Zorich cocycle.
///
/// Each orbit starts from uniform random lengths drawn from
/// `stream.substream(i)`, discards `n_steps / 10` Zorich steps, then runs the
/// QR procedure on the Zorich matrices for `n_steps` steps. Time is the
/// accumulated log of the length renormalisation, so the top exponent is 1.
/// Orbits that hit a tie or an overlong run are dropped; at least 90% must
/// survive.
pub fn zorich_spectrum(
    permutation: &[usize],
    n_orbits: usize,
    n_steps: u64,
    stream: &Stream,
) -> Result<LyapunovEstimate> {
    validate_permutation(permutation)?;
    if !is_irreducible(permutation) {
        return Err(LabError::Config(format!("permutation {permutation:?} is reducible")));
    }
    if n_orbits == 0 || n_steps == 0 {
        return Err(LabError::Invalid("zorich_spectrum needs positive orbit and step counts".into()));
    }
    let results: Vec<Result<Vec<f64>>> = (0..n_orbits as u64)
        .into_par_iter()
        .map(|i| orbit_spectrum(permutation, n_steps, &mut stream.substream(i)))
        .collect();
    let aborted = results.iter().filter(|r| r.is_err()).count();
    let survivors: Vec<Vec<f64>> = results.into_iter().filter_map(Result::ok).collect();
    if (survivors.len() as f64) < MIN_SURVIVING_FRACTION * n_orbits as f64 {
        return Err(LabError::DegenerateOrbit(format!(
            "only {} of {n_orbits} Zorich orbits survived",
            survivors.len()
        )));
    }
    let mut est = aggregate(survivors, n_steps, stream.key());
    est.aborted_orbits = aborted;
    est.time_unit = "log length renormalization per Zorich step";
    Ok(est)
}

fn orbit_spectrum(permutation: &[usize], n_steps: u64, stream: &mut Stream) -> Result<Vec<f64>> {
    let d = permutation.len();
    let mut state = RauzyState::new(Iet::random(permutation, stream)?);
    for _ in 0..n_steps / 10 {
        state.zorich_step()?;
    }
    let mut q = Matrix::identity(d);
    let mut z = Matrix::zeros(d);
    let mut tmp = Matrix::zeros(d);
    let mut logs = vec![0.0; d];
    let mut time = 0.0;
    for _ in 0..n_steps {
        let step = state.zorich_step()?;
        for (dst, &src) in z.as_mut_slice().iter_mut().zip(&step.matrix) {
            *dst = src as f64;
        }
        z.mul_into(&q, &mut tmp);
        let (nq, diag) = tmp.qr_positive();
        q = nq;
        for (l, r) in logs.iter_mut().zip(&diag) {
            *l += r.ln();
        }
        time += step.time;
    }
    Ok(logs.iter().map(|l| l / time).collect())
}
