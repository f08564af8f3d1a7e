//! Invertible measure-preserving base systems.
//!
//! Torus coordinates are stored as fixed-point fractions of `2^64`. Integer
//! matrices act on that representation by wrapping arithmetic, so a toral
//! automorphism is an exact bijection of the grid: `T^a T^b = T^(a+b)` holds
//! bit for bit and long orbits never drift. Shift points are a seed plus an
//! offset; their coordinates are recomputed on demand from a counter-based
//! hash, which makes the shift and its inverse exact offset increments.

use nalgebra::Complex;

use crate::error::{LabError, Result};
use crate::linalg::{norm, IntMatrix, Matrix, WrappingMatrix};
use crate::rng::{hash_index, unit_f64, Stream};

pub const MAX_TORUS_DIM: usize = 6;

/// Indices `|k| <= SYMBOLIC_HORIZON` are compared by the symbolic metric.
pub const SYMBOLIC_HORIZON: i64 = 64;

/// Largest iterate accepted by [`PhaseSpaceSystem::apply_map`].
pub const MAX_ITERATE: i64 = 1 << 40;

const OFFSET_LIMIT: i64 = 1 << 62;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Converts a real number to a torus coordinate in turns (mod 1).
#[inline]
pub fn to_turns(x: f64) -> u64 {
    if x.abs() < 0.5 {
        (x * TWO_POW_64).round() as i64 as u64
    } else {
        let frac = x.rem_euclid(1.0);
        let t = (frac * TWO_POW_64).round();
        if t >= TWO_POW_64 {
            0
        } else {
            t as u64
        }
    }
}

/// Torus coordinate of a turn count, in `[0, 1)`.
#[inline]
pub fn turns_to_f64(t: u64) -> f64 {
    unit_f64(t)
}

/// Signed representative of a turn difference, in `[-1/2, 1/2)`.
#[inline]
pub fn signed_turns_to_f64(t: u64) -> f64 {
    (t as i64) as f64 / TWO_POW_64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusPoint {
    dim: u8,
    turns: [u64; MAX_TORUS_DIM],
}

impl TorusPoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_TORUS_DIM {
            return Err(LabError::Invalid(format!("torus dimension must be in 1..={MAX_TORUS_DIM}")));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return Err(LabError::Domain(format!("torus coordinate {c} is outside [0, 1)")));
        }
        let mut turns = [0u64; MAX_TORUS_DIM];
        for (t, &c) in turns.iter_mut().zip(coords) {
            *t = to_turns(c);
        }
        Ok(TorusPoint { dim: coords.len() as u8, turns })
    }

    pub fn from_turns(turns: &[u64]) -> Self {
        assert!(!turns.is_empty() && turns.len() <= MAX_TORUS_DIM);
        let mut t = [0u64; MAX_TORUS_DIM];
        t[..turns.len()].copy_from_slice(turns);
        TorusPoint { dim: turns.len() as u8, turns: t }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn turns(&self) -> &[u64] {
        &self.turns[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        turns_to_f64(self.turns[i])
    }

    pub fn coords(&self) -> Vec<f64> {
        self.turns().iter().map(|&t| turns_to_f64(t)).collect()
    }

    /// `self + delta (mod 1)` with `delta` given in turns.
    #[inline]
    pub fn translate(&self, delta: &[u64]) -> TorusPoint {
        let mut out = *self;
        for (t, d) in out.turns.iter_mut().zip(delta) {
            *t = t.wrapping_add(*d);
        }
        out
    }

    /// Flat-torus distance: minimum over integer shifts of the Euclidean norm.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.turns()
            .iter()
            .zip(other.turns())
            .map(|(a, b)| signed_turns_to_f64(a.wrapping_sub(*b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A point of the two-sided shift: coordinate `k` is a pure function of
/// `(seed, offset + k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolicPoint {
    pub seed: u64,
    pub offset: i64,
    pub alphabet_size: u32,
}

impl SymbolicPoint {
    #[inline]
    fn bits(&self, k: i64) -> u64 {
        hash_index(self.seed, self.offset.wrapping_add(k) as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    Torus(TorusPoint),
    Symbolic(SymbolicPoint),
}

impl Point {
    pub fn torus(coords: &[f64]) -> Result<Point> {
        TorusPoint::new(coords).map(Point::Torus)
    }

    pub fn as_torus(&self) -> Option<&TorusPoint> {
        match self {
            Point::Torus(t) => Some(t),
            Point::Symbolic(_) => None,
        }
    }

    pub fn as_symbolic(&self) -> Option<&SymbolicPoint> {
        match self {
            Point::Symbolic(s) => Some(s),
            Point::Torus(_) => None,
        }
    }

    /// Short human-readable description, used for witness points in reports.
    pub fn describe(&self) -> String {
        match self {
            Point::Torus(t) => format!("torus{:?}", t.coords()),
            Point::Symbolic(s) => format!("shift(seed={:#018x}, offset={})", s.seed, s.offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    TorusAutomorphism { matrix: IntMatrix },
    TwoSidedShift { weights: Vec<f64> },
    TorusTranslation { vector: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompanionKind {
    /// `U x = x + amplitude * v_s` along the unit stable eigenvector.
    StableTranslation {
        amplitude: f64,
    },
    Identity,
    TorusTranslation {
        vector: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricId {
    EuclideanTorus,
    Cylinder2Adic,
}

#[derive(Debug, Clone, PartialEq)]
enum Engine {
    Automorphism { forward: WrappingMatrix, backward: WrappingMatrix, stable: Option<StableDirection> },
    Translation { turns: Vec<u64> },
    Shift { cumulative: Vec<f64> },
}

/// Real eigenvalue of modulus below one and its unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct StableDirection {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum CompanionEngine {
    Identity,
    Translation { turns: Vec<u64> },
    Stable { amplitude: f64, turns: Vec<u64> },
}

/// An invertible measure-preserving system with its metric, invariant
/// measure sampler and optional companion map.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceSystem {
    kind: SystemKind,
    metric: MetricId,
    engine: Engine,
    companion: Option<(CompanionKind, CompanionEngine)>,
}

impl PhaseSpaceSystem {
    pub fn torus_automorphism(matrix: IntMatrix) -> Result<Self> {
        let d = matrix.dim();
        if d > MAX_TORUS_DIM {
            return Err(LabError::Invalid(format!("torus dimension {d} exceeds {MAX_TORUS_DIM}")));
        }
        let backward = matrix.unimodular_inverse()?;
        let stable = stable_direction(&matrix);
        Ok(PhaseSpaceSystem {
            engine: Engine::Automorphism { forward: matrix.to_wrapping(), backward: backward.to_wrapping(), stable },
            kind: SystemKind::TorusAutomorphism { matrix },
            metric: MetricId::EuclideanTorus,
            companion: None,
        })
    }

    /// The cat map `[[2, 1], [1, 1]]`.
    pub fn cat_map() -> Self {
        Self::torus_automorphism(IntMatrix::from_rows(&[&[2, 1], &[1, 1]]).unwrap()).unwrap()
    }

    pub fn two_sided_shift(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(LabError::Invalid("shift weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::Invalid(format!("shift weights sum to {total}, expected 1")));
        }
        let mut cumulative: Vec<f64> = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(PhaseSpaceSystem {
            kind: SystemKind::TwoSidedShift { weights },
            metric: MetricId::Cylinder2Adic,
            engine: Engine::Shift { cumulative },
            companion: None,
        })
    }

    /// Full shift with `alphabet` equally likely symbols.
    pub fn bernoulli(alphabet: usize) -> Self {
        Self::two_sided_shift(vec![1.0 / alphabet as f64; alphabet]).unwrap()
    }

    pub fn torus_translation(vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() || vector.len() > MAX_TORUS_DIM {
            return Err(LabError::Invalid(format!("torus dimension must be in 1..={MAX_TORUS_DIM}")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Invalid("translation vector must be finite".into()));
        }
        Ok(PhaseSpaceSystem {
            engine: Engine::Translation { turns: vector.iter().map(|&v| to_turns(v)).collect() },
            kind: SystemKind::TorusTranslation { vector },
            metric: MetricId::EuclideanTorus,
            companion: None,
        })
    }

    /// Attaches a companion map `U`.
    pub fn with_companion(mut self, kind: CompanionKind) -> Result<Self> {
        let engine = match (&kind, &self.engine) {
            (CompanionKind::Identity, _) => CompanionEngine::Identity,
            (_, Engine::Shift { .. }) => {
                return Err(LabError::Unsupported("only the identity companion is available on shift systems".into()))
            }
            (CompanionKind::TorusTranslation { vector }, _) => {
                if vector.len() != self.torus_dim().unwrap_or(0) {
                    return Err(LabError::Invalid("companion translation has the wrong dimension".into()));
                }
                CompanionEngine::Translation { turns: vector.iter().map(|&v| to_turns(v)).collect() }
            }
            (CompanionKind::StableTranslation { amplitude }, Engine::Automorphism { stable, .. }) => {
                let Some(stable) = stable else {
                    return Err(LabError::Unsupported("matrix has no real eigenvalue of modulus < 1".into()));
                };
                CompanionEngine::Stable {
                    amplitude: *amplitude,
                    turns: stable.vector.iter().map(|&v| to_turns(amplitude * v)).collect(),
                }
            }
            (CompanionKind::StableTranslation { .. }, Engine::Translation { .. }) => {
                return Err(LabError::Unsupported("a torus translation has no stable direction".into()))
            }
        };
        self.companion = Some((kind, engine));
        Ok(self)
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn metric(&self) -> MetricId {
        self.metric
    }

    pub fn companion(&self) -> Option<&CompanionKind> {
        self.companion.as_ref().map(|(k, _)| k)
    }

    pub fn has_companion(&self) -> bool {
        self.companion.is_some()
    }

    pub fn torus_dim(&self) -> Option<usize> {
        match &self.kind {
            SystemKind::TorusAutomorphism { matrix } => Some(matrix.dim()),
            SystemKind::TorusTranslation { vector } => Some(vector.len()),
            SystemKind::TwoSidedShift { .. } => None,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match &self.kind {
            SystemKind::TwoSidedShift { weights } => Some(weights),
            _ => None,
        }
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        self.weights().map(|w| w.len())
    }

    pub fn is_shift(&self) -> bool {
        matches!(self.kind, SystemKind::TwoSidedShift { .. })
    }

    /// Stable eigen-data of a toral automorphism, when a real contracting
    /// eigenvalue exists.
    pub fn stable_direction(&self) -> Option<&StableDirection> {
        match &self.engine {
            Engine::Automorphism { stable, .. } => stable.as_ref(),
            _ => None,
        }
    }

    /// Checks that `p` belongs to this system's phase space.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match (p, &self.kind) {
            (Point::Torus(t), _) if Some(t.dim()) == self.torus_dim() => Ok(()),
            (Point::Symbolic(s), SystemKind::TwoSidedShift { weights })
                if s.alphabet_size as usize == weights.len() =>
            {
                Ok(())
            }
            _ => Err(LabError::TypeMismatch(format!("point {} does not belong to this phase space", p.describe()))),
        }
    }

    /// Symbol at index `k` of a shift point.
    #[inline]
    pub fn symbol(&self, p: &SymbolicPoint, k: i64) -> usize {
        let Engine::Shift { cumulative } = &self.engine else {
            panic!("symbol() called on a non-shift system");
        };
        let u = unit_f64(p.bits(k));
        cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
    }

    /// One forward step `T x`.
    #[inline]
    pub fn step(&self, p: &Point) -> Point {
        match (&self.engine, p) {
            (Engine::Automorphism { forward, .. }, Point::Torus(t)) => {
                let mut out = *t;
                forward.apply(t.turns(), &mut out.turns[..t.dim()]);
                Point::Torus(out)
            }
            (Engine::Translation { turns }, Point::Torus(t)) => Point::Torus(t.translate(turns)),
            (Engine::Shift { .. }, Point::Symbolic(s)) => Point::Symbolic(SymbolicPoint { offset: s.offset + 1, ..*s }),
            _ => panic!("point does not belong to this system"),
        }
    }

    /// One backward step `T^{-1} x`.
    #[inline]
    pub fn step_back(&self, p: &Point) -> Point {
        match (&self.engine, p) {
            (Engine::Automorphism { backward, .. }, Point::Torus(t)) => {
                let mut out = *t;
                backward.apply(t.turns(), &mut out.turns[..t.dim()]);
                Point::Torus(out)
            }
            (Engine::Translation { turns }, Point::Torus(t)) => {
                let neg: Vec<u64> = turns.iter().map(|x| x.wrapping_neg()).collect();
                Point::Torus(t.translate(&neg))
            }
            (Engine::Shift { .. }, Point::Symbolic(s)) => Point::Symbolic(SymbolicPoint { offset: s.offset - 1, ..*s }),
            _ => panic!("point does not belong to this system"),
        }
    }

    /// `T^n x` for `|n| <= 2^40`.
    pub fn apply_map(&self, p: &Point, n: i64) -> Result<Point> {
        self.check_point(p)?;
        if n.abs() > MAX_ITERATE {
            return Err(LabError::Range(format!("|n| = {} exceeds 2^40", n.abs())));
        }
        Ok(match (&self.engine, p) {
            (Engine::Automorphism { forward, backward, .. }, Point::Torus(t)) => {
                let m = if n >= 0 { forward.pow(n as u64) } else { backward.pow(n.unsigned_abs()) };
                let mut out = *t;
                m.apply(t.turns(), &mut out.turns[..t.dim()]);
                Point::Torus(out)
            }
            (Engine::Translation { turns }, Point::Torus(t)) => {
                let scaled: Vec<u64> = turns.iter().map(|x| x.wrapping_mul(n as u64)).collect();
                Point::Torus(t.translate(&scaled))
            }
            (Engine::Shift { .. }, Point::Symbolic(s)) => {
                let offset = s
                    .offset
                    .checked_add(n)
                    .filter(|o| o.abs() <= OFFSET_LIMIT)
                    .ok_or_else(|| LabError::Range("symbolic offset overflow".into()))?;
                Point::Symbolic(SymbolicPoint { offset, ..*s })
            }
            _ => unreachable!("checked above"),
        })
    }

    fn companion_engine(&self) -> Result<&CompanionEngine> {
        self.companion.as_ref().map(|(_, e)| e).ok_or_else(|| LabError::Config("system has no companion map".into()))
    }

    /// `U x`.
    pub fn apply_companion(&self, p: &Point) -> Result<Point> {
        self.check_point(p)?;
        Ok(match (self.companion_engine()?, p) {
            (CompanionEngine::Identity, _) => *p,
            (CompanionEngine::Translation { turns }, Point::Torus(t))
            | (CompanionEngine::Stable { turns, .. }, Point::Torus(t)) => Point::Torus(t.translate(turns)),
            _ => unreachable!("companions other than the identity live on tori"),
        })
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(match (p, q) {
            (Point::Torus(a), Point::Torus(b)) => a.distance(b),
            (Point::Symbolic(a), Point::Symbolic(b)) => {
                if a.seed == b.seed && a.offset == b.offset {
                    return Ok(0.0);
                }
                for j in 0..=SYMBOLIC_HORIZON {
                    let differs = |k: i64| self.symbol(a, k) != self.symbol(b, k);
                    if differs(j) || (j > 0 && differs(-j)) {
                        return Ok((-j as f64).exp2());
                    }
                }
                0.0
            }
            _ => unreachable!("checked above"),
        })
    }

    /// Draws a point from the invariant measure.
    pub fn sample_measure(&self, stream: &mut Stream) -> Point {
        match &self.kind {
            SystemKind::TwoSidedShift { weights } => Point::Symbolic(SymbolicPoint {
                seed: stream.next_bits(),
                offset: 0,
                alphabet_size: weights.len() as u32,
            }),
            _ => {
                let d = self.torus_dim().unwrap();
                let mut turns = [0u64; MAX_TORUS_DIM];
                for t in turns.iter_mut().take(d) {
                    *t = stream.next_bits();
                }
                Point::Torus(TorusPoint { dim: d as u8, turns })
            }
        }
    }

    /// Exact displacement `T^n U x - T^n x` for companions that are
    /// translations of a group automorphism or of a translation. It does not
    /// depend on `x`.
    pub fn companion_displacement(&self, n: usize) -> Result<Vec<f64>> {
        let d = self.torus_dim().unwrap_or(0);
        Ok(match self.companion_engine()? {
            CompanionEngine::Identity => vec![0.0; d],
            CompanionEngine::Stable { amplitude, .. } => {
                let stable = self.stable_direction().expect("validated at construction");
                let scale = amplitude * stable.eigenvalue.powi(n as i32);
                stable.vector.iter().map(|v| scale * v).collect()
            }
            CompanionEngine::Translation { turns } => {
                let delta = match &self.engine {
                    Engine::Automorphism { forward, .. } => {
                        let mut out = vec![0u64; d];
                        forward.pow(n as u64).apply(turns, &mut out);
                        out
                    }
                    _ => turns.clone(),
                };
                delta.into_iter().map(signed_turns_to_f64).collect()
            }
        })
    }

    /// Iterator over `(T^n x, T^n U x)` for `n = 0, 1, 2, ...`.
    ///
    /// A stable translation is carried along as the displacement
    /// `amplitude * lambda_s^n * v_s` added to the base orbit rather than by
    /// iterating the rounded point `U x`; the rounding error of `U x` has an
    /// unstable component that the map would otherwise amplify.
    pub fn companion_orbit(&self, x: &Point) -> Result<CompanionOrbit<'_>> {
        self.check_point(x)?;
        let engine = self.companion_engine()?;
        let companion = self.apply_companion(x)?;
        Ok(CompanionOrbit {
            system: self,
            stable: match engine {
                CompanionEngine::Stable { amplitude, .. } => {
                    let s = self.stable_direction().unwrap();
                    Some((*amplitude, s.eigenvalue, s.vector.clone()))
                }
                _ => None,
            },
            base: *x,
            companion,
            n: 0,
        })
    }

    /// Distances `d(T^n U x, T^n x)` for `n = 0..=n_max`, with the fitted
    /// exponential rate.
    pub fn contraction_profile(&self, x: &Point, n_max: usize) -> Result<ContractionProfile> {
        self.check_point(x)?;
        if n_max > 10_000 {
            return Err(LabError::Range("n_max must be at most 10^4".into()));
        }
        let distances = match self.companion_engine()? {
            CompanionEngine::Identity => vec![0.0; n_max + 1],
            CompanionEngine::Stable { .. } => (0..=n_max)
                .map(|n| {
                    let delta = self.companion_displacement(n).unwrap();
                    delta.iter().map(|c| (c - c.round()).powi(2)).sum::<f64>().sqrt()
                })
                .collect(),
            CompanionEngine::Translation { .. } => {
                self.companion_orbit(x)?.take(n_max + 1).map(|(a, b)| self.distance(&a, &b).unwrap()).collect()
            }
        };
        Ok(ContractionProfile::from_distances(distances))
    }
}

/// See [`PhaseSpaceSystem::companion_orbit`].
pub struct CompanionOrbit<'a> {
    system: &'a PhaseSpaceSystem,
    stable: Option<(f64, f64, Vec<f64>)>,
    base: Point,
    companion: Point,
    n: usize,
}

impl Iterator for CompanionOrbit<'_> {
    type Item = (Point, Point);

    fn next(&mut self) -> Option<(Point, Point)> {
        let out = match (&self.stable, &self.base) {
            (Some((amplitude, eigenvalue, vector)), Point::Torus(t)) => {
                let scale = amplitude * eigenvalue.powi(self.n as i32);
                let delta: Vec<u64> = vector.iter().map(|v| to_turns(scale * v)).collect();
                (self.base, Point::Torus(t.translate(&delta)))
            }
            _ => (self.base, self.companion),
        };
        self.base = self.system.step(&self.base);
        if self.stable.is_none() {
            self.companion = self.system.step(&self.companion);
        }
        self.n += 1;
        Some(out)
    }
}

/// Result of [`PhaseSpaceSystem::contraction_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProfile {
    pub distances: Vec<f64>,
    /// Least-squares slope of `ln d_n` against `n` over the indices where
    /// `d_n > 1e-12`; `None` with fewer than two such indices.
    pub slope: Option<f64>,
}

impl ContractionProfile {
    pub const FIT_FLOOR: f64 = 1e-12;

    pub fn from_distances(distances: Vec<f64>) -> Self {
        let pts: Vec<(f64, f64)> = distances
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > Self::FIT_FLOOR)
            .map(|(n, d)| (n as f64, d.ln()))
            .collect();
        let slope = least_squares_slope(&pts);
        ContractionProfile { distances, slope }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.distances.iter().all(|&d| d == 0.0)
    }

    /// `d_n -> 0` read at finite `n`: the last distance is negligible against
    /// the first, or the profile vanishes.
    pub fn is_contracting(&self) -> bool {
        let first = self.distances.first().copied().unwrap_or(0.0);
        let last = self.distances.last().copied().unwrap_or(0.0);
        last == 0.0 || last <= 1e-9 * first
    }

    /// `max_{n >= from} d_n / rate^n`, the constant of an exponential bound.
    pub fn hyperbolic_constant(&self, rate: f64, from: usize) -> f64 {
        self.distances
            .iter()
            .enumerate()
            .skip(from)
            .map(|(n, d)| if *d == 0.0 { 0.0 } else { (d.ln() - n as f64 * rate.ln()).exp() })
            .fold(0.0, f64::max)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn stable_direction(matrix: &IntMatrix) -> Option<StableDirection> {
    let m = matrix.to_f64();
    let eigs: Vec<Complex<f64>> = m.to_nalgebra().complex_eigenvalues().iter().copied().collect();
    let eigenvalue = eigs
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs()) && z.re.abs() < 1.0 - 1e-12)
        .map(|z| z.re)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))?;
    let d = m.dim();
    let mut shifted = m.clone();
    for i in 0..d {
        shifted.set(i, i, m.get(i, i) - eigenvalue);
    }
    let mut vector = shifted.null_vector();
    // One step of inverse iteration polishes both the vector and the value.
    if let Ok(inv) = shifted_inverse(&m, eigenvalue * (1.0 + 1e-9)) {
        let mut polished = vec![0.0; d];
        inv.apply(&vector, &mut polished);
        let n = norm(&polished);
        if n.is_finite() && n > 0.0 {
            vector = polished.iter().map(|v| v / n).collect();
        }
    }
    if let Some(first) = vector.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            vector.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let mut image = vec![0.0; d];
    m.apply(&vector, &mut image);
    let eigenvalue = crate::linalg::dot(&image, &vector);
    Some(StableDirection { eigenvalue, vector })
}

fn shifted_inverse(m: &Matrix, shift: f64) -> Result<Matrix> {
    let mut s = m.clone();
    for i in 0..m.dim() {
        s.set(i, i, m.get(i, i) - shift);
    }
    s.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cat() -> PhaseSpaceSystem {
        PhaseSpaceSystem::cat_map()
    }

    #[test]
    fn cat_map_fixes_origin() {
        let x = Point::torus(&[0.0, 0.0]).unwrap();
        assert_eq!(cat().apply_map(&x, 7).unwrap(), x);
    }

    #[test]
    fn zero_iterate_is_identity() {
        let x = Point::torus(&[0.25, 0.6]).unwrap();
        assert_eq!(cat().apply_map(&x, 0).unwrap(), x);
        let shift = PhaseSpaceSystem::bernoulli(2);
        let mut s = Stream::from_seed(3);
        let p = shift.sample_measure(&mut s);
        assert_eq!(shift.apply_map(&p, 0).unwrap(), p);
    }

    #[test]
    fn inverse_composition_restores_point() {
        let sys = cat();
        let x = Point::torus(&[0.3, 0.7]).unwrap();
        let y = sys.apply_map(&sys.apply_map(&x, 3).unwrap(), -3).unwrap();
        let c = y.as_torus().unwrap().coords();
        assert_abs_diff_eq!(c[0], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], 0.7, epsilon = 1e-10);
    }

    #[test]
    fn apply_map_agrees_with_stepping() {
        let sys = cat();
        let mut s = Stream::from_seed(5);
        let x = sys.sample_measure(&mut s);
        let mut y = x;
        for _ in 0..50 {
            y = sys.step(&y);
        }
        assert_eq!(sys.apply_map(&x, 50).unwrap(), y);
        for _ in 0..80 {
            y = sys.step_back(&y);
        }
        assert_eq!(sys.apply_map(&x, -30).unwrap(), y);
    }

    #[test]
    fn iterate_limit_is_enforced() {
        let sys = PhaseSpaceSystem::bernoulli(2);
        let mut s = Stream::from_seed(0);
        let x = sys.sample_measure(&mut s);
        assert!(matches!(sys.apply_map(&x, MAX_ITERATE + 1), Err(LabError::Range(_))));
        let far = Point::Symbolic(SymbolicPoint { seed: 1, offset: OFFSET_LIMIT, alphabet_size: 2 });
        assert!(matches!(sys.apply_map(&far, 1), Err(LabError::Range(_))));
    }

    #[test]
    fn identity_companion_is_identity() {
        let sys = cat().with_companion(CompanionKind::Identity).unwrap();
        let x = Point::torus(&[0.1, 0.9]).unwrap();
        assert_eq!(sys.apply_companion(&x).unwrap(), x);
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let sys = cat().with_companion(CompanionKind::StableTranslation { amplitude: 0.0 }).unwrap();
        let x = Point::torus(&[0.1, 0.9]).unwrap();
        assert_eq!(sys.apply_companion(&x).unwrap(), x);
    }

    #[test]
    fn stable_translation_uses_closed_form_eigenvector() {
        // Stable eigenvector of [[2,1],[1,1]] from (2 - lambda_s) x + y = 0:
        // (1, -(1 + sqrt 5)/2), normalised.
        let s5 = 5f64.sqrt();
        let raw = [1.0, -(1.0 + s5) / 2.0];
        let n = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
        let expected = [0.1 * raw[0] / n, (0.1 * raw[1] / n).rem_euclid(1.0)];
        let sys = cat().with_companion(CompanionKind::StableTranslation { amplitude: 0.1 }).unwrap();
        let x = Point::torus(&[0.0, 0.0]).unwrap();
        let u = sys.apply_companion(&x).unwrap().as_torus().unwrap().coords();
        assert_abs_diff_eq!(u[0], expected[0], epsilon = 1e-14);
        assert_abs_diff_eq!(u[1], expected[1], epsilon = 1e-14);
        let st = sys.stable_direction().unwrap();
        assert_abs_diff_eq!(st.eigenvalue, (3.0 - s5) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn companion_errors() {
        let x = Point::torus(&[0.1, 0.9]).unwrap();
        assert!(matches!(cat().apply_companion(&x), Err(LabError::Config(_))));
        let rot = PhaseSpaceSystem::torus_translation(vec![0.3, 0.1]).unwrap();
        assert!(matches!(
            rot.with_companion(CompanionKind::StableTranslation { amplitude: 0.1 }),
            Err(LabError::Unsupported(_))
        ));
        // Rotation matrix of order 4: eigenvalues +-i, no stable direction.
        let rot4 = PhaseSpaceSystem::torus_automorphism(IntMatrix::from_rows(&[&[0, -1], &[1, 0]]).unwrap()).unwrap();
        assert!(matches!(
            rot4.with_companion(CompanionKind::StableTranslation { amplitude: 0.1 }),
            Err(LabError::Unsupported(_))
        ));
        assert!(PhaseSpaceSystem::bernoulli(2)
            .with_companion(CompanionKind::TorusTranslation { vector: vec![0.1] })
            .is_err());
    }

    #[test]
    fn torus_distance_wraps() {
        let sys = cat();
        let x = Point::torus(&[0.1, 0.1]).unwrap();
        let y = Point::torus(&[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(sys.distance(&x, &y).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(sys.distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn symbolic_distance_first_difference() {
        let sys = PhaseSpaceSystem::bernoulli(2);
        let mut s = Stream::from_seed(11);
        // Search for a pair agreeing on |k| <= 2 and at k = 3 but differing at k = -3.
        let base = sys.sample_measure(&mut s);
        let bp = *base.as_symbolic().unwrap();
        let other = (0..)
            .map(|_| *sys.sample_measure(&mut s).as_symbolic().unwrap())
            .find(|q| {
                (-2..=2).all(|k| sys.symbol(q, k) == sys.symbol(&bp, k))
                    && sys.symbol(q, 3) == sys.symbol(&bp, 3)
                    && sys.symbol(q, -3) != sys.symbol(&bp, -3)
            })
            .unwrap();
        assert_eq!(sys.distance(&base, &Point::Symbolic(other)).unwrap(), 0.125);
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let x = Point::torus(&[0.1, 0.1]).unwrap();
        let y = Point::torus(&[0.1, 0.1, 0.2]).unwrap();
        assert!(matches!(cat().distance(&x, &y), Err(LabError::TypeMismatch(_))));
        let sym = Point::Symbolic(SymbolicPoint { seed: 1, offset: 0, alphabet_size: 2 });
        assert!(matches!(cat().apply_map(&sym, 1), Err(LabError::TypeMismatch(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_uniform() {
        let sys = cat();
        let s = Stream::from_seed(99);
        assert_eq!(sys.sample_measure(&mut s.clone()), sys.sample_measure(&mut s.clone()));
        let mut s = s;
        let n = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let p = sys.sample_measure(&mut s);
            let c = p.as_torus().unwrap().coords();
            sums[0] += c[0];
            sums[1] += c[1];
        }
        for v in sums {
            assert!((v / n as f64 - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn shift_symbol_frequency() {
        let sys = PhaseSpaceSystem::bernoulli(2);
        let mut s = Stream::from_seed(4);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| {
                let p = sys.sample_measure(&mut s);
                sys.symbol(p.as_symbolic().unwrap(), 0) == 1
            })
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.007);
    }

    #[test]
    fn companion_pushforward_preserves_uniform_means() {
        let sys = cat().with_companion(CompanionKind::StableTranslation { amplitude: 0.3 }).unwrap();
        let mut s = Stream::from_seed(8);
        let n = 50_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let u = sys.apply_companion(&sys.sample_measure(&mut s)).unwrap();
            let c = u.as_torus().unwrap().coords();
            sums[0] += c[0];
            sums[1] += c[1];
        }
        for v in sums {
            assert!((v / n as f64 - 0.5).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn identity_companion_profile_is_zero() {
        let sys = cat().with_companion(CompanionKind::Identity).unwrap();
        let x = Point::torus(&[0.2, 0.3]).unwrap();
        let prof = sys.contraction_profile(&x, 100).unwrap();
        assert!(prof.is_identically_zero());
        assert!(prof.slope.is_none());
    }

    #[test]
    fn translations_do_not_contract() {
        let sys = PhaseSpaceSystem::torus_translation(vec![0.2137, 0.7072])
            .unwrap()
            .with_companion(CompanionKind::TorusTranslation { vector: vec![0.05, 0.01] })
            .unwrap();
        let x = Point::torus(&[0.2, 0.3]).unwrap();
        let prof = sys.contraction_profile(&x, 200).unwrap();
        let d0 = prof.distances[0];
        assert!(prof.distances.iter().all(|d| (d - d0).abs() < 1e-15));
        assert!(!prof.is_contracting());
    }

    #[test]
    fn cat_map_contraction_rate() {
        let rate = ((3.0 - 5f64.sqrt()) / 2.0).ln();
        let sys = cat().with_companion(CompanionKind::StableTranslation { amplitude: 0.1 }).unwrap();
        let x = Point::torus(&[0.4, 0.1]).unwrap();
        let prof = sys.contraction_profile(&x, 1000).unwrap();
        let slope = prof.slope.unwrap();
        assert!((slope - rate).abs() <= 0.05 * rate.abs(), "slope {slope}");
        assert!(prof.is_contracting());
        let c = prof.hyperbolic_constant(0.382, 20);
        assert!(c.is_finite() && c < 1.0);
        // Direct fixed-point orbits agree with the displacement form early on.
        let direct: Vec<f64> = (0..12)
            .map(|n| {
                let a = sys.apply_map(&x, n).unwrap();
                let b = sys.apply_map(&sys.apply_companion(&x).unwrap(), n).unwrap();
                sys.distance(&a, &b).unwrap()
            })
            .collect();
        for (n, d) in direct.iter().enumerate() {
            assert!((d - prof.distances[n]).abs() <= 1e-9 * prof.distances[n]);
        }
    }
}
