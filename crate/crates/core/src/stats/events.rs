//! Events with exactly known measure.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::dynamics::{PhaseSpaceSystem, Point};
use crate::error::{LabError, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    TorusBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `x_{start + j} = symbols[j]` for every `j`.
    ShiftCylinder {
        start: i64,
        symbols: Vec<usize>,
    },
    FullSpace,
    /// Lines within `angular_radius` of the line through `center`.
    ProjectiveCap {
        center: Vec<f64>,
        angular_radius: f64,
    },
}

/// A measurable set together with its exact mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub exact_mass: f64,
}

impl Event {
    pub fn full_space() -> Self {
        Event { kind: EventKind::FullSpace, exact_mass: 1.0 }
    }

    pub fn torus_box(sys: &PhaseSpaceSystem, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = sys.torus_dim().ok_or_else(|| LabError::TypeMismatch("torus box on a non-torus system".into()))?;
        if lower.len() != d || upper.len() != d {
            return Err(LabError::Invalid(format!("torus box needs {d} bounds per side")));
        }
        let mut mass = 1.0;
        for (&lo, &hi) in lower.iter().zip(&upper) {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(LabError::Invalid(format!("box side [{lo}, {hi}) is not inside [0, 1]")));
            }
            mass *= hi - lo;
        }
        Event::with_mass(EventKind::TorusBox { lower, upper }, mass)
    }

    pub fn shift_cylinder(sys: &PhaseSpaceSystem, start: i64, symbols: Vec<usize>) -> Result<Self> {
        let weights = sys.weights().ok_or_else(|| LabError::TypeMismatch("cylinder on a non-shift system".into()))?;
        if symbols.is_empty() {
            return Err(LabError::Invalid("cylinder needs at least one symbol".into()));
        }
        let mut mass = 1.0;
        for &s in &symbols {
            mass *= *weights.get(s).ok_or_else(|| LabError::Invalid(format!("symbol {s} is outside the alphabet")))?;
        }
        Event::with_mass(EventKind::ShiftCylinder { start, symbols }, mass)
    }

    /// Cap in the projective space of `R^m` under the orthogonally invariant
    /// measure: `P(|<u, c>| >= cos r) = I_{sin^2 r}((m-1)/2, 1/2)`.
    pub fn projective_cap(center: Vec<f64>, angular_radius: f64) -> Result<Self> {
        let m = center.len();
        let n = norm(&center);
        if m == 0 || !(n > 0.0) {
            return Err(LabError::Invalid("cap center must be a nonzero vector".into()));
        }
        if !(angular_radius > 0.0) {
            return Err(LabError::Invalid("cap radius must be positive".into()));
        }
        let mass = if m == 1 || angular_radius >= std::f64::consts::FRAC_PI_2 {
            1.0
        } else {
            beta_reg((m as f64 - 1.0) / 2.0, 0.5, angular_radius.sin().powi(2))
        };
        let center = center.iter().map(|c| c / n).collect();
        Event::with_mass(EventKind::ProjectiveCap { center, angular_radius }, mass)
    }

    fn with_mass(kind: EventKind, mass: f64) -> Result<Self> {
        Ok(Event { kind, exact_mass: mass })
    }

    /// Rejects events that cannot support a theorem check.
    pub fn require_positive_mass(&self) -> Result<()> {
        if self.exact_mass > 0.0 {
            Ok(())
        } else {
            Err(LabError::DegenerateEvent(format!("event {:?} has mass 0", self.kind)))
        }
    }

    pub fn is_full_space(&self) -> bool {
        matches!(self.kind, EventKind::FullSpace)
    }

    /// Membership of a base point, with an optional direction for caps.
    pub fn contains(&self, sys: &PhaseSpaceSystem, p: &Point, direction: Option<&[f64]>) -> bool {
        match (&self.kind, p) {
            (EventKind::FullSpace, _) => true,
            (EventKind::TorusBox { lower, upper }, Point::Torus(t)) => (0..t.dim()).all(|i| {
                let c = t.coord(i);
                lower[i] <= c && c < upper[i]
            }),
            (EventKind::ShiftCylinder { start, symbols }, Point::Symbolic(s)) => {
                symbols.iter().enumerate().all(|(j, &sym)| sys.symbol(s, start + j as i64) == sym)
            }
            (EventKind::ProjectiveCap { center, angular_radius }, _) => match direction {
                Some(v) => {
                    let c = dot(center, v).abs() / norm(v);
                    c >= angular_radius.cos()
                }
                None => false,
            },
            _ => false,
        }
    }
}
