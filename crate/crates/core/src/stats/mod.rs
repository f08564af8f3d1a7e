//! Empirical distributions, reference laws, events and the limit-theorem
//! estimators.

pub mod ecdf;
pub mod estimators;
pub mod events;
pub mod green_kubo;
pub mod law;

pub use ecdf::{ks_distance, EmpiricalDistribution};
pub use estimators::*;
pub use events::{Event, EventKind};
pub use green_kubo::{variance_green_kubo, GreenKuboEstimate};
pub use law::{Interval, ReferenceLaw};
