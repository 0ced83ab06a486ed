//! Sensor placement on the boundary of the body: the energy profile `ψ`, the
//! observability ratio `A₂`, superlevel-set placement for a measure budget,
//! a genetic search over `N₀` equal arcs, and first/second order diagnostics.

mod ga;
mod geometry;
mod kkt;
mod psi;
mod threshold;

pub use ga::{place_ga, GaParams, GaResult};
pub use geometry::{centered_arc, BoundaryGeometry, SensorArcs, SensorIndicator, SensorSet, DEFAULT_BOUNDARY_SAMPLES};
pub use kkt::{kkt_residual, ArcDiagnostic, ArcStatus};
pub use psi::{a2_functional, compute_psi, psi_sampling, BoundaryProfile, H1Norm, PsiMode};
pub use threshold::{place_threshold, ThresholdPlacement};
