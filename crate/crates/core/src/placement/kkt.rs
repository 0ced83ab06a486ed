//! First and second order optimality diagnostics for arc placements.
//!
//! Moving the start `θₙ` changes `J` at the rate
//! `∂J/∂θₙ = speed(θₙ) (f(θ̂ₙ) − f(θₙ))`, since `dθ̂ₙ/dθₙ = speed(θₙ)/speed(θ̂ₙ)`.

use crate::error::{Error, Result};

use super::geometry::{BoundaryGeometry, SensorArcs};
use super::psi::BoundaryProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcStatus {
    /// The arc touches a neighbour (zero slack on at least one side).
    ConstraintActive,
    /// Both neighbours are at positive distance; `f(θ̂) = f(θ)` is expected.
    Stationarity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcDiagnostic {
    /// Arc length from this arc's end to the next arc's start.
    pub slack: f64,
    /// `f(θ̂ₙ) − f(θₙ)`.
    pub stationarity: f64,
    /// `f'(θ̂ₙ)/speed(θ̂ₙ) − f'(θₙ)/speed(θₙ)`; non-positive at a local maximum.
    pub second_order: f64,
    pub status: ArcStatus,
    /// Violation of the first-order condition for the given status: the
    /// stationarity defect for free arcs, the wrong-signed part of the
    /// derivative for arcs pressed against a neighbour.
    pub residual: f64,
}

/// Per-arc diagnostics; an arc counts as constrained when a slack is `≤ tol`.
pub fn kkt_residual(
    arcs: &SensorArcs,
    profile: &BoundaryProfile,
    geom: &BoundaryGeometry,
    tol: f64,
) -> Result<Vec<ArcDiagnostic>> {
    if profile.len() != geom.samples() {
        return Err(Error::InvalidParameter("profile and geometry sizes differ".into()));
    }
    let n = arcs.len();
    let ell = arcs.ell();
    let slacks: Vec<f64> = arcs.gaps(geom).into_iter().map(|g| g - ell).collect();
    let out = (0..n)
        .map(|k| {
            let t = arcs.starts()[k];
            let e = arcs.ends()[k];
            let stationarity = profile.at(geom, e) - profile.at(geom, t);
            let second_order =
                profile.derivative_at(geom, e) / geom.speed_at(e) - profile.derivative_at(geom, t) / geom.speed_at(t);
            let ahead = slacks[k];
            let behind = slacks[(k + n - 1) % n];
            let blocked_ahead = n > 1 && ahead <= tol;
            let blocked_behind = n > 1 && behind <= tol;
            let (status, residual) = match (blocked_ahead, blocked_behind) {
                (false, false) => (ArcStatus::Stationarity, stationarity.abs()),
                // cannot move forward: the derivative may be positive
                (true, false) => (ArcStatus::ConstraintActive, (-stationarity).max(0.0)),
                (false, true) => (ArcStatus::ConstraintActive, stationarity.max(0.0)),
                (true, true) => (ArcStatus::ConstraintActive, 0.0),
            };
            ArcDiagnostic {
                slack: ahead,
                stationarity,
                second_order,
                status,
                residual,
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_arc_on_symmetric_bump_is_stationary() {
        let g = BoundaryGeometry::circle(1.0, 2048).unwrap();
        let p = BoundaryProfile::from_fn(&g, |t| 1.0 + t.cos());
        let arcs = SensorArcs::new(&g, vec![-0.4], 0.8).unwrap();
        let d = kkt_residual(&arcs, &p, &g, 1e-9).unwrap();
        assert_eq!(d[0].status, ArcStatus::Stationarity);
        assert!(d[0].residual < 1e-5);
        // maximum: f' decreases across the arc
        assert!(d[0].second_order < 0.0);
    }

    #[test]
    fn off_centre_arc_has_residual() {
        let g = BoundaryGeometry::circle(1.0, 2048).unwrap();
        let p = BoundaryProfile::from_fn(&g, |t| 1.0 + t.cos());
        let arcs = SensorArcs::new(&g, vec![0.1], 0.8).unwrap();
        let d = kkt_residual(&arcs, &p, &g, 1e-9).unwrap();
        let exact = (0.9f64).cos() - (0.1f64).cos();
        assert!((d[0].stationarity - exact).abs() < 1e-5);
        assert!((d[0].residual - exact.abs()).abs() < 1e-5);
    }

    #[test]
    fn touching_arcs_are_constraint_active() {
        let g = BoundaryGeometry::circle(1.0, 1024).unwrap();
        let p = BoundaryProfile::from_fn(&g, |t| 1.0 + t.cos());
        // two abutting arcs straddling the maximum
        let arcs = SensorArcs::new(&g, vec![-0.5, 0.0], 0.5).unwrap();
        let d = kkt_residual(&arcs, &p, &g, 1e-8).unwrap();
        let first = d.iter().position(|x| x.slack.abs() < 1e-8).unwrap();
        assert_eq!(d[first].status, ArcStatus::ConstraintActive);
        assert!(d.iter().all(|x| x.residual < 1e-5));
    }
}
