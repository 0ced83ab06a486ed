use crate::error::{Error, Result};

use super::geometry::{BoundaryGeometry, SensorIndicator};
use super::psi::BoundaryProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPlacement {
    pub indicator: SensorIndicator,
    pub lambda: f64,
    /// `H¹` measure of the selected samples.
    pub measure: f64,
}

/// Superlevel set `{ψ ≥ λ}` with measure `L · perimeter`, `λ` found by bisection.
///
/// Samples strictly above `λ` are always selected; samples tied at `λ` are
/// admitted in increasing angle until the measure is closest to the target,
/// so `{ψ > λ} ⊆ Γ ⊆ {ψ ≥ λ}` holds exactly on the samples.
pub fn place_threshold(
    profile: &BoundaryProfile,
    fraction: f64,
    geom: &BoundaryGeometry,
) -> Result<ThresholdPlacement> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "measure fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let psi = profile.values();
    if psi.len() != geom.samples() {
        return Err(Error::InvalidParameter("profile and geometry sizes differ".into()));
    }
    let weights: Vec<f64> = geom.speed_samples().iter().map(|s| s * geom.dtheta()).collect();
    let target = fraction * weights.iter().sum::<f64>();
    let measure_at_least = |lambda: f64| -> f64 {
        psi.iter()
            .zip(&weights)
            .filter(|(p, _)| **p >= lambda)
            .map(|(_, w)| w)
            .sum()
    };

    // invariant: measure{ψ ≥ lo} ≥ target > measure{ψ ≥ hi}
    let (min, max) = psi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut lo = min;
    let mut hi = if max > min { max + (max - min) } else { max + 1.0 };
    for _ in 0..2000 {
        if !psi.iter().any(|&v| v > lo && v < hi) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if measure_at_least(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // smallest sample value not below lo
    let lambda = psi.iter().cloned().filter(|&v| v >= lo).fold(f64::INFINITY, f64::min);

    let mut active: Vec<bool> = psi.iter().map(|&v| v > lambda).collect();
    let mut measure: f64 = active.iter().zip(&weights).filter(|(a, _)| **a).map(|(_, w)| w).sum();
    for b in 0..psi.len() {
        if psi[b] == lambda {
            let w = weights[b];
            if (measure + w - target).abs() < (measure - target).abs() || measure < target - 0.5 * w {
                active[b] = true;
                measure += w;
            } else {
                break;
            }
        }
    }
    Ok(ThresholdPlacement {
        indicator: SensorIndicator::new(active),
        lambda,
        measure,
    })
}
