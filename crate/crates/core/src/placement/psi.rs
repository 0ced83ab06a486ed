use crate::error::{Error, Result};
use crate::grid::{fft_forward, RealField};
use crate::wave::{interpolate, Probes, Sampling, Trajectory};

use super::geometry::{BoundaryGeometry, SensorSet};

/// How the kinetic energy density is gathered on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiMode {
    /// `ψ(s) = ∫ (∂_t p)²(t, s) dt` on the boundary curve.
    Boundary,
    /// Additionally integrated along the outward normal over `[0, eps]`
    /// with `nodes` trapezoid nodes.
    Volumetric { eps: f64, nodes: usize },
}

impl PsiMode {
    fn offsets(&self) -> Result<Vec<(f64, f64)>> {
        match *self {
            PsiMode::Boundary => Ok(vec![(0.0, 1.0)]),
            PsiMode::Volumetric { eps, nodes } => {
                if !(eps > 0.0) || nodes < 2 {
                    return Err(Error::InvalidParameter(
                        "volumetric psi needs eps > 0 and at least two nodes".into(),
                    ));
                }
                let d = eps / (nodes - 1) as f64;
                Ok((0..nodes)
                    .map(|k| {
                        let w = if k == 0 || k == nodes - 1 { 0.5 * d } else { d };
                        (k as f64 * d, w)
                    })
                    .collect())
            }
        }
    }
}

/// Function sampled on the boundary angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    values: Vec<f64>,
}

impl BoundaryProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary profile"));
        }
        Ok(Self { values })
    }

    pub fn from_fn(geom: &BoundaryGeometry, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: (0..geom.samples()).map(|b| f(geom.theta(b))).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn ensure_matches(&self, geom: &BoundaryGeometry) -> Result<()> {
        if self.values.len() == geom.samples() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "profile has {} samples, geometry has {}",
                self.values.len(),
                geom.samples()
            )))
        }
    }

    /// Linear interpolation at an arbitrary angle.
    pub fn at(&self, geom: &BoundaryGeometry, theta: f64) -> f64 {
        let pos = theta.rem_euclid(std::f64::consts::TAU) / geom.dtheta();
        let n = self.values.len();
        let i = (pos.floor() as usize).min(n - 1);
        let u = pos - i as f64;
        self.values[i] * (1.0 - u) + self.values[(i + 1) % n] * u
    }

    /// Central-difference derivative in `θ`, linearly interpolated.
    pub fn derivative_at(&self, geom: &BoundaryGeometry, theta: f64) -> f64 {
        let n = self.values.len();
        let d: Vec<f64> = (0..n)
            .map(|b| (self.values[(b + 1) % n] - self.values[(b + n - 1) % n]) / (2.0 * geom.dtheta()))
            .collect();
        BoundaryProfile { values: d }.at(geom, theta)
    }

    /// Cumulative table of `∫ f √(ρ² + ρ'²) dθ` for fast arc integrals.
    pub fn arc_integrator(&self, geom: &BoundaryGeometry) -> Result<ArcIntegrator> {
        self.ensure_matches(geom)?;
        let q: Vec<f64> = self
            .values
            .iter()
            .zip(geom.speed_samples())
            .map(|(f, s)| f * s)
            .collect();
        let n = q.len();
        let dt = geom.dtheta();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for b in 0..n {
            cum.push(cum[b] + 0.5 * dt * (q[b] + q[(b + 1) % n]));
        }
        Ok(ArcIntegrator { q, cum, dt })
    }
}

/// Exact integral of the piecewise-linear interpolant of `f · speed`.
#[derive(Debug, Clone)]
pub struct ArcIntegrator {
    q: Vec<f64>,
    cum: Vec<f64>,
    dt: f64,
}

impl ArcIntegrator {
    pub fn total(&self) -> f64 {
        self.cum[self.q.len()]
    }

    pub fn cumulative(&self, theta: f64) -> f64 {
        let n = self.q.len();
        let tau = std::f64::consts::TAU;
        let turns = (theta / tau).floor();
        let r = theta - turns * tau;
        let pos = r / self.dt;
        let i = (pos.floor() as usize).min(n - 1);
        let u = (pos - i as f64).clamp(0.0, 1.0);
        let (a, b) = (self.q[i], self.q[(i + 1) % n]);
        turns * self.total() + self.cum[i] + self.dt * (a * u + 0.5 * (b - a) * u * u)
    }

    /// `∫_a^b f √(ρ² + ρ'²) dθ` for `a ≤ b` (unwrapped angles).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }
}

fn probe_points(geom: &BoundaryGeometry, mode: &PsiMode) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let offsets = mode.offsets()?;
    let mut points = Vec::with_capacity(geom.samples() * offsets.len());
    for b in 0..geom.samples() {
        let t = geom.theta(b);
        let s = geom.point(t);
        let nu = geom.normal(t);
        for &(mu, _) in &offsets {
            points.push([s[0] + mu * nu[0], s[1] + mu * nu[1]]);
        }
    }
    Ok((points, offsets.into_iter().map(|(_, w)| w).collect()))
}

/// Sampling plan whose trajectory feeds [`compute_psi`] without full snapshots.
pub fn psi_sampling(geom: &BoundaryGeometry, mode: &PsiMode) -> Result<Sampling> {
    Ok(Sampling::points_velocity(probe_points(geom, mode)?.0))
}

/// Energy profile `ψ` from the velocity samples of a trajectory.
///
/// The trajectory must either hold full snapshots or have been sampled with
/// [`psi_sampling`] for the same geometry and mode.
pub fn compute_psi(traj: &Trajectory, geom: &BoundaryGeometry, mode: &PsiMode) -> Result<BoundaryProfile> {
    let (points, mu_weights) = probe_points(geom, mode)?;
    let grid = traj.grid();
    let lim = 0.5 * grid.side() - grid.h();
    if let Some(p) = points.iter().find(|p| p[0].abs() > lim || p[1].abs() > lim) {
        return Err(Error::OutsideGrid(p[0], p[1]));
    }
    let direct = match traj.probes() {
        Probes::Full => false,
        Probes::Points(p) if *p == points => true,
        _ => {
            return Err(Error::InvalidParameter(
                "trajectory probes do not match the psi sampling".into(),
            ))
        }
    };
    let time = traj.time_grid();
    let nm = mu_weights.len();
    let mut psi = vec![0.0; geom.samples()];
    for k in 0..=time.steps {
        let v = traj.velocity_samples(k)?;
        let w = time.trapezoid_weight(k) * time.dt;
        for (b, slot) in psi.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &wm) in mu_weights.iter().enumerate() {
                let idx = b * nm + j;
                let val = if direct {
                    v[idx]
                } else {
                    interpolate(grid, v, points[idx])
                };
                acc += wm * val * val;
            }
            *slot += w * acc;
        }
    }
    BoundaryProfile::new(psi)
}

/// Norm used in the denominator of `A₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H1Norm {
    /// `‖p‖² + ‖∇p‖²`.
    Full,
    /// `‖∇p‖²` only (the `H¹₀` norm).
    Seminorm,
}

/// Squared `H¹` norm with the gradient part evaluated spectrally.
pub fn h1_norm_squared(p0: &RealField, norm: H1Norm) -> f64 {
    let grid = p0.grid();
    let h = grid.h();
    let m = grid.m();
    let c = fft_forward(p0);
    let w = grid.omegas();
    let grad: f64 = h * h / (m * m) as f64
        * c.coeffs()
            .iter()
            .zip(w.iter())
            .map(|(z, om)| om * om * z.norm_sqr())
            .sum::<f64>();
    match norm {
        H1Norm::Full => p0.dot(p0) + grad,
        H1Norm::Seminorm => grad,
    }
}

/// Observability ratio `∫_Γ ψ dH¹ / ‖p0‖²_{H¹}`.
pub fn a2_functional(
    profile: &BoundaryProfile,
    geom: &BoundaryGeometry,
    gamma: &SensorSet,
    p0: &RealField,
    norm: H1Norm,
) -> Result<f64> {
    profile.ensure_matches(geom)?;
    let denom = h1_norm_squared(p0, norm);
    if denom <= 0.0 {
        return Err(Error::InvalidParameter("A2 needs a nonzero initial pressure".into()));
    }
    let num = match gamma {
        SensorSet::Indicator(ind) => {
            if ind.len() != geom.samples() {
                return Err(Error::InvalidParameter("indicator length differs from geometry".into()));
            }
            let dt = geom.dtheta();
            ind.active()
                .iter()
                .zip(profile.values())
                .zip(geom.speed_samples())
                .filter(|((a, _), _)| **a)
                .map(|((_, f), s)| f * s * dt)
                .sum::<f64>()
        }
        SensorSet::Arcs(arcs) => {
            let integ = profile.arc_integrator(geom)?;
            arcs.starts()
                .iter()
                .zip(arcs.ends())
                .map(|(&a, &b)| integ.integral(a, b))
                .sum()
        }
    };
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::imaging::build_sensor_mask;
    use crate::placement::{SensorArcs, SensorIndicator};
    use crate::wave::{solve_forward, TimeGrid};

    fn gaussian(grid: Grid2D, cx: f64, cy: f64, s: f64) -> RealField {
        RealField::from_fn(grid, |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / (s * s)).exp())
    }

    #[test]
    fn zero_trajectory_gives_zero_psi() {
        let grid = Grid2D::new(4.0, 32).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 128).unwrap();
        let tg = TimeGrid::with_steps(1.0, 16).unwrap();
        let traj = solve_forward(
            &RealField::zeros(grid),
            &tg,
            &psi_sampling(&geom, &PsiMode::Boundary).unwrap(),
        )
        .unwrap();
        let psi = compute_psi(&traj, &geom, &PsiMode::Boundary).unwrap();
        assert!(psi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radial_source_gives_flat_psi() {
        let grid = Grid2D::new(4.0, 128).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 1024).unwrap();
        let tg = TimeGrid::with_steps(2.0, 256).unwrap();
        let p0 = gaussian(grid, 0.0, 0.0, 0.25);
        let traj = solve_forward(&p0, &tg, &psi_sampling(&geom, &PsiMode::Boundary).unwrap()).unwrap();
        let psi = compute_psi(&traj, &geom, &PsiMode::Boundary).unwrap();
        let n = psi.len() as f64;
        let mean = psi.values().iter().sum::<f64>() / n;
        let var = psi.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean > 0.0);
        assert!(var.sqrt() / mean <= 0.02, "cv {}", var.sqrt() / mean);
    }

    #[test]
    fn psi_converges_under_time_refinement() {
        let grid = Grid2D::new(4.0, 64).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 256).unwrap();
        let p0 = gaussian(grid, 0.3, -0.2, 0.3);
        let plan = psi_sampling(&geom, &PsiMode::Boundary).unwrap();
        let run = |steps| {
            let tg = TimeGrid::with_steps(2.0, steps).unwrap();
            compute_psi(&solve_forward(&p0, &tg, &plan).unwrap(), &geom, &PsiMode::Boundary).unwrap()
        };
        let coarse = run(256);
        let fine = run(512);
        let peak = fine.values().iter().cloned().fold(0.0, f64::max);
        let diff = coarse
            .values()
            .iter()
            .zip(fine.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 0.01 * peak, "{diff} vs {peak}");
    }

    #[test]
    fn full_and_probe_trajectories_agree() {
        let grid = Grid2D::new(4.0, 32).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 64).unwrap();
        let tg = TimeGrid::with_steps(1.0, 16).unwrap();
        let p0 = gaussian(grid, 0.2, 0.0, 0.3);
        let mode = PsiMode::Volumetric { eps: 0.1, nodes: 3 };
        let a = compute_psi(
            &solve_forward(&p0, &tg, &crate::wave::Sampling::full()).unwrap(),
            &geom,
            &mode,
        )
        .unwrap();
        let b = compute_psi(
            &solve_forward(&p0, &tg, &psi_sampling(&geom, &mode).unwrap()).unwrap(),
            &geom,
            &mode,
        )
        .unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn a2_full_boundary_and_monotonicity() {
        let grid = Grid2D::new(4.0, 32).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 256).unwrap();
        let p0 = gaussian(grid, 0.0, 0.0, 0.3);
        let prof = BoundaryProfile::from_fn(&geom, |t| 1.0 + t.cos());
        let full = a2_functional(&prof, &geom, &SensorIndicator::full(256).into(), &p0, H1Norm::Full).unwrap();
        let total: f64 = prof.values().iter().map(|v| v * geom.dtheta()).sum();
        assert!((full * h1_norm_squared(&p0, H1Norm::Full) - total).abs() < 1e-12);
        let small = SensorArcs::new(&geom, vec![0.2], 0.5).unwrap();
        let big = SensorArcs::new(&geom, vec![0.1], 1.0).unwrap();
        let a_small = a2_functional(&prof, &geom, &small.into(), &p0, H1Norm::Full).unwrap();
        let a_big = a2_functional(&prof, &geom, &big.into(), &p0, H1Norm::Full).unwrap();
        assert!(a_small <= a_big);
        let semi = a2_functional(&prof, &geom, &SensorIndicator::full(256).into(), &p0, H1Norm::Seminorm).unwrap();
        assert!(semi > full);
        assert!(a2_functional(
            &prof,
            &geom,
            &SensorIndicator::full(256).into(),
            &RealField::zeros(grid),
            H1Norm::Full
        )
        .is_err());
    }

    #[test]
    fn boundary_numerator_matches_volumetric_cell_sum() {
        let grid = Grid2D::new(4.0, 128).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 512).unwrap();
        let tg = TimeGrid::with_steps(2.0, 256).unwrap();
        let eps = 0.15;
        let p0 = gaussian(grid, 0.25, 0.1, 0.3);
        let traj = solve_forward(&p0, &tg, &crate::wave::Sampling::full()).unwrap();
        let mode = PsiMode::Volumetric { eps, nodes: 7 };
        let psi = compute_psi(&traj, &geom, &mode).unwrap();
        let arcs = SensorArcs::new(&geom, vec![5.5], 2.0).unwrap();
        let set: SensorSet = arcs.into();
        let num = a2_functional(&psi, &geom, &set, &p0, H1Norm::Full).unwrap() * h1_norm_squared(&p0, H1Norm::Full);
        // brute force: ∫∫ 1_Σ (∂_t p)² over cells of the thickened mask
        let mask = build_sensor_mask(&geom, &set, eps, &grid).unwrap();
        let h = grid.h();
        let mut brute = 0.0;
        for k in 0..=tg.steps {
            let v = traj.velocity_samples(k).unwrap();
            let w = tg.trapezoid_weight(k) * tg.dt;
            brute += w * h * h * mask.cells().iter().map(|&c| v[c] * v[c]).sum::<f64>();
        }
        assert!(((num - brute) / brute).abs() <= 0.10, "{num} vs {brute}");
    }
}
