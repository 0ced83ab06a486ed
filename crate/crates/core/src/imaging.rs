//! Volumetric sensor masks, recordings, the masked least-squares discrepancy
//! `A₁`, time-reversal imaging and the adjoint gradient `∇A₁`.
//!
//! The time-reversal operator is the exact discrete adjoint of
//! `record ∘ solve_forward` under the trapezoidal time quadrature: a
//! `∂_t δ(t - s)` source applied at internal time `s = T - t_k` is a pressure
//! jump, which then evolves as `cos(ω (T - s))` on every mode.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft2_in_place, Grid2D, RealField};
use crate::placement::{BoundaryGeometry, SensorSet};
use crate::wave::{solve_forward, Probes, Propagator, Sampling, SpectralWaveState, TimeGrid, Trajectory};

/// Weight carried by every active sensor cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorGain {
    /// Plain indicator `1_Σ`.
    Unit,
    /// `2 / ε_eff`, where `ε_eff` is the realized ring thickness
    /// (active area divided by the boundary measure of `Γ`). With this gain
    /// full-aperture time reversal approximates the identity on the interior.
    Calibrated,
    Fixed(f64),
}

/// Thickened sensor set `Σ` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorMask {
    grid: Grid2D,
    active: Vec<bool>,
    cells: Vec<usize>,
    eps: f64,
    boundary_measure: f64,
    gain: f64,
}

impl SensorMask {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Flat indices of active cells, increasing.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.active[cell]
    }

    pub fn active_count(&self) -> usize {
        self.cells.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Boundary measure `H¹(Γ)` of the generating set.
    pub fn boundary_measure(&self) -> f64 {
        self.boundary_measure
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Mean realized thickness of the ring.
    pub fn effective_thickness(&self) -> f64 {
        if self.boundary_measure > 0.0 && !self.cells.is_empty() {
            let h = self.grid.h();
            self.cells.len() as f64 * h * h / self.boundary_measure
        } else {
            self.eps
        }
    }

    pub fn with_gain(mut self, gain: SensorGain) -> Self {
        self.gain = match gain {
            SensorGain::Unit => 1.0,
            SensorGain::Calibrated => 2.0 / self.effective_thickness(),
            SensorGain::Fixed(g) => g,
        };
        self
    }

    /// The 0/1 indicator as a field.
    pub fn indicator_field(&self) -> RealField {
        let values = self.active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        RealField::from_values(self.grid, values).unwrap()
    }

    /// Rebuild a mask from a 0/1 field (e.g. one read from disk).
    pub fn from_indicator_field(field: &RealField, eps: f64, boundary_measure: f64, gain: f64) -> Result<Self> {
        let mut active = Vec::with_capacity(field.values().len());
        for &v in field.values() {
            if v == 0.0 {
                active.push(false);
            } else if v == 1.0 {
                active.push(true);
            } else {
                return Err(Error::MaskMismatch(format!("indicator value {v} is not 0 or 1")));
            }
        }
        let cells = active.iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| k).collect();
        Ok(Self {
            grid: *field.grid(),
            active,
            cells,
            eps,
            boundary_measure,
            gain,
        })
    }

    fn ensure_cells(&self, cells: &[usize]) -> Result<()> {
        if cells == self.cells.as_slice() {
            Ok(())
        } else {
            Err(Error::MaskMismatch(format!(
                "recording has {} cells, mask has {}",
                cells.len(),
                self.cells.len()
            )))
        }
    }
}

/// Cells `x` whose foot point on `∂Ω` lies in `Γ` at normal distance `μ ∈ [0, ε]`.
pub fn build_sensor_mask(geom: &BoundaryGeometry, gamma: &SensorSet, eps: f64, grid: &Grid2D) -> Result<SensorMask> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sensor thickness must be positive, got {eps}"
        )));
    }
    let m = grid.m();
    let r_lo = geom.rho_min() - grid.h();
    let r_hi = geom.rho_max() + eps + grid.h();
    if r_hi >= 0.5 * grid.side() {
        return Err(Error::InvalidParameter("sensor ring does not fit in the box".into()));
    }
    let mut active = vec![false; grid.len()];
    for i in 0..m {
        for j in 0..m {
            let x = grid.node(i, j);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < r_lo || r > r_hi {
                continue;
            }
            if let Some((theta, mu)) = geom.project(x) {
                if mu <= eps && gamma.contains(geom, theta) {
                    active[i * m + j] = true;
                }
            }
        }
    }
    let cells = active.iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| k).collect();
    Ok(SensorMask {
        grid: *grid,
        active,
        cells,
        eps,
        boundary_measure: gamma.measure(geom),
        gain: 1.0,
    })
}

/// Pressure samples on the active cells of a mask, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    grid: Grid2D,
    time: TimeGrid,
    cells: Vec<usize>,
    values: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(grid: Grid2D, time: TimeGrid, cells: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != time.steps + 1 || values.iter().any(|v| v.len() != cells.len()) {
            return Err(Error::TimeGrid(format!(
                "recording shape does not match {} cells x {} samples",
                cells.len(),
                time.steps + 1
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("recording"));
        }
        Ok(Self {
            grid,
            time,
            cells,
            values,
        })
    }

    pub fn zeros(mask: &SensorMask, time: TimeGrid) -> Self {
        Self {
            grid: mask.grid,
            time,
            cells: mask.cells.clone(),
            values: vec![vec![0.0; mask.cells.len()]; time.steps + 1],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Samples at step `k`, aligned with [`Recording::cells`].
    pub fn samples(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn sample_count(&self) -> usize {
        self.cells.len() * self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pressure snapshot at step `k` extended by zero off the mask.
    pub fn snapshot(&self, k: usize) -> RealField {
        let mut f = RealField::zeros(self.grid);
        let vals = f.values_mut();
        for (&c, &v) in self.cells.iter().zip(&self.values[k]) {
            vals[c] = v;
        }
        f
    }

    fn ensure_compatible(&self, other: &Recording) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.time != other.time {
            return Err(Error::TimeGrid("recordings use different time grids".into()));
        }
        if self.cells != other.cells {
            return Err(Error::MaskMismatch("recordings use different masks".into()));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Recording, b: f64) -> Result<Self> {
        self.ensure_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(Self { values, ..self.clone() })
    }

    /// Quadrature-weighted inner product `Σ_k w_k dt h² gain Σ_cells g q`.
    pub fn inner(&self, other: &Recording, mask: &SensorMask) -> Result<f64> {
        self.ensure_compatible(other)?;
        mask.ensure_cells(&self.cells)?;
        let h = self.grid.h();
        let scale = self.time.dt * h * h * mask.gain;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(k, (x, y))| self.time.trapezoid_weight(k) * x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum::<f64>()
            * scale)
    }

    /// Add i.i.d. Gaussian noise with standard deviation `level * max|p_obs|`.
    pub fn add_noise<R: rand::Rng>(&mut self, level: f64, rng: &mut R) {
        if level <= 0.0 {
            return;
        }
        let sigma = level * self.max_abs();
        if sigma == 0.0 {
            return;
        }
        let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
        for row in &mut self.values {
            for v in row.iter_mut() {
                *v += rand_distr::Distribution::sample(&normal, rng);
            }
        }
    }
}

/// Copy the pressure at the mask cells out of a trajectory.
pub fn record(traj: &Trajectory, mask: &SensorMask) -> Result<Recording> {
    traj.grid().ensure_same(&mask.grid)?;
    let time = *traj.time_grid();
    let values = match traj.probes() {
        Probes::Full => (0..=time.steps)
            .map(|k| {
                let p = traj.pressure_samples(k)?;
                Ok(mask.cells.iter().map(|&c| p[c]).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?,
        Probes::Cells(cells) if cells.as_slice() == mask.cells.as_slice() => (0..=time.steps)
            .map(|k| traj.pressure_samples(k).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::MaskMismatch("trajectory probes do not cover the mask".into())),
    };
    Recording::new(mask.grid, time, mask.cells.clone(), values)
}

/// `record(solve_forward(p0))` without storing full snapshots.
pub fn simulate_recording(p0: &RealField, mask: &SensorMask, time: &TimeGrid) -> Result<Recording> {
    p0.grid().ensure_same(&mask.grid)?;
    let traj = solve_forward(p0, time, &Sampling::cells_pressure(mask.cells.clone()))?;
    record(&traj, mask)
}

fn check_inputs(mask: &SensorMask, rec: &Recording, time: &TimeGrid) -> Result<()> {
    mask.grid.ensure_same(&rec.grid)?;
    if rec.time != *time {
        return Err(Error::TimeGrid(format!(
            "recording uses T={} dt={}, expected T={} dt={}",
            rec.time.horizon, rec.time.dt, time.horizon, time.dt
        )));
    }
    mask.ensure_cells(&rec.cells)
}

/// `½ Σ_k w_k dt Σ_Σ gain (p_{[p0]}(t_k) - p_obs(t_k))² h²`.
pub fn discrepancy_a1(mask: &SensorMask, p0: &RealField, rec: &Recording, time: &TimeGrid) -> Result<f64> {
    check_inputs(mask, rec, time)?;
    let sim = simulate_recording(p0, mask, time)?;
    let residual = sim.combine(1.0, rec, -1.0)?;
    Ok(0.5 * residual.inner(&residual, mask)?)
}

/// Time-reversal image `I[g]`: superpose pressure jumps `w_k dt gain g(T - s)`
/// emitted at internal times `s = 0, dt, ..., T` and read the pressure at `T`.
pub fn time_reversal(rec: &Recording, mask: &SensorMask, time: &TimeGrid) -> Result<RealField> {
    check_inputs(mask, rec, time)?;
    let grid = rec.grid;
    let m = grid.m();
    let prop = Propagator::new(&grid, time.dt);
    let mut state = SpectralWaveState::zeros(grid);
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in 0..=time.steps {
        let src = time.steps - k;
        let w = time.trapezoid_weight(src) * time.dt * mask.gain;
        let samples = &rec.values[src];
        if w != 0.0 && samples.iter().any(|&v| v != 0.0) {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (&c, &v) in rec.cells.iter().zip(samples) {
                buf[c] = Complex64::new(v, 0.0);
            }
            fft2_in_place(&mut buf, m, false);
            state.add_pressure_modes(&buf, w);
        }
        if k < time.steps {
            prop.apply(&mut state);
        }
    }
    Ok(state.pressure())
}

/// Adjoint gradient `∇A₁ = I[p_{[p0]} - p_obs]` in the `h²`-weighted inner product.
pub fn grad_a1(mask: &SensorMask, p0: &RealField, rec: &Recording, time: &TimeGrid) -> Result<RealField> {
    check_inputs(mask, rec, time)?;
    let sim = simulate_recording(p0, mask, time)?;
    time_reversal(&sim.combine(1.0, rec, -1.0)?, mask, time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{centered_arc, SensorIndicator};
    use std::f64::consts::PI;

    fn bump(grid: Grid2D, cx: f64, cy: f64, s: f64) -> RealField {
        RealField::from_fn(grid, |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / (s * s)).exp())
    }

    fn full_mask(grid: Grid2D, eps: f64) -> SensorMask {
        let geom = BoundaryGeometry::circle(1.0, 1024).unwrap();
        build_sensor_mask(&geom, &SensorIndicator::full(1024).into(), eps, &grid).unwrap()
    }

    #[test]
    fn empty_gamma_gives_empty_mask() {
        let grid = Grid2D::new(4.0, 64).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 256).unwrap();
        let m = build_sensor_mask(&geom, &SensorIndicator::empty(256).into(), 0.1, &grid).unwrap();
        assert_eq!(m.active_count(), 0);
        assert!(build_sensor_mask(&geom, &SensorIndicator::empty(256).into(), 0.0, &grid).is_err());
    }

    #[test]
    fn full_ring_cell_count() {
        let grid = Grid2D::new(4.0, 512).unwrap();
        let mask = full_mask(grid, 0.03);
        // brute-force membership scan
        let mut brute = 0;
        for i in 0..512 {
            for j in 0..512 {
                let [x, y] = grid.node(i, j);
                let r = (x * x + y * y).sqrt();
                if (1.0..=1.03).contains(&r) {
                    brute += 1;
                    assert!(mask.is_active(i * 512 + j));
                }
            }
        }
        assert_eq!(brute, mask.active_count());
        let h = grid.h();
        let expected = 2.0 * PI * 0.03 / (h * h);
        let ratio = mask.active_count() as f64 / expected;
        assert!((0.85..=1.15).contains(&ratio), "ratio {ratio}");
        for &c in mask.cells() {
            let [x, y] = grid.node(c / 512, c % 512);
            let d = (x * x + y * y).sqrt() - 1.0;
            assert!(d >= 0.0 && d <= 0.03 + h * 2f64.sqrt());
        }
    }

    #[test]
    fn half_circle_mask_is_symmetric() {
        let grid = Grid2D::new(4.0, 128).unwrap();
        let geom = BoundaryGeometry::circle(1.0, 1024).unwrap();
        let arcs = centered_arc(&geom, PI / 2.0, PI).unwrap();
        let mask = build_sensor_mask(&geom, &arcs.into(), 0.05, &grid).unwrap();
        let m = 128;
        for i in 1..m {
            // nodes on the x1 axis sit on the arc endpoints
            for j in (0..m).filter(|&j| j != m / 2) {
                // x1 -> -x1 maps index i to m - i
                assert_eq!(mask.is_active(i * m + j), mask.is_active((m - i) * m + j));
                if grid.coord(j) < -grid.h() {
                    assert!(!mask.is_active(i * m + j));
                }
            }
        }
        assert!(mask.active_count() > 0);
    }

    fn small_case() -> (Grid2D, TimeGrid, SensorMask) {
        let grid = Grid2D::new(4.0, 16).unwrap();
        let time = TimeGrid::with_steps(1.0, 8).unwrap();
        let mask = full_mask(grid, 0.3).with_gain(SensorGain::Fixed(1.7));
        (grid, time, mask)
    }

    #[test]
    fn a1_vanishes_on_consistent_data_and_matches_triple_loop() {
        let (grid, time, mask) = small_case();
        let p0 = bump(grid, 0.2, -0.1, 0.4);
        let rec = simulate_recording(&p0, &mask, &time).unwrap();
        assert_eq!(discrepancy_a1(&mask, &p0, &rec, &time).unwrap(), 0.0);

        let q = bump(grid, -0.3, 0.2, 0.3);
        let a1 = discrepancy_a1(&mask, &q, &rec, &time).unwrap();
        let traj_q = solve_forward(&q, &time, &Sampling::full()).unwrap();
        let traj_p = solve_forward(&p0, &time, &Sampling::full()).unwrap();
        let h = grid.h();
        let mut direct = 0.0;
        for k in 0..=time.steps {
            let w = if k == 0 || k == time.steps { 0.5 } else { 1.0 };
            let pq = traj_q.pressure_samples(k).unwrap();
            let pp = traj_p.pressure_samples(k).unwrap();
            for cell in 0..grid.len() {
                if mask.is_active(cell) {
                    direct += 0.5 * w * time.dt * h * h * 1.7 * (pq[cell] - pp[cell]).powi(2);
                }
            }
        }
        assert!((a1 - direct).abs() <= 1e-12 * direct.max(1.0));

        let a1_zero = discrepancy_a1(&mask, &RealField::zeros(grid), &rec, &time).unwrap();
        assert!((a1_zero - 0.5 * rec.inner(&rec, &mask).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_recording_gives_zero_image() {
        let (_, time, mask) = small_case();
        let img = time_reversal(&Recording::zeros(&mask, time), &mask, &time).unwrap();
        assert_eq!(img.linf_norm(), 0.0);
    }

    #[test]
    fn masking_commutes_with_combination() {
        let (grid, time, mask) = small_case();
        let a = bump(grid, 0.1, 0.1, 0.3);
        let b = bump(grid, -0.2, 0.3, 0.2);
        let ra = simulate_recording(&a, &mask, &time).unwrap();
        let rb = simulate_recording(&b, &mask, &time).unwrap();
        let rab = simulate_recording(&a.combine(2.0, &b, -1.0).unwrap(), &mask, &time).unwrap();
        let lin = ra.combine(2.0, &rb, -1.0).unwrap();
        let d = rab.combine(1.0, &lin, -1.0).unwrap();
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn time_reversal_is_adjoint_of_recording() {
        let (grid, _, mask) = small_case();
        let time = TimeGrid::with_steps(1.0, 32).unwrap();
        let g = simulate_recording(&bump(grid, 0.3, 0.0, 0.3), &mask, &time).unwrap();
        let g = g
            .combine(
                1.0,
                &simulate_recording(&bump(grid, -0.5, 0.5, 0.2), &mask, &time).unwrap(),
                -0.4,
            )
            .unwrap();
        let q = bump(grid, 0.0, -0.4, 0.5);
        let lhs = time_reversal(&g, &mask, &time).unwrap().dot(&q);
        let rhs = g.inner(&simulate_recording(&q, &mask, &time).unwrap(), &mask).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn gradient_vanishes_at_truth_and_is_linear() {
        let (grid, time, mask) = small_case();
        let p0 = bump(grid, 0.2, 0.1, 0.3);
        let rec = simulate_recording(&p0, &mask, &time).unwrap();
        let g = grad_a1(&mask, &p0, &rec, &time).unwrap();
        assert!(g.linf_norm() < 1e-14);
        let zero = RealField::zeros(grid);
        let g1 = grad_a1(&mask, &zero, &rec, &time).unwrap();
        let rec2 = rec.combine(3.0, &rec, 0.0).unwrap();
        let g3 = grad_a1(&mask, &zero, &rec2, &time).unwrap();
        let d = g3.combine(1.0, &g1, -3.0).unwrap();
        assert!(d.linf_norm() < 1e-12 * g3.linf_norm().max(1.0));
    }

    #[test]
    fn mismatched_time_grid_is_rejected() {
        let (grid, time, mask) = small_case();
        let rec = Recording::zeros(&mask, time);
        let other = TimeGrid::with_steps(1.0, 4).unwrap();
        assert!(discrepancy_a1(&mask, &RealField::zeros(grid), &rec, &other).is_err());
    }

    #[test]
    fn indicator_field_round_trip() {
        let (_, _, mask) = small_case();
        let f = mask.indicator_field();
        let back = SensorMask::from_indicator_field(&f, mask.eps(), mask.boundary_measure(), mask.gain()).unwrap();
        assert_eq!(back, mask);
    }
}
