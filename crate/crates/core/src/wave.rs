//! Exact Fourier-space integration of `p_tt - Δp = 0` on the periodic box.
//!
//! Every mode obeys `c'' = -ω² c` with `ω = 2π|ξ|`, which is integrated by the
//! exact rotation of `(c, c')`, so stepping is exact up to rounding whatever the
//! step size.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft2_in_place, fft_forward, fft_inverse, Grid2D, RealField, SpectralField};
use crate::par;

/// Largest grid for which full-field snapshots are stored.
pub const FULL_STORAGE_MAX_M: usize = 256;
/// Largest step count for which full-field snapshots are stored.
pub const FULL_STORAGE_MAX_STEPS: usize = 1024;

/// Pressure and velocity modes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWaveState {
    grid: Grid2D,
    c: Vec<Complex64>,
    cdot: Vec<Complex64>,
    t: f64,
}

impl SpectralWaveState {
    pub fn zeros(grid: Grid2D) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self {
            grid,
            c: z.clone(),
            cdot: z,
            t: 0.0,
        }
    }

    /// Initial pressure `p0`, zero initial velocity.
    pub fn from_initial(p0: &RealField) -> Self {
        let c = fft_forward(p0).into_coeffs();
        Self {
            grid: *p0.grid(),
            cdot: vec![Complex64::new(0.0, 0.0); c.len()],
            c,
            t: 0.0,
        }
    }

    pub fn from_parts(pressure: SpectralField, velocity: SpectralField, t: f64) -> Result<Self> {
        pressure.grid().ensure_same(velocity.grid())?;
        Ok(Self {
            grid: *pressure.grid(),
            c: pressure.into_coeffs(),
            cdot: velocity.into_coeffs(),
            t,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn pressure_modes(&self) -> &[Complex64] {
        &self.c
    }

    pub fn velocity_modes(&self) -> &[Complex64] {
        &self.cdot
    }

    pub fn pressure(&self) -> RealField {
        fft_inverse(&SpectralField::from_coeffs(self.grid, self.c.clone()).unwrap())
    }

    pub fn velocity(&self) -> RealField {
        fft_inverse(&SpectralField::from_coeffs(self.grid, self.cdot.clone()).unwrap())
    }

    pub fn propagate(&self, dt: f64) -> Self {
        let mut next = self.clone();
        next.propagate_in_place(dt);
        next
    }

    pub fn propagate_in_place(&mut self, dt: f64) {
        Propagator::new(&self.grid, dt).apply(self);
    }

    /// Pressure jump `p += w g` produced by a `∂_t δ(t - s) g` source.
    pub fn inject_pressure_impulse(&self, g: &RealField, w: f64) -> Result<Self> {
        let mut next = self.clone();
        next.inject_in_place(g, w)?;
        Ok(next)
    }

    pub fn inject_in_place(&mut self, g: &RealField, w: f64) -> Result<()> {
        self.grid.ensure_same(g.grid())?;
        if w == 0.0 {
            return Ok(());
        }
        let gh = fft_forward(g);
        self.add_pressure_modes(gh.coeffs(), w);
        Ok(())
    }

    pub(crate) fn add_pressure_modes(&mut self, modes: &[Complex64], w: f64) {
        for (c, g) in self.c.iter_mut().zip(modes) {
            *c += g * w;
        }
    }

    /// Flip the sign of the velocity modes (time reversal of the state).
    pub fn reverse_velocity(&mut self) {
        for v in &mut self.cdot {
            *v = -*v;
        }
    }

    /// Discrete wave energy `½ ∫ (p_t² + |∇p|²)` evaluated through Parseval.
    pub fn energy(&self) -> f64 {
        let m = self.grid.m();
        let h = self.grid.h();
        let w = self.grid.omegas();
        let row = |a: usize| {
            (0..m)
                .map(|b| {
                    let k = a * m + b;
                    self.cdot[k].norm_sqr() + w[k] * w[k] * self.c[k].norm_sqr()
                })
                .sum::<f64>()
        };
        0.5 * h * h / (m * m) as f64 * par::row_sum(m, row)
    }
}

/// Precomputed per-mode rotation for a fixed step `dt`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    cos: Vec<f64>,
    sin_over_w: Vec<f64>,
    w_sin: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: &Grid2D, dt: f64) -> Self {
        let w = grid.omegas();
        let n = w.len();
        let (mut cos, mut sin_over_w, mut w_sin) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &om in w.iter() {
            if om > 0.0 {
                let (s, c) = (om * dt).sin_cos();
                cos.push(c);
                sin_over_w.push(s / om);
                w_sin.push(om * s);
            } else {
                cos.push(1.0);
                sin_over_w.push(dt);
                w_sin.push(0.0);
            }
        }
        Self {
            dt,
            cos,
            sin_over_w,
            w_sin,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, state: &mut SpectralWaveState) {
        let (cos, sw, ws) = (&self.cos, &self.sin_over_w, &self.w_sin);
        par::zip_mut(&mut state.c, &mut state.cdot, |k, c, v| {
            let (c0, v0) = (*c, *v);
            *c = c0 * cos[k] + v0 * sw[k];
            *v = v0 * cos[k] - c0 * ws[k];
        });
        state.t += self.dt;
    }
}

/// Where a forward solve samples the field.
#[derive(Debug, Clone, PartialEq)]
pub enum Probes {
    /// Every grid node (full snapshots).
    Full,
    /// Selected nodes by flat storage index.
    Cells(Vec<usize>),
    /// Arbitrary points, bilinearly interpolated on the periodic grid.
    Points(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub probes: Probes,
    pub pressure: bool,
    pub velocity: bool,
}

impl Sampling {
    pub fn full() -> Self {
        Self {
            probes: Probes::Full,
            pressure: true,
            velocity: true,
        }
    }

    pub fn cells_pressure(cells: Vec<usize>) -> Self {
        Self {
            probes: Probes::Cells(cells),
            pressure: true,
            velocity: false,
        }
    }

    pub fn points_velocity(points: Vec<[f64; 2]>) -> Self {
        Self {
            probes: Probes::Points(points),
            pressure: false,
            velocity: true,
        }
    }
}

/// Uniform time grid `t_k = k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::TimeGrid(format!("horizon must be positive, got {horizon}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::TimeGrid(format!("step must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::TimeGrid(format!("step {dt} does not divide horizon {horizon}")));
        }
        Ok(Self {
            horizon,
            dt,
            steps: steps as usize,
        })
    }

    pub fn with_steps(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::TimeGrid("need at least one step".into()));
        }
        Self::new(horizon, horizon / steps as f64)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Composite trapezoid weight of sample `k`.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps {
            0.5
        } else {
            1.0
        }
    }
}

/// Sampled solution of a forward solve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: Grid2D,
    time: TimeGrid,
    probes: Probes,
    pressure: Option<Vec<Vec<f64>>>,
    velocity: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn probes(&self) -> &Probes {
        &self.probes
    }

    /// Probe values of the pressure at step `k`.
    pub fn pressure_samples(&self, k: usize) -> Result<&[f64]> {
        self.pressure
            .as_ref()
            .map(|p| p[k].as_slice())
            .ok_or(Error::MissingSamples("pressure"))
    }

    pub fn velocity_samples(&self, k: usize) -> Result<&[f64]> {
        self.velocity
            .as_ref()
            .map(|p| p[k].as_slice())
            .ok_or(Error::MissingSamples("velocity"))
    }

    pub fn pressure_field(&self, k: usize) -> Result<RealField> {
        self.full_field(self.pressure_samples(k)?)
    }

    pub fn velocity_field(&self, k: usize) -> Result<RealField> {
        self.full_field(self.velocity_samples(k)?)
    }

    fn full_field(&self, samples: &[f64]) -> Result<RealField> {
        match self.probes {
            Probes::Full => RealField::from_values(self.grid, samples.to_vec()),
            _ => Err(Error::MissingSamples("full-field")),
        }
    }
}

/// Bilinear interpolation of a periodic grid function at `p`.
pub fn interpolate(grid: &Grid2D, values: &[f64], p: [f64; 2]) -> f64 {
    let m = grid.m();
    let h = grid.h();
    let fx = (p[0] + 0.5 * grid.side()) / h;
    let fy = (p[1] + 0.5 * grid.side()) / h;
    let (i0, j0) = (fx.floor(), fy.floor());
    let (u, v) = (fx - i0, fy - j0);
    let wrap = |k: f64| (k as i64).rem_euclid(m as i64) as usize;
    let (i0, j0) = (wrap(i0), wrap(j0));
    let (i1, j1) = ((i0 + 1) % m, (j0 + 1) % m);
    let at = |i: usize, j: usize| values[i * m + j];
    (1.0 - u) * (1.0 - v) * at(i0, j0) + u * (1.0 - v) * at(i1, j0) + (1.0 - u) * v * at(i0, j1) + u * v * at(i1, j1)
}

pub(crate) fn inverse_real(grid: &Grid2D, modes: &[Complex64], buf: &mut Vec<Complex64>) -> Vec<f64> {
    let m = grid.m();
    buf.clear();
    buf.extend_from_slice(modes);
    fft2_in_place(buf, m, true);
    let scale = 1.0 / (m * m) as f64;
    buf.iter().map(|z| z.re * scale).collect()
}

fn sample(grid: &Grid2D, probes: &Probes, field: Vec<f64>) -> Vec<f64> {
    match probes {
        Probes::Full => field,
        Probes::Cells(cells) => cells.iter().map(|&c| field[c]).collect(),
        Probes::Points(points) => points.iter().map(|&p| interpolate(grid, &field, p)).collect(),
    }
}

/// Forward solve from `p0` with zero initial velocity, sampling every step.
pub fn solve_forward(p0: &RealField, time: &TimeGrid, sampling: &Sampling) -> Result<Trajectory> {
    if !p0.is_finite() {
        return Err(Error::NonFinite("initial pressure"));
    }
    let grid = *p0.grid();
    if matches!(sampling.probes, Probes::Full) && (grid.m() > FULL_STORAGE_MAX_M || time.steps > FULL_STORAGE_MAX_STEPS)
    {
        return Err(Error::TrajectoryTooLarge {
            m: grid.m(),
            steps: time.steps,
        });
    }
    match &sampling.probes {
        Probes::Cells(cells) if cells.iter().any(|&c| c >= grid.len()) => {
            return Err(Error::InvalidParameter("probe cell outside grid".into()))
        }
        Probes::Points(points) => {
            let lim = 0.5 * grid.side() - grid.h();
            if let Some(p) = points.iter().find(|p| p[0].abs() > lim || p[1].abs() > lim) {
                return Err(Error::OutsideGrid(p[0], p[1]));
            }
        }
        _ => {}
    }
    let mut state = SpectralWaveState::from_initial(p0);
    let prop = Propagator::new(&grid, time.dt);
    let mut pressure = sampling.pressure.then(|| Vec::with_capacity(time.steps + 1));
    let mut velocity = sampling.velocity.then(|| Vec::with_capacity(time.steps + 1));
    let mut buf = Vec::with_capacity(grid.len());
    for k in 0..=time.steps {
        if k > 0 {
            prop.apply(&mut state);
        }
        if let Some(p) = pressure.as_mut() {
            p.push(sample(&grid, &sampling.probes, inverse_real(&grid, &state.c, &mut buf)));
        }
        if let Some(v) = velocity.as_mut() {
            v.push(sample(
                &grid,
                &sampling.probes,
                inverse_real(&grid, &state.cdot, &mut buf),
            ));
        }
    }
    Ok(Trajectory {
        grid,
        time: *time,
        probes: sampling.probes.clone(),
        pressure,
        velocity,
    })
}
