//! Total variation, its proximal operator, the admissible-set projection and
//! the forward-backward (FISTA) reconstruction of `p₀` from a recording.
//!
//! Fields are compared in the `h²`-weighted `L²` product, so
//! `prox_tv(u, λ)` minimizes `½ h² Σ (u − v)² + λ tv_norm(v)`. Dividing by
//! `h²` gives the unit-spacing problem solved by [`prox_tv_grid`] with weight
//! `λ / h`.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, RealField};
use crate::imaging::{simulate_recording, time_reversal, Recording, SensorMask};
use crate::par;
use crate::wave::TimeGrid;

pub const DEFAULT_PROX_ITERS: usize = 50;
pub const DEFAULT_PROX_TAU: f64 = 0.125;
/// Radius of the default support disk `K`.
pub const DEFAULT_K_RADIUS: f64 = 0.85;

/// Sum of `|∇_d v|` with unit-spacing forward differences and periodic wrap.
pub fn tv_grid(values: &[f64], n: usize) -> f64 {
    assert_eq!(values.len(), n * n);
    par::row_sum(n, |i| {
        let ip = (i + 1) % n;
        (0..n)
            .map(|j| {
                let jp = (j + 1) % n;
                let u = values[i * n + j];
                let d1 = values[ip * n + j] - u;
                let d2 = values[i * n + jp] - u;
                (d1 * d1 + d2 * d2).sqrt()
            })
            .sum::<f64>()
    })
}

/// Isotropic discrete TV scaled by `h`, approximating `∫ |∇u|`.
pub fn tv_norm(u: &RealField) -> f64 {
    tv_grid(u.values(), u.grid().m()) * u.grid().h()
}

/// `½ Σ (u − v)² + λ Σ |∇_d v|` on a unit-spacing periodic `n × n` grid.
pub fn prox_objective_grid(u: &[f64], v: &[f64], n: usize, lambda: f64) -> f64 {
    0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + lambda * tv_grid(v, n)
}

fn divergence(p: &[[f64; 2]], n: usize, out: &mut [f64]) {
    par::for_each_row(out, n, |i, row| {
        let im = (i + n - 1) % n;
        for (j, d) in row.iter_mut().enumerate() {
            let jm = (j + n - 1) % n;
            *d = p[i * n + j][0] - p[im * n + j][0] + p[i * n + j][1] - p[i * n + jm][1];
        }
    });
}

/// Chambolle's dual fixed-point iteration for
/// `argmin_v ½ Σ (u − v)² + λ Σ |∇_d v|` on a unit-spacing periodic grid.
pub fn prox_tv_grid(u: &[f64], n: usize, lambda: f64, iters: usize, tau: f64) -> Vec<f64> {
    assert_eq!(u.len(), n * n);
    if lambda <= 0.0 || iters == 0 {
        return u.to_vec();
    }
    let mut p = vec![[0.0f64; 2]; n * n];
    let mut w = vec![0.0; n * n];
    for _ in 0..iters {
        divergence(&p, n, &mut w);
        par::for_each_row(&mut w, n, |i, row| {
            for (d, &v) in row.iter_mut().zip(&u[i * n..(i + 1) * n]) {
                *d -= v / lambda;
            }
        });
        let w = &w;
        par::for_each_row(&mut p, n, |i, row| {
            let ip = (i + 1) % n;
            for (j, q) in row.iter_mut().enumerate() {
                let jp = (j + 1) % n;
                let c = w[i * n + j];
                let g1 = w[ip * n + j] - c;
                let g2 = w[i * n + jp] - c;
                let norm = (g1 * g1 + g2 * g2).sqrt();
                let den = 1.0 + tau * norm;
                q[0] = (q[0] + tau * g1) / den;
                q[1] = (q[1] + tau * g2) / den;
            }
        });
    }
    divergence(&p, n, &mut w);
    u.iter().zip(&w).map(|(a, d)| a - lambda * d).collect()
}

/// `argmin_v ½ ‖u − v‖² + λ tv_norm(v)` in the `h²`-weighted norm.
pub fn prox_tv(u: &RealField, lambda: f64, iters: usize, tau: f64) -> RealField {
    let grid = *u.grid();
    let v = prox_tv_grid(u.values(), grid.m(), lambda / grid.h(), iters, tau);
    RealField::from_values(grid, v).expect("prox of a finite field is finite")
}

/// 0/1 indicator of the closed disk of the given radius.
pub fn support_disk(grid: Grid2D, radius: f64) -> RealField {
    RealField::from_fn(grid, |x, y| if x * x + y * y <= radius * radius { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconParams {
    pub gamma: f64,
    pub eta: f64,
    pub outer_iters: usize,
    pub prox_iters: usize,
    pub prox_tau: f64,
    /// 0/1 support constraint `K`.
    pub k_mask: RealField,
    pub nonneg: bool,
    /// Momentum (FISTA); `false` gives plain forward-backward.
    pub accelerate: bool,
    /// Apply the admissible-set projection after each prox.
    pub project: bool,
}

impl ReconParams {
    /// `γ = 0.01`, `η = 0.5`, 30 iterations, `K` the disk of radius 0.85.
    pub fn new(grid: Grid2D) -> Self {
        Self {
            gamma: 0.01,
            eta: 0.5,
            outer_iters: 30,
            prox_iters: DEFAULT_PROX_ITERS,
            prox_tau: DEFAULT_PROX_TAU,
            k_mask: support_disk(grid, DEFAULT_K_RADIUS),
            nonneg: true,
            accelerate: true,
            project: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.prox_tau > 0.0 && self.prox_tau <= 0.25) {
            return Err(Error::InvalidParameter(format!(
                "prox_tau must lie in (0, 1/4], got {}",
                self.prox_tau
            )));
        }
        if self.outer_iters == 0 || self.prox_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be at least 1".into()));
        }
        if self.k_mask.values().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter("K mask must be 0/1".into()));
        }
        Ok(())
    }
}

/// `max(u, 0) · 1_K` (or `u · 1_K` without the sign constraint).
pub fn project_admissible(u: &RealField, params: &ReconParams) -> Result<RealField> {
    u.grid().ensure_same(params.k_mask.grid())?;
    let values = u
        .values()
        .iter()
        .zip(params.k_mask.values())
        .map(|(&v, &k)| {
            let v = if params.nonneg { v.max(0.0) } else { v };
            if k == 0.0 {
                0.0
            } else {
                v
            }
        })
        .collect();
    RealField::from_values(*u.grid(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub j0: f64,
    pub a1: f64,
    pub tv: f64,
    /// `‖pⁿ − pⁿ⁻¹‖_∞` (0 for the starting point).
    pub linf_change: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub p0: RealField,
    /// One record per iterate `p⁰, …, p^N`.
    pub log: Vec<IterationRecord>,
}

/// Minimize `J⁰ = A₁ + γ TV` by forward-backward splitting with optional
/// FISTA momentum, starting from `initial` (zero when `None`).
///
/// Each iteration costs one forward solve and one time reversal: the
/// recording of the extrapolated point is formed from those of the iterates
/// by linearity.
pub fn reconstruct(
    rec: &Recording,
    mask: &SensorMask,
    params: &ReconParams,
    time: &TimeGrid,
    initial: Option<&RealField>,
) -> Result<Reconstruction> {
    params.validate()?;
    let grid = *mask.grid();
    params.k_mask.grid().ensure_same(&grid)?;
    let mut x = match initial {
        Some(p) => {
            p.grid().ensure_same(&grid)?;
            p.clone()
        }
        None => RealField::zeros(grid),
    };
    let mut sim_x = simulate_recording(&x, mask, time)?;
    let evaluate = |p: &RealField, sim: &Recording| -> Result<(f64, f64, f64)> {
        let r = sim.combine(1.0, rec, -1.0)?;
        let a1 = 0.5 * r.inner(&r, mask)?;
        let tv = tv_norm(p);
        Ok((a1 + params.gamma * tv, a1, tv))
    };
    let (j_init, a1, tv) = evaluate(&x, &sim_x)?;
    let mut log = vec![IterationRecord {
        iter: 0,
        j0: j_init,
        a1,
        tv,
        linf_change: 0.0,
    }];

    let mut y = x.clone();
    let mut sim_y = sim_x.clone();
    let mut t = 1.0f64;
    for iter in 1..=params.outer_iters {
        let grad = time_reversal(&sim_y.combine(1.0, rec, -1.0)?, mask, time)?;
        let step = y.combine(1.0, &grad, -params.eta)?;
        let mut x_new = prox_tv(&step, params.eta * params.gamma, params.prox_iters, params.prox_tau);
        if params.project {
            x_new = project_admissible(&x_new, params)?;
        }
        let sim_new = simulate_recording(&x_new, mask, time)?;
        let (j0, a1, tv) = evaluate(&x_new, &sim_new)?;
        let linf_change = x_new.combine(1.0, &x, -1.0)?.linf_norm();
        log.push(IterationRecord {
            iter,
            j0,
            a1,
            tv,
            linf_change,
        });
        if !j0.is_finite() || j0 > 10.0 * j_init.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                iter,
                value: j0,
                initial: j_init,
            });
        }
        let beta = if params.accelerate {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let b = (t - 1.0) / t_new;
            t = t_new;
            b
        } else {
            0.0
        };
        y = x_new.combine(1.0 + beta, &x, -beta)?;
        sim_y = sim_new.combine(1.0 + beta, &sim_x, -beta)?;
        x = x_new;
        sim_x = sim_new;
    }
    Ok(Reconstruction { p0: x, log })
}
