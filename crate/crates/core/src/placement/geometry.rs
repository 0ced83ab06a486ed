//! Star-shaped boundary `r = ρ(θ)` sampled on a uniform angle grid, with
//! arc-length bookkeeping and the sensor-set types that live on it.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Default number of boundary samples.
pub const DEFAULT_BOUNDARY_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry {
    rho: Vec<f64>,
    rho_prime: Vec<f64>,
    speed: Vec<f64>,
    /// Cumulative arc length at each sample, `cumulative[B] = perimeter`.
    cumulative: Vec<f64>,
    circle: bool,
}

impl BoundaryGeometry {
    pub fn circle(radius: f64, samples: usize) -> Result<Self> {
        Self::from_fn(samples, |_| radius, |_| 0.0)
    }

    /// Ellipse with semi-axes `a` (along x) and `b` (along y) centered at the origin.
    pub fn ellipse(a: f64, b: f64, samples: usize) -> Result<Self> {
        let q = move |t: f64| (b * t.cos()).powi(2) + (a * t.sin()).powi(2);
        Self::from_fn(
            samples,
            move |t| a * b / q(t).sqrt(),
            move |t| {
                let dq = 2.0 * (a * a - b * b) * t.sin() * t.cos();
                -0.5 * a * b * dq / q(t).powf(1.5)
            },
        )
    }

    pub fn from_fn(samples: usize, rho: impl Fn(f64) -> f64, rho_prime: impl Fn(f64) -> f64) -> Result<Self> {
        let dtheta = TAU / samples as f64;
        let rho: Vec<f64> = (0..samples).map(|b| rho(b as f64 * dtheta)).collect();
        let rho_prime: Vec<f64> = (0..samples).map(|b| rho_prime(b as f64 * dtheta)).collect();
        Self::from_samples(rho, rho_prime)
    }

    pub fn from_samples(rho: Vec<f64>, rho_prime: Vec<f64>) -> Result<Self> {
        let n = rho.len();
        if n < 8 || rho_prime.len() != n {
            return Err(Error::InvalidParameter(
                "boundary needs at least 8 samples of rho and rho'".into(),
            ));
        }
        if rho.iter().chain(&rho_prime).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary radius"));
        }
        if rho.iter().any(|&r| r <= 0.0) {
            return Err(Error::InvalidParameter("boundary radius must stay positive".into()));
        }
        let speed: Vec<f64> = rho
            .iter()
            .zip(&rho_prime)
            .map(|(r, d)| (r * r + d * d).sqrt())
            .collect();
        let dtheta = TAU / n as f64;
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for b in 0..n {
            let next = speed[(b + 1) % n];
            cumulative.push(cumulative[b] + 0.5 * dtheta * (speed[b] + next));
        }
        let circle = rho.iter().all(|&r| r == rho[0]) && rho_prime.iter().all(|&d| d == 0.0);
        Ok(Self {
            rho,
            rho_prime,
            speed,
            cumulative,
            circle,
        })
    }

    pub fn samples(&self) -> usize {
        self.rho.len()
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.samples() as f64
    }

    pub fn theta(&self, b: usize) -> f64 {
        b as f64 * self.dtheta()
    }

    pub fn rho_samples(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_prime_samples(&self) -> &[f64] {
        &self.rho_prime
    }

    /// `√(ρ² + ρ'²)` at each sample.
    pub fn speed_samples(&self) -> &[f64] {
        &self.speed
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[self.samples()]
    }

    pub fn is_circle(&self) -> bool {
        self.circle
    }

    pub fn rho_min(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho.iter().cloned().fold(0.0, f64::max)
    }

    /// Cell index and fractional position of an angle on the sample grid.
    fn locate(&self, theta: f64) -> (i64, usize, f64) {
        let n = self.samples();
        let turns = (theta / TAU).floor();
        let r = theta - turns * TAU;
        let pos = r / self.dtheta();
        let idx = (pos.floor() as usize).min(n - 1);
        (turns as i64, idx, (pos - idx as f64).clamp(0.0, 1.0))
    }

    fn lerp(&self, values: &[f64], theta: f64) -> f64 {
        let (_, i, u) = self.locate(theta);
        let j = (i + 1) % self.samples();
        values[i] * (1.0 - u) + values[j] * u
    }

    pub fn rho_at(&self, theta: f64) -> f64 {
        self.lerp(&self.rho, theta)
    }

    pub fn rho_prime_at(&self, theta: f64) -> f64 {
        self.lerp(&self.rho_prime, theta)
    }

    pub fn speed_at(&self, theta: f64) -> f64 {
        self.lerp(&self.speed, theta)
    }

    /// Boundary point `ρ(θ)(cos θ, sin θ)`.
    pub fn point(&self, theta: f64) -> [f64; 2] {
        let r = self.rho_at(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// Outward unit normal at the boundary point of angle `theta`.
    pub fn normal(&self, theta: f64) -> [f64; 2] {
        let r = self.rho_at(theta);
        let d = self.rho_prime_at(theta);
        let (s, c) = theta.sin_cos();
        let nx = d * s + r * c;
        let ny = -d * c + r * s;
        let len = (nx * nx + ny * ny).sqrt();
        [nx / len, ny / len]
    }

    /// Arc length from angle 0 to `theta` (unwrapped, monotone in `theta`).
    pub fn cumulative_length(&self, theta: f64) -> f64 {
        let (turns, i, u) = self.locate(theta);
        let j = (i + 1) % self.samples();
        let (s0, s1) = (self.speed[i], self.speed[j]);
        turns as f64 * self.perimeter() + self.cumulative[i] + self.dtheta() * (s0 * u + 0.5 * (s1 - s0) * u * u)
    }

    /// Signed arc length of the boundary traversed from `a` to `b`.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        self.cumulative_length(b) - self.cumulative_length(a)
    }

    /// Counterclockwise arc length from `a` to the next occurrence of `b`.
    pub fn arc_length_ccw(&self, a: f64, b: f64) -> f64 {
        let mut d = (b - a).rem_euclid(TAU);
        if d == 0.0 {
            d = 0.0;
        }
        self.arc_length(a, a + d)
    }

    /// End angle `θ̂ > θ` with `arc_length(θ, θ̂) = ell`.
    pub fn arc_advance(&self, theta: f64, ell: f64) -> Result<f64> {
        let p = self.perimeter();
        if !(0.0..p).contains(&ell) {
            return Err(Error::InvalidParameter(format!(
                "arc length {ell} must lie in [0, perimeter {p})"
            )));
        }
        if ell == 0.0 {
            return Ok(theta);
        }
        if self.circle {
            return Ok(theta + ell / self.speed[0]);
        }
        let target = self.cumulative_length(theta) + ell;
        let (mut lo, mut hi) = (theta, theta + TAU);
        let tol = 1e-10 * p;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = self.cumulative_length(mid) - target;
            if r.abs() <= tol || mid == lo || mid == hi {
                return Ok(mid);
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Foot point on the boundary of an exterior point `x`: the angle of the
    /// nearest boundary point and the distance to it. `None` inside the body.
    pub fn project(&self, x: [f64; 2]) -> Option<(f64, f64)> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let ang = x[1].atan2(x[0]).rem_euclid(TAU);
        if r < self.rho_at(ang) {
            return None;
        }
        if self.circle {
            return Some((ang, r - self.rho[0]));
        }
        let dist2 = |t: f64| {
            let p = self.point(t);
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let n = self.samples() as i64;
        let center = (ang / self.dtheta()).round() as i64;
        let window = n / 4;
        let mut best = (f64::INFINITY, 0i64);
        for k in center - window..=center + window {
            let d = dist2(k as f64 * self.dtheta());
            if d < best.0 {
                best = (d, k);
            }
        }
        // golden-section refinement over the neighbouring cells
        let mut lo = (best.1 - 1) as f64 * self.dtheta();
        let mut hi = (best.1 + 1) as f64 * self.dtheta();
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        for _ in 0..60 {
            if dist2(c) < dist2(d) {
                hi = d;
            } else {
                lo = c;
            }
            c = hi - g * (hi - lo);
            d = lo + g * (hi - lo);
        }
        let t = 0.5 * (lo + hi);
        Some((t.rem_euclid(TAU), dist2(t).sqrt()))
    }

    /// Nearest sample index of an angle.
    pub fn nearest_sample(&self, theta: f64) -> usize {
        let n = self.samples();
        ((theta.rem_euclid(TAU) / self.dtheta()).round() as usize) % n
    }
}

/// Boundary sensor set given sample by sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorIndicator {
    active: Vec<bool>,
}

impl SensorIndicator {
    pub fn new(active: Vec<bool>) -> Self {
        Self { active }
    }

    pub fn empty(samples: usize) -> Self {
        Self::new(vec![false; samples])
    }

    pub fn full(samples: usize) -> Self {
        Self::new(vec![true; samples])
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// `H¹` measure of the set with per-sample weight `speed · Δθ`.
    pub fn measure(&self, geom: &BoundaryGeometry) -> f64 {
        let dt = geom.dtheta();
        self.active
            .iter()
            .zip(geom.speed_samples())
            .filter(|(a, _)| **a)
            .map(|(_, s)| s * dt)
            .sum()
    }

    /// Maximal runs of active samples as `(first, last)` index pairs, merging
    /// the run that wraps around index 0.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let n = self.active.len();
        if self.active.iter().all(|&a| a) {
            return vec![(0, n - 1)];
        }
        let Some(start) = (0..n).find(|&b| !self.active[b]) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut run: Option<usize> = None;
        for k in 1..=n {
            let b = (start + k) % n;
            match (self.active[b], run) {
                (true, None) => run = Some(b),
                (false, Some(first)) => {
                    out.push((first, (b + n - 1) % n));
                    run = None;
                }
                _ => {}
            }
        }
        out.sort();
        out
    }
}

/// `N₀` arcs of common length `ℓ`, given by their start angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArcs {
    theta: Vec<f64>,
    ends: Vec<f64>,
    ell: f64,
}

impl SensorArcs {
    /// Validates `N₀ ℓ < perimeter` and the cyclic spacing constraint.
    pub fn new(geom: &BoundaryGeometry, mut theta: Vec<f64>, ell: f64) -> Result<Self> {
        let p = geom.perimeter();
        if theta.is_empty() {
            return Err(Error::Infeasible("need at least one arc".into()));
        }
        if !(ell > 0.0) || theta.len() as f64 * ell >= p {
            return Err(Error::Infeasible(format!(
                "{} arcs of length {ell} do not fit in perimeter {p}",
                theta.len()
            )));
        }
        for t in &mut theta {
            *t = t.rem_euclid(TAU);
        }
        theta.sort_by(f64::total_cmp);
        let arcs = Self::unchecked(geom, theta, ell)?;
        let tol = 1e-9 * p;
        if arcs.min_gap(geom) < ell - tol {
            return Err(Error::Infeasible("arcs overlap".into()));
        }
        Ok(arcs)
    }

    pub(crate) fn unchecked(geom: &BoundaryGeometry, theta: Vec<f64>, ell: f64) -> Result<Self> {
        let ends = theta
            .iter()
            .map(|&t| geom.arc_advance(t, ell))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { theta, ends, ell })
    }

    pub fn starts(&self) -> &[f64] {
        &self.theta
    }

    /// End angles `θ̂ₙ`, unwrapped so that `θ̂ₙ ≥ θₙ`.
    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Arc length between consecutive starts, cyclically (last to first + 2π).
    pub fn gaps(&self, geom: &BoundaryGeometry) -> Vec<f64> {
        let n = self.theta.len();
        if n == 1 {
            return vec![geom.perimeter()];
        }
        (0..n)
            .map(|k| {
                let a = self.theta[k];
                let b = if k + 1 < n {
                    self.theta[k + 1]
                } else {
                    self.theta[0] + TAU
                };
                geom.arc_length(a, b)
            })
            .collect()
    }

    fn min_gap(&self, geom: &BoundaryGeometry) -> f64 {
        self.gaps(geom).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.theta.iter().zip(&self.ends).any(|(&a, &b)| {
            let d = (theta - a).rem_euclid(TAU);
            d < b - a
        })
    }

    pub fn to_indicator(&self, geom: &BoundaryGeometry) -> SensorIndicator {
        SensorIndicator::new((0..geom.samples()).map(|b| self.contains(geom.theta(b))).collect())
    }

    pub fn measure(&self) -> f64 {
        self.ell * self.theta.len() as f64
    }
}

/// A boundary sensor set in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorSet {
    Indicator(SensorIndicator),
    Arcs(SensorArcs),
}

impl SensorSet {
    pub fn contains(&self, geom: &BoundaryGeometry, theta: f64) -> bool {
        match self {
            SensorSet::Indicator(ind) => ind.active()[geom.nearest_sample(theta)],
            SensorSet::Arcs(arcs) => arcs.contains(theta),
        }
    }

    pub fn measure(&self, geom: &BoundaryGeometry) -> f64 {
        match self {
            SensorSet::Indicator(ind) => ind.measure(geom),
            SensorSet::Arcs(arcs) => arcs.measure(),
        }
    }

    pub fn to_indicator(&self, geom: &BoundaryGeometry) -> SensorIndicator {
        match self {
            SensorSet::Indicator(ind) => ind.clone(),
            SensorSet::Arcs(arcs) => arcs.to_indicator(geom),
        }
    }

    /// Angular intervals `(start, end)` covering the set, for export.
    pub fn intervals(&self, geom: &BoundaryGeometry) -> Vec<(f64, f64)> {
        match self {
            SensorSet::Arcs(a) => a.starts().iter().cloned().zip(a.ends().iter().cloned()).collect(),
            SensorSet::Indicator(ind) => {
                let half = 0.5 * geom.dtheta();
                ind.runs()
                    .into_iter()
                    .map(|(s, e)| {
                        let start = geom.theta(s) - half;
                        let mut end = geom.theta(e) + half;
                        if end < start {
                            end += TAU;
                        }
                        (start.rem_euclid(TAU), start.rem_euclid(TAU) + (end - start))
                    })
                    .collect()
            }
        }
    }
}

impl From<SensorIndicator> for SensorSet {
    fn from(v: SensorIndicator) -> Self {
        SensorSet::Indicator(v)
    }
}

impl From<SensorArcs> for SensorSet {
    fn from(v: SensorArcs) -> Self {
        SensorSet::Arcs(v)
    }
}

/// One contiguous arc of the given measure centred on `center`.
pub fn centered_arc(geom: &BoundaryGeometry, center: f64, measure: f64) -> Result<SensorArcs> {
    let half = 0.5 * measure;
    // walk backwards by half the measure
    let target = geom.cumulative_length(center) - half;
    let (mut lo, mut hi) = (center - PI * 2.0, center);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if geom.cumulative_length(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SensorArcs::new(geom, vec![0.5 * (lo + hi)], measure)
}
