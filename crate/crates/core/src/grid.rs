//! Periodic square grid, real and spectral fields, and the 2D discrete
//! Fourier pair used by every solver in the crate.
//!
//! Conventions:
//! - storage is row-major, `values[i * M + j]` holds the node
//!   `x = (i h - D/2, j h - D/2)`, so node `(M/2, M/2)` sits at the origin;
//! - storage index `a` maps to the signed mode number `a` for `a < M/2` and
//!   `a - M` otherwise (the Nyquist index `M/2` is mode `-M/2`);
//! - the forward transform is unnormalized and the inverse carries `1/M^2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    side: f64,
    m: usize,
}

impl Grid2D {
    pub fn new(side: f64, m: usize) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("box side must be positive, got {side}")));
        }
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be even and >= 2, got {m}"
            )));
        }
        Ok(Self { side, m })
    }

    /// Box side length `D`.
    pub fn side(&self) -> f64 {
        self.side
    }

    /// Samples per axis `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `h = D / M`.
    pub fn h(&self) -> f64 {
        self.side / self.m as f64
    }

    /// Physical coordinate along one axis of index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h() - 0.5 * self.side
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    /// Signed mode number for storage index `a`.
    pub fn mode_number(&self, a: usize) -> i64 {
        let half = self.m / 2;
        if a < half {
            a as i64
        } else {
            a as i64 - self.m as i64
        }
    }

    /// Frequency `xi_n = (n1 / D, n2 / D)` for storage indices `(a, b)`.
    pub fn frequency(&self, a: usize, b: usize) -> [f64; 2] {
        [
            self.mode_number(a) as f64 / self.side,
            self.mode_number(b) as f64 / self.side,
        ]
    }

    /// Angular frequencies `2 pi |xi_n|` for every storage index, cached per grid.
    pub fn omegas(&self) -> Arc<Vec<f64>> {
        type Cache = Mutex<HashMap<(u64, usize), Arc<Vec<f64>>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (self.side.to_bits(), self.m);
        let mut cache = CACHE.get_or_init(Default::default).lock().unwrap();
        cache
            .entry(key)
            .or_insert_with(|| {
                let m = self.m;
                let mut w = Vec::with_capacity(m * m);
                for a in 0..m {
                    for b in 0..m {
                        let [x, y] = self.frequency(a, b);
                        w.push(2.0 * PI * (x * x + y * y).sqrt());
                    }
                }
                Arc::new(w)
            })
            .clone()
    }

    pub fn ensure_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.m,
                expected_d: self.side,
                found: other.m,
                found_d: other.side,
            })
        }
    }
}

/// Scalar field sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(x1, x2)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let m = grid.m();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..m {
            for j in 0..m {
                let [x, y] = grid.node(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.m() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &RealField, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Discrete `L2` inner product `h^2 sum u v`.
    pub fn dot(&self, other: &RealField) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Fourier coefficients `c_n` of a field, in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid2D,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid2D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Largest violation of `c_{-n} = conj(c_n)` relative to the largest coefficient.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let m = self.grid.m();
        let scale = self.coeffs.iter().fold(0.0f64, |s, c| s.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let c = self.coeffs[a * m + b];
                let d = self.coeffs[((m - a) % m) * m + (m - b) % m];
                worst = worst.max((c - d.conj()).norm());
            }
        }
        worst / scale
    }
}

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

fn plan(m: usize) -> Arc<Plan> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();
    let mut plans = PLANS.get_or_init(Default::default).lock().unwrap();
    plans
        .entry(m)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(m);
            let inverse = planner.plan_fft_inverse(m);
            let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
            Arc::new(Plan {
                forward,
                inverse,
                scratch_len,
            })
        })
        .clone()
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    par::for_each_row(dst, m, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            *out = src[i * m + j];
        }
    });
}

/// Unnormalized in-place 2D transform of an `m x m` row-major buffer.
pub(crate) fn fft2_in_place(data: &mut [Complex64], m: usize, inverse: bool) {
    let p = plan(m);
    let fft = if inverse { &p.inverse } else { &p.forward };
    let scratch_len = p.scratch_len;
    let rows = |buf: &mut [Complex64]| {
        par::for_each_row_init(
            buf,
            m,
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, _, row| fft.process_with_scratch(row, scratch),
        );
    };
    rows(data);
    let mut tmp = vec![Complex64::new(0.0, 0.0); m * m];
    transpose(data, &mut tmp, m);
    rows(&mut tmp);
    transpose(&tmp, data, m);
}

/// Forward transform of a real field: `c_n = sum_x f(x) e^{-2 i pi n.k / M}`.
pub fn fft_forward(f: &RealField) -> SpectralField {
    let m = f.grid.m();
    let mut coeffs: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut coeffs, m, false);
    SpectralField { grid: f.grid, coeffs }
}

/// Inverse transform (with the `1/M^2` factor), keeping the real part.
pub fn fft_inverse(c: &SpectralField) -> RealField {
    let m = c.grid.m();
    let mut buf = c.coeffs.clone();
    fft2_in_place(&mut buf, m, true);
    let scale = 1.0 / (m * m) as f64;
    RealField {
        grid: c.grid,
        values: buf.into_iter().map(|z| z.re * scale).collect(),
    }
}
