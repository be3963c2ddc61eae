//! Fourier-side operators on periodic fields: transforms, derivatives,
//! Riesz transforms, the Helmholtz–Weyl (Leray) projection, the heat
//! semigroup and 2/3-rule dealiasing.
//!
//! Derivative-type symbols use the wavevector with Nyquist components set to
//! zero, so every odd multiplier maps real fields to real fields and the
//! projection stays consistent with the discrete divergence.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{GradientField, Grid, VectorField};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// In-place unnormalised d-dimensional transform of a row-major array.
fn transform_nd(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let (fwd, inv) = plans(n);
    let fft = if inverse { inv } else { fwd };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = grid.len();
    for axis in 0..grid.d {
        let stride = n.pow((grid.d - 1 - axis) as u32);
        for base in 0..total {
            // Visit each line once, from the sample whose index along `axis` is zero.
            if (base / stride) % n != 0 {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = data[base + k * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, value) in line.iter().enumerate() {
                data[base + k * stride] = *value;
            }
        }
    }
}

/// Fourier coefficients of a [`VectorField`], indexed like the physical
/// samples with array position `i` holding integer wavenumber `i` or `i - n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<Vec<Complex64>>,
}

/// Per-mode wavevector data for one grid.
struct Modes {
    grid: Grid,
    /// Physical wavenumbers `2πk/L` per array position.
    xi: Vec<f64>,
    nyquist: usize,
}

impl Modes {
    fn new(grid: Grid) -> Self {
        let xi = (0..grid.n).map(|i| 2.0 * PI * grid.wavenumber(i) as f64 / grid.l).collect();
        Self { grid, xi, nyquist: grid.n / 2 }
    }

    /// Full wavevector `ξ` of a flat mode index.
    fn xi(&self, flat: usize) -> [f64; 3] {
        let idx = self.grid.multi_index(flat);
        let mut out = [0.0; 3];
        for axis in 0..self.grid.d {
            out[axis] = self.xi[idx[axis]];
        }
        out
    }

    /// Wavevector with Nyquist components removed, used by odd symbols.
    fn xi_odd(&self, flat: usize) -> [f64; 3] {
        let idx = self.grid.multi_index(flat);
        let mut out = [0.0; 3];
        for axis in 0..self.grid.d {
            if idx[axis] != self.nyquist {
                out[axis] = self.xi[idx[axis]];
            }
        }
        out
    }
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Forward transform (unnormalised sum).
pub fn forward(u: &VectorField) -> Result<SpectralField> {
    let coeffs = u
        .components
        .iter()
        .map(|comp| {
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite sample in forward transform".into()));
            }
            let mut data: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            transform_nd(&u.grid, &mut data, false);
            Ok(data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralField { grid: u.grid, coeffs })
}

/// Inverse transform, normalised by `n^d`; imaginary round-off is dropped.
pub fn inverse(hat: &SpectralField) -> Result<VectorField> {
    let scale = 1.0 / hat.grid.len() as f64;
    let components = hat
        .coeffs
        .iter()
        .map(|coeffs| {
            let mut data = coeffs.clone();
            transform_nd(&hat.grid, &mut data, true);
            data.iter().map(|c| c.re * scale).collect()
        })
        .collect();
    VectorField::new(hat.grid, components)
}

impl SpectralField {
    pub fn zeros(grid: Grid, comps: usize) -> Self {
        Self { grid, coeffs: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; comps] }
    }

    pub fn comps(&self) -> usize {
        self.coeffs.len()
    }

    fn map_scalar(&self, symbol: impl Fn(&Modes, usize) -> Complex64) -> Self {
        let modes = Modes::new(self.grid);
        let mult: Vec<Complex64> = (0..self.grid.len()).map(|i| symbol(&modes, i)).collect();
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.iter().zip(&mult).map(|(a, m)| a * m).collect())
            .collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_scalar(|_, _| Complex64::new(factor, 0.0))
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        if self.grid != other.grid || self.comps() != other.comps() {
            return Err(Error::Misaligned("spectral fields on different grids".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self { grid: self.grid, coeffs })
    }

    /// `j`-th Riesz transform, symbol `-i ξ_j / ‖ξ‖`, zero at `ξ = 0`.
    pub fn riesz(&self, j: usize) -> Result<Self> {
        if j >= self.grid.d {
            return Err(Error::domain("riesz", format!("direction {j} ≥ d = {}", self.grid.d)));
        }
        Ok(self.map_scalar(|m, i| {
            let xi = m.xi_odd(i);
            let norm = norm_sq(&xi).sqrt();
            if norm == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                -I * (xi[j] / norm)
            }
        }))
    }

    /// Helmholtz–Weyl projection with symbol `δ_ij - ξ_i ξ_j / ‖ξ‖²`.
    pub fn leray_project(&self) -> Result<Self> {
        let d = self.grid.d;
        if self.comps() != d {
            return Err(Error::Misaligned(format!("projection needs {d} components, got {}", self.comps())));
        }
        let modes = Modes::new(self.grid);
        let mut out = self.clone();
        for i in 0..self.grid.len() {
            let xi = modes.xi_odd(i);
            let k2 = norm_sq(&xi);
            if k2 == 0.0 {
                continue;
            }
            let dot: Complex64 = (0..d).map(|m| self.coeffs[m][i] * xi[m]).sum();
            for (m, comp) in out.coeffs.iter_mut().enumerate() {
                comp[i] -= dot * (xi[m] / k2);
            }
        }
        Ok(out)
    }

    /// Heat semigroup `e^{tΔ}`, symbol `exp(-‖ξ‖² t)`.
    pub fn heat(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::domain("heat_semigroup", format!("t = {t} is negative")));
        }
        Ok(self.map_scalar(|m, i| Complex64::new((-norm_sq(&m.xi(i)) * t).exp(), 0.0)))
    }

    /// Partial derivative along `axis`, symbol `i ξ_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.map_scalar(|m, i| I * m.xi_odd(i)[axis])
    }

    /// `∂_m` of every component, one field per direction `m`.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.d).map(|m| self.derivative(m)).collect()
    }

    /// `Σ_m ∂_m û_m` as a one-component field.
    pub fn divergence(&self) -> Result<Self> {
        let d = self.grid.d;
        if self.comps() != d {
            return Err(Error::Misaligned(format!("divergence needs {d} components, got {}", self.comps())));
        }
        let modes = Modes::new(self.grid);
        let div = (0..self.grid.len())
            .map(|i| {
                let xi = modes.xi_odd(i);
                (0..d).map(|m| I * xi[m] * self.coeffs[m][i]).sum()
            })
            .collect();
        Ok(Self { grid: self.grid, coeffs: vec![div] })
    }

    /// Laplacian, symbol `-‖ξ‖²`.
    pub fn laplacian(&self) -> Self {
        self.map_scalar(|m, i| Complex64::new(-norm_sq(&m.xi(i)), 0.0))
    }

    /// 2/3-rule truncation: zero every mode with some `|k_m| > n/3`.
    pub fn dealias(&self) -> Self {
        let grid = self.grid;
        let cutoff = grid.n as f64 / 3.0;
        self.map_scalar(|_, i| {
            let idx = grid.multi_index(i);
            let keep = idx[..grid.d].iter().all(|&k| (grid.wavenumber(k).abs() as f64) <= cutoff);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Largest deviation from `c(-k) = conj(c(k))`, relative to the largest coefficient.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let grid = self.grid;
        let n = grid.n;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for comp in &self.coeffs {
            for (i, c) in comp.iter().enumerate() {
                let idx = grid.multi_index(i);
                let mut mirror = [0usize; 3];
                for axis in 0..grid.d {
                    mirror[axis] = (n - idx[axis]) % n;
                }
                let j = grid.flat_index(&mirror[..grid.d]);
                worst = worst.max((c - comp[j].conj()).norm());
                scale = scale.max(c.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `Σ_k |c_k|² / n^d`, equal to `Σ_x |u(x)|²` by Parseval.
    pub fn energy_sum(&self) -> f64 {
        let total: f64 = self.coeffs.iter().flat_map(|c| c.iter()).map(|c| c.norm_sqr()).sum();
        total / self.grid.len() as f64
    }
}

/// Velocity gradient of a physical field, via the spectral derivative.
pub fn velocity_gradient(u: &VectorField) -> Result<GradientField> {
    let hat = forward(u)?;
    let d = u.grid.d;
    let derivs: Vec<VectorField> = (0..d).map(|m| inverse(&hat.derivative(m))).collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(u.comps() * d);
    for i in 0..u.comps() {
        for deriv in derivs.iter() {
            entries.push(deriv.components[i].clone());
        }
    }
    Ok(GradientField { grid: u.grid, comps: u.comps(), entries })
}

/// `max |∇·u| / (max |u| · 2π/L)`; zero for the zero field.
pub fn divergence_residual(u: &VectorField) -> Result<f64> {
    let scale = u.max_magnitude() * 2.0 * PI / u.grid.l;
    if scale == 0.0 {
        return Ok(0.0);
    }
    let div = inverse(&forward(u)?.divergence()?)?;
    Ok(div.max_magnitude() / scale)
}
