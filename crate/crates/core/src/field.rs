//! Uniform periodic grids, vector fields sampled on them, and the integral
//! functionals (L_p norms, mixed norms, the weighted Dirichlet functional W)
//! used by every estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A periodic box `[0, L)^d` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(Error::Config(format!("dimension {d} not in {{2, 3}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!("n = {n} must be a power of two ≥ 8")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Config(format!("box length {l} must be positive")));
        }
        Ok(Self { d, n, l })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    /// Per-axis indices of a flat, row-major sample index (axis 0 slowest).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rest = flat;
        for axis in (0..self.d).rev() {
            idx[axis] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.d).fold(0, |acc, &i| acc * self.n + i)
    }

    /// Physical coordinates of a sample.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.d {
            x[axis] = idx[axis] as f64 * h;
        }
        x
    }

    /// Signed integer wavenumber of array position `i` along one axis, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }
}

/// A multi-component real field on a [`Grid`]. Velocity fields carry `d`
/// components; scalar fields (pressure, divergence) carry one.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
    pub time: Option<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("field needs at least one component".into()));
        }
        let len = grid.len();
        for (c, comp) in components.iter().enumerate() {
            if comp.len() != len {
                return Err(Error::Misaligned(format!(
                    "component {c} has {} samples, grid needs {len}",
                    comp.len()
                )));
            }
            if let Some(pos) = comp.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite sample at component {c}, index {pos}")));
            }
        }
        Ok(Self { grid, components, time: None })
    }

    pub fn zeros(grid: Grid, comps: usize) -> Self {
        Self { grid, components: vec![vec![0.0; grid.len()]; comps], time: None }
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn(grid: Grid, comps: usize, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let components = (0..comps)
            .map(|c| (0..grid.len()).map(|i| f(&grid.coords(i)[..grid.d], c)).collect())
            .collect();
        Self { grid, components, time: None }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn comps(&self) -> usize {
        self.components.len()
    }

    /// Euclidean magnitude `|u(x)|` at a sample.
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.components.iter().fold(0.0, |acc, c| acc.hypot(c[i]))
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.magnitude_at(i)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v * factor).collect())
            .collect();
        Self { grid: self.grid, components, time: self.time }
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.check_compatible(other)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self { grid: self.grid, components, time: self.time })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    fn check_compatible(&self, other: &VectorField) -> Result<()> {
        if self.grid != other.grid || self.comps() != other.comps() {
            return Err(Error::Misaligned("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn mean(&self, c: usize) -> f64 {
        self.components[c].iter().sum::<f64>() / self.grid.len() as f64
    }

    /// `‖u‖_p` with the Euclidean pointwise magnitude; `p = ∞` gives the max.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_of_samples((0..self.grid.len()).map(|i| self.magnitude_at(i)), p, self.grid.cell_volume())
    }

    /// `‖u_c‖_p` of a single component.
    pub fn component_lp_norm(&self, c: usize, p: f64) -> Result<f64> {
        lp_of_samples(self.components[c].iter().map(|v| v.abs()), p, self.grid.cell_volume())
    }

    /// Largest magnitude on the outermost layer of cells relative to the
    /// overall maximum; close to zero when the field lives well inside the box.
    pub fn boundary_leakage(&self) -> f64 {
        let max = self.max_magnitude();
        if max == 0.0 {
            return 0.0;
        }
        let n = self.grid.n;
        let shell = (0..self.grid.len())
            .filter(|&i| {
                let idx = self.grid.multi_index(i);
                idx[..self.grid.d].iter().any(|&k| k == 0 || k == n - 1)
            })
            .map(|i| self.magnitude_at(i))
            .fold(0.0, f64::max);
        shell / max
    }
}

fn lp_of_samples(samples: impl Iterator<Item = f64> + Clone, p: f64, cell: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain("lp_norm", format!("p = {p} below 1")));
    }
    let max = samples.clone().fold(0.0, f64::max);
    if max == 0.0 || p.is_infinite() {
        return Ok(max);
    }
    // Factor the maximum out so tiny or huge amplitudes neither under- nor overflow.
    let sum: f64 = samples.map(|m| (m / max).powf(p)).sum();
    Ok(max * (sum * cell).powf(1.0 / p))
}

/// Velocity gradient `∂_m u_i`, stored at `entries[i * d + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub grid: Grid,
    pub comps: usize,
    pub entries: Vec<Vec<f64>>,
}

impl GradientField {
    pub fn frobenius_sq_at(&self, i: usize) -> f64 {
        self.entries.iter().map(|e| e[i] * e[i]).sum()
    }
}

fn w_parts(u: &VectorField, grad: &GradientField, p: f64) -> Result<(f64, f64)> {
    if !(p >= 2.0) {
        return Err(Error::domain("w_functional", format!("p = {p} below 2")));
    }
    if grad.grid != u.grid || grad.comps != u.comps() || grad.entries.len() != u.comps() * u.grid.d {
        return Err(Error::Misaligned("gradient does not match field".into()));
    }
    let scale = u.max_magnitude();
    if scale == 0.0 {
        return Ok((0.0, 0.0));
    }
    let sum: f64 = (0..u.grid.len())
        .map(|i| {
            let m = u.magnitude_at(i) / scale;
            let weight = if p == 2.0 { 1.0 } else { m.powf(p - 2.0) };
            weight * grad.frobenius_sq_at(i) / (scale * scale)
        })
        .sum();
    Ok((scale, sum * u.grid.cell_volume()))
}

/// `W_{d,p}(u) = ∫ |u|^{p-2} |∇u|² dx`.
pub fn w_functional(u: &VectorField, grad: &GradientField, p: f64) -> Result<f64> {
    let (scale, reduced) = w_parts(u, grad, p)?;
    Ok(scale.powf(p) * reduced)
}

/// `W_{d,p}(u)^{1/p}`, which is homogeneous of degree one and survives
/// amplitudes for which `W` itself underflows.
pub fn w_root(u: &VectorField, grad: &GradientField, p: f64) -> Result<f64> {
    let (scale, reduced) = w_parts(u, grad, p)?;
    Ok(scale * reduced.powf(1.0 / p))
}

/// Dilation `T_λ[u](x) = λ u(λx)`: same samples on the box `L/λ`, amplitude times `λ`.
pub fn dilate(u: &VectorField, lambda: f64) -> Result<VectorField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain("dilate", format!("λ = {lambda} must be positive")));
    }
    let grid = Grid { l: u.grid.l / lambda, ..u.grid };
    let mut out = u.scaled(lambda);
    out.grid = grid;
    Ok(out)
}

/// Sampled trajectory `t_k ↦ (‖u(t_k)‖_p over a p-grid, ‖u(t_k)‖_2, W^{1/p})`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormTimeSeries {
    pub times: Vec<f64>,
    pub p_grid: Vec<f64>,
    /// `lp_values[k][j] = ‖u(t_k)‖_{p_j}`.
    pub lp_values: Vec<Vec<f64>>,
    pub l2_values: Vec<f64>,
    /// `w_roots[k][j] = W_{d,p_j}(u(t_k))^{1/p_j}`, `None` for `p_j < 2`.
    pub w_roots: Vec<Vec<Option<f64>>>,
}

impl NormTimeSeries {
    pub fn new(p_grid: Vec<f64>) -> Self {
        Self { p_grid, ..Default::default() }
    }

    pub fn push(&mut self, t: f64, lp: Vec<f64>, l2: f64, w_roots: Vec<Option<f64>>) -> Result<()> {
        if lp.len() != self.p_grid.len() || w_roots.len() != self.p_grid.len() {
            return Err(Error::Misaligned("sample does not match p-grid".into()));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Misaligned(format!("time {t} not after {last}")));
            }
        }
        self.times.push(t);
        self.lp_values.push(lp);
        self.l2_values.push(l2);
        self.w_roots.push(w_roots);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn p_index(&self, p: f64) -> Result<usize> {
        self.p_grid
            .iter()
            .position(|&q| (q - p).abs() <= 1e-12 * p.abs().max(1.0))
            .ok_or_else(|| Error::domain("norm series", format!("p = {p} not sampled")))
    }

    /// `t_k ↦ ‖u(t_k)‖_p`.
    pub fn column(&self, p: f64) -> Result<Vec<f64>> {
        let j = self.p_index(p)?;
        Ok(self.lp_values.iter().map(|row| row[j]).collect())
    }

    /// `ln ∫ ‖u(t)‖_p^r dt` by the trapezoid rule over the sampled times;
    /// `-∞` for a zero trajectory.
    pub fn ln_time_integral(&self, p: f64, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::domain("mixed_norm", format!("r = {r} below 1")));
        }
        let col = self.column(p)?;
        let max = col.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 || col.len() < 2 {
            return Ok(f64::NEG_INFINITY);
        }
        let powered: Vec<f64> = col.iter().map(|v| (v / max).powf(r)).collect();
        let integral: f64 = self
            .times
            .windows(2)
            .zip(powered.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
            .sum();
        Ok(r * max.ln() + integral.ln())
    }

    /// Mixed norm `(∫ ‖u(t)‖_p^r dt)^{1/r}`, time integral outermost.
    pub fn mixed_norm(&self, p: f64, r: f64) -> Result<f64> {
        Ok((self.ln_time_integral(p, r)? / r).exp())
    }
}
