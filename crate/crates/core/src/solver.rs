//! Pseudo-spectral integrator for the Leray-projected Navier–Stokes system
//! `∂_t u = Δu − Q∇·(u⊗u) + Qf` on the periodic box, viscosity one.
//!
//! Time stepping is the two-stage integrating-factor scheme
//!
//! ```text
//! ũ  = E (û + dt N(û))
//! û⁺ = E û + dt/2 (E N(û) + N(ũ)),      E = exp(−|ξ|² dt),
//! ```
//!
//! which integrates the linear part exactly and is second order in `dt`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{threshold, RieszBound};
use crate::error::{Error, Result};
use crate::field::{w_root, GradientField, Grid, NormTimeSeries, VectorField};
use crate::initial::{make_initial, InitialKind};
use crate::spectral::{divergence_residual, forward, inverse, SpectralField};

/// Largest admissible `dt · max|u| · n / L` before a step is subdivided.
pub const CFL_LIMIT: f64 = 0.5;
/// Relative divergence accepted as "solenoidal".
pub const SOLENOIDAL_TOL: f64 = 1e-10;
/// Growth factor of `max|u|` over one step treated as a blow-up.
pub const BLOW_UP_FACTOR: f64 = 10.0;
/// Subdivision cap: at most `2^MAX_HALVINGS` sub-steps per step.
pub const MAX_HALVINGS: u32 = 20;
/// Iteration cap of the fixed-point cross-check.
pub const MAX_PICARD_ITERATIONS: usize = 5;

fn default_amplitude() -> f64 {
    1.0
}

fn default_sample_every() -> usize {
    1
}

/// Initial datum: a shape, its amplitude, and an optional rescaling that
/// places `‖u_0‖_d` at a fraction of the smallest small-data threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    #[serde(flatten)]
    pub kind: InitialKind,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Fraction `f ∈ (0, 1)`: rescale so `‖u_0‖_d = f · min_p threshold(d, p)`
    /// over the p-grid points above `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_to_threshold: Option<f64>,
    #[serde(default)]
    pub bound: RieszBound,
}

/// Steady external force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ForcingSpec {
    /// `amplitude` times the Taylor–Green shape of the grid's dimension.
    #[serde(rename = "taylor-green")]
    TaylorGreen { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSpec>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    pub p_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    /// Every schema violation, one message per offending field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = Grid::new(self.d, self.n, self.l) {
            out.push(format!("d/n/L: {e}"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt: {} must be positive", self.dt));
        }
        if !(self.t_final == 0.0 || self.t_final >= self.dt) || !self.t_final.is_finite() {
            out.push(format!("T: {} must be 0 or at least dt", self.t_final));
        }
        if self.sample_every == 0 {
            out.push("sample_every: must be at least 1".into());
        }
        if self.p_grid.is_empty() {
            out.push("p_grid: must not be empty".into());
        }
        if self.p_grid.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
            out.push("p_grid: exponents must be finite and ≥ 1".into());
        }
        if self.p_grid.windows(2).any(|w| !(w[1] > w[0])) {
            out.push("p_grid: must be strictly increasing".into());
        }
        if self.snapshot_every == Some(0) {
            out.push("snapshot_every: must be at least 1".into());
        }
        if !(self.initial.amplitude > 0.0) && self.initial.kind != InitialKind::Zero {
            out.push(format!("initial.amplitude: {} must be positive", self.initial.amplitude));
        }
        if let Some(f) = self.initial.scale_to_threshold {
            if !(f > 0.0 && f < 1.0) {
                out.push(format!("initial.scale_to_threshold: {f} must lie in (0, 1)"));
            }
            if self.d != 3 {
                out.push("initial.scale_to_threshold: thresholds need d = 3".into());
            }
            if !self.p_grid.iter().any(|&p| p > self.d as f64) {
                out.push("initial.scale_to_threshold: no p-grid point above d".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<Grid> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::Config(v.join("; ")));
        }
        Grid::new(self.d, self.n, self.l)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.d, self.n, self.l)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// The initial datum described by this config.
    pub fn initial_field(&self) -> Result<VectorField> {
        let grid = self.validate()?;
        let spec = &self.initial;
        let u0 = make_initial(&spec.kind, grid, spec.amplitude, self.seed)?;
        let Some(fraction) = spec.scale_to_threshold else {
            return Ok(u0);
        };
        let target = fraction * min_threshold(self.d as u32, &self.p_grid, spec.bound)?;
        let current = u0.lp_norm(self.d as f64)?;
        if current == 0.0 {
            return Ok(u0);
        }
        Ok(u0.scaled(target / current))
    }
}

/// `min_p 1/(2 C_{7.7}(d, p))` over the grid points `p > d`.
pub fn min_threshold(d: u32, p_grid: &[f64], bound: RieszBound) -> Result<f64> {
    p_grid
        .iter()
        .filter(|&&p| p > d as f64)
        .map(|&p| threshold(d, p, bound))
        .try_fold(f64::INFINITY, |acc, t| Ok(acc.min(t?)))
        .and_then(|m| if m.is_finite() { Ok(m) } else { Err(Error::domain("min_threshold", "no p-grid point above d")) })
}

fn taylor_green(grid: Grid, amplitude: f64) -> VectorField {
    let kind = if grid.d == 2 { InitialKind::TaylorGreen2d } else { InitialKind::TaylorGreen3d };
    make_initial(&kind, grid, 1.0, 0).expect("Taylor–Green shapes are valid on every grid").scaled(amplitude)
}

/// Projected steady forcing `Q f̂`, if any.
fn forcing_hat(grid: Grid, forcing: Option<&ForcingSpec>) -> Result<Option<SpectralField>> {
    match forcing {
        None => Ok(None),
        Some(ForcingSpec::TaylorGreen { amplitude }) => {
            if !amplitude.is_finite() {
                return Err(Error::Config("forcing.amplitude must be finite".into()));
            }
            if *amplitude == 0.0 {
                return Ok(None);
            }
            Ok(Some(forward(&taylor_green(grid, *amplitude))?.leray_project()?.dealias()))
        }
    }
}

/// `−Q[∇·(û⊗û)]`, dealiased, from dealiased coefficients.
fn nonlinear_hat(hat: &SpectralField) -> Result<SpectralField> {
    let grid = hat.grid;
    let d = grid.d;
    let u = inverse(hat)?;
    let mut products = vec![vec![None; d]; d];
    for i in 0..d {
        for k in i..d {
            let prod: Vec<f64> = u.components[i].iter().zip(&u.components[k]).map(|(a, b)| a * b).collect();
            let field = forward(&VectorField { grid, components: vec![prod], time: None })?.dealias();
            products[i][k] = Some(field.coeffs[0].clone());
            products[k][i] = products[i][k].clone();
        }
    }
    let mut div = SpectralField::zeros(grid, d);
    for k in 0..d {
        // Column k of the product tensor, differentiated along k.
        let column = SpectralField {
            grid,
            coeffs: (0..d).map(|i| products[i][k].clone().expect("filled above")).collect(),
        };
        div = div.add(&column.derivative(k))?;
    }
    Ok(div.leray_project()?.scaled(-1.0))
}

/// Projected convection `N(u) = −Q[∇·(u⊗u)]` of a solenoidal field.
pub fn nonlinear_term(u: &VectorField) -> Result<VectorField> {
    check_solenoidal(u)?;
    inverse(&nonlinear_hat(&forward(u)?.dealias())?)
}

fn check_solenoidal(u: &VectorField) -> Result<()> {
    if u.comps() != u.grid.d {
        return Err(Error::Misaligned(format!("velocity needs {} components, got {}", u.grid.d, u.comps())));
    }
    let residual = divergence_residual(u)?;
    if residual > SOLENOIDAL_TOL {
        return Err(Error::domain("nonlinear_term", format!("input not solenoidal (relative divergence {residual:.3e})")));
    }
    Ok(())
}

/// Pressure `P = Σ_{j,k} R_j R_k (u_j u_k)` from the dealiased products.
pub fn pressure(u: &VectorField) -> Result<VectorField> {
    let grid = u.grid;
    let d = grid.d;
    if u.comps() != d {
        return Err(Error::Misaligned(format!("velocity needs {d} components, got {}", u.comps())));
    }
    let mut total = SpectralField::zeros(grid, 1);
    for j in 0..d {
        for k in 0..d {
            let prod: Vec<f64> = u.components[j].iter().zip(&u.components[k]).map(|(a, b)| a * b).collect();
            let hat = forward(&VectorField { grid, components: vec![prod], time: None })?.dealias();
            total = total.add(&hat.riesz(k)?.riesz(j)?)?;
        }
    }
    inverse(&total)
}

fn rhs(hat: &SpectralField, force: Option<&SpectralField>) -> Result<SpectralField> {
    let n = nonlinear_hat(hat)?;
    match force {
        Some(f) => n.add(f),
        None => Ok(n),
    }
}

/// One integrating-factor RK2 step in Fourier space.
fn step_hat(hat: &SpectralField, dt: f64, force: Option<&SpectralField>) -> Result<SpectralField> {
    let n0 = rhs(hat, force)?;
    let predictor = hat.add(&n0.scaled(dt))?.heat(dt)?;
    let n1 = rhs(&predictor, force)?;
    hat.heat(dt)?.add(&n0.heat(dt)?.scaled(0.5 * dt).add(&n1.scaled(0.5 * dt))?)
}

fn max_magnitude_hat(hat: &SpectralField) -> Result<f64> {
    Ok(inverse(hat)?.max_magnitude())
}

/// One step of the unforced scheme from physical samples.
pub fn step(u: &VectorField, dt: f64) -> Result<VectorField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain("step", format!("dt = {dt} must be positive")));
    }
    let before = u.max_magnitude();
    let next = inverse(&step_hat(&forward(u)?.dealias(), dt, None)?)?;
    guard_growth(before, next.max_magnitude())?;
    Ok(next.with_time(u.time.unwrap_or(0.0) + dt))
}

fn guard_growth(before: f64, after: f64) -> Result<()> {
    if !after.is_finite() || (before > 0.0 && after > BLOW_UP_FACTOR * before) {
        return Err(Error::Numerical(format!("max|u| grew from {before:e} to {after:e} in one step")));
    }
    Ok(())
}

/// CFL number `dt · max|u| · n / L`.
pub fn cfl_number(grid: Grid, dt: f64, max_u: f64) -> f64 {
    dt * max_u * grid.n as f64 / grid.l
}

/// Fixed-point iterates of the Duhamel formula on `[0, t]`, with the time
/// integral evaluated by the trapezoid rule on `nodes` equal intervals.
/// Returns the final iterate at `t` and the sup-norm change of each iteration.
pub fn picard(u0: &VectorField, t: f64, iterations: usize, nodes: usize) -> Result<(VectorField, Vec<f64>)> {
    if iterations == 0 || iterations > MAX_PICARD_ITERATIONS {
        return Err(Error::domain("picard", format!("iterations must lie in 1..={MAX_PICARD_ITERATIONS}")));
    }
    if !(t > 0.0) || nodes == 0 {
        return Err(Error::domain("picard", "need t > 0 and at least one interval"));
    }
    check_solenoidal(u0)?;
    let h = t / nodes as f64;
    let hat0 = forward(u0)?.dealias();
    let mut path: Vec<SpectralField> = (0..=nodes).map(|k| hat0.heat(k as f64 * h)).collect::<Result<_>>()?;
    let mut changes = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let forcing: Vec<SpectralField> = path.iter().map(nonlinear_hat).collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(nodes + 1);
        for k in 0..=nodes {
            let tk = k as f64 * h;
            let mut acc = hat0.heat(tk)?;
            for (j, nj) in forcing.iter().enumerate().take(k + 1) {
                let weight = if j == 0 || j == k { 0.5 * h } else { h };
                if k > 0 {
                    acc = acc.add(&nj.heat(tk - j as f64 * h)?.scaled(weight))?;
                }
            }
            next.push(acc);
        }
        let diff = inverse(&next[nodes].add(&path[nodes].scaled(-1.0))?)?.max_magnitude();
        changes.push(diff);
        path = next;
    }
    Ok((inverse(&path[nodes])?.with_time(t), changes))
}

/// Extends a run past `T` until `‖u‖_2 ≤ decay_target · ‖u_0‖_2`, never beyond `max_horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub decay_target: Option<f64>,
    pub max_horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Abort message; the series holds everything sampled before it.
    pub failure: Option<String>,
    pub steps: usize,
    pub final_time: f64,
    pub cfl_max: f64,
    /// Steps that were subdivided to respect the CFL limit.
    pub subdivided_steps: usize,
    /// `(t, CFL)` at every sample.
    pub cfl_history: Vec<(f64, f64)>,
    /// Largest relative divergence over the samples.
    pub max_divergence: f64,
    /// Largest spatial mean of any component over the samples.
    pub max_mean: f64,
    /// Largest one-step increase of `‖u‖_2`, relative to `‖u_0‖_2`.
    pub max_energy_increase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: NormTimeSeries,
    pub initial: VectorField,
    pub final_field: VectorField,
    pub snapshots: Vec<VectorField>,
    pub diagnostics: RunDiagnostics,
}

impl RunOutput {
    pub fn failed(&self) -> bool {
        self.diagnostics.failure.is_some()
    }
}

/// Norm sample of a field given its (dealiased) coefficients.
fn sample_norms(u: &VectorField, hat: &SpectralField, p_grid: &[f64]) -> Result<(Vec<f64>, f64, Vec<Option<f64>>)> {
    let lp = p_grid.iter().map(|&p| u.lp_norm(p)).collect::<Result<Vec<_>>>()?;
    let l2 = u.lp_norm(2.0)?;
    let grad = gradient_from_hat(hat)?;
    let w = p_grid
        .iter()
        .map(|&p| if p >= 2.0 { w_root(u, &grad, p).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>>>()?;
    Ok((lp, l2, w))
}

fn gradient_from_hat(hat: &SpectralField) -> Result<GradientField> {
    let d = hat.grid.d;
    let derivs: Vec<VectorField> = (0..d).map(|m| inverse(&hat.derivative(m))).collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(hat.comps() * d);
    for i in 0..hat.comps() {
        for deriv in &derivs {
            entries.push(deriv.components[i].clone());
        }
    }
    Ok(GradientField { grid: hat.grid, comps: hat.comps(), entries })
}

fn energy(hat: &SpectralField) -> f64 {
    hat.energy_sum().sqrt()
}

pub fn run(config: &SimulationConfig) -> Result<RunOutput> {
    run_with(config, RunOptions::default())
}

/// Integrates the configured problem. Config errors are returned as `Err`;
/// numerical failures during stepping end the run early with
/// `diagnostics.failure` set.
pub fn run_with(config: &SimulationConfig, options: RunOptions) -> Result<RunOutput> {
    let grid = config.validate()?;
    let u0 = config.initial_field()?;
    let force = forcing_hat(grid, config.forcing.as_ref())?;
    let mut hat = forward(&u0)?.dealias();
    let mut u = inverse(&hat)?.with_time(0.0);

    let mut series = NormTimeSeries::new(config.p_grid.clone());
    let mut diag = RunDiagnostics::default();
    let mut snapshots = Vec::new();
    let e0 = energy(&hat);

    let record = |u: &VectorField, hat: &SpectralField, t: f64, series: &mut NormTimeSeries, diag: &mut RunDiagnostics| -> Result<()> {
        let (lp, l2, w) = sample_norms(u, hat, &config.p_grid)?;
        series.push(t, lp, l2, w)?;
        diag.cfl_history.push((t, cfl_number(grid, config.dt, u.max_magnitude())));
        diag.max_divergence = diag.max_divergence.max(divergence_residual(u)?);
        let mean = (0..u.comps()).map(|c| u.mean(c).abs()).fold(0.0, f64::max);
        diag.max_mean = diag.max_mean.max(mean);
        Ok(())
    };
    record(&u, &hat, 0.0, &mut series, &mut diag)?;
    if config.snapshot_every.is_some() {
        snapshots.push(u.clone());
    }

    let horizon = options.max_horizon.map_or(config.t_final, |h| h.max(config.t_final));
    let mut t = 0.0;
    let mut k = 0usize;
    let tol = 1e-12 * config.dt;
    loop {
        let past_t = t >= config.t_final - tol;
        if past_t {
            let decayed = match options.decay_target {
                Some(target) => e0 == 0.0 || energy(&hat) <= target * e0,
                None => true,
            };
            if decayed || t >= horizon - tol {
                break;
            }
        }
        let end = if past_t { horizon } else { config.t_final };
        let dt = config.dt.min(end - t);
        match advance(&hat, dt, grid, force.as_ref(), &mut diag) {
            Ok(next) => {
                let e_prev = energy(&hat);
                hat = next;
                if force.is_none() && e0 > 0.0 {
                    diag.max_energy_increase = diag.max_energy_increase.max((energy(&hat) - e_prev) / e0);
                }
            }
            Err(e) => {
                diag.failure = Some(e.to_string());
                break;
            }
        }
        k += 1;
        t = if (t + dt - end).abs() <= tol { end } else { t + dt };
        let at_end = t >= config.t_final - tol && k % config.sample_every != 0;
        let sample = k % config.sample_every == 0 || at_end;
        let snap = config.snapshot_every.is_some_and(|s| k % s == 0);
        if sample || snap {
            u = inverse(&hat)?.with_time(t);
            if sample && series.times.last().map_or(true, |&last| t > last) {
                record(&u, &hat, t, &mut series, &mut diag)?;
            }
            if snap {
                snapshots.push(u.clone());
            }
        }
    }
    diag.steps = k;
    diag.final_time = t;
    let final_field = inverse(&hat)?.with_time(t);
    if diag.failure.is_none() && series.times.last().map_or(true, |&last| t > last) {
        record(&final_field, &hat, t, &mut series, &mut diag)?;
    }
    Ok(RunOutput { series, initial: u0, final_field, snapshots, diagnostics: diag })
}

/// One step of size `dt`, subdivided by halving while the CFL number exceeds the limit.
fn advance(
    hat: &SpectralField,
    dt: f64,
    grid: Grid,
    force: Option<&SpectralField>,
    diag: &mut RunDiagnostics,
) -> Result<SpectralField> {
    let max_u = max_magnitude_hat(hat)?;
    let mut pieces = 1u32;
    while cfl_number(grid, dt / pieces as f64, max_u) > CFL_LIMIT {
        if pieces.trailing_zeros() >= MAX_HALVINGS {
            return Err(Error::Numerical(format!("CFL limit unreachable with max|u| = {max_u:e}")));
        }
        pieces *= 2;
    }
    if pieces > 1 {
        diag.subdivided_steps += 1;
    }
    let sub = dt / pieces as f64;
    diag.cfl_max = diag.cfl_max.max(cfl_number(grid, sub, max_u));
    let mut current = hat.clone();
    for _ in 0..pieces {
        let before = max_magnitude_hat(&current)?;
        let next = step_hat(&current, sub, force)?;
        guard_growth(before, max_magnitude_hat(&next)?)?;
        current = next;
    }
    Ok(current)
}

/// `W = W^{1/p}` raised back to the power `p`; underflows to zero for tiny fields.
fn w_from_root(root: f64, p: f64) -> f64 {
    (p * root.ln()).exp()
}

/// Long-format CSV with columns `t,p,lp,l2,W`; `W` is empty for `p < 2`.
pub fn norms_csv(series: &NormTimeSeries) -> String {
    let mut out = String::from("t,p,lp,l2,W\n");
    for k in 0..series.len() {
        for (j, &p) in series.p_grid.iter().enumerate() {
            let w = series.w_roots[k][j].map(|r| format!("{}", w_from_root(r, p))).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", series.times[k], p, series.lp_values[k][j], series.l2_values[k], w);
        }
    }
    out
}

pub fn write_norms_csv(path: &Path, series: &NormTimeSeries) -> Result<()> {
    std::fs::write(path, norms_csv(series))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tg_config(d: usize, n: usize, dt: f64, t: f64) -> SimulationConfig {
        let kind = if d == 2 { InitialKind::TaylorGreen2d } else { InitialKind::TaylorGreen3d };
        SimulationConfig {
            d,
            n,
            l: 2.0 * PI,
            dt,
            t_final: t,
            initial: InitialSpec { kind, amplitude: 1.0, scale_to_threshold: None, bound: RieszBound::Integral },
            forcing: None,
            sample_every: 1,
            p_grid: vec![2.0, 4.0],
            snapshot_every: None,
            seed: 0,
        }
    }

    fn max_abs(u: &VectorField) -> f64 {
        u.max_magnitude()
    }

    #[test]
    fn config_json_keys() {
        let text = r#"{"d":3,"n":16,"L":6.283185307179586,"dt":0.01,"T":0.1,
            "initial":{"kind":"random-solenoidal","band":[1,3],"amplitude":0.5},
            "sample_every":2,"p_grid":[2,4],"seed":7}"#;
        let cfg = SimulationConfig::from_json(text).unwrap();
        assert_eq!(cfg.initial.kind, InitialKind::RandomSolenoidal { band: [1.0, 3.0] });
        assert_eq!(cfg.initial.amplitude, 0.5);
        assert!(cfg.violations().is_empty());
        let back = SimulationConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn violations_are_listed_per_field() {
        let mut cfg = tg_config(3, 16, 0.0, 0.5);
        cfg.sample_every = 0;
        cfg.p_grid = vec![];
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v[0].starts_with("dt"));
    }

    #[test]
    fn zero_field_stays_zero() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let u = VectorField::zeros(g, 3);
        assert_eq!(max_abs(&nonlinear_term(&u).unwrap()), 0.0);
        assert_eq!(max_abs(&step(&u, 0.1).unwrap()), 0.0);
        assert_eq!(max_abs(&pressure(&u).unwrap()), 0.0);
    }

    #[test]
    fn taylor_green_2d_has_no_projected_nonlinearity() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let u = make_initial(&InitialKind::TaylorGreen2d, g, 1.0, 0).unwrap();
        assert!(max_abs(&nonlinear_term(&u).unwrap()) < 1e-10);
    }

    #[test]
    fn nonlinear_output_is_solenoidal() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u = make_initial(&InitialKind::RandomSolenoidal { band: [1.0, 4.0] }, g, 1.0, 3).unwrap();
        let n = nonlinear_term(&u).unwrap();
        assert!(max_abs(&n) > 1e-3);
        assert!(divergence_residual(&n).unwrap() <= 1e-10);
    }

    #[test]
    fn rejects_non_solenoidal_input() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let u = VectorField::from_fn(g, 2, |x, c| if c == 0 { x[0].sin() } else { 0.0 });
        assert!(nonlinear_term(&u).is_err());
    }

    #[test]
    fn pressure_of_taylor_green_2d() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let a = 1.3;
        let u = make_initial(&InitialKind::TaylorGreen2d, g, a, 0).unwrap();
        let p = pressure(&u).unwrap();
        let want = VectorField::from_fn(g, 1, |x, _| -a * a / 4.0 * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()));
        assert!(max_abs(&p.sub(&want).unwrap()) < 1e-12);
    }

    #[test]
    fn pressure_of_constant_field_vanishes() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |_, c| c as f64 + 0.5);
        assert!(max_abs(&pressure(&u).unwrap()) < 1e-13);
    }

    #[test]
    fn tiny_amplitude_follows_heat_flow() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let kind = InitialKind::RandomSolenoidal { band: [1.0, 3.0] };
        for amp in [1e-3, 1e-6] {
            let u = make_initial(&kind, g, amp, 1).unwrap();
            let stepped = step(&u, 0.05).unwrap();
            let heat = inverse(&forward(&u).unwrap().dealias().heat(0.05).unwrap()).unwrap();
            let rel = max_abs(&stepped.sub(&heat).unwrap()) / max_abs(&heat);
            assert!(rel < 10.0 * amp, "amp {amp}: {rel}");
        }
    }

    #[test]
    fn taylor_green_2d_decay() {
        let out = run(&tg_config(2, 32, 0.01, 0.5)).unwrap();
        let l2 = &out.series.l2_values;
        let rel = (l2.last().unwrap() / l2[0] - (-1.0f64).exp()).abs() / (-1.0f64).exp();
        assert!(rel < 1e-10, "{rel}");
        assert_eq!(out.series.len(), 51);
    }

    #[test]
    fn steady_forcing_balances_viscosity() {
        // The discrete fixed point differs from the continuum one by
        // A (k² dt)² / 12 at leading order.
        for dt in [0.05, 0.025] {
            let mut cfg = tg_config(2, 16, dt, 20.0);
            cfg.sample_every = 100;
            cfg.initial.amplitude = 0.7;
            cfg.forcing = Some(ForcingSpec::TaylorGreen { amplitude: 1.4 });
            let out = run(&cfg).unwrap();
            let drift = max_abs(&out.final_field.sub(&out.initial).unwrap());
            let model = 0.7 * (2.0 * dt).powi(2) / 12.0;
            assert!((drift / model - 1.0).abs() < 0.01, "dt {dt}: {drift} vs {model}");
        }
    }

    #[test]
    fn zero_horizon_gives_one_sample() {
        let out = run(&tg_config(2, 16, 0.01, 0.0)).unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.diagnostics.steps, 0);
    }

    #[test]
    fn uneven_horizon_is_hit_exactly() {
        let mut cfg = tg_config(2, 16, 0.03, 0.1);
        cfg.sample_every = 2;
        let out = run(&cfg).unwrap();
        assert!((out.diagnostics.final_time - 0.1).abs() < 1e-15);
        assert_eq!(out.series.times, vec![0.0, 0.06, 0.1]);
    }

    #[test]
    fn decay_target_extends_the_run() {
        let cfg = tg_config(2, 16, 0.05, 0.5);
        let opts = RunOptions { decay_target: Some(1e-2), max_horizon: Some(10.0) };
        let out = run_with(&cfg, opts).unwrap();
        let l2 = &out.series.l2_values;
        assert!(l2.last().unwrap() / l2[0] <= 1e-2);
        // e^{-2t} = 1e-2 at t ≈ 2.30.
        assert!(out.diagnostics.final_time < 2.4);
    }

    #[test]
    fn cfl_subdivides_large_steps() {
        let mut cfg = tg_config(3, 16, 0.5, 0.5);
        cfg.initial.amplitude = 2.0;
        let out = run(&cfg).unwrap();
        assert!(out.diagnostics.subdivided_steps > 0);
        assert!(out.diagnostics.cfl_max <= CFL_LIMIT);
        assert!(!out.failed());
    }

    #[test]
    fn threshold_scaling() {
        let mut cfg = tg_config(3, 16, 0.01, 0.0);
        cfg.initial.kind = InitialKind::RandomSolenoidal { band: [1.0, 3.0] };
        cfg.p_grid = vec![2.0, 4.0, 6.0];
        cfg.initial.scale_to_threshold = Some(0.5);
        let u0 = cfg.initial_field().unwrap();
        let want = 0.5 * min_threshold(3, &cfg.p_grid, RieszBound::Integral).unwrap();
        assert!((u0.lp_norm(3.0).unwrap() / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn picard_agrees_with_stepper() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u0 = make_initial(&InitialKind::TaylorGreen3d, g, 1.0, 0).unwrap();
        let t = 0.1;
        let (fixed, changes) = picard(&u0, t, 5, 40).unwrap();
        assert!(changes.windows(2).all(|w| w[1] < w[0]));
        let mut u = u0.clone();
        for _ in 0..40 {
            u = step(&u, t / 40.0).unwrap();
        }
        let diff = max_abs(&fixed.sub(&u).unwrap());
        assert!(diff < 1e-4, "{diff}");
        assert!(picard(&u0, t, 6, 4).is_err());
    }

    #[test]
    fn norms_csv_layout() {
        let out = run(&tg_config(2, 16, 0.01, 0.02)).unwrap();
        let csv = norms_csv(&out.series);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,p,lp,l2,W");
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("0,2,"));
    }
}
