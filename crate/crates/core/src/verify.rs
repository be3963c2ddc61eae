//! Estimate-by-estimate verification: a simulated trajectory plus the
//! closed-form constants become a report of dimensionless margins.
//!
//! Every margin is `observed / bound` for upper-bound checks (pass at
//! `≤ 1 + bound_slack`) or a relative violation for monotonicity checks
//! (pass at `≤ monotonicity`). Quantities that leave the `f64` range at
//! small-data amplitudes are compared in log space.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{
    constant_b21, ln_constant_c77, ln_elementary_inequality_margin, ln_threshold, log_add, r_exponent, RieszBound,
};
use crate::error::{Error, Result};
use crate::field::{Grid, VectorField};
use crate::initial::{make_initial, InitialKind};
use crate::psi::{
    gls_norm, interpolation_z, kappa, mri_norm, psi_kappa, psi_tilde, theta, MriFlavor, NormProfile, PsiFunction,
    PsiSpec, PsiValue, Support,
};
use crate::solver::{run_with, InitialSpec, RunOptions, RunOutput, SimulationConfig};

/// Governing equation actually integrated, stated in every report.
pub const MODEL: &str = "∂_t u = Δu − Q∇·(u⊗u) + Qf, unit viscosity, periodic box (standard projected form)";

/// Decay factor on `‖u‖_2` that stands in for `t → ∞`.
pub const DECAY_TARGET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Upper-bound checks pass at `observed / bound ≤ 1 + bound_slack`.
    pub bound_slack: f64,
    /// Per-step monotonicity violations allowed, relative to the initial norm.
    pub monotonicity: f64,
    /// Relative tolerance of equality checks.
    pub equality: f64,
    /// Absolute tolerance of algebraic exponent identities.
    pub exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { bound_slack: 0.05, monotonicity: 1e-8, equality: 0.01, exponent: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    Thm31,
    Thm41,
    Thm51,
    Thm61,
    Inequalities,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::Thm31 => "thm31",
            Theorem::Thm41 => "thm41",
            Theorem::Thm51 => "thm51",
            Theorem::Thm61 => "thm61",
            Theorem::Inequalities => "inequalities",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "thm31" => Ok(Theorem::Thm31),
            "thm41" => Ok(Theorem::Thm41),
            "thm51" => Ok(Theorem::Thm51),
            "thm61" => Ok(Theorem::Thm61),
            "inequalities" => Ok(Theorem::Inequalities),
            other => Err(Error::Config(format!("unknown theorem id {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    HypothesisNotMet,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// `observed / bound`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<f64>,
    pub pass: bool,
}

impl Margin {
    fn ratio(check: &str, p: Option<f64>, ratio: f64, limit: f64) -> Self {
        Self { check: check.into(), p, ratio: Some(ratio), violation: None, pass: ratio <= limit }
    }

    fn violation(check: &str, p: Option<f64>, violation: f64, limit: f64) -> Self {
        Self { check: check.into(), p, ratio: None, violation: Some(violation), pass: violation <= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub pass: bool,
    pub status: Status,
    pub model: String,
    pub tolerances: Tolerances,
    pub margins: Vec<Margin>,
    pub diagnostics: BTreeMap<String, Value>,
    pub config: Option<SimulationConfig>,
}

impl VerificationReport {
    fn new(theorem: Theorem, tol: Tolerances, config: Option<&SimulationConfig>) -> Self {
        Self {
            theorem: theorem.id().into(),
            pass: false,
            status: Status::Fail,
            model: MODEL.into(),
            tolerances: tol,
            margins: Vec::new(),
            diagnostics: BTreeMap::new(),
            config: config.cloned(),
        }
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn hypothesis_not_met(mut self, reason: impl Into<String>) -> Self {
        self.status = Status::HypothesisNotMet;
        self.pass = false;
        self.note("hypothesis", reason.into());
        self
    }

    fn numerical_failure(mut self, reason: impl Into<String>) -> Self {
        self.status = Status::NumericalFailure;
        self.pass = false;
        self.note("failure", reason.into());
        self
    }

    /// Pass iff at least one margin was checked and every margin passed.
    fn conclude(mut self) -> Self {
        let ok = !self.margins.is_empty() && self.margins.iter().all(|m| m.pass);
        self.pass = ok;
        self.status = if ok { Status::Pass } else { Status::Fail };
        self
    }

    /// Largest ratio among margins of the named check.
    pub fn max_ratio(&self, check: &str) -> Option<f64> {
        self.margins
            .iter()
            .filter(|m| m.check == check)
            .filter_map(|m| m.ratio)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    /// Largest violation among margins of the named check.
    pub fn max_violation(&self, check: &str) -> Option<f64> {
        self.margins
            .iter()
            .filter(|m| m.check == check)
            .filter_map(|m| m.violation)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }
}

/// A simulated trajectory shared between checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SimulationConfig,
    pub run: RunOutput,
}

impl Trajectory {
    /// Runs `config` past its horizon until `‖u‖_2` has decayed by [`DECAY_TARGET`].
    pub fn simulate(config: &SimulationConfig) -> Result<Self> {
        // Slowest resolved mode decays like exp(-(2π/L)² t).
        let slowest = (config.l / (2.0 * std::f64::consts::PI)).powi(2);
        let horizon = config.t_final.max(4.0 * (1.0 / DECAY_TARGET).ln() * slowest);
        let options = RunOptions { decay_target: Some(DECAY_TARGET), max_horizon: Some(horizon) };
        Ok(Self { config: config.clone(), run: run_with(config, options)? })
    }

    fn d(&self) -> u32 {
        self.config.d as u32
    }

    fn profile(&self, k: usize) -> Result<NormProfile> {
        let s = &self.run.series;
        NormProfile::new(s.p_grid.clone(), s.lp_values[k].clone(), format!("t = {}", s.times[k]))
    }
}

/// Desk-scale preset: `d = 3, n = 32`, random solenoidal data on `L = 2π`,
/// p-grid `{4, 5, 6}`, rescaled to half the smallest threshold.
pub fn desk_scale_config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        d: 3,
        n: 32,
        l: 2.0 * std::f64::consts::PI,
        dt: 0.05,
        t_final: 0.05,
        initial: InitialSpec {
            kind: InitialKind::RandomSolenoidal { band: [1.0, 4.0] },
            amplitude: 1.0,
            scale_to_threshold: Some(0.5),
            bound: RieszBound::Integral,
        },
        forcing: None,
        sample_every: 1,
        p_grid: vec![4.0, 5.0, 6.0],
        snapshot_every: None,
        seed,
    }
}

/// Natural ψ of the initial datum on `[2, b)`.
pub fn natural_psi_spec(b: f64) -> PsiSpec {
    PsiSpec::Natural { fields: Vec::new(), support: Some(Support::half_open(2.0, b)), grid: None }
}

/// Grid on which ψ is resolved for a run: the run's p-grid plus `d`.
pub fn psi_grid(config: &SimulationConfig) -> Vec<f64> {
    crate::psi::merge_points(&config.p_grid, &[config.d as f64])
}

fn common_diagnostics(report: &mut VerificationReport, traj: &Trajectory) {
    let g = traj.run.initial.grid;
    report.note("grid", json!({"d": g.d, "n": g.n, "L": g.l, "dx": g.spacing()}));
    report.note("boundary_leakage", traj.run.initial.boundary_leakage());
    report.note("run", &traj.run.diagnostics);
    if let Some(last) = traj.run.series.l2_values.last() {
        let first = traj.run.series.l2_values[0];
        report.note("final_l2_fraction", if first > 0.0 { last / first } else { 0.0 });
    }
}

/// Exponents where the small-data condition `‖u_0‖_d < 1/(2 C_{7.7}(d, p))` holds.
pub fn threshold_mask(psi: &PsiFunction, u0: &VectorField, bound: RieszBound) -> Result<Vec<bool>> {
    let d = u0.grid.d as u32;
    let norm_d = u0.lp_norm(d as f64)?;
    psi.grid()
        .iter()
        .map(|&p| {
            if p <= d as f64 {
                return Ok(false);
            }
            Ok(norm_d == 0.0 || norm_d.ln() < ln_threshold(d, p, bound)?)
        })
        .collect()
}

/// Hypothesis of the monotone-decay estimate, or the reason it fails.
pub fn thm31_hypothesis(psi: &PsiFunction, u0: &VectorField, bound: RieszBound) -> Result<std::result::Result<PsiFunction, String>> {
    let d = u0.grid.d;
    if d < 3 {
        return Ok(Err(format!("estimates need d ≥ 3, got d = {d}")));
    }
    if !psi.support().contains(d as f64) {
        return Ok(Err(format!("d = {d} ∉ supp ψ")));
    }
    let mask = threshold_mask(psi, u0, bound)?;
    match psi_tilde(psi, &mask) {
        Ok(tilde) => Ok(Ok(tilde)),
        Err(Error::EmptySupport) => Ok(Err(format!(
            "supp ψ̃ = ∅: ‖u_0‖_d = {:e} exceeds every threshold on the grid",
            u0.lp_norm(d as f64)?
        ))),
        Err(e) => Err(e),
    }
}

/// Monotone decay of `‖u(t)‖_p` on `supp ψ̃` and the sup identity at `t = 0`.
pub fn check_thm31(traj: &Trajectory, psi: &PsiFunction, tol: &Tolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Theorem::Thm31, *tol, Some(&traj.config));
    common_diagnostics(&mut report, traj);
    let u0 = &traj.run.initial;
    let tilde = match thm31_hypothesis(psi, u0, traj.config.initial.bound)? {
        Ok(t) => t,
        Err(reason) => return Ok(report.hypothesis_not_met(reason)),
    };
    if let Some(f) = &traj.run.diagnostics.failure {
        return Ok(report.numerical_failure(f.clone()));
    }
    let series = &traj.run.series;
    let mut unsampled = Vec::new();
    for (p, _) in tilde.active() {
        let Ok(col) = series.column(p) else {
            unsampled.push(p);
            continue;
        };
        let scale = col[0];
        let violation = if scale == 0.0 {
            0.0
        } else {
            col.windows(2).map(|w| (w[1] - w[0]) / scale).fold(0.0, f64::max)
        };
        report.margins.push(Margin::violation("monotone", Some(p), violation, tol.monotonicity));
    }
    report.note("supp_psi_tilde", tilde.active().map(|(p, _)| p).collect::<Vec<_>>());
    report.note("unsampled_exponents", unsampled);

    let norms: Vec<f64> = (0..series.len())
        .map(|k| match gls_norm(&traj.profile(k)?, &tilde) {
            Err(Error::DisjointSupports) => Ok(0.0),
            other => other,
        })
        .collect::<Result<_>>()?;
    let at_zero = norms[0];
    let sup = norms.iter().cloned().fold(0.0, f64::max);
    let initial_profile = NormProfile::of_field(u0, psi.grid(), "u0")?;
    let full = gls_norm(&initial_profile, psi)?;
    if full > 0.0 {
        let attained = if at_zero > 0.0 { sup / at_zero } else { f64::INFINITY };
        report.margins.push(Margin::ratio("sup-at-t0", None, attained, 1.0 + tol.equality));
        let identity = sup / full;
        report.margins.push(Margin::ratio("sup-identity", None, (identity - 1.0).abs() + 1.0, 1.0 + tol.equality));
    }
    report.note("gls_norm_initial", full);
    report.note("sup_gls_norm_tilde", sup);
    Ok(report.conclude())
}

/// `ψ_(κ)` for the run's initial datum on the exponents `2 < p < b` of `supp ψ`,
/// with the kept exponents.
fn kappa_weight(psi: &PsiFunction, u0: &VectorField) -> Result<PsiFunction> {
    let d = u0.grid.d as u32;
    let l2 = u0.lp_norm(2.0)?;
    let mask: Vec<bool> = psi.grid().iter().map(|&p| p > 2.0).collect();
    let tilde = psi_tilde(psi, &mask)?;
    let kappas = tilde
        .grid()
        .iter()
        .zip(tilde.values())
        .map(|(&p, v)| match v {
            PsiValue::Finite(_) => kappa(u0.lp_norm(p)?, l2, d, p),
            PsiValue::Excluded => Ok(0.0),
        })
        .collect::<Result<Vec<_>>>()?;
    psi_kappa(&tilde, &kappas, d)
}

fn b_hypothesis(psi: &PsiFunction, u0: &VectorField) -> Option<String> {
    let d = u0.grid.d;
    if d < 3 {
        return Some(format!("estimates need d ≥ 3, got d = {d}"));
    }
    let b = psi.support().hi;
    if !(b > d as f64) {
        return Some(format!("supp ψ must extend past d: b = {b}, d = {d}"));
    }
    None
}

fn bound_hypothesis(psi: &PsiFunction, u0: &VectorField) -> Result<Option<String>> {
    if let Some(reason) = b_hypothesis(psi, u0) {
        return Ok(Some(reason));
    }
    let initial = gls_norm(&NormProfile::of_field(u0, psi.grid(), "u0")?, psi)?;
    if initial > 1.0 + 1e-12 {
        return Ok(Some(format!("ψ does not bound u_0: ‖u_0‖_Gψ = {initial}")));
    }
    Ok(None)
}

/// `sup_t ‖u(t)‖_{G ψ_(κ)} ≤ 1`.
pub fn check_thm41(traj: &Trajectory, psi: &PsiFunction, tol: &Tolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Theorem::Thm41, *tol, Some(&traj.config));
    common_diagnostics(&mut report, traj);
    let u0 = &traj.run.initial;
    if let Some(reason) = bound_hypothesis(psi, u0)? {
        return Ok(report.hypothesis_not_met(reason));
    }
    if let Some(f) = &traj.run.diagnostics.failure {
        return Ok(report.numerical_failure(f.clone()));
    }
    let weight = match kappa_weight(psi, u0) {
        Ok(w) => w,
        Err(Error::EmptySupport) => return Ok(report.hypothesis_not_met("no exponent 2 < p < b on the ψ grid")),
        Err(e) => return Err(e),
    };
    let series = &traj.run.series;
    for (j, &p) in series.p_grid.iter().enumerate() {
        let Some(w) = weight.value(p).finite() else { continue };
        let sup = series.lp_values.iter().map(|row| row[j]).fold(0.0, f64::max);
        report.margins.push(Margin::ratio("gls-kappa", Some(p), sup / w, 1.0 + tol.bound_slack));
    }
    let comparability = weight
        .active()
        .filter_map(|(p, w)| psi.value(p).finite().map(|v| w / v))
        .fold(1.0, f64::max);
    report.note("max_psi_kappa_over_psi", comparability);
    Ok(report.conclude())
}

/// Auxiliary norm flavours exercised by [`check_thm51`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Thm51Flavor {
    /// Sup-weighted with weight `ψ_(κ)`.
    SupKappa,
    /// Normalised `q`-average over the p-grid.
    Average { q: f64 },
}

/// `sup_t |||u(t)||| ≤ |||h_0|||` for each flavour.
pub fn check_thm51(traj: &Trajectory, psi: &PsiFunction, flavors: &[Thm51Flavor], tol: &Tolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Theorem::Thm51, *tol, Some(&traj.config));
    common_diagnostics(&mut report, traj);
    let u0 = &traj.run.initial;
    if let Some(reason) = bound_hypothesis(psi, u0)? {
        return Ok(report.hypothesis_not_met(reason));
    }
    if let Some(f) = &traj.run.diagnostics.failure {
        return Ok(report.numerical_failure(f.clone()));
    }
    let weight = match kappa_weight(psi, u0) {
        Ok(w) => w,
        Err(Error::EmptySupport) => return Ok(report.hypothesis_not_met("no exponent 2 < p < b on the ψ grid")),
        Err(e) => return Err(e),
    };
    // Common support: sampled exponents where ψ_(κ) is active.
    let series = &traj.run.series;
    let support: Vec<(usize, f64, f64)> = series
        .p_grid
        .iter()
        .enumerate()
        .filter_map(|(j, &p)| weight.value(p).finite().map(|w| (j, p, w)))
        .collect();
    if support.is_empty() {
        return Ok(report.hypothesis_not_met("no sampled exponent inside supp ψ_(κ)"));
    }
    let grid: Vec<f64> = support.iter().map(|s| s.1).collect();
    let h0 = NormProfile::new(grid.clone(), support.iter().map(|s| s.2).collect(), "h0")?;
    for flavor in flavors {
        let (name, mri) = match flavor {
            Thm51Flavor::SupKappa => ("mri-sup-kappa", MriFlavor::SupWeighted(weight.clone())),
            Thm51Flavor::Average { q } => ("mri-average", MriFlavor::Average { q: *q }),
        };
        let bound = mri_norm(&h0, &mri)?;
        let sup = (0..series.len())
            .map(|k| {
                let values = support.iter().map(|s| series.lp_values[k][s.0]).collect();
                mri_norm(&NormProfile::new(grid.clone(), values, "u(t)")?, &mri)
            })
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))?;
        let ratio = if bound > 0.0 { sup / bound } else { 0.0 };
        let p = match flavor {
            Thm51Flavor::Average { q } => Some(*q),
            Thm51Flavor::SupKappa => None,
        };
        report.margins.push(Margin::ratio(name, p, ratio, 1.0 + tol.bound_slack));
    }
    Ok(report.conclude())
}

/// Bound of the space-time integral, `ln[(B_{2.1}/p) ‖u_0‖_d^{2p/(p-d)} ‖u_0‖_p^p]`.
pub fn ln_integral_bound(d: u32, p: f64, norm_d: f64, norm_p: f64) -> Result<f64> {
    let df = d as f64;
    Ok((constant_b21(d, p)? / p).ln() + 2.0 * p / (p - df) * norm_d.ln() + p * norm_p.ln())
}

/// Largest deviation between the exponents of `θ^{r(p)}` and those of the integral bound.
pub fn exponent_identity_error(d: u32, p: f64) -> Result<f64> {
    let df = d as f64;
    let r = r_exponent(d, p)?;
    let on_d = (r * 2.0 / (p - df + 2.0) - 2.0 * p / (p - df)).abs();
    let on_p = (r * (p - df) / (p - df + 2.0) - p).abs();
    Ok(on_d.max(on_p))
}

/// Finite-horizon `∫ ‖u‖_p^{r(p)} dt` against its bound and the mixed norm against `θ_{d,ψ}`.
pub fn check_thm61(traj: &Trajectory, psi: &PsiFunction, tol: &Tolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Theorem::Thm61, *tol, Some(&traj.config));
    common_diagnostics(&mut report, traj);
    let u0 = &traj.run.initial;
    let d = traj.d();
    if let Some(reason) = b_hypothesis(psi, u0) {
        return Ok(report.hypothesis_not_met(reason));
    }
    if !psi.support().contains(d as f64) || psi.value(d as f64).finite().is_none() {
        return Ok(report.hypothesis_not_met(format!("d = {d} ∉ supp ψ")));
    }
    if let Some(f) = &traj.run.diagnostics.failure {
        return Ok(report.numerical_failure(f.clone()));
    }
    let series = &traj.run.series;
    let b = psi.support().hi;
    let norm_d = u0.lp_norm(d as f64)?;
    let mut tails = BTreeMap::new();
    for &p in series.p_grid.iter().filter(|&&p| p > d as f64 && p < b) {
        report.margins.push(Margin::violation("exponent-identity", Some(p), exponent_identity_error(d, p)?, tol.exponent));
        let norm_p = u0.lp_norm(p)?;
        if norm_d == 0.0 || norm_p == 0.0 {
            report.margins.push(Margin::ratio("integral", Some(p), 0.0, 1.0 + tol.bound_slack));
            continue;
        }
        let r = r_exponent(d, p)?;
        let ln_integral = series.ln_time_integral(p, r)?;
        let ratio = (ln_integral - ln_integral_bound(d, p, norm_d, norm_p)?).exp();
        report.margins.push(Margin::ratio("integral", Some(p), ratio, 1.0 + tol.bound_slack));
        if let PsiValue::Finite(_) = psi.value(p) {
            let ln_mixed = ln_integral / r;
            let mixed_ratio = (ln_mixed - theta(psi, d, p)?.ln()).exp();
            report.margins.push(Margin::ratio("mixed-theta", Some(p), mixed_ratio, 1.0 + tol.bound_slack));
        }
        tails.insert(format!("{p}"), tail_fraction(&series.times, &series.column(p)?, r, ln_integral));
    }
    report.note("tail_fraction", tails);
    report.note("horizon", series.times.last().copied().unwrap_or(0.0));
    Ok(report.conclude())
}

/// Estimated share of `∫_0^∞` beyond the last sample, extrapolating the final
/// exponential decay rate of the sampled norm.
fn tail_fraction(times: &[f64], col: &[f64], r: f64, ln_integral: f64) -> Option<f64> {
    let k = col.len();
    if k < 2 || col[k - 1] <= 0.0 || col[k - 2] <= 0.0 {
        return None;
    }
    let rate = -(col[k - 1] / col[k - 2]).ln() / (times[k - 1] - times[k - 2]);
    if !(rate > 0.0) {
        return None;
    }
    let ln_tail = r * col[k - 1].ln() - (r * rate).ln();
    Some((ln_tail - log_add(ln_integral, ln_tail)).exp())
}

/// Random-sample and trajectory checks of the auxiliary inequalities.
pub fn check_inequalities(traj: Option<&Trajectory>, seed: u64, fields: usize, tol: &Tolerances) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Theorem::Inequalities, *tol, traj.map(|t| &t.config));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Lebesgue interpolation on random band-limited fields.
    let grid = Grid::new(3, 16, 2.0 * std::f64::consts::PI)?;
    let exps = [2.0, 2.5, 3.0, 4.0, 6.0, 8.0];
    let mut worst_interp: f64 = 0.0;
    for i in 0..fields {
        let kmax = rng.gen_range(1.5..5.0);
        let amp = 10f64.powf(rng.gen_range(-3.0..3.0));
        let u = make_initial(&InitialKind::RandomSolenoidal { band: [1.0, kmax] }, grid, amp, seed.wrapping_add(i as u64))?;
        let mut idx = [0usize; 3];
        while !(idx[0] < idx[1] && idx[1] < idx[2]) {
            idx = [0, 0, 0].map(|_| rng.gen_range(0..exps.len()));
            idx.sort_unstable();
        }
        let [a, p, b] = idx.map(|j| exps[j]);
        let z = interpolation_z(u.lp_norm(a)?, u.lp_norm(b)?, a, b, p)?;
        worst_interp = worst_interp.max(u.lp_norm(p)? / z);
    }
    report.margins.push(Margin::ratio("interpolation", None, worst_interp, 1.0 + 1e-12));

    // Elementary inequality on a log-uniform (v, w) cloud.
    for p in [4.0, 5.0, 6.0, 10.0] {
        let worst = (0..2000)
            .map(|_| {
                let (lv, lw) = (rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
                ln_elementary_inequality_margin(3, p, lv, lw).map(|m| (-m).exp())
            })
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))?;
        report.margins.push(Margin::ratio("elementary", Some(p), worst, 1.0));
    }

    if let Some(traj) = traj {
        trajectory_inequalities(&mut report, traj, tol)?;
    }
    Ok(report.conclude())
}

/// Energy-type inequalities on the sampled trajectory: the product form of
/// the elementary inequality, and the discrete-time differential inequality.
fn trajectory_inequalities(report: &mut VerificationReport, traj: &Trajectory, tol: &Tolerances) -> Result<()> {
    let d = traj.d();
    if d < 3 {
        return Ok(());
    }
    let df = d as f64;
    let s = &traj.run.series;
    let bound = traj.config.initial.bound;
    for (j, &p) in s.p_grid.iter().enumerate().filter(|(_, &p)| p > df) {
        let e = p * (p - df + 2.0) / (p - df);
        let mut worst_product: f64 = 0.0;
        for k in 0..s.len() {
            let (a, Some(root)) = (s.lp_values[k][j], s.w_roots[k][j]) else { continue };
            if a <= 0.0 || root <= 0.0 {
                continue;
            }
            let ln_v = (1.0 + (p - df) / 2.0) * a.ln();
            let ln_w = (p + df) / 2.0 * root.ln();
            worst_product = worst_product.max((-ln_elementary_inequality_margin(d, p, ln_v, ln_w)?).exp());
        }
        report.margins.push(Margin::ratio("energy-product", Some(p), worst_product, 1.0 + tol.bound_slack));

        let ln_c77 = ln_constant_c77(d, p, bound)?;
        let mut worst_diff = f64::NEG_INFINITY;
        for k in 0..s.len().saturating_sub(1) {
            let (a0, a1) = (s.lp_values[k][j], s.lp_values[k + 1][j]);
            let (Some(w0), Some(w1)) = (s.w_roots[k][j], s.w_roots[k + 1][j]) else { continue };
            if a0 <= 0.0 {
                continue;
            }
            let dt = s.times[k + 1] - s.times[k];
            // Everything divided by a0^p.
            let derivative = ((a1 / a0).powf(p) - 1.0) / (p * dt);
            let dissipation = 0.25 * ((w0 / a0).powf(p) + (w1 / a0).powf(p));
            let lhs = derivative + dissipation;
            let ln_rhs = ln_c77 + e * (0.5 * (a0 + a1)).ln() - p * a0.ln();
            worst_diff = worst_diff.max(lhs / ln_rhs.exp());
        }
        if worst_diff.is_finite() {
            report.margins.push(Margin::ratio("differential", Some(p), worst_diff, 1.0 + tol.bound_slack));
        }
    }
    Ok(())
}

/// Runs one check end to end: resolves ψ, screens the hypothesis before
/// simulating where possible, simulates, and assembles the report.
pub fn verify(theorem: Theorem, config: &SimulationConfig, psi: &PsiSpec, tol: &Tolerances) -> Result<VerificationReport> {
    config.validate()?;
    if theorem == Theorem::Inequalities {
        let traj = Trajectory::simulate(config)?;
        return check_inequalities(Some(&traj), config.seed, 100, tol);
    }
    let u0 = config.initial_field()?;
    let psi_fn = psi.resolve(Some(&u0), &psi_grid(config))?;
    if theorem == Theorem::Thm31 {
        if let Err(reason) = thm31_hypothesis(&psi_fn, &u0, config.initial.bound)? {
            let report = VerificationReport::new(theorem, *tol, Some(config));
            return Ok(report.hypothesis_not_met(reason));
        }
    }
    let traj = Trajectory::simulate(config)?;
    check_on(theorem, &traj, &psi_fn, tol)
}

/// Dispatches to the check for `theorem` on an existing trajectory.
pub fn check_on(theorem: Theorem, traj: &Trajectory, psi: &PsiFunction, tol: &Tolerances) -> Result<VerificationReport> {
    match theorem {
        Theorem::Thm31 => check_thm31(traj, psi, tol),
        Theorem::Thm41 => check_thm41(traj, psi, tol),
        Theorem::Thm51 => check_thm51(traj, psi, &[Thm51Flavor::SupKappa, Thm51Flavor::Average { q: 2.0 }], tol),
        Theorem::Thm61 => check_thm61(traj, psi, tol),
        Theorem::Inequalities => check_inequalities(Some(traj), traj.config.seed, 100, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> SimulationConfig {
        SimulationConfig { n: 16, p_grid: vec![2.0, 4.0, 5.0, 6.0], ..desk_scale_config(seed) }
    }

    fn psi_on(traj: &Trajectory, b: f64) -> PsiFunction {
        natural_psi_spec(b).resolve(Some(&traj.run.initial), &psi_grid(&traj.config)).unwrap()
    }

    #[test]
    fn small_data_run_passes_everything() {
        let traj = Trajectory::simulate(&small_config(1)).unwrap();
        let tol = Tolerances::default();
        let psi7 = psi_on(&traj, 7.0);
        let psi6 = psi_on(&traj, 6.0);
        for report in [
            check_thm31(&traj, &psi7, &tol).unwrap(),
            check_thm41(&traj, &psi6, &tol).unwrap(),
            check_thm51(&traj, &psi6, &[Thm51Flavor::SupKappa, Thm51Flavor::Average { q: 2.0 }], &tol).unwrap(),
            check_thm61(&traj, &psi7, &tol).unwrap(),
        ] {
            assert!(report.pass, "{}", report.to_json());
        }
    }

    #[test]
    fn reduction_matches_thm41() {
        let traj = Trajectory::simulate(&small_config(2)).unwrap();
        let tol = Tolerances::default();
        let psi = psi_on(&traj, 6.0);
        let a = check_thm41(&traj, &psi, &tol).unwrap();
        let b = check_thm51(&traj, &psi, &[Thm51Flavor::SupKappa], &tol).unwrap();
        assert_eq!(a.pass, b.pass);
        let sup41 = a.max_ratio("gls-kappa").unwrap();
        let sup51 = b.max_ratio("mri-sup-kappa").unwrap();
        assert!((sup41 - sup51).abs() < 1e-12);
    }

    #[test]
    fn large_data_is_gated() {
        let mut cfg = small_config(0);
        cfg.initial.scale_to_threshold = None;
        let report = verify(Theorem::Thm31, &cfg, &natural_psi_spec(7.0), &Tolerances::default()).unwrap();
        assert_eq!(report.status, Status::HypothesisNotMet);
        assert!(!report.pass);
    }

    #[test]
    fn support_must_pass_d() {
        let traj = Trajectory::simulate(&SimulationConfig { t_final: 0.0, ..small_config(0) }).unwrap();
        let psi = PsiFunction::from_table(Support::half_open(2.0, 3.0), vec![2.0, 2.5], vec![1.0, 1.0]).unwrap();
        let tol = Tolerances::default();
        assert_eq!(check_thm41(&traj, &psi, &tol).unwrap().status, Status::HypothesisNotMet);
        assert_eq!(check_thm61(&traj, &psi, &tol).unwrap().status, Status::HypothesisNotMet);
        assert_eq!(check_thm31(&traj, &psi, &tol).unwrap().status, Status::HypothesisNotMet);
    }

    #[test]
    fn zero_data_is_trivial() {
        let mut cfg = small_config(0);
        cfg.initial = InitialSpec { kind: InitialKind::Zero, amplitude: 1.0, scale_to_threshold: None, bound: RieszBound::Integral };
        cfg.t_final = 0.2;
        let traj = Trajectory::simulate(&cfg).unwrap();
        let psi = PsiFunction::from_table(Support::half_open(2.0, 7.0), psi_grid(&cfg), vec![1.0; 5]).unwrap();
        let report = check_thm31(&traj, &psi, &Tolerances::default()).unwrap();
        assert!(report.max_violation("monotone").unwrap() == 0.0);
        let report = check_thm61(&traj, &psi, &Tolerances::default()).unwrap();
        assert!(report.pass, "{}", report.to_json());
    }

    #[test]
    fn exponent_identity_holds() {
        for p in [3.5, 4.0, 5.0, 6.0, 11.0] {
            assert!(exponent_identity_error(3, p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn random_inequalities_hold() {
        let report = check_inequalities(None, 5, 20, &Tolerances::default()).unwrap();
        assert!(report.pass, "{}", report.to_json());
    }

    #[test]
    fn report_schema() {
        let report = check_inequalities(None, 1, 2, &Tolerances::default()).unwrap();
        let v: Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in ["theorem", "pass", "tolerances", "margins", "diagnostics", "config"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(Theorem::parse("thm61").unwrap(), Theorem::Thm61);
        assert!(Theorem::parse("thm99").is_err());
    }
}
