//! ψ-functions and the rearrangement-invariant norms built from the moment
//! profile `p ↦ ‖f‖_p`: Grand Lebesgue norms, natural functions, the
//! interpolation bound `Z_{a,b}`, the dilation-invariant functional `κ_p`,
//! and the derived weights used by the global estimates.
//!
//! ψ-functions live on finite p-grids. Points outside the support (or cut out
//! of it) carry [`PsiValue::Excluded`], which contributes nothing to a
//! supremum (the `C/∞ = 0` convention).

use serde::{Deserialize, Serialize};

use std::path::PathBuf;

use crate::constants::{constant_b21, r_exponent};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::snapshot;

/// Number of grid points used when a ψ-function is built without an explicit grid.
pub const DEFAULT_GRID_POINTS: usize = 33;

/// Relative tolerance used to identify two p-samples.
const SAME_P: f64 = 1e-12;

fn same_p(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_P * a.abs().max(b.abs()).max(1.0)
}

/// Exponent interval with open or closed ends; `hi` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Support {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_closed { p >= self.lo * (1.0 - SAME_P) } else { p > self.lo };
        let below = if self.hi_closed { p <= self.hi * (1.0 + SAME_P) } else { p < self.hi };
        above && below
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo >= 1.0) || !(self.hi >= self.lo) || (self.hi == self.lo && !(self.lo_closed && self.hi_closed)) {
            return Err(Error::domain("psi support", format!("({}, {}) is not a valid exponent interval", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// `n` log-spaced points covering `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..n).map(|j| lo * (ratio * j as f64 / (n - 1) as f64).exp()).collect()
}

/// [`DEFAULT_GRID_POINTS`] log-spaced points inside a finite support; open
/// ends are stepped over by one grid spacing.
pub fn default_grid(support: &Support) -> Result<Vec<f64>> {
    if !support.hi.is_finite() {
        return Err(Error::domain("default_grid", "support must be bounded"));
    }
    let n = DEFAULT_GRID_POINTS;
    let lo_skip = usize::from(!support.lo_closed);
    let hi_skip = usize::from(!support.hi_closed);
    let full = log_spaced(support.lo, support.hi, n + lo_skip + hi_skip);
    Ok(full[lo_skip..full.len() - hi_skip].to_vec())
}

/// Merges extra exponents into a grid, keeping it strictly increasing.
pub fn merge_points(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = grid.iter().chain(extra).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
    all.dedup_by(|a, b| same_p(*a, *b));
    all
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("p-grid", "empty grid"));
    }
    if grid.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
        return Err(Error::domain("p-grid", "exponents must be finite and ≥ 1"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0]) || same_p(w[0], w[1])) {
        return Err(Error::domain("p-grid", "grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PsiValue {
    Finite(f64),
    Excluded,
}

impl PsiValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PsiValue::Finite(v) => Some(v),
            PsiValue::Excluded => None,
        }
    }
}

/// A positive weight `p ↦ ψ(p)` sampled on a finite p-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiFunction {
    support: Support,
    grid: Vec<f64>,
    values: Vec<PsiValue>,
    warnings: Vec<String>,
}

impl PsiFunction {
    /// Builds ψ from explicit samples. Samples outside `support` become excluded.
    pub fn from_table(support: Support, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Misaligned(format!("{} grid points but {} values", grid.len(), values.len())));
        }
        let values = values
            .into_iter()
            .zip(&grid)
            .map(|(v, &p)| {
                if !support.contains(p) {
                    Ok(PsiValue::Excluded)
                } else if v > 0.0 && v.is_finite() {
                    Ok(PsiValue::Finite(v))
                } else {
                    Err(Error::domain("psi", format!("ψ({p}) = {v} is not a positive number")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(support, grid, values)
    }

    fn from_values(support: Support, grid: Vec<f64>, values: Vec<PsiValue>) -> Result<Self> {
        support.validate()?;
        check_grid(&grid)?;
        let mut psi = Self { support, grid, values, warnings: Vec::new() };
        psi.warnings = psi.log_convexity_warnings();
        Ok(psi)
    }

    /// Degenerate `ψ_r`: one at `r`, excluded everywhere else.
    pub fn degenerate(r: f64) -> Result<Self> {
        Self::degenerate_on(r, &[r])
    }

    /// Degenerate `ψ_r` laid out on a wider grid, which must contain `r`.
    pub fn degenerate_on(r: f64, grid: &[f64]) -> Result<Self> {
        let grid = merge_points(grid, &[r]);
        let values = grid
            .iter()
            .map(|&p| if same_p(p, r) { PsiValue::Finite(1.0) } else { PsiValue::Excluded })
            .collect();
        Self::from_values(Support::closed(r, r), grid, values)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[PsiValue] {
        &self.values
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `(p, ψ(p))` over the non-excluded grid points.
    pub fn active(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().zip(&self.values).filter_map(|(&p, v)| v.finite().map(|v| (p, v)))
    }

    /// ψ at an arbitrary exponent: the stored sample on grid points, the
    /// log-linear interpolant in `1/p` between two active neighbours, and
    /// `Excluded` anywhere else.
    pub fn value(&self, p: f64) -> PsiValue {
        if !self.support.contains(p) {
            return PsiValue::Excluded;
        }
        if let Some(j) = self.grid.iter().position(|&q| same_p(q, p)) {
            return self.values[j];
        }
        let upper = match self.grid.iter().position(|&q| q > p) {
            Some(j) if j > 0 => j,
            _ => return PsiValue::Excluded,
        };
        match (self.values[upper - 1], self.values[upper]) {
            (PsiValue::Finite(a), PsiValue::Finite(b)) => {
                let (pa, pb) = (self.grid[upper - 1], self.grid[upper]);
                let s = (1.0 / pa - 1.0 / p) / (1.0 / pa - 1.0 / pb);
                PsiValue::Finite(((1.0 - s) * a.ln() + s * b.ln()).exp())
            }
            _ => PsiValue::Excluded,
        }
    }

    fn log_convexity_warnings(&self) -> Vec<String> {
        let active: Vec<(f64, f64)> = self.active().collect();
        active
            .windows(3)
            .filter_map(|w| {
                let [(p0, v0), (p1, v1), (p2, v2)] = [w[0], w[1], w[2]];
                let chord = ((p2 - p1) * v0.ln() + (p1 - p0) * v2.ln()) / (p2 - p0);
                let excess = v1.ln() - chord;
                (excess > 1e-9).then(|| format!("log-convexity violated at p = {p1} by {excess:.3e}"))
            })
            .collect()
    }
}

/// Moment profile `p ↦ ‖f‖_p` of one function on a p-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub source: String,
}

impl NormProfile {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::Misaligned(format!("{} grid points but {} values", grid.len(), values.len())));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain("norm profile", "norms must be finite and nonnegative"));
        }
        Ok(Self { grid, values, source: source.into() })
    }

    /// Euclidean-magnitude profile of a field.
    pub fn of_field(u: &VectorField, grid: &[f64], source: impl Into<String>) -> Result<Self> {
        let values = grid.iter().map(|&p| u.lp_norm(p)).collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), values, source)
    }

    /// Profile of one component of a field.
    pub fn of_component(u: &VectorField, c: usize, grid: &[f64], source: impl Into<String>) -> Result<Self> {
        let values = grid.iter().map(|&p| u.component_lp_norm(c, p)).collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), values, source)
    }

    pub fn at(&self, p: f64) -> Option<f64> {
        self.grid.iter().position(|&q| same_p(q, p)).map(|j| self.values[j])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Largest violation of convexity of `ln ‖f‖_p` as a function of `1/p`
    /// over consecutive triples with positive norms; `≤ 0` when convex.
    pub fn lyapunov_excess(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .grid
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v > 0.0)
            .map(|(&p, &v)| (1.0 / p, v.ln()))
            .collect();
        pts.windows(3)
            .map(|w| {
                // 1/p decreases along the grid; interpolate in that variable.
                let [(s0, y0), (s1, y1), (s2, y2)] = [w[0], w[1], w[2]];
                let chord = ((s1 - s2) * y0 + (s0 - s1) * y2) / (s0 - s2);
                y1 - chord
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `‖f‖_{G(ψ)} = sup_p ‖f‖_p / ψ(p)` over profile points where ψ is active.
pub fn gls_norm(profile: &NormProfile, psi: &PsiFunction) -> Result<f64> {
    let mut shared = false;
    let mut sup: f64 = 0.0;
    for (&p, &h) in profile.grid.iter().zip(&profile.values) {
        if let PsiValue::Finite(w) = psi.value(p) {
            shared = true;
            sup = sup.max(h / w);
        }
    }
    if shared {
        Ok(sup)
    } else {
        Err(Error::DisjointSupports)
    }
}

/// Component-wise vector convention: the largest per-component GLS norm.
pub fn gls_norm_componentwise(u: &VectorField, psi: &PsiFunction) -> Result<f64> {
    let grid: Vec<f64> = psi.active().map(|(p, _)| p).collect();
    if grid.is_empty() {
        return Err(Error::DisjointSupports);
    }
    (0..u.comps()).try_fold(0.0f64, |acc, c| {
        let profile = NormProfile::of_component(u, c, &grid, format!("component {c}"))?;
        Ok(acc.max(gls_norm(&profile, psi)?))
    })
}

/// Natural function `ψ(p) = max_α ‖v_α‖_p` of a family of profiles sharing one grid.
pub fn natural_psi(profiles: &[NormProfile], support: Option<Support>) -> Result<PsiFunction> {
    let first = profiles.first().ok_or_else(|| Error::domain("natural_psi", "no profiles given"))?;
    for other in &profiles[1..] {
        if other.grid.len() != first.grid.len() || other.grid.iter().zip(&first.grid).any(|(a, b)| !same_p(*a, *b)) {
            return Err(Error::Misaligned("natural_psi profiles use different grids".into()));
        }
    }
    let values: Vec<f64> = (0..first.grid.len())
        .map(|j| profiles.iter().map(|pr| pr.values[j]).fold(0.0, f64::max))
        .collect();
    if let Some(j) = values.iter().position(|&v| v == 0.0) {
        return Err(Error::domain("natural_psi", format!("all profiles vanish at p = {}", first.grid[j])));
    }
    let support = support.unwrap_or_else(|| Support::closed(first.grid[0], *first.grid.last().expect("nonempty")));
    PsiFunction::from_table(support, first.grid.clone(), values)
}

/// `Z_{a,b}(x, y; p) = x^{a(b-p)/(p(b-a))} y^{b(p-a)/(p(b-a))}`.
pub fn interpolation_z(x: f64, y: f64, a: f64, b: f64, p: f64) -> Result<f64> {
    if !(a > 1.0 && b > a && b.is_finite()) {
        return Err(Error::domain("interpolation_z", format!("need 1 < a < b < ∞, got a = {a}, b = {b}")));
    }
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain("interpolation_z", "x and y must be positive"));
    }
    if !(p >= a && p <= b) {
        return Err(Error::domain("interpolation_z", format!("p = {p} outside [{a}, {b}]")));
    }
    let ex = a * (b - p) / (p * (b - a));
    let ey = b * (p - a) / (p * (b - a));
    Ok((ex * x.ln() + ey * y.ln()).exp())
}

/// `ψ_b(p) = Z_{2,b}(y_2, y_b; p)` on the support `[2, b)`.
pub fn psi_from_lab(y2: f64, yb: f64, b: f64, grid: Option<&[f64]>) -> Result<PsiFunction> {
    if !(b > 2.0 && b.is_finite()) {
        return Err(Error::domain("psi_from_lab", format!("b = {b} must be finite and exceed 2")));
    }
    let support = Support::half_open(2.0, b);
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(&support)?,
    };
    let values = grid
        .iter()
        .map(|&p| if support.contains(p) { interpolation_z(y2, yb, 2.0, b, p) } else { Ok(1.0) })
        .collect::<Result<Vec<_>>>()?;
    PsiFunction::from_table(support, grid, values)
}

/// `κ_p(u) = ‖u‖_p^{p(d-2)/(d(p-2))} ‖u‖_2^{2(p-d)/(d(p-2))}`.
pub fn kappa(lp: f64, l2: f64, d: u32, p: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::domain("kappa", format!("p = {p} must exceed 2")));
    }
    if lp == 0.0 && l2 == 0.0 {
        return Ok(0.0);
    }
    if !(lp > 0.0 && l2 > 0.0) {
        return Err(Error::domain("kappa", "norms must be positive"));
    }
    let df = d as f64;
    let e_p = p * (df - 2.0) / (df * (p - 2.0));
    let e_2 = 2.0 * (p - df) / (df * (p - 2.0));
    Ok((e_p * lp.ln() + e_2 * l2.ln()).exp())
}

/// `max(1, κ_p^{2d/p})`.
fn kappa_factor(kappa: f64, d: u32, p: f64) -> Result<f64> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain("psi_kappa", format!("κ = {kappa} must be finite and nonnegative")));
    }
    Ok(kappa.powf(2.0 * d as f64 / p).max(1.0))
}

fn check_aligned(psi: &PsiFunction, len: usize) -> Result<()> {
    if psi.grid.len() != len {
        return Err(Error::Misaligned(format!("ψ has {} grid points, got {len} values", psi.grid.len())));
    }
    Ok(())
}

/// `ψ̃`: ψ restricted to the exponents where `mask` holds.
pub fn psi_tilde(psi: &PsiFunction, mask: &[bool]) -> Result<PsiFunction> {
    check_aligned(psi, mask.len())?;
    let values: Vec<PsiValue> = psi
        .values
        .iter()
        .zip(mask)
        .map(|(v, &keep)| if keep { *v } else { PsiValue::Excluded })
        .collect();
    if values.iter().all(|v| v.finite().is_none()) {
        return Err(Error::EmptySupport);
    }
    PsiFunction::from_values(psi.support, psi.grid.clone(), values)
}

/// `ψ_(κ)(p) = ψ(p) · max(1, κ_p^{2d/p}(u_0))`, with `kappa[j]` at `psi.grid()[j]`.
pub fn psi_kappa(psi: &PsiFunction, kappa: &[f64], d: u32) -> Result<PsiFunction> {
    check_aligned(psi, kappa.len())?;
    let values = psi
        .grid
        .iter()
        .zip(&psi.values)
        .zip(kappa)
        .map(|((&p, v), &k)| match v {
            PsiValue::Finite(w) => Ok(PsiValue::Finite(w * kappa_factor(k, d, p)?)),
            PsiValue::Excluded => Ok(PsiValue::Excluded),
        })
        .collect::<Result<Vec<_>>>()?;
    PsiFunction::from_values(psi.support, psi.grid.clone(), values)
}

/// `h_0(p) = max(1, κ_p^{2d/p}) ψ(p)` as a profile over the active points.
pub fn h_zero(psi: &PsiFunction, kappa: &[f64], d: u32) -> Result<NormProfile> {
    let weighted = psi_kappa(psi, kappa, d)?;
    let (grid, values): (Vec<f64>, Vec<f64>) = weighted.active().unzip();
    NormProfile::new(grid, values, "h0")
}

/// Representative auxiliary norms on moment profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum MriFlavor {
    /// `sup_p h(p) / w(p)`.
    SupWeighted(PsiFunction),
    /// `(∫ h(p)^q dμ)^{1/q}` for the uniform probability measure on the grid span.
    Average { q: f64 },
}

/// Moment rearrangement-invariant norm of a profile.
pub fn mri_norm(h: &NormProfile, flavor: &MriFlavor) -> Result<f64> {
    match flavor {
        MriFlavor::SupWeighted(weight) => gls_norm(h, weight),
        MriFlavor::Average { q } => {
            if !(*q >= 1.0 && q.is_finite()) {
                return Err(Error::domain("mri_norm", format!("q = {q} must be ≥ 1")));
            }
            let max = h.values.iter().cloned().fold(0.0, f64::max);
            if max == 0.0 {
                return Ok(0.0);
            }
            if h.grid.len() == 1 {
                return Ok(h.values[0]);
            }
            let span = h.grid.last().expect("nonempty") - h.grid[0];
            let integral: f64 = h
                .grid
                .windows(2)
                .zip(h.values.windows(2))
                .map(|(p, v)| 0.5 * (p[1] - p[0]) * ((v[0] / max).powf(*q) + (v[1] / max).powf(*q)))
                .sum();
            Ok(max * (integral / span).powf(1.0 / q))
        }
    }
}

/// `θ_{d,ψ}(p) = [B_{2.1}(d,p)/p]^{1/r(p)} ψ(d)^{2/(p-d+2)} ψ(p)^{(p-d)/(p-d+2)}`.
pub fn theta(psi: &PsiFunction, d: u32, p: f64) -> Result<f64> {
    let df = d as f64;
    let at_d = psi
        .value(df)
        .finite()
        .ok_or_else(|| Error::domain("theta", format!("d = {d} ∉ supp ψ")))?;
    let at_p = psi
        .value(p)
        .finite()
        .ok_or_else(|| Error::domain("theta", format!("p = {p} ∉ supp ψ")))?;
    let r = r_exponent(d, p)?;
    let b21 = constant_b21(d, p)?;
    let ln = (b21 / p).ln() / r + 2.0 / (p - df + 2.0) * at_d.ln() + (p - df) / (p - df + 2.0) * at_p.ln();
    Ok(ln.exp())
}

/// Serialisable description of a ψ-function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiSpec {
    /// `ψ_r`, recovering the classical `L_r` norm.
    Degenerate { r: f64 },
    /// Natural function of the listed snapshots; an empty list means the
    /// initial datum of the run the ψ-function is used with.
    Natural {
        #[serde(default)]
        fields: Vec<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Support>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
    },
    /// `ψ_b = Z_{2,b}(y_2, y_b; ·)` on `[2, b)`.
    Interpolation {
        y2: f64,
        yb: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
    },
    Table { support: Support, grid: Vec<f64>, values: Vec<f64> },
}

impl PsiSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("psi spec: {e}")))
    }

    /// Builds the ψ-function. `datum` stands in for an empty natural field
    /// list; `fallback_grid` is used where the spec names no grid.
    pub fn resolve(&self, datum: Option<&VectorField>, fallback_grid: &[f64]) -> Result<PsiFunction> {
        match self {
            PsiSpec::Degenerate { r } => PsiFunction::degenerate_on(*r, fallback_grid),
            PsiSpec::Interpolation { y2, yb, b, grid } => psi_from_lab(*y2, *yb, *b, grid.as_deref()),
            PsiSpec::Table { support, grid, values } => PsiFunction::from_table(*support, grid.clone(), values.clone()),
            PsiSpec::Natural { fields, support, grid } => {
                let grid = match (grid, support) {
                    (Some(g), _) => g.clone(),
                    (None, Some(s)) if fallback_grid.is_empty() => default_grid(s)?,
                    (None, _) => fallback_grid.to_vec(),
                };
                let loaded;
                let members: Vec<&VectorField> = if fields.is_empty() {
                    vec![datum.ok_or_else(|| Error::Config("natural psi needs fields or an initial datum".into()))?]
                } else {
                    loaded = fields.iter().map(|path| snapshot::read(path)).collect::<Result<Vec<_>>>()?;
                    loaded.iter().collect()
                };
                let profiles = members
                    .iter()
                    .map(|u| NormProfile::of_field(u, &grid, "natural"))
                    .collect::<Result<Vec<_>>>()?;
                natural_psi(&profiles, *support)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(grid: &[f64], values: &[f64]) -> NormProfile {
        NormProfile::new(grid.to_vec(), values.to_vec(), "test").unwrap()
    }

    #[test]
    fn grids() {
        let g = log_spaced(2.0, 8.0, 3);
        assert!((g[1] - 4.0).abs() < 1e-14);
        let s = Support::half_open(2.0, 6.0);
        let g = default_grid(&s).unwrap();
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert_eq!(g[0], 2.0);
        assert!(*g.last().unwrap() < 6.0);
        let g = default_grid(&Support::open(2.0, 6.0)).unwrap();
        assert!(g[0] > 2.0);
        assert_eq!(merge_points(&[2.0, 4.0], &[3.0, 4.0]), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn degenerate_recovers_lebesgue_norm() {
        let grid = [2.0, 3.0, 4.0, 6.0];
        let pr = profile(&grid, &[1.5, 2.5, 3.5, 4.5]);
        let psi = PsiFunction::degenerate_on(4.0, &grid).unwrap();
        assert_eq!(gls_norm(&pr, &psi).unwrap(), 3.5);
        let psi = PsiFunction::degenerate(3.0).unwrap();
        assert_eq!(gls_norm(&pr, &psi).unwrap(), 2.5);
        let psi = PsiFunction::degenerate(5.0).unwrap();
        assert_eq!(gls_norm(&pr, &psi), Err(Error::DisjointSupports));
    }

    #[test]
    fn natural_function_normalises() {
        let grid = [2.0, 3.0, 5.0];
        let a = profile(&grid, &[1.0, 4.0, 2.0]);
        let b = profile(&grid, &[3.0, 1.0, 2.5]);
        let psi = natural_psi(&[a.clone()], None).unwrap();
        assert_eq!(psi.active().map(|(_, v)| v).collect::<Vec<_>>(), a.values);
        assert_eq!(gls_norm(&a, &psi).unwrap(), 1.0);
        let psi = natural_psi(&[a.clone(), b.clone()], None).unwrap();
        assert_eq!(psi.active().map(|(_, v)| v).collect::<Vec<_>>(), vec![3.0, 4.0, 2.5]);
        assert!(gls_norm(&a, &psi).unwrap() <= 1.0);
        assert!(gls_norm(&b, &psi).unwrap() <= 1.0);
        let zero = profile(&grid, &[0.0; 3]);
        assert!(natural_psi(&[zero.clone()], None).is_err());
        assert_eq!(gls_norm(&zero, &psi).unwrap(), 0.0);
        let other = profile(&[2.0, 3.0, 4.0], &[1.0; 3]);
        assert!(natural_psi(&[a, other], None).is_err());
        assert!(natural_psi(&[], None).is_err());
    }

    #[test]
    fn excluded_values_and_interpolation() {
        let psi = PsiFunction::from_table(Support::half_open(2.0, 6.0), vec![2.0, 4.0, 6.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(psi.value(6.0), PsiValue::Excluded);
        assert_eq!(psi.value(1.5), PsiValue::Excluded);
        assert_eq!(psi.value(4.0), PsiValue::Finite(2.0));
        // log ψ affine in 1/p between 2 and 4: at p = 8/3 the weight is 1/2.
        let mid = psi.value(8.0 / 3.0).finite().unwrap();
        assert!((mid - 2f64.sqrt()).abs() < 1e-14);
        assert!(PsiFunction::from_table(Support::closed(2.0, 4.0), vec![2.0, 4.0], vec![1.0, -1.0]).is_err());
        assert!(PsiFunction::from_table(Support::closed(2.0, 4.0), vec![4.0, 2.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn log_convexity_is_warned_not_enforced() {
        let convex = PsiFunction::from_table(Support::closed(2.0, 4.0), vec![2.0, 3.0, 4.0], vec![4.0, 1.0, 4.0]).unwrap();
        assert!(convex.warnings().is_empty());
        let concave = PsiFunction::from_table(Support::closed(2.0, 4.0), vec![2.0, 3.0, 4.0], vec![1.0, 4.0, 1.0]).unwrap();
        assert_eq!(concave.warnings().len(), 1);
    }

    #[test]
    fn z_function() {
        assert!((interpolation_z(3.0, 7.0, 2.0, 6.0, 2.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((interpolation_z(3.0, 7.0, 2.0, 6.0, 6.0).unwrap() - 7.0).abs() < 1e-14);
        for p in [2.5, 3.0, 5.5] {
            assert!((interpolation_z(1.7, 1.7, 2.0, 6.0, p).unwrap() - 1.7).abs() < 1e-14);
        }
        assert!(interpolation_z(1.0, 1.0, 2.0, 6.0, 7.0).is_err());
        assert!(interpolation_z(1.0, 1.0, 1.0, 6.0, 3.0).is_err());
    }

    #[test]
    fn lab_psi_is_log_affine_in_reciprocal_p() {
        let psi = psi_from_lab(2.0, 0.5, 8.0, None).unwrap();
        assert_eq!(psi.value(2.0), PsiValue::Finite(2.0));
        let pts: Vec<(f64, f64)> = psi.active().map(|(p, v)| (1.0 / p, v.ln())).collect();
        let slope = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
        for w in pts.windows(2) {
            assert!(((w[1].1 - w[0].1) / (w[1].0 - w[0].0) - slope).abs() < 1e-9);
        }
        assert!(psi_from_lab(1.0, 1.0, 2.0, None).is_err());
    }

    #[test]
    fn lab_psi_large_b_limit() {
        let (y2, yb) = (3.0, 0.7);
        for p in [2.5, 4.0, 7.0] {
            let got = psi_from_lab(y2, yb, 1e12, Some(&[p])).unwrap().value(p).finite().unwrap();
            let want = y2.powf(2.0 / p) * yb.powf(1.0 - 2.0 / p);
            assert!((got / want - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kappa_edges() {
        assert!((kappa(2.5, 7.0, 3, 3.0).unwrap() - 2.5).abs() < 1e-14);
        assert!((kappa(1.0, 1.0, 3, 5.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(kappa(1.0, 1.0, 3, 2.0).is_err());
        assert_eq!(kappa(0.0, 0.0, 3, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn tilde_restricts_support() {
        let psi = PsiFunction::from_table(Support::closed(2.0, 6.0), vec![2.0, 4.0, 6.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(psi_tilde(&psi, &[true; 3]).unwrap(), psi);
        assert_eq!(psi_tilde(&psi, &[false; 3]), Err(Error::EmptySupport));
        let part = psi_tilde(&psi, &[false, true, true]).unwrap();
        assert_eq!(part.value(2.0), PsiValue::Excluded);
        assert_eq!(part.value(3.0), PsiValue::Excluded);
        assert_eq!(part.value(6.0), PsiValue::Finite(3.0));
        assert!(psi_tilde(&psi, &[true]).is_err());
    }

    #[test]
    fn kappa_weighting() {
        let psi = PsiFunction::from_table(Support::closed(3.0, 6.0), vec![3.0, 4.0, 6.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(psi_kappa(&psi, &[0.5, 1.0, 0.9], 3).unwrap(), psi);
        let up = psi_kappa(&psi, &[2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(up.value(3.0), PsiValue::Finite(4.0));
        let h = h_zero(&psi, &[2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(h.values, vec![4.0, 2.0, 3.0]);
        assert!(psi_kappa(&psi, &[1.0], 3).is_err());
    }

    #[test]
    fn kappa_weight_stays_comparable() {
        // Bounded κ and bounded ψ^{1/p}: the ratio ψ_(κ)/ψ stays bounded on the grid.
        let grid = log_spaced(3.0, 60.0, 40);
        let values: Vec<f64> = grid.iter().map(|p| p.powi(2)).collect();
        let psi = PsiFunction::from_table(Support::closed(3.0, 60.0), grid.clone(), values).unwrap();
        let kappas = vec![5.0; grid.len()];
        let weighted = psi_kappa(&psi, &kappas, 3).unwrap();
        let max_ratio = weighted
            .active()
            .zip(psi.active())
            .map(|((_, a), (_, b))| a / b)
            .fold(0.0, f64::max);
        assert!(max_ratio <= 5f64.powf(2.0) + 1e-12);
    }

    #[test]
    fn mri_flavours() {
        let grid = [2.0, 3.0, 5.0];
        let h = profile(&grid, &[1.0, 2.0, 1.5]);
        let w = PsiFunction::from_table(Support::closed(2.0, 5.0), grid.to_vec(), vec![2.0, 2.0, 1.0]).unwrap();
        assert_eq!(mri_norm(&h, &MriFlavor::SupWeighted(w.clone())).unwrap(), gls_norm(&h, &w).unwrap());
        let c = profile(&grid, &[0.7; 3]);
        assert!((mri_norm(&c, &MriFlavor::Average { q: 3.0 }).unwrap() - 0.7).abs() < 1e-14);
        let bigger = profile(&grid, &[1.2, 2.0, 1.6]);
        for flavor in [MriFlavor::Average { q: 2.0 }, MriFlavor::SupWeighted(w)] {
            assert!(mri_norm(&h, &flavor).unwrap() <= mri_norm(&bigger, &flavor).unwrap());
        }
        assert!(mri_norm(&h, &MriFlavor::Average { q: 0.5 }).is_err());
    }

    #[test]
    fn theta_closed_form() {
        let psi = PsiFunction::from_table(Support::half_open(2.0, 8.0), vec![2.0, 3.0, 4.0, 6.0], vec![1.0; 4]).unwrap();
        for p in [4.0, 6.0] {
            let r = r_exponent(3, p).unwrap();
            let want = (constant_b21(3, p).unwrap() / p).powf(1.0 / r);
            assert!((theta(&psi, 3, p).unwrap() - want).abs() < 1e-14);
        }
        let no_d = PsiFunction::from_table(Support::half_open(4.0, 8.0), vec![4.0, 6.0], vec![1.0; 2]).unwrap();
        assert!(theta(&no_d, 3, 6.0).is_err());
        assert!(theta(&psi, 3, 8.0).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"kind":"natural","support":{"lo":2,"hi":7,"lo_closed":true,"hi_closed":false}}"#;
        let spec = PsiSpec::from_json(text).unwrap();
        assert_eq!(spec, PsiSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap());
        let g = crate::field::Grid::new(3, 8, 1.0).unwrap();
        let u = VectorField::from_fn(g, 3, |x, c| (x[c] * 6.0).sin() + 0.1);
        let psi = spec.resolve(Some(&u), &[3.0, 4.0, 7.0]).unwrap();
        assert_eq!(psi.value(7.0), PsiValue::Excluded);
        let pr = NormProfile::of_field(&u, &[3.0, 4.0], "u").unwrap();
        assert!((gls_norm(&pr, &psi).unwrap() - 1.0).abs() < 1e-15);
        assert!(spec.resolve(None, &[3.0]).is_err());
        let deg = PsiSpec::Degenerate { r: 4.0 }.resolve(None, &[3.0, 5.0]).unwrap();
        assert_eq!(deg.grid(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn lyapunov_excess_of_power_profile() {
        // ‖f‖_p = c^{1/p} is log-affine in 1/p.
        let grid = log_spaced(2.0, 10.0, 7);
        let values: Vec<f64> = grid.iter().map(|p| 5f64.powf(1.0 / p)).collect();
        assert!(profile(&grid, &values).lyapunov_excess() < 1e-12);
    }
}
