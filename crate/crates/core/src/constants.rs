//! Closed-form constants of the a-priori estimates: sharp Sobolev constants,
//! Riesz-transform norm bounds, and the composite constants built from them.
//!
//! Every evaluator works in log space where a power or a gamma ratio could
//! leave the `f64` range, so large dimensions and exponents close to `d`
//! degrade gracefully into `Overflow` instead of returning garbage.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{cot, double_factorial, ln_gamma};

/// Which bound on `‖R_k‖(L_p → L_p)` feeds `C_{2.7}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RieszBound {
    /// Sphere-integral bound `|c(d)| p/(p-1) ω̃(d) I(p)`.
    #[default]
    Integral,
    /// Dimension-free sharp value `cot(π / 2p*)`.
    Sharp,
}

fn check_dim(op: &'static str, d: u32, min: u32) -> Result<()> {
    if d < min {
        return Err(Error::domain(op, format!("dimension {d} < {min}")));
    }
    Ok(())
}

fn finite(op: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(op))
    }
}

/// Sharp Sobolev constant `K_S(d, q)` for `‖φ‖_r ≤ K_S ‖∇φ‖_q`, `1/r = 1/q - 1/d`.
pub fn ks_sobolev(d: u32, q: f64) -> Result<f64> {
    check_dim("ks_sobolev", d, 2)?;
    let df = d as f64;
    if !(q >= 1.0 && q < df) {
        return Err(Error::domain("ks_sobolev", format!("q = {q} outside [1, {d})")));
    }
    let ratio_term = if q == 1.0 {
        0.0
    } else {
        (q - 1.0) / q * ((q - 1.0) / (df - q)).ln()
    };
    let gamma_term = ln_gamma(1.0 + df / 2.0)? + ln_gamma(df)?
        - ln_gamma(df / q)?
        - ln_gamma(1.0 + df - df / q)?;
    let ln_ks = -0.5 * PI.ln() - df.ln() / q + ratio_term + gamma_term / df;
    finite("ks_sobolev", ln_ks.exp())
}

/// `K_S(d, 2d/3)` through its dimension-only closed form.
pub fn ks_2d3(d: u32) -> Result<f64> {
    check_dim("ks_2d3", d, 3)?;
    let df = d as f64;
    let gamma_term = ln_gamma(1.0 + df / 2.0)? + ln_gamma(df)? - ln_gamma(df - 0.5)?;
    finite("ks_2d3", (ks_2d3_prefactor_ln(df) + gamma_term / df).exp())
}

fn ks_2d3_prefactor_ln(df: f64) -> f64 {
    std::f64::consts::LN_2 / df - (df + 1.0) / (2.0 * df) * PI.ln() + (2.0 - 3.0 / df).ln()
        - 3.0 / (2.0 * df) * (2.0 * df - 3.0).ln()
}

/// `K_S(d, 2d/3)` through the factorial expansions (separate even and odd
/// dimension branches). Only meaningful while the factorials fit in `f64`.
pub fn ks_2d3_factorial(d: u32) -> Result<f64> {
    check_dim("ks_2d3_factorial", d, 3)?;
    let df = d as f64;
    let fact = |n: u32| -> f64 { (1..=n).map(|k| k as f64).product() };
    let bracket = if d % 2 == 0 {
        2f64.powi(d as i32 - 1) * fact(d / 2) * fact(d - 1)
            / (PI.sqrt() * double_factorial(2 * d - 3))
    } else {
        2f64.powi((d as i32 - 3) / 2) * double_factorial(d) * fact(d - 1)
            / double_factorial(2 * d - 3)
    };
    let bracket = finite("ks_2d3_factorial", bracket)?;
    finite(
        "ks_2d3_factorial",
        (ks_2d3_prefactor_ln(df) + bracket.ln() / df).exp(),
    )
}

/// `ω̃(d) = 4 π^{d/2-1} / Γ(d/2)`.
pub fn omega_tilde(d: u32) -> Result<f64> {
    check_dim("omega_tilde", d, 1)?;
    let df = d as f64;
    let ln = 4f64.ln() + (df / 2.0 - 1.0) * PI.ln() - ln_gamma(df / 2.0)?;
    finite("omega_tilde", ln.exp())
}

/// Signed normalisation `c(d) = -π^{(d+1)/2} / Γ((d+1)/2)` of the Riesz kernel.
pub fn riesz_c(d: u32) -> Result<f64> {
    check_dim("riesz_c", d, 1)?;
    let half = (d as f64 + 1.0) / 2.0;
    let ln = half * PI.ln() - ln_gamma(half)?;
    Ok(-finite("riesz_c", ln.exp())?)
}

/// `I(p) = Γ(1/2 - 1/2p) Γ(1/2p) / (2√π)`, equal to `∫_0^∞ t^{-1/p} (1+t²)^{-1/2} dt`.
pub fn riesz_integral(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::domain("riesz_integral", format!("p = {p} must exceed 1")));
    }
    let a = 0.5 - 0.5 / p;
    let b = 0.5 / p;
    let ln = ln_gamma(a)? + ln_gamma(b)? - (2.0 * PI.sqrt()).ln();
    finite("riesz_integral", ln.exp())
}

/// Sphere-integral bound `K_R(d, p) = |c(d)| · p/(p-1) · ω̃(d) · I(p)`.
pub fn kr_riesz(d: u32, p: f64) -> Result<f64> {
    check_dim("kr_riesz", d, 2)?;
    if !(p > 1.0) {
        return Err(Error::domain("kr_riesz", format!("p = {p} must exceed 1")));
    }
    let value = riesz_c(d)?.abs() * p / (p - 1.0) * omega_tilde(d)? * riesz_integral(p)?;
    finite("kr_riesz", value)
}

/// Sharp `‖R_k‖(L_p → L_p) = cot(π / 2p*)`, `p* = max(p, p/(p-1))`.
pub fn pichorides_norm(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain("pichorides_norm", format!("p = {p} must exceed 1")));
    }
    let p_star = p.max(p / (p - 1.0));
    cot(PI / (2.0 * p_star))
}

/// The Riesz bound selected by `bound`.
pub fn riesz_bound(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    match bound {
        RieszBound::Integral => kr_riesz(d, p),
        RieszBound::Sharp => pichorides_norm(p),
    }
}

fn require_above_dim(op: &'static str, d: u32, p: f64) -> Result<()> {
    if !(p > d as f64) || !p.is_finite() {
        return Err(Error::domain(op, format!("p = {p} must exceed d = {d}")));
    }
    Ok(())
}

/// `A_{d,p} = ((p+d)/p)^{(p+d)/(p-d)}`.
pub fn constant_a(d: u32, p: f64) -> Result<f64> {
    require_above_dim("constant_a", d, p)?;
    let df = d as f64;
    finite("constant_a", ((p + df) / (p - df) * ((p + df) / p).ln()).exp())
}

/// `B_{2.1}(d, p) = K_S²(d, 2d/3) p² / 4`.
pub fn constant_b21(d: u32, p: f64) -> Result<f64> {
    check_dim("constant_b21", d, 3)?;
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::domain("constant_b21", format!("p = {p} below 2")));
    }
    let ks = ks_2d3(d)?;
    Ok(ks * ks * p * p / 4.0)
}

/// `C_{2.7}(d, p) = p² K_S²(d, 2d/3) K_R²(d, p) (d² + d) / 4`.
pub fn constant_c27(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    check_dim("constant_c27", d, 3)?;
    let ks = ks_2d3(d)?;
    let kr = riesz_bound(d, p, bound)?;
    let df = d as f64;
    finite("constant_c27", p * p * ks * ks * kr * kr * (df * df + df) / 4.0)
}

/// `ln C_{7.7}(d, p)` with `C_{7.7} = A_{d,p} · C_{2.7}^{2p/(p-d)}`.
pub fn ln_constant_c77(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    require_above_dim("constant_c77", d, p)?;
    let df = d as f64;
    let ln_a = (p + df) / (p - df) * ((p + df) / p).ln();
    let c27 = constant_c27(d, p, bound)?;
    Ok(ln_a + 2.0 * p / (p - df) * c27.ln())
}

pub fn constant_c77(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    finite("constant_c77", ln_constant_c77(d, p, bound)?.exp())
}

/// `ln` of the small-data threshold `1 / (2 C_{7.7})`.
pub fn ln_threshold(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    Ok(-std::f64::consts::LN_2 - ln_constant_c77(d, p, bound)?)
}

/// Smallness threshold on `‖u_0‖_d` for monotone decay of `‖u(t)‖_p`.
///
/// May underflow to zero for `p` close to `d`; use [`ln_threshold`] there.
pub fn threshold(d: u32, p: f64, bound: RieszBound) -> Result<f64> {
    Ok(ln_threshold(d, p, bound)?.exp())
}

/// Space-time integrability exponent `r(p) = p(p-d+2)/(p-d)`.
pub fn r_exponent(d: u32, p: f64) -> Result<f64> {
    require_above_dim("r_exponent", d, p)?;
    let df = d as f64;
    Ok(p * (p - df + 2.0) / (p - df))
}

/// Ratio `rhs / lhs` of `vw ≤ A(d,p) v^{2p/(p-d)} + w^{2p/(p+d)} / 2`, evaluated
/// in log space. Values `≥ 1` mean the inequality holds at `(v, w)`.
pub fn elementary_inequality_margin(d: u32, p: f64, v: f64, w: f64) -> Result<f64> {
    if !(v > 0.0 && w > 0.0) {
        return Err(Error::domain("elementary_inequality", "v and w must be positive"));
    }
    Ok(ln_elementary_inequality_margin(d, p, v.ln(), w.ln())?.exp())
}

/// `ln(rhs / lhs)` of the elementary inequality from `ln v` and `ln w`, for
/// arguments whose powers leave the `f64` range.
pub fn ln_elementary_inequality_margin(d: u32, p: f64, ln_v: f64, ln_w: f64) -> Result<f64> {
    require_above_dim("elementary_inequality", d, p)?;
    if !(ln_v.is_finite() && ln_w.is_finite()) {
        return Err(Error::domain("elementary_inequality", "v and w must be positive"));
    }
    let df = d as f64;
    let ln_a = (p + df) / (p - df) * ((p + df) / p).ln();
    let first = ln_a + 2.0 * p / (p - df) * ln_v;
    let second = 0.5f64.ln() + 2.0 * p / (p + df) * ln_w;
    Ok(log_add(first, second) - ln_v - ln_w)
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Every constant evaluated at one `(d, p)`; cells outside their domain keep
/// the error that excluded them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRecord {
    pub d: u32,
    pub p: f64,
    pub bound: RieszBound,
    pub ks_sobolev: Result<f64>,
    pub ks_2d3: Result<f64>,
    pub kr: Result<f64>,
    pub pichorides: Result<f64>,
    pub a: Result<f64>,
    pub b21: Result<f64>,
    pub c27: Result<f64>,
    pub c77: Result<f64>,
    pub threshold: Result<f64>,
}

impl ConstantsRecord {
    pub fn evaluate(d: u32, p: f64, bound: RieszBound) -> Self {
        Self {
            d,
            p,
            bound,
            ks_sobolev: ks_sobolev(d, p),
            ks_2d3: ks_2d3(d),
            kr: kr_riesz(d, p),
            pichorides: pichorides_norm(p),
            a: constant_a(d, p),
            b21: constant_b21(d, p),
            c27: constant_c27(d, p, bound),
            c77: constant_c77(d, p, bound),
            threshold: threshold(d, p, bound),
        }
    }

    /// The CSV columns of the constants table, in order.
    pub const COLUMNS: [&'static str; 10] = [
        "d", "p", "KS_2d3", "KR", "pichorides", "A", "B21", "C27", "C77", "threshold",
    ];

    /// Named numeric cells in column order (after `d` and `p`).
    pub fn cells(&self) -> [(&'static str, &Result<f64>); 8] {
        [
            ("KS_2d3", &self.ks_2d3),
            ("KR", &self.kr),
            ("pichorides", &self.pichorides),
            ("A", &self.a),
            ("B21", &self.b21),
            ("C27", &self.c27),
            ("C77", &self.c77),
            ("threshold", &self.threshold),
        ]
    }

    pub fn any_valid(&self) -> bool {
        self.cells().iter().any(|(_, c)| c.is_ok())
    }
}
