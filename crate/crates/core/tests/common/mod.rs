#![allow(dead_code)]

use std::f64::consts::PI;

use nsgls_core::field::{Grid, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tanh-sinh quadrature of `f` over `(0, π/2)`. The integrand receives
/// `(θ, π/2 − θ)`, both computed without cancellation, so endpoint
/// singularities can be evaluated through whichever is small.
pub fn tanh_sinh_quarter(f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 128.0;
    let mut sum = 0.0;
    let mut k: i64 = -(6.0 / h) as i64;
    while (k as f64) * h <= 6.0 {
        let x = k as f64 * h;
        let u = 0.5 * PI * x.sinh();
        let theta = 0.5 * PI / (1.0 + (-2.0 * u).exp());
        let comp = 0.5 * PI / (1.0 + (2.0 * u).exp());
        let sech = 1.0 / u.cosh();
        let weight = 0.25 * PI * sech * sech * 0.5 * PI * x.cosh();
        if theta > 0.0 && comp > 0.0 && weight > 0.0 {
            sum += weight * f(theta, comp);
        }
        k += 1;
    }
    sum * h
}

/// `∫_0^∞ t^{-1/p} (1+t²)^{-1/2} dt` via `t = tan θ`:
/// `∫_0^{π/2} sin^{-1/p} θ · cos^{1/p - 1} θ dθ`.
pub fn riesz_integral_oracle(p: f64) -> f64 {
    tanh_sinh_quarter(|theta, comp| theta.sin().powf(-1.0 / p) * comp.sin().powf(1.0 / p - 1.0))
}

/// Real random trigonometric polynomial with integer wavevectors in the
/// cube `|k_m| ≤ band`, one component.
pub fn random_band_limited(grid: Grid, band: i64, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kk = 2.0 * PI / grid.l;
    let mut modes = Vec::new();
    for _ in 0..12 {
        let mut k = [0i64; 3];
        for km in k.iter_mut().take(grid.d) {
            *km = rng.gen_range(-band..=band);
        }
        modes.push((k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
    }
    VectorField::from_fn(grid, 1, |x, _| {
        modes
            .iter()
            .map(|(k, a, phase)| {
                let arg: f64 = (0..grid.d).map(|m| k[m] as f64 * kk * x[m]).sum();
                a * (arg + phase).cos()
            })
            .sum()
    })
}

pub fn max_abs_diff(a: &VectorField, b: &VectorField) -> f64 {
    a.components
        .iter()
        .zip(&b.components)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
