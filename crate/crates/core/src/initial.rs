//! Deterministic initial-data generators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, VectorField};
use crate::spectral::{forward, inverse, SpectralField};

/// Shape of the initial velocity field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum InitialKind {
    /// `(cos x sin y, -sin x cos y)` at unit box wavenumber, 2-D only.
    #[serde(rename = "taylor-green-2d")]
    TaylorGreen2d,
    /// `(sin x cos y cos z, -cos x sin y cos z, 0)`, 3-D only.
    #[serde(rename = "taylor-green-3d")]
    TaylorGreen3d,
    /// Gaussian random coefficients on the shell `band[0] ≤ |k| ≤ band[1]`,
    /// Leray-projected, mean-free and normalised to unit RMS magnitude.
    #[serde(rename = "random-solenoidal")]
    RandomSolenoidal { band: [f64; 2] },
    /// Swirl `(∂_y φ, -∂_x φ, 0)` around a centred Gaussian `φ` of width
    /// `width · L`, normalised to unit peak magnitude.
    #[serde(rename = "gaussian-bump")]
    GaussianBump {
        #[serde(default = "default_bump_width")]
        width: f64,
    },
    #[serde(rename = "zero")]
    Zero,
}

fn default_bump_width() -> f64 {
    1.0 / 16.0
}

/// Builds the initial datum `amplitude · shape`.
pub fn make_initial(kind: &InitialKind, grid: Grid, amplitude: f64, seed: u64) -> Result<VectorField> {
    if let InitialKind::Zero = kind {
        return Ok(VectorField::zeros(grid, grid.d).with_time(0.0));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::domain("make_initial", format!("amplitude {amplitude} must be positive")));
    }
    let k = 2.0 * PI / grid.l;
    let field = match kind {
        InitialKind::TaylorGreen2d => {
            if grid.d != 2 {
                return Err(Error::Config("taylor-green-2d needs d = 2".into()));
            }
            VectorField::from_fn(grid, 2, |x, c| {
                let (a, b) = (k * x[0], k * x[1]);
                if c == 0 {
                    amplitude * a.cos() * b.sin()
                } else {
                    -amplitude * a.sin() * b.cos()
                }
            })
        }
        InitialKind::TaylorGreen3d => {
            if grid.d != 3 {
                return Err(Error::Config("taylor-green-3d needs d = 3".into()));
            }
            VectorField::from_fn(grid, 3, |x, c| {
                let (a, b, z) = (k * x[0], k * x[1], k * x[2]);
                match c {
                    0 => amplitude * a.sin() * b.cos() * z.cos(),
                    1 => -amplitude * a.cos() * b.sin() * z.cos(),
                    _ => 0.0,
                }
            })
        }
        InitialKind::RandomSolenoidal { band } => random_solenoidal(grid, *band, seed)?.scaled(amplitude),
        InitialKind::GaussianBump { width } => {
            if !(*width > 0.0) {
                return Err(Error::domain("make_initial", "bump width must be positive"));
            }
            let sigma = width * grid.l;
            let centre = grid.l / 2.0;
            let norm = amplitude * sigma * 0.5f64.exp();
            VectorField::from_fn(grid, grid.d, |x, c| {
                let r2: f64 = x.iter().map(|xi| (xi - centre).powi(2)).sum();
                let phi = (-r2 / (2.0 * sigma * sigma)).exp();
                let dphi = |axis: usize| -(x[axis] - centre) / (sigma * sigma) * phi;
                match c {
                    0 => norm * dphi(1),
                    1 => -norm * dphi(0),
                    _ => 0.0,
                }
            })
        }
        InitialKind::Zero => unreachable!(),
    };
    Ok(field.with_time(0.0))
}

fn random_solenoidal(grid: Grid, band: [f64; 2], seed: u64) -> Result<VectorField> {
    let [kmin, kmax] = band;
    if !(kmin >= 1.0 && kmax >= kmin) {
        return Err(Error::Config(format!("band [{kmin}, {kmax}] must satisfy 1 ≤ kmin ≤ kmax")));
    }
    let cutoff = grid.n as f64 / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hat = SpectralField::zeros(grid, grid.d);
    let mut populated = false;
    for i in 0..grid.len() {
        let idx = grid.multi_index(i);
        let ks: Vec<f64> = idx[..grid.d].iter().map(|&j| grid.wavenumber(j) as f64).collect();
        let kmag = ks.iter().map(|k| k * k).sum::<f64>().sqrt();
        // Draw for every mode so the stream does not depend on the band.
        let draws: Vec<Complex64> = (0..grid.d)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        if kmag < kmin || kmag > kmax || ks.iter().any(|k| k.abs() > cutoff) {
            continue;
        }
        populated = true;
        for (c, value) in draws.into_iter().enumerate() {
            hat.coeffs[c][i] = value;
        }
    }
    if !populated {
        return Err(Error::Config(format!("band [{kmin}, {kmax}] holds no resolved modes")));
    }
    // The real part of the inverse is the Hermitian-symmetrised field.
    let raw = inverse(&hat)?;
    let projected = inverse(&forward(&raw)?.leray_project()?)?;
    let rms = projected.lp_norm(2.0)? / grid.volume().sqrt();
    if rms == 0.0 {
        return Err(Error::Numerical("random field vanished after projection".into()));
    }
    Ok(projected.scaled(1.0 / rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::divergence_residual;

    #[test]
    fn taylor_green_fields_are_solenoidal() {
        let g2 = Grid::new(2, 32, 2.0 * PI).unwrap();
        let tg = make_initial(&InitialKind::TaylorGreen2d, g2, 1.0, 0).unwrap();
        assert!(divergence_residual(&tg).unwrap() < 1e-12);
        let g3 = Grid::new(3, 16, 3.0).unwrap();
        let tg = make_initial(&InitialKind::TaylorGreen3d, g3, 2.0, 0).unwrap();
        assert!(divergence_residual(&tg).unwrap() < 1e-12);
        assert!(make_initial(&InitialKind::TaylorGreen2d, g3, 1.0, 0).is_err());
    }

    #[test]
    fn random_field_is_projected_and_deterministic() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let kind = InitialKind::RandomSolenoidal { band: [1.0, 4.0] };
        let a = make_initial(&kind, g, 1.0, 42).unwrap();
        let b = make_initial(&kind, g, 1.0, 42).unwrap();
        let c = make_initial(&kind, g, 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(divergence_residual(&a).unwrap() < 1e-10);
        for comp in 0..3 {
            assert!(a.mean(comp).abs() < 1e-14);
        }
        let rms = a.lp_norm(2.0).unwrap() / g.volume().sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_is_linear() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        for kind in [
            InitialKind::TaylorGreen3d,
            InitialKind::RandomSolenoidal { band: [1.0, 3.0] },
            InitialKind::GaussianBump { width: 0.08 },
        ] {
            let one = make_initial(&kind, g, 1.0, 7).unwrap();
            let three = make_initial(&kind, g, 3.0, 7).unwrap();
            let diff = three.sub(&one.scaled(3.0)).unwrap().max_magnitude();
            assert!(diff < 1e-14 * three.max_magnitude(), "{kind:?}");
        }
    }

    #[test]
    fn bump_peak_and_divergence() {
        let g = Grid::new(3, 32, 10.0).unwrap();
        let u = make_initial(&InitialKind::GaussianBump { width: 0.06 }, g, 2.0, 0).unwrap();
        assert!((u.max_magnitude() - 2.0).abs() < 0.1);
        assert!(divergence_residual(&u).unwrap() < 1e-6);
        assert!(u.boundary_leakage() < 1e-10);
    }

    #[test]
    fn bad_inputs() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        assert!(make_initial(&InitialKind::TaylorGreen3d, g, 0.0, 0).is_err());
        assert!(make_initial(&InitialKind::RandomSolenoidal { band: [9.0, 12.0] }, g, 1.0, 0).is_err());
        assert!(make_initial(&InitialKind::RandomSolenoidal { band: [2.0, 1.0] }, g, 1.0, 0).is_err());
        assert_eq!(make_initial(&InitialKind::Zero, g, 0.0, 0).unwrap().max_magnitude(), 0.0);
        let parsed: std::result::Result<InitialKind, _> = serde_json::from_str(r#"{"kind":"vortex-ring"}"#);
        assert!(parsed.is_err());
    }
}
