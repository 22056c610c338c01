//! Initial data presets: seeded random fields with a prescribed spectrum,
//! the mollified logarithmic bump (bounded mean oscillation but unbounded),
//! and Gaussian bumps.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::spectral::{ScalarField, SpectralField, TorusGrid};

/// Mean-zero random real field with coefficient magnitudes `|m|^{-decay}`
/// and seeded phases, band-limited to the dealiased range and normalized
/// to `max |f| = amplitude`.
pub fn random_spectrum(grid: TorusGrid, decay: f64, amplitude: f64, seed: u64) -> Result<ScalarField> {
    let n = grid.n() as i64;
    let band = n / 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SpectralField::zeros(grid);
    for mx in -band..=band {
        for my in -band..=band {
            if (mx, my) <= (0, 0) {
                continue; // fill one half, mirror the other
            }
            let mag = ((mx * mx + my * my) as f64).sqrt().powf(-decay);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex64::new(re, im) * mag;
            spec.set_mode(mx, my, c);
            spec.set_mode(-mx, -my, c.conj());
        }
    }
    let f = spec.to_physical()?;
    let peak = f.linf();
    if peak == 0.0 {
        return Ok(f);
    }
    Ok(f.scale(amplitude / peak))
}

fn torus_distance(grid: TorusGrid, x: f64, y: f64, center: (f64, f64)) -> f64 {
    let l = grid.length();
    let wrap = |d: f64| {
        let mut d = d.rem_euclid(l);
        if d >= l / 2.0 {
            d -= l;
        }
        d
    };
    let dx = wrap(x - center.0);
    let dy = wrap(y - center.1);
    (dx * dx + dy * dy).sqrt()
}

/// Mollified logarithmic singularity: `log(radius / max(r, delta))` with a
/// smooth roll-off to zero between `radius/2` and `radius`. Unbounded as
/// `delta -> 0` while its mean oscillation stays bounded.
pub fn log_bump(grid: TorusGrid, center: (f64, f64), radius: f64, delta: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        let r = torus_distance(grid, x, y, center);
        if r >= radius {
            return 0.0;
        }
        let core = (radius / r.max(delta)).ln();
        let cutoff = if r <= radius / 2.0 {
            1.0
        } else {
            let s = (r - radius / 2.0) / (radius / 2.0);
            (std::f64::consts::FRAC_PI_2 * s).cos().powi(2)
        };
        core * cutoff
    })
}

/// Smooth positive bump `amplitude * exp(-r^2 / (2 sigma^2))` (periodic
/// distance).
pub fn gaussian_bump(grid: TorusGrid, center: (f64, f64), amplitude: f64, sigma: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        let r = torus_distance(grid, x, y, center);
        amplitude * (-r * r / (2.0 * sigma * sigma)).exp()
    })
}

/// Removes the grid mean, making the field admissible for negative-order
/// multipliers.
pub fn remove_mean(f: &ScalarField) -> ScalarField {
    let mean = f.values().sum() / (f.grid().n() * f.grid().n()) as f64;
    f.map(|v| v - mean)
}
