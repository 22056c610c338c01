//! Norms and functionals: `L^p`, homogeneous Sobolev, `H^-1` via the
//! potential, dyadic BMO with one-third shifts, the log-Lipschitz modulus
//! estimator, first moments and the Hardy pairing bound.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ScalarField, VectorField};

/// One measured norm with the parameters used to compute it.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub name: String,
    pub value: f64,
    pub parameters: BTreeMap<String, f64>,
}

impl NormReport {
    pub fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.into(), value);
        self
    }

    /// CSV row `name,p_or_s,depth,value`.
    pub fn csv_row(&self) -> String {
        let p_or_s = self
            .parameters
            .get("p")
            .or_else(|| self.parameters.get("s"))
            .copied()
            .unwrap_or(f64::NAN);
        let depth = self.parameters.get("depth").copied().unwrap_or(f64::NAN);
        format!("{},{},{},{}", self.name, p_or_s, depth, self.value)
    }
}

/// One separation scale of the modulus-of-continuity estimator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModulusSample {
    pub r: f64,
    /// `max |v(x) - v(y)| / (r |log r|)` over the sampled pairs.
    pub ratio: f64,
    /// `max |v(x) - v(y)| / r`, the plain Lipschitz ratio.
    pub lipschitz_ratio: f64,
}

/// `(int |f|^p dx)^{1/p}` by the equal-weight rule; `p = inf` gives
/// `max |f|`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[1, inf]",
        });
    }
    if p.is_infinite() {
        return Ok(f.linf());
    }
    let sum: f64 = if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * f.grid().cell_area()).powf(1.0 / p))
}

/// `L^p` norm after normalizing the torus to measure one; non-decreasing
/// in `p` by Jensen.
pub fn lp_norm_unit_measure(f: &ScalarField, p: f64) -> Result<f64> {
    let vol = f.grid().length().powi(2);
    Ok(lp_norm(f, p)? / vol.powf(1.0 / p))
}

/// Homogeneous Sobolev norm `(sum_{k!=0} |k|^{2s} |f_hat|^2)^{1/2}`
/// (the zero mode enters only for `s >= 0`). For `s < 0` the field must
/// be mean-zero.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    let spec = f.to_spectral()?;
    if s < 0.0 {
        spec.require_mean_zero()?;
    }
    let g = f.grid();
    let mut acc = 0.0;
    for ((i, j), c) in spec.coeffs().indexed_iter() {
        let (kx, ky) = g.wavenumber(i, j);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            if s >= 0.0 && s != 0.0 {
                continue; // |0|^{2s} = 0 for s > 0
            }
            if s == 0.0 {
                acc += c.norm_sqr();
            }
            continue;
        }
        acc += k2.powf(s) * c.norm_sqr();
    }
    Ok(acc.sqrt())
}

/// Solves `-Delta phi = w` spectrally and returns `(||grad phi||_2,
/// grad phi)`. Requires mean-zero `w`.
pub fn hminus1_via_potential(w: &ScalarField) -> Result<(f64, VectorField)> {
    let spec = w.to_spectral()?;
    spec.require_mean_zero()?;
    let phi = spec.multiply(|kx, ky| {
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            num_complex::Complex64::new(1.0 / k2, 0.0)
        }
    });
    let (gx, gy) = phi.gradient();
    let grad = crate::spectral::SpectralField::pair_to_physical(&gx, &gy);
    Ok((grad.l2(), grad))
}

/// Offset, in cells, of the three shifted dyadic lattices.
pub(crate) fn third_shift(n: usize) -> usize {
    n / 3
}

/// Supremum of the mean oscillation over the anchored dyadic lattice and
/// its three one-third-shifted translates, cube sides `n/2^j` cells for
/// `j = 0..=max_depth`, never finer than 2 cells. Shifted cubes that do
/// not fit inside the raster are skipped.
pub fn bmo_norm(f: &ScalarField, max_depth: usize) -> Result<f64> {
    let n = f.grid().n();
    if max_depth < 1 || (1usize << max_depth) > n {
        return Err(Error::DepthTooFine { depth: max_depth, n });
    }
    Ok(bmo_scan(f.values(), None, max_depth))
}

/// `bmo_norm` at the finest admissible depth for the grid.
pub fn bmo_norm_full(f: &ScalarField) -> f64 {
    let n = f.grid().n();
    let depth = n.trailing_zeros() as usize - 1;
    bmo_scan(f.values(), None, depth)
}

/// Shared cube scan: anchored lattice plus the three shifted translates,
/// optionally restricted to cubes fully inside a mask.
pub(crate) fn bmo_scan(values: &Array2<f64>, mask: Option<&Array2<bool>>, max_depth: usize) -> f64 {
    let n = values.dim().0;
    // summed-area tables for O(1) cube sums
    let sat = summed_area(values, |v| v);
    let sat_mask = mask.map(|m| {
        let as_f = m.mapv(|b| if b { 1.0 } else { 0.0 });
        summed_area(&as_f, |v| v)
    });
    let s = third_shift(n);
    let shifts = [(0usize, 0usize), (s, 0), (0, s), (s, s)];
    let mut worst = 0.0f64;
    for (sx, sy) in shifts {
        let mut side = n;
        for depth in 0..=max_depth {
            if side < 2 {
                break;
            }
            let mut x0 = sx % side;
            // the anchored lattice always tiles exactly; shifted lattices
            // only contribute cubes fully inside the raster
            while x0 + side <= n {
                let mut y0 = sy % side;
                while y0 + side <= n {
                    if let Some(sm) = &sat_mask {
                        let cnt = rect_sum(sm, x0, y0, side);
                        if (cnt - (side * side) as f64).abs() > 0.5 {
                            y0 += side;
                            continue;
                        }
                    }
                    let mean = rect_sum(&sat, x0, y0, side) / (side * side) as f64;
                    let mut osc = 0.0;
                    for i in x0..x0 + side {
                        for j in y0..y0 + side {
                            osc += (values[(i, j)] - mean).abs();
                        }
                    }
                    worst = worst.max(osc / (side * side) as f64);
                    y0 += side;
                }
                x0 += side;
            }
            let _ = depth;
            side /= 2;
        }
    }
    worst
}

/// Inclusive-exclusive summed-area table with a zero border row/column.
pub(crate) fn summed_area(values: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let (nx, ny) = values.dim();
    let mut sat = Array2::zeros((nx + 1, ny + 1));
    for i in 0..nx {
        for j in 0..ny {
            sat[(i + 1, j + 1)] =
                f(values[(i, j)]) + sat[(i, j + 1)] + sat[(i + 1, j)] - sat[(i, j)];
        }
    }
    sat
}

pub(crate) fn rect_sum(sat: &Array2<f64>, x0: usize, y0: usize, side: usize) -> f64 {
    let (x1, y1) = (x0 + side, y0 + side);
    sat[(x1, y1)] - sat[(x0, y1)] - sat[(x1, y0)] + sat[(x0, y0)]
}

/// One row of the `L^p` growth profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthRow {
    pub p: f64,
    pub lp: f64,
    /// `p^{1-p0/p} ||f||_BMO^{1-p0/p} ||f||_{p0}^{p0/p}`.
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthProfile {
    pub rows: Vec<GrowthRow>,
    /// `sup_p lhs/rhs` over the list.
    pub sup_ratio: f64,
    pub bmo: f64,
    pub p0_norm: f64,
}

/// Measures `||f||_p` against the interpolation bound for each `p` in the
/// list; `p0` must lie strictly below the whole list.
pub fn lp_growth_profile(f: &ScalarField, p_list: &[f64], p0: f64) -> Result<GrowthProfile> {
    if p_list.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pmin = p_list.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(p0 < pmin) {
        return Err(Error::OutOfRange {
            name: "p0",
            value: p0,
            range: "below min(p_list)",
        });
    }
    let bmo = bmo_norm_full(f);
    let p0_norm = lp_norm(f, p0)?;
    let mut rows = Vec::with_capacity(p_list.len());
    let mut sup_ratio = 0.0f64;
    for &p in p_list {
        let lp = lp_norm(f, p)?;
        let expo = 1.0 - p0 / p;
        let rhs = p.powf(expo) * bmo.powf(expo) * p0_norm.powf(p0 / p);
        if rhs > 0.0 {
            sup_ratio = sup_ratio.max(lp / rhs);
        }
        rows.push(GrowthRow { p, lp, rhs });
    }
    Ok(GrowthProfile {
        rows,
        sup_ratio,
        bmo,
        p0_norm,
    })
}

/// Largest admissible separation for the modulus estimator.
pub const MODULUS_R_MAX: f64 = 0.36787944117144233; // e^{-1}

/// Samples random pairs at each separation `r` and records the maximal
/// `|v(x)-v(y)| / (r |log r|)` (and the plain Lipschitz ratio). Pairs are
/// drawn uniformly on the torus; `v` is interpolated bilinearly.
pub fn log_lipschitz_modulus(
    v: &VectorField,
    r_values: &[f64],
    samples_per_r: usize,
    seed: u64,
) -> Result<Vec<ModulusSample>> {
    if samples_per_r < 100 {
        return Err(Error::OutOfRange {
            name: "samples_per_r",
            value: samples_per_r as f64,
            range: "[100, inf)",
        });
    }
    for &r in r_values {
        if !(r > 0.0 && r < MODULUS_R_MAX) {
            return Err(Error::OutOfRange {
                name: "r",
                value: r,
                range: "(0, e^-1)",
            });
        }
    }
    let l = v.grid().length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut max_diff = 0.0f64;
        for _ in 0..samples_per_r {
            let x = rng.gen_range(0.0..l);
            let y = rng.gen_range(0.0..l);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let (x2, y2) = (x + r * theta.cos(), y + r * theta.sin());
            let (ax, ay) = v.sample(x, y);
            let (bx, by) = v.sample(x2, y2);
            let d = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            max_diff = max_diff.max(d);
        }
        out.push(ModulusSample {
            r,
            ratio: max_diff / (r * r.ln().abs()),
            lipschitz_ratio: max_diff / r,
        });
    }
    Ok(out)
}

/// Support threshold for the compactly-supported preconditions.
pub const SUPPORT_TOL: f64 = 1e-10;

fn periodic_offset(a: f64, c: f64, l: f64) -> f64 {
    let mut d = (a - c).rem_euclid(l);
    if d >= l / 2.0 {
        d -= l;
    }
    d
}

/// `int |x - center| |f(x)| dx` over the centered fundamental domain.
/// Rejects fields whose support reaches the half-period ball boundary.
pub fn first_moment(f: &ScalarField, center: (f64, f64)) -> Result<f64> {
    let g = f.grid();
    let l = g.length();
    let h = g.spacing();
    let guard = l / 2.0 - 2.0 * h;
    let mut acc = 0.0;
    for ((i, j), &v) in f.values().indexed_iter() {
        let (x, y) = g.point(i, j);
        let dx = periodic_offset(x, center.0, l);
        let dy = periodic_offset(y, center.1, l);
        let dist = (dx * dx + dy * dy).sqrt();
        if v.abs() >= SUPPORT_TOL && dist >= guard {
            return Err(Error::SupportTouchesBoundary);
        }
        acc += dist * v.abs();
    }
    Ok(acc * g.cell_area())
}

/// Centroid of `|f|` via circular statistics; the canonical center for
/// the compact-support checks.
pub fn support_centroid(f: &ScalarField) -> (f64, f64) {
    let g = f.grid();
    let l = g.length();
    let tau = std::f64::consts::TAU;
    let (mut cx, mut sx, mut cy, mut sy) = (0.0, 0.0, 0.0, 0.0);
    for ((i, j), &v) in f.values().indexed_iter() {
        let w = v.abs();
        let (x, y) = g.point(i, j);
        cx += w * (tau * x / l).cos();
        sx += w * (tau * x / l).sin();
        cy += w * (tau * y / l).cos();
        sy += w * (tau * y / l).sin();
    }
    let wrap = |c: f64, s: f64| (s.atan2(c).rem_euclid(tau)) * l / tau;
    (wrap(cx, sx), wrap(cy, sy))
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyPairing {
    /// `max_K |int K f dx|` over the supplied kernels.
    pub pairing: f64,
    /// `||f||_p + M_1`.
    pub bound: f64,
    /// `pairing / bound` (0 when the bound vanishes).
    pub constant: f64,
}

/// Pairs a mean-zero compactly supported field against BMO-normalized
/// kernels and compares with `||f||_p + M_1`.
pub fn hardy_pairing_bound(
    f: &ScalarField,
    kernels: &[ScalarField],
    p: f64,
) -> Result<HardyPairing> {
    if kernels.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(p > 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "(1, inf)",
        });
    }
    let spec = f.to_spectral()?;
    spec.require_mean_zero()?;
    let center = support_centroid(f);
    let moment = first_moment(f, center)?;
    let area = f.grid().cell_area();
    let mut pairing = 0.0f64;
    for kernel in kernels {
        let b = bmo_norm_full(kernel);
        if b > 1.0 + 1e-9 {
            return Err(Error::KernelNotNormalized(b));
        }
        let dot: f64 = kernel
            .values()
            .iter()
            .zip(f.values().iter())
            .map(|(a, b)| a * b)
            .sum();
        pairing = pairing.max((dot * area).abs());
    }
    let bound = lp_norm(f, p)? + moment;
    Ok(HardyPairing {
        pairing,
        bound,
        constant: if bound > 0.0 { pairing / bound } else { 0.0 },
    })
}
