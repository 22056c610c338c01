//! Periodic 2D grid, discrete Fourier transforms, spectral differential
//! operators and dealiasing.
//!
//! Conventions: the torus is `[0, L)^2` sampled at `n x n` points,
//! `h = L/n`. Spectral coefficients are indexed by integer modes
//! `m in {-n/2 .. n/2-1}^2` with physical wavenumber `k = (2*pi/L) m`,
//! and are scaled so that the transform is unitary from `L^2(dx)`
//! (grid quadrature) to `l^2` of the coefficients: `sum |F(k)|^2`
//! equals `int |f|^2 dx` exactly. For the default period `L = 2*pi`
//! this is the classical `(2*pi)^{-1} int f e^{-ik.x} dx` normalization.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_PERIOD: f64 = std::f64::consts::TAU;

/// Relative tolerance for the mean-zero precondition of negative-order
/// multipliers.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// Uniform periodic grid: `n` points per axis over a square of side `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    length: f64,
}

impl TorusGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGridSize(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::OutOfRange {
                name: "length",
                value: length,
                range: "(0, inf)",
            });
        }
        Ok(Self { n, length })
    }

    pub fn with_default_period(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_PERIOD)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Grid spacing `L/n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of one cell, `h^2`.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Integer mode for array index `i`, in `{-n/2 .. n/2-1}`.
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Array index holding integer mode `m`.
    pub fn index_of_mode(&self, m: i64) -> usize {
        let n = self.n as i64;
        (m.rem_euclid(n)) as usize
    }

    /// Physical wavenumber step `2*pi/L`.
    pub fn dk(&self) -> f64 {
        std::f64::consts::TAU / self.length
    }

    /// Physical wavenumber vector at array index `(i, j)`.
    pub fn wavenumber(&self, i: usize, j: usize) -> (f64, f64) {
        let dk = self.dk();
        (self.mode(i) as f64 * dk, self.mode(j) as f64 * dk)
    }

    /// Coordinate of grid point `(i, j)`; `x` along axis 0, `y` along axis 1.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    /// Largest physical wavenumber magnitude representable on the grid.
    pub fn k_max(&self) -> f64 {
        self.dk() * (self.n as f64 / 2.0) * std::f64::consts::SQRT_2
    }
}

/// Real samples of a scalar on the torus. Axis 0 is `x`, axis 1 is `y`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Array2<f64>,
}

/// Complex Fourier coefficients of a scalar, indexed by wavenumber.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Array2<Complex64>,
}

/// Two scalar components on a shared grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

// Transform plans are cached per grid size; rustfft handles are Send + Sync
// so concurrent execution only needs the lookup synchronized.
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLAN_CACHE: Lazy<Mutex<HashMap<usize, Arc<Plans>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plans_for(n: usize) -> Arc<Plans> {
    let mut cache = PLAN_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalized 2D DFT over both axes, in place.
fn fft2(data: &mut Array2<Complex64>, n: usize, inverse: bool) {
    let plans = plans_for(n);
    let fft = if inverse { &plans.inverse } else { &plans.forward };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // axis 1 is contiguous
    for mut row in data.rows_mut() {
        fft.process_with_scratch(row.as_slice_mut().unwrap(), &mut scratch);
    }
    let mut t = Array2::zeros((n, n));
    t.assign(&data.t());
    for mut row in t.rows_mut() {
        fft.process_with_scratch(row.as_slice_mut().unwrap(), &mut scratch);
    }
    data.assign(&t.t());
}

impl ScalarField {
    /// Wraps sample values; rejects non-finite entries.
    pub fn from_values(grid: TorusGrid, values: Array2<f64>) -> Result<Self> {
        assert_eq!(values.dim(), (grid.n(), grid.n()), "sample array shape");
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f(x, y)` at every grid point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let values = Array2::from_shape_fn((n, n), |(i, j)| {
            let (x, y) = grid.point(i, j);
            f(x, y)
        });
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n(), grid.n())),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// `int f dx` by the equal-weight rule.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    /// `(int f^2 dx)^{1/2}`.
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.mapv(|v| f(v)),
        }
    }

    /// Pointwise product on the grid (not dealiased).
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        ScalarField {
            grid: self.grid,
            values: &self.values * &other.values,
        }
    }

    pub fn add_scaled(&self, scale: f64, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        ScalarField {
            grid: self.grid,
            values: &self.values + &(scale * &other.values),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: s * &self.values,
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add_scaled(-1.0, other)
    }

    /// Forward transform with the unitary normalization; rejects
    /// non-finite input.
    pub fn to_spectral(&self) -> Result<SpectralField> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = self.grid.n();
        let mut data = self.values.mapv(|v| Complex64::new(v, 0.0));
        fft2(&mut data, n, false);
        let scale = self.grid.length() / (n * n) as f64;
        data.mapv_inplace(|c| c * scale);
        Ok(SpectralField {
            grid: self.grid,
            coeffs: data,
        })
    }

    /// Gradient computed spectrally: component `j` has coefficients
    /// `i k_j f_hat(k)`.
    pub fn gradient(&self) -> Result<VectorField> {
        let (gx, gy) = self.to_spectral()?.gradient();
        Ok(to_physical_pair(&gx, &gy))
    }

    /// `(-Delta)^gamma f` for `gamma` in `(0, 1]`; the zero mode is
    /// annihilated.
    pub fn fractional_laplacian(&self, gamma: f64) -> Result<ScalarField> {
        let spec = self.to_spectral()?.fractional_laplacian(gamma)?;
        Ok(spec.to_physical_unchecked())
    }

    /// Bilinear interpolation at an arbitrary point (periodic wrap).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let l = self.grid.length();
        let xs = (x.rem_euclid(l)) / h;
        let ys = (y.rem_euclid(l)) / h;
        let i0 = xs.floor() as usize % n;
        let j0 = ys.floor() as usize % n;
        let fx = xs - xs.floor();
        let fy = ys - ys.floor();
        let i1 = (i0 + 1) % n;
        let j1 = (j0 + 1) % n;
        let v = &self.values;
        v[(i0, j0)] * (1.0 - fx) * (1.0 - fy)
            + v[(i1, j0)] * fx * (1.0 - fy)
            + v[(i0, j1)] * (1.0 - fx) * fy
            + v[(i1, j1)] * fx * fy
    }

    /// Writes the snapshot format: one-line textual header followed by
    /// row-major little-endian f64 samples. Bit-exact round trip.
    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "ASFIELD v1 n={} L={}", self.grid.n(), self.grid.length())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(r: &mut impl Read) -> Result<Self> {
        let mut header = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            r.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            header.push(byte[0]);
            if header.len() > 256 {
                return Err(Error::MalformedHeader("missing newline".into()));
            }
        }
        let header = String::from_utf8(header).map_err(|e| Error::MalformedHeader(e.to_string()))?;
        let mut n = None;
        let mut l = None;
        let mut words = header.split_whitespace();
        if words.next() != Some("ASFIELD") || words.next() != Some("v1") {
            return Err(Error::MalformedHeader(header.clone()));
        }
        for word in words {
            if let Some(v) = word.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = word.strip_prefix("L=") {
                l = v.parse::<f64>().ok();
            }
        }
        let (n, l) = match (n, l) {
            (Some(n), Some(l)) => (n, l),
            _ => return Err(Error::MalformedHeader(header)),
        };
        let grid = TorusGrid::new(n, l)?;
        let mut buf = vec![0u8; n * n * 8];
        r.read_exact(&mut buf)?;
        let values = Array2::from_shape_vec(
            (n, n),
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
        .unwrap();
        ScalarField::from_values(grid, values)
    }
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: Array2::zeros((grid.n(), grid.n())),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    /// Coefficient at integer mode `(mx, my)`.
    pub fn coeff_at_mode(&self, mx: i64, my: i64) -> Complex64 {
        self.coeffs[(self.grid.index_of_mode(mx), self.grid.index_of_mode(my))]
    }

    pub fn set_mode(&mut self, mx: i64, my: i64, value: Complex64) {
        let idx = (self.grid.index_of_mode(mx), self.grid.index_of_mode(my));
        self.coeffs[idx] = value;
    }

    /// `(sum |F(k)|^2)^{1/2}`; equals the `L^2` norm of the field.
    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from conjugate symmetry `F(-k) = conj F(k)`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.grid.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let ni = (n - i) % n;
                let nj = (n - j) % n;
                let d = (self.coeffs[(i, j)] - self.coeffs[(ni, nj)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Inverse transform; rejects coefficients that are not
    /// conjugate-symmetric within `1e-10` of the coefficient scale.
    pub fn to_physical(&self) -> Result<ScalarField> {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let tol = 1e-10 * scale.max(1e-300);
        let residual = self.symmetry_residual();
        if residual > tol {
            return Err(Error::AsymmetricSpectrum { residual, tol });
        }
        Ok(self.to_physical_unchecked())
    }

    /// Inverse transform taking the real part without the symmetry check;
    /// for internal use where symmetry holds by construction.
    pub(crate) fn to_physical_unchecked(&self) -> ScalarField {
        let n = self.grid.n();
        let mut data = self.coeffs.clone();
        fft2(&mut data, n, true);
        let scale = 1.0 / self.grid.length();
        ScalarField {
            grid: self.grid,
            values: data.mapv(|c| c.re * scale),
        }
    }

    /// Multiplies every coefficient by `g(kx, ky)` (physical wavenumbers).
    pub fn multiply(&self, g: impl Fn(f64, f64) -> Complex64) -> SpectralField {
        let n = self.grid.n();
        let coeffs = Array2::from_shape_fn((n, n), |(i, j)| {
            let (kx, ky) = self.grid.wavenumber(i, j);
            self.coeffs[(i, j)] * g(kx, ky)
        });
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// Multiplier that is odd in `k`: the unpaired Nyquist rows are
    /// annihilated so the result of a real field stays real.
    pub fn multiply_odd(&self, g: impl Fn(f64, f64) -> Complex64) -> SpectralField {
        let n = self.grid.n();
        let nyq = -(n as i64) / 2;
        let coeffs = Array2::from_shape_fn((n, n), |(i, j)| {
            if self.grid.mode(i) == nyq || self.grid.mode(j) == nyq {
                return Complex64::new(0.0, 0.0);
            }
            let (kx, ky) = self.grid.wavenumber(i, j);
            self.coeffs[(i, j)] * g(kx, ky)
        });
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn gradient(&self) -> (SpectralField, SpectralField) {
        let gx = self.multiply_odd(|kx, _| Complex64::new(0.0, kx));
        let gy = self.multiply_odd(|_, ky| Complex64::new(0.0, ky));
        (gx, gy)
    }

    /// Coefficients multiplied by `|k|^{2 gamma}`; the zero mode (and the
    /// unresolved Nyquist rows, matching the gradient) are annihilated.
    pub fn fractional_laplacian(&self, gamma: f64) -> Result<SpectralField> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
                range: "(0, 1]",
            });
        }
        Ok(self.multiply_odd(|kx, ky| {
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(k2.powf(gamma), 0.0)
            }
        }))
    }

    /// 2/3-rule dealiasing: zeroes every coefficient with
    /// `max(|m1|, |m2|) > n/3` (integer modes).
    pub fn dealias(&self) -> SpectralField {
        let n = self.grid.n() as i64;
        let mut out = self.clone();
        let grid = self.grid;
        for ((i, j), c) in out.coeffs.indexed_iter_mut() {
            let mx = grid.mode(i).abs();
            let my = grid.mode(j).abs();
            if 3 * mx.max(my) > n {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// `|zero mode| <= tol * l2` check used before negative-order
    /// multipliers.
    pub fn require_mean_zero(&self) -> Result<()> {
        let zero = self.coeffs[(0, 0)].norm();
        let tol = MEAN_ZERO_TOL * self.l2();
        if zero > tol && zero > 0.0 {
            return Err(Error::NotMeanZero {
                zero_mode: zero,
                tol,
            });
        }
        Ok(())
    }
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Self {
        assert_eq!(x.grid(), y.grid(), "components must share one grid");
        Self { x, y }
    }

    pub fn grid(&self) -> TorusGrid {
        self.x.grid()
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    /// `(int |v|^2 dx)^{1/2}`.
    pub fn l2(&self) -> f64 {
        (self.x.l2().powi(2) + self.y.l2().powi(2)).sqrt()
    }

    /// `max_x |v(x)|` (Euclidean magnitude on grid points).
    pub fn linf(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }

    /// Vector value at an arbitrary point by bilinear interpolation.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x.sample(x, y), self.y.sample(x, y))
    }
}

pub(crate) fn to_physical_pair(gx: &SpectralField, gy: &SpectralField) -> VectorField {
    VectorField::new(gx.to_physical_unchecked(), gy.to_physical_unchecked())
}

impl SpectralField {
    /// Inverse transform of a spectral pair into a vector field.
    pub fn pair_to_physical(gx: &SpectralField, gy: &SpectralField) -> VectorField {
        to_physical_pair(gx, gy)
    }
}

impl ScalarField {
    /// `d/dx` and `d/dy` of the field as a vector field (same as
    /// [`ScalarField::gradient`], kept for call sites that already hold a
    /// spectral copy).
    pub fn gradient_of(spec: &SpectralField) -> VectorField {
        let (gx, gy) = spec.gradient();
        to_physical_pair(&gx, &gy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::with_default_period(n).unwrap()
    }

    fn random_field(g: TorusGrid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((g.n(), g.n()), |_| rng.gen_range(-1.0..1.0));
        ScalarField::from_values(g, values).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TorusGrid::with_default_period(8).is_err());
        assert!(TorusGrid::with_default_period(48).is_err());
        assert!(TorusGrid::new(32, -1.0).is_err());
        assert!(TorusGrid::with_default_period(32).is_ok());
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let f = ScalarField::zeros(grid(16));
        let spec = f.to_spectral().unwrap();
        assert!(spec.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cosine_concentrates_on_two_modes() {
        let g = grid(32);
        let f = ScalarField::from_fn(g, |x, _| x.cos());
        let spec = f.to_spectral().unwrap();
        let at = |mx: i64, my: i64| spec.coeff_at_mode(mx, my).norm();
        assert!(at(1, 0) > 1.0);
        assert_relative_eq!(at(1, 0), at(-1, 0), max_relative = 1e-12);
        let mut off = 0.0f64;
        for i in 0..32 {
            for j in 0..32 {
                let (mx, my) = (g.mode(i), g.mode(j));
                if !(my == 0 && mx.abs() == 1) {
                    off = off.max(spec.coeffs()[(i, j)].norm());
                }
            }
        }
        assert!(off < 1e-12 * at(1, 0));
    }

    #[test]
    fn parseval_against_direct_quadrature() {
        // oracle: direct quadrature of the squared samples
        for n in [16, 64] {
            let g = grid(n);
            let f = random_field(g, 7);
            let quad = (f.values().iter().map(|v| v * v).sum::<f64>() * g.cell_area()).sqrt();
            let spec = f.to_spectral().unwrap();
            assert_relative_eq!(spec.l2(), quad, max_relative = 1e-12);
        }
    }

    #[test]
    fn parseval_holds_for_non_default_period() {
        let g = TorusGrid::new(32, 1.0).unwrap();
        let f = random_field(g, 11);
        let quad = (f.values().iter().map(|v| v * v).sum::<f64>() * g.cell_area()).sqrt();
        assert_relative_eq!(f.to_spectral().unwrap().l2(), quad, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = grid(64);
        let f = random_field(g, 3);
        let back = f.to_spectral().unwrap().to_physical().unwrap();
        let err = f
            .values()
            .iter()
            .zip(back.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12 * f.linf());
    }

    #[test]
    fn inverse_rejects_asymmetric_coefficients() {
        let g = grid(16);
        let mut spec = SpectralField::zeros(g);
        spec.set_mode(1, 0, Complex64::new(0.0, 1.0));
        // missing conjugate partner at (-1, 0)
        assert!(matches!(
            spec.to_physical(),
            Err(Error::AsymmetricSpectrum { .. })
        ));
    }

    #[test]
    fn two_symmetric_deltas_give_cosine() {
        let g = grid(16);
        let mut spec = SpectralField::zeros(g);
        spec.set_mode(1, 0, Complex64::new(0.5, 0.0));
        spec.set_mode(-1, 0, Complex64::new(0.5, 0.0));
        let f = spec.to_physical().unwrap();
        let expected = ScalarField::from_fn(g, |x, _| x.cos());
        // proportional to cos(x): fit the single scale factor first
        let scale = f.values()[(0, 0)] / expected.values()[(0, 0)];
        for (a, b) in f.values().iter().zip(expected.values().iter()) {
            assert_relative_eq!(*a, scale * b, epsilon = 1e-12 * scale.abs());
        }
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let g = grid(32);
        let f = ScalarField::from_fn(g, |x, _| x.sin());
        let grad = f.gradient().unwrap();
        let cx = ScalarField::from_fn(g, |x, _| x.cos());
        let ex = grad
            .x
            .values()
            .iter()
            .zip(cx.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(ex < 1e-12);
        assert!(grad.y.linf() < 1e-12);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, |_, _| 4.25);
        let grad = f.gradient().unwrap();
        assert!(grad.x.linf() < 1e-13 && grad.y.linf() < 1e-13);
    }

    #[test]
    fn gradient_matches_fourth_order_differences() {
        // oracle: centered 4th-order stencil; error should shrink ~16x per
        // refinement for a smooth field
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = grid(n);
            let f = ScalarField::from_fn(g, |x, y| (x.sin()).exp() * y.cos());
            let grad = f.gradient().unwrap();
            let h = g.spacing();
            let v = f.values();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let ip = |d: i64| ((i as i64 + d).rem_euclid(n as i64)) as usize;
                    let fd = (-v[(ip(2), j)] + 8.0 * v[(ip(1), j)] - 8.0 * v[(ip(-1), j)]
                        + v[(ip(-2), j)])
                        / (12.0 * h);
                    worst = worst.max((grad.x.values()[(i, j)] - fd).abs());
                }
            }
            errs.push(worst);
        }
        assert!(errs[1] < errs[0] / 8.0, "expected ~O(h^4): {errs:?}");
    }

    #[test]
    fn fractional_laplacian_eigenvalues() {
        let g = grid(32);
        // |k| = 2 single mode, gamma = 1/2 -> factor 2
        let f = ScalarField::from_fn(g, |x, _| (2.0 * x).cos());
        let out = f.fractional_laplacian(0.5).unwrap();
        let expected = f.scale(2.0);
        let err = out
            .values()
            .iter()
            .zip(expected.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);

        // gamma = 1 on sin(x): eigenvalue 1
        let s = ScalarField::from_fn(g, |x, _| x.sin());
        let out = s.fractional_laplacian(1.0).unwrap();
        let err = out
            .values()
            .iter()
            .zip(s.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);
    }

    #[test]
    fn fractional_laplacian_matches_dense_spectral_sum() {
        // oracle: dense double sum over all modes at n = 16
        let g = grid(16);
        let f = random_field(g, 5);
        let gamma = 0.7;
        let spec = f.to_spectral().unwrap();
        let out = f.fractional_laplacian(gamma).unwrap();
        let n = g.n();
        let l = g.length();
        let nyq = -(n as i64) / 2;
        for &(pi, pj) in &[(0usize, 0usize), (3, 11), (9, 2)] {
            let (x, y) = g.point(pi, pj);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    if g.mode(i) == nyq || g.mode(j) == nyq {
                        continue;
                    }
                    let (kx, ky) = g.wavenumber(i, j);
                    let k2 = kx * kx + ky * ky;
                    let mult = if k2 == 0.0 { 0.0 } else { k2.powf(gamma) };
                    let phase = Complex64::new(0.0, kx * x + ky * y).exp();
                    acc += spec.coeffs()[(i, j)] * mult * phase;
                }
            }
            let oracle = acc.re / l;
            assert_relative_eq!(out.values()[(pi, pj)], oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn fractional_laplacian_rejects_bad_gamma() {
        let f = ScalarField::zeros(grid(16));
        assert!(f.fractional_laplacian(0.0).is_err());
        assert!(f.fractional_laplacian(1.5).is_err());
    }

    #[test]
    fn laplacian_agrees_with_divergence_of_gradient() {
        let g = grid(32);
        let f = random_field(g, 9);
        let lap = f.fractional_laplacian(1.0).unwrap();
        let (gx, gy) = f.to_spectral().unwrap().gradient();
        let (gxx, _) = gx.gradient();
        let (_, gyy) = gy.gradient();
        let mut div = gxx;
        for (d, s) in div.coeffs_mut().iter_mut().zip(gyy.coeffs().iter()) {
            *d += s;
        }
        let div = div.to_physical().unwrap().scale(-1.0);
        let scale = lap.linf();
        let err = lap
            .values()
            .iter()
            .zip(div.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10 * scale);
    }

    #[test]
    fn dealias_keeps_low_modes_and_kills_high() {
        let g = grid(16);
        let mut spec = SpectralField::zeros(g);
        spec.set_mode(2, 3, Complex64::new(1.0, 0.5));
        spec.set_mode(-2, -3, Complex64::new(1.0, -0.5));
        let kept = spec.dealias();
        assert_eq!(kept.coeff_at_mode(2, 3), Complex64::new(1.0, 0.5));

        let mut hi = SpectralField::zeros(g);
        hi.set_mode(7, 0, Complex64::new(1.0, 0.0));
        assert_eq!(hi.dealias().coeff_at_mode(7, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dealiased_product_matches_exact_convolution() {
        // oracle: dense convolution of the coefficient sequences at n = 16
        let g = grid(16);
        let n = g.n() as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut mk = |seed_shift: u64| {
            let _ = seed_shift;
            let mut spec = SpectralField::zeros(g);
            for mx in -5i64..=5 {
                for my in -5i64..=5 {
                    if (mx, my) <= (0, 0) {
                        continue;
                    }
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    spec.set_mode(mx, my, c);
                    spec.set_mode(-mx, -my, c.conj());
                }
            }
            spec
        };
        let fa = mk(0);
        let fb = mk(1);
        let a = fa.to_physical().unwrap();
        let b = fb.to_physical().unwrap();
        let product = a.mul(&b).to_spectral().unwrap().dealias();

        let l = g.length();
        for i in 0..g.n() {
            for j in 0..g.n() {
                let (mx, my) = (g.mode(i), g.mode(j));
                if 3 * mx.abs().max(my.abs()) > n {
                    continue;
                }
                // product coefficients convolve with a 1/L factor in this
                // normalization
                let mut acc = Complex64::new(0.0, 0.0);
                for ax in -5i64..=5 {
                    for ay in -5i64..=5 {
                        let bx = mx - ax;
                        let by = my - ay;
                        if bx.abs() > 5 || by.abs() > 5 {
                            continue;
                        }
                        acc += fa.coeff_at_mode(ax, ay) * fb.coeff_at_mode(bx, by);
                    }
                }
                let oracle = acc / l;
                let got = product.coeffs()[(i, j)];
                assert!(
                    (got - oracle).norm() < 1e-12,
                    "mode ({mx},{my}): {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = TorusGrid::new(16, 1.75).unwrap();
        let f = random_field(g, 13);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let back = ScalarField::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid().n(), 16);
        assert_eq!(back.grid().length().to_bits(), g.length().to_bits());
        for (a, b) in f.values().iter().zip(back.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = grid(16);
        let mut values = Array2::zeros((16, 16));
        values[(3, 3)] = f64::NAN;
        assert!(matches!(
            ScalarField::from_values(g, values),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn transforms_preserve_conjugate_symmetry() {
        let g = grid(32);
        let f = random_field(g, 17);
        let spec = f.to_spectral().unwrap();
        assert!(spec.symmetry_residual() < 1e-13 * spec.l2());
        let grad = spec.gradient().0;
        assert!(grad.symmetry_residual() < 1e-12 * (1.0 + grad.l2()));
    }
}
