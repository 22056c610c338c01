//! Constitutive velocity operators as Fourier multipliers, plus the
//! numerical diagnostics for their boundedness and stability properties.
//!
//! Built-in laws (`k_perp = (-k2, k1)`):
//! - Biot-Savart: `m(k) = i k_perp / |k|^2`, the stream-function velocity
//!   of 2D vorticity transport.
//! - SQG: `m(k) = i k_perp / |k|`.
//! - Attractive Newtonian: `m(k) = i k / |k|^2` (aggregation toward mass).
//!
//! The zero mode always maps to zero velocity.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{bmo_norm_full, lp_norm, sobolev_norm};
use crate::spectral::{ScalarField, SpectralField, VectorField};

/// Overall sign for the Newtonian law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NewtonianSign {
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone)]
pub enum VelocityLaw {
    BiotSavart2D,
    Sqg,
    Newtonian(NewtonianSign),
    /// Velocity identically zero (transport switched off).
    None,
    /// Explicit multiplier table keyed by integer mode.
    Custom(MultiplierTable),
}

#[derive(Debug, Clone, Default)]
pub struct MultiplierTable {
    entries: BTreeMap<(i64, i64), (Complex64, Complex64)>,
}

impl MultiplierTable {
    /// Parses CSV rows `kx,ky,re_m1,im_m1,re_m2,im_m2`. Missing opposite
    /// modes are filled by conjugate symmetry; conflicting ones are
    /// rejected (the output of a real field must stay real).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("kx") {
                continue;
            }
            let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if parts.len() != 6 {
                return Err(Error::MalformedTable(format!(
                    "line {}: expected 6 fields, got {}",
                    line_no + 1,
                    parts.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::MalformedTable(format!("line {}: bad number {s:?}", line_no + 1)))
            };
            let kx = num(parts[0])? as i64;
            let ky = num(parts[1])? as i64;
            let m1 = Complex64::new(num(parts[2])?, num(parts[3])?);
            let m2 = Complex64::new(num(parts[4])?, num(parts[5])?);
            entries.insert((kx, ky), (m1, m2));
        }
        let mut table = Self { entries };
        table.symmetrize()?;
        Ok(table)
    }

    pub fn insert(&mut self, mode: (i64, i64), m: (Complex64, Complex64)) {
        self.entries.insert(mode, m);
    }

    fn symmetrize(&mut self) -> Result<()> {
        let snapshot: Vec<_> = self.entries.iter().map(|(k, v)| (*k, *v)).collect();
        for ((kx, ky), (m1, m2)) in snapshot {
            let opp = (-kx, -ky);
            match self.entries.get(&opp) {
                None => {
                    self.entries.insert(opp, (m1.conj(), m2.conj()));
                }
                Some(&(o1, o2)) => {
                    if (o1 - m1.conj()).norm() > 1e-12 || (o2 - m2.conj()).norm() > 1e-12 {
                        return Err(Error::MalformedTable(format!(
                            "modes ({kx},{ky}) and ({},{}) are not conjugate-symmetric",
                            -kx, -ky
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, mode: (i64, i64)) -> (Complex64, Complex64) {
        self.entries
            .get(&mode)
            .copied()
            .unwrap_or((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)))
    }

    pub fn modes(&self) -> impl Iterator<Item = (&(i64, i64), &(Complex64, Complex64))> {
        self.entries.iter()
    }
}

/// Closed-form facts about a law's symbol on the integer lattice.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymbolFacts {
    /// `sup_k |k| |m(k)|` when finite (the analytic sufficient condition
    /// for the `H^-1` stability bound for multiplier laws).
    pub hminus1_constant: Option<f64>,
    /// `sup_k |m(k)|` when finite (the `L^2` analogue).
    pub l2_constant: Option<f64>,
    /// Whether `k . m(k) = 0` identically (divergence-free output).
    pub divergence_free: bool,
}

impl VelocityLaw {
    /// Multiplier value at physical wavenumber `(kx, ky)`.
    fn multiplier(&self, kx: f64, ky: f64) -> (Complex64, Complex64) {
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        match self {
            VelocityLaw::BiotSavart2D => (
                Complex64::new(0.0, -ky / k2),
                Complex64::new(0.0, kx / k2),
            ),
            VelocityLaw::Sqg => {
                let k = k2.sqrt();
                (Complex64::new(0.0, -ky / k), Complex64::new(0.0, kx / k))
            }
            VelocityLaw::Newtonian(sign) => {
                let s = match sign {
                    NewtonianSign::Attractive => 1.0,
                    NewtonianSign::Repulsive => -1.0,
                };
                (
                    Complex64::new(0.0, s * kx / k2),
                    Complex64::new(0.0, s * ky / k2),
                )
            }
            VelocityLaw::None => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            VelocityLaw::Custom(_) => unreachable!("custom handled by integer mode"),
        }
    }

    /// Spectral velocity components for a scalar spectrum.
    pub fn apply_spectral(&self, rho: &SpectralField) -> (SpectralField, SpectralField) {
        match self {
            VelocityLaw::Custom(table) => {
                let grid = rho.grid();
                let mut vx = SpectralField::zeros(grid);
                let mut vy = SpectralField::zeros(grid);
                let n = grid.n();
                for i in 0..n {
                    for j in 0..n {
                        let mode = (grid.mode(i), grid.mode(j));
                        let (m1, m2) = table.get(mode);
                        let c = rho.coeffs()[(i, j)];
                        vx.coeffs_mut()[(i, j)] = c * m1;
                        vy.coeffs_mut()[(i, j)] = c * m2;
                    }
                }
                (vx, vy)
            }
            _ => {
                let vx = rho.multiply_odd(|kx, ky| self.multiplier(kx, ky).0);
                let vy = rho.multiply_odd(|kx, ky| self.multiplier(kx, ky).1);
                (vx, vy)
            }
        }
    }

    /// Symbol facts on the (unbounded) integer lattice for built-in laws;
    /// for custom tables the suprema are over the listed modes.
    pub fn symbol_facts(&self) -> SymbolFacts {
        match self {
            // |m| = 1/|k| so |k||m| = 1
            VelocityLaw::BiotSavart2D | VelocityLaw::Newtonian(_) => SymbolFacts {
                hminus1_constant: Some(1.0),
                l2_constant: Some(1.0),
                divergence_free: matches!(self, VelocityLaw::BiotSavart2D),
            },
            // |m| = 1 so |k||m| = |k| is unbounded
            VelocityLaw::Sqg => SymbolFacts {
                hminus1_constant: None,
                l2_constant: Some(1.0),
                divergence_free: true,
            },
            VelocityLaw::None => SymbolFacts {
                hminus1_constant: Some(0.0),
                l2_constant: Some(0.0),
                divergence_free: true,
            },
            VelocityLaw::Custom(table) => {
                let mut h = 0.0f64;
                let mut l = 0.0f64;
                let mut divfree = true;
                for (&(kx, ky), &(m1, m2)) in table.modes() {
                    let k = ((kx * kx + ky * ky) as f64).sqrt();
                    let mag = (m1.norm_sqr() + m2.norm_sqr()).sqrt();
                    h = h.max(k * mag);
                    l = l.max(mag);
                    let dot = m1 * kx as f64 + m2 * ky as f64;
                    if dot.norm() > 1e-12 * (1.0 + mag * k) {
                        divfree = false;
                    }
                }
                SymbolFacts {
                    hminus1_constant: Some(h),
                    l2_constant: Some(l),
                    divergence_free: divfree,
                }
            }
        }
    }

    pub fn config_name(&self) -> String {
        match self {
            VelocityLaw::BiotSavart2D => "biot_savart".into(),
            VelocityLaw::Sqg => "sqg".into(),
            VelocityLaw::Newtonian(NewtonianSign::Attractive) => "newtonian_attractive".into(),
            VelocityLaw::Newtonian(NewtonianSign::Repulsive) => "newtonian_repulsive".into(),
            VelocityLaw::None => "none".into(),
            VelocityLaw::Custom(_) => "custom".into(),
        }
    }
}

/// Velocity of a scalar density: spectral multiplication followed by the
/// inverse transform. The zero mode is annihilated regardless of the law.
pub fn apply_velocity(law: &VelocityLaw, rho: &ScalarField) -> Result<VectorField> {
    let spec = rho.to_spectral()?;
    let (vx, vy) = law.apply_spectral(&spec);
    Ok(SpectralField::pair_to_physical(&vx, &vy))
}

/// All four partial derivatives `d_i v_j` of the velocity.
pub struct VelocityGradient {
    pub dx_vx: ScalarField,
    pub dy_vx: ScalarField,
    pub dx_vy: ScalarField,
    pub dy_vy: ScalarField,
}

impl VelocityGradient {
    pub fn components(&self) -> [&ScalarField; 4] {
        [&self.dx_vx, &self.dy_vx, &self.dx_vy, &self.dy_vy]
    }

    /// `||grad v||_2` over all four components.
    pub fn l2(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Max of the component BMO norms.
    pub fn bmo(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| bmo_norm_full(c))
            .fold(0.0, f64::max)
    }

    /// Max of the component `L^p` norms.
    pub fn lp(&self, p: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for c in self.components() {
            worst = worst.max(lp_norm(c, p)?);
        }
        Ok(worst)
    }
}

/// Gradient of the velocity with multipliers `i k_i m_j(k)`.
pub fn velocity_gradient(law: &VelocityLaw, rho: &ScalarField) -> Result<VelocityGradient> {
    let spec = rho.to_spectral()?;
    let (vx, vy) = law.apply_spectral(&spec);
    let (dx_vx, dy_vx) = vx.gradient();
    let (dx_vy, dy_vy) = vy.gradient();
    Ok(VelocityGradient {
        dx_vx: dx_vx.to_physical()?,
        dy_vx: dy_vx.to_physical()?,
        dx_vy: dx_vy.to_physical()?,
        dy_vy: dy_vy.to_physical()?,
    })
}

/// Empirical condition diagnostics over a corpus of fields.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `sup ||grad V f||_BMO / ||f||_BMO`.
    pub c2_bmo_ratio: f64,
    /// `sup_p sup_f ||grad V f||_p / (p ||f||_p)`.
    pub c2_lp_ratio: f64,
    /// `sup ||V f||_2 / ||f||_{H^-1}` (the stability quotient).
    pub c3_ratio: f64,
    /// `sup ||V f||_2 / ||f||_2` (the L^2 analogue).
    pub l2_ratio: f64,
    /// `sup ||div V f||_2 / ||f||_2`.
    pub divfree_residual: f64,
    /// Closed-form symbol facts (exact for built-in laws).
    pub symbol: SymbolFacts,
}

/// Measures the condition ratios over a corpus; fields must be mean-zero.
pub fn check_conditions(
    law: &VelocityLaw,
    corpus: &[ScalarField],
    p_list: &[f64],
) -> Result<ConditionReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut c2_bmo = 0.0f64;
    let mut c2_lp = 0.0f64;
    let mut c3 = 0.0f64;
    let mut l2r = 0.0f64;
    let mut div = 0.0f64;
    for f in corpus {
        let grad = velocity_gradient(law, f)?;
        let f_bmo = bmo_norm_full(f);
        if f_bmo > 0.0 {
            c2_bmo = c2_bmo.max(grad.bmo() / f_bmo);
        }
        for &p in p_list {
            let fp = lp_norm(f, p)?;
            if fp > 0.0 {
                c2_lp = c2_lp.max(grad.lp(p)? / (p * fp));
            }
        }
        let v = apply_velocity(law, f)?;
        let hm1 = sobolev_norm(f, -1.0)?;
        if hm1 > 0.0 {
            c3 = c3.max(v.l2() / hm1);
        }
        let fl2 = f.l2();
        if fl2 > 0.0 {
            l2r = l2r.max(v.l2() / fl2);
            let divergence = grad.dx_vx.add_scaled(1.0, &grad.dy_vy);
            div = div.max(divergence.l2() / fl2);
        }
    }
    Ok(ConditionReport {
        c2_bmo_ratio: c2_bmo,
        c2_lp_ratio: c2_lp,
        c3_ratio: c3,
        l2_ratio: l2r,
        divfree_residual: div,
        symbol: law.symbol_facts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial;
    use crate::spectral::TorusGrid;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::with_default_period(n).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values().iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn biot_savart_of_product_mode() {
        // -Delta phi = omega with omega = sin x sin y gives phi = omega/2,
        // v = (-d_y phi, d_x phi)
        let g = grid(64);
        let omega = ScalarField::from_fn(g, |x, y| x.sin() * y.sin());
        let v = apply_velocity(&VelocityLaw::BiotSavart2D, &omega).unwrap();
        let vx_expect = ScalarField::from_fn(g, |x, y| -0.5 * x.sin() * y.cos());
        let vy_expect = ScalarField::from_fn(g, |x, y| 0.5 * x.cos() * y.sin());
        assert!(max_diff(&v.x, &vx_expect) < 1e-12);
        assert!(max_diff(&v.y, &vy_expect) < 1e-12);
    }

    #[test]
    fn sqg_single_mode() {
        // rho = cos x: multiplier i(0, 1) on k = (1,0) gives v = (0, -sin x)
        let g = grid(32);
        let rho = ScalarField::from_fn(g, |x, _| x.cos());
        let v = apply_velocity(&VelocityLaw::Sqg, &rho).unwrap();
        let vy_expect = ScalarField::from_fn(g, |x, _| -x.sin());
        assert!(v.x.linf() < 1e-12);
        assert!(max_diff(&v.y, &vy_expect) < 1e-12);
    }

    #[test]
    fn newtonian_single_mode() {
        let g = grid(32);
        let rho = ScalarField::from_fn(g, |x, _| (2.0 * x).cos());
        let v = apply_velocity(&VelocityLaw::Newtonian(NewtonianSign::Attractive), &rho).unwrap();
        // m(k) = i k/|k|^2: at k=(2,0) the factor is i/2, so
        // v_x = -(1/2) sin(2x)
        let vx_expect = ScalarField::from_fn(g, |x, _| -0.5 * (2.0 * x).sin());
        assert!(max_diff(&v.x, &vx_expect) < 1e-12);
        assert!(v.y.linf() < 1e-12);
        // the repulsive flag flips the sign
        let w = apply_velocity(&VelocityLaw::Newtonian(NewtonianSign::Repulsive), &rho).unwrap();
        assert!(max_diff(&w.x, &vx_expect.scale(-1.0)) < 1e-12);
    }

    #[test]
    fn zero_density_gives_zero_velocity() {
        let g = grid(16);
        for law in [
            VelocityLaw::BiotSavart2D,
            VelocityLaw::Sqg,
            VelocityLaw::Newtonian(NewtonianSign::Attractive),
            VelocityLaw::None,
        ] {
            let v = apply_velocity(&law, &ScalarField::zeros(g)).unwrap();
            assert_eq!(v.linf(), 0.0);
        }
    }

    #[test]
    fn velocity_is_linear() {
        let g = grid(32);
        let f = initial::random_spectrum(g, 2.5, 1.0, 1).unwrap();
        let h = initial::random_spectrum(g, 2.5, 1.0, 2).unwrap();
        let law = VelocityLaw::BiotSavart2D;
        let combo = f.scale(2.0).add_scaled(-3.0, &h);
        let v_combo = apply_velocity(&law, &combo).unwrap();
        let vf = apply_velocity(&law, &f).unwrap();
        let vh = apply_velocity(&law, &h).unwrap();
        let expect_x = vf.x.scale(2.0).add_scaled(-3.0, &vh.x);
        assert!(max_diff(&v_combo.x, &expect_x) < 1e-12);
    }

    #[test]
    fn gradient_trace_vanishes_for_divergence_free_laws() {
        let g = grid(32);
        let f = initial::random_spectrum(g, 2.0, 1.0, 5).unwrap();
        for law in [VelocityLaw::BiotSavart2D, VelocityLaw::Sqg] {
            let grad = velocity_gradient(&law, &f).unwrap();
            let trace = grad.dx_vx.add_scaled(1.0, &grad.dy_vy);
            assert!(
                trace.l2() < 1e-12 * f.l2(),
                "{}: residual {}",
                law.config_name(),
                trace.l2()
            );
        }
    }

    #[test]
    fn sqg_derivative_scales_on_single_mode() {
        let g = grid(32);
        let rho = ScalarField::from_fn(g, |x, _| (2.0 * x).cos());
        let v = apply_velocity(&VelocityLaw::Sqg, &rho).unwrap();
        let grad = velocity_gradient(&VelocityLaw::Sqg, &rho).unwrap();
        assert_relative_eq!(grad.l2(), 2.0 * v.l2(), max_relative = 1e-12);
    }

    #[test]
    fn velocity_gradient_matches_composition() {
        let g = grid(32);
        let f = initial::random_spectrum(g, 2.0, 1.0, 9).unwrap();
        let grad = velocity_gradient(&VelocityLaw::Sqg, &f).unwrap();
        let v = apply_velocity(&VelocityLaw::Sqg, &f).unwrap();
        let gx = v.x.gradient().unwrap();
        assert!(max_diff(&grad.dx_vx, &gx.x) < 1e-12);
        assert!(max_diff(&grad.dy_vx, &gx.y) < 1e-12);
    }

    #[test]
    fn symbol_facts_match_the_closed_forms() {
        let bs = VelocityLaw::BiotSavart2D.symbol_facts();
        assert_eq!(bs.hminus1_constant, Some(1.0));
        assert!(bs.divergence_free);

        let sqg = VelocityLaw::Sqg.symbol_facts();
        assert_eq!(sqg.hminus1_constant, None); // |k||m(k)| unbounded
        assert_eq!(sqg.l2_constant, Some(1.0));

        let newt = VelocityLaw::Newtonian(NewtonianSign::Attractive).symbol_facts();
        assert_eq!(newt.hminus1_constant, Some(1.0));
        assert!(!newt.divergence_free);
    }

    #[test]
    fn condition_report_on_corpus() {
        let g = grid(64);
        let corpus: Vec<ScalarField> = (0..4)
            .map(|s| initial::random_spectrum(g, 2.5, 1.0, s).unwrap())
            .collect();
        let report = check_conditions(&VelocityLaw::BiotSavart2D, &corpus, &[4.0, 8.0]).unwrap();
        assert!(report.c3_ratio <= 1.0 + 1e-10, "c3 {}", report.c3_ratio);
        assert!(report.divfree_residual < 1e-12);
        assert!(report.c2_bmo_ratio.is_finite() && report.c2_bmo_ratio > 0.0);

        let sqg = check_conditions(&VelocityLaw::Sqg, &corpus, &[4.0]).unwrap();
        assert!(sqg.l2_ratio <= 1.0 + 1e-10); // unimodular multiplier
        assert!(sqg.c3_ratio > 1.0); // H^-1 control fails empirically too

        assert!(check_conditions(&VelocityLaw::Sqg, &[], &[4.0]).is_err());
    }

    #[test]
    fn custom_table_round_trip_and_symmetry() {
        let csv = "kx,ky,re_m1,im_m1,re_m2,im_m2\n1,0,0,0,0,-0.5\n0,1,0,0.25,0,0\n";
        let table = MultiplierTable::from_csv(csv).unwrap();
        // opposite modes auto-filled with conjugates
        let (m1, m2) = table.get((-1, 0));
        assert_eq!(m1, Complex64::new(0.0, 0.0));
        assert_eq!(m2, Complex64::new(0.0, 0.5));
        let law = VelocityLaw::Custom(table);
        let g = grid(16);
        let rho = ScalarField::from_fn(g, |x, _| x.cos());
        let v = apply_velocity(&law, &rho).unwrap();
        // m2 = -i/2 at k=(1,0) gives v_y = (1/2)(-i e^{ix} + i e^{-ix})/2
        // = (1/2) sin x
        let vy_expect = ScalarField::from_fn(g, |x, _| 0.5 * x.sin());
        assert!(max_diff(&v.y, &vy_expect) < 1e-12);

        let bad = "1,0,0,0,0,1\n-1,0,0,0,0,1\n"; // not conjugate-symmetric
        assert!(MultiplierTable::from_csv(bad).is_err());
    }
}
