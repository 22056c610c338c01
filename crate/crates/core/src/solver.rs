//! Time integration of the two model classes on the torus.
//!
//! Type 1 is the conservative form `rho_t + div(rho V rho) = Lap A(rho)`
//! with non-decreasing `A`; Type 2 the advective form
//! `rho_t + (V rho . grad) rho = -nu (-Lap)^gamma rho` for divergence-free
//! laws. Nonlinear terms are evaluated pseudospectrally with 2/3-rule
//! dealiasing and advanced by classical four-stage Runge-Kutta; linear
//! dissipation is folded in exactly through an integrating factor.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ScalarField, SpectralField, TorusGrid, VectorField};
use crate::velocity::VelocityLaw;

/// Nonlinear diffusion `A` in the conservative model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DiffusionSpec {
    None,
    /// `A(rho) = nu rho`.
    Linear { nu: f64 },
    /// `A(rho) = nu sign(rho) |rho|^m`.
    Porous { nu: f64, m: f64 },
}

impl DiffusionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffusionSpec::None => Ok(()),
            DiffusionSpec::Linear { nu } => {
                if nu < 0.0 {
                    return Err(Error::OutOfRange {
                        name: "nu",
                        value: nu,
                        range: "[0, inf)",
                    });
                }
                Ok(())
            }
            DiffusionSpec::Porous { nu, m } => {
                if nu < 0.0 {
                    return Err(Error::OutOfRange {
                        name: "nu",
                        value: nu,
                        range: "[0, inf)",
                    });
                }
                if m < 1.0 {
                    return Err(Error::OutOfRange {
                        name: "m",
                        value: m,
                        range: "[1, inf)",
                    });
                }
                Ok(())
            }
        }
    }

    /// Pointwise `A(rho)`; non-decreasing by construction.
    pub fn apply(&self, rho: f64) -> f64 {
        match *self {
            DiffusionSpec::None => 0.0,
            DiffusionSpec::Linear { nu } => nu * rho,
            DiffusionSpec::Porous { nu, m } => nu * rho.signum() * rho.abs().powf(m),
        }
    }
}

/// Conservative transport problem.
#[derive(Clone)]
pub struct Type1Problem {
    pub law: VelocityLaw,
    pub diffusion: DiffusionSpec,
    pub grid: TorusGrid,
    pub dt: f64,
    pub t_end: f64,
    pub initial: ScalarField,
}

/// Advective problem with fractional dissipation; the law must be
/// divergence-free.
#[derive(Clone)]
pub struct Type2Problem {
    pub law: VelocityLaw,
    pub nu: f64,
    pub gamma: f64,
    pub grid: TorusGrid,
    pub dt: f64,
    pub t_end: f64,
    pub initial: ScalarField,
}

#[derive(Clone)]
pub enum Problem {
    Type1(Type1Problem),
    Type2(Type2Problem),
}

impl Type1Problem {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        validate_time(self.dt, self.t_end)
    }
}

impl Type2Problem {
    pub fn validate(&self) -> Result<()> {
        if self.nu < 0.0 {
            return Err(Error::OutOfRange {
                name: "nu",
                value: self.nu,
                range: "[0, inf)",
            });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: self.gamma,
                range: "(0, 1]",
            });
        }
        let facts = self.law.symbol_facts();
        if !facts.divergence_free {
            return Err(Error::NotDivergenceFree(f64::NAN));
        }
        validate_time(self.dt, self.t_end)
    }
}

fn validate_time(dt: f64, t_end: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::OutOfRange {
            name: "dt",
            value: dt,
            range: "(0, inf)",
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t_end",
            value: t_end,
            range: "[0, inf)",
        });
    }
    Ok(())
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::Type1(p) => p.validate(),
            Problem::Type2(p) => p.validate(),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        match self {
            Problem::Type1(p) => p.grid,
            Problem::Type2(p) => p.grid,
        }
    }

    pub fn initial(&self) -> &ScalarField {
        match self {
            Problem::Type1(p) => &p.initial,
            Problem::Type2(p) => &p.initial,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Problem::Type1(p) => p.dt,
            Problem::Type2(p) => p.dt,
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Problem::Type1(p) => p.t_end,
            Problem::Type2(p) => p.t_end,
        }
    }

    pub fn law(&self) -> &VelocityLaw {
        match self {
            Problem::Type1(p) => &p.law,
            Problem::Type2(p) => &p.law,
        }
    }
}

/// CFL safety factor for advection and explicit diffusion.
const CFL_SAFETY: f64 = 0.5;
/// Bound on dt halvings before a step is rejected.
const MAX_HALVINGS: u32 = 30;

/// Advances one problem; caches the integrating-factor arrays per dt.
pub struct Stepper {
    problem: Problem,
    /// `exp(L dt/2)` and `exp(L dt)` for the cached dt.
    cached: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl Stepper {
    pub fn new(problem: Problem) -> Result<Self> {
        problem.validate()?;
        Ok(Self {
            problem,
            cached: None,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Spectral symbol of the exactly-integrated linear part.
    fn linear_symbol(&self, k2: f64) -> f64 {
        match &self.problem {
            Problem::Type1(p) => match p.diffusion {
                DiffusionSpec::Linear { nu } => -nu * k2,
                _ => 0.0,
            },
            Problem::Type2(p) => {
                if k2 == 0.0 {
                    0.0
                } else {
                    -p.nu * k2.powf(p.gamma)
                }
            }
        }
    }

    fn exp_factors(&mut self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        if let Some((cached_dt, half, full)) = &self.cached {
            if cached_dt.to_bits() == dt.to_bits() {
                return (half.clone(), full.clone());
            }
        }
        let grid = self.problem.grid();
        let n = grid.n();
        let mut half = Vec::with_capacity(n * n);
        let mut full = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (kx, ky) = grid.wavenumber(i, j);
                let l = self.linear_symbol(kx * kx + ky * ky);
                half.push((l * dt / 2.0).exp());
                full.push((l * dt).exp());
            }
        }
        self.cached = Some((dt, half.clone(), full.clone()));
        (half, full)
    }

    /// Velocity field of the current state.
    pub fn velocity(&self, state: &SpectralField) -> VectorField {
        let (vx, vy) = self.problem.law().apply_spectral(state);
        SpectralField::pair_to_physical(&vx, &vy)
    }

    /// Largest stable dt at this state: the advective CFL plus, for the
    /// explicitly-treated porous diffusion, the diffusive limit
    /// `nu m max|rho|^{m-1} |k_max|^2 dt <= 1/2`.
    pub fn admissible_dt(&self, state: &SpectralField) -> f64 {
        let grid = self.problem.grid();
        let h = grid.spacing();
        let v = self.velocity(state);
        let vmax = v.linf();
        let mut dt = if vmax > 0.0 {
            CFL_SAFETY * h / vmax
        } else {
            f64::INFINITY
        };
        if let Problem::Type1(p) = &self.problem {
            if let DiffusionSpec::Porous { nu, m } = p.diffusion {
                if nu > 0.0 {
                    let rho_max = state.to_physical_unchecked().linf();
                    let k_max_sq = grid.k_max().powi(2);
                    let coeff = nu * m * rho_max.powf(m - 1.0) * k_max_sq;
                    if coeff > 0.0 {
                        dt = dt.min(CFL_SAFETY / coeff);
                    }
                }
            }
        }
        dt
    }

    /// Nonlinear term in spectral space (everything not handled by the
    /// integrating factor), dealiased.
    fn nonlinear(&self, state: &SpectralField) -> SpectralField {
        let grid = self.problem.grid();
        match &self.problem {
            Problem::Type1(p) => {
                let rho = state.to_physical_unchecked();
                let v = self.velocity(state);
                let flux_x = rho.mul(&v.x);
                let flux_y = rho.mul(&v.y);
                let fx = flux_x
                    .to_spectral()
                    .expect("flux stays finite")
                    .multiply_odd(|kx, _| Complex64::new(0.0, kx));
                let fy = flux_y
                    .to_spectral()
                    .expect("flux stays finite")
                    .multiply_odd(|_, ky| Complex64::new(0.0, ky));
                let mut out = SpectralField::zeros(grid);
                for ((o, a), b) in out
                    .coeffs_mut()
                    .iter_mut()
                    .zip(fx.coeffs().iter())
                    .zip(fy.coeffs().iter())
                {
                    *o = -(a + b);
                }
                if let DiffusionSpec::Porous { .. } = p.diffusion {
                    let a_vals = rho.map(|r| p.diffusion.apply(r));
                    let a_hat = a_vals.to_spectral().expect("A(rho) stays finite");
                    let lap = a_hat.multiply_odd(|kx, ky| {
                        Complex64::new(-(kx * kx + ky * ky), 0.0)
                    });
                    for (o, l) in out.coeffs_mut().iter_mut().zip(lap.coeffs().iter()) {
                        *o += l;
                    }
                }
                out.dealias()
            }
            Problem::Type2(_) => {
                let (gx, gy) = state.gradient();
                let grad = SpectralField::pair_to_physical(&gx, &gy);
                let v = self.velocity(state);
                let advect = v.x.mul(&grad.x).add_scaled(1.0, &v.y.mul(&grad.y));
                let mut out = advect.to_spectral().expect("advection stays finite");
                for c in out.coeffs_mut().iter_mut() {
                    *c = -*c;
                }
                out.dealias()
            }
        }
    }

    /// One integrating-factor Runge-Kutta step of size `dt` (signed:
    /// negative dt reverses inviscid transport).
    pub fn step(&mut self, state: &SpectralField, dt: f64) -> SpectralField {
        let (half, full) = self.exp_factors(dt);
        let grid = self.problem.grid();
        let apply = |spec: &SpectralField, factors: &[f64]| -> SpectralField {
            let mut out = spec.clone();
            for (c, &e) in out.coeffs_mut().iter_mut().zip(factors.iter()) {
                *c *= e;
            }
            out
        };
        let lin_comb = |a: &SpectralField, sa: f64, b: &SpectralField, sb: f64| -> SpectralField {
            let mut out = SpectralField::zeros(grid);
            for ((o, x), y) in out
                .coeffs_mut()
                .iter_mut()
                .zip(a.coeffs().iter())
                .zip(b.coeffs().iter())
            {
                *o = x * sa + y * sb;
            }
            out
        };

        let k1 = self.nonlinear(state);
        let k2 = self.nonlinear(&apply(&lin_comb(state, 1.0, &k1, dt / 2.0), &half));
        let k3 = {
            let e_state = apply(state, &half);
            self.nonlinear(&lin_comb(&e_state, 1.0, &k2, dt / 2.0))
        };
        let k4 = {
            let e_state = apply(state, &full);
            let e_k3 = apply(&k3, &half);
            self.nonlinear(&lin_comb(&e_state, 1.0, &e_k3, dt))
        };

        let mut out = apply(state, &full);
        let e_k1 = apply(&k1, &full);
        let e_k2 = apply(&k2, &half);
        let e_k3 = apply(&k3, &half);
        let coeffs = out.coeffs_mut();
        for (((o, a), (b, c)), d) in coeffs
            .iter_mut()
            .zip(e_k1.coeffs().iter())
            .zip(e_k2.coeffs().iter().zip(e_k3.coeffs().iter()))
            .zip(k4.coeffs().iter())
        {
            *o += dt / 6.0 * (a + 2.0 * (b + c) + d);
        }
        out
    }

    /// Halves the configured dt until the stability constraints accept it.
    pub fn stable_dt(&self, state: &SpectralField) -> Result<f64> {
        let configured = self.problem.dt();
        let admissible = self.admissible_dt(state);
        let mut dt = configured;
        let mut halvings = 0;
        while dt > admissible {
            dt /= 2.0;
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::CflFailure {
                    needed: admissible,
                    floor: dt,
                });
            }
        }
        Ok(dt)
    }
}

/// One adaptive step of the conservative model; returns the new state and
/// the dt actually taken.
pub fn step_type1(state: &ScalarField, prob: &Type1Problem) -> Result<(ScalarField, f64)> {
    let mut stepper = Stepper::new(Problem::Type1(prob.clone()))?;
    let spec = state.to_spectral()?.dealias();
    let dt = stepper.stable_dt(&spec)?;
    let next = stepper.step(&spec, dt);
    next.to_physical().map(|f| (f, dt))
}

/// One adaptive step of the advective model.
pub fn step_type2(state: &ScalarField, prob: &Type2Problem) -> Result<(ScalarField, f64)> {
    let mut stepper = Stepper::new(Problem::Type2(prob.clone()))?;
    let spec = state.to_spectral()?.dealias();
    let dt = stepper.stable_dt(&spec)?;
    let next = stepper.step(&spec, dt);
    next.to_physical().map(|f| (f, dt))
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub l2: f64,
    pub linf: f64,
    pub bmo: Option<f64>,
}

impl DiagnosticsRow {
    fn measure(t: f64, f: &ScalarField, with_bmo: bool) -> Self {
        Self {
            t,
            mass: f.integral(),
            l2: f.l2(),
            linf: f.linf(),
            bmo: if with_bmo {
                Some(crate::norms::bmo_norm_full(f))
            } else {
                None
            },
        }
    }

    pub fn csv_row(&self) -> String {
        match self.bmo {
            Some(b) => format!("{},{},{},{},{}", self.t, self.mass, self.l2, self.linf, b),
            None => format!("{},{},{},{},", self.t, self.mass, self.l2, self.linf),
        }
    }
}

/// Output cadence of a run.
#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    /// Snapshot interval in time units; `None` keeps only the endpoints.
    pub snapshot_interval: Option<f64>,
    /// Record the (slower) BMO norm with every diagnostics row.
    pub with_bmo: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            snapshot_interval: None,
            with_bmo: false,
        }
    }
}

/// Time series produced by [`run`].
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub snapshots: Vec<(f64, ScalarField)>,
    /// Set when the integration aborted early; holds the failure.
    pub aborted: Option<Error>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ScalarField {
        &self.snapshots.last().expect("at least the initial snapshot").1
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from("t,mass,l2,linf,bmo\n");
        for row in &self.diagnostics {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Integrates to `t_end`, recording diagnostics every step and snapshots
/// on the schedule. Deterministic for a fixed problem and schedule.
pub fn run(problem: &Problem, schedule: &Schedule) -> Result<Trajectory> {
    let mut stepper = Stepper::new(problem.clone())?;
    let t_end = problem.t_end();
    let mut state = problem.initial().to_spectral()?.dealias();
    let mut t = 0.0f64;

    let initial_phys = state.to_physical()?;
    let mut trajectory = Trajectory {
        times: vec![0.0],
        diagnostics: vec![DiagnosticsRow::measure(0.0, &initial_phys, schedule.with_bmo)],
        snapshots: vec![(0.0, initial_phys)],
        aborted: None,
    };
    let mut next_snap = schedule.snapshot_interval.unwrap_or(f64::INFINITY);

    let eps = 1e-12 * t_end.max(1.0);
    while t < t_end - eps {
        let dt = match stepper.stable_dt(&state) {
            Ok(dt) => dt.min(t_end - t),
            Err(e) => {
                trajectory.aborted = Some(e);
                return Ok(trajectory);
            }
        };
        state = stepper.step(&state, dt);
        t += dt;
        let phys = match state.to_physical() {
            Ok(f) => f,
            Err(e) => {
                trajectory.aborted = Some(e);
                return Ok(trajectory);
            }
        };
        if !phys.values().iter().all(|v| v.is_finite()) {
            trajectory.aborted = Some(Error::NonFinite);
            return Ok(trajectory);
        }
        trajectory.times.push(t);
        trajectory
            .diagnostics
            .push(DiagnosticsRow::measure(t, &phys, schedule.with_bmo));
        while t >= next_snap - eps {
            trajectory.snapshots.push((t, phys.clone()));
            next_snap += schedule.snapshot_interval.unwrap_or(f64::INFINITY);
        }
        if t >= t_end - eps {
            if trajectory
                .snapshots
                .last()
                .map(|(st, _)| (st - t).abs() > eps)
                .unwrap_or(true)
            {
                trajectory.snapshots.push((t, phys));
            }
        }
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial;
    use crate::norms::lp_norm;
    use crate::velocity::NewtonianSign;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::with_default_period(n).unwrap()
    }

    fn type2(law: VelocityLaw, nu: f64, gamma: f64, initial: ScalarField, dt: f64, t_end: f64) -> Type2Problem {
        Type2Problem {
            law,
            nu,
            gamma,
            grid: initial.grid(),
            dt,
            t_end,
            initial,
        }
    }

    #[test]
    fn constants_are_steady_states() {
        let g = grid(32);
        let c = ScalarField::from_fn(g, |_, _| 1.75);
        let prob = Type1Problem {
            law: VelocityLaw::BiotSavart2D,
            diffusion: DiffusionSpec::Linear { nu: 0.3 },
            grid: g,
            dt: 0.01,
            t_end: 0.1,
            initial: c.clone(),
        };
        let (next, _) = step_type1(&c, &prob).unwrap();
        let err = next
            .values()
            .iter()
            .zip(c.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13);
    }

    #[test]
    fn linear_diffusion_decays_exactly() {
        // integrating factor makes the pure heat semigroup exact
        let g = grid(32);
        let nu = 0.7;
        let rho0 = ScalarField::from_fn(g, |x, _| x.sin());
        let prob = Problem::Type1(Type1Problem {
            law: VelocityLaw::None,
            diffusion: DiffusionSpec::Linear { nu },
            grid: g,
            dt: 0.05,
            t_end: 1.0,
            initial: rho0.clone(),
        });
        let traj = run(&prob, &Schedule::default()).unwrap();
        assert!(traj.aborted.is_none());
        let expected = (-nu * 1.0f64).exp() * rho0.l2();
        let got = traj.diagnostics.last().unwrap().l2;
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn fractional_dissipation_decays_single_mode() {
        // |k| = 2, gamma = 1/2: eigenvalue |k|^{2 gamma} = 2
        let g = grid(32);
        let nu = 0.4;
        let rho0 = ScalarField::from_fn(g, |x, _| (2.0 * x).cos());
        let prob = Problem::Type2(type2(VelocityLaw::None, nu, 0.5, rho0.clone(), 0.05, 1.0));
        let traj = run(&prob, &Schedule::default()).unwrap();
        let expected = (-2.0 * nu).exp() * rho0.l2();
        assert_relative_eq!(
            traj.diagnostics.last().unwrap().l2,
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let g = grid(64);
        let rho0 = initial::gaussian_bump(g, (3.0, 3.0), 0.4, 0.6);
        let mass0 = rho0.integral();
        let prob = Problem::Type1(Type1Problem {
            law: VelocityLaw::Newtonian(NewtonianSign::Attractive),
            diffusion: DiffusionSpec::Porous { nu: 0.05, m: 2.0 },
            grid: g,
            dt: 1e-3,
            t_end: 0.02,
            initial: rho0.clone(),
        });
        let traj = run(&prob, &Schedule::default()).unwrap();
        assert!(traj.aborted.is_none());
        let l1 = lp_norm(&rho0, 1.0).unwrap();
        for row in &traj.diagnostics {
            assert!(
                (row.mass - mass0).abs() <= 1e-10 * l1,
                "mass drift at t = {}",
                row.t
            );
        }
    }

    #[test]
    fn single_mode_sqg_state_is_steady() {
        let g = grid(32);
        let rho0 = ScalarField::from_fn(g, |x, _| x.cos());
        let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.0, 1.0, rho0.clone(), 0.01, 1.0));
        let traj = run(&prob, &Schedule::default()).unwrap();
        let l2_0 = traj.diagnostics.first().unwrap().l2;
        let l2_t = traj.diagnostics.last().unwrap().l2;
        assert_relative_eq!(l2_t, l2_0, max_relative = 1e-8);
    }

    #[test]
    fn inviscid_advection_conserves_l2_against_refined_dt() {
        let g = grid(64);
        let rho0 = initial::random_spectrum(g, 3.0, 1.0, 11).unwrap();
        let mk = |dt: f64| {
            let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.0, 1.0, rho0.clone(), dt, 0.25));
            run(&prob, &Schedule::default()).unwrap()
        };
        let coarse = mk(2e-3);
        let fine = mk(1e-3);
        let a = coarse.diagnostics.last().unwrap().l2;
        let b = fine.diagnostics.last().unwrap().l2;
        assert!((a - b).abs() < 1e-8, "dt refinement changed l2: {a} vs {b}");
        let start = coarse.diagnostics.first().unwrap().l2;
        assert!((a - start).abs() < 1e-6, "l2 drift {}", (a - start).abs());
    }

    #[test]
    fn transport_norms_do_not_increase() {
        let g = grid(64);
        let rho0 = initial::random_spectrum(g, 3.5, 1.0, 23).unwrap();
        let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.0, 1.0, rho0, 2e-3, 0.5));
        let traj = run(&prob, &Schedule::default()).unwrap();
        let d0 = traj.diagnostics.first().unwrap();
        for row in traj.diagnostics.iter().skip(1) {
            assert!(row.l2 <= d0.l2 + 1e-4);
            assert!(row.linf <= d0.linf + 1e-4);
        }
    }

    #[test]
    fn porous_diffusion_dissipates_l2() {
        let g = grid(32);
        let rho0 = initial::gaussian_bump(g, (3.0, 3.0), 0.5, 0.7);
        let prob = Problem::Type1(Type1Problem {
            law: VelocityLaw::None,
            diffusion: DiffusionSpec::Porous { nu: 0.1, m: 2.0 },
            grid: g,
            dt: 5e-3,
            t_end: 0.3,
            initial: rho0,
        });
        let traj = run(&prob, &Schedule::default()).unwrap();
        assert!(traj.aborted.is_none());
        let mut last = f64::INFINITY;
        for row in &traj.diagnostics {
            assert!(row.l2 <= last + 1e-12);
            last = row.l2;
        }
    }

    #[test]
    fn pure_advection_reverses_in_time() {
        let g = grid(64);
        let rho0 = initial::random_spectrum(g, 3.0, 1.0, 31).unwrap();
        let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.0, 1.0, rho0.clone(), 1e-3, 0.2));
        let mut stepper = Stepper::new(prob).unwrap();
        let mut state = rho0.to_spectral().unwrap().dealias();
        let steps = 200;
        for _ in 0..steps {
            state = stepper.step(&state, 1e-3);
        }
        for _ in 0..steps {
            state = stepper.step(&state, -1e-3);
        }
        let back = state.to_physical().unwrap();
        let start = rho0.to_spectral().unwrap().dealias().to_physical().unwrap();
        let err = back
            .values()
            .iter()
            .zip(start.values().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "reversal error {err}");
    }

    #[test]
    fn zero_horizon_keeps_only_the_initial_snapshot() {
        let g = grid(16);
        let rho0 = ScalarField::from_fn(g, |x, _| x.sin());
        let prob = Problem::Type2(type2(VelocityLaw::None, 0.0, 1.0, rho0, 0.01, 0.0));
        let traj = run(&prob, &Schedule::default()).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.times, vec![0.0]);
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let g = grid(32);
        let rho0 = initial::random_spectrum(g, 2.5, 0.8, 77).unwrap();
        let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.1, 0.5, rho0, 2e-3, 0.1));
        let a = run(&prob, &Schedule::default()).unwrap();
        let b = run(&prob, &Schedule::default()).unwrap();
        assert_eq!(a.diagnostics_csv(), b.diagnostics_csv());
    }

    #[test]
    fn resolution_refinement_changes_smooth_solution_little() {
        let run_at = |n: usize| {
            let g = grid(n);
            let rho0 = ScalarField::from_fn(g, |x, y| x.sin() * (y.cos() + 0.3 * (2.0 * x).sin()));
            let prob = Problem::Type2(type2(VelocityLaw::Sqg, 0.0, 1.0, rho0, 1e-3, 0.25));
            run(&prob, &Schedule::default()).unwrap().diagnostics.last().unwrap().l2
        };
        let coarse = run_at(64);
        let fine = run_at(128);
        assert!(
            (coarse - fine).abs() < 1e-6,
            "spectral convergence gap {}",
            (coarse - fine).abs()
        );
    }

    #[test]
    fn type2_rejects_non_divergence_free_law() {
        let g = grid(16);
        let rho0 = ScalarField::zeros(g);
        let prob = type2(
            VelocityLaw::Newtonian(NewtonianSign::Attractive),
            0.1,
            0.5,
            rho0,
            0.01,
            0.1,
        );
        assert!(matches!(
            prob.validate(),
            Err(Error::NotDivergenceFree(_))
        ));
    }

    #[test]
    fn diffusion_spec_validation() {
        assert!(DiffusionSpec::Porous { nu: 0.1, m: 0.5 }.validate().is_err());
        assert!(DiffusionSpec::Linear { nu: -0.1 }.validate().is_err());
        assert!(DiffusionSpec::Porous { nu: 0.1, m: 2.0 }.validate().is_ok());
    }

    #[test]
    fn euler_conserves_enstrophy() {
        // 2D Euler: Type 1 with Biot-Savart and no diffusion; smooth data
        let g = grid(128);
        let omega0 = initial::random_spectrum(g, 4.0, 1.0, 5).unwrap();
        let prob = Problem::Type1(Type1Problem {
            law: VelocityLaw::BiotSavart2D,
            diffusion: DiffusionSpec::None,
            grid: g,
            dt: 2e-3,
            t_end: 1.0,
            initial: omega0,
        });
        let traj = run(&prob, &Schedule::default()).unwrap();
        assert!(traj.aborted.is_none());
        let e0 = traj.diagnostics.first().unwrap().l2.powi(2);
        let et = traj.diagnostics.last().unwrap().l2.powi(2);
        assert!(
            (et - e0).abs() <= 1e-6 * e0.max(1.0),
            "enstrophy drift {}",
            (et - e0).abs()
        );
    }
}
