//! Ermakov scaling dynamics of the time-dependent harmonic oscillator.
//!
//! For `H = p^2/2m + m omega(t)^2 q^2 / 2` and an initial state that is a
//! function of the `omega0` oscillator energy, the evolved state is the
//! initial one evaluated at `Q = q/b`, `P = b p - m q b'`, where `b` solves
//!
//! ```text
//! b'' + omega(t)^2 b = omega0^2 / b^3,   b(0) = 1,  b'(0) = 0.
//! ```
//!
//! [`propagate_characteristics`] transports states along Hamiltonian
//! trajectories instead and serves as an independent check of the scaling
//! solution.

use std::sync::Arc;

use rayon::prelude::*;

use crate::brackets::{eval_monomials, HamiltonianSpec};
use crate::phasegrid::{sample, PhaseField, PhaseGrid};
use crate::states::{scaled_field, InitialState, Scaling};
use crate::{Error, Result};

/// Smallest accepted number of Ermakov steps.
pub const MIN_ERMAKOV_STEPS: usize = 16;

/// Characteristics leaving a box this many times larger than the grid are
/// reported as escaped.
pub const ESCAPE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `omega = 0` for `t > 0`.
    SuddenQuench,
    Constant,
    /// Linear from `omega0` to `omega_final` over `ramp_time`, then held.
    LinearRamp {
        omega_final: f64,
        ramp_time: f64,
    },
    /// Piecewise-linear table starting at `(0, omega0)`; the last value is
    /// held past the end.
    Tabulated {
        times: Vec<f64>,
        omegas: Vec<f64>,
    },
}

/// Trap frequency `omega(t)` with `omega(0) = omega0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    kind: ProfileKind,
    omega0: f64,
}

impl FrequencyProfile {
    pub fn new(kind: ProfileKind, omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::Config(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        match &kind {
            ProfileKind::SuddenQuench | ProfileKind::Constant => {}
            ProfileKind::LinearRamp {
                omega_final,
                ramp_time,
            } => {
                if !(omega_final.is_finite() && *omega_final >= 0.0) {
                    return Err(Error::Config(format!(
                        "ramp target frequency must be >= 0, got {omega_final}"
                    )));
                }
                if !(ramp_time.is_finite() && *ramp_time > 0.0) {
                    return Err(Error::Config(format!(
                        "ramp time must be positive, got {ramp_time}"
                    )));
                }
            }
            ProfileKind::Tabulated { times, omegas } => {
                if times.len() != omegas.len() || times.len() < 2 {
                    return Err(Error::Config(
                        "frequency table needs >= 2 rows of matching length".into(),
                    ));
                }
                if times[0] != 0.0 {
                    return Err(Error::Config("frequency table must start at t = 0".into()));
                }
                if times
                    .windows(2)
                    .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
                {
                    return Err(Error::Config("frequency table times must ascend".into()));
                }
                if omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::Config("tabulated frequencies must be >= 0".into()));
                }
                if (omegas[0] - omega0).abs() > 1e-12 * omega0 {
                    return Err(Error::Config(format!(
                        "tabulated omega(0) = {} differs from omega0 = {omega0}",
                        omegas[0]
                    )));
                }
            }
        }
        Ok(Self { kind, omega0 })
    }

    pub fn sudden_quench(omega0: f64) -> Result<Self> {
        Self::new(ProfileKind::SuddenQuench, omega0)
    }

    pub fn constant(omega0: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant, omega0)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// `omega(t)`; equals `omega0` for `t <= 0`.
    pub fn omega(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.omega0;
        }
        self.omega_after(t)
    }

    /// Right limit `omega(t+)`. Integrators use this so that a switch at
    /// `t = 0` acts from the very first step.
    pub fn omega_after(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::SuddenQuench => 0.0,
            ProfileKind::Constant => self.omega0,
            ProfileKind::LinearRamp {
                omega_final,
                ramp_time,
            } => {
                let s = (t.max(0.0) / ramp_time).min(1.0);
                self.omega0 + (omega_final - self.omega0) * s
            }
            ProfileKind::Tabulated { times, omegas } => {
                if t <= 0.0 {
                    return omegas[0];
                }
                let k = times.partition_point(|&x| x <= t);
                if k >= times.len() {
                    return *omegas.last().unwrap();
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let s = (t - t0) / (t1 - t0);
                omegas[k - 1] + (omegas[k] - omegas[k - 1]) * s
            }
        }
    }

    /// `p^2/2m + m omega(t+)^2 q^2/2`.
    pub fn hamiltonian(&self, mass: f64) -> HamiltonianSpec {
        let profile = self.clone();
        HamiltonianSpec::harmonic(mass, move |t| profile.omega_after(t))
    }

    /// Right-hand side `omega0^2/b^3 - omega(t+)^2 b` of the Ermakov equation.
    pub fn ermakov_rhs(&self, t: f64, b: f64) -> f64 {
        let w = self.omega_after(t);
        self.omega0 * self.omega0 / (b * b * b) - w * w * b
    }
}

/// `(b, b', b'')` at one time node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmakovNode {
    pub b: f64,
    pub bdot: f64,
    pub bddot: f64,
}

impl ErmakovNode {
    pub fn scaling(&self) -> Scaling {
        Scaling {
            b: self.b,
            bdot: self.bdot,
        }
    }
}

/// Solution `b(t)` of the Ermakov equation on a uniform time grid.
#[derive(Debug, Clone)]
pub struct ErmakovTrajectory {
    pub times: Vec<f64>,
    pub b: Vec<f64>,
    pub bdot: Vec<f64>,
    pub bddot: Vec<f64>,
}

impl ErmakovTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn scaling(&self, k: usize) -> Scaling {
        Scaling {
            b: self.b[k],
            bdot: self.bdot[k],
        }
    }

    pub fn node(&self, k: usize) -> ErmakovNode {
        ErmakovNode {
            b: self.b[k],
            bdot: self.bdot[k],
            bddot: self.bddot[k],
        }
    }

    /// Largest `|b'' + omega^2 b - omega0^2/b^3|` over the stored nodes.
    pub fn max_residual(&self, profile: &FrequencyProfile) -> f64 {
        (0..self.len())
            .map(|k| (self.bddot[k] - profile.ermakov_rhs(self.times[k], self.b[k])).abs())
            .fold(0.0, f64::max)
    }
}

/// Classic fixed-step RK4 on `(b, b')`.
pub fn solve_ermakov(
    profile: &FrequencyProfile,
    t_end: f64,
    n_steps: usize,
) -> Result<ErmakovTrajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Config(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if n_steps < MIN_ERMAKOV_STEPS {
        return Err(Error::Config(format!(
            "need at least {MIN_ERMAKOV_STEPS} Ermakov steps, got {n_steps}"
        )));
    }
    let h = t_end / n_steps as f64;
    let mut out = ErmakovTrajectory {
        times: Vec::with_capacity(n_steps + 1),
        b: Vec::with_capacity(n_steps + 1),
        bdot: Vec::with_capacity(n_steps + 1),
        bddot: Vec::with_capacity(n_steps + 1),
    };
    let (mut b, mut v) = (1.0f64, 0.0f64);
    let accel = |t: f64, b: f64| -> Result<f64> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::IntegrationFailure { t, b });
        }
        Ok(profile.ermakov_rhs(t, b))
    };
    for k in 0..=n_steps {
        let t = h * k as f64;
        out.times.push(t);
        out.b.push(b);
        out.bdot.push(v);
        out.bddot.push(accel(t, b)?);
        if k == n_steps {
            break;
        }
        let k1b = v;
        let k1v = accel(t, b)?;
        let k2b = v + 0.5 * h * k1v;
        let k2v = accel(t + 0.5 * h, b + 0.5 * h * k1b)?;
        let k3b = v + 0.5 * h * k2v;
        let k3v = accel(t + 0.5 * h, b + 0.5 * h * k2b)?;
        let k4b = v + h * k3v;
        let k4v = accel(t + h, b + h * k3b)?;
        b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok(out)
}

/// Evaluate `initial` at the canonical preimage `(q/b, b p - m q b')`.
pub fn scaling_map(
    initial: &InitialState,
    scaling: Scaling,
    grid: &Arc<PhaseGrid>,
) -> Result<PhaseField> {
    let scaling = Scaling::new(scaling.b, scaling.bdot)?;
    Ok(scaled_field(grid, initial, scaling))
}

/// Transport `initial` to time `t` along Hamiltonian characteristics.
///
/// Every node is integrated backward to `t = 0` with the symplectic
/// drift-kick-drift leapfrog (coefficients sampled at step midpoints), and
/// the initial state is evaluated at the resulting preimage.
pub fn propagate_characteristics(
    initial: &InitialState,
    h: &HamiltonianSpec,
    t: f64,
    grid: &Arc<PhaseGrid>,
    substeps: usize,
) -> Result<PhaseField> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "propagation time must be >= 0, got {t}"
        )));
    }
    if !h.is_separable() {
        return Err(Error::Domain(
            "characteristics need a separable Hamiltonian".into(),
        ));
    }
    let units = *grid.units();
    if t == 0.0 {
        return PhaseField::from_fn(grid, initial.role(), |q, p| initial.value(&units, q, p));
    }
    let substeps = substeps.max(1);
    let dt = -t / substeps as f64;
    // Per-step midpoint derivatives of H: (dH/dp, dH/dq).
    let steps: Vec<_> = (0..substeps)
        .map(|k| {
            let mid = t + dt * (k as f64 + 0.5);
            (h.monomials(mid, 0, 1), h.monomials(mid, 1, 0))
        })
        .collect();

    let (qc, qh) = center_half(grid.q().min(), grid.q().max());
    let (pc, ph) = center_half(grid.p().min(), grid.p().max());
    let escaped = |q: f64, p: f64| {
        !((q - qc).abs() <= ESCAPE_FACTOR * qh && (p - pc).abs() <= ESCAPE_FACTOR * ph)
    };

    let n_p = grid.n_p();
    let ps = grid.p().nodes();
    let rows: Vec<Result<Vec<f64>>> = grid
        .q()
        .nodes()
        .par_iter()
        .map(|&q0| {
            let mut row = Vec::with_capacity(n_p);
            for &p0 in ps {
                let (mut q, mut p) = (q0, p0);
                for (dh_dp, dh_dq) in &steps {
                    q += 0.5 * dt * eval_monomials(dh_dp, q, p);
                    p -= dt * eval_monomials(dh_dq, q, p);
                    q += 0.5 * dt * eval_monomials(dh_dp, q, p);
                    if escaped(q, p) {
                        return Err(Error::Escape { q, p });
                    }
                }
                row.push(initial.value(&units, q, p));
            }
            Ok(row)
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for row in rows {
        values.extend(row?);
    }
    PhaseField::new(grid.clone(), values, initial.role())
}

fn center_half(min: f64, max: f64) -> (f64, f64) {
    (0.5 * (min + max), 0.5 * (max - min))
}

/// `(1/(t_last - t_first)) int samples dt` by the trapezoid rule.
pub fn time_average(samples: &[f64], times: &[f64]) -> Result<f64> {
    if samples.len() < 2 || samples.len() != times.len() {
        return Err(Error::Domain(format!(
            "time average needs >= 2 matching samples, got {} values and {} times",
            samples.len(),
            times.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("sample times must ascend strictly".into()));
    }
    let integral: f64 = samples
        .windows(2)
        .zip(times.windows(2))
        .map(|(s, t)| 0.5 * (s[0] + s[1]) * (t[1] - t[0]))
        .sum();
    Ok(integral / (times[times.len() - 1] - times[0]))
}

/// Sample the analytic initial state on `grid`; used where a field is
/// needed without any evolution.
pub fn initial_field(initial: &InitialState, grid: &Arc<PhaseGrid>) -> PhaseField {
    let units = *grid.units();
    let values = sample(grid, |q, p| initial.value(&units, q, p));
    PhaseField::new(grid.clone(), values, initial.role())
        .expect("closed-form initial states are finite and sign-consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrid::{make_grid, Measure, UnitSystem};
    use crate::states::GaussianSpec;
    use std::f64::consts::PI;

    fn grid(nq: usize, q: f64, np: usize, p: f64) -> Arc<PhaseGrid> {
        make_grid(
            (-q, q),
            nq,
            (-p, p),
            np,
            Measure::Plain,
            UnitSystem::natural(),
        )
        .unwrap()
    }

    #[test]
    fn quench_follows_closed_form() {
        let profile = FrequencyProfile::sudden_quench(1.0).unwrap();
        let traj = solve_ermakov(&profile, 1.0, 1024).unwrap();
        let k = traj.len() - 1;
        assert!((traj.b[k] - 2f64.sqrt()).abs() < 1e-8);
        assert!((traj.bdot[k] - 0.5f64.sqrt()).abs() < 1e-8);
        assert!((traj.bddot[k] - 2f64.powf(-1.5)).abs() < 1e-8);
        assert_eq!(traj.bddot[0], 1.0);
    }

    #[test]
    fn quench_conserves_first_integral() {
        let profile = FrequencyProfile::sudden_quench(1.0).unwrap();
        let traj = solve_ermakov(&profile, 3.0, 1024).unwrap();
        for k in 0..traj.len() {
            let inv = traj.bdot[k].powi(2) + 1.0 / traj.b[k].powi(2);
            assert!((inv - 1.0).abs() < 1e-8);
        }
        assert!(traj.max_residual(&profile) < 1e-8);
    }

    #[test]
    fn constant_profile_is_a_fixed_point() {
        let profile = FrequencyProfile::constant(2.0).unwrap();
        let traj = solve_ermakov(&profile, 5.0, 64).unwrap();
        for k in 0..traj.len() {
            assert!((traj.b[k] - 1.0).abs() < 1e-10);
            assert!(traj.bdot[k].abs() < 1e-10);
        }
    }

    #[test]
    fn ramp_and_table_agree() {
        let ramp = FrequencyProfile::new(
            ProfileKind::LinearRamp {
                omega_final: 0.5,
                ramp_time: 2.0,
            },
            1.0,
        )
        .unwrap();
        let table = FrequencyProfile::new(
            ProfileKind::Tabulated {
                times: vec![0.0, 2.0],
                omegas: vec![1.0, 0.5],
            },
            1.0,
        )
        .unwrap();
        for t in [0.0, 0.3, 1.9, 2.0, 4.0] {
            assert!((ramp.omega(t) - table.omega(t)).abs() < 1e-15);
        }
        let a = solve_ermakov(&ramp, 4.0, 400).unwrap();
        let b = solve_ermakov(&table, 4.0, 400).unwrap();
        assert!((a.b[400] - b.b[400]).abs() < 1e-12);
        assert!(a.max_residual(&ramp) < 1e-8);
    }

    #[test]
    fn profile_validation() {
        assert!(FrequencyProfile::constant(0.0).is_err());
        assert!(FrequencyProfile::new(
            ProfileKind::Tabulated {
                times: vec![0.0, 1.0],
                omegas: vec![0.5, 0.5]
            },
            1.0
        )
        .is_err());
        assert!(FrequencyProfile::new(
            ProfileKind::LinearRamp {
                omega_final: -1.0,
                ramp_time: 1.0
            },
            1.0
        )
        .is_err());
        let p = FrequencyProfile::sudden_quench(1.0).unwrap();
        assert_eq!(p.omega(0.0), 1.0);
        assert_eq!(p.omega(1e-9), 0.0);
        assert!(solve_ermakov(&p, 1.0, 8).is_err());
        assert!(solve_ermakov(&p, 0.0, 32).is_err());
    }

    #[test]
    fn collapsing_b_is_reported() {
        // omega0 tiny relative to a strong trap: b overshoots through zero
        // with a coarse step.
        let profile = FrequencyProfile::new(
            ProfileKind::LinearRamp {
                omega_final: 40.0,
                ramp_time: 0.01,
            },
            1e-3,
        )
        .unwrap();
        let err = solve_ermakov(&profile, 10.0, 16).unwrap_err();
        assert!(matches!(err, Error::IntegrationFailure { .. }), "{err:?}");
    }

    #[test]
    fn identity_scaling_is_identity() {
        let g = grid(33, 5.0, 33, 5.0);
        let s = InitialState::HoEigenstate(2);
        let a = scaling_map(&s, Scaling::IDENTITY, &g).unwrap();
        let b = initial_field(&s, &g);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn scaling_preserves_normalization() {
        let g = grid(401, 20.0, 301, 6.0);
        let spec = GaussianSpec::paper_default(&UnitSystem::natural());
        let s = InitialState::Gaussian(spec);
        let rho = scaling_map(&s, Scaling::new(3.0, 0.9).unwrap(), &g).unwrap();
        assert!((rho.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn characteristics_at_zero_time() {
        let g = grid(16, 5.0, 16, 5.0);
        let h = FrequencyProfile::sudden_quench(1.0)
            .unwrap()
            .hamiltonian(1.0);
        let s = InitialState::HoEigenstate(0);
        let a = propagate_characteristics(&s, &h, 0.0, &g, 10).unwrap();
        let b = initial_field(&s, &g);
        assert!(a.zip_map(&b, |x, y| x - y).max_abs() < 1e-12);
    }

    #[test]
    fn free_flight_matches_scaling() {
        let g = grid(129, 12.0, 129, 6.0);
        let profile = FrequencyProfile::sudden_quench(1.0).unwrap();
        let h = profile.hamiltonian(1.0);
        let s = InitialState::HoEigenstate(0);
        let t = 1.5f64;
        let b = (1.0 + t * t).sqrt();
        let scaled = scaling_map(&s, Scaling::new(b, t / b).unwrap(), &g).unwrap();
        let chars = propagate_characteristics(&s, &h, t, &g, 8).unwrap();
        let diff = scaled.zip_map(&chars, |x, y| x - y).max_abs();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn oscillator_period_is_identity() {
        let g = grid(33, 5.0, 33, 5.0);
        let h = FrequencyProfile::constant(1.0).unwrap().hamiltonian(1.0);
        let s = InitialState::HoEigenstate(0);
        let spec = GaussianSpec::new(0.6, 0.9, (1.0, -0.5)).unwrap();
        let shifted = InitialState::Gaussian(spec);
        for state in [s, shifted] {
            let a = propagate_characteristics(&state, &h, 2.0 * PI, &g, 4000).unwrap();
            let b = initial_field(&state, &g);
            let diff = a.zip_map(&b, |x, y| x - y).max_abs();
            assert!(diff < 1e-6, "{diff}");
        }
    }

    #[test]
    fn escape_is_detected() {
        let g = grid(8, 1.0, 8, 1.0);
        let h = HamiltonianSpec::new().with_term(|_| 50.0, 0, 2).unwrap();
        let err =
            propagate_characteristics(&InitialState::HoEigenstate(0), &h, 1.0, &g, 4).unwrap_err();
        assert!(matches!(err, Error::Escape { .. }));
    }

    #[test]
    fn time_average_cases() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        assert!((time_average(&[2.5; 11], &t).unwrap() - 2.5).abs() < 1e-15);
        assert!((time_average(&t, &t).unwrap() - 0.5).abs() < 1e-15);
        assert!(time_average(&[1.0], &[0.0]).is_err());
        assert!(time_average(&[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn averaged_quench_acceleration() {
        let profile = FrequencyProfile::sudden_quench(1.0).unwrap();
        let traj = solve_ermakov(&profile, 1.0, 1024).unwrap();
        let samples: Vec<f64> = traj.b.iter().map(|b| b.powi(-3)).collect();
        let avg = time_average(&samples, &traj.times).unwrap();
        assert!((avg - 0.5f64.sqrt()).abs() < 1e-6);
    }
}
