use std::sync::Arc;

use super::{energy_cap, gaussian_rates, mean_energy, tau_bound, v_csl_analytic, BddotConvention};
use crate::brackets::{moyal_correction, poisson_bracket, HamiltonianSpec, MoyalOrder};
use crate::dynamics::{
    propagate_characteristics, scaling_map, solve_ermakov, ErmakovTrajectory, FrequencyProfile,
};
use crate::metrics::{
    bhattacharyya, bhattacharyya_analytic, classical_trace_distance, hellinger,
    wigner_trace_distance,
};
use crate::phasegrid::{make_grid, Measure, PhaseField, PhaseGrid, UnitSystem, MIN_NODES};
use crate::states::{classical_from_wigner, sqrt_density, GaussianSpec, InitialState};
use crate::{Error, Result};

/// Largest accepted node count per axis.
pub const MAX_NODES: usize = 4096;

/// Phase-space box in units of `x0` and `p0 = hbar / x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width of the `q` range at `b = 1`.
    pub q_extent: f64,
    /// Half-width of the `p` range at `b = 1`.
    pub p_extent: f64,
    pub n_q: usize,
    pub n_p: usize,
    pub measure: Measure,
    /// Stretch the box so it follows the widest evolved state.
    pub widen: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            q_extent: 6.0,
            p_extent: 6.0,
            n_q: 512,
            n_p: 512,
            measure: Measure::PaperGamma,
            widen: true,
        }
    }
}

/// How the classical density is built.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ClassicalModel {
    /// `rho = 2 pi hbar W^2` of the evolved eigenstate.
    #[default]
    FromWigner,
    Gaussian(GaussianSpec),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub units: UnitSystem,
    pub grid: GridSpec,
    pub profile: FrequencyProfile,
    /// Oscillator eigenstate carried by the Wigner function.
    pub eigenstate: u32,
    pub classical: ClassicalModel,
    pub t_end: f64,
    pub n_times: usize,
    /// RK4 steps between consecutive report nodes.
    pub ermakov_substeps: usize,
    /// Leapfrog steps for densities that need the characteristics propagator.
    pub characteristic_steps: usize,
    pub moyal_order: MoyalOrder,
    pub bddot: BddotConvention,
    pub e0: f64,
}

impl Scenario {
    /// Ground state, sudden quench to a free particle, `t in [0, 3/omega0]`.
    pub fn quench_default(units: UnitSystem) -> Self {
        let profile = FrequencyProfile::sudden_quench(units.omega0).expect("validated units");
        Self {
            units,
            grid: GridSpec::default(),
            profile,
            eigenstate: 0,
            classical: ClassicalModel::FromWigner,
            t_end: 3.0 / units.omega0,
            n_times: 257,
            ermakov_substeps: 4,
            characteristic_steps: 400,
            moyal_order: MoyalOrder::Hbar2,
            bddot: BddotConvention::Ermakov,
            e0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_q", self.grid.n_q), ("n_p", self.grid.n_p)] {
            if !(MIN_NODES..=MAX_NODES).contains(&n) {
                return Err(Error::Config(format!(
                    "{name} must be in [{MIN_NODES}, {MAX_NODES}], got {n}"
                )));
            }
        }
        for (name, v) in [
            ("q_extent", self.grid.q_extent),
            ("p_extent", self.grid.p_extent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.n_times < 2 {
            return Err(Error::Config(format!(
                "need at least 2 time nodes, got {}",
                self.n_times
            )));
        }
        if self.ermakov_substeps == 0 || self.characteristic_steps == 0 {
            return Err(Error::Config("step counts must be positive".into()));
        }
        if !self.e0.is_finite() {
            return Err(Error::Config("e0 must be finite".into()));
        }
        if (self.profile.omega0() - self.units.omega0).abs() > 1e-12 * self.units.omega0 {
            return Err(Error::Config(format!(
                "profile starts at omega = {} but the units use omega0 = {}",
                self.profile.omega0(),
                self.units.omega0
            )));
        }
        Ok(())
    }

    fn time(&self, k: usize) -> f64 {
        self.t_end * k as f64 / (self.n_times - 1) as f64
    }

    /// Gaussian for which the closed forms apply, if the classical density
    /// is a centered Gaussian that depends on `(q, p)` only through the
    /// `omega0` oscillator energy.
    pub fn analytic_gaussian(&self) -> Option<GaussianSpec> {
        match self.classical {
            ClassicalModel::FromWigner if self.eigenstate == 0 => {
                Some(GaussianSpec::paper_default(&self.units))
            }
            ClassicalModel::FromWigner => None,
            ClassicalModel::Gaussian(spec) if self.is_stationary_shape(&spec) => Some(spec),
            ClassicalModel::Gaussian(_) => None,
        }
    }

    fn is_stationary_shape(&self, spec: &GaussianSpec) -> bool {
        let matched = self.units.mass * self.units.omega0 * spec.sigma_q;
        spec.center == (0.0, 0.0) && (spec.sigma_p - matched).abs() <= 1e-12 * matched
    }
}

/// One time node of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub t_wigner: f64,
    pub t_classical: f64,
    pub bhattacharyya: f64,
    pub hellinger_sq: f64,
    pub v_qsl: f64,
    pub v_ssl: f64,
    pub v_csl: f64,
    /// Published closed form under the scenario's `b''` convention; `NaN`
    /// when no closed form applies.
    pub v_csl_analytic: f64,
    pub v_mt: f64,
    pub tau_qsl: f64,
    pub tau_ssl: f64,
    pub tau_csl: f64,
    pub energy_cap: f64,
    pub slack_qsl: f64,
    pub slack_ssl: f64,
    pub slack_csl: f64,
    pub diagnostics: Diagnostics,
}

/// Closed-form companions of a row. `NaN` where no closed form applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub b: f64,
    pub bdot: f64,
    pub bddot: f64,
    pub mean_energy: f64,
    pub bhattacharyya_analytic: f64,
    /// Exact `int |d/dt sqrt(rho_t)|` of the Gaussian family.
    pub v_csl_exact: f64,
    /// Exact `(int (d/dt sqrt(rho_t))^2)^(1/2)`.
    pub v_mt_exact: f64,
    pub v_csl_formula_ermakov: f64,
    pub v_csl_formula_paper: f64,
}

#[derive(Debug, Clone)]
pub struct SpeedLimitReport {
    pub scenario: Scenario,
    pub grid: Arc<PhaseGrid>,
    pub trajectory: ErmakovTrajectory,
    pub rows: Vec<ReportRow>,
}

impl SpeedLimitReport {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column<F: Fn(&ReportRow) -> f64>(&self, f: F) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Grid whose box follows the evolved state: `q` scales with `b`, `p` with
/// `sqrt(1/b^2 + (m b' x0^2 / hbar)^2)`.
fn widened_grid(scenario: &Scenario, traj: &ErmakovTrajectory) -> Result<Arc<PhaseGrid>> {
    let u = &scenario.units;
    let g = &scenario.grid;
    let (mut qs, mut ps) = (1.0f64, 1.0f64);
    if g.widen {
        let x0 = u.x0();
        for k in 0..traj.len() {
            let (b, bdot) = (traj.b[k], traj.bdot[k]);
            qs = qs.max(b);
            ps = ps.max((1.0 / (b * b) + (u.mass * bdot * x0 * x0 / u.hbar).powi(2)).sqrt());
        }
        if let ClassicalModel::Gaussian(spec) = scenario.classical {
            qs = qs.max(spec.center.0.abs() / x0 + 1.0);
            ps = ps.max(spec.center.1.abs() / u.p0() + 1.0);
        }
    }
    let q = g.q_extent * u.x0() * qs;
    let p = g.p_extent * u.p0() * ps;
    make_grid((-q, q), g.n_q, (-p, p), g.n_p, g.measure, *u)
}

struct NodeFields {
    wigner: PhaseField,
    classical: PhaseField,
}

fn node_fields(
    scenario: &Scenario,
    h: &HamiltonianSpec,
    traj: &ErmakovTrajectory,
    k: usize,
    t: f64,
    grid: &Arc<PhaseGrid>,
) -> Result<NodeFields> {
    let scaling = traj.scaling(k);
    let wigner = scaling_map(
        &InitialState::HoEigenstate(scenario.eigenstate),
        scaling,
        grid,
    )?;
    let classical = match scenario.classical {
        ClassicalModel::FromWigner => classical_from_wigner(&wigner)?,
        ClassicalModel::Gaussian(spec) if scenario.is_stationary_shape(&spec) => {
            scaling_map(&InitialState::Gaussian(spec), scaling, grid)?
        }
        ClassicalModel::Gaussian(spec) => propagate_characteristics(
            &InitialState::Gaussian(spec),
            h,
            t,
            grid,
            scenario.characteristic_steps,
        )?,
    };
    Ok(NodeFields { wigner, classical })
}

/// Evolve the scenario and evaluate every distance, velocity and bound at
/// each time node. The `tau` columns use the window `[0, t]`.
pub fn build_report(scenario: &Scenario) -> Result<SpeedLimitReport> {
    scenario.validate()?;
    let n_int = scenario.n_times - 1;
    let sub = scenario.ermakov_substeps;
    let fine = solve_ermakov(&scenario.profile, scenario.t_end, n_int * sub)?;
    let pick = |v: &[f64]| (0..=n_int).map(|k| v[k * sub]).collect::<Vec<_>>();
    let traj = ErmakovTrajectory {
        times: (0..=n_int).map(|k| scenario.time(k)).collect(),
        b: pick(&fine.b),
        bdot: pick(&fine.bdot),
        bddot: pick(&fine.bddot),
    };

    let grid = widened_grid(scenario, &traj)?;
    let h = scenario.profile.hamiltonian(scenario.units.mass);
    let start = node_fields(scenario, &h, &traj, 0, 0.0, &grid)?;
    let analytic = scenario.analytic_gaussian();
    let units = scenario.units;

    let mut rows: Vec<ReportRow> = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let t = traj.times[k];
        let node = traj.node(k);
        let fields = if k == 0 {
            NodeFields {
                wigner: start.wigner.clone(),
                classical: start.classical.clone(),
            }
        } else {
            node_fields(scenario, &h, &traj, k, t, &grid)?
        };
        let w = &fields.wigner;
        let rho = &fields.classical;
        let mean = mean_energy(w, &h, t)?;
        let (b_an, v_exact, v_mt_exact, f_erm, f_pap) = match analytic {
            Some(spec) => {
                let rates = gaussian_rates(node, &spec, &units);
                (
                    bhattacharyya_analytic(node.scaling(), &spec, &units),
                    rates.l1,
                    rates.l2,
                    v_csl_analytic(node, &spec, &units, BddotConvention::Ermakov),
                    v_csl_analytic(node, &spec, &units, BddotConvention::PaperConstant),
                )
            }
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        let hel = hellinger(rho, &start.classical)?;
        // Shared brackets; identical to v_qsl / v_ssl / v_csl / v_mt_comparator.
        let pb_w = poisson_bracket(&h, t, w);
        let v_ssl = pb_w.l1_norm();
        let v_qsl = match scenario.moyal_order {
            MoyalOrder::Hbar0 => v_ssl,
            MoyalOrder::Hbar2 => match moyal_correction(&h, t, w)? {
                Some(c) => pb_w.zip_map(&c, |a, b| a + b).l1_norm(),
                None => v_ssl,
            },
        };
        let pb_s = poisson_bracket(&h, t, &sqrt_density(rho)?);
        rows.push(ReportRow {
            t,
            t_wigner: wigner_trace_distance(w, &start.wigner)?,
            t_classical: classical_trace_distance(rho, &start.classical)?,
            bhattacharyya: bhattacharyya(rho, &start.classical)?,
            hellinger_sq: hel * hel,
            v_qsl,
            v_ssl,
            v_csl: pb_s.l1_norm_with(Measure::Plain),
            v_csl_analytic: match scenario.bddot {
                BddotConvention::Ermakov => f_erm,
                BddotConvention::PaperConstant => f_pap,
            },
            v_mt: pb_s.l2_norm_with(Measure::Plain),
            tau_qsl: 0.0,
            tau_ssl: 0.0,
            tau_csl: 0.0,
            energy_cap: energy_cap(w, &h, t, scenario.e0)?,
            slack_qsl: 0.0,
            slack_ssl: 0.0,
            slack_csl: 0.0,
            diagnostics: Diagnostics {
                b: node.b,
                bdot: node.bdot,
                bddot: node.bddot,
                mean_energy: mean,
                bhattacharyya_analytic: b_an,
                v_csl_exact: v_exact,
                v_mt_exact,
                v_csl_formula_ermakov: f_erm,
                v_csl_formula_paper: f_pap,
            },
        });
    }

    let times = traj.times.clone();
    let qsl: Vec<f64> = rows.iter().map(|r| r.v_qsl).collect();
    let ssl: Vec<f64> = rows.iter().map(|r| r.v_ssl).collect();
    let csl: Vec<f64> = rows.iter().map(|r| r.v_csl).collect();
    for k in 1..rows.len() {
        let window = &times[..=k];
        let r = &mut rows[k];
        r.tau_qsl = tau_bound(r.t_wigner, &qsl[..=k], window)?;
        r.tau_ssl = tau_bound(r.t_wigner, &ssl[..=k], window)?;
        r.tau_csl = tau_bound(r.t_classical, &csl[..=k], window)?;
    }
    for r in &mut rows {
        r.slack_qsl = r.t - r.tau_qsl;
        r.slack_ssl = r.t - r.tau_ssl;
        r.slack_csl = r.t - r.tau_csl;
    }

    Ok(SpeedLimitReport {
        scenario: scenario.clone(),
        grid,
        trajectory: traj,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(profile: FrequencyProfile) -> Scenario {
        let mut s = Scenario::quench_default(UnitSystem::natural());
        s.profile = profile;
        s.grid.n_q = 96;
        s.grid.n_p = 96;
        s.n_times = 9;
        s.t_end = 1.0;
        s
    }

    #[test]
    fn first_row_is_the_identity() {
        let r = build_report(&small(FrequencyProfile::sudden_quench(1.0).unwrap())).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.t, 0.0);
        assert_eq!(row.t_wigner, 0.0);
        assert_eq!(row.t_classical, 0.0);
        assert!((row.bhattacharyya - 1.0).abs() < 1e-6);
        assert_eq!((row.tau_qsl, row.tau_ssl, row.tau_csl), (0.0, 0.0, 0.0));
    }

    #[test]
    fn static_profile_leaves_everything_still() {
        let mut s = small(FrequencyProfile::constant(1.0).unwrap());
        s.grid.n_q = 256;
        s.grid.n_p = 256;
        let r = build_report(&s).unwrap();
        for row in &r.rows {
            assert!(row.t_wigner < 1e-12 && row.t_classical < 1e-12);
            let worst = row.v_qsl.max(row.v_ssl).max(row.v_csl);
            assert!(worst < 1e-4, "{worst}");
            assert!((row.slack_csl - row.t).abs() < 1e-9);
            assert_eq!(row.v_csl_analytic, 0.0);
        }
    }

    #[test]
    fn quench_grid_is_widened() {
        let r = build_report(&small(FrequencyProfile::sudden_quench(1.0).unwrap())).unwrap();
        assert!((r.grid.q().max() - 6.0 * 2f64.sqrt()).abs() < 1e-6);
        assert!((r.grid.p().max() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut s = small(FrequencyProfile::sudden_quench(1.0).unwrap());
        s.grid.n_q = 4;
        assert!(matches!(build_report(&s), Err(Error::Config(_))));
        let mut s = small(FrequencyProfile::sudden_quench(2.0).unwrap());
        s.n_times = 3;
        assert!(matches!(build_report(&s), Err(Error::Config(_))));
    }

    #[test]
    fn off_center_gaussian_uses_characteristics() {
        let mut s = small(FrequencyProfile::sudden_quench(1.0).unwrap());
        s.classical = ClassicalModel::Gaussian(GaussianSpec::new(0.5, 0.8, (0.5, 0.0)).unwrap());
        assert!(s.analytic_gaussian().is_none());
        let r = build_report(&s).unwrap();
        let last = r.rows.last().unwrap();
        assert!(last.diagnostics.v_csl_exact.is_nan());
        assert!(last.slack_csl > -1e-3);
    }
}
