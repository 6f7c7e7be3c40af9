//! Self-contained invariant suite behind `speedlimit validate`.
//!
//! Every check runs at a reference resolution of `N x N` nodes (512 by
//! default) with `N/2 + 1` time nodes. Tolerances that come from the
//! discretization are scaled with `r = 512 / N`: L1 norms of kinked
//! integrands with `r^2`, anything limited by the 4th-order stencils (bound
//! validity, derivative chains, stationarity) with `r^4`. Exact identities
//! keep fixed tolerances.

use std::f64::consts::PI;
use std::sync::Arc;

use speedlimit_core::bounds::{
    build_report, BddotConvention, ReportRow, Scenario, SpeedLimitReport,
};
use speedlimit_core::brackets::{
    h_partial, moyal_bracket, poisson_bracket, HamiltonianSpec, MoyalOrder,
};
use speedlimit_core::dynamics::{
    propagate_characteristics, scaling_map, solve_ermakov, FrequencyProfile, ProfileKind,
};
use speedlimit_core::metrics::{
    bhattacharyya, classical_trace_distance, hellinger, wigner_trace_distance,
};
use speedlimit_core::phasegrid::{
    make_grid, FieldRole, Measure, PhaseField, PhaseGrid, UnitSystem,
};
use speedlimit_core::states::{
    classical_from_wigner, gaussian_classical_density, ho_eigenstate_wigner, GaussianSpec,
    InitialState, Scaling,
};

use crate::output::{report_csv, write_atomic, REPORT_COLUMNS};

pub const REFERENCE_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub grid: usize,
    pub paper_bddot: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            grid: REFERENCE_GRID,
            paper_bddot: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for reference, never fails the suite.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub status: Status,
}

impl Check {
    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        if self.status == Status::Info {
            format!("{tag}  {:<52} value = {:.6e}", self.name, self.value)
        } else {
            format!(
                "{tag}  {:<52} value = {:.3e}  tol = {:.3e}",
                self.name, self.value, self.tolerance
            )
        }
    }
}

struct Suite<'a> {
    checks: Vec<Check>,
    sink: &'a mut dyn FnMut(&Check),
}

impl Suite<'_> {
    /// Pass when `value <= tolerance` (NaN fails).
    fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        self.push(Check {
            name: name.into(),
            value,
            tolerance,
            status,
        });
    }

    fn info(&mut self, name: impl Into<String>, value: f64) {
        self.push(Check {
            name: name.into(),
            value,
            tolerance: f64::NAN,
            status: Status::Info,
        });
    }

    fn push(&mut self, c: Check) {
        (self.sink)(&c);
        self.checks.push(c);
    }

    fn error(&mut self, name: &str, e: impl std::fmt::Display) {
        let c = Check {
            name: format!("{name}: {e}"),
            value: f64::NAN,
            tolerance: f64::NAN,
            status: Status::Fail,
        };
        self.push(c);
    }
}

fn max_abs_diff(a: &PhaseField, b: &PhaseField) -> f64 {
    a.zip_map(b, |x, y| x - y).max_abs()
}

fn square_grid(n: usize, half: f64, measure: Measure) -> Arc<PhaseGrid> {
    make_grid(
        (-half, half),
        n,
        (-half, half),
        n,
        measure,
        UnitSystem::natural(),
    )
    .expect("valid grid")
}

fn quench_scaling(t: f64) -> Scaling {
    let b = (1.0f64 + t * t).sqrt();
    Scaling { b, bdot: t / b }
}

fn ramp() -> FrequencyProfile {
    FrequencyProfile::new(
        ProfileKind::LinearRamp {
            omega_final: 0.4,
            ramp_time: 1.5,
        },
        1.0,
    )
    .expect("valid ramp")
}

fn profiles() -> Vec<(&'static str, FrequencyProfile)> {
    vec![
        ("quench", FrequencyProfile::sudden_quench(1.0).unwrap()),
        ("constant", FrequencyProfile::constant(1.0).unwrap()),
        ("ramp", ramp()),
        (
            "table",
            FrequencyProfile::new(
                ProfileKind::Tabulated {
                    times: vec![0.0, 1.0, 2.0, 3.0],
                    omegas: vec![1.0, 0.5, 0.8, 0.3],
                },
                1.0,
            )
            .unwrap(),
        ),
    ]
}

/// Largest `|dX/dt| - v` over interior nodes, central differences.
pub fn chain_excess(times: &[f64], series: &[f64], velocity: &[f64]) -> f64 {
    (1..times.len().saturating_sub(1))
        .map(|k| {
            let d = (series[k + 1] - series[k - 1]) / (times[k + 1] - times[k - 1]);
            d.abs() - velocity[k]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The default quench scenario at `n x n` with `n/2 + 1` time nodes.
pub fn reference_scenario(n: usize, paper_bddot: bool) -> Scenario {
    let mut s = Scenario::quench_default(UnitSystem::natural());
    s.grid.n_q = n;
    s.grid.n_p = n;
    s.n_times = n / 2 + 1;
    if paper_bddot {
        s.bddot = BddotConvention::PaperConstant;
    }
    s
}

pub fn run_suite(opts: SuiteOptions, sink: &mut dyn FnMut(&Check)) -> Vec<Check> {
    let mut suite = Suite {
        checks: Vec::new(),
        sink,
    };
    let n = opts.grid;
    let r = REFERENCE_GRID as f64 / n as f64;
    phasegrid_checks(&mut suite, n, r);
    state_checks(&mut suite, n, r);
    bracket_checks(&mut suite, n, r);
    dynamics_checks(&mut suite, n);
    metric_checks(&mut suite, n);
    match build_report(&reference_scenario(n, opts.paper_bddot)) {
        Ok(report) => bound_checks(&mut suite, &report, r),
        Err(e) => suite.error("reference report", e),
    }
    cli_checks(&mut suite, n);
    suite.checks
}

fn phasegrid_checks(s: &mut Suite, n: usize, r: f64) {
    let odd = n | 1;
    let g = make_grid(
        (-1.0, 2.0),
        odd,
        (-3.0, 1.0),
        odd,
        Measure::Plain,
        UnitSystem::natural(),
    )
    .expect("valid grid");
    let f = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
        q * q * q - 2.0 * q * q * p + p * p * p + 1.0
    })
    .unwrap();
    // int_{-1}^{2} int_{-3}^{1} (q^3 - 2 q^2 p + p^3 + 1) dp dq
    let exact = 4.0 * 15.0 / 4.0 - 2.0 * 3.0 * (-4.0) + 3.0 * (-20.0) + 12.0;
    s.at_most(
        "quadrature: cubic exactness (rel)",
        ((f.integrate() - exact) / exact).abs(),
        1e-12,
    );

    let g = square_grid(n, 6.0, Measure::Plain);
    let w = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
    let plain = w.integrate();
    let gamma = w.with_measure(Measure::PaperGamma).integrate();
    s.at_most(
        "quadrature: PaperGamma = 2 pi hbar x Plain (rel)",
        ((gamma - 2.0 * PI * plain) / gamma).abs(),
        1e-13,
    );

    let f = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
        (-(q - 0.3).powi(2) - 0.7 * (p + 0.2).powi(2) + 0.4 * q * p).exp()
    })
    .unwrap();
    let qp = f.partial_q().partial_p();
    let pq = f.partial_p().partial_q();
    s.at_most(
        "derivatives: mixed partials commute",
        max_abs_diff(&qp, &pq),
        1e-6 * r.powi(4),
    );

    let l2 = w.l2_norm();
    s.at_most(
        "norms: l2^2 - l1 * max|f|",
        l2 * l2 - w.l1_norm() * w.max_abs(),
        0.0,
    );
}

fn state_checks(s: &mut Suite, n: usize, r: f64) {
    let g = square_grid(n, 8.0, Measure::Plain);
    let (mut norm, mut purity, mut dens) = (0.0f64, 0.0f64, 0.0f64);
    let (mut parity, mut scale) = (0.0f64, 0.0f64);
    for k in 0..4 {
        for sc in [(1.0, 0.0), (1.3, 0.4)] {
            let w = ho_eigenstate_wigner(k, sc, &g).unwrap();
            norm = norm.max((w.integrate() - 1.0).abs());
            let sq = w.zip_map(&w, |a, b| a * b).integrate();
            purity = purity.max((2.0 * PI * sq - 1.0).abs());
            let rho = classical_from_wigner(&w).unwrap();
            dens = dens.max((rho.integrate() - 1.0).abs());
            for i in 0..n {
                for j in 0..n {
                    parity = parity.max((w.at(i, j) - w.at(n - 1 - i, n - 1 - j)).abs());
                }
            }
            scale = scale.max(w.max_abs());
        }
    }
    let spec = GaussianSpec::new(0.6, 0.9, (0.0, 0.0)).unwrap();
    let rho = gaussian_classical_density(&spec, (1.2, -0.3), &g).unwrap();
    dens = dens.max((rho.integrate() - 1.0).abs());
    s.at_most("states: Wigner normalization, n = 0..3", norm, 1e-6);
    s.at_most("states: purity 2 pi hbar int W^2, n = 0..3", purity, 1e-6);
    s.at_most("states: classical density normalization", dens, 1e-6);
    s.at_most(
        "states: parity W(q,p) = W(-q,-p) (rel)",
        parity / scale,
        1e-14,
    );

    let fine = square_grid(2 * n, 6.0, Measure::Plain);
    let h = HamiltonianSpec::harmonic(1.0, |_| 1.0);
    let worst = (0..3)
        .map(|k| {
            let w = ho_eigenstate_wigner(k, (1.0, 0.0), &fine).unwrap();
            poisson_bracket(&h, 0.0, &w).l1_norm()
        })
        .fold(0.0, f64::max);
    s.at_most(
        "states: eigenstate stationarity, n = 0..2 (2N grid)",
        worst,
        1e-6 * r.powi(4),
    );
}

fn bracket_checks(s: &mut Suite, n: usize, r: f64) {
    let small = square_grid(41, 2.0, Measure::Plain);
    let h = HamiltonianSpec::harmonic(1.3, |_| 0.7);
    let f_poly = HamiltonianSpec::new().with_term(|_| 1.0, 2, 1).unwrap();
    let a = poisson_bracket(&h, 0.0, &h_partial(&f_poly, 0.0, 0, 0, &small));
    let b = poisson_bracket(&f_poly, 0.0, &h_partial(&h, 0.0, 0, 0, &small));
    s.at_most(
        "brackets: antisymmetry surrogate",
        a.zip_map(&b, |x, y| x + y).max_abs(),
        1e-10,
    );

    let g = square_grid(n, 6.0, Measure::Plain);
    let h = HamiltonianSpec::harmonic(1.0, |_| 1.2);
    let f = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
        (-(q - 0.4).powi(2) - 0.8 * p * p).exp()
    })
    .unwrap();
    let k = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
        (-0.5 * q * q - (p + 0.3).powi(2)).exp()
    })
    .unwrap();
    let lhs = poisson_bracket(&h, 0.0, &f.zip_map(&k, |a, b| a * b));
    let rhs = poisson_bracket(&h, 0.0, &f)
        .zip_map(&k, |a, b| a * b)
        .zip_map(
            &poisson_bracket(&h, 0.0, &k).zip_map(&f, |a, b| a * b),
            |a, b| a + b,
        );
    s.at_most(
        "brackets: Leibniz rule",
        max_abs_diff(&lhs, &rhs),
        1e-5 * r.powi(4),
    );

    let w = ho_eigenstate_wigner(1, (1.3, 0.4), &g).unwrap();
    let mut worst = 0.0f64;
    for (_, p) in profiles() {
        let h = p.hamiltonian(1.0);
        for t in [0.0, 0.7, 2.5] {
            let moyal = moyal_bracket(&h, t, &w, MoyalOrder::Hbar2).unwrap();
            worst = worst.max(max_abs_diff(&moyal, &poisson_bracket(&h, t, &w)));
        }
    }
    s.at_most("brackets: Moyal = Poisson for quadratic H", worst, 1e-12);

    let quartic = HamiltonianSpec::harmonic(1.0, |_| 1.0)
        .with_term(|_| 0.1, 4, 0)
        .unwrap();
    let trace = poisson_bracket(&quartic, 0.0, &f).integrate().abs();
    s.at_most("brackets: trace conservation int {H, f}", trace, 1e-8);
}

fn dynamics_checks(s: &mut Suite, n: usize) {
    let mut residual = 0.0f64;
    for (_, p) in profiles() {
        match solve_ermakov(&p, 3.0, 1024) {
            Ok(traj) => residual = residual.max(traj.max_residual(&p)),
            Err(e) => return s.error("dynamics: Ermakov", e),
        }
    }
    s.at_most("dynamics: Ermakov residual, all profiles", residual, 1e-8);

    let quench = FrequencyProfile::sudden_quench(1.0).unwrap();
    let traj = solve_ermakov(&quench, 3.0, 1024).unwrap();
    let drift = (0..traj.len())
        .map(|k| (traj.bdot[k].powi(2) + traj.b[k].powi(-2) - 1.0).abs())
        .fold(0.0, f64::max);
    s.at_most("dynamics: quench first integral b'^2 + 1/b^2", drift, 1e-8);

    let g = make_grid(
        (-12.0, 12.0),
        n,
        (-6.0, 6.0),
        n,
        Measure::Plain,
        UnitSystem::natural(),
    )
    .unwrap();
    let state = InitialState::HoEigenstate(0);
    let mut worst = 0.0f64;
    let mut norm = 0.0f64;
    for p in [quench, ramp()] {
        let h = p.hamiltonian(1.0);
        let traj = solve_ermakov(&p, 2.0, 2048).unwrap();
        for t in [0.5f64, 1.0, 2.0] {
            let k = (t / 2.0 * 2048.0).round() as usize;
            let a = scaling_map(&state, traj.scaling(k), &g).unwrap();
            match propagate_characteristics(&state, &h, t, &g, 64) {
                Ok(b) => {
                    worst = worst.max(max_abs_diff(&a, &b));
                    norm = norm.max((b.integrate() - 1.0).abs());
                }
                Err(e) => return s.error("dynamics: characteristics", e),
            }
        }
    }
    s.at_most("dynamics: scaling map vs characteristics", worst, 1e-3);
    s.at_most("dynamics: propagated normalization", norm, 1e-6);
}

fn metric_checks(s: &mut Suite, n: usize) {
    let g = make_grid(
        (-12.0, 12.0),
        n,
        (-6.0, 6.0),
        n,
        Measure::PaperGamma,
        UnitSystem::natural(),
    )
    .unwrap();
    let w0 = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
    let w1 = scaling_map(&InitialState::HoEigenstate(0), quench_scaling(1.0), &g).unwrap();
    let r0 = classical_from_wigner(&w0).unwrap();
    let r1 = classical_from_wigner(&w1).unwrap();
    let spec = GaussianSpec::new(0.9, 0.5, (0.5, -0.2)).unwrap();
    let r2 = gaussian_classical_density(&spec, (1.4, 0.6), &g).unwrap();

    let mut sym = 0.0f64;
    sym = sym.max(
        (wigner_trace_distance(&w1, &w0).unwrap() - wigner_trace_distance(&w0, &w1).unwrap()).abs(),
    );
    let mut ident = wigner_trace_distance(&w1, &w1).unwrap().abs();
    let mut identity = 0.0f64;
    let mut upper = f64::NEG_INFINITY;
    for (a, b) in [(&r0, &r1), (&r1, &r2), (&r0, &r2)] {
        sym = sym.max(
            (classical_trace_distance(a, b).unwrap() - classical_trace_distance(b, a).unwrap())
                .abs(),
        );
        sym = sym.max((bhattacharyya(a, b).unwrap() - bhattacharyya(b, a).unwrap()).abs());
        sym = sym.max((hellinger(a, b).unwrap() - hellinger(b, a).unwrap()).abs());
        ident = ident.max(classical_trace_distance(a, a).unwrap().abs());
        ident = ident.max((bhattacharyya(a, a).unwrap() - 1.0).abs());
        ident = ident.max(hellinger(a, a).unwrap().abs());
        let bc = bhattacharyya(a, b).unwrap();
        let h = hellinger(a, b).unwrap();
        identity = identity.max((bc - (1.0 - h * h)).abs());
        upper = upper.max(bc - 1.0);
    }
    s.at_most("metrics: symmetry", sym, 1e-13);
    s.at_most("metrics: identity of indiscernibles", ident, 1e-12);
    s.at_most("metrics: B = 1 - H^2", identity, 1e-10);
    s.at_most("metrics: B <= 1", upper, 1e-9);

    // Same scenario under both measure flags.
    let mut scenario = reference_scenario(n, false);
    scenario.n_times = 33;
    let gamma = build_report(&scenario);
    scenario.grid.measure = Measure::Plain;
    let plain = build_report(&scenario);
    match (gamma, plain) {
        (Ok(a), Ok(b)) => {
            let worst = a
                .rows
                .iter()
                .zip(&b.rows)
                .skip(1)
                .map(|(x, y)| ((x.tau_qsl - y.tau_qsl) / x.tau_qsl).abs())
                .fold(0.0, f64::max);
            s.at_most("metrics: tau_qsl measure invariance (rel)", worst, 1e-12);
        }
        (Err(e), _) | (_, Err(e)) => s.error("metrics: tau measure invariance", e),
    }
}

fn bound_checks(s: &mut Suite, report: &SpeedLimitReport, r: f64) {
    let col = |f: fn(&ReportRow) -> f64| report.column(f);
    let times = report.times();
    let r4 = r.powi(4);
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let max = |v: Vec<f64>| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    s.at_most(
        "bounds: validity, -min slack_qsl",
        -min(col(|r| r.slack_qsl)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: validity, -min slack_ssl",
        -min(col(|r| r.slack_ssl)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: validity, -min slack_csl",
        -min(col(|r| r.slack_csl)),
        1e-3 * r4,
    );

    let tw = col(|r| r.t_wigner);
    let tc = col(|r| r.t_classical);
    let b = col(|r| r.bhattacharyya);
    s.at_most(
        "bounds: |dT_wigner/dt| <= v_qsl",
        chain_excess(&times, &tw, &col(|r| r.v_qsl)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: |dT_wigner/dt| <= v_ssl",
        chain_excess(&times, &tw, &col(|r| r.v_ssl)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: |dT_classical/dt| <= v_csl",
        chain_excess(&times, &tc, &col(|r| r.v_csl)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: |dB/dt| <= v_mt",
        chain_excess(&times, &b, &col(|r| r.v_mt)),
        1e-3 * r4,
    );
    s.at_most(
        "bounds: v_qsl = v_ssl for quadratic H",
        max(report.column(|r| (r.v_qsl - r.v_ssl).abs())),
        1e-12,
    );
    s.at_most(
        "bounds: B vs closed form (rel)",
        max(report.column(|r| {
            ((r.bhattacharyya - r.diagnostics.bhattacharyya_analytic)
                / r.diagnostics.bhattacharyya_analytic)
                .abs()
        })),
        1e-4,
    );
    s.at_most(
        "bounds: v_csl vs exact Gaussian rate",
        max(report.column(|r| (r.v_csl - r.diagnostics.v_csl_exact).abs())),
        1e-3 * r * r,
    );
    s.at_most(
        "bounds: v_mt vs exact Gaussian rate",
        max(report.column(|r| (r.v_mt - r.diagnostics.v_mt_exact).abs())),
        1e-3 * r * r,
    );

    let ratios = report.column(|r| r.diagnostics.v_csl_exact / r.v_csl_analytic);
    s.info("bounds: exact / published v_csl, first node", ratios[0]);
    s.info(
        "bounds: exact / published v_csl, last node",
        ratios[ratios.len() - 1],
    );
    let plain_excess = max(report.column(|r| {
        let v = match report.grid.measure() {
            Measure::PaperGamma => r.v_qsl / report.grid.prefactor(),
            Measure::Plain => r.v_qsl,
        };
        v - r.energy_cap
    }));
    s.info("bounds: max (v_qsl[Plain] - energy cap)", plain_excess);
}

fn cli_checks(s: &mut Suite, n: usize) {
    let mut scenario = reference_scenario((n / 4).max(32), false);
    scenario.n_times = 9;
    let a = build_report(&scenario).map(|r| report_csv(&r));
    let b = build_report(&scenario).map(|r| report_csv(&r));
    let (a, b) = match (a, b) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return s.error("cli: determinism", e),
    };
    s.at_most(
        "cli: byte-identical CSV across runs",
        (a != b) as u8 as f64,
        0.0,
    );

    let mut lines = a.lines();
    let header_ok = lines.next() == Some(REPORT_COLUMNS.join(",").as_str());
    let rows_ok = lines.all(|l| l.split(',').count() == REPORT_COLUMNS.len());
    s.at_most(
        "cli: CSV header and row width",
        (!(header_ok && rows_ok)) as u8 as f64,
        0.0,
    );

    let ok = (|| -> std::io::Result<bool> {
        let dir = tempfile::tempdir()?;
        let target = dir.path().join("report.csv");
        write_atomic(&target, a.as_bytes())?;
        let missing = dir.path().join("absent").join("report.csv");
        let failed = write_atomic(&missing, a.as_bytes()).is_err();
        let entries = std::fs::read_dir(dir.path())?.count();
        Ok(failed && entries == 1 && std::fs::read_to_string(&target)? == a)
    })()
    .unwrap_or(false);
    s.at_most(
        "cli: atomic writes leave no partial files",
        (!ok) as u8 as f64,
        0.0,
    );
}
