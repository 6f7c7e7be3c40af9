use std::path::{Path, PathBuf};

use serde::Serialize;
use speedlimit_core::bounds::{build_report, ReportRow, SpeedLimitReport};
use speedlimit_core::phasegrid::Measure;

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{csv_table, report_csv, write_atomic, FIG1_COLUMNS};
use crate::plot::render_svg;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerics(#[from] speedlimit_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerics(_) | CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents.as_bytes()).map_err(io_err(path))
}

fn output_dir(config: &ScenarioConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output.dir.clone());
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub config: ScenarioConfig,
    pub grid: GridSummary,
    pub endpoint: Endpoint,
    pub slack: SlackSummary,
    pub oracles: OracleSummary,
}

#[derive(Debug, Serialize)]
pub struct GridSummary {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    pub n_q: usize,
    pub n_p: usize,
    pub measure: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Endpoint {
    pub t: f64,
    pub t_wigner: f64,
    pub t_classical: f64,
    pub bhattacharyya: f64,
    pub tau_qsl: f64,
    pub tau_ssl: f64,
    pub tau_csl: f64,
    pub energy_cap: f64,
}

#[derive(Debug, Serialize)]
pub struct SlackSummary {
    pub min_slack_qsl: f64,
    pub min_slack_ssl: f64,
    pub min_slack_csl: f64,
    /// `max(0, -min slack)` per bound.
    pub max_violation_qsl: f64,
    pub max_violation_ssl: f64,
    pub max_violation_csl: f64,
}

#[derive(Debug, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub first: f64,
    pub last: f64,
    /// `(max - min) / |mean|`
    pub relative_spread: f64,
}

impl Spread {
    /// Over the finite entries of `v`; `None` if there are none.
    fn of(v: &[f64]) -> Option<Spread> {
        let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        Some(Spread {
            min,
            max,
            first: finite[0],
            last: finite[finite.len() - 1],
            relative_spread: (max - min) / mean.abs(),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub ermakov_max_residual: f64,
    pub v_qsl_minus_v_ssl_max_abs: f64,
    pub hellinger_identity_max_error: f64,
    pub mean_energy: Option<Spread>,
    pub bhattacharyya_max_relative_error: Option<f64>,
    pub v_csl_max_abs_error_vs_exact: Option<f64>,
    pub v_mt_max_abs_error_vs_exact: Option<f64>,
    /// Exact Gaussian `v_csl` over the published closed form with Ermakov `b''`.
    pub ratio_exact_to_published_ermakov: Option<Spread>,
    /// Same with `b'' = omega0^2`.
    pub ratio_exact_to_published_constant: Option<Spread>,
}

fn max_of(v: impl Iterator<Item = f64>) -> Option<f64> {
    v.filter(|x| !x.is_nan())
        .fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.max(x))))
}

fn measure_name(m: Measure) -> &'static str {
    match m {
        Measure::PaperGamma => "paper_gamma",
        Measure::Plain => "plain",
    }
}

pub fn summarize(config: &ScenarioConfig, report: &SpeedLimitReport) -> Summary {
    let rows = &report.rows;
    let last = rows.last().expect("reports have at least two rows");
    let min = |f: fn(&ReportRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let (sq, ss, sc) = (
        min(|r| r.slack_qsl),
        min(|r| r.slack_ssl),
        min(|r| r.slack_csl),
    );
    let grid = &report.grid;
    let d = |f: fn(&ReportRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Summary {
        config: config.clone(),
        grid: GridSummary {
            q_range: (grid.q().min(), grid.q().max()),
            p_range: (grid.p().min(), grid.p().max()),
            n_q: grid.n_q(),
            n_p: grid.n_p(),
            measure: measure_name(grid.measure()),
        },
        endpoint: Endpoint {
            t: last.t,
            t_wigner: last.t_wigner,
            t_classical: last.t_classical,
            bhattacharyya: last.bhattacharyya,
            tau_qsl: last.tau_qsl,
            tau_ssl: last.tau_ssl,
            tau_csl: last.tau_csl,
            energy_cap: last.energy_cap,
        },
        slack: SlackSummary {
            min_slack_qsl: sq,
            min_slack_ssl: ss,
            min_slack_csl: sc,
            max_violation_qsl: (-sq).max(0.0),
            max_violation_ssl: (-ss).max(0.0),
            max_violation_csl: (-sc).max(0.0),
        },
        oracles: OracleSummary {
            ermakov_max_residual: report.trajectory.max_residual(&report.scenario.profile),
            v_qsl_minus_v_ssl_max_abs: max_of(rows.iter().map(|r| (r.v_qsl - r.v_ssl).abs()))
                .unwrap_or(0.0),
            hellinger_identity_max_error: max_of(
                rows.iter()
                    .map(|r| (r.bhattacharyya - (1.0 - r.hellinger_sq)).abs()),
            )
            .unwrap_or(0.0),
            mean_energy: Spread::of(&d(|r| r.diagnostics.mean_energy)),
            bhattacharyya_max_relative_error: max_of(rows.iter().map(|r| {
                ((r.bhattacharyya - r.diagnostics.bhattacharyya_analytic)
                    / r.diagnostics.bhattacharyya_analytic)
                    .abs()
            })),
            v_csl_max_abs_error_vs_exact: max_of(
                rows.iter()
                    .map(|r| (r.v_csl - r.diagnostics.v_csl_exact).abs()),
            ),
            v_mt_max_abs_error_vs_exact: max_of(
                rows.iter()
                    .map(|r| (r.v_mt - r.diagnostics.v_mt_exact).abs()),
            ),
            ratio_exact_to_published_ermakov: Spread::of(&d(|r| {
                r.diagnostics.v_csl_exact / r.diagnostics.v_csl_formula_ermakov
            })),
            ratio_exact_to_published_constant: Spread::of(&d(|r| {
                r.diagnostics.v_csl_exact / r.diagnostics.v_csl_formula_paper
            })),
        },
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    Ok(ScenarioConfig::load(path)?)
}

/// Writes `report.csv` and `summary.json`; returns their paths.
pub fn run(config_path: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let config = load(config_path)?;
    let report = build_report(&config.scenario()?)?;
    let csv = report_csv(&report);
    let summary = summarize(&config, &report);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    let dir = output_dir(&config, out)?;
    let (csv_path, json_path) = (dir.join("report.csv"), dir.join("summary.json"));
    write(&csv_path, &csv)?;
    write(&json_path, &json)?;
    Ok(vec![csv_path, json_path])
}

/// `|dB/dt|` of the closed-form overlap series; zero at `t = 0`, where
/// `b = 1` and `b' = 0` make both chain-rule factors vanish.
pub fn abs_db_dt(times: &[f64], b: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else if k + 1 < n {
                ((b[k + 1] - b[k - 1]) / (times[k + 1] - times[k - 1])).abs()
            } else if n >= 3 {
                let h = times[k] - times[k - 1];
                ((3.0 * b[k] - 4.0 * b[k - 1] + b[k - 2]) / (2.0 * h)).abs()
            } else {
                ((b[k] - b[k - 1]) / (times[k] - times[k - 1])).abs()
            }
        })
        .collect()
}

pub fn fig1_csv(report: &SpeedLimitReport) -> String {
    let omega0 = report.scenario.units.omega0;
    let times = report.times();
    let b = report.column(|r| r.diagnostics.bhattacharyya_analytic);
    let db = abs_db_dt(&times, &b);
    let rows = report.rows.iter().zip(db).map(|(r, d)| {
        vec![
            r.t * omega0,
            d,
            r.v_mt,
            r.diagnostics.v_csl_formula_ermakov,
            r.diagnostics.v_csl_formula_paper,
        ]
    });
    csv_table(&FIG1_COLUMNS, rows)
}

pub fn fig1(config_path: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let config = load(config_path)?;
    let scenario = config.scenario()?;
    if scenario.analytic_gaussian().is_none() {
        return Err(CliError::Config(ConfigError {
            path: config_path.to_path_buf(),
            line: 1,
            column: 1,
            message: "fig1 needs a centered classical Gaussian that is a function of the \
                      oscillator energy (eigenstate 0, or a matched Gaussian)"
                .into(),
        }));
    }
    let report = build_report(&scenario)?;
    let dir = output_dir(&config, out)?;
    let path = dir.join("fig1.csv");
    write(&path, &fig1_csv(&report))?;
    Ok(path)
}

pub fn plot(csv_path: &Path, svg_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv_path).map_err(io_err(csv_path))?;
    let svg =
        render_svg(&text).map_err(|m| CliError::Usage(format!("{}: {m}", csv_path.display())))?;
    write(svg_path, &svg)
}
