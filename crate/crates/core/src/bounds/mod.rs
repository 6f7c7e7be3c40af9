//! Evolution velocities and Margolus-Levitin time bounds.
//!
//! For a distance `D(t)` between the evolved and the initial state and an
//! instantaneous velocity `v(t) >= |dD/dt|`, integrating over `[0, tau]`
//! gives `tau >= D(tau) / <v>_tau`, where `<v>_tau` is the time average of
//! `v` over the window. Three pairs are assembled:
//!
//! | bound | distance                      | velocity                     |
//! |-------|-------------------------------|------------------------------|
//! | QSL   | `int dGamma |W_t - W_0|`      | `int dGamma |{{H, W_t}}|`    |
//! | SSL   | `int dGamma |W_t - W_0|`      | `int dGamma |{H, W_t}|`      |
//! | CSL   | `int dq dp |sqrt rho_t - sqrt rho_0|` | `int dq dp |{H, sqrt rho_t}|` |

mod report;

pub use report::{
    build_report, ClassicalModel, Diagnostics, GridSpec, ReportRow, Scenario, SpeedLimitReport,
    MAX_NODES,
};

use std::f64::consts::PI;

use crate::brackets::{moyal_bracket, poisson_bracket, HamiltonianSpec, MoyalOrder};
use crate::dynamics::{time_average, ErmakovNode};
use crate::phasegrid::{FieldRole, Measure, PhaseField, UnitSystem};
use crate::states::{sqrt_density, GaussianSpec};
use crate::{Error, Result};

/// Below this the averaged velocity is treated as zero.
pub const VELOCITY_FLOOR: f64 = 1e-14;
/// Below this a distance is treated as zero.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Which `b''` enters the closed-form classical velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BddotConvention {
    /// `b''` from the Ermakov equation at the node.
    #[default]
    Ermakov,
    /// The constant `omega0^2`, exact only at `t = 0` of a sudden quench.
    PaperConstant,
}

/// `int dGamma |{{H, W_t}}|` under the grid measure.
pub fn v_qsl(w_t: &PhaseField, h: &HamiltonianSpec, t: f64, order: MoyalOrder) -> Result<f64> {
    w_t.require_role(FieldRole::Wigner)?;
    Ok(moyal_bracket(h, t, w_t, order)?.l1_norm())
}

/// `int dGamma |{H, W_t}|` under the grid measure.
pub fn v_ssl(w_t: &PhaseField, h: &HamiltonianSpec, t: f64) -> Result<f64> {
    w_t.require_role(FieldRole::Wigner)?;
    Ok(poisson_bracket(h, t, w_t).l1_norm())
}

/// `int dq dp |{H, sqrt(rho_t)}|`.
pub fn v_csl(rho_t: &PhaseField, h: &HamiltonianSpec, t: f64) -> Result<f64> {
    let s = sqrt_density(rho_t)?;
    Ok(poisson_bracket(h, t, &s).l1_norm_with(Measure::Plain))
}

/// `(int dq dp {H, sqrt(rho_t)}^2)^(1/2)`.
///
/// By Cauchy-Schwarz this bounds `|dB/dt|` for the Bhattacharyya overlap
/// with any normalized initial density.
pub fn v_mt_comparator(rho_t: &PhaseField, h: &HamiltonianSpec, t: f64) -> Result<f64> {
    let s = sqrt_density(rho_t)?;
    Ok(poisson_bracket(h, t, &s).l2_norm_with(Measure::Plain))
}

/// Published closed form `sqrt(sigma_q / (pi sigma_p)) 4 m sigma_q |b''|`.
pub fn v_csl_analytic(
    node: ErmakovNode,
    spec: &GaussianSpec,
    units: &UnitSystem,
    convention: BddotConvention,
) -> f64 {
    let bddot = match convention {
        BddotConvention::Ermakov => node.bddot,
        BddotConvention::PaperConstant => units.omega0 * units.omega0,
    };
    (spec.sigma_q / (PI * spec.sigma_p)).sqrt() * 4.0 * units.mass * spec.sigma_q * bddot.abs()
}

/// L1 and L2 norms of `d/dt sqrt(rho_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRates {
    pub l1: f64,
    pub l2: f64,
}

/// Exact rates for a centered Gaussian carried by the scaling map.
///
/// In the rescaled variables `u = Q/sigma_q`, `v = P/sigma_p` the time
/// derivative of `sqrt(rho_t)` is a quadrupole `r^2 R cos(2 th - phi)` times
/// the Gaussian envelope, with
///
/// ```text
/// a = b'/b,   c = m (b'^2 - b b'') sigma_q / (2 sigma_p),   R = sqrt(a^2 + c^2)
/// ```
///
/// so `L1 = 8 sqrt(sigma_q sigma_p / pi) R` and `L2 = R`. When
/// `sigma_p = m omega0 sigma_q` the scaling map is the Hamiltonian flow and
/// these are the norms of `{H, sqrt(rho_t)}`.
pub fn gaussian_rates(node: ErmakovNode, spec: &GaussianSpec, units: &UnitSystem) -> GaussianRates {
    let ErmakovNode { b, bdot, bddot } = node;
    let a = bdot / b;
    let c = units.mass * (bdot * bdot - b * bddot) * spec.sigma_q / (2.0 * spec.sigma_p);
    let r = a.hypot(c);
    GaussianRates {
        l1: 8.0 * (spec.sigma_q * spec.sigma_p / PI).sqrt() * r,
        l2: r,
    }
}

/// Weyl average `int dq dp H W_t`.
pub fn mean_energy(w_t: &PhaseField, h: &HamiltonianSpec, t: f64) -> Result<f64> {
    w_t.require_role(FieldRole::Wigner)?;
    let grid = w_t.grid();
    let energy = crate::brackets::h_partial(h, t, 0, 0, grid);
    Ok(energy
        .zip_map(w_t, |e, w| e * w)
        .integrate_with(Measure::Plain))
}

/// `2 (<H> - E0) / hbar`.
pub fn energy_cap(w_t: &PhaseField, h: &HamiltonianSpec, t: f64, e0: f64) -> Result<f64> {
    let mean = mean_energy(w_t, h, t)?;
    if mean < e0 {
        return Err(Error::InconsistentE0 { mean, e0 });
    }
    Ok(2.0 * (mean - e0) / w_t.grid().units().hbar)
}

/// `distance / <velocity>` over the sampled window.
///
/// Returns `+inf` when the average velocity vanishes but the distance does
/// not, and `0` when both vanish.
pub fn tau_bound(distance: f64, velocities: &[f64], times: &[f64]) -> Result<f64> {
    let avg = time_average(velocities, times)?;
    if avg < VELOCITY_FLOOR {
        if distance > DISTANCE_FLOOR {
            return Ok(f64::INFINITY);
        }
        return Ok(0.0);
    }
    Ok(distance / avg)
}
