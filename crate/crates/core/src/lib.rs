//! Phase-space speed limits across the quantum-to-classical transition.
//!
//! The crate works on a uniform rectangular `(q, p)` grid and provides:
//!
//! - [`phasegrid`]: grids, quadrature, stencil derivatives and field norms;
//! - [`states`]: harmonic-oscillator Wigner eigenstates, Gaussian classical
//!   densities and the Wigner transform of a sampled wavefunction;
//! - [`brackets`]: polynomial Hamiltonians, Poisson and truncated Moyal brackets;
//! - [`dynamics`]: the Ermakov equation, the exact scaling evolution and an
//!   independent characteristics propagator;
//! - [`metrics`]: Wigner and classical trace distances, Bhattacharyya and
//!   Hellinger;
//! - [`bounds`]: instantaneous and averaged velocities, the Margolus-Levitin
//!   `tau` bounds and the report builder.
//!
//! Sign convention: brackets are oriented so that `df/dt = {H, f}` with
//! `{H, f} = dH/dq df/dp - dH/dp df/dq`.

pub mod bounds;
pub mod brackets;
pub mod dynamics;
mod error;
pub mod metrics;
pub mod phasegrid;
pub mod states;

pub use error::{Error, Result};
