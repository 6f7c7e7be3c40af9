//! Library side of the `speedlimit` command: configuration, report output,
//! the overlap-rate comparison series and the validation suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod suite;
