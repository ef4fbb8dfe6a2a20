//! Experiment runner behind the `tpm` command: settings, CSV tables with a
//! provenance header, and the sweeps and curves built on `tpm-core`.

pub mod commands;
pub mod config;
pub mod curves;
pub mod phase;
pub mod stats;
pub mod svg;
pub mod table;
pub mod whiten;
