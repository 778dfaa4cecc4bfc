//! Command-line driver for genscatter-core: resolves run configuration,
//! fans grid sweeps out over a worker pool, and serializes tables with a
//! reproducible header block.

pub mod commands;
pub mod config;
pub mod output;
