//! Experiment harness around [`amrlab_core`]: configuration files, CSV
//! histories, mesh dumps, plot data, threaded trial execution and the
//! drivers behind the `amrlab` command.

pub mod config;
pub mod exec;
pub mod experiments;
pub mod history;
pub mod mesh_io;
pub mod output;
pub mod plot;

pub use amrlab_core as core;
