//! Scenario generation, parameter sweeps and the `fogmarket` command line.

pub mod cli;
pub mod error;
pub mod generator;
pub mod stats;
pub mod sweep;

pub use error::{HarnessError, Result};
pub use generator::{generate_scenario, GeneratorParams};
pub use sweep::{run_sweep, SweepReport, SweepRow, SweepSpec, SweepVar};
