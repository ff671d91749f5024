//! Configuration, datasets, populations, sweeps and result files.

pub mod config;
pub mod idx;
pub mod output;
pub mod sweep;
pub mod synth;

pub use config::{DataSource, ExperimentSpec, PopulationSpec, Scenario, SweepSpec};
pub use idx::load_idx;
pub use output::{write_allocation_jsonl, write_sweep_csv, write_trace_csv};
pub use sweep::{run_sweep, SweepRow};
pub use synth::{synthesize_dataset, synthesize_users, CellPosition, SynthesizedPopulation};
