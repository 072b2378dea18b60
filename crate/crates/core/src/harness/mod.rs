//! Scenario files, seeded generation, sweeps and output.

pub mod config;
pub mod emit;
pub mod sweep;

pub use config::{load_scenario, parse_scenario, CapacityValue, PerNode, ScenarioFile};
pub use emit::{
    load_report, save_policy_csv, save_sweep_csv, write_json, write_sweep_csv, ReportFile,
    SweepMeta, TOOL_VERSION,
};
pub use sweep::{
    generate_harvests, load_sweep, run_sweep, SweepMode, SweepRow, SweepSpec, SweptParameter,
    RNG_NAME,
};
