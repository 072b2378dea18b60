//! JSON reports and CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_feasible, check_partially_procrastinating, check_procrastinating, Cooperation,
    DecomposedPolicy, Scenario, TransferPolicy,
};
use crate::transfer::{Regime, WaterLevels};
use crate::waterfill::SolveReport;

use super::config::{read_json, ScenarioFile};
use super::sweep::{SweepRow, SweepSpec, RNG_NAME};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bcd_iterations: usize,
    pub level_residual: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub warnings: Vec<String>,
}

/// Everything a solve produced, plus the scenario it was solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub scenario: ScenarioFile,
    pub mode: Cooperation,
    pub objective_nats: f64,
    pub objective_bits: f64,
    pub policy: DecomposedPolicy,
    pub transmit: TransferPolicy,
    pub levels: WaterLevels,
    pub diagnostics: Diagnostics,
}

impl ReportFile {
    pub fn new(sc: &Scenario, r: &SolveReport) -> Self {
        ReportFile {
            tool: TOOL_VERSION.to_string(),
            scenario: ScenarioFile::from(sc),
            mode: r.mode,
            objective_nats: r.objective_nats,
            objective_bits: r.objective_bits(),
            policy: r.policy.clone(),
            transmit: r.transmit.clone(),
            levels: r.levels.clone(),
            diagnostics: Diagnostics {
                bcd_iterations: r.bcd_iterations,
                level_residual: r.level_residual,
                converged: r.converged,
                objective_trace: r.objective_trace.clone(),
                regimes: r.regimes.clone(),
                warnings: r.warnings.clone(),
            },
        }
    }

    /// Re-check a (reloaded) report: the transmit policy must be feasible
    /// and procrastinating in the sense its batteries call for.
    pub fn revalidate(&self) -> Result<()> {
        let sc = self.scenario.to_scenario()?;
        let report = check_feasible(&self.transmit, &sc);
        if !report.feasible {
            return Err(Error::Infeasible(report));
        }
        let ok = if sc.all_infinite() {
            check_procrastinating(&self.transmit, &sc)
        } else {
            check_partially_procrastinating(&self.policy, &sc)
        };
        if !ok {
            return Err(Error::Invariant(
                "reported policy is not procrastinating".into(),
            ));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON; floats are written in shortest round-trip form.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ReportFile> {
    read_json(path.as_ref())
}

pub const SWEEP_HEADER: [&str; 7] = [
    "swept_value",
    "mode",
    "mean_nats",
    "mean_bits",
    "trials",
    "seed",
    "nonconverged",
];

/// Sweep rows as CSV, one row per (swept value, mode), in the given order.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.swept_value.to_string(),
            r.mode.name().to_string(),
            r.mean_nats.to_string(),
            r.mean_bits.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
            r.nonconverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_sweep_csv(rows, file).map_err(csv_err(path))
}

/// Provenance of a sweep table: tool version, generator and the spec itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub tool: String,
    pub rng: String,
    pub spec: SweepSpec,
}

impl SweepMeta {
    pub fn new(spec: &SweepSpec) -> Self {
        SweepMeta {
            tool: TOOL_VERSION.to_string(),
            rng: RNG_NAME.to_string(),
            spec: spec.clone(),
        }
    }
}

pub const POLICY_HEADER: [&str; 13] = [
    "slot",
    "p1_mw",
    "p2_mw",
    "delta1_mj",
    "delta2_mj",
    "consumed1_mw",
    "consumed2_mw",
    "immediate1_mj",
    "immediate2_mj",
    "stored1_mj",
    "stored2_mj",
    "level1",
    "level2",
];

/// Per-slot policy table.
pub fn write_policy_csv<W: Write>(r: &SolveReport, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLICY_HEADER)?;
    for i in 0..r.policy.n_slots() {
        let mut rec = vec![(i + 1).to_string()];
        for col in [
            &r.transmit.p,
            &r.transmit.delta,
            &r.policy.consumed,
            &r.policy.immediate,
            &r.policy.stored,
            &r.levels.v,
        ] {
            rec.push(col[0][i].to_string());
            rec.push(col[1][i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_policy_csv(r: &SolveReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_policy_csv(r, file).map_err(csv_err(path))
}
