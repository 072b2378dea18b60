//! Python bindings for the energy-cooperation solvers.

use ehcoop::baselines::{constant_power, BaselineKind};
use ehcoop::harness::{
    parse_scenario, run_sweep as run_sweep_core, ReportFile, ScenarioFile, SweepSpec,
};
use ehcoop::model::{self, Capacity, Cooperation, ModelKind, TransferPolicy};
use ehcoop::oracle::{dp_solve as dp_solve_core, DpConfig};
use ehcoop::waterfill::{self, SolveReport};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(ehcoop_py, EhcoopError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    EhcoopError::new_err(e.to_string())
}

fn parse_model(s: &str) -> PyResult<ModelKind> {
    match s.to_ascii_lowercase().as_str() {
        "twc" => Ok(ModelKind::Twc),
        "thc" => Ok(ModelKind::Thc),
        "mac" => Ok(ModelKind::Mac),
        _ => Err(err(format!(
            "unknown model {s:?}; expected twc, thc or mac"
        ))),
    }
}

fn parse_mode(s: &str) -> PyResult<Cooperation> {
    Cooperation::from_short_name(s).ok_or_else(|| {
        err(format!(
            "unknown mode {s:?}; expected bi, uni12, uni21 or none"
        ))
    })
}

fn capacity(c: f64) -> Capacity {
    if c == f64::INFINITY {
        Capacity::Infinite
    } else {
        Capacity::Finite(c)
    }
}

fn pair(v: &[Vec<f64>; 2]) -> (Vec<f64>, Vec<f64>) {
    (v[0].clone(), v[1].clone())
}

fn policy(p: (Vec<f64>, Vec<f64>), delta: (Vec<f64>, Vec<f64>)) -> TransferPolicy {
    TransferPolicy {
        p: [p.0, p.1],
        delta: [delta.0, delta.1],
    }
}

/// A two-node scenario. Energies in mJ, gains in dB, noise in W.
/// Pass `float("inf")` for an unbounded battery.
#[pyclass(module = "ehcoop_py", frozen)]
struct Scenario {
    inner: model::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (model, harvests, transfer_efficiency, battery_capacity = (f64::INFINITY, f64::INFINITY), channel_gain_db = (-100.0, -100.0), noise_power_w = (1e-13, 1e-13), slot_seconds = 1.0))]
    fn new(
        model: &str,
        harvests: (Vec<f64>, Vec<f64>),
        transfer_efficiency: (f64, f64),
        battery_capacity: (f64, f64),
        channel_gain_db: (f64, f64),
        noise_power_w: (f64, f64),
        slot_seconds: f64,
    ) -> PyResult<Self> {
        let inner = model::Scenario::new(
            parse_model(model)?,
            [harvests.0, harvests.1],
            [capacity(battery_capacity.0), capacity(battery_capacity.1)],
            [transfer_efficiency.0, transfer_efficiency.1],
            [channel_gain_db.0, channel_gain_db.1],
            [noise_power_w.0, noise_power_w.1],
        )
        .and_then(|s| s.with_slot_seconds(slot_seconds))
        .map_err(err)?;
        Ok(Scenario { inner })
    }

    /// Build directly from effective noise levels in mW.
    #[staticmethod]
    #[pyo3(signature = (model, harvests, transfer_efficiency, effective_noise_mw = (1.0, 1.0)))]
    fn normalized(
        model: &str,
        harvests: (Vec<f64>, Vec<f64>),
        transfer_efficiency: (f64, f64),
        effective_noise_mw: (f64, f64),
    ) -> PyResult<Self> {
        let inner = model::Scenario::normalized(
            parse_model(model)?,
            [harvests.0, harvests.1],
            [transfer_efficiency.0, transfer_efficiency.1],
            [effective_noise_mw.0, effective_noise_mw.1],
        )
        .map_err(err)?;
        Ok(Scenario { inner })
    }

    /// Parse the JSON scenario format used by the command line tool.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_scenario(text)
            .map(|inner| Scenario { inner })
            .map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&ScenarioFile::from(&self.inner)).map_err(err)
    }

    #[getter]
    fn model(&self) -> String {
        self.inner.model().to_string()
    }

    #[getter]
    fn n_slots(&self) -> usize {
        self.inner.n_slots()
    }

    #[getter]
    fn harvests(&self) -> (Vec<f64>, Vec<f64>) {
        pair(self.inner.harvests())
    }

    #[getter]
    fn transfer_efficiency(&self) -> (f64, f64) {
        let a = self.inner.alpha();
        (a[0], a[1])
    }

    #[getter]
    fn battery_capacity(&self) -> (f64, f64) {
        let c = self
            .inner
            .capacity()
            .map(|c| c.finite().unwrap_or(f64::INFINITY));
        (c[0], c[1])
    }

    #[getter]
    fn effective_noise_mw(&self) -> (f64, f64) {
        let n = self.inner.effective_noise_mw();
        (n[0], n[1])
    }

    #[getter]
    fn slot_seconds(&self) -> f64 {
        self.inner.slot_seconds()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(model={:?}, n_slots={})",
            self.model(),
            self.n_slots()
        )
    }
}

/// Optimal policy with its diagnostics.
#[pyclass(module = "ehcoop_py", frozen)]
struct SolveResult {
    scenario: model::Scenario,
    report: SolveReport,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn objective_nats(&self) -> f64 {
        self.report.objective_nats
    }

    #[getter]
    fn objective_bits(&self) -> f64 {
        self.report.objective_bits()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.report.bcd_iterations
    }

    #[getter]
    fn level_residual(&self) -> f64 {
        self.report.level_residual
    }

    /// Transmit powers per node (mW).
    #[getter]
    fn transmit_power(&self) -> (Vec<f64>, Vec<f64>) {
        pair(&self.report.transmit.p)
    }

    /// Transferred energy per node (mJ).
    #[getter]
    fn transfer(&self) -> (Vec<f64>, Vec<f64>) {
        pair(&self.report.transmit.delta)
    }

    #[getter]
    fn consumed_power(&self) -> (Vec<f64>, Vec<f64>) {
        pair(&self.report.policy.consumed)
    }

    #[getter]
    fn stored_transfer(&self) -> (Vec<f64>, Vec<f64>) {
        pair(&self.report.policy.stored)
    }

    /// Water levels; `inf` where extra power is useless.
    #[getter]
    fn water_levels(&self) -> (Vec<f64>, Vec<f64>) {
        pair(&self.report.levels.v)
    }

    #[getter]
    fn regimes(&self) -> Vec<String> {
        self.report
            .regimes
            .iter()
            .map(|r| format!("{r:?}"))
            .collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.report.warnings.clone()
    }

    /// Full JSON report, as written by the command line tool.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&ReportFile::new(&self.scenario, &self.report)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(objective_nats={}, converged={})",
            self.report.objective_nats, self.report.converged
        )
    }
}

/// Maximize the sum-throughput under the given cooperation mode.
#[pyfunction]
#[pyo3(signature = (scenario, mode = "bi"))]
fn solve(py: Python<'_>, scenario: &Scenario, mode: &str) -> PyResult<SolveResult> {
    let mode = parse_mode(mode)?;
    let sc = scenario.inner.clone();
    let report = py.detach(|| waterfill::solve(&sc, mode)).map_err(err)?;
    Ok(SolveResult {
        scenario: sc,
        report,
    })
}

/// Optimal in-slot transfer at consumed powers `(p1, p2)`.
/// Returns `(delta1, delta2, rate_nats)`.
#[pyfunction]
fn slot_transfer(scenario: &Scenario, p1: f64, p2: f64) -> PyResult<(f64, f64, f64)> {
    let t = match scenario.inner.model() {
        ModelKind::Twc => ehcoop::transfer::twc_transfer(p1, p2, &scenario.inner),
        ModelKind::Thc => ehcoop::transfer::thc_transfer(p1, p2, &scenario.inner),
        ModelKind::Mac => ehcoop::transfer::mac_transfer(p1, p2, &scenario.inner),
    }
    .map_err(err)?;
    Ok((t.delta[0], t.delta[1], t.rate_nats))
}

/// Water level of node `k` (1 or 2) at consumed powers `(p1, p2)`.
#[pyfunction]
fn water_level(scenario: &Scenario, k: usize, p1: f64, p2: f64) -> PyResult<f64> {
    if !(1..=2).contains(&k) {
        return Err(err(format!("node must be 1 or 2, got {k}")));
    }
    ehcoop::transfer::water_level(scenario.inner.model(), k - 1, p1, p2, &scenario.inner)
        .map_err(err)
}

/// Throughput of an explicit policy, after checking that it is feasible.
#[pyfunction]
fn evaluate(
    scenario: &Scenario,
    transmit_power: (Vec<f64>, Vec<f64>),
    transfer: (Vec<f64>, Vec<f64>),
) -> PyResult<f64> {
    let pol = policy(transmit_power, transfer);
    let rep = model::check_feasible(&pol, &scenario.inner);
    if !rep.feasible {
        return Err(err(rep));
    }
    model::objective(&pol, &scenario.inner).map_err(err)
}

/// Brute-force dynamic program over quantized battery states.
/// Returns `(objective_nats, transmit_power, transfer)`.
#[pyfunction]
#[pyo3(signature = (scenario, energy_quantum_mj = None, grid_points = 40, max_states = 250_000))]
fn dp_solve(
    py: Python<'_>,
    scenario: &Scenario,
    energy_quantum_mj: Option<f64>,
    grid_points: usize,
    max_states: u64,
) -> PyResult<(f64, (Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    let cfg = DpConfig {
        energy_quantum_mj,
        grid_points,
        max_states,
    };
    let sc = &scenario.inner;
    let sol = py.detach(|| dp_solve_core(sc, &cfg)).map_err(err)?;
    Ok((
        sol.objective_lower_bound,
        pair(&sol.policy.p),
        pair(&sol.policy.delta),
    ))
}

/// Constant-power reference policy (`const_none` or `const_coop`).
/// Returns `(objective_nats, transmit_power, transfer)`.
#[pyfunction]
fn baseline(
    scenario: &Scenario,
    kind: &str,
) -> PyResult<(f64, (Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    let kind = BaselineKind::from_short_name(kind).ok_or_else(|| {
        err(format!(
            "unknown baseline {kind:?}; expected const_none or const_coop"
        ))
    })?;
    let pol = constant_power(&scenario.inner, kind).map_err(err)?;
    let value = model::objective(&pol, &scenario.inner).map_err(err)?;
    Ok((value, pair(&pol.p), pair(&pol.delta)))
}

/// Run a sweep described by the JSON spec and return the CSV rows as
/// `(swept_value, mode, mean_nats, mean_bits, trials, seed, nonconverged)`.
#[pyfunction]
fn run_sweep(
    py: Python<'_>,
    spec_json: &str,
) -> PyResult<Vec<(f64, String, f64, f64, usize, u64, usize)>> {
    let spec: SweepSpec = serde_json::from_str(spec_json).map_err(err)?;
    spec.validate().map_err(err)?;
    let rows = py.detach(|| run_sweep_core(&spec)).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r.swept_value,
                r.mode.name().to_owned(),
                r.mean_nats,
                r.mean_bits,
                r.trials,
                r.seed,
                r.nonconverged,
            )
        })
        .collect())
}

#[pymodule]
fn ehcoop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EhcoopError", m.py().get_type::<EhcoopError>())?;
    m.add_class::<Scenario>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(slot_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(water_level, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(dp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
