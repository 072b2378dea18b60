//! Seeded harvest generation and parameter sweeps.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{constant_power, BaselineKind};
use crate::error::{Error, Result};
use crate::model::{nats_to_bits, objective, Cooperation, Scenario};
use crate::waterfill::solve;

use super::config::{read_json, ScenarioFile};

/// Name of the generator behind [`generate_harvests`] and sweeps.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64, stream = trial index)";

fn draws(rng: &mut ChaCha20Rng, peak: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * peak).collect()
}

fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws on `[0, peak]` mJ.
pub fn generate_harvests(peak_mj: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(peak_mj >= 0.0) || !peak_mj.is_finite() {
        return Err(Error::input(format!(
            "peak harvest {peak_mj} must be finite and non-negative"
        )));
    }
    Ok(draws(&mut stream(seed, 0), peak_mj, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    PeakHarvestNode1,
    Alpha1,
}

/// A column of a sweep: an optimal solver under a cooperation mode, or a
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMode {
    Optimal(Cooperation),
    Baseline(BaselineKind),
}

impl SweepMode {
    pub const ALL: [SweepMode; 6] = [
        SweepMode::Optimal(Cooperation::Bidirectional),
        SweepMode::Optimal(Cooperation::Uni12),
        SweepMode::Optimal(Cooperation::Uni21),
        SweepMode::Optimal(Cooperation::NoCooperation),
        SweepMode::Baseline(BaselineKind::ConstantPowerNoCoop),
        SweepMode::Baseline(BaselineKind::ConstantPowerWithCoop),
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Optimal(c) => c.short_name(),
            SweepMode::Baseline(b) => b.short_name(),
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Objective (nats) and whether the solver reported convergence.
    pub fn evaluate(self, sc: &Scenario) -> Result<(f64, bool)> {
        match self {
            SweepMode::Optimal(c) => {
                let r = solve(sc, c)?;
                Ok((r.objective_nats, r.converged))
            }
            SweepMode::Baseline(b) => Ok((objective(&constant_power(sc, b)?, sc)?, true)),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for SweepMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SweepMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SweepMode::from_name(&s).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "unknown mode {s:?}; expected one of bi, uni12, uni21, none, const_none, const_coop"
            ))
        })
    }
}

fn default_trials() -> usize {
    50
}

fn default_modes() -> Vec<SweepMode> {
    SweepMode::ALL.to_vec()
}

/// A sweep over one parameter. Harvests are redrawn for every trial; the
/// base scenario supplies everything else, including the horizon length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioFile,
    pub swept_parameter: SweptParameter,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    #[serde(default = "default_trials")]
    pub trials_per_point: usize,
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<SweepMode>,
    /// Peak harvest per node (mJ). Node 1's entry is replaced by the swept
    /// value in a peak sweep.
    pub peak_harvest_mj: [f64; 2],
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo <= self.hi) {
            return Err(Error::input(format!(
                "sweep range lo {} exceeds hi {}",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0) {
            return Err(Error::input(format!(
                "sweep step {} must be positive",
                self.step
            )));
        }
        if self.trials_per_point == 0 {
            return Err(Error::input("trials_per_point must be at least 1"));
        }
        if self.peak_harvest_mj.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::input("peak_harvest_mj must be non-negative"));
        }
        self.base.to_scenario().map(|_| ())
    }

    /// Swept values from `lo` to `hi` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|m| self.lo + m as f64 * self.step).collect()
    }

    /// Scenario for one swept value and trial. Trials with the same index
    /// share their uniform draws across swept values.
    pub fn scenario(&self, value: f64, trial: usize) -> Result<Scenario> {
        let base = self.base.to_scenario()?;
        let n = base.n_slots();
        let mut peak = self.peak_harvest_mj;
        let mut alpha = base.alpha();
        match self.swept_parameter {
            SweptParameter::PeakHarvestNode1 => peak[0] = value,
            SweptParameter::Alpha1 => alpha[0] = value,
        }
        if !(peak[0] >= 0.0) {
            return Err(Error::input(format!(
                "peak harvest {} must be non-negative",
                peak[0]
            )));
        }
        let mut rng = stream(self.seed, trial as u64);
        let e1 = draws(&mut rng, peak[0], n);
        let e2 = draws(&mut rng, peak[1], n);
        base.with_harvests([e1, e2])?.with_alpha(alpha)
    }
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let spec: SweepSpec = read_json(path.as_ref())?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub mode: SweepMode,
    pub mean_nats: f64,
    pub mean_bits: f64,
    pub trials: usize,
    pub seed: u64,
    /// Trials whose solver did not meet its convergence tolerance.
    pub nonconverged: usize,
}

/// Run every trial of every point (in parallel) and average per mode.
/// Output order and values do not depend on the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points();
    let trials = spec.trials_per_point;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<Vec<(f64, bool)>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let sc = spec.scenario(points[p], t)?;
            spec.modes.iter().map(|m| m.evaluate(&sc)).collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(points.len() * spec.modes.len());
    for (p, &value) in points.iter().enumerate() {
        for (c, &mode) in spec.modes.iter().enumerate() {
            let mut sum = 0.0;
            let mut bad = 0;
            for t in 0..trials {
                let (obj, ok) = results[p * trials + t][c];
                sum += obj;
                bad += usize::from(!ok);
            }
            let mean = sum / trials as f64;
            rows.push(SweepRow {
                swept_value: value,
                mode,
                mean_nats: mean,
                mean_bits: nats_to_bits(mean),
                trials,
                seed: spec.seed,
                nonconverged: bad,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PerNode;
    use crate::model::ModelKind;

    fn spec(peak: f64) -> SweepSpec {
        SweepSpec {
            base: ScenarioFile {
                model: ModelKind::Twc,
                harvests: [vec![0.0; 5], vec![0.0; 5]],
                battery_capacity: PerNode::Both(super::super::config::CapacityValue::Named(
                    super::super::config::InfTag::Inf,
                )),
                transfer_efficiency: PerNode::Both(0.5),
                channel_gain_db: PerNode::Both(-100.0),
                noise_power_w: PerNode::Both(1e-13),
                slot_seconds: 1.0,
            },
            swept_parameter: SweptParameter::PeakHarvestNode1,
            lo: peak,
            hi: peak,
            step: 1.0,
            trials_per_point: 1,
            seed: 3,
            modes: SweepMode::ALL.to_vec(),
            peak_harvest_mj: [peak, peak],
        }
    }

    #[test]
    fn generator_is_reproducible() {
        assert_eq!(generate_harvests(0.0, 4, 1).unwrap(), vec![0.0; 4]);
        assert_eq!(
            generate_harvests(3.0, 8, 42).unwrap(),
            generate_harvests(3.0, 8, 42).unwrap()
        );
        assert_ne!(
            generate_harvests(3.0, 8, 42).unwrap(),
            generate_harvests(3.0, 8, 43).unwrap()
        );
        assert!(generate_harvests(-1.0, 2, 0).is_err());
    }

    #[test]
    fn zero_peak_gives_zero_rows() {
        let rows = run_sweep(&spec(0.0)).unwrap();
        assert_eq!(rows.len(), SweepMode::ALL.len());
        assert!(rows.iter().all(|r| r.mean_nats == 0.0 && r.trials == 1));
    }

    #[test]
    fn points_include_both_ends() {
        let mut s = spec(1.0);
        s.lo = 0.0;
        s.hi = 1.0;
        s.step = 0.1;
        let pts = s.points();
        assert_eq!(pts.len(), 11);
        assert!((pts[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in SweepMode::ALL {
            assert_eq!(SweepMode::from_name(m.name()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<SweepMode>(&json).unwrap(), m);
        }
    }
}
