//! Scenario and sweep files (JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Capacity, ModelKind, Scenario};

/// A battery size as written in files: a number of mJ or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacityValue {
    Finite(f64),
    Named(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl From<Capacity> for CapacityValue {
    fn from(c: Capacity) -> Self {
        match c {
            Capacity::Finite(v) => CapacityValue::Finite(v),
            Capacity::Infinite => CapacityValue::Named(InfTag::Inf),
        }
    }
}

impl From<CapacityValue> for Capacity {
    fn from(c: CapacityValue) -> Self {
        match c {
            CapacityValue::Finite(v) => Capacity::Finite(v),
            CapacityValue::Named(InfTag::Inf) => Capacity::Infinite,
        }
    }
}

/// One value shared by both nodes, or one per node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    Each([T; 2]),
    Both(T),
}

impl<T: Copy> PerNode<T> {
    pub fn pair(self) -> [T; 2] {
        match self {
            PerNode::Each(v) => v,
            PerNode::Both(v) => [v, v],
        }
    }
}

fn default_slot() -> f64 {
    1.0
}

fn default_capacity() -> PerNode<CapacityValue> {
    PerNode::Both(CapacityValue::Named(InfTag::Inf))
}

fn default_gain() -> PerNode<f64> {
    PerNode::Both(-100.0)
}

fn default_noise() -> PerNode<f64> {
    PerNode::Both(1e-13)
}

/// On-disk scenario. Energies in mJ, gains in dB, noise in W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelKind,
    /// `[node 1 sequence, node 2 sequence]`.
    pub harvests: [Vec<f64>; 2],
    #[serde(default = "default_capacity")]
    pub battery_capacity: PerNode<CapacityValue>,
    pub transfer_efficiency: PerNode<f64>,
    #[serde(default = "default_gain")]
    pub channel_gain_db: PerNode<f64>,
    #[serde(default = "default_noise")]
    pub noise_power_w: PerNode<f64>,
    #[serde(default = "default_slot")]
    pub slot_seconds: f64,
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let cap = self.battery_capacity.pair();
        let sc = Scenario::new(
            self.model,
            self.harvests.clone(),
            [cap[0].into(), cap[1].into()],
            self.transfer_efficiency.pair(),
            self.channel_gain_db.pair(),
            self.noise_power_w.pair(),
        )?;
        sc.with_slot_seconds(self.slot_seconds)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(sc: &Scenario) -> Self {
        let cap = sc.capacity();
        ScenarioFile {
            model: sc.model(),
            harvests: sc.harvests().clone(),
            battery_capacity: PerNode::Each([cap[0].into(), cap[1].into()]),
            transfer_efficiency: PerNode::Each(sc.alpha()),
            channel_gain_db: PerNode::Each(sc.gain_db()),
            noise_power_w: PerNode::Each(sc.noise_w()),
            slot_seconds: sc.slot_seconds(),
        }
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::input(format!("scenario: {e}")))?;
    file.to_scenario()
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let file: ScenarioFile = read_json(path)?;
    file.to_scenario().map_err(|e| match e {
        Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let sc = parse_scenario(
            r#"{"model": "twc", "harvests": [[2, 5], [0, 4]], "transfer_efficiency": 0.5}"#,
        )
        .unwrap();
        assert_eq!(sc.slot_seconds(), 1.0);
        assert!(sc.all_infinite());
        for n in sc.effective_noise_mw() {
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inf_and_numbers_mix() {
        let sc = parse_scenario(
            r#"{"model": "mac", "harvests": [[1], [1]], "transfer_efficiency": [0.2, 0.3],
                "battery_capacity": ["inf", 4.5]}"#,
        )
        .unwrap();
        assert_eq!(sc.capacity(), [Capacity::Infinite, Capacity::Finite(4.5)]);
    }

    #[test]
    fn out_of_range_efficiency_is_named() {
        let err = parse_scenario(
            r#"{"model": "twc", "harvests": [[1], [1]], "transfer_efficiency": 1.2}"#,
        )
        .unwrap_err();
        assert!(
            err.to_string()
                .contains("transfer_efficiency must lie in [0,1]"),
            "{err}"
        );
    }

    #[test]
    fn negative_harvest_and_typos_rejected() {
        assert!(parse_scenario(
            r#"{"model": "twc", "harvests": [[-1], [1]], "transfer_efficiency": 0}"#
        )
        .is_err());
        let err = parse_scenario(r#"{"model": "twc", "harvests": [[1], [1]], "transfer_eff": 0}"#)
            .unwrap_err();
        assert!(err.to_string().contains("transfer_eff"), "{err}");
    }

    #[test]
    fn round_trips_through_file_form() {
        let sc = parse_scenario(
            r#"{"model": "thc", "harvests": [[1, 0.5], [0, 3]], "transfer_efficiency": [0.5, 0],
                "battery_capacity": 7, "channel_gain_db": [-100, -103], "slot_seconds": 0.5}"#,
        )
        .unwrap();
        let back = ScenarioFile::from(&sc).to_scenario().unwrap();
        assert_eq!(back, sc);
    }
}
