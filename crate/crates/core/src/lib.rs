//! Offline throughput maximization for energy-harvesting two-node channels
//! with bidirectional energy cooperation.
//!
//! Supports the two-way channel, the two-hop relay channel and the two-user
//! multiple access channel, with infinite or finite batteries.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod transfer;
pub mod waterfill;

pub use error::{Error, Result};
pub use model::{
    BatteryTrace, Capacity, Cooperation, DecomposedPolicy, FeasibilityReport, ModelKind, Scenario,
    TransferPolicy,
};
pub use transfer::{Regime, SlotModel, SlotTransfer, WaterLevels};
