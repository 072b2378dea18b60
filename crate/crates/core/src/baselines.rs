//! Reference policies that ignore the future: each node spends its average
//! harvest rate whenever it can.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{recover_transmit_powers, DecomposedPolicy, Scenario, TransferPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ConstantPowerNoCoop,
    ConstantPowerWithCoop,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 2] = [
        BaselineKind::ConstantPowerNoCoop,
        BaselineKind::ConstantPowerWithCoop,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            BaselineKind::ConstantPowerNoCoop => "const_none",
            BaselineKind::ConstantPowerWithCoop => "const_coop",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.short_name() == s)
    }
}

/// Consumed power `min(stored + harvest, mean harvest)` per slot, with the
/// closed-form in-slot transfers on top when cooperating. The average is
/// the empirical mean of the node's own harvest sequence.
pub fn constant_power(sc: &Scenario, kind: BaselineKind) -> Result<TransferPolicy> {
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let e = sc.harvests();
    let cap = sc.capacity();
    let mut dp = DecomposedPolicy::zeros(n);
    for k in 0..2 {
        let mean = e[k].iter().sum::<f64>() / n as f64;
        let mut stored = 0.0f64;
        for i in 0..n {
            let avail = stored + e[k][i];
            let spend = avail.min(mean);
            dp.consumed[k][i] = spend / t;
            stored = cap[k].clamp(avail - spend);
        }
    }
    if kind == BaselineKind::ConstantPowerWithCoop {
        let m = sc.slot_model();
        for i in 0..n {
            let tr = m.transfer([dp.consumed[0][i], dp.consumed[1][i]]);
            dp.immediate[0][i] = tr.delta[0];
            dp.immediate[1][i] = tr.delta[1];
        }
    }
    recover_transmit_powers(&dp, sc)
}
