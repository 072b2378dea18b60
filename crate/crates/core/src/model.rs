//! Scenario description, policy containers and the battery/causality
//! bookkeeping shared by every solver.
//!
//! Units: energies in millijoules, powers in milliwatts, rates in nats per
//! slot. A slot lasts `slot_seconds` (1 s unless configured), so a transmit
//! power `p` drains `p * slot_seconds` mJ from the battery.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::SlotModel;

/// Absolute tolerance on battery states when judging causality (mJ).
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Tolerance on the sign of individual policy entries.
pub const ENTRY_TOL: f64 = 1e-12;

const REFERENCE_NOISE_W: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Twc,
    Thc,
    Mac,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Twc => "twc",
            ModelKind::Thc => "thc",
            ModelKind::Mac => "mac",
        })
    }
}

/// Battery size of a node. `Infinite` is a sentinel, never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn is_infinite(self) -> bool {
        matches!(self, Capacity::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Capacity::Finite(c) => Some(c),
            Capacity::Infinite => None,
        }
    }

    /// Clamp a battery level to this capacity.
    pub fn clamp(self, level: f64) -> f64 {
        match self {
            Capacity::Finite(c) => level.min(c),
            Capacity::Infinite => level,
        }
    }
}

/// Which transfer directions a solver may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cooperation {
    Bidirectional,
    #[serde(rename = "uni_1_to_2")]
    Uni12,
    #[serde(rename = "uni_2_to_1")]
    Uni21,
    NoCooperation,
}

impl Cooperation {
    pub const ALL: [Cooperation; 4] = [
        Cooperation::Bidirectional,
        Cooperation::Uni12,
        Cooperation::Uni21,
        Cooperation::NoCooperation,
    ];

    /// Short CLI name (`bi`, `uni12`, `uni21`, `none`).
    pub fn short_name(self) -> &'static str {
        match self {
            Cooperation::Bidirectional => "bi",
            Cooperation::Uni12 => "uni12",
            Cooperation::Uni21 => "uni21",
            Cooperation::NoCooperation => "none",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.short_name() == s)
    }

    /// Whether node `k` (0-based) may send energy.
    pub fn allows_from(self, k: usize) -> bool {
        match self {
            Cooperation::Bidirectional => true,
            Cooperation::Uni12 => k == 0,
            Cooperation::Uni21 => k == 1,
            Cooperation::NoCooperation => false,
        }
    }
}

impl fmt::Display for Cooperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// A two-node energy-harvesting scenario.
///
/// Node indices are 0-based in code (node 1 of the model is index 0).
/// Construction validates all fields and folds channel gain and noise into
/// the per-link effective noise `n_k = sigma_j^2 / h_k`, kept in milliwatts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    model: ModelKind,
    slot_seconds: f64,
    harvests: [Vec<f64>; 2],
    capacity: [Capacity; 2],
    alpha: [f64; 2],
    gain_db: [f64; 2],
    noise_w: [f64; 2],
    effective_noise_mw: [f64; 2],
}

impl Scenario {
    pub fn new(
        model: ModelKind,
        harvests: [Vec<f64>; 2],
        capacity: [Capacity; 2],
        alpha: [f64; 2],
        gain_db: [f64; 2],
        noise_w: [f64; 2],
    ) -> Result<Self> {
        let n = harvests[0].len();
        if n == 0 {
            return Err(Error::input("harvests must contain at least one slot"));
        }
        if harvests[1].len() != n {
            return Err(Error::Dimension(format!(
                "harvest sequences have lengths {} and {}",
                n,
                harvests[1].len()
            )));
        }
        for (k, seq) in harvests.iter().enumerate() {
            if let Some((i, e)) = seq
                .iter()
                .enumerate()
                .find(|(_, e)| !(**e >= 0.0) || !e.is_finite())
            {
                return Err(Error::input(format!(
                    "harvests[{k}][{i}] = {e}: harvests must be finite and non-negative"
                )));
            }
        }
        for (k, c) in capacity.iter().enumerate() {
            if let Capacity::Finite(c) = c {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::input(format!(
                        "battery_capacity[{k}] = {c}: capacity must be positive"
                    )));
                }
            }
        }
        for (k, a) in alpha.iter().enumerate() {
            if !(0.0..=1.0).contains(a) {
                return Err(Error::input(format!(
                    "transfer_efficiency[{k}] = {a}: transfer_efficiency must lie in [0,1]"
                )));
            }
        }
        for (k, g) in gain_db.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::input(format!("channel_gain_db[{k}] must be finite")));
            }
        }
        for (k, s) in noise_w.iter().enumerate() {
            if !(*s > 0.0) || !s.is_finite() {
                return Err(Error::input(format!(
                    "noise_power_w[{k}] = {s}: noise power must be positive"
                )));
            }
        }
        let h = [db_to_linear(gain_db[0]), db_to_linear(gain_db[1])];
        let effective_noise_mw = [noise_w[1] / h[0] * 1e3, noise_w[0] / h[1] * 1e3];
        Ok(Scenario {
            model,
            slot_seconds: 1.0,
            harvests,
            capacity,
            alpha,
            gain_db,
            noise_w,
            effective_noise_mw,
        })
    }

    /// Build a scenario directly from effective noise levels (mW).
    ///
    /// Noise powers are fixed at 1e-13 W and the gains are chosen so that
    /// `sigma_j^2 / h_k` equals the requested value.
    pub fn normalized(
        model: ModelKind,
        harvests: [Vec<f64>; 2],
        alpha: [f64; 2],
        effective_noise_mw: [f64; 2],
    ) -> Result<Self> {
        for (k, n) in effective_noise_mw.iter().enumerate() {
            if !(*n > 0.0) || !n.is_finite() {
                return Err(Error::input(format!(
                    "effective noise [{k}] must be positive"
                )));
            }
        }
        let gain_db = [
            linear_to_db(REFERENCE_NOISE_W / (effective_noise_mw[0] * 1e-3)),
            linear_to_db(REFERENCE_NOISE_W / (effective_noise_mw[1] * 1e-3)),
        ];
        let mut sc = Scenario::new(
            model,
            harvests,
            [Capacity::Infinite; 2],
            alpha,
            gain_db,
            [REFERENCE_NOISE_W; 2],
        )?;
        sc.effective_noise_mw = effective_noise_mw;
        Ok(sc)
    }

    pub fn with_capacity(mut self, capacity: [Capacity; 2]) -> Result<Self> {
        for c in capacity.iter().filter_map(|c| c.finite()) {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::input("battery capacity must be positive"));
            }
        }
        self.capacity = capacity;
        Ok(self)
    }

    pub fn with_slot_seconds(mut self, slot_seconds: f64) -> Result<Self> {
        if !(slot_seconds > 0.0) || !slot_seconds.is_finite() {
            return Err(Error::input("slot_seconds must be positive"));
        }
        self.slot_seconds = slot_seconds;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: [f64; 2]) -> Result<Self> {
        for a in alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::input("transfer_efficiency must lie in [0,1]"));
            }
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_harvests(mut self, harvests: [Vec<f64>; 2]) -> Result<Self> {
        let probe = Scenario::new(
            self.model,
            harvests,
            self.capacity,
            self.alpha,
            self.gain_db,
            self.noise_w,
        )?;
        self.harvests = probe.harvests;
        Ok(self)
    }

    /// Copy of the scenario with the transfer efficiency of every disallowed
    /// direction forced to zero.
    pub fn restricted(&self, mode: Cooperation) -> Scenario {
        let mut sc = self.clone();
        for k in 0..2 {
            if !mode.allows_from(k) {
                sc.alpha[k] = 0.0;
            }
        }
        sc
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }
    pub fn n_slots(&self) -> usize {
        self.harvests[0].len()
    }
    pub fn slot_seconds(&self) -> f64 {
        self.slot_seconds
    }
    pub fn harvests(&self) -> &[Vec<f64>; 2] {
        &self.harvests
    }
    pub fn capacity(&self) -> [Capacity; 2] {
        self.capacity
    }
    pub fn alpha(&self) -> [f64; 2] {
        self.alpha
    }
    pub fn gain_db(&self) -> [f64; 2] {
        self.gain_db
    }
    pub fn noise_w(&self) -> [f64; 2] {
        self.noise_w
    }
    /// `n_k = sigma_j^2 / h_k` in milliwatts.
    pub fn effective_noise_mw(&self) -> [f64; 2] {
        self.effective_noise_mw
    }
    pub fn all_infinite(&self) -> bool {
        self.capacity.iter().all(|c| c.is_infinite())
    }

    pub fn slot_model(&self) -> SlotModel {
        SlotModel::new(
            self.model,
            self.effective_noise_mw,
            self.alpha,
            self.slot_seconds,
        )
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Transmit powers (mW) and raw energy transfers (mJ), indexed `[node][slot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPolicy {
    pub p: [Vec<f64>; 2],
    pub delta: [Vec<f64>; 2],
}

impl TransferPolicy {
    pub fn zeros(n: usize) -> Self {
        TransferPolicy {
            p: [vec![0.0; n], vec![0.0; n]],
            delta: [vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn n_slots(&self) -> usize {
        self.p[0].len()
    }

    fn check_dims(&self, sc: &Scenario) -> Result<()> {
        let n = sc.n_slots();
        for k in 0..2 {
            if self.p[k].len() != n || self.delta[k].len() != n {
                return Err(Error::Dimension(format!(
                    "policy has {}/{} slots for node {}, scenario has {n}",
                    self.p[k].len(),
                    self.delta[k].len(),
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Consumed powers (mW) with immediate (`gamma`) and stored (`epsilon`)
/// transfer components (mJ), indexed `[node][slot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedPolicy {
    pub consumed: [Vec<f64>; 2],
    pub immediate: [Vec<f64>; 2],
    pub stored: [Vec<f64>; 2],
}

impl DecomposedPolicy {
    pub fn zeros(n: usize) -> Self {
        DecomposedPolicy {
            consumed: [vec![0.0; n], vec![0.0; n]],
            immediate: [vec![0.0; n], vec![0.0; n]],
            stored: [vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn n_slots(&self) -> usize {
        self.consumed[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryTrace {
    /// End-of-slot stored energy `S[k][i]` (mJ).
    pub state: [Vec<f64>; 2],
    /// Energy discarded by the capacity clip in each slot (mJ).
    pub overflow_loss: [Vec<f64>; 2],
}

impl BatteryTrace {
    pub fn total_overflow(&self) -> f64 {
        self.overflow_loss.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Causality,
    Negativity,
    /// Stored energy above capacity. The clipped recursion never produces
    /// this; it is reported for externally supplied traces.
    Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// 0-based node index.
    pub node: usize,
    /// 0-based slot index.
    pub slot: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub first_violation: Option<Violation>,
    /// Smallest end-of-slot battery level over all nodes and slots (mJ).
    pub worst_causality_slack: f64,
    /// Total energy lost to battery overflow. Legal, but never optimal.
    pub overflow: f64,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.first_violation {
            Some(v) => write!(
                f,
                "{:?} violation at node {}, slot {} (worst slack {:.3e} mJ)",
                v.kind,
                v.node + 1,
                v.slot + 1,
                self.worst_causality_slack
            ),
            None => write!(
                f,
                "feasible (worst slack {:.3e} mJ)",
                self.worst_causality_slack
            ),
        }
    }
}

/// Run the clipped battery recursion from empty batteries.
pub fn battery_trace(policy: &TransferPolicy, sc: &Scenario) -> Result<BatteryTrace> {
    policy.check_dims(sc)?;
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let cap = sc.capacity();
    let mut state = [vec![0.0; n], vec![0.0; n]];
    let mut overflow_loss = [vec![0.0; n], vec![0.0; n]];
    let mut prev = [0.0f64; 2];
    for i in 0..n {
        for k in 0..2 {
            let j = 1 - k;
            let raw = prev[k] + sc.harvests[k][i] - policy.p[k][i] * t - policy.delta[k][i]
                + alpha[j] * policy.delta[j][i];
            let clipped = cap[k].clamp(raw);
            overflow_loss[k][i] = raw - clipped;
            state[k][i] = clipped;
        }
        prev = [state[0][i], state[1][i]];
    }
    Ok(BatteryTrace {
        state,
        overflow_loss,
    })
}

/// Energy-causality and sign check. Never fails; dimension errors are
/// reported as a negativity violation at slot 0.
pub fn check_feasible(policy: &TransferPolicy, sc: &Scenario) -> FeasibilityReport {
    let trace = match battery_trace(policy, sc) {
        Ok(t) => t,
        Err(_) => {
            return FeasibilityReport {
                feasible: false,
                first_violation: Some(Violation {
                    node: 0,
                    slot: 0,
                    kind: ViolationKind::Negativity,
                }),
                worst_causality_slack: f64::NEG_INFINITY,
                overflow: 0.0,
            }
        }
    };
    let n = sc.n_slots();
    let mut first: Option<Violation> = None;
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for k in 0..2 {
            let s = trace.state[k][i];
            worst = worst.min(s);
            if first.is_some() {
                continue;
            }
            if policy.p[k][i] < -ENTRY_TOL || policy.delta[k][i] < -ENTRY_TOL {
                first = Some(Violation {
                    node: k,
                    slot: i,
                    kind: ViolationKind::Negativity,
                });
            } else if s < -FEASIBILITY_TOL {
                first = Some(Violation {
                    node: k,
                    slot: i,
                    kind: ViolationKind::Causality,
                });
            }
        }
    }
    FeasibilityReport {
        feasible: first.is_none(),
        first_violation: first,
        worst_causality_slack: worst,
        overflow: trace.total_overflow(),
    }
}

/// Instantaneous sum-rate of the channel in nats per slot, powers in mW.
pub fn rate(model: ModelKind, p1: f64, p2: f64, sc: &Scenario) -> Result<f64> {
    if !(p1 >= 0.0) || !(p2 >= 0.0) {
        return Err(Error::input(format!(
            "negative transmit power ({p1}, {p2})"
        )));
    }
    let mut m = sc.slot_model();
    m.kind = model;
    Ok(m.channel_rate(p1, p2))
}

/// Total throughput of a feasible policy, in nats.
pub fn objective(policy: &TransferPolicy, sc: &Scenario) -> Result<f64> {
    let report = check_feasible(policy, sc);
    if !report.feasible {
        return Err(Error::Infeasible(report));
    }
    let m = sc.slot_model();
    Ok((0..sc.n_slots())
        .map(|i| m.channel_rate(policy.p[0][i].max(0.0), policy.p[1][i].max(0.0)))
        .sum())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Transmit powers from consumed powers: `p_k = pbar_k - gamma_k + alpha_j gamma_j`
/// (energies divided by the slot length), and `delta = gamma + epsilon`.
pub fn recover_transmit_powers(dp: &DecomposedPolicy, sc: &Scenario) -> Result<TransferPolicy> {
    let n = sc.n_slots();
    for k in 0..2 {
        if dp.consumed[k].len() != n || dp.immediate[k].len() != n || dp.stored[k].len() != n {
            return Err(Error::Dimension(format!(
                "decomposed policy does not have {n} slots for node {}",
                k + 1
            )));
        }
    }
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let mut out = TransferPolicy::zeros(n);
    for i in 0..n {
        for k in 0..2 {
            let j = 1 - k;
            let gk = dp.immediate[k][i];
            let gj = dp.immediate[j][i];
            let eps = dp.stored[k][i];
            if gk < -ENTRY_TOL || eps < -ENTRY_TOL || dp.consumed[k][i] < -ENTRY_TOL {
                return Err(Error::Invariant(format!(
                    "negative component at node {}, slot {}",
                    k + 1,
                    i + 1
                )));
            }
            let p = dp.consumed[k][i] - (gk - alpha[j] * gj) / t;
            let scale = dp.consumed[k][i].abs().max(1.0);
            if p < -ENTRY_TOL * scale {
                return Err(Error::Invariant(format!(
                    "recovered transmit power {p:.3e} mW is negative at node {}, slot {}",
                    k + 1,
                    i + 1
                )));
            }
            out.p[k][i] = p.max(0.0);
            out.delta[k][i] = gk.max(0.0) + eps.max(0.0);
        }
    }
    Ok(out)
}

/// Procrastination: every received transfer is spent on transmission in the
/// same slot, `p_k - alpha_j delta_j >= 0`.
pub fn check_procrastinating(policy: &TransferPolicy, sc: &Scenario) -> bool {
    if policy.check_dims(sc).is_err() {
        return false;
    }
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    (0..sc.n_slots()).all(|i| {
        (0..2).all(|k| {
            let j = 1 - k;
            policy.p[k][i] * t - alpha[j] * policy.delta[j][i] >= -FEASIBILITY_TOL
        })
    })
}

/// Partial procrastination: immediate transfers are spent at once, never flow
/// both ways in a slot, and stored transfers leave only from a full battery.
pub fn check_partially_procrastinating(dp: &DecomposedPolicy, sc: &Scenario) -> bool {
    let Ok(policy) = recover_transmit_powers(dp, sc) else {
        return false;
    };
    let Ok(trace) = battery_trace(&policy, sc) else {
        return false;
    };
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let cap = sc.capacity();
    for i in 0..sc.n_slots() {
        if dp.immediate[0][i] > FEASIBILITY_TOL && dp.immediate[1][i] > FEASIBILITY_TOL {
            return false;
        }
        for k in 0..2 {
            let j = 1 - k;
            if policy.p[k][i] * t - alpha[j] * dp.immediate[j][i] < -FEASIBILITY_TOL {
                return false;
            }
            let eps = dp.stored[k][i];
            if eps > FEASIBILITY_TOL {
                match cap[k] {
                    Capacity::Infinite => return false,
                    Capacity::Finite(c) => {
                        if eps * (c - trace.state[k][i]) > FEASIBILITY_TOL * c.max(1.0) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Rewrite a feasible policy so that transfers are postponed until the
/// receiver spends them, opposing immediate transfers cancel, and anything
/// that would overflow the sender's battery is shipped as a stored transfer.
/// Transmit powers are left untouched, so the throughput is identical.
pub fn procrastinate_transform(policy: &TransferPolicy, sc: &Scenario) -> Result<DecomposedPolicy> {
    let report = check_feasible(policy, sc);
    if !report.feasible {
        return Err(Error::Infeasible(report));
    }
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let cap = sc.capacity();

    // Postpone transfers that exceed the receiver's immediate need, and ship
    // held-back energy early only when it would overflow the sender.
    let mut gamma = [vec![0.0; n], vec![0.0; n]];
    let mut stored = [vec![0.0; n], vec![0.0; n]];
    let mut carry = [0.0f64; 2];
    let mut prev = [0.0f64; 2];
    for i in 0..n {
        // A transfer sent back against energy still owed by the partner is a
        // round trip: drop both legs. Cutting `y` from k's transfer and `y / alpha_j`
        // from j's debt leaves k's battery unchanged and never lowers j's.
        let mut fresh = [policy.delta[0][i].max(0.0), policy.delta[1][i].max(0.0)];
        for k in 0..2 {
            let j = 1 - k;
            if alpha[j] > 0.0 && carry[j] > 0.0 {
                let y = fresh[k].min(alpha[j] * carry[j]);
                fresh[k] -= y;
                carry[j] = (carry[j] - y / alpha[j]).max(0.0);
            }
        }
        for k in 0..2 {
            let j = 1 - k;
            let pending = fresh[k] + carry[k];
            let need = if alpha[k] > 0.0 {
                policy.p[j][i].max(0.0) * t / alpha[k]
            } else {
                f64::INFINITY
            };
            gamma[k][i] = pending.min(need);
            carry[k] = pending - gamma[k][i];
        }
        // Mutual debts are netted the same way, so at most one node holds
        // postponed energy.
        if carry[0] > 0.0 && carry[1] > 0.0 {
            let k = if alpha[1] * carry[1] <= carry[0] {
                0
            } else {
                1
            };
            let j = 1 - k;
            if alpha[j] > 0.0 {
                let y = carry[k].min(alpha[j] * carry[j]);
                carry[k] -= y;
                carry[j] = (carry[j] - y / alpha[j]).max(0.0);
            }
        }
        // Opposing transfers only lose energy; cancel them.
        let both = gamma[0][i].min(gamma[1][i]);
        gamma[0][i] -= both;
        gamma[1][i] -= both;

        let mut pre = [0.0f64; 2];
        for k in 0..2 {
            let j = 1 - k;
            pre[k] = prev[k] + sc.harvests()[k][i] - policy.p[k][i] * t - gamma[k][i]
                + alpha[j] * gamma[j][i];
        }
        for k in 0..2 {
            if let Capacity::Finite(c) = cap[k] {
                stored[k][i] = (pre[k] - c).max(0.0).min(carry[k]);
                carry[k] -= stored[k][i];
            }
        }
        for k in 0..2 {
            let j = 1 - k;
            let s = pre[k] - stored[k][i] + alpha[j] * stored[j][i];
            prev[k] = cap[k].clamp(s);
        }
    }

    let mut consumed = [vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        for k in 0..2 {
            let j = 1 - k;
            consumed[k][i] = (policy.p[k][i] + (gamma[k][i] - alpha[j] * gamma[j][i]) / t).max(0.0);
        }
    }
    Ok(DecomposedPolicy {
        consumed,
        immediate: gamma,
        stored,
    })
}
