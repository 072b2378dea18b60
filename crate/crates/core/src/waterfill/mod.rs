//! Consumed-power allocation across slots and nodes.
//!
//! Infinite batteries: per-node directional water-filling alternated over
//! the two nodes ([`bcd_solve`], [`thc_solve`]) or, for the multiple access
//! channel, a single-user reduction ([`mac_solve`]). Finite batteries:
//! [`dwf_finite`], which adds capped horizontal flow and stored transfers.

mod bcd;
mod finite;
mod ipm;
mod mac;
mod node;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_partially_procrastinating, objective, procrastinate_transform, recover_transmit_powers,
    Cooperation, DecomposedPolicy, ModelKind, Scenario, TransferPolicy,
};
use crate::transfer::{LevelFn, Regime, WaterLevels};

pub use finite::dwf_finite;
pub use mac::{mac_reduce, mac_solve, staircase, MacReduction};

pub(crate) use bcd::Horizontal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub policy: DecomposedPolicy,
    pub transmit: TransferPolicy,
    pub objective_nats: f64,
    pub levels: WaterLevels,
    pub bcd_iterations: usize,
    /// Largest relative violation of the water-level conditions.
    pub level_residual: f64,
    pub mode: Cooperation,
    pub converged: bool,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Transfer regime chosen in each slot.
    pub regimes: Vec<Regime>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn objective_bits(&self) -> f64 {
        crate::model::nats_to_bits(self.objective_nats)
    }
}

fn require_infinite(sc: &Scenario, op: &str) -> Result<()> {
    if !sc.all_infinite() {
        return Err(Error::input(format!(
            "{op} needs infinite batteries; use dwf_finite for finite capacities"
        )));
    }
    Ok(())
}

pub(crate) fn horizontal(sc: &Scenario, stored: Option<&[Vec<f64>; 2]>) -> Horizontal {
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let n = sc.n_slots();
    let mut arrivals = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        let j = 1 - k;
        for i in 0..n {
            let mut e = sc.harvests()[k][i];
            if let Some(eps) = stored {
                e += alpha[j] * eps[j][i] - eps[k][i];
            }
            arrivals[k][i] = e / t;
        }
    }
    let cap = sc.capacity();
    Horizontal {
        model: sc.slot_model(),
        arrivals,
        capacity: [
            cap[0].finite().map(|c| c / t),
            cap[1].finite().map(|c| c / t),
        ],
    }
}

/// Best consumed powers (mW) of node `k` (0-based) for the partner's fixed
/// consumption, with infinite batteries.
pub fn dwf_node(
    k: usize,
    consumed_other: &[f64],
    sc: &Scenario,
    mode: Cooperation,
) -> Result<Vec<f64>> {
    require_infinite(sc, "dwf_node")?;
    if k > 1 {
        return Err(Error::input(format!("node index {k} out of range")));
    }
    if consumed_other.len() != sc.n_slots() {
        return Err(Error::Dimension(format!(
            "partner consumption has {} slots, scenario has {}",
            consumed_other.len(),
            sc.n_slots()
        )));
    }
    if consumed_other.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::input("partner consumption must be non-negative"));
    }
    let sc = sc.restricted(mode);
    let h = horizontal(&sc, None);
    let mut pbar = [vec![0.0; sc.n_slots()], vec![0.0; sc.n_slots()]];
    pbar[1 - k] = consumed_other.to_vec();
    h.node_solve(k, &pbar)
}

/// Alternating maximization over the two nodes, infinite batteries.
pub fn bcd_solve(sc: &Scenario, mode: Cooperation) -> Result<SolveReport> {
    require_infinite(sc, "bcd_solve")?;
    let sc = sc.restricted(mode);
    let h = horizontal(&sc, None);
    let out = h.run(h.arrivals.clone(), bcd::MAX_OUTER)?;
    let n = sc.n_slots();
    build_report(
        &sc,
        mode,
        &out.pbar,
        &[vec![0.0; n], vec![0.0; n]],
        ReportMeta {
            iterations: out.iterations,
            trace: out.trace,
            residual: out.residual,
            converged: out.converged,
        },
    )
}

/// Two-hop relay channel, infinite batteries.
pub fn thc_solve(sc: &Scenario, mode: Cooperation) -> Result<SolveReport> {
    if sc.model() != ModelKind::Thc {
        return Err(Error::input("thc_solve needs a two-hop scenario"));
    }
    let mut report = bcd_solve(sc, mode)?;
    let restricted = sc.restricted(mode);
    let [a1, a2] = restricted.alpha();
    let [n1, n2] = restricted.effective_noise_mw();
    // The source-only direction must never leave the relay above the source.
    if a2 == 0.0 || a1 == 0.0 {
        let (strong, weak, nw, ns) = if a2 == 0.0 {
            (0, 1, n2, n1)
        } else {
            (1, 0, n1, n2)
        };
        let mut fixed = false;
        for i in 0..restricted.n_slots() {
            let limit = report.policy.consumed[strong][i] * nw / ns;
            if report.policy.consumed[weak][i] > limit {
                report.policy.consumed[weak][i] = limit;
                fixed = true;
            }
        }
        if fixed {
            let levels = report.levels.clone();
            let meta = ReportMeta {
                iterations: report.bcd_iterations,
                trace: report.objective_trace.clone(),
                residual: report.level_residual,
                converged: report.converged,
            };
            let pbar = report.policy.consumed.clone();
            let n = restricted.n_slots();
            report = build_report(
                &restricted,
                mode,
                &pbar,
                &[vec![0.0; n], vec![0.0; n]],
                meta,
            )?;
            report.levels = levels;
        }
    }
    Ok(report)
}

/// Solve with the algorithm suited to the scenario's model and batteries.
pub fn solve(sc: &Scenario, mode: Cooperation) -> Result<SolveReport> {
    if !sc.all_infinite() {
        return dwf_finite(sc, mode);
    }
    match sc.model() {
        ModelKind::Twc => bcd_solve(sc, mode),
        ModelKind::Thc => thc_solve(sc, mode),
        ModelKind::Mac => mac_solve(sc, mode),
    }
}

pub(crate) struct ReportMeta {
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
}

/// Assemble a report from consumed powers (mW) and stored transfers (mJ).
/// `sc` must already carry the mode's efficiency restriction.
pub(crate) fn build_report(
    sc: &Scenario,
    mode: Cooperation,
    pbar: &[Vec<f64>; 2],
    stored: &[Vec<f64>; 2],
    meta: ReportMeta,
) -> Result<SolveReport> {
    let n = sc.n_slots();
    let m = sc.slot_model();
    let mut policy = DecomposedPolicy::zeros(n);
    let mut regimes = Vec::with_capacity(n);
    for i in 0..n {
        let p = [pbar[0][i].max(0.0), pbar[1][i].max(0.0)];
        let tr = m.transfer(p);
        regimes.push(tr.regime);
        for k in 0..2 {
            policy.consumed[k][i] = p[k];
            policy.immediate[k][i] = tr.delta[k];
            policy.stored[k][i] = stored[k][i];
        }
    }
    let mut warnings = Vec::new();
    let mut transmit = recover_transmit_powers(&policy, sc)?;
    if !sc.all_infinite() && !check_partially_procrastinating(&policy, sc) {
        policy = procrastinate_transform(&transmit, sc)?;
        transmit = recover_transmit_powers(&policy, sc)?;
        regimes = (0..n)
            .map(|i| {
                let sender = (0..2).find(|&k| policy.immediate[k][i] > 0.0);
                match sender {
                    Some(k)
                        if policy.immediate[k][i] >= policy.consumed[k][i] * sc.slot_seconds() =>
                    {
                        Regime::Full { from: k }
                    }
                    Some(k) => Regime::Interior { from: k },
                    None => Regime::NoTransfer,
                }
            })
            .collect();
    }
    let objective_nats = objective(&transmit, sc)?;
    let levels = WaterLevels {
        v: [
            (0..n)
                .map(|i| m.level(0, [policy.consumed[0][i], policy.consumed[1][i]]))
                .collect(),
            (0..n)
                .map(|i| m.level(1, [policy.consumed[0][i], policy.consumed[1][i]]))
                .collect(),
        ],
    };
    if !meta.converged {
        warnings.push(format!(
            "not converged after {} iterations: level residual {:.3e}",
            meta.iterations, meta.residual
        ));
    }
    Ok(SolveReport {
        policy,
        transmit,
        objective_nats,
        levels,
        bcd_iterations: meta.iterations,
        level_residual: meta.residual,
        mode,
        converged: meta.converged,
        objective_trace: meta.trace,
        regimes,
        warnings,
    })
}

/// Single-node water-filling of a total arrival sequence (linear levels).
pub(crate) fn single_user(arrivals: &[f64], capacity: Option<f64>) -> Result<Vec<f64>> {
    let fns: Vec<LevelFn> = arrivals.iter().map(|_| LevelFn::affine(1.0, 1.0)).collect();
    match capacity {
        None => Ok(node::pool_solve(&fns, arrivals)),
        Some(c) => {
            let mut acc = 0.0;
            let hi: Vec<f64> = arrivals
                .iter()
                .map(|e| {
                    acc += e;
                    acc
                })
                .collect();
            let lo: Vec<f64> = hi.iter().map(|h| h - c).collect();
            node::tube_solve(&fns, &hi, &lo)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, check_procrastinating, Capacity};

    fn fig2() -> Scenario {
        Scenario::new(
            ModelKind::Twc,
            [vec![2.0, 5.0, 0.0, 0.0], vec![0.0, 4.0, 0.0, 7.0]],
            [Capacity::Infinite; 2],
            [0.5, 0.5],
            [-100.0, -100.0],
            [1e-13, 1e-13],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn dwf_node_examples() {
        let one = |e: Vec<f64>| {
            let n = e.len();
            let sc =
                Scenario::normalized(ModelKind::Twc, [e, vec![0.0; n]], [0.0, 0.0], [1.0, 1.0])
                    .unwrap();
            dwf_node(0, &vec![0.0; n], &sc, Cooperation::NoCooperation).unwrap()
        };
        assert!(close(&one(vec![2.0, 5.0, 0.0, 0.0]), &[1.75; 4], 1e-12));
        assert!(close(&one(vec![5.0, 0.0]), &[2.5, 2.5], 1e-12));
        assert!(close(&one(vec![0.0, 5.0]), &[0.0, 5.0], 1e-12));
    }

    #[test]
    fn zero_harvest_gives_zero_policy() {
        let sc = Scenario::normalized(
            ModelKind::Twc,
            [vec![0.0; 3], vec![0.0; 3]],
            [0.5, 0.5],
            [1.0, 1.0],
        )
        .unwrap();
        let r = bcd_solve(&sc, Cooperation::Bidirectional).unwrap();
        assert_eq!(r.objective_nats, 0.0);
        assert!(r.policy.consumed.iter().flatten().all(|&p| p == 0.0));
    }

    #[test]
    fn fig2_directions() {
        let r = bcd_solve(&fig2(), Cooperation::Bidirectional).unwrap();
        let senders: Vec<Option<usize>> = r.regimes.iter().map(|g| g.sender()).collect();
        assert_eq!(senders, vec![Some(0), None, None, Some(1)]);
        assert!(r.level_residual <= 1e-7, "{}", r.level_residual);
        assert!(check_feasible(&r.transmit, &fig2()).feasible);
        assert!(check_procrastinating(&r.transmit, &fig2()));
    }

    #[test]
    fn modes_nest_on_fig2() {
        let sc = fig2();
        let obj = |m| bcd_solve(&sc, m).unwrap().objective_nats;
        let bi = obj(Cooperation::Bidirectional);
        let u12 = obj(Cooperation::Uni12);
        let u21 = obj(Cooperation::Uni21);
        let none = obj(Cooperation::NoCooperation);
        assert!(bi >= u12 - 1e-12 && bi >= u21 - 1e-12);
        assert!(u12 >= none - 1e-12 && u21 >= none - 1e-12);
    }

    #[test]
    fn thc_fig5_restriction() {
        let sc = Scenario::normalized(
            ModelKind::Thc,
            [vec![4.0, 0.0, 2.0, 6.0], vec![0.0, 3.0, 0.0, 0.0]],
            [0.5, 0.0],
            [1.0, 1.0],
        )
        .unwrap();
        let r = thc_solve(&sc, Cooperation::Bidirectional).unwrap();
        for i in 0..4 {
            assert!(r.policy.consumed[0][i] >= r.policy.consumed[1][i] - 1e-9);
        }
        assert!(
            r.converged,
            "{} {:?} {:?}",
            r.level_residual, r.policy.consumed, r.levels
        );
    }

    #[test]
    fn finite_capacity_rejected_by_infinite_solvers() {
        let sc = fig2().with_capacity([Capacity::Finite(3.0); 2]).unwrap();
        assert!(bcd_solve(&sc, Cooperation::Bidirectional).is_err());
    }
}
