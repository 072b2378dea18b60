//! Multiple access channel: the fixed transfer rule turns the two batteries
//! into one weighted pool, solved as a single user and split back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Capacity, Cooperation, ModelKind, Scenario};

use super::{build_report, dwf_finite, require_infinite, single_user, ReportMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacReduction {
    /// `alpha_k* = max(1, alpha_k c_j / c_k)`.
    pub alpha_star: [f64; 2],
    /// Equivalent single-user harvests (mJ), referenced to node 1's link:
    /// `alpha_1* E_1 + alpha_2* (n_1 / n_2) E_2`. With equal effective noise
    /// this is `alpha_1* E_1 + alpha_2* E_2`.
    pub aggregate: Vec<f64>,
}

/// SNR weight of each node's consumed power after the transfer rule.
fn weights(sc: &Scenario) -> [f64; 2] {
    sc.slot_model().mac_weights()
}

pub fn mac_reduce(sc: &Scenario) -> Result<MacReduction> {
    if sc.model() != ModelKind::Mac {
        return Err(Error::input("mac_reduce needs a multiple access scenario"));
    }
    let [n1, n2] = sc.effective_noise_mw();
    let w = weights(sc);
    let alpha_star = [w[0] * n1, w[1] * n2];
    let e = sc.harvests();
    let aggregate = (0..sc.n_slots())
        .map(|i| n1 * (w[0] * e[0][i] + w[1] * e[1][i]))
        .collect();
    Ok(MacReduction {
        alpha_star,
        aggregate,
    })
}

/// Optimal single-user powers (mW, unit slots) for the given arrivals (mJ):
/// piecewise constant, non-decreasing except where a finite battery forces
/// a drop, changing only at depletion or full-battery slots.
pub fn staircase(aggregate: &[f64], capacity: Capacity) -> Result<Vec<f64>> {
    if let Some((i, e)) = aggregate.iter().enumerate().find(|(_, e)| !(**e >= 0.0)) {
        return Err(Error::input(format!(
            "aggregate[{i}] = {e} must be non-negative"
        )));
    }
    single_user(aggregate, capacity.finite())
}

/// Multiple access channel solved through the single-user reduction.
/// Finite batteries go through [`dwf_finite`].
pub fn mac_solve(sc: &Scenario, mode: Cooperation) -> Result<SolveReport> {
    if sc.model() != ModelKind::Mac {
        return Err(Error::input("mac_solve needs a multiple access scenario"));
    }
    if !sc.all_infinite() {
        return dwf_finite(sc, mode);
    }
    require_infinite(sc, "mac_solve")?;
    let sc = sc.restricted(mode);
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let [n1, _] = sc.effective_noise_mw();
    let red = mac_reduce(&sc)?;
    let per_slot: Vec<f64> = red.aggregate.iter().map(|e| e / t).collect();
    let sum_power = staircase(&per_slot, Capacity::Infinite)?;
    let pbar = split(&sc, &sum_power, n1)?;
    let h = super::horizontal(&sc, None);
    let residual = h.level_residual(&pbar);
    let obj = h.objective(&pbar);
    build_report(
        &sc,
        mode,
        &pbar,
        &[vec![0.0; n], vec![0.0; n]],
        ReportMeta {
            iterations: 1,
            trace: vec![obj],
            residual,
            converged: residual <= super::bcd::LEVEL_TOL,
        },
    )
}

use super::SolveReport;

/// Split aggregate consumption (mW referenced to node 1's link) into node
/// consumptions, drawing first on the node that transfers, else node 1.
fn split(sc: &Scenario, sum_power: &[f64], n_ref: f64) -> Result<[Vec<f64>; 2]> {
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let w = weights(sc);
    let c = [
        1.0 / sc.effective_noise_mw()[0],
        1.0 / sc.effective_noise_mw()[1],
    ];
    let alpha = sc.alpha();
    let first = if alpha[1] * c[0] > c[1] { 1 } else { 0 };
    let order = [first, 1 - first];
    let mut battery = [0.0f64; 2];
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        for k in 0..2 {
            battery[k] += sc.harvests()[k][i];
        }
        // Demand in weighted energy units.
        let mut demand = sum_power[i] * t / n_ref;
        for &k in &order {
            if demand <= 0.0 {
                break;
            }
            let take = (demand / w[k]).min(battery[k]);
            battery[k] -= take;
            out[k][i] = take / t;
            demand -= take * w[k];
        }
        let scale = sum_power[i].abs().max(1.0) / n_ref;
        if demand > 1e-9 * scale {
            return Err(Error::Solver(format!(
                "aggregate consumption exceeds both batteries at slot {}",
                i + 1
            )));
        }
    }
    Ok(out)
}
