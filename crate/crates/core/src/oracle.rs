//! Brute-force references: dynamic programming over quantized battery
//! states, and exhaustive search over per-slot transfers.
//!
//! The DP picks the next battery state from a grid, so the consumed energy
//! `available - next_state` is exact and the returned policy is feasible
//! without rounding. Its value is therefore a certified lower bound on the
//! optimum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    objective, recover_transmit_powers, Capacity, DecomposedPolicy, ModelKind, Scenario,
    TransferPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    /// Battery grid step (mJ). When `None`, the largest per-node energy
    /// range is divided into `grid_points` steps.
    pub energy_quantum_mj: Option<f64>,
    pub grid_points: usize,
    /// Refuse instances whose joint battery grid exceeds this many states.
    pub max_states: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            energy_quantum_mj: None,
            grid_points: 40,
            max_states: 250_000,
        }
    }
}

impl DpConfig {
    pub fn with_quantum(q: f64) -> Self {
        DpConfig {
            energy_quantum_mj: Some(q),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    /// Throughput of `policy`; a lower bound on the optimum (nats).
    pub objective_lower_bound: f64,
    pub policy: TransferPolicy,
}

#[derive(Debug, Clone, Copy, Default)]
struct Choice {
    next: (u32, u32),
    /// Stored transfer `(sender, grid multiple)`, sender full afterwards.
    stored: Option<(u8, u32)>,
    value: f64,
}

fn grid(max: f64, q: f64, include_max: bool) -> Vec<f64> {
    let steps = (max / q + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=steps).map(|m| m as f64 * q).collect();
    if include_max && (max - g[steps]).abs() > 1e-12 * max.max(1.0) && max > g[steps] {
        g.push(max);
    }
    g
}

/// Largest grid index with value at most `x`.
fn floor_index(g: &[f64], x: f64) -> Option<usize> {
    let k = g.partition_point(|&v| v <= x + 1e-12 * x.abs().max(1.0));
    k.checked_sub(1)
}

/// Maximize throughput by backward induction over quantized battery states.
pub fn dp_solve(sc: &Scenario, cfg: &DpConfig) -> Result<DpSolution> {
    let n = sc.n_slots();
    let t = sc.slot_seconds();
    let alpha = sc.alpha();
    let cap = sc.capacity();
    let e = sc.harvests();
    let totals = [e[0].iter().sum::<f64>(), e[1].iter().sum::<f64>()];
    let finite_any = !sc.all_infinite();

    // Largest energy each battery can ever hold.
    let mut reach = [0.0f64; 2];
    for k in 0..2 {
        let j = 1 - k;
        let inflow = if finite_any && cap[j].finite().is_some() && alpha[j] > 0.0 {
            alpha[j] * totals[j]
        } else {
            0.0
        };
        reach[k] = match cap[k] {
            Capacity::Finite(c) => c.min(totals[k] + inflow),
            Capacity::Infinite => totals[k] + inflow,
        };
    }
    let q = match cfg.energy_quantum_mj {
        Some(q) if q > 0.0 && q.is_finite() => q,
        Some(q) => return Err(Error::input(format!("energy quantum {q} must be positive"))),
        None => {
            let span = reach[0].max(reach[1]);
            if span <= 0.0 {
                1.0
            } else {
                span / cfg.grid_points.max(1) as f64
            }
        }
    };
    let g = [
        grid(reach[0], q, cap[0].finite().is_some_and(|c| c <= reach[0])),
        grid(reach[1], q, cap[1].finite().is_some_and(|c| c <= reach[1])),
    ];
    let states = g[0].len() as u64 * g[1].len() as u64;
    if states > cfg.max_states {
        let need = q * (states as f64 / cfg.max_states as f64).sqrt();
        return Err(Error::StateExplosion {
            estimated: states,
            cap: cfg.max_states,
            hint: format!("use an energy quantum of at least {need:.4} mJ or shorten the horizon"),
        });
    }
    let m = sc.slot_model();
    let (g0, g1) = (g[0].len(), g[1].len());
    let full_idx = [g0 - 1, g1 - 1];
    let can_store = |k: usize| cap[k].finite().is_some() && alpha[k] > 0.0;

    let mut value = vec![0.0f64; g0 * g1];
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let last = i + 1 == n;
        let next_value = &value;
        let slot: Vec<Choice> = (0..g0 * g1)
            .into_par_iter()
            .map(|idx| {
                let s = [g[0][idx / g1], g[1][idx % g1]];
                let avail = [s[0] + e[0][i], s[1] + e[1][i]];
                let mut best = Choice {
                    value: f64::NEG_INFINITY,
                    ..Default::default()
                };
                let top = |k: usize, a: f64| {
                    let lim = cap[k].finite().map_or(a, |c| a.min(c));
                    floor_index(&g[k], lim)
                };
                let (Some(t0), Some(t1)) = (top(0, avail[0]), top(1, avail[1])) else {
                    return best;
                };
                let (r0, r1) = if last { (0, 0) } else { (t0, t1) };
                for a in 0..=r0 {
                    let p0 = (avail[0] - g[0][a]).max(0.0) / t;
                    for b in 0..=r1 {
                        let p1 = (avail[1] - g[1][b]).max(0.0) / t;
                        let v = m.slot_rate([p0, p1]) + next_value[a * g1 + b];
                        if v > best.value {
                            best = Choice {
                                next: (a as u32, b as u32),
                                stored: None,
                                value: v,
                            };
                        }
                    }
                }
                for k in 0..2 {
                    if !can_store(k) {
                        continue;
                    }
                    let j = 1 - k;
                    let c = cap[k].finite().expect("finite sender");
                    let spare = avail[k] - c;
                    if spare < q {
                        continue;
                    }
                    let steps = (spare / q + 1e-9).floor() as u32;
                    for mult in 1..=steps {
                        let eps = mult as f64 * q;
                        let pk = (spare - eps).max(0.0) / t;
                        let aj = avail[j] + alpha[k] * eps;
                        let Some(tj) = top(j, aj) else { continue };
                        let rj = if last { 0 } else { tj };
                        for bj in 0..=rj {
                            let pj = (aj - g[j][bj]).max(0.0) / t;
                            let mut p = [0.0; 2];
                            p[k] = pk;
                            p[j] = pj;
                            let mut nxt = [0usize; 2];
                            nxt[k] = full_idx[k];
                            nxt[j] = bj;
                            let v = m.slot_rate(p) + next_value[nxt[0] * g1 + nxt[1]];
                            if v > best.value {
                                best = Choice {
                                    next: (nxt[0] as u32, nxt[1] as u32),
                                    stored: Some((k as u8, mult)),
                                    value: v,
                                };
                            }
                        }
                    }
                }
                best
            })
            .collect();
        value = slot.iter().map(|c| c.value).collect();
        choices.push(slot);
    }
    choices.reverse();

    // Roll the decisions forward from empty batteries.
    let mut dp = DecomposedPolicy::zeros(n);
    let mut state = (0usize, 0usize);
    for i in 0..n {
        let c = choices[i][state.0 * g1 + state.1];
        let s = [g[0][state.0], g[1][state.1]];
        let mut avail = [s[0] + e[0][i], s[1] + e[1][i]];
        if let Some((k, mult)) = c.stored {
            let (k, j) = (k as usize, 1 - k as usize);
            let eps = mult as f64 * q;
            dp.stored[k][i] = eps;
            avail[k] -= eps;
            avail[j] += alpha[k] * eps;
        }
        let next = [c.next.0 as usize, c.next.1 as usize];
        let p = [
            (avail[0] - g[0][next[0]]).max(0.0) / t,
            (avail[1] - g[1][next[1]]).max(0.0) / t,
        ];
        let tr = m.transfer(p);
        for k in 0..2 {
            dp.consumed[k][i] = p[k];
            dp.immediate[k][i] = tr.delta[k];
        }
        state = (next[0], next[1]);
    }
    let policy = recover_transmit_powers(&dp, sc)?;
    let objective_lower_bound = objective(&policy, sc)?;
    Ok(DpSolution {
        objective_lower_bound,
        policy,
    })
}

/// Best single-direction transfer on a uniform grid of `points` values per
/// direction. Returns the transfers (mJ) and the resulting rate (nats).
pub fn grid_transfer_max(
    kind: ModelKind,
    p1: f64,
    p2: f64,
    sc: &Scenario,
    points: usize,
) -> Result<([f64; 2], f64)> {
    if points < 100 {
        return Err(Error::input(format!(
            "grid needs at least 100 points, got {points}"
        )));
    }
    if !(p1 >= 0.0) || !(p2 >= 0.0) {
        return Err(Error::input("consumed powers must be non-negative"));
    }
    let mut m = sc.slot_model();
    m.kind = kind;
    let t = sc.slot_seconds();
    let [a1, a2] = m.alpha;
    let mut best = ([0.0, 0.0], m.channel_rate(p1, p2));
    for s in 0..points {
        let frac = s as f64 / (points - 1) as f64;
        let d1 = p1 * frac;
        let r = m.channel_rate(p1 - d1, p2 + a1 * d1);
        if r > best.1 {
            best = ([d1 * t, 0.0], r);
        }
        let d2 = p2 * frac;
        let r = m.channel_rate(p1 + a2 * d2, p2 - d2);
        if r > best.1 {
            best = ([0.0, d2 * t], r);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_feasible;

    fn twc(e: [Vec<f64>; 2]) -> Scenario {
        Scenario::normalized(ModelKind::Twc, e, [0.5, 0.5], [1.0, 1.0]).unwrap()
    }

    #[test]
    fn single_slot_matches_closed_form() {
        let sc = twc([vec![2.0], vec![0.0]]);
        let r = dp_solve(&sc, &DpConfig::with_quantum(1e-3)).unwrap();
        assert!((r.objective_lower_bound - 0.56972).abs() < 1e-3);
        assert!(check_feasible(&r.policy, &sc).feasible);
    }

    #[test]
    fn zero_harvest_is_zero() {
        let r = dp_solve(&twc([vec![0.0; 3], vec![0.0; 3]]), &DpConfig::default()).unwrap();
        assert_eq!(r.objective_lower_bound, 0.0);
    }

    #[test]
    fn single_node_staircase_value() {
        let sc = Scenario::normalized(
            ModelKind::Twc,
            [vec![2.0, 5.0, 0.0, 0.0], vec![0.0; 4]],
            [0.0, 0.0],
            [1.0, 1.0],
        )
        .unwrap();
        let r = dp_solve(&sc, &DpConfig::with_quantum(0.05)).unwrap();
        let exact = 4.0 * 0.5 * 2.75f64.ln();
        assert!(r.objective_lower_bound <= exact + 1e-12);
        assert!(exact - r.objective_lower_bound < 1e-3);
    }

    #[test]
    fn refuses_huge_grids() {
        let sc = twc([vec![100.0; 3], vec![100.0; 3]]);
        let err = dp_solve(&sc, &DpConfig::with_quantum(1e-3)).unwrap_err();
        assert!(matches!(err, Error::StateExplosion { .. }));
    }

    #[test]
    fn grid_search_examples() {
        let sc = twc([vec![1.0], vec![1.0]]);
        let (d, _) = grid_transfer_max(ModelKind::Twc, 2.0, 0.0, &sc, 2001).unwrap();
        assert!((d[0] - 0.5).abs() <= 1e-3 && d[1] == 0.0);
        let (d, _) = grid_transfer_max(ModelKind::Thc, 4.0, 0.0, &sc, 3001).unwrap();
        assert!((d[0] - 8.0 / 3.0).abs() <= 4.0 / 3000.0);
        let (d, _) = grid_transfer_max(ModelKind::Mac, 1.0, 2.0, &sc, 100).unwrap();
        assert!(d.iter().all(|&x| x == 0.0 || x == 1.0 || x == 2.0));
        assert!(grid_transfer_max(ModelKind::Twc, 1.0, 1.0, &sc, 10).is_err());
    }

    #[test]
    fn finite_battery_oracle_is_feasible() {
        let sc = twc([vec![1.0, 0.0, 0.4], vec![0.0, 0.2, 0.9]])
            .with_capacity([Capacity::Finite(0.5); 2])
            .unwrap();
        let r = dp_solve(&sc, &DpConfig::with_quantum(0.05)).unwrap();
        assert!(check_feasible(&r.policy, &sc).feasible);
        assert!(r.objective_lower_bound > 0.0);
    }
}
