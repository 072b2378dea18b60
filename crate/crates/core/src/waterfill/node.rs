//! Single-node directional water-filling over piecewise-affine level
//! functions.
//!
//! Two solvers share the level-crossing primitive: a forward pool merge for
//! pure causality constraints, and a tube solver for cumulative consumption
//! bounded above (causality) and below (battery overflow).

use crate::error::{Error, Result};
use crate::transfer::LevelFn;

/// Relative slack used when comparing energy sums against budgets.
const BUDGET_EPS: f64 = 1e-13;

/// Consumption at `level`: `(min, max)` over the powers consistent with it.
fn x_range(f: &LevelFn, level: f64) -> (f64, f64) {
    if level == f64::INFINITY {
        let cap = f.cap().unwrap_or(f64::INFINITY);
        return (cap, cap);
    }
    let mut lo = None;
    for p in f.pieces() {
        let v0 = if p.a.is_infinite() {
            f64::INFINITY
        } else {
            p.a + p.b * p.start
        };
        if v0 >= level {
            lo = Some(p.start);
            break;
        }
        let x = (level - p.a) / p.b;
        if x < p.end {
            lo = Some(x.max(p.start));
            break;
        }
    }
    let lo = lo.unwrap_or(f64::INFINITY);
    (lo, f.invert(level).max(lo))
}

fn sums(fns: &[&LevelFn], level: f64) -> (f64, f64) {
    fns.iter().fold((0.0, 0.0), |(a, b), f| {
        let (l, h) = x_range(f, level);
        (a + l, b + h)
    })
}

fn candidates(fns: &[&LevelFn]) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::new();
    for f in fns {
        for p in f.pieces() {
            if p.a.is_finite() {
                c.push(p.a + p.b * p.start);
                if p.end.is_finite() {
                    c.push(p.a + p.b * p.end);
                }
            }
        }
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn cap_total(fns: &[&LevelFn]) -> f64 {
    fns.iter().map(|f| f.cap().unwrap_or(f64::INFINITY)).sum()
}

/// Range of common levels whose consumption can total `budget`:
/// `(inf {L : sum x_hi(L) >= B}, sup {L : sum x_lo(L) <= B})`.
///
/// A non-positive budget has no lower limit; a budget at or above the total
/// cap has no upper limit, and one strictly above it has lower limit `+inf`.
pub(crate) fn crossing(fns: &[&LevelFn], budget: f64) -> (f64, f64) {
    let caps = cap_total(fns);
    let cand = candidates(fns);
    let lo = if budget <= 0.0 {
        f64::NEG_INFINITY
    } else if caps < budget {
        f64::INFINITY
    } else {
        level_where(fns, &cand, budget, true)
    };
    let hi = if caps <= budget {
        f64::INFINITY
    } else {
        level_where(fns, &cand, budget, false)
    };
    (lo, hi.max(lo))
}

/// Level at which the consumption curve reaches `budget`, approached from
/// below (`first`: smallest level with `sum x_hi >= B`) or above.
fn level_where(fns: &[&LevelFn], cand: &[f64], budget: f64, first: bool) -> f64 {
    let reached = |c: f64| {
        let (_, h) = sums(fns, c);
        if first {
            h >= budget
        } else {
            h > budget
        }
    };
    let m = cand.partition_point(|&c| !reached(c));
    if m == cand.len() {
        // Beyond the last breakpoint the curve is affine.
        let c = *cand.last().expect("level functions have breakpoints");
        let (_, f0) = sums(fns, c);
        let step = c.abs().max(1.0);
        let (_, f1) = sums(fns, c + step);
        let slope = (f1 - f0) / step;
        return c + (budget - f0) / slope;
    }
    let cm = cand[m];
    let (g, _) = sums(fns, cm);
    let inside = if first { g >= budget } else { g > budget };
    if m == 0 || !inside {
        return cm;
    }
    let cp = cand[m - 1];
    let (_, f0) = sums(fns, cp);
    if g <= f0 {
        return cm;
    }
    (cp + (budget - f0) * (cm - cp) / (g - f0)).clamp(cp, cm)
}

/// Split `budget` over slots at a common `level`, honouring lower bounds on
/// the running total (`prefix_lo[t]`, relative to the segment start).
fn allocate(fns: &[&LevelFn], level: f64, budget: f64, prefix_lo: Option<&[f64]>) -> Vec<f64> {
    let m = fns.len();
    let ranges: Vec<(f64, f64)> = fns.iter().map(|f| x_range(f, level)).collect();
    let mut x: Vec<f64> = ranges.iter().map(|r| r.0).collect();
    let base: f64 = x.iter().sum();
    let extra = budget - base;
    let room: Vec<f64> = ranges.iter().map(|r| (r.1 - r.0).max(0.0)).collect();

    if extra > 0.0 && room.iter().any(|&r| r > 0.0) {
        // Smallest admissible running extra, computed backwards.
        let mut need = vec![0.0; m];
        let mut cum_base = vec![0.0; m];
        let mut acc = 0.0;
        for t in 0..m {
            acc += x[t];
            cum_base[t] = acc;
        }
        let mut next = extra;
        for t in (0..m).rev() {
            let lo = prefix_lo.map_or(f64::NEG_INFINITY, |p| p[t] - cum_base[t]);
            let here = if t + 1 == m {
                extra
            } else {
                next - room[t + 1]
            };
            need[t] = here.max(lo).max(0.0);
            next = need[t];
        }
        let mut e_prev = 0.0;
        for t in 0..m {
            let e = need[t].max(e_prev).min(e_prev + room[t]);
            x[t] += e - e_prev;
            e_prev = e;
        }
    }
    // Absorb rounding so the slot sum matches the budget.
    let total: f64 = x.iter().sum();
    let mut r = budget - total;
    if r.abs() > 0.0 {
        for t in (0..m).rev() {
            if r > 0.0 {
                if x[t] > 0.0 || t == 0 {
                    x[t] += r;
                    r = 0.0;
                }
            } else {
                let take = (-r).min(x[t]);
                x[t] -= take;
                r += take;
            }
            if r == 0.0 {
                break;
            }
        }
    }
    x
}

/// Directional water-filling with unlimited storage: energy harvested in a
/// slot may be consumed then or later. `budgets` are per-slot arrivals in the
/// same units as consumption. Energy that cannot raise the rate anywhere is
/// left unspent.
pub(crate) fn pool_solve(fns: &[LevelFn], budgets: &[f64]) -> Vec<f64> {
    struct Pool {
        start: usize,
        end: usize,
        budget: f64,
        lo: f64,
        hi: f64,
    }
    let n = fns.len();
    let mut pools: Vec<Pool> = Vec::with_capacity(n);
    let mut carry = 0.0;
    for i in 0..n {
        let mut cur = Pool {
            start: i,
            end: i + 1,
            budget: budgets[i] + carry,
            lo: 0.0,
            hi: 0.0,
        };
        carry = 0.0;
        loop {
            let refs: Vec<&LevelFn> = fns[cur.start..cur.end].iter().collect();
            let (lo, hi) = crossing(&refs, cur.budget);
            cur.lo = lo;
            cur.hi = hi;
            if lo == f64::INFINITY {
                let caps = cap_total(&refs);
                carry = cur.budget - caps;
                cur.budget = caps;
                let (lo, hi) = crossing(&refs, caps);
                cur.lo = lo;
                cur.hi = hi;
            }
            match pools.last() {
                Some(prev) if prev.lo > cur.hi => {
                    let prev = pools.pop().expect("checked");
                    cur.start = prev.start;
                    cur.budget += prev.budget + carry;
                    carry = 0.0;
                }
                _ => break,
            }
        }
        pools.push(cur);
    }
    let mut x = vec![0.0; n];
    for p in &pools {
        let refs: Vec<&LevelFn> = fns[p.start..p.end].iter().collect();
        let level = if p.lo.is_finite() {
            p.lo
        } else if p.lo == f64::NEG_INFINITY {
            p.hi.min(f64::MAX)
        } else {
            f64::INFINITY
        };
        let part = if p.budget <= 0.0 {
            vec![0.0; refs.len()]
        } else {
            allocate(&refs, level, p.budget, None)
        };
        x[p.start..p.end].copy_from_slice(&part);
    }
    x
}

/// Directional water-filling with cumulative consumption kept inside
/// `[lo[t], hi[t]]`. `hi` models causality, `lo` the overflow threshold
/// (`-inf` when storage is unlimited). When every useful slot is saturated
/// and `lo` still demands spending, the surplus is burnt in a slot whose
/// level is already infinite, where it costs nothing; the battery never
/// overflows.
pub(crate) fn tube_solve(fns: &[LevelFn], hi: &[f64], lo: &[f64]) -> Result<Vec<f64>> {
    let n = fns.len();
    let mut hi: Vec<f64> = hi.to_vec();
    let mut lo: Vec<f64> = lo.to_vec();
    for t in (0..n.saturating_sub(1)).rev() {
        hi[t] = hi[t].min(hi[t + 1]);
    }
    for t in 1..n {
        lo[t] = lo[t].max(lo[t - 1]);
    }
    for t in 0..n {
        lo[t] = lo[t].min(hi[t]);
    }
    if let Some(t) = (0..n).find(|&t| hi[t] < -BUDGET_EPS * hi[t].abs().max(1.0)) {
        return Err(Error::Solver(format!(
            "cumulative budget is negative ({:.3e}) at slot {}",
            hi[t],
            t + 1
        )));
    }
    let mut x = vec![0.0; n];
    let mut s = 0usize;
    let mut base = 0.0f64;

    while s < n {
        let mut upper = f64::INFINITY;
        let mut t_u = n - 1;
        let mut lower = f64::NEG_INFINITY;
        let mut t_d = s;
        let mut close: Option<(usize, f64, f64)> = None;
        let mut waste_at: Option<usize> = None;
        for t in s..n {
            let refs: Vec<&LevelFn> = fns[s..=t].iter().collect();
            let b_hi = hi[t] - base;
            if b_hi < -BUDGET_EPS * hi[t].abs().max(1.0) {
                return Err(Error::Solver(format!(
                    "consumption already exceeds the budget at slot {}",
                    t + 1
                )));
            }
            let (_, u) = crossing(&refs, b_hi.max(0.0));
            let b_lo = lo[t] - base;
            let d = if b_lo <= BUDGET_EPS * lo[t].abs().max(1.0) {
                f64::NEG_INFINITY
            } else {
                crossing(&refs, b_lo).0
            };
            if d == f64::INFINITY && upper == f64::INFINITY && u == f64::INFINITY {
                waste_at = Some(t);
                break;
            }
            if d > upper {
                close = Some((t_u, upper, hi[t_u]));
                break;
            }
            if u < lower {
                close = Some((t_d, lower, lo[t_d]));
                break;
            }
            if u <= upper {
                upper = u;
                t_u = t;
            }
            if d >= lower {
                lower = d;
                t_d = t;
            }
        }
        if let Some(t) = waste_at {
            let refs: Vec<&LevelFn> = fns[s..=t].iter().collect();
            let caps: Vec<f64> = refs.iter().map(|f| f.cap().expect("capped")).collect();
            let used: f64 = caps.iter().sum();
            x[s..=t].copy_from_slice(&caps);
            x[t] += lo[t] - base - used;
            base = lo[t];
            s = t + 1;
            continue;
        }
        let (end, level, target) = match close {
            Some(c) => c,
            None if upper == f64::INFINITY => {
                // Nothing can exhaust the budget: run every slot at its cap.
                for t in s..n {
                    x[t] = fns[t].cap().expect("unbounded budget implies caps");
                }
                break;
            }
            None => (t_u, upper, hi[t_u]),
        };
        let refs: Vec<&LevelFn> = fns[s..=end].iter().collect();
        let budget = (target - base).max(0.0);
        let prefix_lo: Vec<f64> = (s..=end).map(|t| lo[t] - base).collect();
        let level = if level.is_finite() {
            level
        } else {
            crossing(&refs, budget).0
        };
        let part = if budget <= 0.0 {
            vec![0.0; refs.len()]
        } else {
            allocate(&refs, level, budget, Some(&prefix_lo))
        };
        x[s..=end].copy_from_slice(&part);
        base = target.max(base);
        s = end + 1;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::transfer::SlotModel;

    fn lone(n: usize) -> Vec<LevelFn> {
        let m = SlotModel::new(ModelKind::Twc, [1.0, 1.0], [0.0, 0.0], 1.0);
        (0..n).map(|_| m.level_pieces(0, 0.0)).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-10)
    }

    #[test]
    fn pool_examples() {
        assert!(close(
            &pool_solve(&lone(4), &[2.0, 5.0, 0.0, 0.0]),
            &[1.75; 4]
        ));
        assert!(close(&pool_solve(&lone(2), &[5.0, 0.0]), &[2.5, 2.5]));
        assert!(close(&pool_solve(&lone(2), &[0.0, 5.0]), &[0.0, 5.0]));
        assert!(close(&pool_solve(&lone(3), &[0.0, 0.0, 0.0]), &[0.0; 3]));
    }

    #[test]
    fn tube_matches_pool_without_storage_limit() {
        let e = [2.0, 5.0, 0.0, 0.0, 3.0, 0.5];
        let mut c = 0.0;
        let hi: Vec<f64> = e
            .iter()
            .map(|v| {
                c += v;
                c
            })
            .collect();
        let t = tube_solve(&lone(6), &hi, &[f64::NEG_INFINITY; 6]).unwrap();
        assert!(close(&t, &pool_solve(&lone(6), &e)));
    }

    #[test]
    fn tube_respects_capacity() {
        // Harvest 8 then nothing, battery 3: slot 1 must use 5.
        let t = tube_solve(&lone(2), &[8.0, 8.0], &[5.0, 5.0]).unwrap();
        assert!(close(&t, &[5.0, 3.0]));
        let t = tube_solve(&lone(2), &[8.0, 8.0], &[3.0, 3.0]).unwrap();
        assert!(close(&t, &[4.0, 4.0]));
    }

    #[test]
    fn tube_burns_surplus_in_capped_slots() {
        let m = SlotModel::new(ModelKind::Thc, [1.0, 1.0], [0.0, 0.0], 1.0);
        // Relay with a silent source: every level is infinite from zero.
        let fns: Vec<LevelFn> = (0..2).map(|_| m.level_pieces(1, 0.0)).collect();
        let t = tube_solve(&fns, &[4.0, 4.0], &[3.0, 3.0]).unwrap();
        assert!(close(&t, &[3.0, 0.0]));
    }

    #[test]
    fn crossing_handles_jumps() {
        let m = SlotModel::new(ModelKind::Thc, [1.0, 1.0], [0.5, 0.5], 1.0);
        let f = m.level_pieces(0, 1.0);
        let (lo, hi) = crossing(&[&f], 1.0);
        assert!((lo - f.eval_left(1.0)).abs() < 1e-12);
        assert!((hi - f.eval(1.0)).abs() < 1e-12);
        let x = allocate(&[&f, &f], 0.5 * (lo + hi), 2.0, None);
        assert!(close(&x, &[1.0, 1.0]));
        let (lo, hi) = crossing(&[&f, &f], 1.5);
        assert_eq!(lo, hi);
        assert!(close(&allocate(&[&f, &f], lo, 1.5, None), &[0.75, 0.75]));
    }
}
