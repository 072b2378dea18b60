//! Finite batteries: horizontal water-filling capped by battery size,
//! alternated with stored (vertical) transfers out of full batteries.

use crate::error::Result;
use crate::model::{Cooperation, Scenario};

use super::bcd::{BcdOutcome, MAX_OUTER};
use super::{build_report, horizontal, ReportMeta, SolveReport};

const MAX_PASSES: usize = 500;
const GOLDEN_STEPS: usize = 60;

struct Vertical<'a> {
    sc: &'a Scenario,
    evals: usize,
}

impl Vertical<'_> {
    fn eval(&mut self, eps: &[Vec<f64>; 2], warm: &[Vec<f64>; 2]) -> Result<BcdOutcome> {
        self.evals += 1;
        let h = horizontal(self.sc, Some(eps));
        h.run(warm.clone(), MAX_OUTER)
    }

    fn objective(&mut self, eps: &[Vec<f64>; 2], warm: &[Vec<f64>; 2]) -> Result<f64> {
        let out = self.eval(eps, warm)?;
        Ok(horizontal(self.sc, Some(eps)).objective(&out.pbar))
    }

    /// Largest stored transfer node `k` can make at slot `i` (mJ) before
    /// its cumulative net arrivals turn negative.
    fn upper_bound(&self, eps: &[Vec<f64>; 2], k: usize, i: usize) -> f64 {
        let h = horizontal(self.sc, Some(eps));
        let t = self.sc.slot_seconds();
        let mut acc = 0.0;
        let mut least = f64::INFINITY;
        for (s, a) in h.arrivals[k].iter().enumerate() {
            acc += a * t;
            if s >= i {
                least = least.min(acc);
            }
        }
        eps[k][i] + least.max(0.0)
    }
}

/// Maximize a concave function on `[a, b]` by golden-section search.
fn golden<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        if (b - a) <= 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Sum-throughput maximization with at least one finite battery.
///
/// Starting from `pbar = E` and no stored transfers, alternates capped
/// horizontal water-filling for both nodes with line searches on the stored
/// transfer of each (sender, slot) pair whose sender battery is full, until
/// no line search improves the objective.
pub fn dwf_finite(sc: &Scenario, mode: Cooperation) -> Result<SolveReport> {
    let sc = sc.restricted(mode);
    let n = sc.n_slots();
    let alpha = sc.alpha();
    let cap = sc.capacity();
    let t = sc.slot_seconds();
    let mut eps = [vec![0.0; n], vec![0.0; n]];
    let mut vert = Vertical { sc: &sc, evals: 0 };
    let h0 = horizontal(&sc, None);
    let mut out = vert.eval(&eps, &h0.arrivals)?;
    let mut best = h0.objective(&out.pbar);
    let mut trace = vec![best];
    let mut passes = 0;
    let mut iterations = out.iterations;

    while passes < MAX_PASSES {
        passes += 1;
        let mut improved = false;
        for k in 0..2 {
            let Some(c) = cap[k].finite() else { continue };
            if alpha[k] <= 0.0 {
                continue;
            }
            for i in 0..n {
                let h = horizontal(&sc, Some(&eps));
                let full = h.stored(&out.pbar)[k][i] * t >= c - 1e-9 * c.max(1.0);
                if !full && eps[k][i] <= 0.0 {
                    continue;
                }
                let ub = vert.upper_bound(&eps, k, i);
                let cur = eps[k][i];
                let probe = 1e-6 * c.max(1.0);
                let warm = out.pbar.clone();
                let try_at = |v: f64, vert: &mut Vertical| -> Result<f64> {
                    let mut e = eps.clone();
                    e[k][i] = v;
                    vert.objective(&e, &warm)
                };
                let tol = 1e-12 * best.abs().max(1e-12);
                let mut range = None;
                if ub > cur && try_at((cur + probe).min(ub), &mut vert)? > best + tol {
                    range = Some((cur, ub));
                } else if cur > 0.0 && try_at((cur - probe).max(0.0), &mut vert)? > best + tol {
                    range = Some((0.0, cur));
                }
                let Some((a, b)) = range else { continue };
                let (v, f) = golden(|v| try_at(v, &mut vert), a, b)?;
                if f > best + tol {
                    eps[k][i] = v;
                    out = vert.eval(&eps, &warm)?;
                    iterations += out.iterations;
                    best = horizontal(&sc, Some(&eps)).objective(&out.pbar);
                    trace.push(best);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let h = horizontal(&sc, Some(&eps));
    let residual = h.level_residual(&out.pbar);
    let pbar = out.pbar.clone();
    let mut report = build_report(
        &sc,
        mode,
        &pbar,
        &eps,
        ReportMeta {
            iterations,
            trace,
            residual,
            converged: residual <= super::bcd::LEVEL_TOL && passes < MAX_PASSES,
        },
    )?;
    if passes >= MAX_PASSES {
        report.warnings.push(format!(
            "stored-transfer search hit the pass limit ({MAX_PASSES})"
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, check_partially_procrastinating, Capacity, ModelKind};
    use crate::waterfill::bcd_solve;

    fn twc(e: [Vec<f64>; 2], cap: [Capacity; 2]) -> Scenario {
        Scenario::normalized(ModelKind::Twc, e, [0.5, 0.5], [1.0, 1.0])
            .unwrap()
            .with_capacity(cap)
            .unwrap()
    }

    #[test]
    fn loose_capacity_matches_infinite() {
        let e = [vec![2.0, 5.0, 0.0, 0.0], vec![0.0, 4.0, 0.0, 7.0]];
        let inf = bcd_solve(
            &twc(e.clone(), [Capacity::Infinite; 2]),
            Cooperation::Bidirectional,
        )
        .unwrap();
        let fin = dwf_finite(
            &twc(e, [Capacity::Finite(100.0); 2]),
            Cooperation::Bidirectional,
        )
        .unwrap();
        assert!((inf.objective_nats - fin.objective_nats).abs() < 1e-8);
    }

    #[test]
    fn full_sender_stores_energy_for_idle_partner() {
        // Node 1 harvests far more than its battery holds while node 2 has
        // nothing until later.
        let sc = twc(
            [vec![1.0, 6.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0]],
            [Capacity::Finite(2.0); 2],
        );
        let r = dwf_finite(&sc, Cooperation::Bidirectional).unwrap();
        assert!(check_feasible(&r.transmit, &sc).feasible);
        assert!(check_partially_procrastinating(&r.policy, &sc));
        let none = dwf_finite(&sc, Cooperation::NoCooperation).unwrap();
        assert!(r.objective_nats >= none.objective_nats - 1e-12);
    }
}
