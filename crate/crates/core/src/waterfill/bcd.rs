//! Alternating (block coordinate) maximization over the two nodes' consumed
//! powers, with an extra joint block for the relay channel.

use crate::error::Result;
use crate::model::ModelKind;
use crate::transfer::{LevelFn, SlotModel};

use super::ipm::joint_solve;
use super::node::{pool_solve, tube_solve};

pub(crate) const MAX_OUTER: usize = 200;
pub(crate) const REL_TOL: f64 = 1e-10;
/// Relative level mismatch accepted as converged. A mismatch of `d` moves the
/// objective by about `d^2`, so much below this the objective cannot tell.
pub(crate) const LEVEL_TOL: f64 = 1e-6;

/// Per-node constraints of the horizontal problem, in power units
/// (energy divided by slot length).
#[derive(Debug, Clone)]
pub(crate) struct Horizontal {
    pub model: SlotModel,
    /// Net arrivals per slot, after any stored transfers.
    pub arrivals: [Vec<f64>; 2],
    pub capacity: [Option<f64>; 2],
}

#[derive(Debug, Clone)]
pub(crate) struct BcdOutcome {
    pub pbar: [Vec<f64>; 2],
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
}

impl Horizontal {
    pub fn n(&self) -> usize {
        self.arrivals[0].len()
    }

    pub fn objective(&self, pbar: &[Vec<f64>; 2]) -> f64 {
        (0..self.n())
            .map(|i| self.model.slot_rate([pbar[0][i], pbar[1][i]]))
            .sum()
    }

    fn cumulative(&self, k: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.arrivals[k]
            .iter()
            .map(|e| {
                acc += e;
                acc
            })
            .collect()
    }

    /// Best consumption of node `k` with the partner held fixed.
    pub fn node_solve(&self, k: usize, pbar: &[Vec<f64>; 2]) -> Result<Vec<f64>> {
        let j = 1 - k;
        let fns: Vec<LevelFn> = (0..self.n())
            .map(|i| self.model.level_pieces(k, pbar[j][i]))
            .collect();
        match self.capacity[k] {
            None if self.arrivals[k].iter().all(|&e| e >= 0.0) => {
                Ok(pool_solve(&fns, &self.arrivals[k]))
            }
            cap => {
                let hi = self.cumulative(k);
                let lo: Vec<f64> = match cap {
                    Some(c) => hi.iter().map(|h| h - c).collect(),
                    None => vec![f64::NEG_INFINITY; hi.len()],
                };
                tube_solve(&fns, &hi, &lo)
            }
        }
    }

    /// Relay channel: move both nodes together along the direction that
    /// keeps their received SNRs equal. Single-node moves stall on that
    /// ridge, where the rate is not differentiable.
    fn ridge_solve(&self, pbar: &mut [Vec<f64>; 2]) -> Result<()> {
        let n = self.n();
        let [n1, n2] = self.model.noise;
        let [a1, a2] = self.model.alpha;
        let (c1, c2) = (1.0 / n1, 1.0 / n2);
        let k1 = c1 * c2 / (c1 + a1 * c2);
        let k2 = c1 * c2 / (c2 + a2 * c1);
        let t = self.model.slot_seconds;
        let mut rest = [vec![0.0; n], vec![0.0; n]];
        let mut fns = Vec::with_capacity(n);
        for i in 0..n {
            let s = (pbar[0][i] / n1).min(pbar[1][i] / n2).max(0.0);
            let r1 = (pbar[0][i] - n1 * s).max(0.0);
            let r2 = (pbar[1][i] - n2 * s).max(0.0);
            rest[0][i] = r1;
            rest[1][i] = r2;
            let beta = k1 * a1 * r1 + k2 * a2 * r2;
            fns.push(LevelFn::affine(2.0 * (1.0 + beta) / t, 2.0 / t));
        }
        let mut hi = vec![f64::INFINITY; n];
        let mut lo = vec![f64::NEG_INFINITY; n];
        for (k, nk) in [(0, n1), (1, n2)] {
            let mut harvest = 0.0;
            let mut fixed = 0.0;
            for i in 0..n {
                harvest += self.arrivals[k][i];
                fixed += rest[k][i];
                hi[i] = hi[i].min((harvest - fixed) / nk);
                if let Some(c) = self.capacity[k] {
                    lo[i] = lo[i].max((harvest - c - fixed) / nk);
                }
            }
        }
        if hi.iter().any(|&h| h < 0.0) {
            // Rounding left the current point marginally outside; skip.
            return Ok(());
        }
        let sol = tube_solve(&fns, &hi, &lo)?;
        let before = self.objective(pbar);
        let mut next = pbar.clone();
        for i in 0..n {
            next[0][i] = rest[0][i] + n1 * sol[i];
            next[1][i] = rest[1][i] + n2 * sol[i];
        }
        if self.objective(&next) >= before {
            *pbar = next;
        }
        Ok(())
    }

    /// Alternate node updates from `start` until the objective settles.
    ///
    /// On the relay channel a point on the ridge may be stationary for every
    /// block without being optimal, and on the multiple-access channel the
    /// shared logarithm can make alternation crawl. In those cases the joint
    /// interior-point solve is tried and polished by further alternation.
    pub fn run(&self, start: [Vec<f64>; 2], max_outer: usize) -> Result<BcdOutcome> {
        let mut trace = Vec::new();
        let mut out = self.alternate(start, max_outer, &mut trace)?;
        let retry = match self.model.kind {
            ModelKind::Thc => !out.converged || self.on_ridge(&out.pbar),
            ModelKind::Mac => !out.converged,
            ModelKind::Twc => false,
        };
        if retry {
            let current = self.objective(&out.pbar);
            let slack = 1e-12 * current.abs().max(1.0);
            if let Some(joint) = joint_solve(self) {
                if self.objective(&joint) > current - slack {
                    let mut more = Vec::new();
                    let polished = self.alternate(joint, max_outer, &mut more)?;
                    let value = self.objective(&polished.pbar);
                    let settles = polished.converged && !out.converged;
                    if value > current || (settles && value > current - slack) {
                        trace.extend(more);
                        out = BcdOutcome {
                            iterations: out.iterations + polished.iterations,
                            ..polished
                        };
                    }
                }
            }
        }
        out.trace = trace;
        Ok(out)
    }

    /// Whether some slot sits where the relay SNR has a kink.
    fn on_ridge(&self, pbar: &[Vec<f64>; 2]) -> bool {
        let [n1, n2] = self.model.noise;
        (0..self.n()).any(|i| {
            let (a, b) = (pbar[0][i] / n1, pbar[1][i] / n2);
            a > 0.0 && b > 0.0 && (a - b).abs() <= 1e-9 * a.max(b)
        })
    }

    fn alternate(
        &self,
        start: [Vec<f64>; 2],
        max_outer: usize,
        trace: &mut Vec<f64>,
    ) -> Result<BcdOutcome> {
        let mut pbar = start;
        trace.push(self.objective(&pbar));
        let mut prev = f64::NEG_INFINITY;
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        let mut stalls = 0;
        while iterations < max_outer {
            iterations += 1;
            for k in 0..2 {
                pbar[k] = self.node_solve(k, &pbar)?;
            }
            if self.model.kind == ModelKind::Thc {
                self.ridge_solve(&mut pbar)?;
            }
            let obj = self.objective(&pbar);
            trace.push(obj);
            let gain = obj - prev;
            prev = obj;
            if gain.abs() <= REL_TOL * obj.abs().max(1e-300) {
                residual = self.level_residual(&pbar);
                if residual <= LEVEL_TOL {
                    break;
                }
                stalls += if gain.abs() <= 1e-15 * obj.abs().max(1e-300) {
                    1
                } else {
                    0
                };
                if stalls >= 3 {
                    break;
                }
            }
        }
        if !residual.is_finite() || iterations >= max_outer {
            residual = self.level_residual(&pbar);
        }
        Ok(BcdOutcome {
            pbar,
            iterations,
            trace: Vec::new(),
            residual,
            converged: residual <= LEVEL_TOL,
        })
    }

    /// Stored energy per node at the end of each slot (power units).
    pub fn stored(&self, pbar: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let mut out = [vec![0.0; self.n()], vec![0.0; self.n()]];
        for k in 0..2 {
            let mut s = 0.0;
            for i in 0..self.n() {
                s += self.arrivals[k][i] - pbar[k][i];
                if let Some(c) = self.capacity[k] {
                    s = s.min(c);
                }
                out[k][i] = s;
            }
        }
        out
    }

    /// Largest violation of the directional water-level conditions.
    ///
    /// Levels must stay constant between consecutive slots unless the
    /// battery is empty in between (then they may rise) or full (then they
    /// may fall). Idle slots only bound the level from above. Energy left
    /// over at the end counts as a violation unless it is useless.
    pub fn level_residual(&self, pbar: &[Vec<f64>; 2]) -> f64 {
        let n = self.n();
        let stored = self.stored(pbar);
        let mut worst: f64 = 0.0;
        for k in 0..2 {
            let j = 1 - k;
            let scale = self.arrivals[k]
                .iter()
                .map(|e| e.abs())
                .sum::<f64>()
                .max(1.0);
            let tol = 1e-9 * scale;
            let interval = |i: usize| {
                let f = self.model.level_pieces(k, pbar[j][i]);
                let x = pbar[k][i];
                // Kinks are located only up to rounding, so widen by a hair.
                let slack = 1e-9 * scale;
                if x <= slack {
                    (f64::NEG_INFINITY, f.at_zero())
                } else {
                    (f.eval_left(x - slack), f.eval(x + slack))
                }
            };
            let (mut lo, mut hi) = interval(0);
            for i in 1..n {
                let empty = stored[k][i - 1] <= tol;
                let full = self.capacity[k].is_some_and(|c| stored[k][i - 1] >= c - tol);
                let (tlo, thi) = match (empty, full) {
                    (true, true) => (f64::NEG_INFINITY, f64::INFINITY),
                    (true, false) => (lo, f64::INFINITY),
                    (false, true) => (f64::NEG_INFINITY, hi),
                    (false, false) => (lo, hi),
                };
                let (ilo, ihi) = interval(i);
                let nlo = tlo.max(ilo);
                let nhi = thi.min(ihi);
                if nlo > nhi {
                    let gap = (nlo - nhi) / nhi.abs().max(1e-300);
                    worst = worst.max(gap);
                    lo = ilo;
                    hi = ihi;
                } else {
                    lo = nlo;
                    hi = nhi;
                }
            }
            let left = stored[k][n - 1];
            if left > tol && hi < f64::INFINITY {
                worst = worst.max(left / scale);
            }
        }
        worst
    }
}
