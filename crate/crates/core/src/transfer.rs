//! Per-slot optimal energy transfers and the resulting per-slot rate and
//! water levels, for all three channel models.
//!
//! Inside a slot the consumed powers `pbar` are fixed; the transfer moves
//! part of one node's consumption over to the other node at efficiency
//! `alpha`. The water level of node `k` is `1 / (dR/dpbar_k)`.
//!
//! For a fixed partner power, the level of node `k` is a piecewise-affine,
//! non-decreasing function of its own consumed power. [`SlotModel::level_pieces`]
//! exposes those pieces so the outer solvers can invert levels exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, Scenario};

/// Channel constants needed inside a single slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotModel {
    pub kind: ModelKind,
    /// Effective noise per link (mW).
    pub noise: [f64; 2],
    pub alpha: [f64; 2],
    /// Slot length in seconds; rates scale with it, levels with its inverse.
    pub slot_seconds: f64,
}

/// Which way energy moves in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NoTransfer,
    /// Node `from` (0-based) sends part of its consumed power.
    Interior {
        from: usize,
    },
    /// Node `from` sends all of its consumed power.
    Full {
        from: usize,
    },
}

impl Regime {
    pub fn sender(self) -> Option<usize> {
        match self {
            Regime::NoTransfer => None,
            Regime::Interior { from } | Regime::Full { from } => Some(from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotTransfer {
    /// Energy sent by each node in the slot (mJ).
    pub delta: [f64; 2],
    pub regime: Regime,
    /// Per-slot sum-rate after the transfer (nats).
    pub rate_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterLevels {
    /// `v[k][i]`, `f64::INFINITY` where the rate no longer depends on `pbar_k`.
    /// Infinite entries are written as `"inf"` in JSON.
    #[serde(with = "levels_json")]
    pub v: [Vec<f64>; 2],
}

mod levels_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Level {
        Finite(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &[Vec<f64>; 2], s: S) -> Result<S::Ok, S::Error> {
        let wrap = |row: &Vec<f64>| -> Vec<Level> {
            row.iter()
                .map(|&x| {
                    if x.is_finite() {
                        Level::Finite(x)
                    } else {
                        Level::Tag("inf".into())
                    }
                })
                .collect()
        };
        [wrap(&v[0]), wrap(&v[1])].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Vec<f64>; 2], D::Error> {
        let raw = <[Vec<Level>; 2]>::deserialize(d)?;
        let unwrap = |row: Vec<Level>| -> Result<Vec<f64>, D::Error> {
            row.into_iter()
                .map(|l| match l {
                    Level::Finite(x) => Ok(x),
                    Level::Tag(t) if t == "inf" => Ok(f64::INFINITY),
                    Level::Tag(t) => {
                        Err(serde::de::Error::custom(format!("bad water level {t:?}")))
                    }
                })
                .collect()
        };
        let [a, b] = raw;
        Ok([unwrap(a)?, unwrap(b)?])
    }
}

/// One affine piece `v(x) = a + b x` of a level function on `[start, end)`.
/// `a = +inf` marks a region where extra power is useless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPiece {
    pub start: f64,
    pub end: f64,
    pub a: f64,
    pub b: f64,
}

impl LevelPiece {
    fn at(&self, x: f64) -> f64 {
        if self.a.is_infinite() {
            f64::INFINITY
        } else {
            self.a + self.b * x
        }
    }
}

/// Non-decreasing piecewise-affine level function of one node's own power.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFn {
    pieces: Vec<LevelPiece>,
}

impl LevelFn {
    fn new(mut raw: Vec<LevelPiece>) -> Self {
        raw.retain(|p| p.end > p.start);
        raw.sort_by(|a, b| a.start.total_cmp(&b.start));
        debug_assert!(raw.first().is_some_and(|p| p.start == 0.0));
        debug_assert!(raw.last().is_some_and(|p| p.end == f64::INFINITY));
        LevelFn { pieces: raw }
    }

    /// Single affine level `a + b x` on `[0, inf)`.
    pub fn affine(a: f64, b: f64) -> Self {
        LevelFn {
            pieces: vec![LevelPiece {
                start: 0.0,
                end: f64::INFINITY,
                a,
                b,
            }],
        }
    }

    pub fn pieces(&self) -> &[LevelPiece] {
        &self.pieces
    }

    /// Level at `x`, taking the right-hand piece at breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let piece = self
            .pieces
            .iter()
            .find(|p| x < p.end)
            .unwrap_or_else(|| self.pieces.last().expect("level function has pieces"));
        piece.at(x)
    }

    /// Level just below `x` (equals [`eval`](Self::eval) away from jumps).
    pub fn eval_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.eval(0.0);
        }
        let piece = self
            .pieces
            .iter()
            .find(|p| x <= p.end)
            .unwrap_or_else(|| self.pieces.last().expect("level function has pieces"));
        piece.at(x)
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Largest `x >= 0` with `v(x) <= level`, or 0 when `v(0) > level`.
    pub fn invert(&self, level: f64) -> f64 {
        if level == f64::INFINITY {
            return f64::INFINITY;
        }
        for p in &self.pieces {
            if p.at(p.start) > level {
                return p.start;
            }
            let x = (level - p.a) / p.b;
            if x < p.end {
                return x.max(p.start);
            }
        }
        f64::INFINITY
    }

    /// Power beyond which the level is infinite, if any.
    pub fn cap(&self) -> Option<f64> {
        self.pieces
            .iter()
            .find(|p| p.a.is_infinite())
            .map(|p| p.start)
    }
}

impl SlotModel {
    pub fn new(kind: ModelKind, noise: [f64; 2], alpha: [f64; 2], slot_seconds: f64) -> Self {
        SlotModel {
            kind,
            noise,
            alpha,
            slot_seconds,
        }
    }

    /// Sum-rate of the channel (nats per slot) at transmit powers `x` (mW).
    pub fn channel_rate(&self, x1: f64, x2: f64) -> f64 {
        let [n1, n2] = self.noise;
        let unit = match self.kind {
            ModelKind::Twc => 0.5 * (x1 / n1).ln_1p() + 0.5 * (x2 / n2).ln_1p(),
            ModelKind::Thc => 0.5 * (x1 / n1).min(x2 / n2).ln_1p(),
            ModelKind::Mac => 0.5 * (x1 / n1 + x2 / n2).ln_1p(),
        };
        self.slot_seconds * unit
    }

    /// Optimal transfer at consumed powers `pbar` (mW).
    pub fn transfer(&self, pbar: [f64; 2]) -> SlotTransfer {
        let (dpow, regime) = match self.kind {
            ModelKind::Twc => self.twc_delta(pbar),
            ModelKind::Thc => self.thc_delta(pbar),
            ModelKind::Mac => self.mac_delta(pbar),
        };
        let [a1, a2] = self.alpha;
        let x1 = (pbar[0] - dpow[0] + a2 * dpow[1]).max(0.0);
        let x2 = (pbar[1] - dpow[1] + a1 * dpow[0]).max(0.0);
        SlotTransfer {
            delta: [dpow[0] * self.slot_seconds, dpow[1] * self.slot_seconds],
            regime,
            rate_nats: self.channel_rate(x1, x2),
        }
    }

    /// Per-slot rate `R(pbar)` with the optimal transfer applied.
    pub fn slot_rate(&self, pbar: [f64; 2]) -> f64 {
        self.transfer(pbar).rate_nats
    }

    fn twc_delta(&self, pbar: [f64; 2]) -> ([f64; 2], Regime) {
        let mut d = [0.0; 2];
        let mut regime = Regime::NoTransfer;
        for k in 0..2 {
            let j = 1 - k;
            let a = self.alpha[k];
            if a <= 0.0 {
                continue;
            }
            let interior = 0.5 * ((self.noise[k] + pbar[k]) - (self.noise[j] + pbar[j]) / a);
            if interior > 0.0 {
                if interior >= pbar[k] && interior - pbar[k] > 1e-12 * pbar[k].max(1.0) {
                    d[k] = pbar[k];
                    regime = Regime::Full { from: k };
                } else {
                    d[k] = interior.min(pbar[k]);
                    regime = Regime::Interior { from: k };
                }
            }
        }
        if d[0] > 0.0 && d[1] > 0.0 {
            // Cannot happen for alpha1 * alpha2 <= 1; keep the larger.
            let keep = if d[0] >= d[1] { 0 } else { 1 };
            d[1 - keep] = 0.0;
        }
        (d, regime)
    }

    fn thc_delta(&self, pbar: [f64; 2]) -> ([f64; 2], Regime) {
        let c = [1.0 / self.noise[0], 1.0 / self.noise[1]];
        let mut d = [0.0; 2];
        let mut regime = Regime::NoTransfer;
        for k in 0..2 {
            let j = 1 - k;
            if self.alpha[k] <= 0.0 {
                continue;
            }
            let num = c[k] * pbar[k] - c[j] * pbar[j];
            if num > 0.0 {
                d[k] = (num / (c[k] + self.alpha[k] * c[j])).min(pbar[k]);
                regime = Regime::Interior { from: k };
            }
        }
        (d, regime)
    }

    fn mac_delta(&self, pbar: [f64; 2]) -> ([f64; 2], Regime) {
        let c = [1.0 / self.noise[0], 1.0 / self.noise[1]];
        let mut d = [0.0; 2];
        let mut regime = Regime::NoTransfer;
        for k in 0..2 {
            let j = 1 - k;
            if self.alpha[k] * c[j] > c[k] && pbar[k] > 0.0 {
                d[k] = pbar[k];
                regime = Regime::Full { from: k };
            }
        }
        (d, regime)
    }

    /// Effective SNR weights of the MAC after the fixed transfer rule.
    pub fn mac_weights(&self) -> [f64; 2] {
        let c = [1.0 / self.noise[0], 1.0 / self.noise[1]];
        [
            c[0].max(self.alpha[0] * c[1]),
            c[1].max(self.alpha[1] * c[0]),
        ]
    }

    /// Level function of node `k` for a fixed partner consumption `other`.
    pub fn level_pieces(&self, k: usize, other: f64) -> LevelFn {
        let s = self.slot_seconds;
        let raw = match self.kind {
            ModelKind::Twc => self.twc_pieces(k, other),
            ModelKind::Thc => self.thc_pieces(k, other),
            ModelKind::Mac => self.mac_pieces(k, other),
        };
        LevelFn::new(
            raw.into_iter()
                .map(|p| LevelPiece {
                    a: p.a / s,
                    b: p.b / s,
                    ..p
                })
                .collect(),
        )
    }

    fn twc_pieces(&self, k: usize, q: f64) -> Vec<LevelPiece> {
        let j = 1 - k;
        let (nk, nj) = (self.noise[k], self.noise[j]);
        let (ak, aj) = (self.alpha[k], self.alpha[j]);
        let b = nj + q;
        let inf = f64::INFINITY;
        let piece = |start: f64, end: f64, a: f64, slope: f64| LevelPiece {
            start: start.max(0.0),
            end: end.max(0.0),
            a,
            b: slope,
        };
        let (t1, t2) = if aj > 0.0 {
            (aj * (nj - q) - nk, aj * b - nk)
        } else {
            (-inf, -inf)
        };
        let (t3, t4) = if ak > 0.0 {
            (b / ak - nk, nk - b / ak)
        } else {
            (inf, -inf)
        };
        let mut out = Vec::with_capacity(4);
        out.push(piece(0.0, t1, 2.0 * (nk + aj * q), 2.0));
        out.push(piece(t1.max(0.0), t2, nk + aj * b, 1.0));
        if ak > 0.0 {
            out.push(piece(0.0, t4, 2.0 * b / ak, 2.0));
            out.push(piece(t2.max(0.0), t3, 2.0 * nk, 2.0));
            out.push(piece(t3.max(t4).max(0.0), inf, nk + b / ak, 1.0));
        } else {
            out.push(piece(t2.max(0.0), inf, 2.0 * nk, 2.0));
        }
        out
    }

    fn thc_pieces(&self, k: usize, q: f64) -> Vec<LevelPiece> {
        let j = 1 - k;
        let (nk, nj) = (self.noise[k], self.noise[j]);
        let (ak, aj) = (self.alpha[k], self.alpha[j]);
        let kink = nk * q / nj;
        let above = if ak > 0.0 {
            2.0 * (nk + (q + nj) / ak)
        } else {
            f64::INFINITY
        };
        vec![
            LevelPiece {
                start: 0.0,
                end: kink,
                a: 2.0 * (nk + aj * (q + nj)),
                b: 2.0,
            },
            LevelPiece {
                start: kink,
                end: f64::INFINITY,
                a: above,
                b: 2.0,
            },
        ]
    }

    fn mac_pieces(&self, k: usize, q: f64) -> Vec<LevelPiece> {
        let w = self.mac_weights();
        let j = 1 - k;
        vec![LevelPiece {
            start: 0.0,
            end: f64::INFINITY,
            a: 2.0 * (1.0 + w[j] * q) / w[k],
            b: 2.0,
        }]
    }

    /// Water level of node `k` at consumed powers `pbar`.
    pub fn level(&self, k: usize, pbar: [f64; 2]) -> f64 {
        self.level_pieces(k, pbar[1 - k]).eval(pbar[k])
    }
}

fn check_inputs(p1: f64, p2: f64) -> Result<()> {
    if !(p1 >= 0.0) || !(p2 >= 0.0) || !p1.is_finite() || !p2.is_finite() {
        return Err(Error::input(format!(
            "consumed powers must be finite and non-negative, got ({p1}, {p2})"
        )));
    }
    Ok(())
}

fn transfer_as(kind: ModelKind, p1: f64, p2: f64, sc: &Scenario) -> Result<SlotTransfer> {
    check_inputs(p1, p2)?;
    let mut m = sc.slot_model();
    m.kind = kind;
    Ok(m.transfer([p1, p2]))
}

pub fn twc_transfer(p1: f64, p2: f64, sc: &Scenario) -> Result<SlotTransfer> {
    transfer_as(ModelKind::Twc, p1, p2, sc)
}

pub fn thc_transfer(p1: f64, p2: f64, sc: &Scenario) -> Result<SlotTransfer> {
    transfer_as(ModelKind::Thc, p1, p2, sc)
}

pub fn mac_transfer(p1: f64, p2: f64, sc: &Scenario) -> Result<SlotTransfer> {
    transfer_as(ModelKind::Mac, p1, p2, sc)
}

/// Water level `v_k` (0-based `k`) at consumed powers `(p1, p2)`.
pub fn water_level(kind: ModelKind, k: usize, p1: f64, p2: f64, sc: &Scenario) -> Result<f64> {
    check_inputs(p1, p2)?;
    if k > 1 {
        return Err(Error::input(format!("node index {k} out of range")));
    }
    let mut m = sc.slot_model();
    m.kind = kind;
    Ok(m.level(k, [p1, p2]))
}

/// The five-case closed form of the TWC per-slot rate, evaluated from the
/// regime label alone. Used to cross-check the transfer algebra.
pub fn twc_case_rate(m: &SlotModel, pbar: [f64; 2], regime: Regime) -> f64 {
    let [n1, n2] = m.noise;
    let u = match regime {
        Regime::NoTransfer => 0.5 * ((1.0 + pbar[0] / n1) * (1.0 + pbar[1] / n2)).ln(),
        Regime::Interior { from: k } => {
            let j = 1 - k;
            let (nk, nj, a) = (m.noise[k], m.noise[j], m.alpha[k]);
            let s = a * (nk + pbar[k]) + (nj + pbar[j]);
            0.5 * (s * s / (4.0 * a * nk * nj)).ln()
        }
        Regime::Full { from: k } => {
            let j = 1 - k;
            0.5 * (1.0 + (pbar[j] + m.alpha[k] * pbar[k]) / m.noise[j]).ln()
        }
    };
    m.slot_seconds * u
}
