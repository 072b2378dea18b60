//! Joint solve of the horizontal problem when the slot SNR is a minimum of
//! linear forms in the consumed powers.
//!
//! With optimal in-slot transfers the relay SNR is the minimum of two linear
//! forms and the multiple-access SNR is a single one, so both problems are
//! concave programs over a polyhedron. Alternating node updates can stall on
//! a kink or crawl along a shared logarithm; a primal-dual interior-point
//! method does neither.

use nalgebra::DVector;
use nalgebra_sparse::{factorization::CscCholesky, CooMatrix, CscMatrix};

use super::bcd::Horizontal;
use crate::model::ModelKind;

const MAX_ITER: usize = 120;

/// Sparse rows of `G z <= b`.
struct Rows {
    coef: Vec<Vec<(usize, f64)>>,
    rhs: DVector<f64>,
}

impl Rows {
    fn mul(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.coef.len(),
            self.coef
                .iter()
                .map(|row| row.iter().map(|&(v, a)| a * z[v]).sum::<f64>()),
        )
    }

    fn mul_t(&self, y: &DVector<f64>, nv: usize) -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(nv);
        for (row, &w) in self.coef.iter().zip(y.iter()) {
            for &(v, a) in row {
                out[v] += a * w;
            }
        }
        out
    }

    /// `G^T diag(d) G + diag(extra)` in compressed sparse form.
    fn gram(&self, d: &DVector<f64>, extra: &[(usize, f64)], nv: usize) -> CscMatrix<f64> {
        let mut m = CooMatrix::new(nv, nv);
        for (row, &w) in self.coef.iter().zip(d.iter()) {
            for &(u, a) in row {
                for &(v, c) in row {
                    m.push(u, v, w * a * c);
                }
            }
        }
        for &(v, x) in extra {
            m.push(v, v, x);
        }
        CscMatrix::from(&m)
    }
}

/// SNR forms of the slot rate: the SNR is the minimum of `f[0] e1 + f[1] e2`
/// over the returned forms, or `None` if the model has no such structure.
fn snr_forms(h: &Horizontal) -> Option<Vec<[f64; 2]>> {
    let m = &h.model;
    match m.kind {
        ModelKind::Thc => {
            let [n1, n2] = m.noise;
            let [a1, a2] = m.alpha;
            let (c1, c2) = (1.0 / n1, 1.0 / n2);
            let k1 = c1 * c2 / (c1 + a1 * c2);
            let k2 = c1 * c2 / (c2 + a2 * c1);
            Some(vec![[k1 * a1, k1], [k2, k2 * a2]])
        }
        ModelKind::Mac => Some(vec![m.mac_weights()]),
        ModelKind::Twc => None,
    }
}

/// Maximize `sum_i T/2 ln(1 + u_i)` over consumed powers `e` and SNRs `u`
/// subject to `u_i` below every SNR form at `e_i`, `e >= 0` and the
/// cumulative battery bounds of `h`. Returns `None` if the model has no
/// linear-form structure or the iteration fails to settle.
pub(crate) fn joint_solve(h: &Horizontal) -> Option<[Vec<f64>; 2]> {
    let n = h.n();
    if n == 0 {
        return Some([vec![], vec![]]);
    }
    let forms = snr_forms(h)?;
    let t = h.model.slot_seconds;
    // Variables per slot: cumulative consumption of each node, then the SNR.
    // Every constraint then couples adjacent slots only, so the normal
    // equations are banded.
    let nv = 3 * n;
    let xi = |k: usize, i: usize| 3 * i + k;
    let ui = |i: usize| 3 * i + 2;
    // Consumption of node k in slot i as a combination of variables.
    let spend = |k: usize, i: usize, a: f64| {
        let mut v = vec![(xi(k, i), a)];
        if i > 0 {
            v.push((xi(k, i - 1), -a));
        }
        v
    };

    let mut coef: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..n {
        for f in &forms {
            let mut row = vec![(ui(i), 1.0)];
            row.extend(spend(0, i, -f[0]));
            row.extend(spend(1, i, -f[1]));
            coef.push(row);
            rhs.push(0.0);
        }
        for k in 0..2 {
            coef.push(spend(k, i, -1.0));
            rhs.push(0.0);
        }
    }
    let mut scale: f64 = 1.0;
    for k in 0..2 {
        let mut acc = 0.0;
        for i in 0..n {
            acc += h.arrivals[k][i];
            scale = scale.max(acc.abs());
            coef.push(vec![(xi(k, i), 1.0)]);
            rhs.push(acc);
            if let Some(c) = h.capacity[k] {
                let lo = acc - c;
                if lo > 0.0 {
                    coef.push(vec![(xi(k, i), -1.0)]);
                    rhs.push(-lo);
                }
            }
        }
    }
    let mr = coef.len();
    let g = Rows {
        coef,
        rhs: DVector::from_vec(rhs),
    };
    let b = &g.rhs;

    // Infeasible start: consumption at half the mean arrival rate.
    let mut z = DVector::<f64>::zeros(nv);
    let mean = [0, 1].map(|k| (h.arrivals[k].iter().sum::<f64>() / n as f64).max(0.0));
    for i in 0..n {
        for k in 0..2 {
            z[xi(k, i)] = 0.5 * mean[k] * (i + 1) as f64;
        }
        let snr = forms
            .iter()
            .map(|f| 0.5 * (f[0] * mean[0] + f[1] * mean[1]))
            .fold(f64::INFINITY, f64::min);
        z[ui(i)] = 0.5 * snr;
    }
    let mut s = (b - g.mul(&z)).map(|v| v.max(scale * 1e-2));
    let mut lam = DVector::<f64>::from_element(mr, 1.0);

    let grad = |z: &DVector<f64>| {
        let mut d = DVector::<f64>::zeros(nv);
        for i in 0..n {
            d[ui(i)] = -0.5 * t / (1.0 + z[ui(i)]);
        }
        d
    };

    for _ in 0..MAX_ITER {
        let rd = grad(&z) + g.mul_t(&lam, nv);
        let rp = g.mul(&z) + &s - b;
        let mu = s.dot(&lam) / mr as f64;
        let done =
            mu <= 1e-13 * scale && rp.amax() <= 1e-11 * scale && rd.amax() <= 1e-9 * t.max(1.0);
        if done {
            break;
        }
        let d = lam.component_div(&s);
        let mut curv: Vec<(usize, f64)> = (0..n)
            .map(|i| {
                let w = 1.0 + z[ui(i)];
                (ui(i), 0.5 * t / (w * w))
            })
            .collect();
        let mat = g.gram(&d, &curv, nv);
        let chol = match CscCholesky::factor(&mat) {
            Ok(c) => c,
            Err(_) => {
                let top = mat.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                curv.extend((0..nv).map(|v| (v, 1e-12 * top)));
                CscCholesky::factor(&g.gram(&d, &curv, nv)).ok()?
            }
        };
        let solve = |rc: &DVector<f64>| {
            // dz from the reduced system, then ds and dlam.
            let rhs = -&rd - g.mul_t(&(d.component_mul(&rp) - rc.component_div(&s)), nv);
            let dz = chol.solve(&rhs).column(0).into_owned();
            let dlam = d.component_mul(&(g.mul(&dz) + &rp)) - rc.component_div(&s);
            let ds = -(rc + s.component_mul(&dlam)).component_div(&lam);
            (dz, ds, dlam)
        };
        let max_step = |v: &DVector<f64>, dv: &DVector<f64>| {
            v.iter()
                .zip(dv.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| -x / d)
                .fold(1.0f64, f64::min)
        };
        let rc_aff = s.component_mul(&lam);
        let (_, ds_a, dl_a) = solve(&rc_aff);
        let step_a = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
        let mu_aff = (&s + &ds_a * step_a).dot(&(&lam + &dl_a * step_a)) / mr as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let rc = rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(mr, sigma * mu);
        let (dz, ds, dl) = solve(&rc);
        let mut step = (0.99 * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
        for i in 0..n {
            let du = dz[ui(i)];
            if du < 0.0 {
                step = step.min(0.99 * (1.0 + z[ui(i)]) / -du);
            }
        }
        if !(step > 0.0) {
            return None;
        }
        z += &dz * step;
        s += &ds * step;
        lam += &dl * step;
    }
    let rp = g.mul(&z) + &s - b;
    if rp.amax() > 1e-7 * scale {
        return None;
    }
    let mut e = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        for i in 0..n {
            e[k][i] = z[xi(k, i)] - if i > 0 { z[xi(k, i - 1)] } else { 0.0 };
        }
    }
    Some(repair(h, &e))
}

/// Clamp the interior-point iterate onto the battery constraints exactly.
fn repair(h: &Horizontal, e: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
    let n = h.n();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        let mut stored = 0.0f64;
        for i in 0..n {
            let avail = stored + h.arrivals[k][i];
            let mut x = e[k][i].clamp(0.0, avail.max(0.0));
            if let Some(c) = h.capacity[k] {
                // Spend what would overflow.
                if avail - x > c {
                    x = avail - c;
                }
            }
            out[k][i] = x;
            stored = avail - x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::transfer::SlotModel;

    #[test]
    fn relay_rate_is_min_of_two_linear_forms() {
        let m = SlotModel::new(ModelKind::Thc, [0.7, 1.3], [0.6, 0.2], 1.0);
        let (c1, c2): (f64, f64) = (1.0 / 0.7, 1.0 / 1.3);
        let k1 = c1 * c2 / (c1 + 0.6 * c2);
        let k2 = c1 * c2 / (c2 + 0.2 * c1);
        for &(p1, p2) in &[(1.0, 0.0), (0.0, 2.0), (0.3, 0.9), (2.0, 2.0), (0.0, 0.0)] {
            let snr = (k1 * (0.6 * p1 + p2)).min(k2 * (p1 + 0.2 * p2));
            assert!((m.slot_rate([p1, p2]) - 0.5 * snr.ln_1p()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_single_slot_optimum() {
        let h = Horizontal {
            model: SlotModel::new(ModelKind::Thc, [1.0, 1.0], [0.5, 0.0], 1.0),
            arrivals: [vec![4.0], vec![0.0]],
            capacity: [None, None],
        };
        let x = joint_solve(&h).unwrap();
        assert!((x[0][0] - 4.0).abs() < 1e-9);
        assert!((h.objective(&x) - 0.5 * (4.0f64 / 3.0).ln_1p()).abs() < 1e-10);
    }

    #[test]
    fn multiple_access_spreads_the_sum_power() {
        let h = Horizontal {
            model: SlotModel::new(ModelKind::Mac, [1.0, 1.0], [0.5, 0.5], 1.0),
            arrivals: [vec![2.0, 5.0, 0.0, 0.0], vec![0.0; 4]],
            capacity: [None, None],
        };
        let x = joint_solve(&h).unwrap();
        for i in 0..4 {
            assert!((x[0][i] + x[1][i] - 1.75).abs() < 1e-7, "{x:?}");
        }
        assert!((h.objective(&x) - 2.0 * 2.75f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn two_way_channel_has_no_joint_form() {
        let h = Horizontal {
            model: SlotModel::new(ModelKind::Twc, [1.0, 1.0], [0.5, 0.5], 1.0),
            arrivals: [vec![1.0], vec![1.0]],
            capacity: [None, None],
        };
        assert!(joint_solve(&h).is_none());
    }
}
