use ehcoop::baselines::{constant_power, BaselineKind};
use ehcoop::model::{
    battery_trace, check_feasible, check_partially_procrastinating, check_procrastinating,
    objective, procrastinate_transform, recover_transmit_powers, Capacity, Cooperation, ModelKind,
    Scenario, TransferPolicy,
};
use ehcoop::oracle::{dp_solve, DpConfig};
use ehcoop::transfer::SlotModel;
use ehcoop::waterfill::solve;
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Twc),
        Just(ModelKind::Thc),
        Just(ModelKind::Mac)
    ]
}

fn slot_model() -> impl Strategy<Value = SlotModel> {
    (
        model(),
        [0.1f64..4.0, 0.1f64..4.0],
        [0.0f64..=1.0, 0.0f64..=1.0],
    )
        .prop_map(|(kind, noise, alpha)| SlotModel::new(kind, noise, alpha, 1.0))
}

fn power() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 6 => 0.0f64..20.0]
}

fn scenario(max_slots: usize, peak: f64) -> impl Strategy<Value = Scenario> {
    (1..=max_slots)
        .prop_flat_map(move |n| {
            (
                model(),
                [
                    prop::collection::vec(0.0..peak, n),
                    prop::collection::vec(0.0..peak, n),
                ],
                [0.0f64..=1.0, 0.0f64..=1.0],
                [0.1f64..3.0, 0.1f64..3.0],
            )
        })
        .prop_map(|(kind, e, alpha, noise)| Scenario::normalized(kind, e, alpha, noise).unwrap())
}

fn with_caps(sc: Scenario, caps: Option<[f64; 2]>) -> Scenario {
    match caps {
        Some(c) => sc
            .with_capacity([Capacity::Finite(c[0]), Capacity::Finite(c[1])])
            .unwrap(),
        None => sc,
    }
}

/// Feasible policy that spends random fractions of what each node holds.
fn random_policy(sc: &Scenario, frac: &[f64]) -> TransferPolicy {
    let n = sc.n_slots();
    let alpha = sc.alpha();
    let cap = sc.capacity();
    let mut it = frac.iter().cycle();
    let mut pol = TransferPolicy::zeros(n);
    let mut s = [0.0f64; 2];
    for i in 0..n {
        let avail = [s[0] + sc.harvests()[0][i], s[1] + sc.harvests()[1][i]];
        for k in 0..2 {
            pol.delta[k][i] = 0.9 * avail[k] * it.next().unwrap();
        }
        for k in 0..2 {
            let have = avail[k] - pol.delta[k][i] + alpha[1 - k] * pol.delta[1 - k][i];
            pol.p[k][i] = have * it.next().unwrap();
            s[k] = cap[k].clamp(have - pol.p[k][i]);
        }
    }
    pol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transfer_is_one_way_and_within_budget(m in slot_model(), p1 in power(), p2 in power()) {
        let t = m.transfer([p1, p2]);
        prop_assert!(t.delta[0] >= 0.0 && t.delta[0] <= p1 + 1e-12);
        prop_assert!(t.delta[1] >= 0.0 && t.delta[1] <= p2 + 1e-12);
        prop_assert!(t.delta[0] == 0.0 || t.delta[1] == 0.0);
        let own = m.channel_rate(p1, p2);
        prop_assert!(t.rate_nats >= own - 1e-12);
        prop_assert!((t.rate_nats - m.slot_rate([p1, p2])).abs() <= 1e-12);
    }

    #[test]
    fn rate_is_jointly_concave(m in slot_model(), x in [power(), power()], y in [power(), power()], a in 0.01f64..0.99) {
        let z = [a * x[0] + (1.0 - a) * y[0], a * x[1] + (1.0 - a) * y[1]];
        let lhs = m.slot_rate(z);
        let rhs = a * m.slot_rate(x) + (1.0 - a) * m.slot_rate(y);
        prop_assert!(lhs >= rhs - 1e-10, "{lhs} < {rhs}");
    }

    #[test]
    fn level_is_reciprocal_slope(m in slot_model(), own in 0.01f64..20.0, other in power(), k in 0usize..2) {
        let mut p = [other; 2];
        p[k] = own;
        let v: f64 = m.level(k, p);
        let h = 1e-7 * p[k].max(1.0);
        let mut q = p;
        q[k] += h;
        let fd: f64 = (m.slot_rate(q) - m.slot_rate(p)) / h;
        if v.is_infinite() {
            prop_assert!(fd.abs() <= 1e-9);
        } else {
            prop_assert!(((1.0 / v) - fd).abs() <= 1e-5 * fd.abs().max(1e-12), "1/v {} vs {fd}", 1.0 / v);
        }
    }

    #[test]
    fn level_is_non_decreasing(m in slot_model(), other in power(), a in 0.0f64..20.0, b in 0.0f64..20.0, k in 0usize..2) {
        let f = m.level_pieces(k, other);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f.eval(lo) <= f.eval(hi) + 1e-12);
        prop_assert!(f.eval_left(hi) <= f.eval(hi));
    }

    #[test]
    fn battery_recursion_matches_cumulative_sum(
        sc in scenario(8, 5.0),
        frac in prop::collection::vec(0.0f64..1.0, 32),
    ) {
        let pol = random_policy(&sc, &frac);
        let tr = battery_trace(&pol, &sc).unwrap();
        let alpha = sc.alpha();
        for k in 0..2 {
            let j = 1 - k;
            let mut acc = 0.0;
            for i in 0..sc.n_slots() {
                acc += sc.harvests()[k][i] - pol.p[k][i] - pol.delta[k][i] + alpha[j] * pol.delta[j][i];
                prop_assert!((tr.state[k][i] - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn transform_keeps_powers_and_procrastinates(
        sc in scenario(8, 5.0),
        caps in prop::option::of([0.3f64..6.0, 0.3f64..6.0]),
        frac in prop::collection::vec(0.0f64..1.0, 32),
    ) {
        let sc = with_caps(sc, caps);
        let pol = random_policy(&sc, &frac);
        let dp = procrastinate_transform(&pol, &sc).unwrap();
        let back = recover_transmit_powers(&dp, &sc).unwrap();
        prop_assert!(check_feasible(&back, &sc).feasible);
        prop_assert!(check_partially_procrastinating(&dp, &sc));
        prop_assert!((objective(&pol, &sc).unwrap() - objective(&back, &sc).unwrap()).abs() <= 1e-12);
        if caps.is_none() {
            prop_assert!(check_procrastinating(&back, &sc));
        }
    }

    #[test]
    fn decomposition_round_trips_procrastinating_policies(
        sc in scenario(6, 5.0),
        frac in prop::collection::vec(0.0f64..1.0, 32),
    ) {
        let once = recover_transmit_powers(&procrastinate_transform(&random_policy(&sc, &frac), &sc).unwrap(), &sc).unwrap();
        let again = recover_transmit_powers(&procrastinate_transform(&once, &sc).unwrap(), &sc).unwrap();
        for k in 0..2 {
            for i in 0..sc.n_slots() {
                prop_assert!((once.p[k][i] - again.p[k][i]).abs() <= 1e-12 * once.p[k][i].max(1.0));
                prop_assert!((once.delta[k][i] - again.delta[k][i]).abs() <= 1e-12 * once.delta[k][i].max(1.0));
            }
        }
    }

    #[test]
    fn cooperation_modes_nest_and_baselines_trail(
        sc in scenario(6, 10.0),
        caps in prop::option::of([0.5f64..8.0, 0.5f64..8.0]),
    ) {
        let sc = with_caps(sc, caps);
        let run = |mode| solve(&sc, mode).unwrap();
        let bi = run(Cooperation::Bidirectional);
        let tol = 1e-9 * bi.objective_nats.max(1.0);
        let none = run(Cooperation::NoCooperation).objective_nats;
        for uni in [Cooperation::Uni12, Cooperation::Uni21] {
            let u = run(uni).objective_nats;
            prop_assert!(bi.objective_nats >= u - tol && u >= none - tol);
        }
        prop_assert!(check_feasible(&bi.transmit, &sc).feasible);
        if caps.is_none() {
            prop_assert!(check_procrastinating(&bi.transmit, &sc));
        } else {
            prop_assert!(check_partially_procrastinating(&bi.policy, &sc));
        }
        let cn = objective(&constant_power(&sc, BaselineKind::ConstantPowerNoCoop).unwrap(), &sc).unwrap();
        let cc = objective(&constant_power(&sc, BaselineKind::ConstantPowerWithCoop).unwrap(), &sc).unwrap();
        prop_assert!(cn <= none + tol);
        prop_assert!(cc <= bi.objective_nats + tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_never_beats_the_solver(
        sc in scenario(3, 0.3),
        caps in prop::option::of([0.05f64..0.25, 0.05f64..0.25]),
    ) {
        let sc = with_caps(sc, caps);
        let best = solve(&sc, Cooperation::Bidirectional).unwrap().objective_nats;
        let dp = dp_solve(&sc, &DpConfig::with_quantum(0.03)).unwrap();
        prop_assert!(dp.objective_lower_bound <= best + 1e-9);
        prop_assert!(check_feasible(&dp.policy, &sc).feasible);
    }
}
