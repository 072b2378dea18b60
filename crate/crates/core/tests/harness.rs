use ehcoop::harness::{generate_harvests, parse_scenario, run_sweep, SweepMode, SweepSpec};
use ehcoop::model::{Capacity, Cooperation};

fn spec(json: &str) -> SweepSpec {
    let spec: SweepSpec = serde_json::from_str(json).unwrap();
    spec.validate().unwrap();
    spec
}

#[test]
fn generator_mean_is_half_the_peak() {
    let draws = generate_harvests(10.0, 100_000, 17).unwrap();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - 5.0).abs() < 0.1, "mean {mean}");
    assert!(draws.iter().all(|&x| (0.0..=10.0).contains(&x)));
}

#[test]
fn larger_alpha_never_lowers_bidirectional_throughput() {
    let s = spec(
        r#"{"base": {"model": "twc", "harvests": [[0,0,0,0,0,0,0,0,0,0], [0,0,0,0,0,0,0,0,0,0]],
                     "transfer_efficiency": [0, 0.5]},
            "swept_parameter": "alpha1", "lo": 0, "hi": 0.5, "step": 0.1,
            "trials_per_point": 10, "seed": 8, "modes": ["bi"], "peak_harvest_mj": [10, 10]}"#,
    );
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 6);
    for w in rows.windows(2) {
        assert!(
            w[1].mean_nats >= w[0].mean_nats - 1e-9,
            "{:?} then {:?}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn single_trial_zero_harvest_point_is_all_zero() {
    let s = spec(
        r#"{"base": {"model": "mac", "harvests": [[0, 0], [0, 0]], "transfer_efficiency": 0.5},
            "swept_parameter": "peak_harvest_node1", "lo": 0, "hi": 0, "step": 1,
            "trials_per_point": 1, "seed": 0, "peak_harvest_mj": [0, 0]}"#,
    );
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), SweepMode::ALL.len());
    assert!(rows
        .iter()
        .all(|r| r.mean_nats == 0.0 && r.mean_bits == 0.0 && r.nonconverged == 0));
}

#[test]
fn modes_nest_on_every_row() {
    let s = spec(
        r#"{"base": {"model": "thc", "harvests": [[0,0,0,0,0,0,0,0], [0,0,0,0,0,0,0,0]],
                     "transfer_efficiency": 0.5, "battery_capacity": 6},
            "swept_parameter": "peak_harvest_node1", "lo": 2, "hi": 10, "step": 4,
            "trials_per_point": 4, "seed": 21, "peak_harvest_mj": [10, 10]}"#,
    );
    let rows = run_sweep(&s).unwrap();
    for chunk in rows.chunks(SweepMode::ALL.len()) {
        let get = |m: SweepMode| chunk.iter().find(|r| r.mode == m).unwrap().mean_nats;
        let bi = get(SweepMode::Optimal(Cooperation::Bidirectional));
        let none = get(SweepMode::Optimal(Cooperation::NoCooperation));
        for uni in [Cooperation::Uni12, Cooperation::Uni21] {
            let u = get(SweepMode::Optimal(uni));
            assert!(bi >= u - 1e-9 && u >= none - 1e-9);
        }
    }
}

#[test]
fn scenario_files_accept_inf_capacity() {
    let sc = parse_scenario(r#"{"model": "twc", "harvests": [[1], [2]], "transfer_efficiency": 0.3, "battery_capacity": ["inf", 3]}"#).unwrap();
    assert_eq!(sc.capacity(), [Capacity::Infinite, Capacity::Finite(3.0)]);
    assert_eq!(sc.slot_seconds(), 1.0);
}
