"""Smoke test for the Python extension.

Build and install it first, e.g. `maturin develop --release -m crates/py/Cargo.toml`.
"""

import json
import math
import sys

import ehcoop_py as eh


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    sc = eh.Scenario("twc", ([2, 5, 0, 0], [0, 4, 0, 7]), (0.5, 0.5))
    assert sc.n_slots == 4 and sc.battery_capacity == (math.inf, math.inf)
    assert close(sc.effective_noise_mw[0], 1.0)

    # Single-slot transfer: node 1 holds 2 mW, node 2 nothing.
    one = eh.Scenario.normalized("twc", ([2.0], [0.0]), (0.5, 0.5))
    d1, d2, rate = eh.slot_transfer(one, 2.0, 0.0)
    assert close(d1, 0.5) and d2 == 0.0, (d1, d2)
    assert close(rate, 0.5 * math.log(2.5) + 0.5 * math.log(1.25))
    # Marginal rate 1 / (2 (1 + 1.5)) on both sides of the transfer, so the level is 5.
    assert close(eh.water_level(one, 1, 2.0, 0.0), 5.0)

    res = eh.solve(sc)
    assert res.converged, res
    none = eh.solve(sc, "none")
    assert res.objective_nats >= none.objective_nats - 1e-9
    assert close(res.objective_bits, res.objective_nats / math.log(2))
    again = eh.evaluate(sc, res.transmit_power, res.transfer)
    assert close(again, res.objective_nats), (again, res.objective_nats)
    report = json.loads(res.to_json())
    assert report["diagnostics"]["converged"] is True

    small = eh.Scenario.normalized("mac", ([0.2, 0.1], [0.0, 0.25]), (0.6, 0.4), (0.2, 0.3))
    bound, _, _ = eh.dp_solve(small, energy_quantum_mj=0.01)
    assert bound <= eh.solve(small).objective_nats + 1e-9

    base, _, _ = eh.baseline(sc, "const_coop")
    assert base <= res.objective_nats + 1e-9

    spec = {
        "base": {"model": "twc", "harvests": [[0] * 5, [0] * 5], "transfer_efficiency": 0.5},
        "swept_parameter": "peak_harvest_node1", "lo": 2, "hi": 4, "step": 2,
        "trials_per_point": 2, "seed": 1, "modes": ["bi", "none"], "peak_harvest_mj": [10, 10],
    }
    rows = eh.run_sweep(json.dumps(spec))
    assert len(rows) == 4 and rows[0][1] == "bi"
    assert eh.run_sweep(json.dumps(spec)) == rows

    try:
        eh.Scenario("twc", ([1], [1]), (1.2, 0.5))
    except eh.EhcoopError as e:
        assert "transfer_efficiency" in str(e) or "efficiency" in str(e), e
    else:
        raise AssertionError("efficiency above 1 accepted")

    print(f"ok: bi {res.objective_nats:.6f} nats, none {none.objective_nats:.6f} nats, baseline {base:.6f} nats")


if __name__ == "__main__":
    sys.exit(main())
