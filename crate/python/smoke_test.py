"""Smoke test for the `minkmembrane` Python module.

Build and install the module first, e.g.

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import json
import math

import minkmembrane as mm

SMALL_RUN = {
    "dimension": 1,
    "grid": {"extent": 20, "points": 401},
    "time": {"t_end": 4},
    "initial_data": {"profile": "gaussian", "epsilon": 0.001},
    "diagnostics": {"gamma_order": 1, "sample_dt": 0.5},
}


def check_config():
    cfg = mm.RunConfig.from_json(json.dumps(SMALL_RUN))
    assert cfg.dimension == 1 and cfg.t_end == 4.0
    filled = json.loads(cfg.to_json())
    assert filled["time"]["cfl"] == 0.4
    assert len(cfg.hash()) == 64
    try:
        mm.RunConfig.from_json(json.dumps({**SMALL_RUN, "dimension": 4}))
    except ValueError as e:
        assert "dimension" in str(e)
    else:
        raise AssertionError("dimension 4 accepted")
    return cfg


def check_simulation(cfg):
    sim = mm.simulate(cfg)
    assert sim.termination == "reached_end" and sim.exit_code == 0
    records = sim.records
    assert len(records) == 9
    assert records[0]["t"] == 0.0 and records[-1]["t"] == 4.0
    assert sim.breakdown is None
    assert sim.norm_csv().startswith("# config_sha256=" + cfg.hash())
    assert max(abs(v) for v in sim.final_phi()) < 1e-3

    zero = mm.simulate(cfg.with_epsilon(0.0))
    assert all(r["sup_phi"] == 0.0 for r in zero.records)


def check_breakdown():
    steep = dict(SMALL_RUN, initial_data={"profile": "gaussian", "epsilon": 3.0, "width": 0.5})
    sim = mm.simulate(mm.RunConfig.from_json(json.dumps(steep)))
    assert sim.termination == "breakdown" and sim.exit_code == 2
    report = sim.breakdown
    assert report["q"] >= 0.9 and report["epsilon"] == 3.0


def check_helpers():
    x = mm.kappa([2.0, 1.0])
    assert math.isclose(x[0], 2.0 / 3.0) and math.isclose(x[1], 1.0 / 3.0)
    try:
        mm.kappa([1.0, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("cone point accepted")
    ts = [float(t) for t in range(10, 51)]
    fit = mm.fit_decay(ts, [3.0 * (1 + t) ** -0.5 for t in ts], 10.0)
    assert abs(fit["exponent"] + 0.5) < 1e-12
    assert mm.exit_code("breakdown") == 2


def check_verification():
    cfg = mm.RunConfig.from_json(
        json.dumps({**SMALL_RUN, "verify": {"bundles": 10, "commutation_bundles": 4, "conformal_points": 10}})
    )
    report = mm.verify(cfg)
    assert report.passed, report.summaries
    assert report.worst("formulation_equivalence") <= 1e-10
    conformal = mm.verify_conformal(cfg)
    assert conformal.passed, conformal.summaries


if __name__ == "__main__":
    config = check_config()
    check_simulation(config)
    check_breakdown()
    check_helpers()
    check_verification()
    print("python smoke test passed")
