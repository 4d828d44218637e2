"""Quick end-to-end check of the Python module.

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import math
import tempfile

import lateral_ehgo as le


def main():
    assert "flat_lot" in le.presets()

    assert le.dugoff_shaping(1.0) == 1.0
    assert math.isclose(le.dugoff_shaping(0.5), 0.5 * (2 - 0.5))

    forces = le.tire_forces(vy=0.1, yaw_rate=0.05, vx=5.0, wheel_angle=0.02)
    assert forces["force_front"] < 0.0 and forces["force_rear"] < 0.0, forces
    assert forces["perturbation_rear"] == 0.0

    assert le.nominal_coefficients(5.0)
    law = le.control_law([0.5, 0.0, 0.05, 0.0], [0.0, 0.0], 5.0)
    assert law["steer"] < 0.0 and not law["saturated"], law

    s = le.Scenario.preset("flat_lot")
    s.horizon = 2.0
    back = le.Scenario.from_toml(s.to_toml())
    assert back == s

    mirror = s.mirrored()
    log = s.run()
    assert not log.aborted, log.abort_reason
    assert len(log) == int(round(s.horizon / s.dt)) + 1
    m = log.metrics()
    assert m["e_h1_convergence"] is not None and m["e_h1_convergence"] <= 0.1, m
    z1 = log.column("z1")
    assert abs(z1[-1]) < abs(z1[0])

    mz1 = mirror.run().column("z1")
    assert all(abs(a + b) < 1e-8 for a, b in zip(z1, mz1))

    try:
        log.column("nope")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown column accepted")

    bad = le.Scenario.preset("flat_lot")
    bad.speed = 0.1
    try:
        bad.validate()
    except le.SimulationError as e:
        assert "v_min" in str(e)
    else:
        raise AssertionError("slow scenario accepted")

    with tempfile.TemporaryDirectory() as out:
        small = le.Scenario.preset("flat_lot")
        small.horizon = 1.0
        path = f"{out}/short.toml"
        with open(path, "w") as f:
            f.write(small.to_toml())
        summary = le.run_batch([path], f"{out}/runs", sweeps=["epsilon=0.01,0.005"], plots=False)
        points = summary["points"]
        assert len(points) == 2
        table = le.compare([(p["name"], p["metrics"]) for p in points])
        assert table["runs"] == [p["name"] for p in points]

    print("smoke test ok")


if __name__ == "__main__":
    main()
