"""Smoke test for the aerocmd Python module.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run with `python python/smoke_test.py` or under pytest.
"""

import aerocmd


def test_parse_render_roundtrip():
    p = aerocmd.parse_program("moveByVelocityAsync(2, 0, 0, duration=2)")
    assert p.render() == "moveByVelocityAsync(2, 0, 0, duration=2)"
    assert aerocmd.parse_program(p.render()) == p
    assert p.statements()[0]["op"] == "move_by_velocity"
    assert aerocmd.ast_equiv("rotateToYawAsync(360)", "rotateToYawAsync(0)")


def test_parse_error():
    try:
        aerocmd.parse_program("fly()")
    except aerocmd.DslParseError:
        return
    raise AssertionError("expected DslParseError")


def test_translate():
    t = aerocmd.Translator()
    best = t.translate("Move the drone forward 2 meters")[0]
    assert best["rendered"] == "moveByVelocityAsync(2, 0, 0, duration=2)"
    try:
        t.translate("please compile my tax return")
    except aerocmd.NoConfidentCandidate as e:
        assert e.args[1] < 0.35
    else:
        raise AssertionError("expected NoConfidentCandidate")


def test_simulator_kinematics():
    sim = aerocmd.Simulator(auto_takeoff=False)
    gps = sim.gps()
    assert gps["gnss"]["geo_point"]["latitude"] == aerocmd.DEFAULT_HOME_LATITUDE
    sim.submit("takeoffAsync()")
    sim.run_until_idle()
    start = sim.state()["position"]
    reply = sim.submit("moveByVelocityAsync(2, 0, 0, duration=2)")
    assert reply["status"] == "running"
    sim.run_until_idle()
    end = sim.state()["position"]
    assert abs(end["x"] - start["x"] - 4.0) < 1e-9
    assert sim.task(reply["task_id"])["status"] == "completed"
    png, meta = sim.image(0, "depth")
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    assert meta["image_type"] == "depth"


def test_validation_rejects_geofence_breach():
    assert aerocmd.validate("takeoffAsync(); moveToPositionAsync(500, 0, -3, 2)")
    assert aerocmd.validate("takeoffAsync(); moveToPositionAsync(5, 0, -3, 2)") == []


def test_metrics_nest():
    gold = "moveToPositionAsync(4, 0, -3, 2)"
    r = aerocmd.score("moveToPositionAsync(4.0000000001, 0, -3, 2)", gold)
    assert (r["exact"], r["ast"], r["execution"]) == (False, True, True)
    assert not aerocmd.execution_match("landAsync()", gold)


def test_expand_split_evaluate():
    examples = aerocmd.expand_templates(seed=42, per_family=5)
    assert examples == aerocmd.expand_templates(seed=42, per_family=5)
    train, heldout = aerocmd.split_by_family(examples, 0.25, 42)
    assert len(train) + len(heldout) == len(examples)
    report = aerocmd.evaluate(train[:40])
    assert report["exact_accuracy"] == 1.0


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print("ok", name)
