import csv
import io
import math
from dataclasses import replace

import pytest

from quori import sim
from quori.behavior import Mode
from quori.config import default_config, load_config
from quori.errors import ParseError, ValidationError

CFG = default_config()
HEADER = ",".join(sim.SCENARIO_HEADER) + "\n"


@pytest.fixture(scope="module")
def museum_log():
    return sim.run_scenario(sim.builtin_scenario("museum_demo"), CFG, 40.0)


def test_empty_scenario_sleeps_without_moving():
    log = sim.run_scenario(sim.parse_scenario(HEADER, "empty"), CFG, 60.0)
    assert len(log.records) == 6000
    assert {rec.mode for rec in log.records} == {Mode.SLEEP}
    last = log.records[-1].base
    assert (last.x, last.y, last.phi, last.theta_t) == (0.0, 0.0, 0.0, 0.0)
    report = sim.emit_report(log, CFG)
    assert report.greets == 0 and report.clamp_count == 0 and report.distance_traveled == 0.0


def test_museum_demo_hand_traced_walk(museum_log):
    # visitor appears in front at t = 1 s: greeting starts on that frame,
    # lasts greet_duration, then mirror tracking until sleep_timeout after
    # the visitor was last in the camera FoV
    changes = []
    prev = None
    for rec in museum_log.records:
        if rec.mode != prev:
            changes.append((rec.t_us, rec.mode))
            prev = rec.mode
    assert changes[1] == (1_000_000, Mode.GREET)
    assert changes[2] == (4_000_000, Mode.MIRROR_TRACK)
    assert changes[3][1] is Mode.SLEEP
    assert len(changes) == 4
    # the visitor leaves the FoV on the final walk-off leg (12 s to 16 s)
    assert 15_000_000 <= changes[3][0] - 20_000_000 <= 16_000_000


def test_museum_report(museum_log):
    report = sim.emit_report(museum_log, CFG)
    assert report.greets == 1 and report.dances == 0 and report.bows == 0
    assert report.ok
    assert report.max_waist_torque <= 3.0
    # the 80 deg arm raise in the scenario exceeds the shoulder range
    assert report.clamp_count > 0
    assert "status" in report.text() and report.csv().startswith("metric,value\n")


def test_logs_are_byte_identical(museum_log):
    again = sim.run_scenario(sim.builtin_scenario("museum_demo"), CFG, 40.0)
    assert sim.command_log_text(again) == sim.command_log_text(museum_log)
    assert sim.state_log_text(again) == sim.state_log_text(museum_log)


def test_log_header_and_columns(museum_log):
    text = sim.command_log_text(museum_log)
    assert f"# config_sha256: {CFG.digest()}" in text
    rows = list(csv.reader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#")))))
    assert tuple(rows[0]) == sim.COMMAND_HEADER
    times = [r[0] for r in rows[1:]]
    assert times[:3] == ["0.010", "0.020", "0.030"]
    assert times[-1] == "40.000"


def test_injected_over_limit_command_flagged(museum_log):
    log = sim.RunLog(museum_log.scenario, museum_log.config_hash, museum_log.dt_us)
    bad = museum_log.records[500]
    log.records = list(museum_log.records[:10]) + [
        replace(bad, command=replace(bad.command, turret_rate=4.0))
    ]
    report = sim.emit_report(log, CFG)
    assert not report.ok
    assert "ASSERTION BREACH" in report.text()


def test_feasible_rates_scale_down_and_flag():
    # sideways motion needs turret counter-rotation on top of the full rate
    cmd = replace(sim.CommandFrame(), base_uy=-0.1, turret_rate=math.pi)
    rates, scaled = sim.feasible_rates(cmd, sim.BaseState(), CFG)
    assert scaled
    from quori.base import check_limits

    assert check_limits(rates, CFG) == []


def test_run_rejects_bad_duration_and_dt():
    scn = sim.parse_scenario(HEADER)
    with pytest.raises(ValidationError):
        sim.run_scenario(scn, CFG, 0.0)
    with pytest.raises(ValidationError):
        sim.run_scenario(scn, CFG, 1.0, dt=1e-7 / 3)


def test_scenario_interpolation():
    scn = sim.parse_scenario(HEADER + "0,1,0,0,0,0\n2,1,2,4,90,0\n")
    [(vid, key)] = scn.visitors_at(1.0)
    assert (vid, key.x, key.y) == (1, 1.0, 2.0)
    assert key.left_arm == pytest.approx(math.radians(45))
    assert scn.visitors_at(2.5) == []


@pytest.mark.parametrize(
    "text, line",
    [
        ("t,id\n", 1),
        (HEADER + "0,1,0,0,0\n", 2),
        (HEADER + "0,x,0,0,0,0\n", 2),
        (HEADER + "1,1,0,0,0,0\n1,1,0,0,0,0\n", 3),
    ],
)
def test_scenario_parse_errors(text, line):
    with pytest.raises(ParseError) as err:
        sim.parse_scenario(text)
    assert err.value.line == line


def test_write_run_outputs(tmp_path, museum_log):
    report = sim.write_run(museum_log, CFG, tmp_path)
    assert report.greets == 1
    for name in ("commands.csv", "states.csv", "report.txt", "report.csv", "config.cfg"):
        assert (tmp_path / name).exists()
    assert load_config((tmp_path / "config.cfg").read_text()) == CFG
    assert not list(tmp_path.glob(".*"))  # no temp files left behind


def test_config_changes_log_hash():
    slow = load_config("behavior.turret_gain = 1.0\n")
    scn = sim.builtin_scenario("museum_demo")
    a = sim.run_scenario(scn, CFG, 5.0)
    b = sim.run_scenario(scn, slow, 5.0)
    assert a.config_hash != b.config_hash
