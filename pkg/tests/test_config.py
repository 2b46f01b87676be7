import math
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quori import config as cfgmod
from quori.config import (
    BOM_HEADER,
    BatterySpec,
    PowerState,
    apply_estop,
    bom_total,
    default_bom,
    default_config,
    load_config,
    mass_total,
    parse_bom,
    power_runtime,
    serialize_config,
)
from quori.errors import ParseError, ValidationError


def test_defaults_validate():
    cfg = default_config()
    assert cfg.max_turret_rate == math.pi
    assert cfg.arm_abduction_limit == pytest.approx(math.radians(70))
    assert cfg.battery.energy_wh == 480.0


def test_serialize_round_trip():
    cfg = default_config()
    assert load_config(serialize_config(cfg)) == cfg
    assert serialize_config(load_config(serialize_config(cfg))) == serialize_config(cfg)


@given(
    speed=st.floats(0.1, 2.0),
    tilt=st.floats(-25.0, 25.0),
    fwd=st.floats(1.0, 45.0),
)
def test_round_trip_of_edited_values(speed, tilt, fwd):
    text = f"max_linear_speed = {speed!r}\ncamera.manual_tilt_deg = {tilt!r}\nwaist_forward_limit_deg = {fwd!r}\n"
    cfg = load_config(text)
    again = load_config(serialize_config(cfg))
    assert serialize_config(again) == serialize_config(cfg)
    assert again.max_linear_speed == speed


def test_comments_and_blank_lines():
    cfg = load_config("# hello\n\nmax_linear_speed = 0.5  # slower\n")
    assert cfg.max_linear_speed == 0.5


@pytest.mark.parametrize(
    "text, line",
    [
        ("nonsense\n", 1),
        ("\nunknown_key = 3\n", 2),
        ("max_linear_speed = 0.5\nmax_linear_speed = 0.4\n", 2),
        ("max_linear_speed = fast\n", 1),
        ("behavior.museum_mode = maybe\n", 1),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        load_config(text, source="x.cfg")
    assert err.value.line == line


@pytest.mark.parametrize(
    "text, key",
    [
        ("max_linear_speed = -1\n", "max_linear_speed"),
        ("mass.arm = 0\n", "mass.arm"),
        ("camera.manual_tilt_deg = 40\n", "camera.manual_tilt_deg"),
        ("behavior.greet_duration = 30\n", "behavior.greet_duration"),
    ],
)
def test_validation_errors_carry_key(text, key):
    with pytest.raises(ValidationError) as err:
        load_config(text)
    assert err.value.key == key


def test_digest_tracks_content():
    a = default_config()
    b = load_config("max_linear_speed = 0.5\n")
    assert a.digest() != b.digest()
    assert a.digest() == default_config().digest()


def test_mass_rollup_counts_arms_twice():
    assert mass_total({"base": 1.0, "arm": 2.0}) == 5.0
    assert mass_total(default_config()) == 45.5


def test_default_bom_lines_and_mismatches():
    bom = default_bom()
    assert bom_total(bom) == Decimal("6320")
    items = {line.item for line in bom.mismatches()}
    assert items == {"Structure", "Painted Globe"}


def _bom(rows):
    return ",".join(BOM_HEADER) + "\n" + "\n".join(rows) + "\n"


def test_bom_blank_subsystem_inherits():
    bom = parse_bom(_bom(["Arms,Motor,2,10.50,21.00", ",Clutch,1,0.25,0.25"]))
    assert [line.subsystem for line in bom.lines] == ["Arms", "Arms"]
    assert bom_total(bom) == Decimal("21.25")


def test_bom_sum_is_additive():
    a = parse_bom(_bom(["A,x,1,1.10,1.10"]))
    b = parse_bom(_bom(["B,y,3,0.10,0.30"]))
    assert bom_total(a + b) == bom_total(a) + bom_total(b) == Decimal("1.40")


def test_bom_negative_rejected():
    with pytest.raises(ValidationError):
        parse_bom(_bom(["A,x,-1,1.00,1.00"]))


@pytest.mark.parametrize("rows", [["A,x,1,abc,1"], ["A,x,1"], ["A,x,1,0.001,0.001"]])
def test_bom_malformed_rows(rows):
    with pytest.raises(ParseError):
        parse_bom(_bom(rows))


def test_bom_missing_header():
    with pytest.raises(ParseError):
        parse_bom("A,x,1,1,1\n")


def test_power_runtime():
    assert power_runtime(BatterySpec(), 120.0) == 4.0
    with pytest.raises(ValidationError):
        power_runtime(BatterySpec(), 0.0)


def test_estop_cuts_only_motor_bus():
    state = apply_estop(PowerState(), True)
    assert not state.motor_bus_on
    assert state.compute_bus_on and state.projector_on
    with pytest.raises(ValidationError):
        state.enable_motors()
    released = apply_estop(state, False)
    assert not released.motor_bus_on
    assert released.enable_motors().motor_bus_on


def test_schema_keys_documented_in_dump():
    text = serialize_config(default_config())
    for name in cfgmod.SCHEMA:
        assert f"\n{name} = " in text
