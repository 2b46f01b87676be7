"""Platform parameters, the flat ``key = value`` config format, and rollups.

Every physical constant lives in :class:`PlatformConfig`. A config document
is UTF-8 text, one ``key = value`` per line, ``#`` starts a comment. Keys
not present take the defaults listed in :data:`SCHEMA`; unknown keys are an
error. Angles are written in degrees in the document (``*_deg`` keys) and
held in radians in memory.

Defaults the hardware description leaves open (wheel radius, half track,
turret offset) are sized to fit the 48 cm base.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable

from .arm import TransmissionSpec
from .behavior import BehaviorConfig
from .errors import ParseError, ValidationError
from .head import ProjectorSpec, SphereMapCalibration
from .sensors import CameraMount, LaserMount, Occluder, SpeakerSpec
from .waist import TorsoMassModel, WaistLimits

MULTI_MODULES = {"arm": 2}
DEFAULT_MASSES = (("base", 9.8), ("arm", 2.1), ("torso", 29.5), ("head", 2.0))


@dataclass(frozen=True)
class BatterySpec:
    voltage: float = 12.0
    capacity_ah: float = 40.0
    chemistry: str = "SLA-AGM"

    @property
    def energy_wh(self) -> float:
        return self.voltage * self.capacity_ah

    def validate(self) -> None:
        if not self.voltage > 0:
            raise ValidationError("battery voltage must be > 0", key="battery.voltage")
        if not self.capacity_ah > 0:
            raise ValidationError("battery capacity must be > 0", key="battery.capacity_ah")


@dataclass(frozen=True)
class PlatformConfig:
    base_diameter: float = 0.48
    wheel_radius: float = 0.05
    half_track: float = 0.15
    turret_offset_a: float = 0.10
    max_linear_speed: float = 0.6
    max_turret_rate: float = math.pi
    waist_limits: WaistLimits = WaistLimits()
    head_radius: float = 0.1
    transmission: TransmissionSpec = TransmissionSpec()
    projector: ProjectorSpec = ProjectorSpec()
    head: SphereMapCalibration = SphereMapCalibration()
    mass_table: tuple[tuple[str, float], ...] = DEFAULT_MASSES
    battery: BatterySpec = BatterySpec()
    torso: TorsoMassModel = TorsoMassModel()
    camera: CameraMount = CameraMount()
    laser: LaserMount = LaserMount()
    speaker: SpeakerSpec = SpeakerSpec()
    behavior: BehaviorConfig = BehaviorConfig()
    sim_dt: float = 0.01

    @property
    def arm_abduction_limit(self) -> float:
        return self.transmission.abduction_limit

    @property
    def arm_gear_ratio(self) -> float:
        return self.transmission.ratio_g

    @property
    def arm_motor_torque_max(self) -> float:
        return self.transmission.motor_torque_max

    @property
    def arm_motor_speed_max(self) -> float:
        return self.transmission.motor_speed_max

    @property
    def output_encoder_res(self) -> float:
        return self.transmission.output_encoder_res_deg

    @property
    def motor_encoder_res(self) -> float:
        return self.transmission.motor_encoder_res_deg

    @property
    def masses(self) -> dict[str, float]:
        return dict(self.mass_table)

    def validate(self) -> "PlatformConfig":
        for name in ("base_diameter", "wheel_radius", "half_track", "turret_offset_a",
                     "max_linear_speed", "max_turret_rate", "head_radius", "sim_dt"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)!r}", key=name)
        if self.half_track >= self.base_diameter / 2:
            raise ValidationError("wheels must fit inside the base", key="half_track")
        for module, mass in self.mass_table:
            if not mass > 0:
                raise ValidationError(f"mass of {module} must be > 0", key=f"mass.{module}")
        self.waist_limits.validate()
        self.transmission.validate()
        self.projector.validate()
        self.head.validate()
        self.battery.validate()
        self.torso.validate()
        self.camera.validate()
        self.laser.validate()
        self.speaker.validate()
        self.behavior.validate()
        return self

    def digest(self) -> str:
        return hashlib.sha256(serialize_config(self).encode("utf-8")).hexdigest()


# -- schema -------------------------------------------------------------------
# key -> (getter, setter, parser, formatter)

def _deg(getter, setter):
    # 12 significant digits keeps radians -> degrees -> radians stable
    return (lambda c: float(f"{math.degrees(getter(c)):.12g}"), lambda c, v: setter(c, math.radians(v)))


def _sub(attr: str, name: str):
    def get(c):
        return getattr(getattr(c, attr), name)

    def put(c, v):
        return replace(c, **{attr: replace(getattr(c, attr), **{name: v})})

    return get, put


def _top(name: str):
    return (lambda c: getattr(c, name), lambda c, v: replace(c, **{name: v}))


def _mass(module: str):
    def get(c):
        return dict(c.mass_table).get(module, 0.0)

    def put(c, v):
        table = dict(c.mass_table)
        table[module] = v
        return replace(c, mass_table=tuple(table.items()))

    return get, put


def _occluders():
    def get(c):
        return c.laser.occluders

    def put(c, v):
        return replace(c, laser=replace(c.laser, occluders=v))

    return get, put


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    return int(text)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_str(text: str) -> str:
    return text


def _parse_occluders(text: str) -> tuple[Occluder, ...]:
    """``bearing:width, bearing:width`` in degrees; empty for none."""
    items = [part.strip() for part in text.split(",") if part.strip()]
    result = []
    for item in items:
        bearing, width = item.split(":")
        result.append(Occluder(float(bearing), float(width)))
    return tuple(result)


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(f"{o.bearing_deg!r}:{o.width_deg!r}" for o in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    name: str
    get: Callable
    put: Callable
    parse: Callable[[str], Any]
    doc: str = ""


def _key(name, accessor, parse=_parse_float, doc=""):
    return Key(name, accessor[0], accessor[1], parse, doc)


def _build_schema() -> dict[str, Key]:
    keys = [
        _key("base_diameter", _top("base_diameter"), doc="m"),
        _key("wheel_radius", _top("wheel_radius"), doc="m"),
        _key("half_track", _top("half_track"), doc="m, wheel to axle midpoint"),
        _key("turret_offset_a", _top("turret_offset_a"), doc="m, turret axis ahead of wheel axis"),
        _key("max_linear_speed", _top("max_linear_speed"), doc="m/s"),
        _key("max_turret_rate_deg", _deg(*_top("max_turret_rate")), doc="deg/s"),
        _key("arm_abduction_limit_deg", _deg(*_sub("transmission", "abduction_limit")), doc="deg"),
        _key("waist_forward_limit_deg", _deg(*_sub("waist_limits", "forward")), doc="deg"),
        _key("waist_back_limit_deg", _deg(*_sub("waist_limits", "back")), doc="deg"),
        _key("head_radius", _top("head_radius"), doc="m"),
        _key("sim_dt", _top("sim_dt"), doc="s"),
        _key("battery.voltage", _sub("battery", "voltage"), doc="V"),
        _key("battery.capacity_ah", _sub("battery", "capacity_ah"), doc="A h"),
        _key("battery.chemistry", _sub("battery", "chemistry"), _parse_str),
    ]
    for module, _ in DEFAULT_MASSES:
        keys.append(_key(f"mass.{module}", _mass(module), doc="kg"))
    for name in ("ratio_g", "clutch_torque", "motor_torque_max", "motor_speed_max",
                 "output_encoder_res_deg", "motor_encoder_res_deg", "output_damping",
                 "slip_ring_current_a"):
        keys.append(_key(f"arm.{name}", _sub("transmission", name)))
    keys.append(_key("arm.slip_ring_wires", _sub("transmission", "slip_ring_wires"), _parse_int))
    for name in ("rated_lumens", "lifetime_hours"):
        keys.append(_key(f"projector.{name}", _sub("projector", name)))
    for name in ("width", "height"):
        keys.append(_key(f"projector.{name}", _sub("projector", name), _parse_int))
    for name in ("image_width", "image_height"):
        keys.append(_key(f"head.{name}", _sub("head", name), _parse_int))
    for name in ("center_u", "center_v", "rho_min", "rho_max"):
        keys.append(_key(f"head.{name}", _sub("head", name)))
    for name in ("theta_top", "theta_max"):
        keys.append(_key(f"head.{name}_deg", _deg(*_sub("head", name))))
    for name in ("m_ub", "l_ub", "m_a", "l_s", "l_a", "m_lb", "l_lb", "i_extra", "damper_torque", "g"):
        keys.append(_key(f"waist.{name}", _sub("torso", name)))
    for name in ("h_fov_deg", "v_fov_deg", "mount_height"):
        keys.append(_key(f"camera.{name}", _sub("camera", name)))
    keys.append(_key("camera.manual_tilt_deg", _deg(*_sub("camera", "manual_tilt"))))
    for name in ("range_max", "mount_offset", "intrinsic_fov_deg", "fov_center_deg", "base_radius"):
        keys.append(_key(f"laser.{name}", _sub("laser", name)))
    keys.append(_key("laser.occluders", _occluders(), _parse_occluders, doc="bearing:width deg, ..."))
    for name in ("reference_spl", "reference_distance"):
        keys.append(_key(f"speaker.{name}", _sub("speaker", name)))
    for name in ("greet_duration", "greet_cooldown", "bow_duration", "dance_duration", "dance_cooldown",
                 "sleep_timeout", "turret_gain", "detection_range", "visitor_height",
                 "follow_distance", "follow_gain", "follow_speed_max"):
        keys.append(_key(f"behavior.{name}", _sub("behavior", name)))
    for name in ("turret_deadband", "sleep_lean", "greet_bow", "bow_depth"):
        keys.append(_key(f"behavior.{name}_deg", _deg(*_sub("behavior", name))))
    keys.append(_key("behavior.museum_mode", _sub("behavior", "museum_mode"), _parse_bool))
    return {k.name: k for k in keys}


SCHEMA = _build_schema()


def default_config() -> PlatformConfig:
    return PlatformConfig().validate()


def load_config(text: str, source: str | None = None) -> PlatformConfig:
    """Parse a config document and validate the result.

    Raises:
        ParseError: malformed line, unknown or duplicate key, bad value.
        ValidationError: an invariant fails; ``key`` names the culprit.
    """
    config = PlatformConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno, source=source)
        name, value = (part.strip() for part in line.split("=", 1))
        if name not in SCHEMA:
            raise ParseError(f"unknown key {name!r}", line=lineno, source=source)
        if name in seen:
            raise ParseError(f"duplicate key {name!r}", line=lineno, source=source)
        seen.add(name)
        key = SCHEMA[name]
        try:
            parsed = key.parse(value)
        except ValueError as exc:
            raise ParseError(f"bad value for {name!r}: {exc}", line=lineno, source=source) from None
        config = key.put(config, parsed)
    return config.validate()


def load_config_file(path: str | Path) -> PlatformConfig:
    return load_config(Path(path).read_text(encoding="utf-8"), source=str(path))


def serialize_config(config: PlatformConfig) -> str:
    lines = ["# quori platform configuration"]
    for name, key in SCHEMA.items():
        value = key.get(config)
        comment = f"  # {key.doc}" if key.doc else ""
        lines.append(f"{name} = {_fmt(value)}{comment}")
    return "\n".join(lines) + "\n"


# -- rollups -----------------------------------------------------------------

def mass_total(config_or_table) -> float:
    """Sum of module masses; arms are fitted in pairs and count twice."""
    table = config_or_table.mass_table if isinstance(config_or_table, PlatformConfig) else config_or_table
    items = table.items() if isinstance(table, dict) else table
    return math.fsum(mass * MULTI_MODULES.get(module, 1) for module, mass in items)


BOM_HEADER = ("subsystem", "item", "qty", "unit_cost_usd", "subtotal_usd")


@dataclass(frozen=True)
class BomLine:
    subsystem: str
    item: str
    qty: int
    unit_cost_cents: int
    subtotal_cents: int

    @property
    def expected_cents(self) -> int:
        return self.qty * self.unit_cost_cents


@dataclass(frozen=True)
class BomTable:
    lines: tuple[BomLine, ...] = ()

    def __add__(self, other: "BomTable") -> "BomTable":
        return BomTable(self.lines + other.lines)

    def mismatches(self) -> list[BomLine]:
        """Lines whose printed subtotal is not qty x unit cost."""
        return [line for line in self.lines if line.subtotal_cents != line.expected_cents]


def _cents(text: str) -> int:
    try:
        value = Decimal(text.strip()) * 100
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if value != value.to_integral_value():
        raise ValueError(f"sub-cent amount: {text!r}")
    return int(value)


def parse_bom(text: str, source: str | None = None) -> BomTable:
    """Read a BOM CSV with header ``subsystem,item,qty,unit_cost_usd,subtotal_usd``.

    Blank subsystem cells inherit the previous row's subsystem.
    """
    reader = csv.reader(io.StringIO(text))
    lines = []
    subsystem = ""
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
            continue
        cells = [cell.strip() for cell in row]
        if not header_seen:
            if tuple(cells) != BOM_HEADER:
                raise ParseError(f"expected header {','.join(BOM_HEADER)}", line=lineno, source=source)
            header_seen = True
            continue
        if len(cells) != len(BOM_HEADER):
            raise ParseError(f"expected {len(BOM_HEADER)} columns, got {len(cells)}", line=lineno, source=source)
        subsystem = cells[0] or subsystem
        try:
            line = BomLine(subsystem, cells[1], int(cells[2]), _cents(cells[3]), _cents(cells[4]))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, source=source) from None
        if line.qty < 0 or line.unit_cost_cents < 0 or line.subtotal_cents < 0:
            raise ValidationError(f"negative entry on line {lineno}", key=f"line {lineno}")
        lines.append(line)
    if not header_seen:
        raise ParseError("missing header", line=1, source=source)
    return BomTable(tuple(lines))


def bom_total_cents(bom: BomTable | Iterable[BomLine]) -> int:
    lines = bom.lines if isinstance(bom, BomTable) else tuple(bom)
    for line in lines:
        if line.qty < 0 or line.unit_cost_cents < 0 or line.subtotal_cents < 0:
            raise ValidationError(f"negative BOM entry: {line.item}", key=line.item)
    return sum(line.subtotal_cents for line in lines)


def bom_total(bom: BomTable | Iterable[BomLine]) -> Decimal:
    """Total in USD as an exact decimal."""
    return Decimal(bom_total_cents(bom)) / 100


def default_bom_text() -> str:
    return resources.files("quori").joinpath("data/default_bom.csv").read_text(encoding="utf-8")


def default_bom() -> BomTable:
    return parse_bom(default_bom_text(), source="default_bom.csv")


def power_runtime(battery: BatterySpec, draw_w: float) -> float:
    """Hours of operation at a constant draw (no derating)."""
    if not draw_w > 0:
        raise ValidationError(f"draw must be > 0 W, got {draw_w!r}", key="draw")
    return battery.energy_wh / draw_w


@dataclass(frozen=True)
class PowerState:
    estop_engaged: bool = False
    motor_bus_on: bool = True
    compute_bus_on: bool = True
    projector_on: bool = True

    def enable_motors(self) -> "PowerState":
        """Re-enable the motor bus; refused while the e-stop is engaged."""
        if self.estop_engaged:
            raise ValidationError("motor bus cannot be enabled while e-stop is engaged", key="estop")
        return replace(self, motor_bus_on=True)


def apply_estop(state: PowerState, engaged: bool) -> PowerState:
    """Engage or release the emergency stop.

    The e-stop only cuts the motor bus; compute and projector stay as they
    were. Releasing it does not power the motors back on by itself.
    """
    if engaged:
        return replace(state, estop_engaged=True, motor_bus_on=False)
    return replace(state, estop_engaged=False)
