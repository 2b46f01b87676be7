"""Fixed-timestep scenario simulation tying all modules together.

A scenario is a CSV of visitor keyframes::

    t_s, visitor_id, x_m, y_m, left_arm_deg, right_arm_deg

Positions are world coordinates (the base starts at the origin facing +x).
Each visitor is linearly interpolated between its own keyframes and exists
only between its first and last keyframe. Arm angles are abduction
estimates.

Each step the runner builds a perception frame (camera FoV plus laser
presence), steps the behavior engine, applies the clamped commands to the
base, waist and arms, and records the result. Time is kept as integer
microseconds so logs are byte-reproducible.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import arm as arm_mod
from .base import ActuatorRates, BaseState, BodyTwist, check_limits, integrate_odometry, inverse_kinematics
from .behavior import BehaviorState, CommandFrame, Mode, PerceptionFrame, Visitor, step as behavior_step
from .config import PlatformConfig, serialize_config
from .errors import LimitViolation, ParseError, QuoriError, ValidationError
from .sensors import laser_visible, point_in_camera_fov
from .waist import MAX_WAIST_ACCEL, MAX_WAIST_RATE, WaistPose, motor_energy, motor_torque_breakdown

SCENARIO_HEADER = ("t_s", "visitor_id", "x_m", "y_m", "left_arm_deg", "right_arm_deg")
COMMAND_HEADER = (
    "t_s", "mode", "turret_rate", "waist_target", "q_circ_L", "q_abd_L",
    "q_circ_R", "q_abd_R", "face_tag", "clamped",
)
STATE_HEADER = (
    "t_s", "x", "y", "phi", "theta_t", "waist", "waist_rate", "waist_accel", "waist_torque",
    "q_circ_L", "q_abd_L", "q_circ_R", "q_abd_R", "slip_events",
)
WAIST_TORQUE_BOUND = 3.0
ARM_TRACK_RATE = 20.0  # 1/s, motor position loop bandwidth


class InternalLimitError(QuoriError, AssertionError):
    """A clamped command still violates a limit. Indicates a bug."""


@dataclass(frozen=True)
class Keyframe:
    t: float
    x: float
    y: float
    left_arm: float
    right_arm: float


@dataclass
class Scenario:
    name: str
    tracks: dict[int, list[Keyframe]] = field(default_factory=dict)

    def visitors_at(self, t: float) -> list[tuple[int, Keyframe]]:
        out = []
        for vid in sorted(self.tracks):
            keys = self.tracks[vid]
            if not keys[0].t <= t <= keys[-1].t:
                continue
            times = [k.t for k in keys]
            i = bisect.bisect_right(times, t) - 1
            if i >= len(keys) - 1:
                out.append((vid, keys[-1]))
                continue
            a, b = keys[i], keys[i + 1]
            w = (t - a.t) / (b.t - a.t)
            out.append((vid, Keyframe(
                t,
                a.x + w * (b.x - a.x),
                a.y + w * (b.y - a.y),
                a.left_arm + w * (b.left_arm - a.left_arm),
                a.right_arm + w * (b.right_arm - a.right_arm),
            )))
        return out


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    reader = csv.reader(io.StringIO(text))
    scenario = Scenario(name)
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if not header_seen:
            if tuple(cells) != SCENARIO_HEADER:
                raise ParseError(f"expected header {','.join(SCENARIO_HEADER)}", line=lineno, source=name)
            header_seen = True
            continue
        if len(cells) != len(SCENARIO_HEADER):
            raise ParseError(f"expected {len(SCENARIO_HEADER)} columns", line=lineno, source=name)
        try:
            t, vid = float(cells[0]), int(cells[1])
            x, y, la, ra = map(float, cells[2:])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, source=name) from None
        track = scenario.tracks.setdefault(vid, [])
        if track and not t > track[-1].t:
            raise ParseError(f"visitor {vid} keyframe times must increase", line=lineno, source=name)
        track.append(Keyframe(t, x, y, math.radians(la), math.radians(ra)))
    if not header_seen and text.strip():
        raise ParseError("missing header", line=1, source=name)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def builtin_scenario(name: str) -> Scenario:
    text = resources.files("quori").joinpath(f"data/{name}.csv").read_text(encoding="utf-8")
    return parse_scenario(text, name=name)


@dataclass(frozen=True)
class StepRecord:
    t_us: int
    base: BaseState
    waist: float
    waist_rate: float
    waist_accel: float
    waist_torque: float
    arms: tuple[arm_mod.ArmState, arm_mod.ArmState]
    mode: Mode
    command: CommandFrame
    rates: ActuatorRates
    slip_events: int


@dataclass
class RunLog:
    scenario: str
    config_hash: str
    dt_us: int
    seed: int = 0
    records: list[StepRecord] = field(default_factory=list)

    @property
    def header(self) -> dict[str, str]:
        return {
            "scenario": self.scenario,
            "config_sha256": self.config_hash,
            "dt_s": _fmt_time(self.dt_us),
            "seed": str(self.seed),
            "steps": str(len(self.records)),
        }


def _fmt_time(t_us: int) -> str:
    ms, rem = divmod(t_us, 1000)
    if rem:
        return f"{t_us // 1_000_000}.{t_us % 1_000_000:06d}"
    return f"{ms // 1000}.{ms % 1000:03d}"


def _fmt(x: float) -> str:
    if x == 0:
        x = 0.0  # no "-0"
    return f"{x:.9g}"


def _to_torso_frame(px: float, py: float, base: BaseState, config: PlatformConfig) -> tuple[float, float]:
    tx, ty = base.turret_position(config.turret_offset_a)
    dx, dy = px - tx, py - ty
    psi = base.phi + base.theta_t
    c, s = math.cos(psi), math.sin(psi)
    return c * dx + s * dy, -s * dx + c * dy


def perceive(
    t: float, scenario: Scenario, base: BaseState, waist: float, config: PlatformConfig
) -> PerceptionFrame:
    beh = config.behavior
    visitors = []
    for vid, key in scenario.visitors_at(t):
        xr, yr = _to_torso_frame(key.x, key.y, base, config)
        in_fov = (
            math.hypot(xr, yr) <= beh.detection_range
            and point_in_camera_fov((xr, yr, beh.visitor_height), config.camera, waist)
        )
        seen_by_laser = laser_visible((key.x, key.y), (base.x, base.y, base.phi), config.laser).visible
        if not (in_fov or seen_by_laser):
            continue
        visitors.append(Visitor(
            vid, xr, yr,
            left_arm=(0.0, key.left_arm),
            right_arm=(0.0, key.right_arm),
            in_camera_fov=in_fov,
        ))
    return PerceptionFrame(t, tuple(visitors), turret_angle=base.theta_t)


def feasible_rates(cmd: CommandFrame, base: BaseState, config: PlatformConfig) -> tuple[ActuatorRates, bool]:
    """Actuator rates for the commanded twist, scaled down if infeasible."""
    twist = BodyTwist(cmd.base_ux, cmd.base_uy, cmd.turret_rate)
    try:
        return inverse_kinematics(twist, base, config), False
    except LimitViolation:
        pass
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        scaled = BodyTwist(twist.ux * mid, twist.uy * mid, twist.psi_dot * mid)
        try:
            inverse_kinematics(scaled, base, config)
            lo = mid
        except LimitViolation:
            hi = mid
    scaled = BodyTwist(twist.ux * lo, twist.uy * lo, twist.psi_dot * lo)
    return inverse_kinematics(scaled, base, config, check=False), True


def _waist_step(theta: float, rate: float, target: float, dt: float, config: PlatformConfig):
    """Rate- and acceleration-limited tracking toward ``target``."""
    err = target - theta
    desired = math.copysign(min(MAX_WAIST_RATE, math.sqrt(2.0 * MAX_WAIST_ACCEL * abs(err))), err)
    accel = max(-MAX_WAIST_ACCEL, min(MAX_WAIST_ACCEL, (desired - rate) / dt))
    new_rate = max(-MAX_WAIST_RATE, min(MAX_WAIST_RATE, rate + accel * dt))
    lim = config.waist_limits
    # targets are already inside the limits; this only trims round-off overshoot
    new_theta = min(max(theta + new_rate * dt, -lim.back), lim.forward)
    return new_theta, new_rate, (new_rate - rate) / dt


def _arm_step(state: arm_mod.ArmState, target, waist: float, dt: float, config: PlatformConfig):
    spec = config.transmission
    a1_t, a2_t = arm_mod.joint_to_motor(target.q_circ, target.q_abd, spec)
    tau_per_rate = spec.motor_torque_max / spec.motor_speed_max_rad
    cmd = []
    for err in (a1_t - state.alpha1, a2_t - state.alpha2):
        tau = ARM_TRACK_RATE * err * tau_per_rate
        cmd.append(max(-spec.motor_torque_max, min(spec.motor_torque_max, tau)))
    # gravity on the arm link about the circumduction axis; hanging arm is phi = pi
    phi = math.pi + state.q_circ
    torso = config.torso
    load = (torso.m_a * torso.g * torso.l_a * math.sin(waist + phi), 0.0)
    return arm_mod.step_dynamics(state, (cmd[0], cmd[1]), load, dt, spec)


def command_violations(cmd: CommandFrame, rates: ActuatorRates, config: PlatformConfig) -> list[str]:
    """Limits a logged command breaks. Empty for a valid command."""
    out = [str(v) for v in check_limits(rates, config)]
    if abs(cmd.turret_rate) > config.max_turret_rate * (1 + 1e-12):
        out.append(f"turret_rate {cmd.turret_rate:.6g}")
    lim = config.waist_limits
    if not -lim.back - 1e-12 <= cmd.waist_target <= lim.forward + 1e-12:
        out.append(f"waist_target {cmd.waist_target:.6g}")
    for side, target in (("L", cmd.left_arm), ("R", cmd.right_arm)):
        if abs(target.q_abd) > config.arm_abduction_limit + 1e-12:
            out.append(f"q_abd_{side} {target.q_abd:.6g}")
    return out


def run_scenario(
    scenario: Scenario,
    config: PlatformConfig,
    duration: float,
    dt: float | None = None,
) -> RunLog:
    """Simulate ``duration`` seconds and return the per-step log."""
    if not duration > 0:
        raise ValidationError(f"duration must be > 0, got {duration!r}", key="duration")
    dt = config.sim_dt if dt is None else dt
    dt_us = int(round(dt * 1e6))
    if dt_us <= 0 or abs(dt_us - dt * 1e6) > 1e-6:
        raise ValidationError(f"dt {dt!r} must be a whole number of microseconds", key="sim_dt")
    dt = dt_us / 1e6
    n_steps = int(round(duration * 1e6)) // dt_us

    log = RunLog(scenario.name, config.digest(), dt_us)
    base = BaseState()
    waist, waist_rate = 0.0, 0.0
    arms = (arm_mod.ArmState(), arm_mod.ArmState())
    beh_state = BehaviorState()
    for k in range(1, n_steps + 1):
        t_us = k * dt_us
        t = t_us / 1e6
        frame = perceive(t, scenario, base, waist, config)
        beh_state, cmd = behavior_step(beh_state, frame, dt, config)
        rates, scaled = feasible_rates(cmd, base, config)
        if scaled:
            cmd = _mark_clamped(cmd)
        problems = command_violations(cmd, rates, config)
        if problems:
            raise InternalLimitError(f"t={t}: clamped command still violates limits: {problems}")
        base = integrate_odometry(base, rates, dt, config)

        waist, waist_rate, waist_accel = _waist_step(waist, waist_rate, cmd.waist_target, dt, config)
        new_arms = []
        slip_events = 0
        for state, target in zip(arms, (cmd.left_arm, cmd.right_arm)):
            result = _arm_step(state, target, waist, dt, config)
            slip_events += len(result.events)
            new_arms.append(result.state)
        arms = (new_arms[0], new_arms[1])
        pose = WaistPose(
            theta_w=waist,
            phi_a=math.pi + arms[0].q_circ,
            phi_a2=math.pi + arms[1].q_circ,
            theta_w_ddot=waist_accel,
        )
        torque = motor_torque_breakdown(config.torso, pose, waist_rate, config.waist_limits).total
        log.records.append(StepRecord(
            t_us, base, waist, waist_rate, waist_accel, torque, arms,
            beh_state.mode, cmd, rates, slip_events,
        ))
    return log


def _mark_clamped(cmd: CommandFrame) -> CommandFrame:
    return replace(cmd, clamped=True)


def command_rows(log: RunLog) -> list[list[str]]:
    rows = []
    for rec in log.records:
        c = rec.command
        rows.append([
            _fmt_time(rec.t_us), str(rec.mode), _fmt(c.turret_rate), _fmt(c.waist_target),
            _fmt(c.left_arm.q_circ), _fmt(c.left_arm.q_abd),
            _fmt(c.right_arm.q_circ), _fmt(c.right_arm.q_abd),
            c.face_animation, "1" if c.clamped else "0",
        ])
    return rows


def state_rows(log: RunLog) -> list[list[str]]:
    rows = []
    for rec in log.records:
        b = rec.base.normalized()
        left, right = rec.arms
        rows.append([
            _fmt_time(rec.t_us), _fmt(b.x), _fmt(b.y), _fmt(b.phi), _fmt(b.theta_t),
            _fmt(rec.waist), _fmt(rec.waist_rate), _fmt(rec.waist_accel), _fmt(rec.waist_torque),
            _fmt(left.q_circ), _fmt(left.q_abd), _fmt(right.q_circ), _fmt(right.q_abd),
            str(rec.slip_events),
        ])
    return rows


def _csv_text(header, rows, meta: dict[str, str] | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def command_log_text(log: RunLog) -> str:
    return _csv_text(COMMAND_HEADER, command_rows(log), log.header)


def state_log_text(log: RunLog) -> str:
    return _csv_text(STATE_HEADER, state_rows(log), log.header)


@dataclass(frozen=True)
class Report:
    steps: int
    duration_s: float
    greets: int
    bows: int
    dances: int
    sleeps: int
    max_waist_torque: float
    waist_torque_bound: float
    max_turret_rate: float
    turret_rate_bound: float
    clamp_count: int
    slip_events: int
    distance_traveled: float
    waist_energy: float = 0.0
    breaches: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.breaches

    def as_rows(self) -> list[tuple[str, str]]:
        return [
            ("steps", str(self.steps)),
            ("duration_s", _fmt(self.duration_s)),
            ("greets", str(self.greets)),
            ("bows", str(self.bows)),
            ("dances", str(self.dances)),
            ("sleeps", str(self.sleeps)),
            ("max_waist_torque_Nm", _fmt(self.max_waist_torque)),
            ("waist_torque_bound_Nm", _fmt(self.waist_torque_bound)),
            ("max_turret_rate", _fmt(self.max_turret_rate)),
            ("turret_rate_bound", _fmt(self.turret_rate_bound)),
            ("clamp_count", str(self.clamp_count)),
            ("slip_events", str(self.slip_events)),
            ("distance_traveled_m", _fmt(self.distance_traveled)),
            ("waist_energy_J", _fmt(self.waist_energy)),
            ("breaches", str(len(self.breaches))),
        ]

    def text(self) -> str:
        lines = [f"{k:>22}  {v}" for k, v in self.as_rows()]
        status = "OK" if self.ok else "ASSERTION BREACH"
        lines.append(f"{'status':>22}  {status}")
        lines.extend(f"  breach: {b}" for b in self.breaches[:20])
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        return _csv_text(("metric", "value"), self.as_rows())


def emit_report(log: RunLog, config: PlatformConfig) -> Report:
    greets = bows = dances = sleeps = clamps = slips = 0
    max_torque = max_turret = distance = 0.0
    breaches = []
    prev_mode = Mode.SLEEP
    prev_xy = (0.0, 0.0)
    for rec in log.records:
        if rec.mode != prev_mode:
            greets += rec.mode is Mode.GREET
            bows += rec.mode is Mode.BOW
            dances += rec.mode is Mode.ATTRACT_DANCE
            sleeps += rec.mode is Mode.SLEEP
        prev_mode = rec.mode
        clamps += rec.command.clamped
        slips += rec.slip_events
        max_torque = max(max_torque, abs(rec.waist_torque))
        max_turret = max(max_turret, abs(rec.command.turret_rate))
        distance += math.hypot(rec.base.x - prev_xy[0], rec.base.y - prev_xy[1])
        prev_xy = (rec.base.x, rec.base.y)
        t = _fmt_time(rec.t_us)
        for problem in command_violations(rec.command, rec.rates, config):
            breaches.append(f"t={t}: {problem}")
        if abs(rec.waist_torque) > WAIST_TORQUE_BOUND:
            breaches.append(f"t={t}: waist torque {rec.waist_torque:.4g} N m > {WAIST_TORQUE_BOUND}")
    return Report(
        steps=len(log.records),
        duration_s=len(log.records) * log.dt_us / 1e6,
        greets=greets, bows=bows, dances=dances, sleeps=sleeps,
        max_waist_torque=max_torque, waist_torque_bound=WAIST_TORQUE_BOUND,
        max_turret_rate=max_turret, turret_rate_bound=config.max_turret_rate,
        clamp_count=clamps, slip_events=slips, distance_traveled=distance,
        waist_energy=motor_energy(
            [r.waist_torque for r in log.records], [r.waist_rate for r in log.records], log.dt_us / 1e6
        ),
        breaches=tuple(breaches),
    )


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_run(log: RunLog, config: PlatformConfig, out_dir: str | Path) -> Report:
    """Write commands, states, report and the config used into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = emit_report(log, config)
    _atomic_write(out / "commands.csv", command_log_text(log))
    _atomic_write(out / "states.csv", state_log_text(log))
    _atomic_write(out / "report.txt", report.text())
    _atomic_write(out / "report.csv", report.csv())
    _atomic_write(out / "config.cfg", serialize_config(config))
    return report
