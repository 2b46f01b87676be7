"""Deterministic interaction state machine for the museum deployment.

Modes::

    Sleep         nobody around: torso centred and leaning, arms hanging,
                  face shows a loading animation
    Greet         wave at a visitor who just entered the camera FoV
    Bow           short acknowledging bow for a visitor whose greeting is
                  still on cooldown
    MirrorTrack   follow the closest visitor with the turret and mirror
                  their arm movements
    AttractDance  visitors nearby but outside the camera FoV; dance to draw
                  them in

The transition set is a modelled interpretation of an exhibit robot, not
a measured controller; every timing is a config key.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from .base import wrap_angle
from .errors import ValidationError

if TYPE_CHECKING:
    from .config import PlatformConfig


class Mode(str, enum.Enum):
    SLEEP = "Sleep"
    GREET = "Greet"
    ATTRACT_DANCE = "AttractDance"
    BOW = "Bow"
    MIRROR_TRACK = "MirrorTrack"

    def __str__(self) -> str:
        return self.value


ENGAGED_MODES = frozenset({Mode.GREET, Mode.BOW, Mode.MIRROR_TRACK})


@dataclass(frozen=True)
class BehaviorConfig:
    greet_duration: float = 3.0
    greet_cooldown: float = 30.0
    bow_duration: float = 2.0
    dance_duration: float = 6.0
    dance_cooldown: float = 60.0
    sleep_timeout: float = 20.0
    turret_deadband: float = math.radians(2.0)
    turret_gain: float = 2.0
    sleep_lean: float = math.radians(15.0)
    greet_bow: float = math.radians(20.0)
    bow_depth: float = math.radians(25.0)
    detection_range: float = 5.0
    visitor_height: float = 1.0
    museum_mode: bool = True
    follow_distance: float = 1.2
    follow_gain: float = 0.5
    follow_speed_max: float = 0.3

    def validate(self) -> None:
        for name in ("greet_duration", "bow_duration", "dance_duration", "sleep_timeout", "turret_gain"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0", key=f"behavior.{name}")
        for name in ("greet_cooldown", "dance_cooldown", "turret_deadband"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0", key=f"behavior.{name}")
        # timed modes must finish before the sleep timeout so Sleep stays reachable
        for name in ("greet_duration", "bow_duration", "dance_duration"):
            if getattr(self, name) > self.sleep_timeout:
                raise ValidationError(f"{name} exceeds sleep_timeout", key=f"behavior.{name}")


@dataclass(frozen=True)
class Visitor:
    """One tracked person, position in the torso frame.

    Arm angles are ``(flexion, abduction)`` estimates in radians.
    """

    id: int
    x: float
    y: float
    left_arm: tuple[float, float] = (0.0, 0.0)
    right_arm: tuple[float, float] = (0.0, 0.0)
    in_camera_fov: bool = True

    @property
    def range(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class PerceptionFrame:
    timestamp: float
    visitors: tuple[Visitor, ...] = ()
    turret_angle: float = 0.0

    def __post_init__(self):
        ids = [v.id for v in self.visitors]
        if len(ids) != len(set(ids)):
            raise ValidationError(f"duplicate visitor ids in frame at t={self.timestamp}", key="visitors")

    def visitor(self, vid: int | None) -> Visitor | None:
        for v in self.visitors:
            if v.id == vid:
                return v
        return None


@dataclass(frozen=True)
class BehaviorState:
    mode: Mode = Mode.SLEEP
    engaged_visitor: int | None = None
    cooldowns: tuple[tuple[str, float], ...] = ()
    last_seen: float | None = None
    mode_since: float = 0.0
    last_time: float | None = None

    def cooldown(self, action: str) -> float | None:
        for name, expiry in self.cooldowns:
            if name == action:
                return expiry
        return None

    def ready(self, action: str, t: float) -> bool:
        expiry = self.cooldown(action)
        return expiry is None or t >= expiry


@dataclass(frozen=True)
class ArmTarget:
    q_circ: float = 0.0
    q_abd: float = 0.0


@dataclass(frozen=True)
class CommandFrame:
    turret_rate: float = 0.0
    waist_target: float = 0.0
    left_arm: ArmTarget = ArmTarget()
    right_arm: ArmTarget = ArmTarget()
    face_animation: str = "neutral"
    base_ux: float = 0.0
    base_uy: float = 0.0
    clamped: bool = False


def greet_key(vid: int) -> str:
    return f"greet:{vid}"


DANCE_KEY = "dance"


def select_target(frame: PerceptionFrame) -> int | None:
    """Closest visitor in the camera FoV; ties go to the lower id."""
    candidates = [v for v in frame.visitors if v.in_camera_fov]
    if not candidates:
        return None
    return min(candidates, key=lambda v: (v.range, v.id)).id


def _clamp(value: float, bound: float) -> tuple[float, bool]:
    if value > bound:
        return bound, True
    if value < -bound:
        return -bound, True
    return value, False


def mirror_map(
    left_arm: tuple[float, float],
    right_arm: tuple[float, float],
    config: PlatformConfig,
) -> tuple[ArmTarget, ArmTarget, bool]:
    """Mirror a visitor's arms onto the robot.

    The visitor's left arm drives the robot's right arm and vice versa.
    Flexion becomes the circumduction target; abduction is clamped into the
    shoulder range.

    Returns ``(robot_left, robot_right, clamped)``.
    """
    limit = config.arm_abduction_limit
    abd_r, c_r = _clamp(left_arm[1], limit)
    abd_l, c_l = _clamp(right_arm[1], limit)
    robot_left = ArmTarget(q_circ=right_arm[0], q_abd=abd_l)
    robot_right = ArmTarget(q_circ=left_arm[0], q_abd=abd_r)
    return robot_left, robot_right, c_l or c_r


def track_turret(target: tuple[float, float] | None, config: PlatformConfig) -> float:
    """Proportional turret rate toward ``target`` (torso frame).

    Saturates at the turret rate limit and is zero inside the deadband.
    """
    if target is None:
        return 0.0
    bearing = math.atan2(target[1], target[0])
    return _bearing_rate(bearing, config)


def _bearing_rate(bearing: float, config: PlatformConfig) -> float:
    beh = config.behavior
    if abs(bearing) <= beh.turret_deadband:
        return 0.0
    rate = beh.turret_gain * bearing
    return max(-config.max_turret_rate, min(config.max_turret_rate, rate))


def _enter(state: BehaviorState, mode: Mode, t: float, engaged: int | None) -> BehaviorState:
    return replace(state, mode=mode, mode_since=t, engaged_visitor=engaged if mode in ENGAGED_MODES else None)


def _set_cooldown(state: BehaviorState, action: str, expiry: float, t: float) -> BehaviorState:
    kept = tuple((k, e) for k, e in state.cooldowns if k != action and e > t)
    return replace(state, cooldowns=tuple(sorted(kept + ((action, expiry),))))


def transition(state: BehaviorState, frame: PerceptionFrame, config: PlatformConfig) -> BehaviorState:
    """Apply the mode transition rules for one perception frame."""
    beh = config.behavior
    t = frame.timestamp
    if state.last_time is not None and not t > state.last_time:
        raise ValidationError(
            f"timestamp {t!r} does not advance past {state.last_time!r}", key="timestamp"
        )
    target = select_target(frame)
    new = replace(state, last_time=t)
    if target is not None:
        new = replace(new, last_seen=t)
    elapsed = t - state.mode_since
    present = any(v.range <= beh.detection_range for v in frame.visitors)

    def greet(vid: int) -> BehaviorState:
        entered = _enter(new, Mode.GREET, t, vid)
        return _set_cooldown(entered, greet_key(vid), t + beh.greet_cooldown, t)

    def dance() -> BehaviorState:
        entered = _enter(new, Mode.ATTRACT_DANCE, t, None)
        return _set_cooldown(entered, DANCE_KEY, t + beh.dance_cooldown, t)

    mode = state.mode
    if mode is Mode.GREET:
        if elapsed >= beh.greet_duration:
            return _enter(new, Mode.MIRROR_TRACK, t, state.engaged_visitor)
        return new
    if mode is Mode.BOW:
        if elapsed >= beh.bow_duration:
            return _enter(new, Mode.MIRROR_TRACK, t, state.engaged_visitor)
        return new
    if mode is Mode.ATTRACT_DANCE:
        if target is not None and state.ready(greet_key(target), t):
            return greet(target)
        if elapsed >= beh.dance_duration:
            return _enter(new, Mode.SLEEP, t, None)
        return new
    if mode is Mode.SLEEP:
        if target is not None:
            if state.ready(greet_key(target), t):
                return greet(target)
            return _enter(new, Mode.BOW, t, target)
        if present and state.ready(DANCE_KEY, t):
            return dance()
        return new
    # MirrorTrack
    if target is not None:
        if target != state.engaged_visitor:
            if state.ready(greet_key(target), t):
                return greet(target)
            return replace(new, engaged_visitor=target)
        return new
    if state.last_seen is None or t - state.last_seen >= beh.sleep_timeout:
        return _enter(new, Mode.SLEEP, t, None)
    return new


def _pose_commands(state: BehaviorState, frame: PerceptionFrame, config: PlatformConfig) -> CommandFrame:
    beh = config.behavior
    t_in = frame.timestamp - state.mode_since
    engaged = frame.visitor(state.engaged_visitor)
    target_xy = (engaged.x, engaged.y) if engaged is not None and engaged.in_camera_fov else None
    mode = state.mode
    if mode is Mode.SLEEP:
        # rotate the torso back to centre
        return CommandFrame(
            turret_rate=_bearing_rate(-wrap_angle(frame.turret_angle), config),
            waist_target=beh.sleep_lean,
            face_animation="loading",
        )
    if mode is Mode.GREET:
        phase = min(t_in / beh.greet_duration, 1.0)
        wave = math.radians(60.0) + math.radians(10.0) * math.sin(2.0 * math.pi * 1.5 * t_in)
        return CommandFrame(
            turret_rate=track_turret(target_xy, config),
            waist_target=beh.greet_bow * math.sin(math.pi * phase),
            right_arm=ArmTarget(0.0, wave),
            face_animation="wave",
        )
    if mode is Mode.BOW:
        phase = min(t_in / beh.bow_duration, 1.0)
        return CommandFrame(
            turret_rate=track_turret(target_xy, config),
            waist_target=beh.bow_depth * math.sin(math.pi * phase),
            face_animation="smile",
        )
    if mode is Mode.ATTRACT_DANCE:
        swing = math.sin(2.0 * math.pi * 0.5 * t_in)
        return CommandFrame(
            turret_rate=0.5 * math.pi * math.sin(2.0 * math.pi * 0.25 * t_in),
            waist_target=math.radians(8.0) * swing,
            left_arm=ArmTarget(math.radians(30.0) * swing, math.radians(40.0) + math.radians(20.0) * swing),
            right_arm=ArmTarget(-math.radians(30.0) * swing, math.radians(40.0) - math.radians(20.0) * swing),
            face_animation="dance",
        )
    # MirrorTrack
    if engaged is not None and engaged.in_camera_fov:
        left, right, clamped = mirror_map(engaged.left_arm, engaged.right_arm, config)
    else:
        left, right, clamped = ArmTarget(), ArmTarget(), False
    ux = 0.0
    if not beh.museum_mode and target_xy is not None:
        ux = beh.follow_gain * (math.hypot(*target_xy) - beh.follow_distance)
        ux = max(-beh.follow_speed_max, min(beh.follow_speed_max, ux))
    return CommandFrame(
        turret_rate=track_turret(target_xy, config),
        left_arm=left,
        right_arm=right,
        face_animation="attentive",
        base_ux=ux,
        clamped=clamped,
    )


def clamp_command(cmd: CommandFrame, config: PlatformConfig) -> CommandFrame:
    """Force every field inside platform limits, flagging any change."""
    turret, c1 = _clamp(cmd.turret_rate, config.max_turret_rate)
    waist = min(max(cmd.waist_target, -config.waist_limits.back), config.waist_limits.forward)
    c2 = waist != cmd.waist_target
    limit = config.arm_abduction_limit
    l_abd, c3 = _clamp(cmd.left_arm.q_abd, limit)
    r_abd, c4 = _clamp(cmd.right_arm.q_abd, limit)
    speed = math.hypot(cmd.base_ux, cmd.base_uy)
    ux, uy, c5 = cmd.base_ux, cmd.base_uy, False
    if speed > config.max_linear_speed:
        scale = config.max_linear_speed / speed
        ux, uy, c5 = ux * scale, uy * scale, True
    return replace(
        cmd,
        turret_rate=turret,
        waist_target=waist,
        left_arm=ArmTarget(cmd.left_arm.q_circ, l_abd),
        right_arm=ArmTarget(cmd.right_arm.q_circ, r_abd),
        base_ux=ux,
        base_uy=uy,
        clamped=cmd.clamped or c1 or c2 or c3 or c4 or c5,
    )


def step(
    state: BehaviorState, frame: PerceptionFrame, dt: float, config: PlatformConfig
) -> tuple[BehaviorState, CommandFrame]:
    """Advance the state machine by one frame and emit clamped commands.

    ``dt`` is the nominal frame period; transitions use frame timestamps.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}", key="dt")
    new_state = transition(state, frame, config)
    return new_state, clamp_command(_pose_commands(new_state, frame, config), config)
