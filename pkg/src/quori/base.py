"""Kinematics of the dual-wheel caster-drive holonomic base.

The base is a differential-drive pair (motors M1/M2) carrying a powered
turret (M_T) whose rotation axis sits a distance ``a`` ahead of the wheel
axis. Velocities of the turret-axis point are expressed in the torso frame,
which rotates with the turret.

Symbols used below::

    r      wheel radius
    b      half of the track width (wheel to axis midpoint)
    a      turret axis offset from the wheel axis
    v      forward speed of the wheel-axis midpoint
    w      yaw rate of the differential-drive frame
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .errors import LimitViolation, SingularGeometryError

if TYPE_CHECKING:
    from .config import PlatformConfig

# Relative slack on limit comparisons so a command realised exactly at a
# bound survives float round-off (0.05 * 12 != 0.6).
LIMIT_RTOL = 1e-12
MIN_TURRET_OFFSET = 1e-9


def wrap_angle(angle: float) -> float:
    """Normalise an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class BaseState:
    """Pose of the differential-drive frame plus the turret angle.

    ``x``/``y`` locate the wheel-axis midpoint in the world, ``phi`` is the
    heading of the drive frame and ``theta_t`` the turret angle relative to
    it. ``theta_t`` is kept unbounded (the turret is continuous through slip
    rings); use :meth:`normalized` for reporting.
    """

    x: float = 0.0
    y: float = 0.0
    phi: float = 0.0
    theta_t: float = 0.0

    @property
    def psi(self) -> float:
        """Torso heading in the world frame."""
        return wrap_angle(self.phi + self.theta_t)

    def normalized(self) -> "BaseState":
        return replace(self, phi=wrap_angle(self.phi), theta_t=wrap_angle(self.theta_t))

    def turret_position(self, turret_offset_a: float) -> tuple[float, float]:
        return (
            self.x + turret_offset_a * math.cos(self.phi),
            self.y + turret_offset_a * math.sin(self.phi),
        )


@dataclass(frozen=True)
class ActuatorRates:
    omega_l: float = 0.0
    omega_r: float = 0.0
    omega_t: float = 0.0


@dataclass(frozen=True)
class BodyTwist:
    """Torso-frame velocity of the turret-axis point and torso yaw rate."""

    ux: float = 0.0
    uy: float = 0.0
    psi_dot: float = 0.0

    @property
    def speed(self) -> float:
        return math.hypot(self.ux, self.uy)


@dataclass(frozen=True)
class Violation:
    name: str
    value: float
    bound: float

    @property
    def margin(self) -> float:
        """How far past the bound the value is (positive = violated)."""
        return abs(self.value) - self.bound

    def __str__(self) -> str:
        return f"{self.name}: |{self.value:.6g}| > {self.bound:.6g} (over by {self.margin:.3g})"


def _exceeds(value: float, bound: float) -> bool:
    return abs(value) > bound * (1.0 + LIMIT_RTOL)


def drive_velocities(rates: ActuatorRates, config: PlatformConfig) -> tuple[float, float]:
    """Return ``(v, w)`` of the differential-drive frame."""
    r = config.wheel_radius
    b = config.half_track
    v = r * (rates.omega_r + rates.omega_l) / 2.0
    w = r * (rates.omega_r - rates.omega_l) / (2.0 * b)
    return v, w


def forward_kinematics(rates: ActuatorRates, state: BaseState, config: PlatformConfig) -> BodyTwist:
    """Map wheel and turret rates to the torso-frame twist."""
    v, w = drive_velocities(rates, config)
    # turret-axis point velocity in the drive frame
    vx, vy = v, config.turret_offset_a * w
    c, s = math.cos(state.theta_t), math.sin(state.theta_t)
    return BodyTwist(ux=c * vx + s * vy, uy=-s * vx + c * vy, psi_dot=w + rates.omega_t)


def check_limits(rates: ActuatorRates, config: PlatformConfig) -> list[Violation]:
    """List every actuator bound the rates exceed. Empty means feasible."""
    report = []
    wheel_bound = config.max_linear_speed / config.wheel_radius
    if _exceeds(rates.omega_l, wheel_bound):
        report.append(Violation("omega_l", rates.omega_l, wheel_bound))
    if _exceeds(rates.omega_r, wheel_bound):
        report.append(Violation("omega_r", rates.omega_r, wheel_bound))
    if _exceeds(rates.omega_t, config.max_turret_rate):
        report.append(Violation("omega_t", rates.omega_t, config.max_turret_rate))
    return report


def check_twist(twist: BodyTwist, config: PlatformConfig) -> list[Violation]:
    report = []
    if _exceeds(twist.speed, config.max_linear_speed):
        report.append(Violation("linear_speed", twist.speed, config.max_linear_speed))
    return report


def inverse_kinematics(
    twist: BodyTwist,
    state: BaseState,
    config: PlatformConfig,
    check: bool = True,
) -> ActuatorRates:
    """Solve for the actuator rates that realise ``twist``.

    Raises:
        SingularGeometryError: if the turret offset is zero, so the lateral
            velocity component cannot be produced.
        LimitViolation: if ``check`` is set and the twist or the resulting
            rates exceed platform limits. Nothing is clamped.
    """
    a = config.turret_offset_a
    if not a > MIN_TURRET_OFFSET:
        raise SingularGeometryError(
            f"turret_offset_a={a!r}: lateral motion unreachable", key="turret_offset_a"
        )
    c, s = math.cos(state.theta_t), math.sin(state.theta_t)
    vx = c * twist.ux - s * twist.uy
    vy = s * twist.ux + c * twist.uy
    w = vy / a
    r, b = config.wheel_radius, config.half_track
    rates = ActuatorRates(
        omega_l=(vx - b * w) / r,
        omega_r=(vx + b * w) / r,
        omega_t=twist.psi_dot - w,
    )
    if check:
        violations = check_twist(twist, config) + check_limits(rates, config)
        if violations:
            raise LimitViolation(
                "twist exceeds limits: " + "; ".join(map(str, violations)), violations
            )
    return rates


def integrate_odometry(
    state: BaseState, rates: ActuatorRates, dt: float, config: PlatformConfig
) -> BaseState:
    """Advance the base pose by one midpoint (second-order) step.

    The straight-line case reduces to the exact solution, so no special
    handling of ``w == 0`` is needed.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    v, w = drive_velocities(rates, config)
    heading_mid = state.phi + 0.5 * w * dt
    return BaseState(
        x=state.x + v * math.cos(heading_mid) * dt,
        y=state.y + v * math.sin(heading_mid) * dt,
        phi=wrap_angle(state.phi + w * dt),
        theta_t=state.theta_t + rates.omega_t * dt,
    )
