"""Gravity and inertia torque model of the one-DoF waist.

The upper body is lumped into point masses about the waist pivot::

    m_ub   upper body (head, arm transmissions) at l_ub above the pivot
    m_a    each arm link, at l_a from a shoulder that sits l_s above the pivot
    m_lb   battery plus counter masses, at l_lb below the pivot

``theta_w`` is positive when bowing forward and ``phi_a`` is the sagittal
arm flexion. A positive torque is what the motor must supply to stop the
torso falling forward.

The shipped lever arms and lumped masses are a calibration, not a
measurement: they are chosen so the uncompensated torso needs about 16 N m
at full bow and the battery plus 6 kg brings the peak under 2 N m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleError, ValidationError

GRAVITY = 9.81
BATTERY_MASS = 12.0
COUNTER_MASS_LEVER = 0.165
MAX_WAIST_RATE = 1.0
MAX_WAIST_ACCEL = 1.0
_EPS = 1e-12


@dataclass(frozen=True)
class WaistLimits:
    forward: float = math.radians(30.0)
    back: float = math.radians(15.0)

    def contains(self, theta_w: float) -> bool:
        return -self.back - _EPS <= theta_w <= self.forward + _EPS

    def validate(self) -> None:
        if not self.forward > 0:
            raise ValidationError("waist forward limit must be > 0", key="waist_forward_limit_deg")
        if not self.back > 0:
            raise ValidationError("waist back limit must be > 0", key="waist_back_limit_deg")


@dataclass(frozen=True)
class TorsoMassModel:
    m_ub: float = 15.0
    l_ub: float = 0.18
    m_a: float = 0.5
    l_s: float = 0.25
    l_a: float = 0.15
    m_lb: float = BATTERY_MASS + 6.0
    l_lb: float = COUNTER_MASS_LEVER
    i_extra: float = 0.0
    damper_torque: float = 0.2
    g: float = GRAVITY

    def validate(self) -> None:
        for name in ("m_ub", "l_ub", "m_a", "l_s", "l_a", "m_lb", "l_lb", "i_extra", "damper_torque"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0", key=f"waist.{name}")

    @property
    def net_moment(self) -> float:
        """First moment (kg m) that tips the torso with ``sin(theta_w)``."""
        return self.m_ub * self.l_ub + 2.0 * self.m_a * self.l_s - self.m_lb * self.l_lb

    @property
    def arm_moment(self) -> float:
        """First moment of both arm links about their shoulders."""
        return 2.0 * self.m_a * self.l_a

    def uncompensated(self) -> "TorsoMassModel":
        return replace(self, m_lb=0.0)

    def with_lower_mass(self, mass: float, lever: float) -> "TorsoMassModel":
        return replace(self, m_lb=mass, l_lb=lever)

    def add_mass(self, mass: float, lever: float) -> "TorsoMassModel":
        """Add ``mass`` below the pivot at ``lever``, merged into one point."""
        total = self.m_lb + mass
        if total <= 0:
            return replace(self, m_lb=0.0)
        return replace(self, m_lb=total, l_lb=(self.m_lb * self.l_lb + mass * lever) / total)


def default_model() -> TorsoMassModel:
    """Compensated model: battery plus 6 kg of counter mass."""
    return TorsoMassModel()


def uncompensated_model() -> TorsoMassModel:
    return TorsoMassModel().uncompensated()


def battery_only_model() -> TorsoMassModel:
    return TorsoMassModel().with_lower_mass(BATTERY_MASS, COUNTER_MASS_LEVER)


@dataclass(frozen=True)
class WaistPose:
    """Waist angle, arm flexion and waist angular acceleration.

    ``phi_a2`` gives the second arm its own flexion; left as ``None`` both
    arms share ``phi_a``.
    """

    theta_w: float = 0.0
    phi_a: float = 0.0
    theta_w_ddot: float = 0.0
    phi_a2: float | None = None

    @property
    def arm_angles(self) -> tuple[float, float]:
        return (self.phi_a, self.phi_a if self.phi_a2 is None else self.phi_a2)


def _check_pose(pose: WaistPose, limits: WaistLimits) -> None:
    if not limits.contains(pose.theta_w):
        raise ValidationError(
            f"theta_w={math.degrees(pose.theta_w):.3f} deg outside "
            f"[-{math.degrees(limits.back):g}, {math.degrees(limits.forward):g}] deg",
            key="theta_w",
        )


def holding_torque(model: TorsoMassModel, pose: WaistPose, limits: WaistLimits = WaistLimits()) -> float:
    """Static torque needed to hold ``pose`` against gravity."""
    _check_pose(pose, limits)
    th = pose.theta_w
    phi1, phi2 = pose.arm_angles
    arms = model.m_a * model.l_a * (math.sin(th + phi1) + math.sin(th + phi2))
    return model.g * (model.net_moment * math.sin(th) + arms)


def holding_torque_grid(model: TorsoMassModel, theta_w, phi_a) -> np.ndarray:
    """Vectorised holding torque (no limit checks) for array inputs."""
    theta_w = np.asarray(theta_w, dtype=float)
    phi_a = np.asarray(phi_a, dtype=float)
    return model.g * (
        model.net_moment * np.sin(theta_w) + model.arm_moment * np.sin(theta_w + phi_a)
    )


def worst_arm_angle(model: TorsoMassModel, theta_w: float) -> float:
    """Arm flexion that maximises ``|holding_torque|`` at ``theta_w``.

    The arm term adds the most when it has the same sign as the body term:
    ``90 deg - theta_w`` when the body tips forward, ``270 deg - theta_w``
    when it tips back.
    """
    body = model.net_moment * math.sin(theta_w)
    target = 0.5 * math.pi if body >= 0 else 1.5 * math.pi
    return (target - theta_w) % (2.0 * math.pi)


def peak_holding_torque(
    model: TorsoMassModel, limits: WaistLimits = WaistLimits()
) -> tuple[float, WaistPose]:
    """Largest ``|holding_torque|`` over the waist range and every arm angle.

    For fixed ``theta_w`` the arm maximum is ``g * (|N sin| + 2 m_a l_a)``,
    which peaks where ``|sin(theta_w)|`` does, i.e. at one of the two limits.
    """
    best = None
    for theta in (limits.forward, -limits.back):
        phi = worst_arm_angle(model, theta)
        pose = WaistPose(theta_w=theta, phi_a=phi)
        value = abs(holding_torque(model, pose, limits))
        if best is None or value > best[0]:
            best = (value, pose)
    return best


def sweep_peak(
    model: TorsoMassModel, limits: WaistLimits = WaistLimits(), step_deg: float = 0.5
) -> tuple[float, WaistPose]:
    """Brute-force peak over a fixed ``theta_w`` x ``phi_a`` grid."""
    thetas = np.radians(_grid(-math.degrees(limits.back), math.degrees(limits.forward), step_deg))
    phis = np.radians(np.arange(0.0, 360.0, step_deg))
    torque = np.abs(holding_torque_grid(model, thetas[:, None], phis[None, :]))
    i, j = np.unravel_index(int(np.argmax(torque)), torque.shape)
    return float(torque[i, j]), WaistPose(theta_w=float(thetas[i]), phi_a=float(phis[j]))


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def inertia_about_pivot(model: TorsoMassModel, pose: WaistPose) -> float:
    """Point-mass rotational inertia of the torso about the waist pivot."""
    inertia = model.m_ub * model.l_ub**2 + model.m_lb * model.l_lb**2 + model.i_extra
    for phi in pose.arm_angles:
        # shoulder -> arm angle is phi, so the law of cosines gives the radius
        r2 = model.l_s**2 + model.l_a**2 + 2.0 * model.l_s * model.l_a * math.cos(phi)
        inertia += model.m_a * r2
    return inertia


@dataclass(frozen=True)
class TorqueBreakdown:
    holding: float
    inertial: float
    damper: float

    @property
    def total(self) -> float:
        return self.holding + self.inertial + self.damper


def motor_torque_breakdown(
    model: TorsoMassModel,
    pose: WaistPose,
    theta_w_dot: float,
    limits: WaistLimits = WaistLimits(),
) -> TorqueBreakdown:
    if abs(theta_w_dot) > MAX_WAIST_RATE + _EPS:
        raise ValidationError(f"|theta_w_dot|={abs(theta_w_dot):.4g} > {MAX_WAIST_RATE} rad/s", key="theta_w_dot")
    if abs(pose.theta_w_ddot) > MAX_WAIST_ACCEL + _EPS:
        raise ValidationError(
            f"|theta_w_ddot|={abs(pose.theta_w_ddot):.4g} > {MAX_WAIST_ACCEL} rad/s^2", key="theta_w_ddot"
        )
    holding = holding_torque(model, pose, limits)
    inertial = inertia_about_pivot(model, pose) * pose.theta_w_ddot
    damper = model.damper_torque * float(np.sign(theta_w_dot))
    return TorqueBreakdown(holding, inertial, damper)


def total_motor_torque(
    model: TorsoMassModel,
    pose: WaistPose,
    theta_w_dot: float,
    limits: WaistLimits = WaistLimits(),
) -> float:
    """Holding + inertial + Coulomb damper torque at the waist motor."""
    return motor_torque_breakdown(model, pose, theta_w_dot, limits).total


def peak_total_torque(
    model: TorsoMassModel, limits: WaistLimits = WaistLimits(), step_deg: float = 0.5
) -> float:
    """Worst ``|total_motor_torque|`` over the pose grid with unit acceleration.

    Inertia and damper are taken in whichever direction adds to the holding
    torque, which bounds every admissible rate/acceleration.
    """
    thetas = np.radians(_grid(-math.degrees(limits.back), math.degrees(limits.forward), step_deg))
    phis = np.radians(np.arange(0.0, 360.0, step_deg))
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    hold = np.abs(holding_torque_grid(model, th, ph))
    r2 = model.l_s**2 + model.l_a**2 + 2.0 * model.l_s * model.l_a * np.cos(ph)
    inertia = model.m_ub * model.l_ub**2 + model.m_lb * model.l_lb**2 + model.i_extra + 2.0 * model.m_a * r2
    return float(np.max(hold + inertia * MAX_WAIST_ACCEL + model.damper_torque))


def tune_counter_mass(
    model: TorsoMassModel,
    target_peak: float,
    lever: float = COUNTER_MASS_LEVER,
    limits: WaistLimits = WaistLimits(),
    tol: float = 1e-9,
) -> float:
    """Smallest mass added at ``lever`` that brings the peak to ``target_peak``.

    Bisects on the added mass between zero and the balance point, where the
    peak is non-increasing.

    Raises:
        InfeasibleError: when even a perfectly balanced torso exceeds the
            target (the arm term does not depend on the counter mass).
    """
    if lever <= 0:
        raise ValidationError("lever must be > 0", key="lever")

    def peak(mass: float) -> float:
        return peak_holding_torque(model.add_mass(mass, lever), limits)[0]

    if peak(0.0) <= target_peak:
        return 0.0
    balance = model.net_moment / lever
    if balance <= 0 or peak(balance) > target_peak:
        floor, pose = peak_holding_torque(model.add_mass(max(balance, 0.0), lever), limits)
        raise InfeasibleError(
            f"target {target_peak:.4g} N m unreachable: best achievable peak is {floor:.4g} N m "
            f"at theta_w={math.degrees(pose.theta_w):.2f} deg, phi_a={math.degrees(pose.phi_a):.2f} deg",
            limiting_pose=pose,
        )
    lo, hi = 0.0, balance
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if peak(mid) <= target_peak:
            hi = mid
        else:
            lo = mid
    return hi


def sweep_curve(
    model: TorsoMassModel, theta_w: float, step_deg: float = 5.0
) -> list[tuple[float, float]]:
    """Holding torque against arm flexion at a fixed waist angle."""
    phis = np.arange(0.0, 360.0 + 0.5 * step_deg, step_deg)
    torque = holding_torque_grid(model, theta_w, np.radians(phis))
    return [(float(p), float(t)) for p, t in zip(phis, torque)]


def holding_torque_gradient(model: TorsoMassModel, pose: WaistPose) -> dict[str, float]:
    """Analytic partial derivatives of :func:`holding_torque`.

    Keys are the mass-model parameters plus ``theta_w``; the torque is
    linear in every mass, so those entries do not depend on the masses.
    """
    th = pose.theta_w
    phi1, phi2 = pose.arm_angles
    s, g = math.sin(th), model.g
    arm_sin = math.sin(th + phi1) + math.sin(th + phi2)
    arm_cos = math.cos(th + phi1) + math.cos(th + phi2)
    return {
        "m_ub": g * model.l_ub * s,
        "l_ub": g * model.m_ub * s,
        "m_a": g * (2.0 * model.l_s * s + model.l_a * arm_sin),
        "l_s": g * 2.0 * model.m_a * s,
        "l_a": g * model.m_a * arm_sin,
        "m_lb": -g * model.l_lb * s,
        "l_lb": -g * model.m_lb * s,
        "theta_w": g * (model.net_moment * math.cos(th) + model.m_a * model.l_a * arm_cos),
    }


def motor_energy(torques, rates, dt: float) -> float:
    """Mechanical work done by the waist motor over a sampled trajectory.

    The transmission is not backdrivable, so holding a pose costs nothing:
    only ``|tau * rate|`` while moving is counted.
    """
    return math.fsum(abs(t * w) * dt for t, w in zip(torques, rates))
