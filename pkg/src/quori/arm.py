"""Two-DoF differential shoulder with a friction-wheel slip clutch.

Each motor drives one input of a bevel differential through a friction
wheel pair and a belt reduction, lumped into a single ratio ``G``. The two
differential inputs ("paths") combine as::

    q_circ = (beta1 + beta2) / 2
    q_abd  = (beta1 - beta2) / 2

where ``beta_i`` is the output-side angle of path ``i``. Without slip
``beta_i = alpha_i / G``. Each friction pair transmits at most
``clutch_torque`` (referred to the output side); beyond that it slips and the
mismatch accumulates in ``slip_offset_i = alpha_i / G - beta_i``.

The motors are position-controlled servos, so the quasi-static model treats
a torque command as a speed request: ``alpha_dot = tau / tau_max * omega_max``.
With zero command the motor holds. The output side sees viscous damping
``output_damping`` plus any external load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

# path <-> joint: q = D beta, beta = D_INV q
DIFF = np.array([[0.5, 0.5], [0.5, -0.5]])
DIFF_INV = np.array([[1.0, 1.0], [1.0, -1.0]])

MOTOR_SPEED_MAX_REV_S = 16.0
JOINT_SPEED_MAX = 1.2
DEFAULT_RATIO = MOTOR_SPEED_MAX_REV_S * 2.0 * math.pi / JOINT_SPEED_MAX
_EPS = 1e-12


@dataclass(frozen=True)
class TransmissionSpec:
    ratio_g: float = DEFAULT_RATIO
    clutch_torque: float = 4.0
    motor_torque_max: float = 0.15
    motor_speed_max: float = MOTOR_SPEED_MAX_REV_S
    output_encoder_res_deg: float = 0.022
    motor_encoder_res_deg: float = 0.075
    abduction_limit: float = math.radians(70.0)
    output_damping: float = 1.0
    slip_ring_wires: int = 6
    slip_ring_current_a: float = 2.0

    @property
    def motor_speed_max_rad(self) -> float:
        return self.motor_speed_max * 2.0 * math.pi

    @property
    def output_res(self) -> float:
        return math.radians(self.output_encoder_res_deg)

    @property
    def motor_res(self) -> float:
        return math.radians(self.motor_encoder_res_deg)

    @property
    def combined_quantization(self) -> float:
        """Joint-angle uncertainty of a slip estimate, in radians."""
        return self.output_res + self.motor_res / self.ratio_g

    def validate(self) -> None:
        if not self.ratio_g > 1:
            raise ValidationError("ratio_g must be > 1", key="arm.ratio_g")
        for name in ("clutch_torque", "motor_torque_max", "motor_speed_max", "output_damping",
                     "output_encoder_res_deg", "motor_encoder_res_deg"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0", key=f"arm.{name}")
        if self.clutch_torque > self.ratio_g * self.motor_torque_max:
            raise ValidationError(
                f"clutch_torque {self.clutch_torque} exceeds G x motor torque "
                f"{self.ratio_g * self.motor_torque_max:.3f}",
                key="arm.clutch_torque",
            )
        if not 0 < self.abduction_limit <= math.pi / 2:
            raise ValidationError("abduction limit must lie in (0, 90] deg", key="arm_abduction_limit_deg")


def validate_addon_wiring(spec: TransmissionSpec, wires: int, current_a: float) -> None:
    """Check an add-on (e.g. elbow servos) fits the shoulder slip ring."""
    if wires > spec.slip_ring_wires:
        raise ValidationError(f"{wires} wires requested, slip ring has {spec.slip_ring_wires}", key="wires")
    if current_a > spec.slip_ring_current_a:
        raise ValidationError(f"{current_a} A exceeds slip ring rating {spec.slip_ring_current_a} A", key="current")


@dataclass(frozen=True)
class ArmState:
    alpha1: float = 0.0
    alpha2: float = 0.0
    q_circ: float = 0.0
    q_abd: float = 0.0
    slip_offset1: float = 0.0
    slip_offset2: float = 0.0

    @property
    def slip_offsets(self) -> tuple[float, float]:
        return (self.slip_offset1, self.slip_offset2)


def motor_to_joint(alpha1: float, alpha2: float, spec: TransmissionSpec) -> tuple[float, float]:
    g = spec.ratio_g
    return (alpha1 + alpha2) / (2.0 * g), (alpha1 - alpha2) / (2.0 * g)


def joint_to_motor(q_circ: float, q_abd: float, spec: TransmissionSpec) -> tuple[float, float]:
    if abs(q_abd) > spec.abduction_limit + _EPS:
        raise ValidationError(
            f"abduction {math.degrees(q_abd):.3f} deg outside +/-{math.degrees(spec.abduction_limit):g} deg",
            key="q_abd",
        )
    g = spec.ratio_g
    return g * (q_circ + q_abd), g * (q_circ - q_abd)


def state_from_joint(q_circ: float, q_abd: float, spec: TransmissionSpec) -> ArmState:
    a1, a2 = joint_to_motor(q_circ, q_abd, spec)
    return ArmState(alpha1=a1, alpha2=a2, q_circ=q_circ, q_abd=q_abd)


@dataclass(frozen=True)
class SlipEvent:
    path: int
    transmitted_torque: float
    slip: float
    cause: str = "clutch"


@dataclass(frozen=True)
class StepResult:
    state: ArmState
    output_torque: tuple[float, float]
    events: list[SlipEvent] = field(default_factory=list)


def step_dynamics(
    state: ArmState,
    cmd_motor_torque: tuple[float, float],
    load_torque: tuple[float, float],
    dt: float,
    spec: TransmissionSpec,
) -> StepResult:
    """Advance the arm by ``dt`` under motor commands and a joint load.

    ``load_torque`` is ``(circumduction, abduction)`` torque applied by the
    environment at the joint.

    Raises:
        ValidationError: if a command exceeds the motor torque limit or
            ``dt`` is not positive.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}", key="dt")
    for i, tau in enumerate(cmd_motor_torque, start=1):
        if abs(tau) > spec.motor_torque_max * (1.0 + 1e-12):
            raise ValidationError(
                f"motor {i} torque {tau:.4g} N m exceeds {spec.motor_torque_max} N m", key=f"tau{i}"
            )
    g = spec.ratio_g
    c = spec.output_damping
    tau = np.asarray(cmd_motor_torque, dtype=float)
    load_path = DIFF @ np.asarray(load_torque, dtype=float)

    alpha_dot = tau / spec.motor_torque_max * spec.motor_speed_max_rad
    beta = DIFF_INV @ np.array([state.q_circ, state.q_abd])
    slip = np.array(state.slip_offsets)

    events = []
    out_torque = np.zeros(2)
    beta_dot = np.zeros(2)
    for i in range(2):
        stuck_rate = alpha_dot[i] / g
        required = c * stuck_rate - load_path[i]
        if abs(required) <= spec.clutch_torque:
            out_torque[i] = required
            beta_dot[i] = stuck_rate
        else:
            out_torque[i] = math.copysign(spec.clutch_torque, required)
            beta_dot[i] = (out_torque[i] + load_path[i]) / c
            events.append(SlipEvent(i + 1, float(out_torque[i]), float((stuck_rate - beta_dot[i]) * dt)))

    alpha_new = np.array([state.alpha1, state.alpha2]) + alpha_dot * dt
    beta_new = beta + beta_dot * dt
    q_circ, q_abd = DIFF @ beta_new

    # hard stop on abduction; the clutch absorbs the overrun
    if abs(q_abd) > spec.abduction_limit:
        q_abd = math.copysign(spec.abduction_limit, q_abd)
        stopped = DIFF_INV @ np.array([q_circ, q_abd])
        for i in range(2):
            overrun = float(beta_new[i] - stopped[i])
            if abs(overrun) > 0:
                events.append(SlipEvent(i + 1, float(out_torque[i]), overrun, cause="joint_limit"))
        beta_new = stopped

    slip = slip + alpha_dot * dt / g - (beta_new - beta)
    new_state = ArmState(
        alpha1=float(alpha_new[0]),
        alpha2=float(alpha_new[1]),
        q_circ=float(q_circ),
        q_abd=float(q_abd),
        slip_offset1=float(slip[0]),
        slip_offset2=float(slip[1]),
    )
    return StepResult(new_state, (float(out_torque[0]), float(out_torque[1])), events)


def quantize(angle, resolution: float):
    """Round to the nearest encoder count."""
    return np.round(np.asarray(angle, dtype=float) / resolution) * resolution


@dataclass(frozen=True)
class EncoderReadings:
    motor: tuple[float, float]
    output: tuple[float, float]


def read_encoders(state: ArmState, spec: TransmissionSpec) -> EncoderReadings:
    """Quantised motor angles and output (joint) angles."""
    motor = quantize([state.alpha1, state.alpha2], spec.motor_res)
    output = quantize([state.q_circ, state.q_abd], spec.output_res)
    return EncoderReadings(tuple(map(float, motor)), tuple(map(float, output)))


@dataclass(frozen=True)
class SlipEstimate:
    slip: tuple[float, float]
    threshold: float
    flagged: bool

    @property
    def magnitude(self) -> float:
        return max(abs(s) for s in self.slip)


def detect_slip(
    motor_readings: tuple[float, float],
    output_readings: tuple[float, float],
    spec: TransmissionSpec,
    threshold: float | None = None,
) -> SlipEstimate:
    """Joint-space disagreement between output and motor encoders.

    The flag is raised only when the disagreement strictly exceeds the
    threshold (default: three times the combined quantisation).
    """
    if threshold is None:
        threshold = 3.0 * spec.combined_quantization
    implied = motor_to_joint(motor_readings[0], motor_readings[1], spec)
    slip = (output_readings[0] - implied[0], output_readings[1] - implied[1])
    flagged = max(abs(s) for s in slip) > threshold
    return SlipEstimate(slip, threshold, flagged)


def calibrate_boot(output_readings: tuple[float, float], state: ArmState, spec: TransmissionSpec) -> ArmState:
    """Re-reference the motor angles to the output encoders.

    The joint itself does not move; only the motor zero changes, so the
    motor-implied joint angles match the output readings and the slip
    offsets restart at zero.
    """
    q_circ, q_abd = output_readings
    g = spec.ratio_g
    return replace(
        state,
        alpha1=g * (q_circ + q_abd),
        alpha2=g * (q_circ - q_abd),
        slip_offset1=0.0,
        slip_offset2=0.0,
    )


def joint_rate_from_motor_rates(rate1: float, rate2: float, spec: TransmissionSpec) -> tuple[float, float]:
    """Joint rates (rad/s) for motor rates (rad/s); slip-free."""
    return motor_to_joint(rate1, rate2, spec)
