"""Field-of-view geometry for the head camera, base laser and chest speaker.

Robot frame: x forward, y left, z up, origin on the floor under the torso.
Bearings are measured counter-clockwise from +x. Camera pitch is positive
when the optical axis points below the horizon, so bowing and a downward
manual tilt add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ValidationError
from .waist import WaistLimits

_ANGLE_EPS = 1e-9


@dataclass(frozen=True)
class CameraMount:
    h_fov_deg: float = 60.0
    v_fov_deg: float = 49.5
    manual_tilt: float = 0.0
    mount_height: float = 1.30
    tilt_limit: float = math.radians(25.0)

    @property
    def half_h(self) -> float:
        return math.radians(self.h_fov_deg) / 2.0

    @property
    def half_v(self) -> float:
        return math.radians(self.v_fov_deg) / 2.0

    def validate(self) -> None:
        if not (self.h_fov_deg > 0 and self.v_fov_deg > 0):
            raise ValidationError("camera FoV angles must be > 0", key="camera.h_fov_deg")
        if abs(self.manual_tilt) > self.tilt_limit + _ANGLE_EPS:
            raise ValidationError(
                f"manual tilt {math.degrees(self.manual_tilt):.2f} deg outside +/-25 deg",
                key="camera.manual_tilt_deg",
            )
        if not self.mount_height > 0:
            raise ValidationError("mount_height must be > 0", key="camera.mount_height")


@dataclass(frozen=True)
class Frustum:
    pitch: float
    half_h: float
    half_v: float
    mount_height: float
    footprint: list[tuple[float, float]] = field(default_factory=list)
    near_distance: float | None = None
    far_distance: float | None = None


def _corner_rays(pitch: float, half_h: float, half_v: float):
    """Unit-ish direction vectors of the four frustum edges (robot frame)."""
    th, tv = math.tan(half_h), math.tan(half_v)
    rays = []
    for sy, sz in ((1, -1), (-1, -1), (-1, 1), (1, 1)):
        # camera frame: forward, left, up
        f, l, u = 1.0, sy * th, sz * tv
        # pitch down by `pitch` about the left axis
        x = f * math.cos(pitch) + u * math.sin(pitch)
        z = -f * math.sin(pitch) + u * math.cos(pitch)
        rays.append((x, l, z))
    return rays


def camera_frustum(
    mount: CameraMount,
    waist_theta: float,
    limits: WaistLimits = WaistLimits(),
    max_ground_range: float = 8.0,
) -> Frustum:
    """Effective pitch and floor footprint of the camera.

    The footprint polygon joins the floor hits of the four edge rays; rays
    that never reach the floor are cut at ``max_ground_range``. It is empty
    when the lower edge does not reach the floor.
    """
    if not limits.contains(waist_theta):
        raise ValidationError(
            f"waist angle {math.degrees(waist_theta):.2f} deg outside limits", key="waist_theta"
        )
    pitch = mount.manual_tilt + waist_theta
    h = mount.mount_height
    footprint: list[tuple[float, float]] = []
    near = far = None
    if pitch + mount.half_v > 0:
        for x, y, z in _corner_rays(pitch, mount.half_h, mount.half_v):
            if z < 0:
                t = h / -z
                px, py = x * t, y * t
                dist = math.hypot(px, py)
                if dist > max_ground_range:
                    px, py = px * max_ground_range / dist, py * max_ground_range / dist
            else:
                scale = max_ground_range / math.hypot(x, y)
                px, py = x * scale, y * scale
            footprint.append((px, py))
        near = h / math.tan(pitch + mount.half_v) if pitch + mount.half_v < math.pi / 2 else 0.0
        upper = pitch - mount.half_v
        far = min(h / math.tan(upper), max_ground_range) if upper > 0 else max_ground_range
    return Frustum(pitch, mount.half_h, mount.half_v, h, footprint, near, far)


def camera_angles(p: tuple[float, float, float], mount: CameraMount, waist_theta: float):
    """Horizontal and vertical angle of ``p`` off the optical axis.

    Returns ``None`` for points behind the image plane.
    """
    pitch = mount.manual_tilt + waist_theta
    dx, dy, dz = p[0], p[1], p[2] - mount.mount_height
    forward = dx * math.cos(pitch) - dz * math.sin(pitch)
    up = dx * math.sin(pitch) + dz * math.cos(pitch)
    if forward <= 0:
        return None
    return math.atan2(dy, forward), math.atan2(up, forward)


def point_in_camera_fov(p: tuple[float, float, float], mount: CameraMount, waist_theta: float) -> bool:
    """Closed-boundary pinhole frustum test in the robot frame."""
    angles = camera_angles(p, mount, waist_theta)
    if angles is None:
        return False
    horiz, vert = angles
    return abs(horiz) <= mount.half_h + _ANGLE_EPS and abs(vert) <= mount.half_v + _ANGLE_EPS


@dataclass(frozen=True)
class Occluder:
    bearing_deg: float
    width_deg: float

    @property
    def start(self) -> Fraction:
        return _frac(self.bearing_deg) - _frac(self.width_deg) / 2

    @property
    def end(self) -> Fraction:
        return _frac(self.bearing_deg) + _frac(self.width_deg) / 2


def _frac(x: float) -> Fraction:
    return Fraction(str(x))


# Visible arcs of 121 and 127 deg with two 8 deg post shadows over a 264 deg
# scan; the remaining 96 deg behind the sensor is outside the scan.
DEFAULT_OCCLUDERS = (Occluder(-7.0, 8.0), Occluder(128.0, 8.0))


@dataclass(frozen=True)
class LaserMount:
    range_max: float = 8.0
    mount_offset: float = 0.100
    intrinsic_fov_deg: float = 264.0
    fov_center_deg: float = 0.0
    occluders: tuple[Occluder, ...] = DEFAULT_OCCLUDERS
    base_radius: float = 0.24

    def validate(self) -> None:
        if not self.mount_offset < self.base_radius:
            raise ValidationError("laser offset must lie inside the base", key="laser.mount_offset")
        if not self.range_max > 0:
            raise ValidationError("laser range must be > 0", key="laser.range_max")
        if not 0 < self.intrinsic_fov_deg <= 360:
            raise ValidationError("laser FoV must lie in (0, 360] deg", key="laser.intrinsic_fov_deg")
        for occ in self.occluders:
            if not occ.width_deg > 0:
                raise ValidationError("occluder widths must be > 0", key="laser.occluders")


@dataclass(frozen=True)
class Arc:
    start: Fraction
    end: Fraction

    @property
    def width(self) -> Fraction:
        return self.end - self.start

    def contains(self, bearing: float) -> bool:
        return float(self.start) <= bearing <= float(self.end)

    def as_floats(self) -> tuple[float, float, float]:
        return float(self.start), float(self.end), float(self.width)


def _merge(intervals: list[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, Fraction]]:
    merged: list[list[Fraction]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def shadow_intervals(mount: LaserMount) -> list[Arc]:
    """Occluder shadows clipped to the scan and merged where they overlap."""
    lo = _frac(mount.fov_center_deg) - _frac(mount.intrinsic_fov_deg) / 2
    hi = lo + _frac(mount.intrinsic_fov_deg)
    clipped = []
    for occ in mount.occluders:
        s, e = max(occ.start, lo), min(occ.end, hi)
        if e > s:
            clipped.append((s, e))
    return [Arc(s, e) for s, e in _merge(clipped)]


def laser_coverage(mount: LaserMount) -> list[Arc]:
    """Maximal visible arcs (degrees, sensor frame) sorted by bearing.

    Exact rational arithmetic, so arcs plus shadows sum to the scan width.
    """
    lo = _frac(mount.fov_center_deg) - _frac(mount.intrinsic_fov_deg) / 2
    hi = lo + _frac(mount.intrinsic_fov_deg)
    arcs = []
    cursor = lo
    for shadow in shadow_intervals(mount):
        if shadow.start > cursor:
            arcs.append(Arc(cursor, shadow.start))
        cursor = max(cursor, shadow.end)
    if hi > cursor:
        arcs.append(Arc(cursor, hi))
    return arcs


@dataclass(frozen=True)
class LaserHit:
    visible: bool
    range: float
    bearing_deg: float


def laser_visible(
    p: tuple[float, float],
    pose: tuple[float, float, float],
    mount: LaserMount,
) -> LaserHit:
    """Whether a world point is seen by the base laser.

    ``pose`` is ``(x, y, heading)`` of the base centre. The sensor sits
    ``mount_offset`` ahead of the centre along the heading.
    """
    bx, by, heading = pose
    sx = bx + mount.mount_offset * math.cos(heading)
    sy = by + mount.mount_offset * math.sin(heading)
    dx, dy = p[0] - sx, p[1] - sy
    rng = math.hypot(dx, dy)
    bearing = math.degrees(math.atan2(dy, dx) - heading)
    bearing = (bearing - mount.fov_center_deg + 180.0) % 360.0 - 180.0 + mount.fov_center_deg
    visible = rng <= mount.range_max and any(a.contains(bearing) for a in laser_coverage(mount))
    return LaserHit(visible, rng, bearing)


@dataclass(frozen=True)
class SpeakerSpec:
    reference_spl: float = 60.0
    reference_distance: float = 3.0

    def validate(self) -> None:
        if not self.reference_distance > 0:
            raise ValidationError("reference distance must be > 0", key="speaker.reference_distance")


def speaker_spl(spec: SpeakerSpec, distance: float) -> float:
    """Free-field sound pressure level at ``distance`` metres."""
    if not distance > 0:
        raise ValidationError(f"distance must be > 0, got {distance!r}", key="distance")
    if distance == spec.reference_distance:
        return spec.reference_spl
    return spec.reference_spl - 20.0 * math.log10(distance / spec.reference_distance)
