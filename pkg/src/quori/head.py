"""Retro-projected face: mapping between the projector image and the head sphere.

The projector throws an annulus onto a dome mirror which spreads it over the
inside of the spherical head. The optics are collapsed into one monotone
radial profile ``rho(theta)``: image radius from the optical centre as a
function of polar angle on the sphere (0 at the crown). The outer edge of
the annulus lands near the crown and the inner edge at the equator, which is
why rings near the top are dense and rings near the neck are sparse.

Pixel coordinates are ``(u, v)`` = (column, row), pixel centres on integer
coordinates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParseError, ValidationError

TWO_PI = 2.0 * math.pi
_EPS = 1e-9


@dataclass(frozen=True)
class ProjectorSpec:
    rated_lumens: float = 300.0
    lifetime_hours: float = 20000.0
    width: int = 1280
    height: int = 720

    def validate(self) -> None:
        if self.rated_lumens < 0:
            raise ValidationError("rated_lumens must be >= 0", key="projector.rated_lumens")
        for name in ("lifetime_hours", "width", "height"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0", key=f"projector.{name}")


def usable_lumens(spec: ProjectorSpec) -> float:
    """Lumens landing on the sphere: the inscribed circle of the image."""
    w, h = spec.width, spec.height
    radius = min(w, h) / 2.0
    return spec.rated_lumens * math.pi * radius**2 / (w * h)


@dataclass(frozen=True)
class RadialProfile:
    """Strictly monotone table ``theta -> rho``, linearly interpolated.

    ``rho`` decreases as ``theta`` increases. Two knots give the linear
    default profile.
    """

    theta: tuple[float, ...]
    rho: tuple[float, ...]

    def __post_init__(self):
        if len(self.theta) != len(self.rho) or len(self.theta) < 2:
            raise ValidationError("radial profile needs >= 2 matching knots", key="radial_profile")
        if not all(b > a for a, b in zip(self.theta, self.theta[1:])):
            raise ValidationError("profile theta must be strictly increasing", key="radial_profile")
        if not all(b < a for a, b in zip(self.rho, self.rho[1:])):
            raise ValidationError("profile rho must be strictly decreasing", key="radial_profile")

    @classmethod
    def linear(cls, theta_top: float, theta_max: float, rho_max: float, rho_min: float) -> "RadialProfile":
        return cls((theta_top, theta_max), (rho_max, rho_min))

    @classmethod
    def from_csv(cls, path: str | Path) -> "RadialProfile":
        """Load a two-column ``theta_deg, rho_px`` calibration table."""
        thetas, rhos = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    t, r = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if lineno == 1:
                        continue  # header
                    raise ParseError(f"bad profile row {row!r}", line=lineno, source=str(path)) from None
                thetas.append(math.radians(t))
                rhos.append(r)
        return cls(tuple(thetas), tuple(rhos))

    def rho_of(self, theta):
        # np.interp needs increasing x; theta already is
        return np.interp(theta, self.theta, self.rho)

    def theta_of(self, rho):
        return np.interp(rho, self.rho[::-1], self.theta[::-1])


@dataclass(frozen=True)
class SphereMapCalibration:
    image_width: int = 1280
    image_height: int = 720
    center_u: float = 639.5
    center_v: float = 359.5
    rho_min: float = 32.0
    rho_max: float = 320.0
    theta_top: float = math.radians(20.0)
    theta_max: float = math.radians(90.0)
    profile: RadialProfile | None = None

    @property
    def radial_profile(self) -> RadialProfile:
        if self.profile is not None:
            return self.profile
        return RadialProfile.linear(self.theta_top, self.theta_max, self.rho_max, self.rho_min)

    def with_profile(self, profile: RadialProfile) -> "SphereMapCalibration":
        return replace(
            self,
            profile=profile,
            theta_top=profile.theta[0],
            theta_max=profile.theta[-1],
            rho_max=profile.rho[0],
            rho_min=profile.rho[-1],
        )

    def validate(self) -> None:
        if not 0 < self.rho_min < self.rho_max:
            raise ValidationError("need 0 < rho_min < rho_max", key="head.rho_min")
        if self.rho_max > min(self.image_width, self.image_height) / 2.0:
            raise ValidationError("rho_max exceeds half the short image side", key="head.rho_max")
        if not 0 <= self.theta_top < self.theta_max <= math.pi:
            raise ValidationError("need 0 <= theta_top < theta_max <= 180 deg", key="head.theta_top_deg")
        self.radial_profile  # monotonicity is checked on construction


def sphere_to_image(theta: float, lam: float, calib: SphereMapCalibration) -> tuple[float, float]:
    if not calib.theta_top - _EPS <= theta <= calib.theta_max + _EPS:
        raise ValidationError(
            f"theta={math.degrees(theta):.3f} deg outside the projected band", key="theta"
        )
    rho = float(calib.radial_profile.rho_of(theta))
    return calib.center_u + rho * math.cos(lam), calib.center_v + rho * math.sin(lam)


@dataclass(frozen=True)
class SpherePoint:
    theta: float
    lam: float
    on_head: bool = True


OFF_HEAD = SpherePoint(math.nan, math.nan, on_head=False)


def image_to_sphere(pixel: tuple[float, float], calib: SphereMapCalibration) -> SpherePoint:
    """Inverse of :func:`sphere_to_image`.

    Pixels outside the annulus return :data:`OFF_HEAD` instead of raising;
    they are simply not part of the face.
    """
    du = pixel[0] - calib.center_u
    dv = pixel[1] - calib.center_v
    rho = math.hypot(du, dv)
    if not calib.rho_min - _EPS <= rho <= calib.rho_max + _EPS:
        return OFF_HEAD
    theta = float(calib.radial_profile.theta_of(rho))
    return SpherePoint(theta, math.atan2(dv, du) % TWO_PI)


def image_to_sphere_grid(calib: SphereMapCalibration):
    """Vectorised inverse map over the whole projector raster.

    Returns ``(theta, lam, mask)`` arrays of shape ``(height, width)``.
    """
    v, u = np.mgrid[0 : calib.image_height, 0 : calib.image_width].astype(float)
    du = u - calib.center_u
    dv = v - calib.center_v
    rho = np.hypot(du, dv)
    mask = (rho >= calib.rho_min) & (rho <= calib.rho_max)
    theta = calib.radial_profile.theta_of(rho)
    lam = np.mod(np.arctan2(dv, du), TWO_PI)
    return theta, lam, mask


def ring_pixel_count(theta: float, calib: SphereMapCalibration) -> int:
    """Projector pixels along the latitude ring at ``theta``."""
    if not calib.theta_top - _EPS <= theta <= calib.theta_max + _EPS:
        raise ValidationError(f"theta={math.degrees(theta):.3f} deg outside band", key="theta")
    return int(round(TWO_PI * float(calib.radial_profile.rho_of(theta))))


def ring_table(calib: SphereMapCalibration, step_deg: float = 5.0) -> list[tuple[float, int]]:
    top = math.degrees(calib.theta_top)
    bottom = math.degrees(calib.theta_max)
    n = int(math.floor((bottom - top) / step_deg + 1e-9))
    thetas = [top + k * step_deg for k in range(n + 1)]
    if abs(thetas[-1] - bottom) > 1e-9:
        thetas.append(bottom)
    return [(t, ring_pixel_count(math.radians(t), calib)) for t in thetas]


@dataclass
class FaceTexture:
    """Equirectangular face image.

    Columns span azimuth ``[0, 2 pi)``, rows span polar angle ``[0, pi]``.
    ``pixels`` is ``(rows, cols)`` or ``(rows, cols, 3)`` uint8.
    """

    pixels: np.ndarray
    yaw_offset: float = 0.0
    pitch_offset: float = 0.0
    band: tuple[float, float] | None = field(default=None)

    @classmethod
    def uniform(cls, value=255, shape=(180, 360), channels: int = 3) -> "FaceTexture":
        full = shape + ((channels,) if channels > 1 else ())
        return cls(np.full(full, value, dtype=np.uint8))

    def sample(self, theta: np.ndarray, lam: np.ndarray, band: tuple[float, float]) -> np.ndarray:
        """Nearest-neighbour lookup with pose offsets applied."""
        rows, cols = self.pixels.shape[:2]
        lam_t = np.mod(lam - self.yaw_offset, TWO_PI)
        theta_t = np.clip(theta - self.pitch_offset, band[0], band[1])
        col = np.floor(lam_t / TWO_PI * cols).astype(np.int64) % cols
        row = np.clip(np.floor(theta_t / math.pi * rows).astype(np.int64), 0, rows - 1)
        return self.pixels[row, col]


def render_face(texture: FaceTexture, calib: SphereMapCalibration) -> np.ndarray:
    """Projector frame for ``texture``; pixels off the annulus are black."""
    theta, lam, mask = image_to_sphere_grid(calib)
    band = texture.band or (calib.theta_top, calib.theta_max)
    channels = texture.pixels.shape[2:] if texture.pixels.ndim == 3 else ()
    frame = np.zeros((calib.image_height, calib.image_width) + channels, dtype=np.uint8)
    frame[mask] = texture.sample(theta[mask], lam[mask], band)
    return frame


def annulus_pixel_count(calib: SphereMapCalibration) -> int:
    return int(image_to_sphere_grid(calib)[2].sum())


def read_pnm(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy()


def write_pnm(path: str | Path, pixels: np.ndarray) -> None:
    """Write PGM for 2-D arrays, PPM for RGB."""
    Image.fromarray(np.ascontiguousarray(pixels)).save(path, format="PPM")
