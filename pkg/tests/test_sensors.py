import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quori import sensors
from quori.errors import ValidationError

CAM = sensors.CameraMount()
LASER = sensors.LaserMount()


def test_level_camera_sees_straight_ahead():
    assert sensors.point_in_camera_fov((3.0, 0.0, CAM.mount_height), CAM, 0.0)
    assert not sensors.point_in_camera_fov((-3.0, 0.0, CAM.mount_height), CAM, 0.0)


def test_fov_boundary_is_closed():
    edge = (2.0, 2.0 * math.tan(CAM.half_h), CAM.mount_height)
    assert sensors.point_in_camera_fov(edge, CAM, 0.0)
    outside = (2.0, 2.0 * math.tan(CAM.half_h + 1e-6), CAM.mount_height)
    assert not sensors.point_in_camera_fov(outside, CAM, 0.0)


def test_bowing_brings_floor_into_view():
    level = sensors.camera_frustum(CAM, 0.0)
    bowed = sensors.camera_frustum(CAM, math.radians(30))
    assert bowed.near_distance < level.near_distance
    # tilted down past half the vertical FoV, the far edge lands on the floor
    upper = math.radians(30) - CAM.half_v
    assert bowed.far_distance == pytest.approx(min(CAM.mount_height / math.tan(upper), 8.0))
    steep = sensors.camera_frustum(replace(CAM, manual_tilt=math.radians(25)), math.radians(30))
    assert steep.far_distance == pytest.approx(CAM.mount_height / math.tan(math.radians(55) - CAM.half_v))


def test_looking_up_has_no_footprint():
    mount = replace(CAM, manual_tilt=-math.radians(25))
    frustum = sensors.camera_frustum(mount, -math.radians(15))
    assert frustum.footprint == [] and frustum.near_distance is None


def test_waist_outside_limits_rejected():
    with pytest.raises(ValidationError):
        sensors.camera_frustum(CAM, math.radians(40))


def test_manual_tilt_limit():
    with pytest.raises(ValidationError):
        replace(CAM, manual_tilt=math.radians(26)).validate()


def test_laser_arcs_exact():
    arcs = [a.as_floats() for a in sensors.laser_coverage(LASER)]
    assert arcs == [(-132.0, -11.0, 121.0), (-3.0, 124.0, 127.0)]


def test_overlapping_occluders_merge():
    mount = replace(LASER, occluders=(sensors.Occluder(0, 10), sensors.Occluder(6, 10)))
    shadows = sensors.shadow_intervals(mount)
    assert [(float(s.start), float(s.end)) for s in shadows] == [(-5.0, 11.0)]


def test_full_circle_without_occluders():
    mount = replace(LASER, intrinsic_fov_deg=360.0, occluders=())
    arcs = sensors.laser_coverage(mount)
    assert len(arcs) == 1 and arcs[0].width == 360


@given(bearing=st.floats(-179.0, 179.0), rng=st.floats(0.5, 7.5))
def test_laser_visibility_matches_arcs(bearing, rng):
    # point placed relative to the sensor itself
    rad = math.radians(bearing)
    p = (LASER.mount_offset + rng * math.cos(rad), rng * math.sin(rad))
    hit = sensors.laser_visible(p, (0.0, 0.0, 0.0), LASER)
    expected = any(a.contains(bearing) for a in sensors.laser_coverage(LASER))
    assert hit.visible == expected
    assert hit.range == pytest.approx(rng)


def test_laser_range_limit():
    assert not sensors.laser_visible((9.0, 3.0), (0, 0, 0), LASER).visible


def test_laser_follows_base_heading():
    # behind a base turned around is in front of the sensor
    assert sensors.laser_visible((-3.0, 0.0), (0.0, 0.0, math.pi), LASER).visible


@given(d=st.floats(0.1, 50.0))
def test_spl_inverse_distance_law(d):
    spec = sensors.SpeakerSpec()
    assert sensors.speaker_spl(spec, d) == pytest.approx(60.0 - 20.0 * math.log10(d / 3.0))


def test_spl_rejects_nonpositive_distance():
    with pytest.raises(ValidationError):
        sensors.speaker_spl(sensors.SpeakerSpec(), 0.0)
