import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fusetrack.detections import VisionDetection
from fusetrack.errors import HorizonDegenerate, InvalidExtent
from fusetrack.geometry import (
    CameraModel,
    estimate_pitch,
    pitch_from_pair,
    project_ground_point,
    size_range,
    trig_range,
    vision_to_bev,
)

PITCH_20M = math.atan(0.075) - math.atan(0.05)


def test_trig_range_level_camera(cam):
    assert trig_range(cam, 575.0) == pytest.approx(30.0, rel=1e-12)


def test_trig_range_at_horizon_raises(cam):
    with pytest.raises(HorizonDegenerate):
        trig_range(cam, 500.0)


def test_trig_range_above_horizon_raises(cam):
    with pytest.raises(HorizonDegenerate):
        trig_range(cam, 480.0)


def test_trig_range_with_pitch(cam):
    # the worked value 0.024901 is rounded; the exact pitch gives exactly 20 m
    assert trig_range(cam, 575.0, pitch=0.024901) == pytest.approx(20.0, abs=1e-3)
    assert trig_range(cam, 575.0, pitch=PITCH_20M) == pytest.approx(20.0, rel=1e-12)


def test_size_range_examples():
    c = CameraModel(focal_length=1000.0)
    assert size_range(c, 100.0, 2.0) == pytest.approx(20.0)
    assert size_range(c, 2000.0, 2.0) == pytest.approx(1.0)
    for s, S in ((0.0, 2.0), (-5.0, 2.0), (10.0, 0.0)):
        with pytest.raises(InvalidExtent):
            size_range(c, s, S)


def test_estimate_pitch_consistent_pair_gives_zero(cam):
    assert estimate_pitch(cam, [(30.0, 575.0)]) == pytest.approx(0.0, abs=1e-15)


def test_estimate_pitch_hand_value(cam):
    theta = estimate_pitch(cam, [(20.0, 575.0)])
    assert theta == pytest.approx(0.024901, abs=1e-6)
    assert cam.pitch == theta


def test_estimate_pitch_empty_keeps_pitch(cam):
    cam.pitch = 0.01
    assert estimate_pitch(cam, []) == 0.01
    assert cam.pitch == 0.01


def test_estimate_pitch_smoothing_blends():
    c = CameraModel(focal_length=1500.0, principal_row=500.0, pitch=0.0, pitch_smoothing=0.3)
    estimate_pitch(c, [(20.0, 575.0)])
    assert c.pitch == pytest.approx(0.3 * PITCH_20M, rel=1e-12)
    estimate_pitch(c, [(20.0, 575.0)], smoothing=1.0)
    assert c.pitch == pytest.approx(PITCH_20M, rel=1e-12)


def test_estimate_pitch_rejects_implausible(cam):
    cam.pitch = 0.01
    # a reference distance of 1 cm implies a pitch near 90 degrees
    estimate_pitch(cam, [(0.01, 501.0)])
    assert cam.pitch == 0.01


def test_vision_to_bev_examples(cam):
    p = vision_to_bev(cam, VisionDetection("v", u=800.0, v=575.0, w=50, h=40, conf=0.9))
    assert p.range == pytest.approx(30.0, rel=1e-12)
    assert p.azimuth == 0.0
    q = vision_to_bev(cam, VisionDetection("v", u=950.0, v=575.0, w=50, h=40, conf=0.9))
    assert q.azimuth == pytest.approx(math.atan(0.1), rel=1e-12)
    assert q.azimuth == pytest.approx(0.0997, abs=1e-4)
    with pytest.raises(HorizonDegenerate):
        vision_to_bev(cam, VisionDetection("v", u=800.0, v=500.0, w=50, h=40, conf=0.9))


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraModel(focal_length=0.0)
    with pytest.raises(ValueError):
        CameraModel(mount_height=-1.0)
    with pytest.raises(ValueError):
        CameraModel(pitch=1.0)


pitches = st.floats(-0.08, 0.08)
heights = st.floats(0.8, 3.0)


@given(pitch=pitches, h=heights, y=st.floats(3.0, 150.0), x=st.floats(-10.0, 10.0))
def test_projection_round_trip(pitch, h, y, x):
    c = CameraModel(focal_length=1260.0, mount_height=h, pitch=pitch)
    u, vp = project_ground_point(c, x, y)
    assume(vp - c.principal_row > -c.focal_length * math.tan(pitch) + 1e-6)
    assert trig_range(c, vp) == pytest.approx(y, rel=1e-9)
    bev = vision_to_bev(c, VisionDetection("v", u=u, v=vp, w=10, h=10, conf=0.5))
    assert bev.x == pytest.approx(x, abs=1e-9 * max(1.0, y))
    assert bev.range == pytest.approx(math.hypot(x, y), rel=1e-9)


@given(pitch=pitches, zs=st.lists(st.floats(4.0, 120.0), min_size=1, max_size=9))
def test_pitch_recovered_from_exact_pairs(pitch, zs):
    c = CameraModel(focal_length=1260.0, pitch=0.0, pitch_smoothing=1.0)
    pairs = [(z, project_ground_point(c, 0.0, z, pitch=pitch)[1]) for z in zs]
    assert estimate_pitch(c, pairs) == pytest.approx(pitch, abs=1e-9)


@given(pitch=st.floats(-0.05, 0.05), rows=st.lists(st.integers(100, 40000), min_size=2, max_size=20, unique=True))
def test_trig_range_decreasing_in_row(pitch, rows):
    c = CameraModel(focal_length=1260.0, pitch=0.0)
    rows = sorted(r / 100 for r in rows if math.atan(r / 100 / c.focal_length) + pitch > 1e-6)
    assume(len(rows) >= 2)
    ranges = [trig_range(c, c.principal_row + r, pitch) for r in rows]
    assert all(a > b for a, b in zip(ranges, ranges[1:]))


@given(pitch=pitches, k=st.integers(1, 4), data=st.data())
def test_median_resists_minority_outliers(pitch, k, data):
    c = CameraModel(focal_length=1260.0, pitch=0.0, pitch_smoothing=1.0)
    zs = data.draw(st.lists(st.floats(5.0, 100.0), min_size=k + 1, max_size=k + 1))
    clean = [(z, project_ground_point(c, 0.0, z, pitch=pitch)[1]) for z in zs]
    bad_rows = data.draw(st.lists(st.floats(460.0, 890.0), min_size=k, max_size=k))
    bad_z = data.draw(st.lists(st.floats(1.0, 200.0), min_size=k, max_size=k))
    corrupt = [(z, v) for z, v in zip(bad_z, bad_rows) if abs(pitch_from_pair(c, z, v)) < math.pi / 4]
    assume(len(corrupt) == k)
    pairs = clean + corrupt
    order = data.draw(st.permutations(range(len(pairs))))
    got = estimate_pitch(c, [pairs[i] for i in order])
    clean_est = sorted(pitch_from_pair(c, z, v) for z, v in clean)
    # with k corrupted among 2k+1 the median lies within the span of clean estimates
    assert clean_est[0] - 1e-12 <= got <= clean_est[-1] + 1e-12
    assert got == pytest.approx(pitch, abs=1e-9)


def test_first_order_range_error_matches_monte_carlo():
    # dZ/dvp = Z^2 / (f h) for a level camera; at 30 m, f=1500, h=1.5 that is 0.4 m/px
    c = CameraModel(focal_length=1500.0, principal_row=500.0, mount_height=1.5)
    rng = np.random.default_rng(0)
    sigma = 2.0
    vp = c.principal_row + c.focal_length * c.mount_height / 30.0
    z = np.array([trig_range(c, vp + e) for e in rng.normal(0.0, sigma, 1000)])
    predicted = 30.0 ** 2 / (c.focal_length * c.mount_height) * sigma
    assert predicted == pytest.approx(0.8)
    assert abs(z.std() - predicted) / predicted < 0.3
