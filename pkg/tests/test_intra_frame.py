import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fusetrack.affinity import ArtificialScorer, extract_common_feature
from fusetrack.config import RunConfig
from fusetrack.detections import R, V, VR, Frame, RadarDetection, VisionDetection
from fusetrack.geometry import project_ground_point
from fusetrack.intra_frame import (
    global_association,
    intra_frame_fuse,
    local_association,
    split_by_confidence,
)

RUN = RunConfig()
SCORER = ArtificialScorer(RUN.weights)


def vision_at(cam, vid, x, y, conf=0.9, pitch=None, width=1.85):
    u, v = project_ground_point(cam, x, y, pitch=pitch)
    depth = y * math.cos(pitch if pitch is not None else cam.pitch)
    return VisionDetection(vid, u, v, cam.focal_length * width / depth, 60.0, conf)


def radar_at(rid, x, y, vel=0.0, conf=0.9):
    return RadarDetection(rid, math.hypot(x, y), math.atan2(x, y), vel, conf)


def test_split_examples():
    f = Frame(0.0, [VisionDetection("a", 0, 600, 10, 10, 0.9), VisionDetection("b", 0, 600, 10, 10, 0.5)], [])
    vh, vl, rh, rl = split_by_confidence(f, 0.6, 0.5)
    assert [d.id for d in vh] == ["a"] and [d.id for d in vl] == ["b"] and rh == rl == []
    assert split_by_confidence(Frame(0.0), 0.6, 0.5) == ([], [], [], [])
    edge = Frame(0.0, [VisionDetection("c", 0, 600, 10, 10, 0.6)], [RadarDetection("r", 10, 0, 0, 0.5)])
    vh, vl, rh, rl = split_by_confidence(edge, 0.6, 0.5)
    assert len(vh) == 1 and len(rh) == 1


def test_local_association_examples(cam):
    vis = [extract_common_feature(VisionDetection("v", 800.0, 575.0, 92.5, 60, 0.9), cam)]
    rad = [extract_common_feature(RadarDetection("r", 30.5, 0.005, 0.0, 0.9))]
    pairs, lv, lr = local_association(vis, rad, SCORER, 0.5)
    assert [(i, j) for i, j, _ in pairs] == [(0, 0)] and lv == lr == []
    pairs, lv, lr = local_association([], rad, SCORER, 0.5)
    assert pairs == [] and lr == [0]
    two = vis + [extract_common_feature(VisionDetection("w", 801.0, 575.0, 92.5, 60, 0.9), cam)]
    pairs, lv, lr = local_association(two, rad, SCORER, 0.5)
    assert len(pairs) == 1 and len(lv) == 1


def test_global_association_examples():
    vis = np.array([[30.0, -0.01, 0.0, 0.5], [30.0, 0.01, 0.0, 0.5]])
    rad = np.array([[30.0, 0.0, 0.0, 0.4]])
    pairs, vs, rs = global_association(vis, rad, SCORER, 0.5)
    assert [(i, j) for i, j, _ in pairs] == [(0, 0), (1, 0)] and vs == rs == []
    far = np.array([[80.0, 0.3, 3.0, 0.4]])
    pairs, vs, rs = global_association(vis, far, SCORER, 0.5)
    assert pairs == [] and vs == [0, 1] and rs == [0]
    pairs, vs, rs = global_association(vis, np.zeros((0, 4)), SCORER, 0.5)
    assert pairs == [] and vs == [0, 1]


def test_fuse_single_pair(cam):
    frame = Frame(0.0, [vision_at(cam, "v", 0.5, 20.0)], [radar_at("r", 0.5, 20.0)])
    out = intra_frame_fuse(frame, cam.copy(), SCORER, RUN).detections
    assert [(d.tag, d.member_ids) for d in out] == [(VR, ("v", "r"))]
    vr = out[0]
    assert vr.feature.range == vr.radar.range and vr.feature.velocity == vr.radar.vel
    assert vr.feature.azimuth == vr.vision_feature.azimuth


def test_fuse_vision_only_is_passthrough(cam):
    c = cam.copy(pitch=0.01)
    frame = Frame(0.0, [vision_at(c, "a", 0.0, 20.0), vision_at(c, "b", 3.0, 40.0, conf=0.3)], [])
    res = intra_frame_fuse(frame, c, SCORER, RUN)
    assert [d.tag for d in res.detections] == [V, V]
    assert res.pitch == 0.01 and c.pitch == 0.01 and res.dca_pairs == 0
    for det in res.detections:
        assert det.feature == extract_common_feature(det.vision, c)


def test_horizon_detection_is_passed_through_without_range(cam):
    frame = Frame(0.0, [VisionDetection("h", 800.0, 500.0, 20, 20, 0.9)], [])
    out = intra_frame_fuse(frame, cam.copy(), SCORER, RUN)
    assert [(d.tag, d.feature) for d in out.detections] == [(V, None)]
    assert out.excluded == ["h"]


def test_dca_recovers_pitch_and_fixes_global_ranges(cam):
    true_pitch = 0.0249
    truth = cam.copy(pitch=true_pitch)
    near = [(-1.0, 8.0), (1.5, 10.0), (0.0, 12.0)]
    far = [(-3.5, 40.0), (3.5, 55.0)]
    vision = [vision_at(truth, f"vh{k}", x, y) for k, (x, y) in enumerate(near)]
    vision += [vision_at(truth, f"vl{k}", x, y, conf=0.4) for k, (x, y) in enumerate(far)]
    radar = [radar_at(f"rh{k}", x, y) for k, (x, y) in enumerate(near)]
    radar += [radar_at(f"rl{k}", x, y, conf=0.3) for k, (x, y) in enumerate(far)]
    working = cam.copy(pitch=0.0, pitch_smoothing=1.0)
    res = intra_frame_fuse(Frame(0.0, vision, radar), working, SCORER, RUN)
    assert res.local_pairs == 3 and res.dca_pairs == 3
    assert working.pitch == pytest.approx(true_pitch, abs=1e-6)
    glob = [d for d in res.detections if d.stage == "global"]
    assert len(glob) == 2
    for det in glob:
        k = int(det.vision.id[2:])
        x, y = far[k]
        assert det.vision_feature.range == pytest.approx(math.hypot(x, y), rel=0.01)
        assert det.radar.id == f"rl{k}"


def test_dca_off_and_image_modes(cam):
    truth = cam.copy(pitch=0.02)
    frame = Frame(0.0, [vision_at(truth, "v", 0.0, 10.0)], [radar_at("r", 0.0, 10.0)])
    off = cam.copy()
    intra_frame_fuse(frame, off, SCORER, RUN, dca="off")
    assert off.pitch == 0.0
    img = cam.copy()
    box = frame.vision[0]
    box.w = cam.focal_length * RUN.size_prior_width / 10.0
    intra_frame_fuse(Frame(0.0, [box], []), img, SCORER, RUN, dca="image")
    # a box whose width size-ranges to exactly 10 m gives back the true pitch
    assert img.pitch == pytest.approx(0.02, abs=1e-9)
    with pytest.raises(ValueError):
        intra_frame_fuse(frame, cam.copy(), SCORER, RUN, dca="lidar")


@st.composite
def frames(draw):
    nv = draw(st.integers(0, 6))
    nr = draw(st.integers(0, 6))
    vision, radar = [], []
    for k in range(nv):
        vision.append(VisionDetection(
            f"v{k}",
            draw(st.floats(300.0, 1300.0)),
            draw(st.floats(505.0, 700.0)),
            draw(st.floats(10.0, 200.0)),
            40.0,
            draw(st.floats(0.0, 1.0)),
        ))
    for k in range(nr):
        radar.append(RadarDetection(
            f"r{k}",
            draw(st.floats(2.0, 100.0)),
            draw(st.floats(-0.3, 0.3)),
            draw(st.floats(-5.0, 5.0)),
            draw(st.floats(0.0, 1.0)),
        ))
    return Frame(0.0, vision, radar)


def _signature(result):
    return sorted((d.tag, d.member_ids, d.stage) for d in result.detections)


@given(frames())
def test_conservation(frame):
    from fusetrack.geometry import CameraModel

    cam = CameraModel(1500.0, 500.0, 800.0, 1.5, 0.0, 0.3)
    res = intra_frame_fuse(frame, cam, SCORER, RUN)
    vision_ids = [d.vision.id for d in res.detections if d.vision is not None]
    assert sorted(vision_ids) == sorted(v.id for v in frame.vision)
    singles = [d.radar.id for d in res.detections if d.tag == R]
    in_pairs = {d.radar.id for d in res.detections if d.tag == VR}
    assert len(singles) == len(set(singles)) and not set(singles) & in_pairs
    assert set(singles) | in_pairs == {r.id for r in frame.radar}
    local_radar = [d.radar.id for d in res.detections if d.stage == "local"]
    assert len(local_radar) == len(set(local_radar))
    for d in res.detections:
        if d.tag == VR:
            limit = RUN.delta_local if d.stage == "local" else RUN.delta_global
            assert d.similarity > limit
            assert d.feature.range == d.radar.range


@given(frames(), st.randoms(use_true_random=False))
def test_order_invariance(frame, rnd):
    from fusetrack.geometry import CameraModel

    vision, radar = list(frame.vision), list(frame.radar)
    rnd.shuffle(vision)
    rnd.shuffle(radar)
    a = intra_frame_fuse(frame, CameraModel(1500.0, 500.0, 800.0, 1.5, 0.0, 0.3), SCORER, RUN)
    b = intra_frame_fuse(Frame(0.0, vision, radar), CameraModel(1500.0, 500.0, 800.0, 1.5, 0.0, 0.3), SCORER, RUN)
    assert _signature(a) == _signature(b)
    assert a.pitch == pytest.approx(b.pitch, abs=1e-15)


@given(frames())
def test_no_radar_never_moves_pitch(frame):
    from fusetrack.geometry import CameraModel

    cam = CameraModel(1500.0, 500.0, 800.0, 1.5, 0.013, 0.3)
    res = intra_frame_fuse(Frame(0.0, frame.vision, []), cam, SCORER, RUN)
    assert cam.pitch == 0.013
    assert all(d.tag == V for d in res.detections)
    assert len(res.detections) == len(frame.vision)
