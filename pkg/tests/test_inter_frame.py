import json
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetrack.affinity import ArtificialScorer
from fusetrack.config import RunConfig
from fusetrack.detections import R, V, VR, CommonFeature, Frame, FusedDetection, RadarDetection, VisionDetection
from fusetrack.inter_frame import (
    CONFIRMED,
    HETEROGENEOUS,
    HOMOLOGOUS,
    MATCH_MODES,
    TENTATIVE,
    Track,
    Tracker,
    inter_frame_associate,
    is_homologous,
    new_track,
    pairwise_track_similarity,
    predict,
    update_tracks,
)
from fusetrack.pipeline import run_pipeline

from test_intra_frame import radar_at, vision_at

RUN = RunConfig()
SCORER = ArtificialScorer(RUN.weights)


def fused(tag, rng_m, az=0.0, vel=0.0, name="d", conf=0.9, vision_range=None):
    vision = VisionDetection(f"{name}v", 800.0, 600.0, 50.0, 40.0, conf) if "V" in tag else None
    radar = RadarDetection(f"{name}r", rng_m, az, vel, conf) if "R" in tag else None
    vfeat = CommonFeature(rng_m if vision_range is None else vision_range, az, vel, conf) if vision else None
    rfeat = CommonFeature(rng_m, az, vel, conf) if radar else None
    feat = rfeat if radar else vfeat
    return FusedDetection(tag, vision, radar, feat, vfeat, rfeat)


def test_predict_examples():
    tr = Track(0, VR, np.array([20.0, 0.0, -2.0, 0.9]), 0.0)
    assert predict(tr, 0.5) == CommonFeature(19.0, 0.0, -2.0, 0.9)
    assert predict(tr, 0.0) == CommonFeature(20.0, 0.0, -2.0, 0.9)
    still = Track(1, VR, np.array([20.0, 0.1, 0.0, 0.9]), 0.0)
    assert predict(still, 7.3).range == 20.0
    with pytest.raises(ValueError):
        predict(tr, -0.1)


def test_nine_modes_split_seven_two():
    assert len(MATCH_MODES) == 9 and len(set(MATCH_MODES)) == 9
    assert len(HOMOLOGOUS) == 7 and len(HETEROGENEOUS) == 2
    assert HETEROGENEOUS == {(V, R), (R, V)}
    assert is_homologous(VR, R) and not is_homologous(R, V)


def test_similarity_examples():
    det = fused(VR, 20.0)
    tr = new_track(0, det, 0.0)
    assert pairwise_track_similarity(tr, det, SCORER, 0.0) == 1.0
    # vision view off by 2 m (sim 0.8), radar view off by 4 m (sim 0.6)
    tr.vision_state = np.array([22.0, 0.0, 0.0, 0.9])
    tr.radar_state = np.array([24.0, 0.0, 0.0, 0.9])
    assert pairwise_track_similarity(tr, det, SCORER, 0.0) == pytest.approx(0.7)
    vtrack = new_track(1, fused(V, 30.0, 0.05, 1.0), 0.0)
    assert pairwise_track_similarity(vtrack, fused(R, 30.0, 0.05, 1.0), SCORER, 0.0) == 1.0


def test_association_examples():
    tr = new_track(0, fused(VR, 20.0), 0.0)
    assoc = inter_frame_associate([tr], [fused(VR, 20.2)], SCORER, RUN, 0.1)
    assert assoc.matches == [(0, 0, "homologous")]
    vtrack = new_track(1, fused(V, 30.0, 0.02), 0.0)
    assoc = inter_frame_associate([vtrack], [fused(R, 30.3, 0.021)], SCORER, RUN, 0.1)
    assert assoc.matches == [(0, 0, "heterogeneous")]
    far = inter_frame_associate([tr], [fused(VR, 70.0, 0.3, 5.0)], SCORER, RUN, 0.1)
    assert far.matches == [] and far.unmatched_tracks == [0] and far.unmatched_dets == [0]


def test_stage_separation_prefers_shared_sensor():
    # the R detection is a perfect BEV match for the V track, but a V detection is nearly as good
    vtrack = new_track(0, fused(V, 30.0), 0.0)
    dets = [fused(R, 30.0, name="a"), fused(V, 30.5, name="b")]
    assoc = inter_frame_associate([vtrack], dets, SCORER, RUN, 0.1)
    assert assoc.matches == [(0, 1, "homologous")]
    assert assoc.unmatched_dets == [0]


@settings(max_examples=60)
@given(st.lists(st.tuples(st.sampled_from([VR, V, R]), st.floats(5, 100), st.floats(-0.3, 0.3)), max_size=5),
       st.lists(st.tuples(st.sampled_from([VR, V, R]), st.floats(5, 100), st.floats(-0.3, 0.3)), max_size=5))
def test_stage_modes_are_consistent(track_specs, det_specs):
    tracks = [new_track(k, fused(tag, r, a, name=f"t{k}"), 0.0) for k, (tag, r, a) in enumerate(track_specs)]
    dets = [fused(tag, r, a, name=f"d{k}") for k, (tag, r, a) in enumerate(det_specs)]
    assoc = inter_frame_associate(tracks, dets, SCORER, RUN, 0.1)
    for i, j, stage in assoc.matches:
        mode = (tracks[i].tag, dets[j].tag)
        assert (stage == "homologous") == (mode in HOMOLOGOUS)
    ti = [i for i, _, _ in assoc.matches]
    dj = [j for _, j, _ in assoc.matches]
    assert len(set(ti)) == len(ti) and len(set(dj)) == len(dj)
    assert sorted(ti + assoc.unmatched_tracks) == list(range(len(tracks)))
    assert sorted(dj + assoc.unmatched_dets) == list(range(len(dets)))


def test_lifecycle_and_tag_upgrade():
    cfg = RunConfig(n_confirm=3, n_miss=5)
    tracker = Tracker(SCORER, cfg)
    tracker.step([fused(V, 20.0)], 0.0)
    assert len(tracker.tracks) == 1 and tracker.tracks[0].status == TENTATIVE
    tracker.step([fused(V, 20.0)], 0.1)
    assert tracker.tracks[0].status == TENTATIVE
    tracker.step([fused(VR, 20.0)], 0.2)
    tr = tracker.tracks[0]
    assert tr.status == CONFIRMED and tr.tag == VR and tr.hits == 3
    for k in range(4):
        tracker.step([], 0.3 + 0.1 * k)
        assert tracker.tracks and tracker.tracks[0].misses == k + 1
    tracker.step([], 0.7)
    assert tracker.tracks == []


def test_update_tracks_spawns_with_fresh_ids():
    dets = [fused(VR, 20.0, name="a"), fused(R, 50.0, 0.2, name="b")]
    assoc = inter_frame_associate([], dets, SCORER, RUN, 0.0)
    tracks, next_id = update_tracks([], assoc, dets, 0.0, RUN, 7)
    assert [t.id for t in tracks] == [7, 8] and next_id == 9
    assert all(t.status == TENTATIVE for t in tracks)


def test_track_ids_never_reused(fixture_scenario, fixture_config):
    res = run_pipeline(fixture_scenario.frames, fixture_config.camera.model(), fixture_config.run, SCORER)
    # once a track disappears it never comes back
    alive_by_t = {}
    for rec in res.records:
        alive_by_t.setdefault(rec["t"], set()).add(rec["track_id"])
    times = sorted(alive_by_t)
    gone = set()
    for a, b in zip(times, times[1:]):
        gone |= alive_by_t[a] - alive_by_t[b]
        assert not gone & alive_by_t[b]


def test_survives_radar_silence(cam):
    k = 4  # fewer than n_miss
    frames = []
    for n in range(20):
        t = 0.1 * n
        y = 25.0 - 1.0 * t
        vision = [vision_at(cam, f"v{n}", 1.0, y)]
        radar = [] if 5 <= n < 5 + k else [radar_at(f"r{n}", 1.0, y, vel=-1.0)]
        frames.append(Frame(t, vision, radar))
    res = run_pipeline(frames, cam, RUN, SCORER)
    confirmed = [r for r in res.records if r["status"] == CONFIRMED]
    assert {r["track_id"] for r in confirmed} == {0}
    assert len(confirmed) == 19 and all(r["updated"] for r in confirmed)
    silent = [r for r in confirmed if 0.45 < r["t"] < 0.1 * (5 + k) - 0.05]
    assert len(silent) == k and all(r["det_tag"] == V for r in silent)


def test_determinism(fixture_scenario, fixture_config):
    a = run_pipeline(fixture_scenario.frames, fixture_config.camera.model(), fixture_config.run, SCORER)
    b = run_pipeline(fixture_scenario.frames, fixture_config.camera.model(), fixture_config.run, SCORER)
    assert json.dumps(a.records) == json.dumps(b.records)
