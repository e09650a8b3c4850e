"""Track-to-detection association across frames.

Tracks and fused detections each carry a modality tag (VR, V or R), giving
nine (track tag, detection tag) matching modes. Seven of them share a sensor
and are scored by same-sensor comparisons; V-R and R-V are scored on the
common BEV features. Shared-sensor modes are associated first.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assignment import assign_with_threshold
from .detections import R, TAGS, V, VR, CommonFeature

logger = logging.getLogger(__name__)

TENTATIVE, CONFIRMED, DEAD = "tentative", "confirmed", "dead"

MATCH_MODES = tuple((a, b) for a in TAGS for b in TAGS)

# sensors compared for each shared-sensor mode; heterogeneous modes map to ()
MODE_SENSORS = {
    (VR, VR): ("V", "R"),
    (VR, V): ("V",),
    (VR, R): ("R",),
    (V, VR): ("V",),
    (V, V): ("V",),
    (R, VR): ("R",),
    (R, R): ("R",),
    (V, R): (),
    (R, V): (),
}
HOMOLOGOUS = frozenset(m for m, s in MODE_SENSORS.items() if s)
HETEROGENEOUS = frozenset(m for m, s in MODE_SENSORS.items() if not s)


def is_homologous(track_tag, det_tag):
    return (track_tag, det_tag) in HOMOLOGOUS


def richer_tag(a, b):
    letters = set(a) | set(b)
    return VR if letters == {"V", "R"} else a


@dataclass
class Track:
    id: int
    tag: str
    state: np.ndarray
    last_t: float
    vision_state: Optional[np.ndarray] = None
    radar_state: Optional[np.ndarray] = None
    hits: int = 1
    misses: int = 0
    status: str = TENTATIVE
    det_tag: str = ""
    last_bbox: Optional[tuple] = None
    last_detection: object = None
    history: deque = field(default_factory=lambda: deque(maxlen=10))

    @property
    def feature(self):
        return CommonFeature.from_array(self.state)


def _advance(state, dt):
    if state is None:
        return None
    out = np.array(state, dtype=float)
    out[0] += out[2] * dt
    return out


def predict(track, dt):
    """Constant radial velocity extrapolation of the fused state."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return CommonFeature.from_array(_advance(track.state, dt))


def _predicted_views(track, t):
    dt = max(0.0, t - track.last_t)
    vel = track.state[2]
    views = {}
    for name, st in (("F", track.state), ("V", track.vision_state), ("R", track.radar_state)):
        if st is None:
            views[name] = None
            continue
        out = np.array(st, dtype=float)
        out[0] += vel * dt
        views[name] = out
    return views


def _det_views(det):
    return {
        "F": None if det.feature is None else det.feature.as_array(),
        "V": None if det.vision_feature is None else det.vision_feature.as_array(),
        "R": None if det.radar_feature is None else det.radar_feature.as_array(),
    }


def combine(sims, vision_weight=0.5):
    """Mean of per-sensor similarities (weighted by ``vision_weight`` when both sensors are present)."""
    if len(sims) == 1:
        return next(iter(sims.values()))
    return vision_weight * sims["V"] + (1.0 - vision_weight) * sims["R"]


def pairwise_track_similarity(track, det, scorer, t, vision_weight=0.5):
    """Similarity in [0, 1] between a track (predicted to time ``t``) and a fused detection."""
    tv = _predicted_views(track, t)
    dv = _det_views(det)
    sensors = MODE_SENSORS[(track.tag, det.tag)]
    if not sensors:
        if tv["F"] is None or dv["F"] is None:
            return 0.0
        return float(scorer(tv["F"][None, :], dv["F"][None, :])[0, 0])
    sims = {}
    for s in sensors:
        if tv[s] is None or dv[s] is None:
            continue
        sims[s] = float(scorer(tv[s][None, :], dv[s][None, :])[0, 0])
    if not sims:
        return 0.0
    return float(combine(sims, vision_weight))


def _view_matrix(scorer, rows, cols):
    """Scores between available views; missing views yield NaN."""
    S = np.full((len(rows), len(cols)), np.nan)
    ri = [i for i, r in enumerate(rows) if r is not None]
    ci = [j for j, c in enumerate(cols) if c is not None]
    if ri and ci:
        block = scorer(np.array([rows[i] for i in ri]), np.array([cols[j] for j in ci]))
        S[np.ix_(ri, ci)] = block
    return S


def similarity_matrices(tracks, dets, scorer, t, vision_weight=0.5):
    """(homologous, heterogeneous) similarity matrices; entries of the other family are 0."""
    m, n = len(tracks), len(dets)
    homo = np.zeros((m, n))
    hetero = np.zeros((m, n))
    if m == 0 or n == 0:
        return homo, hetero
    tv = [_predicted_views(tr, t) for tr in tracks]
    dv = [_det_views(d) for d in dets]
    mats = {s: _view_matrix(scorer, [v[s] for v in tv], [v[s] for v in dv]) for s in ("F", "V", "R")}
    for i, tr in enumerate(tracks):
        for j, det in enumerate(dets):
            sensors = MODE_SENSORS[(tr.tag, det.tag)]
            if not sensors:
                value = mats["F"][i, j]
                hetero[i, j] = 0.0 if np.isnan(value) else value
                continue
            sims = {s: mats[s][i, j] for s in sensors if not np.isnan(mats[s][i, j])}
            homo[i, j] = combine(sims, vision_weight) if sims else 0.0
    return homo, hetero


@dataclass
class Association:
    matches: list  # (track idx, det idx, stage)
    unmatched_tracks: list
    unmatched_dets: list


def inter_frame_associate(tracks, dets, scorer, config, t):
    """Shared-sensor modes first, then cross-sensor modes among the leftovers."""
    homo, hetero = similarity_matrices(tracks, dets, scorer, t, config.vision_weight)
    matches = []
    if homo.size:
        stage1 = assign_with_threshold(homo, config.delta_track)
        matches += [(i, j, "homologous") for i, j in stage1.matched]
        left_t = sorted(stage1.unmatched_rows)
        left_d = sorted(stage1.unmatched_cols)
    else:
        left_t, left_d = list(range(len(tracks))), list(range(len(dets)))
    if left_t and left_d:
        sub = hetero[np.ix_(left_t, left_d)]
        stage2 = assign_with_threshold(sub, config.delta_track_hetero)
        matches += [(left_t[a], left_d[b], "heterogeneous") for a, b in stage2.matched]
        used_t = {left_t[a] for a, _ in stage2.matched}
        used_d = {left_d[b] for _, b in stage2.matched}
        left_t = [i for i in left_t if i not in used_t]
        left_d = [j for j in left_d if j not in used_d]
    return Association(matches, left_t, left_d)


def _blend(old, new, keep):
    if old is None:
        return None if new is None else np.array(new, dtype=float)
    if new is None:
        return old
    return keep * old + (1.0 - keep) * np.asarray(new, dtype=float)


def _bbox(det):
    v = det.vision
    return None if v is None else (v.u, v.v, v.w, v.h)


def new_track(track_id, det, t):
    tr = Track(
        id=track_id,
        tag=det.tag,
        state=det.feature.as_array(),
        last_t=t,
        vision_state=None if det.vision_feature is None else det.vision_feature.as_array(),
        radar_state=None if det.radar_feature is None else det.radar_feature.as_array(),
        det_tag=det.tag,
        last_bbox=_bbox(det),
        last_detection=det,
    )
    tr.history.append((t, det))
    return tr


def _range_rate(history, t, rng, min_span=0.5):
    """Least-squares slope of range over the history plus the new fix; None if too short."""
    ts = [h[0] for h in history if h[1].feature is not None] + [t]
    rs = [h[1].feature.range for h in history if h[1].feature is not None] + [rng]
    if len(ts) < 3 or ts[-1] - ts[0] < min_span:
        return None
    return float(np.polyfit(ts, rs, 1)[0])


def absorb(track, det, t, config, heterogeneous=False):
    """Fold a matched detection into the track state."""
    views = _predicted_views(track, t)
    keep = config.state_smoothing
    meas = det.feature.as_array()
    prior_velocity = views["F"][2]
    state = _blend(views["F"], meas, keep)
    if det.radar_feature is None:
        # no velocity measurement: nudge toward the range-rate of the recent fixes
        implied = _range_rate(track.history, t, meas[0])
        if implied is not None:
            state[2] = prior_velocity + config.velocity_smoothing * (implied - prior_velocity)
        else:
            state[2] = prior_velocity
    track.state = state
    track.vision_state = _blend(views["V"], None if det.vision_feature is None else det.vision_feature.as_array(), keep)
    track.radar_state = _blend(views["R"], None if det.radar_feature is None else det.radar_feature.as_array(), keep)
    if not heterogeneous or config.hetero_upgrade:
        track.tag = richer_tag(track.tag, det.tag)
    track.det_tag = det.tag
    track.last_t = t
    track.hits += 1
    track.misses = 0
    if det.vision is not None:
        track.last_bbox = _bbox(det)
    track.last_detection = det
    track.history.append((t, det))
    if track.status == TENTATIVE and track.hits >= config.n_confirm:
        track.status = CONFIRMED


def update_tracks(tracks, association, dets, t, config, next_id):
    """Apply an association: absorb matches, age misses, spawn tracks for new detections.

    Returns (live tracks, next free track id). Dead tracks are dropped.
    """
    for i, j, stage in association.matches:
        absorb(tracks[i], dets[j], t, config, heterogeneous=(stage == "heterogeneous"))
    for i in association.unmatched_tracks:
        tr = tracks[i]
        tr.misses += 1
        if tr.misses >= config.n_miss:
            tr.status = DEAD
    alive = [tr for tr in tracks if tr.status != DEAD]
    for j in association.unmatched_dets:
        det = dets[j]
        if det.feature is None:
            continue
        tr = new_track(next_id, det, t)
        if config.n_confirm <= 1:
            tr.status = CONFIRMED
        alive.append(tr)
        next_id += 1
    return alive, next_id


def _iou(a, b):
    ax0, ay0, ax1, ay1 = a[0] - a[2] / 2, a[1] - a[3], a[0] + a[2] / 2, a[1]
    bx0, by0, bx1, by1 = b[0] - b[2] / 2, b[1] - b[3], b[0] + b[2] / 2, b[1]
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def velocity_hints(tracks, vision_dets, min_iou=0.3):
    """Velocity of radar-backed tracks for vision detections overlapping their last box (greedy by IoU).

    Vision-only tracks give no hint: their range-rate is too noisy to help.
    """
    candidates = []
    for i, tr in enumerate(tracks):
        if tr.last_bbox is None or tr.radar_state is None:
            continue
        for j, det in enumerate(vision_dets):
            iou = _iou(tr.last_bbox, (det.u, det.v, det.w, det.h))
            if iou >= min_iou:
                candidates.append((-iou, i, j))
    candidates.sort()
    hints, used_t, used_d = {}, set(), set()
    for _, i, j in candidates:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        hints[vision_dets[j].id] = float(tracks[i].state[2])
    return hints


class Tracker:
    """Sequential inter-frame fusion state for one sensor stream."""

    def __init__(self, scorer, config):
        self.scorer = scorer
        self.config = config
        self.tracks = []
        self.next_id = 0

    def hints(self, vision_dets):
        return velocity_hints(self.tracks, vision_dets, self.config.velocity_hint_iou)

    def step(self, dets, t):
        usable = [d for d in dets if d.feature is not None]
        assoc = inter_frame_associate(self.tracks, usable, self.scorer, self.config, t)
        self.tracks, self.next_id = update_tracks(self.tracks, assoc, usable, t, self.config, self.next_id)
        return assoc
