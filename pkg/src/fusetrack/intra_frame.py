"""Per-frame camera/radar fusion.

Pipeline for one frame: split detections by confidence, associate the
high-confidence ones one-to-one, use those pairs to re-align the camera pitch,
re-range the vision detections, then associate everything left over with
one-to-many radar sharing. Output is a list of VR / V / R fused detections.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .affinity import as_feature_array, extract_common_feature
from .assignment import assign_with_threshold, one_to_many_assign
from .detections import R, V, VR, CommonFeature, FusedDetection
from .errors import HorizonDegenerate, InvalidExtent
from .geometry import estimate_pitch, size_range

logger = logging.getLogger(__name__)

DCA_MODES = ("radar", "image", "off")


@dataclass
class IntraFrameResult:
    detections: list
    local_pairs: int = 0
    global_pairs: int = 0
    pitch: float = 0.0
    dca_pairs: int = 0
    excluded: list = field(default_factory=list)


def split_by_confidence(frame, delta_v, delta_r):
    """(VH, VL, RH, RL); a confidence equal to the threshold counts as high."""
    vh = [d for d in frame.vision if d.conf >= delta_v]
    vl = [d for d in frame.vision if d.conf < delta_v]
    rh = [d for d in frame.radar if d.conf >= delta_r]
    rl = [d for d in frame.radar if d.conf < delta_r]
    return vh, vl, rh, rl


def similarity_matrix(scorer, A, B):
    A = as_feature_array(A)
    B = as_feature_array(B)
    if len(A) == 0 or len(B) == 0:
        return np.zeros((len(A), len(B)))
    return np.asarray(scorer(A, B), dtype=float)


def local_association(vision_features, radar_features, scorer, delta_local):
    """One-to-one thresholded matching of high-confidence detections.

    Returns ([(vision idx, radar idx, similarity)], leftover vision idx,
    leftover radar idx); leftovers go on to the global stage.
    """
    S = similarity_matrix(scorer, vision_features, radar_features)
    if S.size == 0:
        return [], list(range(S.shape[0])), list(range(S.shape[1]))
    result = assign_with_threshold(S, delta_local)
    pairs = [(i, j, float(S[i, j])) for i, j in result.matched]
    return pairs, sorted(result.unmatched_rows), sorted(result.unmatched_cols)


def global_association(vision_features, radar_features, scorer, delta_global, cap=None):
    """Row-wise best-radar matching where one radar return may serve several vision detections.

    Returns ([(vision idx, radar idx, similarity)], unmatched vision idx,
    unclaimed radar idx).
    """
    S = similarity_matrix(scorer, vision_features, radar_features)
    m, n = S.shape
    pairs = [(i, j, float(S[i, j])) for i, j in one_to_many_assign(S, delta_global, cap)] if S.size else []
    used_v = {i for i, _, _ in pairs}
    used_r = {j for _, j, _ in pairs}
    return pairs, [i for i in range(m) if i not in used_v], [j for j in range(n) if j not in used_r]


def _vision_features(dets, camera, velocity_hints):
    feats, ok, bad = [], [], []
    for det in dets:
        try:
            feats.append(extract_common_feature(det, camera, velocity_hints.get(det.id)))
            ok.append(det)
        except HorizonDegenerate:
            logger.debug("vision detection %s cannot be ranged; passed through", det.id)
            bad.append(det)
    return feats, ok, bad


def _fused_vr(vdet, vfeat, rdet, rfeat, sim, stage):
    feature = CommonFeature(rfeat.range, vfeat.azimuth, rfeat.velocity, max(vfeat.confidence, rfeat.confidence))
    return FusedDetection(VR, vdet, rdet, feature, vfeat, rfeat, sim, stage)


def intra_frame_fuse(frame, camera, scorer, config, velocity_hints=None, dca="radar"):
    """Fuse one frame. Updates ``camera.pitch`` when alignment fires.

    ``dca`` selects the pitch reference: ranges of locally matched radar
    returns ("radar"), size-based ranging of confident vision boxes ("image"),
    or no alignment ("off").
    """
    if dca not in DCA_MODES:
        raise ValueError(f"dca must be one of {DCA_MODES}")
    hints = velocity_hints or {}
    vh, vl, rh, rl = split_by_confidence(frame, config.delta_v, config.delta_r)

    vh_feats, vh, bad_h = _vision_features(vh, camera, hints)
    rh_feats = [extract_common_feature(d) for d in rh]
    local, left_v, left_r = local_association(vh_feats, rh_feats, scorer, config.delta_local)

    refs = []
    if dca == "radar":
        for i, j, _ in local:
            r = rh[j]
            refs.append((r.range * math.cos(r.azimuth), vh[i].v))
    elif dca == "image":
        for det in vh:
            try:
                refs.append((size_range(camera, det.w, config.size_prior_width), det.v))
            except InvalidExtent:
                continue
    if refs:
        estimate_pitch(camera, refs)

    # re-range every vision detection with the aligned pitch
    all_vision = vh + vl
    feats, ranged, bad_l = _vision_features(all_vision, camera, hints)
    feat_of = {d.id: f for d, f in zip(ranged, feats)}
    paired = {vh[i].id for i, _, _ in local}
    excluded = bad_h + [d for d in bad_l if d.id not in paired]

    out = []
    for i, j, sim in local:
        out.append(_fused_vr(vh[i], feat_of.get(vh[i].id, vh_feats[i]), rh[j], rh_feats[j], sim, "local"))

    pool_v = [d for d in [vh[i] for i in left_v] + vl if d.id in feat_of]
    pool_r = [rh[j] for j in left_r] + rl
    pool_v_feats = [feat_of[d.id] for d in pool_v]
    pool_r_feats = [extract_common_feature(d) for d in pool_r]
    glob, v_single, r_single = global_association(
        pool_v_feats, pool_r_feats, scorer, config.delta_global, config.one_to_many_cap
    )
    for i, j, sim in glob:
        out.append(_fused_vr(pool_v[i], pool_v_feats[i], pool_r[j], pool_r_feats[j], sim, "global"))
    for i in v_single:
        out.append(FusedDetection(V, pool_v[i], None, pool_v_feats[i], pool_v_feats[i], None))
    for det in excluded:
        out.append(FusedDetection(V, det, None, None, None, None))
    for j in r_single:
        out.append(FusedDetection(R, None, pool_r[j], pool_r_feats[j], None, pool_r_feats[j]))

    return IntraFrameResult(
        detections=out,
        local_pairs=len(local),
        global_pairs=len(glob),
        pitch=camera.pitch,
        dca_pairs=len(refs),
        excluded=[d.id for d in excluded],
    )

