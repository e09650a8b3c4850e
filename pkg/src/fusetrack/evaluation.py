"""Ground-truth distances and ranging metrics.

Predictions and ground truth live in the vehicle BEV frame (x lateral,
y forward, metres). Range bins follow the usual car-ranging breakdown:
[0, 10), [10, 30), [30, 80), [80, 105].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .assignment import hungarian
from .errors import DegenerateBox, EmptyInput, NonPositive

BINS = ((0.0, 10.0), (10.0, 30.0), (30.0, 80.0), (80.0, 105.0))
BIN_LABELS = tuple(f"{int(lo)}-{int(hi)}m" for lo, hi in BINS)
DELTA_BASE = 1.25
CORRECT_TOLERANCE = 0.10


@dataclass
class GroundTruthObject:
    id: str
    corners: list
    distance: float
    visible: bool = True
    vision_id: Optional[str] = None
    radar_id: Optional[str] = None
    velocity: float = 0.0

    @property
    def midpoint(self):
        return nearest_edge_midpoint(self.corners)


@dataclass
class GroundTruthFrame:
    t: float
    objects: list = field(default_factory=list)
    pitch: Optional[float] = None


def nearest_edge_midpoint(corners):
    pts = np.asarray(corners, dtype=float)
    if pts.shape != (4, 2):
        raise DegenerateBox(f"expected 4 corner points, got shape {pts.shape}")
    if len({tuple(p) for p in pts.tolist()}) != 4:
        raise DegenerateBox("box corners are not distinct")
    # stable sort keeps the result independent of corner labelling except on exact ties
    order = np.lexsort((pts[:, 1], pts[:, 0], np.hypot(pts[:, 0], pts[:, 1])))
    return pts[order[:2]].mean(axis=0)


def gt_distance(corners, bumper_offset=0.0):
    """Distance from the ego bumper to the midpoint of the two box corners nearest the ego origin."""
    mid = nearest_edge_midpoint(corners)
    return max(0.0, float(math.hypot(mid[0], mid[1])) - bumper_offset)


def depth_metrics(pred, gt):
    """Threshold accuracies and error statistics of predicted vs true distances."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} differ in length")
    if pred.size == 0:
        raise EmptyInput("depth metrics need at least one sample")
    if np.any(gt <= 0) or np.any(pred <= 0):
        raise NonPositive("depth metrics need strictly positive distances")
    ratio = np.maximum(pred / gt, gt / pred)
    err = pred - gt
    return {
        "delta1": float(np.mean(ratio < DELTA_BASE)),
        "delta2": float(np.mean(ratio < DELTA_BASE ** 2)),
        "delta3": float(np.mean(ratio < DELTA_BASE ** 3)),
        "abs_rel": float(np.mean(np.abs(err) / gt)),
        "squa_rel": float(np.mean(err ** 2 / gt)),
        "rmse": float(np.sqrt(np.mean(err ** 2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(pred) - np.log(gt)) ** 2))),
    }


def range_bin(distance):
    for idx, (lo, hi) in enumerate(BINS):
        if lo <= distance < hi or (idx == len(BINS) - 1 and distance == hi):
            return idx
    return None


def is_correct(pred, gt, tolerance=CORRECT_TOLERANCE):
    return pred is not None and abs(pred - gt) / gt <= tolerance


def ranging_accuracy(samples, tolerance=CORRECT_TOLERANCE):
    """Per-bin and overall share of objects ranged within ``tolerance`` of the truth.

    ``samples`` holds (pred, gt) pairs; ``pred`` may be None for an object that
    received no prediction, which counts as incorrect. Objects outside every
    bin are ignored.
    """
    counts = [0] * len(BINS)
    correct = [0] * len(BINS)
    for pred, gt in samples:
        if not gt > 0:
            raise NonPositive(f"ground-truth distance must be positive, got {gt}")
        b = range_bin(gt)
        if b is None:
            continue
        counts[b] += 1
        correct[b] += bool(is_correct(pred, gt, tolerance))
    total = sum(counts)
    return {
        "bins": {label: (correct[i] / counts[i] if counts[i] else None) for i, label in enumerate(BIN_LABELS)},
        "counts": dict(zip(BIN_LABELS, counts)),
        "correct": dict(zip(BIN_LABELS, correct)),
        "average": sum(correct) / total if total else None,
        "total": total,
    }


def match_predictions(preds, gts, gate=3.0, gate_rel=0.0):
    """Claim ground-truth objects for predictions by minimum total BEV distance.

    ``preds`` and ``gts`` are sequences of (x, y) points. A pair is admissible
    when its distance is within max(gate, gate_rel * gt range). Returns a dict
    gt index -> pred index.
    """
    if not len(preds) or not len(gts):
        return {}
    P = np.asarray(preds, dtype=float).reshape(-1, 2)
    T = np.asarray(gts, dtype=float).reshape(-1, 2)
    dist = np.hypot(P[:, None, 0] - T[None, :, 0], P[:, None, 1] - T[None, :, 1])
    limit = np.maximum(gate, gate_rel * np.hypot(T[:, 0], T[:, 1]))[None, :]
    admissible = dist <= limit
    big = 1e3 * (1.0 + float(np.max(np.where(admissible, dist, 0.0))))
    result = hungarian(np.where(admissible, dist, big))
    return {j: i for i, j in result.matched if admissible[i, j]}


def cipv_index(points, half_lane=1.75):
    """Index of the nearest point with |x| < half_lane, or None."""
    best = None
    for idx, (x, y) in enumerate(points):
        if abs(x) < half_lane and y > 0:
            if best is None or math.hypot(x, y) < math.hypot(*points[best]):
                best = idx
    return best


def cipv_accuracy(frames, half_lane=1.75, gate=3.0, gate_rel=0.0, tolerance=CORRECT_TOLERANCE):
    """Share of frames whose closest in-path vehicle is both identified and ranged correctly.

    ``frames`` yields (predictions, ground truth) per frame, each a list of
    (x, y, range) tuples. Frames without an in-path ground-truth object are
    skipped. Returns (accuracy or None, number of scored frames).
    """
    scored = hits = 0
    for preds, gts in frames:
        g = cipv_index([(x, y) for x, y, _ in gts], half_lane)
        if g is None:
            continue
        scored += 1
        p = cipv_index([(x, y) for x, y, _ in preds], half_lane)
        if p is None:
            continue
        claims = match_predictions([(x, y) for x, y, _ in preds], [(x, y) for x, y, _ in gts], gate, gate_rel)
        if claims.get(g) == p and is_correct(preds[p][2], gts[g][2], tolerance):
            hits += 1
    return (hits / scored if scored else None), scored


@dataclass
class MetricReport:
    name: str = ""
    depth: dict = field(default_factory=dict)
    bins: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    car_average: Optional[float] = None
    cipv: Optional[float] = None
    cipv_frames: int = 0
    total: int = 0
    matched: int = 0
    distance_histogram: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _fmt(value, digits=4):
    return "-" if value is None else f"{value:.{digits}f}"


def depth_table(reports):
    header = ["", "d1", "d2", "d3", "AbsRel", "SquaRel", "RMSE", "RMSElog"]
    keys = ["delta1", "delta2", "delta3", "abs_rel", "squa_rel", "rmse", "rmse_log"]
    rows = [[r.name] + [_fmt(r.depth.get(k), 3) for k in keys] for r in reports]
    return _align([header] + rows)


def ranging_table(reports):
    labels = []
    for r in reports:
        for label in r.bins:
            if label not in labels:
                labels.append(label)
    labels.sort(key=lambda s: float(s.split("-")[0]))
    header = [""] + labels + ["Car", "CIPV"]
    rows = [[r.name] + [_fmt(r.bins.get(lb)) for lb in labels] + [_fmt(r.car_average), _fmt(r.cipv)] for r in reports]
    return _align([header] + rows)


def _align(rows):
    widths = [max(len(str(row[c])) for row in rows) for c in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [str(row[0]).rjust(widths[0])] + [str(v).rjust(w) for v, w in zip(row[1:], widths[1:])]
        lines.append(" | ".join(cells))
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def histogram(distances, width=5.0, upper=105.0):
    edges = np.arange(0.0, upper + width, width)
    counts, _ = np.histogram(np.asarray(distances, dtype=float), bins=edges)
    return {f"{edges[i]:g}-{edges[i + 1]:g}": int(c) for i, c in enumerate(counts)}
