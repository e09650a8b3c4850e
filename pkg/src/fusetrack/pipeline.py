"""End-to-end processing of a frame sequence and scoring of its track output."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .affinity import ArtificialScorer, DanScorer, calibrate_output_bias, dan_train
from .detections import Frame
from .errors import ConfigError, EvalError
from .evaluation import (
    MetricReport,
    cipv_accuracy,
    depth_metrics,
    histogram,
    match_predictions,
    ranging_accuracy,
)
from .inter_frame import CONFIRMED, Tracker
from .intra_frame import intra_frame_fuse

logger = logging.getLogger(__name__)

# ablation arms: (use_radar, dca, scorer, loss)
ARMS = {
    "Baseline-R": dict(use_radar=False, dca=False, scorer="artificial"),
    "Baseline-R+DCA": dict(use_radar=False, dca=True, scorer="artificial"),
    "Baseline": dict(use_radar=True, dca=False, scorer="artificial"),
    "Baseline+DCA": dict(use_radar=True, dca=True, scorer="artificial"),
    "Baseline+DCA+DAN-ml": dict(use_radar=True, dca=True, scorer="dan", dan_loss="mask"),
    "Baseline+DCA+DAN-al": dict(use_radar=True, dca=True, scorer="dan", dan_loss="affinity"),
}


def build_scorer(run_config, model=None):
    if run_config.scorer == "dan":
        if model is None:
            raise ConfigError("scorer 'dan' needs a trained model (--model)")
        return DanScorer(model, run_config.weights)
    return ArtificialScorer(run_config.weights)


def train_dan(dataset, run_config, loss=None):
    """Train a DAN with the run's hyperparameters, then calibrate per ``dan_calibrate``.

    The margin objective only orders scores, so by default only models trained
    with it have their decision point moved to 0.5; the mask objective already
    regresses toward 0/1 labels.
    """
    loss = loss or run_config.dan_loss
    model = dan_train(
        dataset,
        lr=run_config.dan_lr,
        epochs=run_config.dan_epochs,
        margin=run_config.dan_margin,
        seed=run_config.dan_seed,
        loss=loss,
        hidden=run_config.dan_hidden,
    )
    if run_config.dan_calibrate == "all" or (run_config.dan_calibrate == "affinity" and loss == "affinity"):
        model = calibrate_output_bias(model, dataset)
    return model


def dca_mode(run_config):
    if not run_config.dca:
        return "off"
    return "radar" if run_config.use_radar else "image"


@dataclass
class RunResult:
    records: list
    pitch_trace: list = field(default_factory=list)
    hint_trace: list = field(default_factory=list)
    local_trace: list = field(default_factory=list)
    local_pairs: int = 0
    global_pairs: int = 0
    frames: int = 0


def track_record(track, t):
    st = track.state
    det = track.last_detection if track.misses == 0 else None
    return {
        "t": float(t),
        "track_id": int(track.id),
        "status": track.status,
        "tag": track.tag,
        "det_tag": track.det_tag,
        "updated": track.misses == 0,
        "range": float(st[0]),
        "azimuth": float(st[1]),
        "velocity": float(st[2]),
        "x": float(st[0] * np.sin(st[1])),
        "y": float(st[0] * np.cos(st[1])),
        "vision_id": det.vision.id if det is not None and det.vision is not None else None,
        "radar_id": det.radar.id if det is not None and det.radar is not None else None,
    }


def run_pipeline(frames, camera, run_config, scorer):
    """Fuse and track every frame; ``camera`` is copied, never mutated."""
    cam = camera.copy(pitch_smoothing=run_config.dca_smoothing)
    tracker = Tracker(scorer, run_config)
    mode = dca_mode(run_config)
    result = RunResult(records=[])
    for frame in frames:
        if not run_config.use_radar:
            frame = Frame(t=frame.t, vision=frame.vision, radar=[])
        hints = tracker.hints(frame.vision)
        fused = intra_frame_fuse(frame, cam, scorer, run_config, hints, mode)
        tracker.step(fused.detections, frame.t)
        result.pitch_trace.append(cam.pitch)
        result.hint_trace.append(hints)
        result.local_trace.append(fused.local_pairs)
        result.local_pairs += fused.local_pairs
        result.global_pairs += fused.global_pairs
        result.frames += 1
        for tr in sorted(tracker.tracks, key=lambda tr: tr.id):
            result.records.append(track_record(tr, frame.t))
    return result


def arm_config(run_config, arm):
    return replace(run_config, **ARMS[arm])


def _key(t):
    return round(float(t), 6)


def evaluate_run(records, gt_frames, run_config, name=""):
    """Score confirmed, freshly updated tracks against visible ground-truth objects."""
    gt_times = {_key(g.t) for g in gt_frames}
    preds_by_t = defaultdict(list)
    for rec in records:
        k = _key(rec["t"])
        if k not in gt_times:
            raise EvalError(f"track record at t={rec['t']} has no ground-truth frame")
        if rec["status"] == CONFIRMED and rec["updated"]:
            preds_by_t[k].append(rec)

    samples, matched_pred, matched_gt, all_gt = [], [], [], []
    cipv_frames = []
    offset = run_config.bumper_offset
    for g in gt_frames:
        preds = preds_by_t.get(_key(g.t), [])
        objs = [o for o in g.objects if o.visible]
        gpts = [tuple(o.midpoint) for o in objs]
        ppts = [(p["x"], p["y"]) for p in preds]
        claims = match_predictions(ppts, gpts, run_config.eval_gate, run_config.eval_gate_rel)
        for gi, o in enumerate(objs):
            all_gt.append(o.distance)
            pi = claims.get(gi)
            pred = None if pi is None else max(0.0, preds[pi]["range"] - offset)
            samples.append((pred, o.distance))
            if pred is not None and pred > 0 and o.distance > 0:
                matched_pred.append(pred)
                matched_gt.append(o.distance)
        cipv_frames.append((
            [(p["x"], p["y"], max(0.0, p["range"] - offset)) for p in preds],
            [(x, y, o.distance) for (x, y), o in zip(gpts, objs)],
        ))

    samples = [(p, g) for p, g in samples if g > 0]
    acc = ranging_accuracy(samples)
    cipv, n_cipv = cipv_accuracy(cipv_frames, run_config.cipv_half_lane, run_config.eval_gate, run_config.eval_gate_rel)
    depth = depth_metrics(matched_pred, matched_gt) if matched_pred else {}
    return MetricReport(
        name=name,
        depth=depth,
        bins=acc["bins"],
        counts=acc["counts"],
        car_average=acc["average"],
        cipv=cipv,
        cipv_frames=n_cipv,
        total=acc["total"],
        matched=len(matched_pred),
        distance_histogram=histogram(all_gt),
    )
