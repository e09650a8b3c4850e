"""Deterministic synthetic camera + radar scenarios.

Vehicles move along lanes ahead of the ego car with piecewise-constant
longitudinal speed (they bounce between ``y_min`` and ``y_max``). Each frame
the rear bottom-center of every vehicle is projected through the pitched
pinhole camera, the radar reports its rear-face midpoint in polar form, and
both are perturbed, dropped and cluttered according to the config.

All randomness derives from ``seed`` through independent named streams, so
changing e.g. the clutter rate never moves the vehicles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .affinity import build_pair_features, extract_common_feature
from .detections import Frame, RadarDetection, VisionDetection
from .errors import HorizonDegenerate
from .evaluation import GroundTruthFrame, GroundTruthObject, gt_distance
from .geometry import project_ground_point
from .jsonl import fmt

logger = logging.getLogger(__name__)

STREAMS = {"trajectories": 1, "vision_noise": 2, "radar_noise": 3, "dropout": 4, "clutter": 5, "confidence": 6, "order": 7}


def stream(seed, name):
    return np.random.default_rng([seed, STREAMS[name]])


@dataclass(frozen=True)
class Vehicle:
    x: float
    y0: float
    vy: float
    width: float
    length: float
    height: float


@dataclass
class Scenario:
    frames: list
    gt: list


def make_vehicles(cfg):
    rng = stream(cfg.seed, "trajectories")
    if cfg.objects:
        return [
            Vehicle(
                x=float(o["x"]), y0=float(o["y"]), vy=float(o["vy"]),
                width=float(o.get("width", cfg.width_mean)),
                length=float(o.get("length", cfg.length)),
                height=float(o.get("height", cfg.object_height)),
            )
            for o in cfg.objects
        ]
    vehicles = []
    for _ in range(cfg.n_objects):
        lane = float(rng.choice(cfg.lanes))
        vehicles.append(Vehicle(
            x=lane + float(rng.uniform(-0.3, 0.3)),
            y0=float(rng.uniform(cfg.y_min, cfg.y_max)),
            vy=float(rng.uniform(-cfg.speed_max, cfg.speed_max)),
            width=float(cfg.width_mean + cfg.width_std * rng.standard_normal()),
            length=cfg.length,
            height=cfg.object_height,
        ))
    return vehicles


def bounce(y0, vy, t, lo, hi):
    """Position and velocity of a point moving at speed ``vy`` and reflecting off [lo, hi]."""
    if vy == 0 or not lo < y0 < hi:
        return y0, vy
    span = hi - lo
    q = (y0 - lo + vy * t) % (2 * span)
    if q <= span:
        return lo + q, vy
    return lo + 2 * span - q, -vy


def true_pitch(cfg, t):
    return cfg.pitch_offset + cfg.pitch_amplitude * math.sin(2 * math.pi * t / cfg.pitch_period)


def _in_outage(cfg, t):
    return any(lo <= t < hi for lo, hi in cfg.radar_outages)


def _conf(near, slope, distance, noise):
    return float(np.clip(near - slope * distance + noise, 0.05, 0.99))


def generate_scenario(config):
    """Frames and per-frame ground truth for ``config`` (a Config)."""
    cfg = config.scenario
    cfg.validate()
    camera = config.camera.model()
    vehicles = make_vehicles(cfg)
    rng_vn = stream(cfg.seed, "vision_noise")
    rng_rn = stream(cfg.seed, "radar_noise")
    rng_drop = stream(cfg.seed, "dropout")
    rng_clutter = stream(cfg.seed, "clutter")
    rng_conf = stream(cfg.seed, "confidence")
    rng_order = stream(cfg.seed, "order")
    n = len(vehicles)

    frames, gt = [], []
    for k in range(cfg.n_frames):
        t = k / cfg.frame_rate
        pitch = true_pitch(cfg, t)
        # fixed draw counts per frame keep every stream aligned regardless of visibility
        vnoise = rng_vn.standard_normal((n, 4)) * cfg.vision_px_sigma
        rnoise = rng_rn.standard_normal((n, 3)) * [cfg.radar_range_sigma, cfg.radar_azimuth_sigma, cfg.radar_velocity_sigma]
        vdrop = rng_drop.random(n) < cfg.vision_dropout
        rdrop = rng_drop.random(n) < cfg.radar_dropout
        cnoise = rng_conf.standard_normal((n, 2)) * cfg.conf_sigma

        vision, radar, objects = [], [], []
        for i, veh in enumerate(vehicles):
            y, vy = bounce(veh.y0, veh.vy, t, cfg.y_min, cfg.y_max)
            x = veh.x
            half = veh.width / 2
            corners = [[x - half, y], [x + half, y], [x + half, y + veh.length], [x - half, y + veh.length]]
            corners = [[fmt(a), fmt(b)] for a, b in corners]
            distance = gt_distance(corners)
            rng_true = math.hypot(x, y)
            radial_vel = y * vy / rng_true

            visible = rng_true <= cfg.max_range
            box = None
            if visible:
                try:
                    u, vp = project_ground_point(camera, x, y, 0.0, pitch)
                    _, v_top = project_ground_point(camera, x, y, veh.height, pitch)
                    u_l, _ = project_ground_point(camera, x - half, y, 0.0, pitch)
                    u_r, _ = project_ground_point(camera, x + half, y, 0.0, pitch)
                    box = (u, vp, u_r - u_l, vp - v_top)
                except HorizonDegenerate:
                    box = None
                visible = box is not None and 0 <= box[0] <= camera.image_width and box[1] <= camera.image_height

            if visible and not vdrop[i]:
                u, vp, w, h = box
                u, vp = u + vnoise[i, 0], vp + vnoise[i, 1]
                w, h = max(1.0, w + vnoise[i, 2]), max(1.0, h + vnoise[i, 3])
                conf = _conf(cfg.vision_conf_near, cfg.vision_conf_slope, rng_true, cnoise[i, 0])
                vision.append((i, u, vp, w, h, conf))
            if visible and not rdrop[i] and not _in_outage(cfg, t):
                r = max(0.1, rng_true + rnoise[i, 0])
                az = math.atan2(x, y) + rnoise[i, 1]
                vel = radial_vel + rnoise[i, 2]
                conf = _conf(cfg.radar_conf_near, cfg.radar_conf_slope, rng_true, cnoise[i, 1])
                radar.append(([i], r, az, vel, conf))
            objects.append(GroundTruthObject(
                id=f"o{i}", corners=corners, distance=distance, visible=visible,
                vision_id=None, radar_id=None, velocity=radial_vel,
            ))

        radar = _merge_radar(radar, cfg.radar_merge_range, cfg.radar_merge_azimuth)
        n_clutter = rng_clutter.poisson(cfg.clutter_rate) if cfg.clutter_rate > 0 else 0
        for _ in range(n_clutter):
            r = float(rng_clutter.uniform(5.0, cfg.max_range))
            ghost = ([], r, float(rng_clutter.uniform(-0.3, 0.3)), float(rng_clutter.normal(0.0, 3.0)),
                     float(rng_clutter.uniform(0.1, 0.5)))
            # a silenced radar reports no clutter either; draws still happen to keep the stream aligned
            if not _in_outage(cfg, t):
                radar.append(ghost)

        v_order = rng_order.permutation(len(vision))
        r_order = rng_order.permutation(len(radar))
        vision_dets = []
        for new_idx, old_idx in enumerate(v_order):
            i, u, vp, w, h, conf = vision[old_idx]
            vid = f"v{new_idx}"
            objects[i].vision_id = vid
            vision_dets.append(VisionDetection(vid, fmt(u), fmt(vp), fmt(w), fmt(h), fmt(conf), "car"))
        radar_dets = []
        for new_idx, old_idx in enumerate(r_order):
            owners, r, az, vel, conf = radar[old_idx]
            rid = f"r{new_idx}"
            for i in owners:
                objects[i].radar_id = rid
            radar_dets.append(RadarDetection(rid, fmt(r), fmt(az), fmt(vel), fmt(conf)))

        for o in objects:
            o.distance = fmt(o.distance)
            o.velocity = fmt(o.velocity)
        frames.append(Frame(t=fmt(t), vision=vision_dets, radar=radar_dets))
        gt.append(GroundTruthFrame(t=fmt(t), objects=objects, pitch=fmt(pitch)))
    return Scenario(frames, gt)


def _merge_radar(returns, max_dr, max_da):
    """Fuse returns closer than the radar resolution into one detection owned by all objects."""
    if max_dr <= 0 or max_da <= 0 or len(returns) < 2:
        return returns
    merged = []
    for ret in sorted(returns, key=lambda item: item[1]):
        for m in merged:
            if abs(m[1] - ret[1]) < max_dr and abs(m[2] - ret[2]) < max_da:
                k = len(m[0])
                m[0].extend(ret[0])
                for idx in (1, 2, 3):
                    m[idx] = (m[idx] * k + ret[idx]) / (k + 1)
                m[4] = max(m[4], ret[4])
                break
        else:
            merged.append([list(ret[0]), ret[1], ret[2], ret[3], ret[4]])
    return [tuple(m) for m in merged]


def _label_matrix(row_owners, col_owners):
    G = np.zeros((len(row_owners), len(col_owners)))
    for i, a in enumerate(row_owners):
        for j, b in enumerate(col_owners):
            if a is not None and a == b:
                G[i, j] = 1.0
    return G


def dan_dataset_features(frames, gt, camera, use_true_pitch=True, inter_frame=False):
    """Raw (row features, column features, label matrix) triples.

    Each frame contributes a vision-by-radar matrix. Vision velocities mirror
    the track-level hints available at run time: the object's radial velocity
    in the previous frame if radar saw it there, otherwise 0.

    With ``inter_frame`` every consecutive frame pair also contributes a
    vision-by-vision and a radar-by-radar matrix: previous-frame features
    moved forward at the object's radial velocity against the current ones,
    as the tracker compares them.
    """
    out = []
    prev = None
    prev_velocity = {}
    for frame, truth in zip(frames, gt):
        cam = camera.copy(pitch=truth.pitch) if use_true_pitch and truth.pitch is not None else camera
        by_vision = {o.vision_id: o for o in truth.objects if o.vision_id is not None}
        v_rows, v_owners = [], []
        for det in frame.vision:
            owner = by_vision.get(det.id)
            velocity = prev_velocity.get(owner.id, 0.0) if owner is not None else 0.0
            try:
                v_rows.append(extract_common_feature(det, cam, velocity=velocity).as_array())
            except HorizonDegenerate:
                continue
            v_owners.append(None if owner is None else owner.id)
        r_rows = [extract_common_feature(d).as_array() for d in frame.radar]
        r_owners = [[o.id for o in truth.objects if o.radar_id == d.id] for d in frame.radar]
        # merged returns belong to several objects; any of them may claim it
        r_first = [ids[0] if ids else None for ids in r_owners]
        if v_rows and r_rows:
            G = np.zeros((len(v_rows), len(r_rows)))
            for j, ids in enumerate(r_owners):
                for i, owner in enumerate(v_owners):
                    if owner is not None and owner in ids:
                        G[i, j] = 1.0
            out.append((np.array(v_rows), np.array(r_rows), G))
        if inter_frame and prev is not None:
            dt = frame.t - prev["t"]
            velocity = {o.id: o.velocity for o in truth.objects}
            for rows, owners, cur, cur_owners in (
                (prev["v_rows"], prev["v_owners"], v_rows, v_owners),
                (prev["r_rows"], prev["r_first"], r_rows, r_first),
            ):
                if not rows or not cur:
                    continue
                moved = np.array(rows, dtype=float)
                for i, owner in enumerate(owners):
                    if owner is not None:
                        moved[i, 0] += velocity.get(owner, 0.0) * dt
                out.append((moved, np.array(cur), _label_matrix(owners, cur_owners)))
        prev = dict(t=frame.t, v_rows=v_rows, v_owners=v_owners, r_rows=r_rows, r_first=r_first)
        prev_velocity = {o.id: o.velocity for o in truth.objects if o.radar_id is not None}
    return out


def make_dan_dataset(frames, gt, camera, weights, use_true_pitch=True, inter_frame=False):
    """(pair tensor, label matrix) samples for DAN training.

    Vision features are ranged with the frame's true pitch when available
    (an ideally aligned camera). Matrices with an empty side are skipped.
    """
    return [
        (build_pair_features(A, B, weights), G)
        for A, B, G in dan_dataset_features(frames, gt, camera, use_true_pitch, inter_frame)
    ]
