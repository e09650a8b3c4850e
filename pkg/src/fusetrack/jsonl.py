"""Line-oriented JSON files for frames, ground truth and track output.

Frame line::

    {"t": 0.1,
     "vision": [{"id": "v0", "u": 812.5, "v": 530.1, "w": 80.2, "h": 60.0, "conf": 0.9, "class": "car"}],
     "radar":  [{"id": "r0", "range": 20.1, "azimuth": 0.01, "vel": -1.2, "conf": 0.8}]}

Vision entries may also carry ``range`` and ``vel``. Ground-truth line::

    {"t": 0.1, "pitch": 0.01,
     "objects": [{"id": "o0", "corners": [[x, y], ...4], "distance": 20.0, "visible": true,
                  "vision_id": "v0", "radar_id": "r0", "velocity": -1.2}]}

Track line (one per live track per frame)::

    {"t": 0.1, "track_id": 3, "status": "confirmed", "tag": "VR", "det_tag": "VR", "updated": true,
     "range": 20.0, "azimuth": 0.01, "velocity": -1.2, "x": 0.2, "y": 20.0,
     "vision_id": "v0", "radar_id": "r0"}

Numbers are written rounded to 6 decimals so files are byte-stable.
"""

from __future__ import annotations

import json
import math

from .detections import Frame, RadarDetection, VisionDetection
from .errors import ParseError
from .evaluation import GroundTruthFrame, GroundTruthObject

DECIMALS = 6

VISION_REQUIRED = ("id", "u", "v", "w", "h", "conf", "class")
VISION_OPTIONAL = ("range", "vel")
RADAR_REQUIRED = ("id", "range", "azimuth", "vel", "conf")
FRAME_REQUIRED = ("t", "vision", "radar")


def fmt(x):
    """Round a float for serialization (keeps -0.0 out of files)."""
    value = round(float(x), DECIMALS)
    return 0.0 if value == 0 else value


def dumps(obj):
    return json.dumps(obj, separators=(", ", ": "), ensure_ascii=False)


def _number(value, line, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParseError(f"expected a finite number, got {value!r}", line, path)
    return float(value)


def _string(value, line, path):
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise ParseError(f"expected a string id, got {value!r}", line, path)
    return str(value)


def _check_keys(obj, required, optional, strict, line, path):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", line, path)
    missing = [k for k in required if k not in obj]
    if missing:
        raise ParseError(f"missing field(s) {missing}", line, path)
    extra = {k: v for k, v in obj.items() if k not in required and k not in optional}
    if extra and strict:
        raise ParseError(f"unknown field(s) {sorted(extra)}", line, path)
    return extra


def parse_frame(obj, line=None, strict=True):
    extra = _check_keys(obj, FRAME_REQUIRED, (), strict, line, "frame")
    t = _number(obj["t"], line, "t")
    vision, radar = [], []
    if not isinstance(obj["vision"], list):
        raise ParseError("expected a list", line, "vision")
    if not isinstance(obj["radar"], list):
        raise ParseError("expected a list", line, "radar")
    for i, item in enumerate(obj["vision"]):
        path = f"vision[{i}]"
        ex = _check_keys(item, VISION_REQUIRED, VISION_OPTIONAL, strict, line, path)
        vision.append(VisionDetection(
            id=_string(item["id"], line, f"{path}.id"),
            u=_number(item["u"], line, f"{path}.u"),
            v=_number(item["v"], line, f"{path}.v"),
            w=_number(item["w"], line, f"{path}.w"),
            h=_number(item["h"], line, f"{path}.h"),
            conf=_number(item["conf"], line, f"{path}.conf"),
            cls=str(item["class"]),
            range=_number(item["range"], line, f"{path}.range") if item.get("range") is not None else None,
            vel=_number(item["vel"], line, f"{path}.vel") if item.get("vel") is not None else None,
            extra=ex,
        ))
        if not 0.0 <= vision[-1].conf <= 1.0:
            raise ParseError("confidence outside [0, 1]", line, f"{path}.conf")
    for i, item in enumerate(obj["radar"]):
        path = f"radar[{i}]"
        ex = _check_keys(item, RADAR_REQUIRED, (), strict, line, path)
        radar.append(RadarDetection(
            id=_string(item["id"], line, f"{path}.id"),
            range=_number(item["range"], line, f"{path}.range"),
            azimuth=_number(item["azimuth"], line, f"{path}.azimuth"),
            vel=_number(item["vel"], line, f"{path}.vel"),
            conf=_number(item["conf"], line, f"{path}.conf"),
            extra=ex,
        ))
        if not radar[-1].range > 0:
            raise ParseError("radar range must be positive", line, f"{path}.range")
        if not 0.0 <= radar[-1].conf <= 1.0:
            raise ParseError("confidence outside [0, 1]", line, f"{path}.conf")
    ids = [d.id for d in vision] + [d.id for d in radar]
    if len(set(ids)) != len(ids):
        raise ParseError("detection ids are not unique within the frame", line, "frame")
    return Frame(t=t, vision=vision, radar=radar, extra=extra)


def frame_to_dict(frame):
    vision = []
    for d in frame.vision:
        item = {"id": d.id, "u": fmt(d.u), "v": fmt(d.v), "w": fmt(d.w), "h": fmt(d.h), "conf": fmt(d.conf), "class": d.cls}
        if d.range is not None:
            item["range"] = fmt(d.range)
        if d.vel is not None:
            item["vel"] = fmt(d.vel)
        item.update(d.extra)
        vision.append(item)
    radar = []
    for d in frame.radar:
        item = {"id": d.id, "range": fmt(d.range), "azimuth": fmt(d.azimuth), "vel": fmt(d.vel), "conf": fmt(d.conf)}
        item.update(d.extra)
        radar.append(item)
    out = {"t": fmt(frame.t), "vision": vision, "radar": radar}
    out.update(frame.extra)
    return out


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                yield lineno, json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc


def load_frames(path, strict=True):
    """Parse a frame JSONL file; timestamps must strictly increase."""
    frames = []
    for lineno, obj in _read_lines(path):
        frame = parse_frame(obj, lineno, strict)
        if frames and not frame.t > frames[-1].t:
            raise ParseError("timestamps must be strictly increasing", lineno, "t")
        frames.append(frame)
    return frames


def save_frames(frames, path):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(dumps(frame_to_dict(frame)) + "\n")


def gt_frame_to_dict(frame):
    out = {"t": fmt(frame.t)}
    if frame.pitch is not None:
        out["pitch"] = fmt(frame.pitch)
    out["objects"] = [
        {
            "id": o.id,
            "corners": [[fmt(x), fmt(y)] for x, y in o.corners],
            "distance": fmt(o.distance),
            "visible": bool(o.visible),
            "vision_id": o.vision_id,
            "radar_id": o.radar_id,
            "velocity": fmt(o.velocity),
        }
        for o in frame.objects
    ]
    return out


def save_gt(frames, path):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(dumps(gt_frame_to_dict(frame)) + "\n")


def load_gt(path):
    frames = []
    for lineno, obj in _read_lines(path):
        if not isinstance(obj, dict) or "t" not in obj or "objects" not in obj:
            raise ParseError("ground-truth line needs t and objects", lineno)
        objects = []
        for i, o in enumerate(obj["objects"]):
            path_ = f"objects[{i}]"
            if not isinstance(o, dict) or not {"id", "corners", "distance"} <= set(o):
                raise ParseError("object needs id, corners, distance", lineno, path_)
            corners = o["corners"]
            if not (isinstance(corners, list) and len(corners) == 4 and all(isinstance(c, list) and len(c) == 2 for c in corners)):
                raise ParseError("corners must be four [x, y] points", lineno, f"{path_}.corners")
            objects.append(GroundTruthObject(
                id=str(o["id"]),
                corners=[[_number(x, lineno, f"{path_}.corners"), _number(y, lineno, f"{path_}.corners")] for x, y in corners],
                distance=_number(o["distance"], lineno, f"{path_}.distance"),
                visible=bool(o.get("visible", True)),
                vision_id=o.get("vision_id"),
                radar_id=o.get("radar_id"),
                velocity=_number(o.get("velocity", 0.0), lineno, f"{path_}.velocity"),
            ))
        pitch = obj.get("pitch")
        frames.append(GroundTruthFrame(
            t=_number(obj["t"], lineno, "t"),
            objects=objects,
            pitch=None if pitch is None else _number(pitch, lineno, "pitch"),
        ))
    return frames


TRACK_FIELDS = ("t", "track_id", "status", "tag", "det_tag", "updated", "range", "azimuth", "velocity", "x", "y",
                "vision_id", "radar_id")


def save_tracks(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(track_record_to_dict(rec)) + "\n")


def track_record_to_dict(rec):
    out = {}
    for key in TRACK_FIELDS:
        value = rec[key]
        out[key] = fmt(value) if isinstance(value, float) else value
    return out


def load_tracks(path):
    records = []
    for lineno, obj in _read_lines(path):
        if not isinstance(obj, dict):
            raise ParseError("expected an object", lineno)
        missing = [k for k in TRACK_FIELDS if k not in obj]
        if missing:
            raise ParseError(f"missing field(s) {missing}", lineno)
        records.append(obj)
    return records
