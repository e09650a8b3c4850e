"""Run and scenario configuration: one YAML file with ``camera``, ``scenario`` and ``run`` sections.

Every key has a default; unknown keys and ill-typed values raise ConfigError.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .affinity import SimilarityWeights
from .errors import ConfigError
from .geometry import CameraModel


@dataclass
class CameraConfig:
    focal_length: float = 1260.0
    principal_row: float = 450.0
    principal_col: float = 800.0
    mount_height: float = 1.5
    pitch: float = 0.0
    image_width: int = 1600
    image_height: int = 900

    def model(self, smoothing=0.3, pitch=None):
        return CameraModel(
            focal_length=self.focal_length,
            principal_row=self.principal_row,
            principal_col=self.principal_col,
            mount_height=self.mount_height,
            pitch=self.pitch if pitch is None else pitch,
            pitch_smoothing=smoothing,
            image_width=self.image_width,
            image_height=self.image_height,
        )


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration: float = 20.0
    frame_rate: float = 10.0
    # objects: explicit list of {x, y, vy[, width, length, height]}; empty -> n_objects random ones
    objects: list = field(default_factory=list)
    n_objects: int = 6
    lanes: list = field(default_factory=lambda: [-3.5, 0.0, 3.5])
    y_min: float = 6.0
    y_max: float = 100.0
    speed_max: float = 4.0
    width_mean: float = 1.85
    width_std: float = 0.08
    length: float = 4.5
    object_height: float = 1.5
    max_range: float = 105.0
    # true camera pitch: offset + amplitude * sin(2 pi t / period)
    pitch_offset: float = 0.0
    pitch_amplitude: float = 0.0
    pitch_period: float = 6.0
    vision_px_sigma: float = 0.0
    radar_range_sigma: float = 0.0
    radar_azimuth_sigma: float = 0.0
    radar_velocity_sigma: float = 0.0
    vision_dropout: float = 0.0
    radar_dropout: float = 0.0
    clutter_rate: float = 0.0
    # radar silenced on [start, end) seconds
    radar_outages: list = field(default_factory=list)
    # radar returns closer than both limits are merged (azimuth resolution); 0 disables
    radar_merge_range: float = 0.0
    radar_merge_azimuth: float = 0.0
    vision_conf_near: float = 0.95
    vision_conf_slope: float = 0.006
    radar_conf_near: float = 0.9
    radar_conf_slope: float = 0.004
    conf_sigma: float = 0.0

    def validate(self):
        for name in ("vision_dropout", "radar_dropout"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"scenario.{name} must be a probability, got {value}")
        if self.duration <= 0 or self.frame_rate <= 0:
            raise ConfigError("scenario.duration and scenario.frame_rate must be positive")
        if self.y_max <= self.y_min:
            raise ConfigError("scenario.y_max must exceed scenario.y_min")
        if self.clutter_rate < 0:
            raise ConfigError("scenario.clutter_rate must be non-negative")
        for name in ("vision_px_sigma", "radar_range_sigma", "radar_azimuth_sigma", "radar_velocity_sigma", "conf_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"scenario.{name} must be non-negative")
        for obj in self.objects:
            if not isinstance(obj, dict) or not {"x", "y", "vy"} <= set(obj):
                raise ConfigError("scenario.objects entries need x, y and vy")
            extra = set(obj) - {"x", "y", "vy", "width", "length", "height"}
            if extra:
                raise ConfigError(f"scenario.objects: unknown keys {sorted(extra)}")
        for window in self.radar_outages:
            if not (isinstance(window, (list, tuple)) and len(window) == 2):
                raise ConfigError("scenario.radar_outages entries must be [start, end]")

    @property
    def n_frames(self):
        return int(round(self.duration * self.frame_rate))


@dataclass
class RunConfig:
    delta_v: float = 0.6
    delta_r: float = 0.5
    delta_local: float = 0.6
    delta_global: float = 0.5
    delta_track: float = 0.5
    delta_track_hetero: float = 0.6
    w_range: float = 0.5
    w_azimuth: float = 0.3
    w_velocity: float = 0.2
    thr_range: float = 5.0
    thr_azimuth: float = 0.05
    thr_velocity: float = 2.0
    use_radar: bool = True
    dca: bool = True
    dca_smoothing: float = 0.3
    # forward-size prior used when pitch is aligned from image ranging alone
    size_prior_width: float = 1.85
    scorer: str = "artificial"
    dan_hidden: int = 64
    dan_lr: float = 0.001
    dan_epochs: int = 20
    dan_margin: float = 0.2
    dan_seed: int = 42
    dan_loss: str = "affinity"
    # which trained models get their output bias re-centred: "affinity", "all" or "none"
    dan_calibrate: str = "affinity"
    # also train on frame-to-frame same-sensor pairs, as the tracker scores them
    dan_inter_frame: bool = True
    one_to_many_cap: Optional[int] = None
    n_confirm: int = 2
    n_miss: int = 5
    state_smoothing: float = 0.5
    velocity_smoothing: float = 0.1
    vision_weight: float = 0.5
    hetero_upgrade: bool = True
    velocity_hint_iou: float = 0.3
    cipv_half_lane: float = 1.75
    eval_gate: float = 3.0
    eval_gate_rel: float = 0.15
    bumper_offset: float = 0.0

    def validate(self):
        for name in ("delta_v", "delta_r", "delta_local", "delta_global", "delta_track", "delta_track_hetero",
                     "dca_smoothing", "state_smoothing", "velocity_smoothing", "vision_weight"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"run.{name} must lie in [0, 1], got {value}")
        if self.scorer not in ("artificial", "dan"):
            raise ConfigError(f"run.scorer must be 'artificial' or 'dan', got {self.scorer!r}")
        if self.dan_loss not in ("mask", "affinity"):
            raise ConfigError(f"run.dan_loss must be 'mask' or 'affinity', got {self.dan_loss!r}")
        if self.dan_calibrate not in ("affinity", "all", "none"):
            raise ConfigError(f"run.dan_calibrate must be 'affinity', 'all' or 'none', got {self.dan_calibrate!r}")
        if self.n_confirm < 1 or self.n_miss < 1:
            raise ConfigError("run.n_confirm and run.n_miss must be >= 1")
        if not 0.0 < self.dan_margin < 1.0:
            raise ConfigError("run.dan_margin must lie in (0, 1)")
        try:
            self.weights
        except ValueError as exc:
            raise ConfigError(f"run similarity weights: {exc}") from exc

    @property
    def weights(self):
        return SimilarityWeights(self.w_range, self.w_azimuth, self.w_velocity,
                                 self.thr_range, self.thr_azimuth, self.thr_velocity)


@dataclass
class Config:
    camera: CameraConfig = field(default_factory=CameraConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self):
        self.scenario.validate()
        self.run.validate()
        try:
            self.camera.model()
        except ValueError as exc:
            raise ConfigError(f"camera: {exc}") from exc
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


SECTIONS = {"camera": CameraConfig, "scenario": ScenarioConfig, "run": RunConfig}


def _coerce(section, key, value, default, annotation):
    where = f"{section}.{key}"
    if value is None:
        if "Optional" in str(annotation):
            return None
        raise ConfigError(f"{where} may not be null")
    if isinstance(default, bool) or annotation in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean, got {value!r}")
        return value
    if isinstance(default, float) or annotation in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, int) or "int" in str(annotation):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list, got {value!r}")
        return value
    return value


def _build_section(name, values):
    cls = SECTIONS[name]
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in values.items():
        kwargs[key] = _coerce(name, key, value, getattr(defaults, key), fields[key].type)
    return cls(**kwargs)


def config_from_dict(data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return Config(**{name: _build_section(name, data.get(name)) for name in SECTIONS}).validate()


def load_config(path=None, overrides=()):
    """Read a YAML config (defaults when ``path`` is None) and apply ``key=value`` overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    data = apply_overrides(data, overrides)
    return config_from_dict(data)


def apply_overrides(data, overrides):
    """Return a copy of ``data`` with ``section.key=value`` (or unambiguous ``key=value``) set."""
    data = {k: dict(v or {}) for k, v in (data or {}).items()} if isinstance(data, dict) else data
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        value = yaml.safe_load(raw)
        if "." in key:
            section, name = key.split(".", 1)
        else:
            owners = [s for s, cls in SECTIONS.items() if key in {f.name for f in dataclasses.fields(cls)}]
            if len(owners) != 1:
                raise ConfigError(f"override key {key!r} is {'ambiguous' if owners else 'unknown'}; use section.key")
            section, name = owners[0], key
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        data.setdefault(section, {})[name] = value
    return data


def dump_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
