"""Synthetic ablation and DAN-training experiments shared by scripts/ and the acceptance suite."""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field

from .affinity import dan_train, ranking_accuracy
from .pipeline import ARMS, arm_config, build_scorer, evaluate_run, run_pipeline, train_dan
from .scenario import generate_scenario, make_dan_dataset

logger = logging.getLogger(__name__)


def with_scenario(config, seed, frames):
    """Copy of ``config`` whose scenario uses ``seed`` and lasts ``frames`` frames."""
    out = copy.deepcopy(config)
    out.scenario.seed = seed
    out.scenario.duration = frames / out.scenario.frame_rate
    return out


def training_set(config, seed, frames, inter_frame=None):
    cfg = with_scenario(config, seed, frames)
    scen = generate_scenario(cfg)
    if inter_frame is None:
        inter_frame = cfg.run.dan_inter_frame
    return make_dan_dataset(scen.frames, scen.gt, cfg.camera.model(), cfg.run.weights, inter_frame=inter_frame)


@dataclass
class AblationResult:
    reports: list
    models: dict = field(default_factory=dict)
    seconds: float = 0.0

    def accuracy(self, arm):
        return next(r.car_average for r in self.reports if r.name == arm)


def run_ablation(config, test_seed=1, test_frames=2000, train_seed=100, train_frames=500, arms=tuple(ARMS)):
    """Score every ablation arm on one held-out scenario; DAN arms are trained on a separate seed."""
    start = time.perf_counter()
    models = {}
    if any(ARMS[a].get("scorer") == "dan" for a in arms):
        data = training_set(config, train_seed, train_frames)
        for loss in ("mask", "affinity"):
            models[loss] = train_dan(data, config.run, loss=loss)
            logger.info("trained %s-loss DAN on %d matrices", loss, len(data))
    cfg = with_scenario(config, test_seed, test_frames)
    scen = generate_scenario(cfg)
    camera = cfg.camera.model()
    reports = []
    for arm in arms:
        run = arm_config(cfg.run, arm)
        model = models[run.dan_loss] if run.scorer == "dan" else None
        result = run_pipeline(scen.frames, camera, run, build_scorer(run, model))
        reports.append(evaluate_run(result.records, scen.gt, run, arm))
    return AblationResult(reports, models, time.perf_counter() - start)


def compare_dan_losses(config, n_matrices=500, train_seed=100, heldout_seed=200, heldout_frames=200,
                       inter_frame=False):
    """Held-out ranking accuracy of mask- and affinity-loss training on ``n_matrices`` matrices.

    Models are trained with the run's hyperparameters and no calibration
    (ranking accuracy ignores the output bias anyway).
    """
    frames = n_matrices
    data = []
    while len(data) < n_matrices:
        frames *= 2
        data = training_set(config, train_seed, frames, inter_frame)
    data = data[:n_matrices]
    heldout = training_set(config, heldout_seed, heldout_frames, inter_frame)
    run = config.run
    out = {}
    for loss in ("affinity", "mask"):
        model = dan_train(data, lr=run.dan_lr, epochs=run.dan_epochs, margin=run.dan_margin, seed=run.dan_seed,
                          loss=loss, hidden=run.dan_hidden)
        out[loss] = ranking_accuracy(model, heldout)
    return out
