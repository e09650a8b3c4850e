"""Common features, the weighted hand-crafted similarity, and the deep affinity network.

Feature sets are handled as float arrays of shape (n, 4) with columns
(range, azimuth, velocity, confidence). A *scorer* is any callable mapping two
such arrays of shapes (M, 4) and (N, 4) to an (M, N) similarity matrix in [0, 1].
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .detections import CommonFeature, RadarDetection, VisionDetection
from .errors import DimensionMismatch, EmptyDataset, EmptySet, ParseError
from .geometry import vision_to_bev

logger = logging.getLogger(__name__)

FEATURE_DIM = 4
MODEL_MAGIC = "fusetrack-dan"
MODEL_VERSION = 1


@dataclass
class SimilarityWeights:
    w_range: float = 0.5
    w_azimuth: float = 0.3
    w_velocity: float = 0.2
    thr_range: float = 5.0
    thr_azimuth: float = 0.05
    thr_velocity: float = 2.0

    def __post_init__(self):
        if min(self.w_range, self.w_azimuth, self.w_velocity) < 0:
            raise ValueError("similarity weights must be non-negative")
        if self.w_range + self.w_azimuth + self.w_velocity <= 0:
            raise ValueError("at least one similarity weight must be positive")
        if min(self.thr_range, self.thr_azimuth, self.thr_velocity) <= 0:
            raise ValueError("similarity thresholds must be positive")

    @property
    def weights(self):
        w = np.array([self.w_range, self.w_azimuth, self.w_velocity], dtype=float)
        return w / w.sum()

    @property
    def scales(self):
        """Per-component normalizers for pair features; confidence is left unscaled."""
        return np.array([self.thr_range, self.thr_azimuth, self.thr_velocity, 1.0])


def extract_common_feature(det, camera=None, velocity=None):
    """Map a detection to its common feature.

    Radar detections are copied as measured. Vision detections are placed on
    the road plane with the camera's current pitch; their velocity comes from
    ``velocity`` (a track-level estimate), the detection's own ``vel`` field, or
    0 without history. Raises HorizonDegenerate for unrangeable vision boxes.
    """
    if isinstance(det, RadarDetection):
        return CommonFeature(det.range, det.azimuth, det.vel, det.conf)
    if not isinstance(det, VisionDetection):
        raise TypeError(f"unsupported detection type {type(det).__name__}")
    if camera is None:
        raise ValueError("vision detections need a camera model")
    bev = vision_to_bev(camera, det)
    if velocity is None:
        velocity = det.vel if det.vel is not None else 0.0
    return CommonFeature(bev.range, bev.azimuth, float(velocity), det.conf)


def as_feature_array(features):
    if isinstance(features, np.ndarray):
        return features.reshape(-1, FEATURE_DIM).astype(float, copy=False)
    return np.array([f.as_array() for f in features], dtype=float).reshape(-1, FEATURE_DIM)


def artificial_similarity(a, b, w):
    """Similarity of two common features under the weighted normalized-difference score.

    d = sum_k w_k * min(1, |a_k - b_k| / thr_k) over range, azimuth and
    velocity (weights normalized to sum 1); the similarity is 1 - min(1, d).
    """
    return float(artificial_similarity_matrix(as_feature_array([a]), as_feature_array([b]), w)[0, 0])


def artificial_similarity_matrix(A, B, w):
    A = as_feature_array(A)
    B = as_feature_array(B)
    diff = np.abs(A[:, None, :3] - B[None, :, :3]) / w.scales[:3]
    d = np.minimum(diff, 1.0) @ w.weights
    return 1.0 - np.minimum(d, 1.0)


def build_pair_features(A, B, scales):
    """(M, N, D) tensor of scale-normalized absolute differences |A_i - B_j|."""
    A = as_feature_array(A)
    B = as_feature_array(B)
    if len(A) == 0 or len(B) == 0:
        raise EmptySet(f"cannot pair {len(A)} x {len(B)} features")
    if isinstance(scales, SimilarityWeights):
        scales = scales.scales
    return np.abs(A[:, None, :] - B[None, :, :]) / np.asarray(scales, dtype=float)


# --------------------------------------------------------------------------
# Deep affinity network


@dataclass
class DanModel:
    """Two fully connected layers: rectifier hidden layer, sigmoid output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    seed: int = 0
    loss_curve: list = field(default_factory=list)

    @classmethod
    def initialize(cls, input_dim=FEATURE_DIM, hidden=64, seed=0):
        """Uniform fan-in scaled initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        rng = np.random.default_rng(seed)
        lim1 = 1.0 / math.sqrt(input_dim)
        lim2 = 1.0 / math.sqrt(hidden)
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(input_dim, hidden)),
            b1=rng.uniform(-lim1, lim1, size=hidden),
            w2=rng.uniform(-lim2, lim2, size=hidden),
            b2=float(rng.uniform(-lim2, lim2)),
            seed=seed,
        )

    @property
    def input_dim(self):
        return self.w1.shape[0]

    @property
    def hidden(self):
        return self.w1.shape[1]

    def copy(self):
        return DanModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2), self.seed, list(self.loss_curve))

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": np.array([self.b2])}


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(model, pairs):
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 3 or pairs.shape[2] != model.input_dim:
        raise DimensionMismatch(f"expected (M, N, {model.input_dim}) pair tensor, got {pairs.shape}")
    m, n, d = pairs.shape
    x = pairs.reshape(m * n, d)
    z1 = x @ model.w1 + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2 + model.b2
    c = _sigmoid(z2)
    return x, z1, a1, c.reshape(m, n)


def dan_forward(model, pairs):
    """Affinity matrix of shape (M, N) for an (M, N, D) pair tensor."""
    return _forward(model, pairs)[3]


def _check_shapes(C, G):
    C = np.asarray(C, dtype=float)
    G = np.asarray(G, dtype=float)
    if C.shape != G.shape or C.ndim != 2:
        raise DimensionMismatch(f"affinity {C.shape} and label {G.shape} shapes differ")
    return C, G


def mask_loss(C, G):
    """Mean absolute deviation between affinity and label matrices."""
    C, G = _check_shapes(C, G)
    return float(np.mean(np.abs(C - G)))


def affinity_loss(C, G, margin=0.2):
    """Sum of row- and column-wise margin hinges around every positive entry."""
    C, G = _check_shapes(C, G)
    pos = G == 1
    neg = ~pos
    if not pos.any():
        return 0.0
    total = 0.0
    for i, j in zip(*np.nonzero(pos)):
        cij = C[i, j]
        total += np.maximum(C[i, neg[i, :]] - cij + margin, 0.0).sum()
        total += np.maximum(C[neg[:, j], j] - cij + margin, 0.0).sum()
    return float(total)


def affinity_loss_grad(C, G, margin=0.2):
    """Gradient of affinity_loss w.r.t. C; hinges exactly at zero contribute nothing."""
    C, G = _check_shapes(C, G)
    pos = G == 1
    neg = ~pos
    grad = np.zeros_like(C)
    for i, j in zip(*np.nonzero(pos)):
        cij = C[i, j]
        row = neg[i, :] & (C[i, :] - cij + margin > 0)
        col = neg[:, j] & (C[:, j] - cij + margin > 0)
        grad[i, row] += 1.0
        grad[col, j] += 1.0
        grad[i, j] -= row.sum() + col.sum()
    return grad


def mask_loss_grad(C, G):
    C, G = _check_shapes(C, G)
    return np.sign(C - G) / C.size


LOSSES = ("mask", "affinity")


def loss_and_gradients(model, pairs, G, loss_kind="affinity", margin=0.2):
    """Loss value and exact gradients w.r.t. every model parameter."""
    x, z1, a1, C = _forward(model, pairs)
    G = np.asarray(G, dtype=float)
    if loss_kind == "mask":
        loss = mask_loss(C, G)
        dC = mask_loss_grad(C, G)
    elif loss_kind == "affinity":
        loss = affinity_loss(C, G, margin)
        dC = affinity_loss_grad(C, G, margin)
    else:
        raise ValueError(f"unknown loss {loss_kind!r}; expected one of {LOSSES}")
    c = C.reshape(-1)
    dz2 = dC.reshape(-1) * c * (1.0 - c)
    dz1 = np.outer(dz2, model.w2) * (z1 > 0)
    grads = {
        "w1": x.T @ dz1,
        "b1": dz1.sum(axis=0),
        "w2": a1.T @ dz2,
        "b2": np.array([dz2.sum()]),
    }
    return loss, grads


def loss_gradients(model, pairs, G, loss_kind="affinity", margin=0.2):
    return loss_and_gradients(model, pairs, G, loss_kind, margin)[1]


def evaluate_loss(model, pairs, G, loss_kind="affinity", margin=0.2):
    C = dan_forward(model, pairs)
    return mask_loss(C, G) if loss_kind == "mask" else affinity_loss(C, G, margin)


def dan_train(dataset, lr=0.001, epochs=20, margin=0.2, seed=42, loss="affinity", hidden=64, model=None):
    """Plain SGD with one association matrix per step.

    ``dataset`` is a sequence of (pair tensor, label matrix). The visiting order
    is reshuffled every epoch from ``seed``; the mean training loss of each
    epoch is appended to ``model.loss_curve``.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    dims = {np.asarray(p).shape[2] for p, _ in dataset}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent feature widths {sorted(dims)}")
    if model is None:
        model = DanModel.initialize(input_dim=dims.pop(), hidden=hidden, seed=seed)
    else:
        model = model.copy()
    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        total = 0.0
        for idx in rng.permutation(len(dataset)):
            pairs, G = dataset[idx]
            value, grads = loss_and_gradients(model, pairs, G, loss, margin)
            total += value
            model.w1 -= lr * grads["w1"]
            model.b1 -= lr * grads["b1"]
            model.w2 -= lr * grads["w2"]
            model.b2 -= lr * float(grads["b2"][0])
        model.loss_curve.append(total / len(dataset))
        logger.debug("epoch %d %s loss %.6f", epoch, loss, model.loss_curve[-1])
    return model


def calibrate_output_bias(model, dataset):
    """Shift the output bias so the best positive/negative split of ``dataset`` sits at 0.5.

    The split maximizes TPR - FPR over all label entries; when a whole interval
    of pre-sigmoid values is optimal its midpoint is used. Ranking is unchanged.
    Returns a calibrated copy.
    """
    pos, neg = [], []
    for pairs, G in dataset:
        _, z1, a1, _ = _forward(model, pairs)
        z2 = (a1 @ model.w2 + model.b2).reshape(np.asarray(G).shape)
        G = np.asarray(G)
        pos.append(z2[G == 1])
        neg.append(z2[G != 1])
    pos = np.concatenate(pos) if pos else np.array([])
    neg = np.concatenate(neg) if neg else np.array([])
    out = model.copy()
    if pos.size == 0 or neg.size == 0:
        return out
    values = np.unique(np.concatenate([pos, neg]))
    cuts = np.concatenate([[values[0] - 1.0], (values[:-1] + values[1:]) / 2, [values[-1] + 1.0]])
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    tpr = 1.0 - np.searchsorted(pos_sorted, cuts, side="right") / pos.size
    fpr = 1.0 - np.searchsorted(neg_sorted, cuts, side="right") / neg.size
    j = tpr - fpr
    best = np.flatnonzero(j >= j.max() - 1e-12)
    threshold = 0.5 * (cuts[best[0]] + cuts[best[-1]])
    out.b2 = float(model.b2 - threshold)
    return out


def ranking_accuracy(model_or_scorer, dataset):
    """Fraction of positives that are the strict maximum of both their row and column."""
    hits = total = 0
    for pairs, G in dataset:
        C = dan_forward(model_or_scorer, pairs) if isinstance(model_or_scorer, DanModel) else model_or_scorer(pairs)
        h, t = _count_ranked(C, G)
        hits += h
        total += t
    return hits / total if total else float("nan")


def _count_ranked(C, G):
    hits = total = 0
    for i, j in zip(*np.nonzero(np.asarray(G) == 1)):
        total += 1
        row = np.delete(C[i, :], j)
        col = np.delete(C[:, j], i)
        if (row.size == 0 or C[i, j] > row.max()) and (col.size == 0 or C[i, j] > col.max()):
            hits += 1
    return hits, total


# --------------------------------------------------------------------------
# Scorers


class ArtificialScorer:
    def __init__(self, weights=None):
        self.weights = weights or SimilarityWeights()

    def __call__(self, A, B):
        return artificial_similarity_matrix(A, B, self.weights)


class DanScorer:
    def __init__(self, model, scales=None):
        self.model = model
        self.scales = (scales or SimilarityWeights()).scales

    def __call__(self, A, B):
        return dan_forward(self.model, build_pair_features(A, B, self.scales))


def grid_search_weights(dataset_features, weights=None, step=0.1):
    """Pick the similarity weights with the best ranking accuracy.

    ``dataset_features`` holds (A, B, G) triples of raw feature arrays. Every
    weight triple on a simplex grid with spacing ``step`` is tried; ties keep
    the first triple in grid order.
    """
    base = weights or SimilarityWeights()
    n = int(round(1.0 / step))
    best, best_acc = base, -1.0
    for i, j in itertools.product(range(n + 1), repeat=2):
        k = n - i - j
        if k < 0:
            continue
        cand = SimilarityWeights(i * step, j * step, k * step, base.thr_range, base.thr_azimuth, base.thr_velocity)
        if cand.w_range + cand.w_azimuth + cand.w_velocity == 0:
            continue
        scorer = ArtificialScorer(cand)
        hits = total = 0
        for A, B, G in dataset_features:
            h, t = _count_ranked(scorer(A, B), G)
            hits += h
            total += t
        acc = hits / total if total else 0.0
        if acc > best_acc:
            best, best_acc = cand, acc
    return best, best_acc


# --------------------------------------------------------------------------
# Serialization


def save_model(model, path):
    """Write the model as versioned decimal text (shortest round-trip float repr)."""
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"input_dim {model.input_dim}",
        f"hidden {model.hidden}",
        f"seed {model.seed}",
    ]
    for name, values in model.params().items():
        flat = np.asarray(values, dtype=float).reshape(-1)
        lines.append(name + " " + " ".join(repr(float(v)) for v in flat))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0][:1] != [MODEL_MAGIC]:
        raise ParseError("not a DAN model file", line=1)
    if int(lines[0][1]) != MODEL_VERSION:
        raise ParseError(f"unsupported model version {lines[0][1]}", line=1)
    fields = {}
    for lineno, parts in enumerate(lines[1:], start=2):
        try:
            fields[parts[0]] = [float(v) for v in parts[1:]]
        except (ValueError, IndexError) as exc:
            raise ParseError(str(exc), line=lineno) from exc
    try:
        d, h = int(fields["input_dim"][0]), int(fields["hidden"][0])
        model = DanModel(
            w1=np.array(fields["w1"]).reshape(d, h),
            b1=np.array(fields["b1"]).reshape(h),
            w2=np.array(fields["w2"]).reshape(h),
            b2=float(fields["b2"][0]),
            seed=int(fields["seed"][0]),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    return model


def write_loss_curve(model, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for epoch, value in enumerate(model.loss_curve):
            writer.writerow([epoch, repr(float(value))])

