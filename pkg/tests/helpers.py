"""Shared oracles for the test suite."""

import itertools
import math

import numpy as np

from fusetrack.affinity import DanModel, _forward, evaluate_loss, loss_and_gradients

KINK = 1e-3


def brute_force_min(cost):
    """Minimum total cost over all maximum-cardinality matchings, by enumeration.

    Sums use ``math.fsum`` so the result does not depend on summation order.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    if m <= n:
        return min(math.fsum(cost[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m))
    return min(math.fsum(cost[p[j], j] for j in range(n)) for p in itertools.permutations(range(m), n))


def _away_from_kinks(model, pairs, G, loss_kind, margin):
    _, z1, _, C = _forward(model, pairs)
    if np.min(np.abs(z1)) < KINK:
        return False
    if loss_kind == "mask":
        return np.min(np.abs(C - G)) > KINK
    pos = G == 1
    for i, j in zip(*np.nonzero(pos)):
        args = np.concatenate([C[i, ~pos[i, :]], C[~pos[:, j], j]]) - C[i, j] + margin
        if args.size and np.min(np.abs(args)) < KINK:
            return False
    return True


def random_grad_case(rng, loss_kind, margin=0.2):
    """A random model / pair tensor / label triple whose loss is smooth around the parameters."""
    while True:
        d, h = 4, int(rng.integers(2, 9))
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        model = DanModel(
            w1=rng.normal(0.0, 1.0, (d, h)),
            b1=rng.normal(0.0, 0.5, h),
            w2=rng.normal(0.0, 1.0, h),
            b2=float(rng.normal(0.0, 0.5)),
        )
        pairs = rng.uniform(0.0, 2.0, (m, n, d))
        G = (rng.random((m, n)) < 0.4).astype(float)
        if loss_kind == "affinity" and not G.any():
            G[rng.integers(m), rng.integers(n)] = 1.0
        if _away_from_kinks(model, pairs, G, loss_kind, margin):
            return model, pairs, G


def finite_difference_grads(model, pairs, G, loss_kind, margin=0.2, eps=1e-6):
    grads = {}
    for name in ("w1", "b1", "w2", "b2"):
        if name == "b2":
            base = model.b2
            plus, minus = model.copy(), model.copy()
            plus.b2, minus.b2 = base + eps, base - eps
            grads[name] = np.array([
                (evaluate_loss(plus, pairs, G, loss_kind, margin) - evaluate_loss(minus, pairs, G, loss_kind, margin))
                / (2 * eps)
            ])
            continue
        arr = getattr(model, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus, minus = model.copy(), model.copy()
            getattr(plus, name)[idx] += eps
            getattr(minus, name)[idx] -= eps
            g[idx] = (evaluate_loss(plus, pairs, G, loss_kind, margin)
                      - evaluate_loss(minus, pairs, G, loss_kind, margin)) / (2 * eps)
        grads[name] = g
    return grads


def gradient_relative_error(model, pairs, G, loss_kind, margin=0.2):
    """Largest per-parameter-array relative error between analytic and numeric gradients."""
    _, analytic = loss_and_gradients(model, pairs, G, loss_kind, margin)
    numeric = finite_difference_grads(model, pairs, G, loss_kind, margin)
    worst = 0.0
    for name, a in analytic.items():
        b = numeric[name]
        scale = np.linalg.norm(a) + np.linalg.norm(b)
        if scale < 1e-10:
            continue
        worst = max(worst, float(np.linalg.norm(a - b) / scale))
    return worst


def affinity_zero_oracle(C, G, margin):
    """True iff every positive beats each negative in its row and column by at least ``margin``."""
    m, n = C.shape
    for i in range(m):
        for j in range(n):
            if G[i, j] != 1:
                continue
            for k in range(n):
                if G[i, k] != 1 and C[i, j] - C[i, k] < margin:
                    return False
            for p in range(m):
                if G[p, j] != 1 and C[i, j] - C[p, j] < margin:
                    return False
    return True
