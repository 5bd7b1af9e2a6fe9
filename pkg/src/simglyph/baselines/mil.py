"""Multiple-instance boosting baseline.

A weak classifier compares the codeword histogram of one fixed window ``B``
of a sample against an instance pattern ``I``::

    h(sample) = 1  if d(I, x_B) * p < T * p  else -1

with Euclidean ``d``. Patterns, windows and polarities are searched
exhaustively, the threshold ``T`` is fitted by perceptron updates, and
discrete AdaBoost combines the selected weak classifiers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InsufficientData
from ..geometry import Rect

N_ROUNDS = 31


@dataclass(frozen=True)
class MilWeakClassifier:
    pattern: np.ndarray
    window: Rect
    window_index: int
    polarity: int
    threshold: float

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")


@dataclass
class AdaBoostEnsemble:
    weak: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    errors: list = field(default_factory=list)     # weighted error of each pick
    distr: list = field(default_factory=list)      # sample weights entering each round
    objective: list = field(default_factory=list)  # perceptron objective of each pick
    stop_reason: str = ""

    @property
    def n_rounds(self) -> int:
        return len(self.weak)


@dataclass(frozen=True)
class MilConfig:
    rounds: int = N_ROUNDS
    alpha: float = 0.1
    epochs: int = 20
    pattern_budget: int = 100
    seed: int = 0


def _decide(d, polarity, threshold):
    return np.where(d * polarity < threshold * polarity, 1, -1)


def weak_classify(w: MilWeakClassifier, sample_windows) -> int:
    x = np.asarray(sample_windows, dtype=np.float64)[w.window_index]
    d = float(np.linalg.norm(x - w.pattern))
    return int(_decide(d, w.polarity, w.threshold))


def perceptron_threshold(dists, labels, polarity: int, distr, alpha: float = 0.1, epochs: int = 20):
    """Fit ``T`` for one (pattern, window, polarity) candidate.

    ``T`` starts at 0 and every sample, in order, moves it by
    ``p * alpha * N * distr(i) * (y_i - yhat_i)``. Returns the final ``T``.
    """
    d = np.asarray(dists, dtype=np.float64).reshape(1, -1)
    y = np.asarray(labels, dtype=np.int64)
    step = alpha * len(y) * np.asarray(distr, dtype=np.float64)
    t, _ = _perceptron_many(d, y, np.array([polarity], dtype=np.int64), step, epochs)
    return float(t[0, 0])


def perceptron_objective(dists, labels, polarity: int, distr, threshold: float) -> float:
    """``-sum over misclassified i of distr(i) * y_i * T``."""
    y = np.asarray(labels)
    wrong = _decide(np.asarray(dists, dtype=np.float64), polarity, threshold) != y
    return float(-(np.asarray(distr)[wrong] * y[wrong]).sum() * threshold)


@numba.njit(cache=True)
def _fit_row(d, y, p, step, epochs):
    t = 0.0
    for _ in range(epochs):
        moved = False
        for i in range(d.shape[0]):
            yhat = 1 if d[i] * p < t * p else -1
            if yhat != y[i]:
                t += p * step[i] * (y[i] - yhat)
                moved = True
        if not moved:
            break
    err = 0.0
    for i in range(d.shape[0]):
        yhat = 1 if d[i] * p < t * p else -1
        if yhat != y[i]:
            err += step[i]
    return t, err


@numba.njit(cache=True)
def _perceptron_many(d, y, pol, step, epochs):
    """Fit every row of ``d`` with every polarity in ``pol``; results are
    laid out polarity-major, shape ``(len(pol), n_rows)``."""
    thresholds = np.zeros((len(pol), d.shape[0]))
    err = np.zeros((len(pol), d.shape[0]))
    for k in range(len(pol)):
        for c in range(d.shape[0]):
            thresholds[k, c], err[k, c] = _fit_row(d[c], y, pol[k], step, epochs)
    return thresholds, err


def _patterns(samples, budget, rng):
    """Uniform subsample of all training window histograms."""
    n, n_windows, _ = samples.shape
    total = n * n_windows
    pick = np.sort(rng.choice(total, size=min(budget, total), replace=False))
    return samples.reshape(total, -1)[pick]


def adaboost_train(pos, neg, rects, cfg: MilConfig = MilConfig()) -> AdaBoostEnsemble:
    """Discrete AdaBoost over exhaustively searched weak classifiers."""
    if len(pos) == 0 or len(neg) == 0:
        raise InsufficientData("need at least one sample per class")
    samples = np.asarray(list(pos) + list(neg), dtype=np.float64)
    y = np.array([1] * len(pos) + [-1] * len(neg), dtype=np.int64)
    n, n_windows, _ = samples.shape
    patterns = _patterns(samples, cfg.pattern_budget, np.random.default_rng(cfg.seed))

    # distance of every pattern to every sample at every window, computed once
    dist = np.empty((len(patterns), n_windows, n))
    for v in range(n_windows):
        dist[:, v, :] = cdist(patterns, samples[:, v, :])
    dist = dist.reshape(-1, n)
    pol = np.array([1, -1], dtype=np.int64)

    distr = np.full(n, 1.0 / n)
    ens = AdaBoostEnsemble()
    for _ in range(cfg.rounds):
        step = cfg.alpha * n * distr
        thresholds, scaled_err = _perceptron_many(dist, y, pol, step, cfg.epochs)
        err = (scaled_err / (cfg.alpha * n)).ravel()
        best = int(np.argmin(err))
        eps = float(err[best])
        if eps >= 0.5:
            ens.stop_reason = "no weak classifier better than chance"
            break
        k, row = divmod(best, len(dist))
        i_pat, v = divmod(row, n_windows)
        w = MilWeakClassifier(patterns[i_pat].copy(), Rect(*rects[v]), v, int(pol[k]),
                              float(thresholds[k, row]))
        a = 0.5 * math.log((1.0 - eps) / max(eps, 1e-10))
        h = _decide(dist[row], w.polarity, w.threshold)
        ens.weak.append(w)
        ens.alphas.append(a)
        ens.errors.append(eps)
        ens.distr.append(distr.copy())
        ens.objective.append(perceptron_objective(dist[row], y, w.polarity, distr, w.threshold))
        distr = distr * np.exp(-a * y * h)
        distr /= distr.sum()
    else:
        ens.stop_reason = "rounds"
    return ens


def ensemble_score(ens: AdaBoostEnsemble, sample_windows) -> float:
    return float(sum(a * weak_classify(w, sample_windows) for w, a in zip(ens.weak, ens.alphas)))


def adaboost_classify(ens: AdaBoostEnsemble, sample_windows) -> int:
    """Sign of the weighted vote; a zero vote is negative."""
    return 1 if ensemble_score(ens, sample_windows) > 0 else -1
