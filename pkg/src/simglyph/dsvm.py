"""Discriminative SVM that localizes and classifies jointly.

Every sample is a stack of sub-window feature vectors, shape ``(n_windows, K)``.
A positive sample needs at least one window scoring >= 1 and every window of a
negative sample should score <= -1. Training alternates between picking the
highest-scoring window of each positive sample (cutting plane) and solving the
resulting convex problem by subgradient descent with step 1/k.

The model parameters are packed as ``mu = [w_0, ..., w_{K-1}, b]``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData
from .geometry import Rect, WindowGrid, enumerate_windows


@dataclass(frozen=True)
class TrainConfig:
    C: float = 0.002
    tau: float = 0.6
    max_outer_iters: int = 30
    inner_tol: float = 1e-6
    inner_patience: int = 20
    max_inner_iters: int = 5000

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1 or self.inner_patience < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    grid: WindowGrid = field(default_factory=WindowGrid)
    codebook_hash: str = ""
    C: float = 0.002
    tau: float = 0.6

    @property
    def mu(self) -> np.ndarray:
        return np.append(self.w, self.b)


@dataclass
class ConvergenceTrace:
    obj: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    cache_size: list = field(default_factory=list)
    inner: list = field(default_factory=list)  # best Gamma per inner iteration, per outer iteration
    stop_reason: str = ""

    @property
    def n_outer(self) -> int:
        return len(self.obj)


def split_mu(mu):
    mu = np.asarray(mu, dtype=np.float64)
    return mu[:-1], float(mu[-1])


def codebook_hash(centers: np.ndarray) -> str:
    """Short digest of the centers at their stored (9 significant digit) precision."""
    text = "\n".join(" ".join(f"{float(v):.9g}" for v in row) for row in np.asarray(centers))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class NegativeWindows:
    """All windows of all negative samples, scored together.

    Every sample must have the same number of windows (one shared grid).
    """

    def __init__(self, samples):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError("negative samples must share one window grid")
        self.m, self.n_windows, _ = arr.shape
        self.flat = arr.reshape(-1, arr.shape[2])

    def best(self, mu):
        """Per-sample max score and the flat row index attaining it (first wins)."""
        w, b = split_mu(mu)
        s = (self.flat @ w).reshape(self.m, self.n_windows) + b
        arg = np.argmax(s, axis=1)
        return s[np.arange(self.m), arg], arg + np.arange(self.m) * self.n_windows

    def rows(self, idx):
        return self.flat[idx]


def _as_neg(neg):
    return neg if isinstance(neg, NegativeWindows) else NegativeWindows(neg)


def scores(mu, windows) -> np.ndarray:
    w, b = split_mu(mu)
    return np.asarray(windows, dtype=np.float64) @ w + b


def most_violated(mu, windows) -> int:
    """Index of the highest-scoring window; the first one wins ties."""
    return int(np.argmax(scores(mu, windows)))


def eval_objective(mu, pos, neg, C) -> float:
    """Unconstrained training objective over all windows of every sample.

    ``0.5|w|^2 + C sum_i max(-1, -max_x s(x)) + C sum_j max(-1, max_y s(y))``.
    Shifting by ``C (n + m)`` gives the usual hinge-loss objective.
    """
    w, _ = split_mu(mu)
    val = 0.5 * float(w @ w)
    for windows in pos:
        val += C * max(-1.0, -float(scores(mu, windows).max()))
    for windows in neg:
        val += C * max(-1.0, float(scores(mu, windows).max()))
    return val


def hinge_objective(mu, pos, neg, C) -> float:
    """Soft-margin objective with optimal slacks; nonnegative."""
    return eval_objective(mu, pos, neg, C) + C * (len(pos) + len(neg))


def gamma(mu, xhat, neg, C) -> float:
    """Inner objective with one fixed window feature per positive sample."""
    return _gamma_and_subgradient(mu, np.asarray(xhat, dtype=np.float64), _as_neg(neg), C)[0]


def subgradient(mu, xhat, neg, C) -> np.ndarray:
    """One subgradient of ``gamma`` at ``mu``."""
    return _gamma_and_subgradient(mu, np.asarray(xhat, dtype=np.float64), _as_neg(neg), C)[1]


def _gamma_and_subgradient(mu, xhat, neg: NegativeWindows, C):
    w, b = split_mu(mu)
    k = len(w)
    phi = -(xhat @ w + b)
    best, rows = neg.best(mu)
    val = 0.5 * float(w @ w) + C * float(np.maximum(-1.0, phi).sum()) + C * float(np.maximum(-1.0, best).sum())

    g = np.zeros(k + 1)
    g[:k] = w
    active_pos = phi >= -1.0
    g[:k] -= C * xhat[active_pos].sum(axis=0)
    g[k] -= C * active_pos.sum()
    active_neg = best >= -1.0
    if active_neg.any():
        g[:k] += C * neg.rows(rows[active_neg]).sum(axis=0)
        g[k] += C * active_neg.sum()
    return val, g


def inner_solve(mu0, xhat, neg, cfg: TrainConfig):
    """Subgradient descent with step 1/k; returns the best iterate and the
    best-so-far objective after each step (first entry is at ``mu0``)."""
    xhat = np.asarray(xhat, dtype=np.float64)
    neg = _as_neg(neg)
    mu = np.array(mu0, dtype=np.float64)
    val, g = _gamma_and_subgradient(mu, xhat, neg, cfg.C)
    best_mu, best_val = mu.copy(), val
    history = [best_val]
    for k in range(1, cfg.max_inner_iters + 1):
        mu = mu - g / k
        val, g = _gamma_and_subgradient(mu, xhat, neg, cfg.C)
        if val < best_val:
            best_mu, best_val = mu.copy(), val
        history.append(best_val)
        p = cfg.inner_patience
        if k >= p:
            ref = history[-1 - p]
            if ref - best_val <= cfg.inner_tol * max(1.0, abs(ref)):
                break
    return best_mu, history


def _check(pos, neg):
    if len(pos) == 0 or len(neg) == 0:
        raise InsufficientData("need at least one positive and one negative sample")


def train(pos, neg, cfg: TrainConfig = TrainConfig(), grid: WindowGrid = WindowGrid(), codebook=None):
    """Cutting-plane training. Returns ``(SvmModel, ConvergenceTrace)``."""
    _check(pos, neg)
    pos = [np.asarray(p, dtype=np.float64) for p in pos]
    negw = NegativeWindows(neg)
    k = pos[0].shape[1]
    mu = np.zeros(k + 1)
    trace = ConvergenceTrace()
    cache = set()

    for _ in range(cfg.max_outer_iters):
        picks = [most_violated(mu, p) for p in pos]
        xhat = np.stack([p[i] for p, i in zip(pos, picks)])
        tv = float(np.maximum(0.0, 1.0 - scores(mu, xhat)).sum())
        before = len(cache)
        cache.update(x.tobytes() for x in xhat)
        grew = len(cache) > before

        mu, history = inner_solve(mu, xhat, negw, cfg)
        trace.tv.append(tv)
        trace.cache_size.append(len(cache))
        trace.inner.append(history)
        trace.obj.append(hinge_objective(mu, pos, neg, cfg.C))
        if tv < cfg.tau:
            trace.stop_reason = "tv<tau"
            break
        if not grew and len(trace.obj) > 1:
            trace.stop_reason = "no new constraints"
            break
    else:
        trace.stop_reason = "max_outer_iters"

    w, b = split_mu(mu)
    cb_hash = codebook_hash(codebook.centers) if codebook is not None else ""
    return SvmModel(w, b, grid, cb_hash, cfg.C, cfg.tau), trace


@dataclass(frozen=True)
class Prediction:
    label: int
    window: Rect
    score: float
    index: int


def predict(model: SvmModel, windows, rects=None) -> Prediction:
    """Best-scoring window and the sign of its score (> 0 is positive)."""
    idx = most_violated(model.mu, windows)
    score = float(scores(model.mu, np.asarray(windows)[idx:idx + 1])[0])
    if rects is None:
        rects = enumerate_windows(model.grid)
    return Prediction(1 if score > 0 else -1, Rect(*rects[idx]), score, idx)
