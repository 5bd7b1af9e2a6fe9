"""Two-stage recognition: a multi-class baseline proposes its top two
candidates, a logistic gate judges its confidence, and ambiguous similar
pairs are handed to the pair's discriminative SVM."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import dsvm
from .errors import ConfigError, DegenerateLabels, InsufficientData
from .features import Codebook, GcParams, encode
from .geometry import WindowGrid, enumerate_windows
from .imagecore import GlyphImage

ROUTES = ("baseline", "svm", "baseline-fallback")


@dataclass(frozen=True)
class BaselineOutput:
    c1: int
    c2: int
    s1: float
    s2: float

    def __post_init__(self):
        if self.c1 == self.c2:
            raise ValueError("top-2 candidates must differ")
        if self.s1 < self.s2:
            raise ValueError("s1 must be >= s2")


# --- baseline: shrunk nearest centroid over 16x16 block means -------------

POOL = 4


def pooled_vector(img: GlyphImage) -> np.ndarray:
    """Mean foreground fraction of every 4x4 block of a 64x64 glyph."""
    px = img.pixels.astype(np.float64)
    h, w = px.shape
    return px.reshape(h // POOL, POOL, w // POOL, POOL).mean(axis=(1, 3)).ravel()


@dataclass
class NearestCentroid:
    classes: np.ndarray    # sorted class ids
    centroids: np.ndarray  # one row per class
    shrinkage: float = 1.0

    def scores(self, img: GlyphImage) -> np.ndarray:
        v = pooled_vector(img)
        return -np.sqrt(((self.centroids - v) ** 2).sum(axis=1))

    def score(self, img: GlyphImage) -> BaselineOutput:
        """Top two classes by negative centroid distance; ties favour the
        lower class id."""
        s = self.scores(img)
        order = np.lexsort((self.classes, -s))
        a, b = order[0], order[1]
        return BaselineOutput(int(self.classes[a]), int(self.classes[b]), float(s[a]), float(s[b]))

    def class_scores(self, img: GlyphImage, class_ids) -> np.ndarray:
        s = self.scores(img)
        index = {int(c): i for i, c in enumerate(self.classes)}
        missing = [c for c in class_ids if int(c) not in index]
        if missing:
            raise ConfigError(f"class ids {missing} were not seen in training")
        return s[[index[int(c)] for c in class_ids]]


def baseline_train(images, labels, shrinkage: float = 1.0) -> NearestCentroid:
    """Class means pulled toward the global mean by ``shrinkage`` pseudo-samples."""
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise InsufficientData("the baseline needs at least two classes")
    x = np.stack([pooled_vector(g) for g in images])
    overall = x.mean(axis=0)
    cents = []
    for c in classes:
        members = x[labels == c]
        cents.append((members.sum(axis=0) + shrinkage * overall) / (len(members) + shrinkage))
    return NearestCentroid(classes, np.array(cents), float(shrinkage))


def baseline_score(model: NearestCentroid, img: GlyphImage) -> BaselineOutput:
    return model.score(img)


# --- confidence gate --------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


# float64 rounds the sigmoid to exactly 0 or 1 for |z| beyond ~37; keep the
# confidence strictly inside (0, 1) so that sigma = 1 never passes
_H_LO = np.nextafter(0.0, 1.0)
_H_HI = np.nextafter(1.0, 0.0)


@dataclass
class ConfidenceGate:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma: float = 0.9

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(3)
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")

    def confidence(self, s1, s2):
        z = self.theta[0] + self.theta[1] * np.asarray(s1) + self.theta[2] * np.asarray(s2)
        return np.clip(_sigmoid(z), _H_LO, _H_HI)

    def passes(self, s1, s2) -> bool:
        """True when the baseline's answer is accepted (boundary passes)."""
        return bool(self.confidence(s1, s2) >= self.sigma)


def log_likelihood(theta, s1, s2, y) -> float:
    z = theta[0] + theta[1] * np.asarray(s1) + theta[2] * np.asarray(s2)
    # log sigmoid(z) = -log(1 + e^-z)
    return float(-(y * np.logaddexp(0, -z) + (1 - y) * np.logaddexp(0, z)).sum())


def train_gate(samples, rate: float = 0.1, iters: int = 500) -> np.ndarray:
    """Full-batch gradient ascent on the mean log-likelihood.

    Inputs are standardized for conditioning and the weights are mapped back
    to raw scores, so the returned ``theta`` applies to ``(s1, s2)`` directly.
    """
    arr = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    s, y = arr[:, :2], arr[:, 2]
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("gate training needs both labels")
    mean = s.mean(axis=0)
    std = s.std(axis=0)
    std[std == 0] = 1.0
    x = np.column_stack([np.ones(len(s)), (s - mean) / std])
    t = np.zeros(3)
    for _ in range(iters):
        t += rate * x.T @ (y - _sigmoid(x @ t)) / len(y)
    w = t[1:] / std
    return np.array([t[0] - float(w @ mean), w[0], w[1]])


# --- similar pairs ----------------------------------------------------------

def mine_pairs(confusions, T: int = 2) -> list:
    """Unordered class pairs confused (either direction) more than ``T`` times."""
    if T < 1:
        raise ValueError("T must be >= 1")
    counts = Counter()
    for true, pred in confusions:
        true, pred = int(true), int(pred)
        if true != pred:
            counts[(min(true, pred), max(true, pred))] += 1
    return sorted(p for p, c in counts.items() if c > T)


@dataclass
class PairModel:
    """Everything needed to run one pair's discriminative SVM."""

    model: dsvm.SvmModel
    codebook: Codebook
    params: GcParams = GcParams()

    @property
    def grid(self) -> WindowGrid:
        return self.model.grid


class SimilarPairTable:
    """Unordered class pairs; the lower id is the SVM's positive class."""

    def __init__(self, pairs=()):
        self._models = {}
        for a, b in pairs:
            self.add(a, b)

    @staticmethod
    def key(a, b):
        a, b = int(a), int(b)
        if a == b:
            raise ValueError("a pair needs two distinct classes")
        return (min(a, b), max(a, b))

    def add(self, a, b, model: PairModel | None = None):
        self._models[self.key(a, b)] = model

    def set_model(self, a, b, model: PairModel):
        k = self.key(a, b)
        if k not in self._models:
            raise ConfigError(f"pair {k} is not in the table")
        self._models[k] = model

    def __contains__(self, pair) -> bool:
        return self.key(*pair) in self._models

    def __len__(self):
        return len(self._models)

    def pairs(self) -> list:
        return sorted(self._models)

    def model(self, a, b) -> PairModel:
        m = self._models.get(self.key(a, b))
        if m is None:
            raise ConfigError(f"pair {self.key(a, b)} has no trained model")
        return m

    @property
    def ready(self) -> bool:
        return all(m is not None for m in self._models.values())

    @staticmethod
    def positive_class(a, b) -> int:
        return min(int(a), int(b))


@dataclass(frozen=True)
class Recognition:
    label: int
    route: str
    baseline: BaselineOutput
    confidence: float


def pair_predict(pm: PairModel, img: GlyphImage) -> dsvm.Prediction:
    windows = encode(img, pm.codebook, pm.grid, pm.params).windows
    return dsvm.predict(pm.model, windows, enumerate_windows(pm.grid))


def recognize(img: GlyphImage, baseline: NearestCentroid, gate: ConfidenceGate,
              table: SimilarPairTable, predict_pair=pair_predict) -> Recognition:
    """Baseline answer unless the gate rejects it and the top-2 classes form
    a known similar pair. ``predict_pair(pair_model, img)`` may be swapped
    for a cached variant."""
    out = baseline.score(img)
    conf = float(gate.confidence(out.s1, out.s2))
    if conf >= gate.sigma:
        return Recognition(out.c1, "baseline", out, conf)
    if (out.c1, out.c2) in table:
        pos, neg = table.key(out.c1, out.c2)
        pred = predict_pair(table.model(pos, neg), img)
        return Recognition(pos if pred.label == 1 else neg, "svm", out, conf)
    return Recognition(out.c1, "baseline-fallback", out, conf)
