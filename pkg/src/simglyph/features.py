"""Gradient Context descriptors, the per-pair visual dictionary and
sub-window codeword histograms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import BoundsError, InsufficientData
from .geometry import Rect, WindowGrid, enumerate_windows, rects_array
from .imagecore import GlyphImage, GradientField, SeedSet, extract_seeds, sobel

N_SECTORS = 8
N_BANDS = 4
DIMS = N_SECTORS * N_BANDS
_SECTOR_WIDTH = math.pi / 4


@dataclass(frozen=True)
class GcParams:
    radii: tuple = (3, 4, 8, 16)

    def __post_init__(self):
        r = tuple(self.radii)
        if len(r) != N_BANDS or not all(a < b for a, b in zip((0,) + r, r)):
            raise ValueError("need four strictly increasing positive radii")
        object.__setattr__(self, "radii", r)


def _bin_index(dx, dy, d2, radii_sq):
    band = np.searchsorted(radii_sq, d2, side="left")
    ang = np.arctan2(dy, dx)
    ang = np.where(ang < 0, ang + 2 * math.pi, ang)
    sector = np.minimum(np.floor(ang / _SECTOR_WIDTH).astype(np.int64), N_SECTORS - 1)
    return N_SECTORS * band + sector


def gradient_context(seed, seeds: SeedSet, grad: GradientField, params: GcParams = GcParams()) -> np.ndarray:
    """32-bin descriptor of one seed: gradient magnitudes of the other seeds,
    binned by radial band (outer index) and 45-degree sector (inner index)."""
    pts = seeds.as_array()
    px, py = seed
    dx = pts[:, 0] - px
    dy = pts[:, 1] - py
    d2 = dx * dx + dy * dy
    radii_sq = np.asarray(params.radii, dtype=np.int64) ** 2
    keep = (d2 > 0) & (d2 <= radii_sq[-1])
    bins = _bin_index(dx[keep], dy[keep], d2[keep], radii_sq)
    weights = grad.mag[pts[keep, 1], pts[keep, 0]]
    return np.bincount(bins, weights=weights, minlength=DIMS).astype(np.float64)


def gradient_contexts(seeds: SeedSet, grad: GradientField, params: GcParams = GcParams()) -> np.ndarray:
    """Descriptors for every seed at once, shape (n_seeds, 32)."""
    pts = seeds.as_array()
    n = len(pts)
    if n == 0:
        return np.zeros((0, DIMS))
    dx = pts[None, :, 0] - pts[:, None, 0]
    dy = pts[None, :, 1] - pts[:, None, 1]
    d2 = dx * dx + dy * dy
    radii_sq = np.asarray(params.radii, dtype=np.int64) ** 2
    rows, cols = np.nonzero((d2 > 0) & (d2 <= radii_sq[-1]))
    bins = _bin_index(dx[rows, cols], dy[rows, cols], d2[rows, cols], radii_sq)
    mags = grad.mag[pts[:, 1], pts[:, 0]]
    out = np.bincount(rows * DIMS + bins, weights=mags[cols], minlength=n * DIMS)
    return out.reshape(n, DIMS)


def describe(img: GlyphImage, params: GcParams = GcParams()):
    """Seeds and their descriptors for a normalized glyph."""
    seeds = extract_seeds(img)
    return seeds, gradient_contexts(seeds, sobel(img), params)


# --- visual dictionary ------------------------------------------------------

@dataclass
class Codebook:
    centers: np.ndarray
    min_cluster_size: int
    k: int
    seed: int = 0
    init_inertia: float = field(default=float("nan"), compare=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.centers)


def default_min_cluster_size(n_descriptors: int) -> int:
    return max(2, int(math.ceil(0.001 * n_descriptors)))


def _sq_dists(x, centers):
    return cdist(np.asarray(x, dtype=np.float64), np.asarray(centers, dtype=np.float64), "sqeuclidean")


def _assign(x, centers):
    return np.argmin(_sq_dists(x, centers), axis=1)


def _kmeanspp(x, k, rng):
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = _sq_dists(x, centers[:1])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, _sq_dists(x, centers[-1:])[:, 0])
    return np.array(centers, dtype=np.float64)


def inertia(x, centers) -> float:
    return float(_sq_dists(x, centers).min(axis=1).sum())


def _lloyd(x, centers, labels, max_iter):
    centers = centers.copy()
    for _ in range(max_iter):
        for c in range(len(centers)):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
        new = _assign(x, centers)
        if np.array_equal(new, labels):
            break
        labels = new
    return centers, labels


def build_codebook(descriptors, k: int = 64, min_cluster_size: int | None = None, seed: int = 0,
                   max_iter: int = 100) -> Codebook:
    """K-means with k-means++ seeding and Lloyd iterations. Clusters with
    fewer than ``min_cluster_size`` members are pruned and Lloyd resumes on
    the survivors until no cluster is too small."""
    x = np.asarray(descriptors, dtype=np.float64)
    if k < 1 or len(x) < k:
        raise InsufficientData(f"need at least k={k} descriptors, got {len(x)}")
    if min_cluster_size is None:
        min_cluster_size = default_min_cluster_size(len(x))
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    init_inertia = inertia(x, centers)

    labels = _assign(x, centers)
    while True:
        centers, labels = _lloyd(x, centers, labels, max_iter)
        counts = np.bincount(labels, minlength=len(centers))
        keep = counts >= min_cluster_size
        if not keep.any():
            keep[np.argmax(counts)] = True
        if keep.all():
            break
        # drop small clusters, hand their members to the survivors, iterate again
        centers = centers[keep]
        labels = _assign(x, centers)
    return Codebook(centers, int(min_cluster_size), int(k), int(seed), init_inertia)


def assign_codeword(d, cb: Codebook) -> int:
    """Index of the nearest center; ties go to the lowest index."""
    return int(_assign(np.asarray(d, dtype=np.float64).reshape(1, -1), cb.centers)[0])


def assign_codewords(descs, cb: Codebook) -> np.ndarray:
    descs = np.asarray(descs, dtype=np.float64).reshape(-1, cb.centers.shape[1])
    if len(descs) == 0:
        return np.zeros(0, dtype=np.int64)
    return _assign(descs, cb.centers)


# --- integral histogram -----------------------------------------------------

class IntegralHistogram:
    """Cumulative per-codeword seed counts; ``table[y, x, k]`` counts seeds
    with code k at positions strictly above-left of (x, y)."""

    def __init__(self, table: np.ndarray):
        self.table = table

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    @property
    def n_codes(self) -> int:
        return self.table.shape[2]

    def query_many(self, rects: np.ndarray) -> np.ndarray:
        r = np.asarray(rects, dtype=np.int64).reshape(-1, 4)
        x0, y0, x1, y1 = r[:, 0], r[:, 1], r[:, 2] + 1, r[:, 3] + 1
        t = self.table
        return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


def build_integral_histogram(seeds: SeedSet, codes, cb: Codebook, width: int = 64, height: int = 64):
    codes = np.asarray(codes, dtype=np.int64)
    pts = seeds.as_array()
    if len(codes) != len(pts):
        raise ValueError("one codeword per seed required")
    grid = np.zeros((height + 1, width + 1, cb.size), dtype=np.int32)
    np.add.at(grid, (pts[:, 1] + 1, pts[:, 0] + 1, codes), 1)
    grid = grid.cumsum(axis=0, dtype=np.int32).cumsum(axis=1, dtype=np.int32)
    return IntegralHistogram(grid)


def window_feature(ih: IntegralHistogram, window: Rect) -> np.ndarray:
    """Raw codeword counts of the seeds inside an inclusive rectangle."""
    window = Rect(*window)
    if not window.within(ih.width, ih.height):
        raise BoundsError(f"window {tuple(window)} outside {ih.width}x{ih.height}")
    return ih.query_many(np.asarray([window]))[0]


def window_features(ih: IntegralHistogram, grid: WindowGrid) -> np.ndarray:
    """Counts for every window of ``grid`` in enumeration order, (n_windows, K)."""
    return ih.query_many(rects_array(enumerate_windows(grid)))


@dataclass
class EncodedSample:
    """A glyph reduced to what the classifiers need."""

    seeds: SeedSet
    codes: np.ndarray
    windows: np.ndarray  # (n_windows, K) float64 codeword counts


def encode(img: GlyphImage, cb: Codebook, grid: WindowGrid, params: GcParams = GcParams(),
           described=None) -> EncodedSample:
    """Window features of one glyph. ``described`` may carry precomputed
    ``(seeds, descriptors)``, in which case ``img`` may be None."""
    seeds, descs = described if described is not None else describe(img, params)
    codes = assign_codewords(descs, cb)
    width, height = (img.width, img.height) if img is not None else (grid.size, grid.size)
    ih = build_integral_histogram(seeds, codes, cb, width, height)
    return EncodedSample(seeds, codes, window_features(ih, grid).astype(np.float64))
