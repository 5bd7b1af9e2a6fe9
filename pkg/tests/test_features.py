import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simglyph.errors import BoundsError, InsufficientData
from simglyph.features import (Codebook, GcParams, assign_codeword, assign_codewords,
                               build_codebook, build_integral_histogram, default_min_cluster_size,
                               describe, encode, gradient_context, gradient_contexts, inertia,
                               window_feature, window_features)
from simglyph.geometry import Rect, WindowGrid, enumerate_windows
from simglyph.imagecore import GlyphImage, GradientField, SeedSet, sobel

RADII = (3, 4, 8, 16)


def field(mag):
    mag = np.asarray(mag, dtype=np.float64)
    return GradientField(np.zeros_like(mag), np.zeros_like(mag), mag)


def naive_context(p, points, mag, radii=RADII):
    """Straight-line transcription: classify each neighbour on its own."""
    out = [0.0] * 32
    for q in points:
        if q == p:
            continue
        dx, dy = q[0] - p[0], q[1] - p[1]
        dist = math.sqrt(dx * dx + dy * dy)
        if dist > radii[-1]:
            continue
        band = next(i for i, r in enumerate(radii) if dist <= r)
        deg = math.degrees(math.atan2(dy, dx)) % 360.0
        sector = min(int(deg // 45), 7)
        out[8 * band + sector] += mag[q[1]][q[0]]
    return np.array(out)


def test_isolated_seed_has_zero_descriptor():
    seeds = SeedSet(((10, 10), (40, 40)))
    d = gradient_context((10, 10), seeds, field(np.ones((64, 64))))
    assert d.shape == (32,) and not d.any()


def test_single_neighbour_lands_in_hand_computed_bin():
    mag = np.zeros((64, 64))
    mag[20, 25] = 3.0
    d = gradient_context((20, 20), SeedSet(((20, 20), (25, 20))), field(mag))
    # distance 5 is in band 2 (4 < 5 <= 8); angle 0 is sector 0
    expected = np.zeros(32)
    expected[16] = 3.0
    assert np.array_equal(d, expected)


def test_band_edges_are_inclusive():
    mag = np.ones((64, 64))
    p = (30, 30)
    for r, band in zip(RADII, range(4)):
        d = gradient_context(p, SeedSet((p, (30 + r, 30))), field(mag))
        assert d[8 * band] == 1.0


def test_random_neighbourhoods_match_naive_binning(rng):
    for _ in range(200):
        p = tuple(int(v) for v in rng.integers(16, 48, size=2))
        pts = {p}
        while len(pts) < 11:
            pts.add(tuple(int(v) for v in rng.integers(0, 64, size=2)))
        pts = sorted(pts)
        mag = rng.random((64, 64)) * 5
        d = gradient_context(p, SeedSet(tuple(pts)), field(mag))
        assert np.allclose(d, naive_context(p, pts, mag), rtol=0, atol=1e-12)


def test_vectorized_descriptors_equal_per_seed_ones(rng):
    pts = sorted({tuple(int(v) for v in rng.integers(0, 64, size=2)) for _ in range(120)})
    seeds = SeedSet(tuple(pts))
    grad = field(rng.random((64, 64)))
    all_d = gradient_contexts(seeds, grad)
    for i, p in enumerate(pts):
        assert np.array_equal(all_d[i], gradient_context(p, seeds, grad))


points = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=30, unique=True)


@given(points)
def test_every_in_range_neighbour_falls_in_exactly_one_bin(pts):
    p = pts[0]
    d = gradient_context(p, SeedSet(tuple(pts)), field(np.ones((41, 41))))
    in_range = sum(1 for q in pts[1:] if (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2 <= RADII[-1] ** 2)
    assert d.sum() == in_range
    assert (d >= 0).all()


@given(points, st.integers(0, 2 ** 32 - 1))
def test_gradient_changes_beyond_outer_radius_are_invisible(pts, seed):
    r = np.random.default_rng(seed)
    p = pts[0]
    seeds = SeedSet(tuple(pts))
    mag = r.random((41, 41))
    before = gradient_context(p, seeds, field(mag))
    yy, xx = np.mgrid[0:41, 0:41]
    far = (xx - p[0]) ** 2 + (yy - p[1]) ** 2 > RADII[-1] ** 2
    changed = mag.copy()
    changed[far] = r.random(int(far.sum())) * 100
    assert np.array_equal(gradient_context(p, seeds, field(changed)), before)


@given(st.integers(0, 2 ** 32 - 1))
def test_pixel_edits_outside_sobel_reach_leave_descriptor_alone(seed):
    # A pixel edit alters the gradient within one pixel of itself, so edits
    # farther than r4 + 2 from the seed cannot reach any in-range neighbour.
    r = np.random.default_rng(seed)
    px = (r.random((64, 64)) < 0.3).astype(np.uint8)
    img = GlyphImage(px)
    pts = tuple(sorted({tuple(int(v) for v in r.integers(0, 64, size=2)) for _ in range(40)}))
    p = pts[0]
    before = gradient_context(p, SeedSet(pts), sobel(img))
    yy, xx = np.mgrid[0:64, 0:64]
    far = np.sqrt((xx - p[0]) ** 2 + (yy - p[1]) ** 2) > RADII[-1] + 2
    edited = px.copy()
    edited[far] = r.integers(0, 2, size=int(far.sum()))
    assert np.array_equal(gradient_context(p, SeedSet(pts), sobel(GlyphImage(edited))), before)


def test_params_validation():
    assert GcParams().radii == RADII
    with pytest.raises(ValueError):
        GcParams((3, 3, 8, 16))
    with pytest.raises(ValueError):
        GcParams((0, 4, 8, 16))


# --- codebook ---------------------------------------------------------------

def test_duplicated_points_become_the_centers(rng):
    base = rng.random((5, 32)) * 10
    cb = build_codebook(np.repeat(base, 10, axis=0), k=5, min_cluster_size=1, seed=1)
    got = sorted(map(tuple, np.round(cb.centers, 9)))
    assert got == sorted(map(tuple, np.round(base, 9)))


def test_identical_descriptors_collapse_to_one_center():
    x = np.tile(np.arange(32.0), (20, 1))
    cb = build_codebook(x, k=3, seed=0)
    assert cb.size == 1
    assert np.array_equal(cb.centers[0], x[0])


def test_lloyd_improves_on_seeding_and_assigns_to_nearest(rng):
    x = rng.random((200, 32))
    cb = build_codebook(x, k=8, seed=4)
    assert inertia(x, cb.centers) <= cb.init_inertia
    d = ((x[:, None, :] - cb.centers[None]) ** 2).sum(axis=2)
    labels = assign_codewords(x, cb)
    assert np.array_equal(labels, d.argmin(axis=1))
    for c in range(cb.size):
        assert np.allclose(cb.centers[c], x[labels == c].mean(axis=0))
        assert (labels == c).sum() >= cb.min_cluster_size


def test_small_clusters_are_pruned(rng):
    big = rng.normal(0, 0.1, size=(60, 32))
    outlier = np.full((1, 32), 50.0)
    cb = build_codebook(np.vstack([big, outlier]), k=4, min_cluster_size=3, seed=0)
    counts = np.bincount(assign_codewords(np.vstack([big, outlier]), cb), minlength=cb.size)
    assert 1 <= cb.size <= 4
    assert not np.any(np.all(np.isclose(cb.centers, 50.0), axis=1))
    assert (counts >= 3).all()


def test_codebook_is_bit_identical_for_same_seed(rng):
    x = rng.random((150, 32))
    a, b = build_codebook(x, k=6, seed=9), build_codebook(x, k=6, seed=9)
    assert a.centers.tobytes() == b.centers.tobytes()


def test_too_few_descriptors():
    with pytest.raises(InsufficientData):
        build_codebook(np.zeros((3, 32)), k=4)


def test_default_pruning_threshold():
    assert default_min_cluster_size(100) == 2
    assert default_min_cluster_size(5001) == 6


def test_assignment_rules(rng):
    centers = rng.random((5, 32))
    cb = Codebook(centers, 1, 5)
    assert assign_codeword(centers[2], cb) == 2
    tie = Codebook(np.array([[0.0] * 32, [2.0] + [0.0] * 31]), 1, 2)
    assert assign_codeword(np.array([1.0] + [0.0] * 31), tie) == 0
    for _ in range(100):
        d = rng.random(32)
        scan = min(range(5), key=lambda i: (float(((d - centers[i]) ** 2).sum()), i))
        assert assign_codeword(d, cb) == scan


# --- integral histogram -----------------------------------------------------

def random_seeds(rng, n=80, k=6):
    pts = sorted({tuple(int(v) for v in rng.integers(0, 64, size=2)) for _ in range(n)})
    return SeedSet(tuple(pts)), rng.integers(0, k, size=len(pts)), Codebook(np.zeros((k, 32)), 1, k)


def brute_counts(seeds, codes, k, rect):
    out = np.zeros(k, dtype=np.int64)
    for (x, y), c in zip(seeds.points, codes):
        if rect.x0 <= x <= rect.x1 and rect.y0 <= y <= rect.y1:
            out[c] += 1
    return out


def test_full_window_counts_every_seed(rng):
    seeds, codes, cb = random_seeds(rng)
    ih = build_integral_histogram(seeds, codes, cb)
    assert np.array_equal(window_feature(ih, Rect(0, 0, 63, 63)), np.bincount(codes, minlength=cb.size))


def test_window_without_seeds_is_zero():
    seeds = SeedSet(((1, 1), (60, 60)))
    ih = build_integral_histogram(seeds, [0, 1], Codebook(np.zeros((2, 32)), 1, 2))
    assert not window_feature(ih, Rect(10, 10, 40, 40)).any()


def test_boundary_seeds_are_inside():
    seeds = SeedSet(((10, 10), (20, 20)))
    ih = build_integral_histogram(seeds, [0, 0], Codebook(np.zeros((1, 32)), 1, 1))
    assert window_feature(ih, Rect(10, 10, 20, 20))[0] == 2
    assert window_feature(ih, Rect(11, 11, 19, 19))[0] == 0


def test_random_windows_match_seed_scan(rng):
    seeds, codes, cb = random_seeds(rng)
    ih = build_integral_histogram(seeds, codes, cb)
    for _ in range(50):
        x0, x1 = sorted(rng.integers(0, 64, size=2))
        y0, y1 = sorted(rng.integers(0, 64, size=2))
        r = Rect(int(x0), int(y0), int(x1), int(y1))
        assert np.array_equal(window_feature(ih, r), brute_counts(seeds, codes, cb.size, r))


@given(st.integers(0, 2 ** 32 - 1))
def test_grid_features_equal_brute_force(seed):
    r = np.random.default_rng(seed)
    seeds, codes, cb = random_seeds(r, n=int(r.integers(1, 60)), k=int(r.integers(1, 8)))
    ih = build_integral_histogram(seeds, codes, cb)
    grid = WindowGrid(scales=((16, 16), (24, 64)), stride=8)
    feats = window_features(ih, grid)
    for rect, row in zip(enumerate_windows(grid), feats):
        assert np.array_equal(row, brute_counts(seeds, codes, cb.size, rect))
        assert row.sum() == sum(rect.contains_point(x, y) for x, y in seeds.points)


def test_out_of_bounds_window():
    ih = build_integral_histogram(SeedSet(((0, 0),)), [0], Codebook(np.zeros((1, 32)), 1, 1))
    with pytest.raises(BoundsError):
        window_feature(ih, Rect(60, 60, 64, 63))


def test_encode_uses_every_window(rng):
    px = np.zeros((64, 64), np.uint8)
    px[10:50, 20:24] = 1
    px[30:34, 5:60] = 1
    img = GlyphImage(px)
    seeds, descs = describe(img)
    cb = build_codebook(descs, k=4, seed=0)
    enc = encode(img, cb, WindowGrid())
    assert enc.windows.shape == (541, cb.size)
    assert enc.windows[enumerate_windows(WindowGrid()).index(Rect(0, 0, 63, 31))].sum() == sum(
        y <= 31 for _, y in seeds.points)
