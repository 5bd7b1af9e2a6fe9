import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from simglyph.errors import EmptyGlyph, FormatError
from simglyph.imagecore import (GlyphImage, external_contours, extract_seeds, load_glyph, normalize,
                                read_pgm, read_text_raster, sobel, trace_contour, write_pgm,
                                write_text_raster)
from simglyph.synthdata import draw_line

KX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]])
KY = KX.T


def brute_sobel(px):
    """Direct 3x3 correlation, reading zero outside the raster."""
    h, w = px.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = y + dy, x + dx
                    v = px[yy, xx] if 0 <= yy < h and 0 <= xx < w else 0
                    gx[y, x] += KX[dy + 1, dx + 1] * v
                    gy[y, x] += KY[dy + 1, dx + 1] * v
    return gx, gy


binary_rasters = arrays(np.uint8, st.tuples(st.integers(1, 24), st.integers(1, 24)),
                        elements=st.integers(0, 1))


# --- normalize --------------------------------------------------------------

def test_full_extent_centered_glyph_is_unchanged():
    px = np.zeros((64, 64), np.uint8)
    px[0, :] = 1
    px[:, 0] = 1
    px[63, :] = 1
    px[:, 63] = 1
    img = GlyphImage(px)
    assert normalize(img) == img


def test_pure_downscale_of_full_square():
    out = normalize(np.ones((128, 128), np.uint8))
    assert out.pixels.shape == (64, 64)
    assert out.pixels.all()


def test_box_scale_and_placement_match_hand_arithmetic():
    raw = np.zeros((40, 100), np.uint8)
    raw[10:30, 10:90] = 1                      # 80 wide, 20 tall
    scale = 64 / max(80, 20)
    w, h = round(80 * scale), round(20 * scale)
    assert (w, h) == (64, 16)
    # a filled box has its centroid at its own centre
    x0 = math.floor(31.5 - (w - 1) / 2 + 0.5)
    y0 = math.floor(31.5 - (h - 1) / 2 + 0.5)
    expected = np.zeros((64, 64), np.uint8)
    expected[y0:y0 + h, x0:x0 + w] = 1
    assert np.array_equal(normalize(raw).pixels, expected)
    assert (x0, y0) == (0, 24)


def test_empty_raster_raises():
    with pytest.raises(EmptyGlyph):
        normalize(np.zeros((10, 10), np.uint8))


@given(binary_rasters)
def test_normalize_is_idempotent(px):
    if not px.any():
        return
    once = normalize(px)
    assert normalize(once) == once
    assert once.pixels.shape == (64, 64)
    assert set(np.unique(once.pixels)) <= {0, 1}
    assert once.pixels.any()


# --- sobel ------------------------------------------------------------------

@pytest.mark.parametrize("value", [0, 1])
def test_constant_image_has_no_interior_gradient(value):
    g = sobel(GlyphImage(np.full((64, 64), value, np.uint8)))
    assert not g.gx[1:-1, 1:-1].any()
    assert not g.gy[1:-1, 1:-1].any()


def test_vertical_step_edge():
    px = np.zeros((64, 64), np.uint8)
    px[:, 32:] = 1
    g = sobel(GlyphImage(px))
    for col in (31, 32):
        assert np.all(np.abs(g.gx[1:-1, col]) == 4)
        assert not g.gy[1:-1, col].any()


def test_single_pixel_response_is_the_flipped_kernel():
    px = np.zeros((9, 9), np.uint8)
    px[4, 4] = 1
    g = sobel(GlyphImage(px))
    gx, gy = brute_sobel(px)
    assert np.array_equal(g.gx, gx) and np.array_equal(g.gy, gy)
    assert np.count_nonzero(g.mag) == 8
    # the pixel above-left sees the kernel's bottom-right entry
    assert g.gx[3, 3] == KX[2, 2] and g.gy[3, 3] == KY[2, 2]


def test_sobel_matches_brute_force_on_random_rasters(rng):
    for _ in range(100):
        h, w = rng.integers(1, 14, size=2)
        px = rng.integers(0, 2, size=(h, w)).astype(np.uint8)
        g = sobel(GlyphImage(px))
        gx, gy = brute_sobel(px)
        assert np.array_equal(g.gx, gx)
        assert np.array_equal(g.gy, gy)


@given(binary_rasters)
def test_magnitude_is_hypot_of_components(px):
    g = sobel(GlyphImage(px))
    assert g.mag.shape == px.shape
    assert np.allclose(g.mag, np.sqrt(g.gx ** 2 + g.gy ** 2), atol=1e-9)
    assert (g.mag >= 0).all()


# --- contours and seeds -----------------------------------------------------

def test_single_pixel_gives_one_seed():
    px = np.zeros((64, 64), np.uint8)
    px[20, 30] = 1
    assert extract_seeds(GlyphImage(px)).points == ((30, 20),)


def test_filled_square_contour_by_hand():
    px = np.zeros((10, 10), np.uint8)
    px[2:6, 3:7] = 1
    contour = external_contours(GlyphImage(px))[0]
    # clockwise from the top-left corner: top row, right column, bottom row, left column
    expected = [(3, 2), (4, 2), (5, 2), (6, 2), (6, 3), (6, 4), (6, 5), (5, 5), (4, 5), (3, 5),
                (3, 4), (3, 3)]
    assert contour == expected
    seeds = extract_seeds(GlyphImage(px))
    assert len(seeds) == 6
    assert seeds.points == tuple(expected[::2])


def test_one_pixel_wide_line_is_walked_both_ways():
    px = np.zeros((5, 8), np.uint8)
    px[2, 1:6] = 1
    contour = trace_contour(px.astype(bool), (1, 2))
    assert contour == [(1, 2), (2, 2), (3, 2), (4, 2), (5, 2), (4, 2), (3, 2), (2, 2)]


def test_components_are_ordered_top_left_first():
    px = np.zeros((20, 20), np.uint8)
    px[10:12, 2:4] = 1
    px[3:5, 15:17] = 1
    px[3:5, 6:8] = 1
    starts = [c[0] for c in external_contours(GlyphImage(px))]
    assert starts == [(6, 3), (15, 3), (2, 10)]


def _character_like():
    """Six separate strokes, roughly the layout of a handwritten character."""
    px = np.zeros((64, 64), np.uint8)
    for p, q in [((4, 6), (59, 6)), ((8, 20), (55, 20)), ((6, 34), (57, 34)),
                 ((4, 58), (59, 58)), ((14, 40), (14, 54)), ((48, 40), (48, 54))]:
        draw_line(px, p, q, 3)
    return GlyphImage(px)


def test_typical_glyph_seed_count():
    n = len(extract_seeds(normalize(_character_like())))
    assert 200 <= n <= 400


def _background_4_neighbour(px, x, y):
    h, w = px.shape
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        xx, yy = x + dx, y + dy
        if not (0 <= xx < w and 0 <= yy < h) or px[yy, xx] == 0:
            return True
    return False


@given(binary_rasters)
def test_seeds_are_unique_boundary_foreground_pixels(px):
    if not px.any():
        return
    img = GlyphImage(px)
    seeds = extract_seeds(img)
    assert len(seeds) >= 1
    assert len(set(seeds.points)) == len(seeds)
    for x, y in seeds.points:
        assert img.pixels[y, x] == 1
        assert _background_4_neighbour(img.pixels, x, y)


@given(st.integers(0, 40), st.integers(0, 40), st.integers(2, 20), st.integers(2, 20))
def test_seed_count_is_half_the_contour_rounded_up(x0, y0, w, h):
    # at least 2 px thick so the contour is a simple closed loop (a 1 px
    # line is walked out and back, repeating pixels)
    px = np.zeros((64, 64), np.uint8)
    px[y0:y0 + h, x0:x0 + w] = 1
    img = GlyphImage(px)
    (contour,) = external_contours(img)
    assert len(extract_seeds(img)) == math.ceil(len(contour) / 2)


# --- file formats -----------------------------------------------------------

def test_pgm_round_trip(tmp_path, rng):
    img = GlyphImage(rng.integers(0, 2, size=(7, 11)))
    write_pgm(tmp_path / "g.pgm", img)
    assert read_pgm(tmp_path / "g.pgm") == img
    assert load_glyph(tmp_path / "g.pgm") == img


def test_pgm_threshold_and_comments(tmp_path):
    data = b"P5\n# made by hand\n3 1\n255\n" + bytes([0, 127, 128])
    (tmp_path / "a.pgm").write_bytes(data)
    assert read_pgm(tmp_path / "a.pgm").pixels.tolist() == [[1, 1, 0]]


def test_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "a.pgm")


def test_text_raster_round_trip(tmp_path, rng):
    img = GlyphImage(rng.integers(0, 2, size=(5, 9)))
    write_text_raster(tmp_path / "g.txt", img)
    assert read_text_raster(tmp_path / "g.txt") == img
    (tmp_path / "bad.txt").write_text("0102\n")
    with pytest.raises(FormatError):
        read_text_raster(tmp_path / "bad.txt")
