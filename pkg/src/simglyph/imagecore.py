"""Binary glyph rasters: loading, size normalization, Sobel gradients and
contour seed extraction.

Pixel arrays are indexed ``pixels[y, x]``; points are ``(x, y)`` tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyGlyph, FormatError

SIZE = 64

# Moore neighbourhood in clockwise order (y grows downwards), starting west.
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


@dataclass(frozen=True, eq=False)
class GlyphImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("glyph raster must be 2-D")
        px = (px != 0).astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, GlyphImage) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    mag: np.ndarray


@dataclass(frozen=True)
class SeedSet:
    points: tuple

    def __len__(self):
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.int64).reshape(-1, 2)


def _resample(px: np.ndarray, size: int) -> np.ndarray:
    ys, xs = np.nonzero(px)
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    bw, bh = x1 - x0 + 1, y1 - y0 + 1
    scale = size / max(bw, bh)
    ow = min(size, max(1, int(math.floor(bw * scale + 0.5))))
    oh = min(size, max(1, int(math.floor(bh * scale + 0.5))))
    # nearest source pixel for each output pixel centre
    sx = np.minimum(x0 + np.floor((np.arange(ow) + 0.5) / scale).astype(np.int64), x1)
    sy = np.minimum(y0 + np.floor((np.arange(oh) + 0.5) / scale).astype(np.int64), y1)
    patch = px[np.ix_(sy, sx)]

    py, pxs = np.nonzero(patch)
    if len(py) == 0:
        patch = np.ones((1, 1), dtype=np.uint8)
        py, pxs = np.zeros(1, int), np.zeros(1, int)
    cx, cy = pxs.mean(), py.mean()
    centre = (size - 1) / 2.0
    ox = min(max(int(math.floor(centre - cx + 0.5)), 0), size - ow)
    oy = min(max(int(math.floor(centre - cy + 0.5)), 0), size - oh)
    out = np.zeros((size, size), dtype=np.uint8)
    out[oy:oy + oh, ox:ox + ow] = patch
    return out


def normalize(img, size: int = SIZE) -> GlyphImage:
    """Scale the foreground bounding box to fit a ``size`` x ``size`` canvas.

    Aspect ratio is preserved, sampling is nearest-neighbour and the result is
    placed so that the foreground centroid sits as close to the canvas centre
    as the bounding box allows.
    """
    px = img.pixels if isinstance(img, GlyphImage) else (np.asarray(img) != 0).astype(np.uint8)
    if not px.any():
        raise EmptyGlyph("raster has no foreground pixels")
    out = _resample(px, size)
    # Downscaling can drop an extreme row or column; a second pass then
    # restores full extent and later passes are the identity.
    for _ in range(3):
        again = _resample(out, size)
        if np.array_equal(again, out):
            break
        out = again
    return GlyphImage(out)


def sobel(img: GlyphImage) -> GradientField:
    """3x3 Sobel correlation with zero padding outside the raster."""
    p = np.pad(img.pixels.astype(np.float64), 1)
    h, w = img.pixels.shape

    def at(dy, dx):
        return p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    gx = (at(-1, 1) + 2 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2 * at(0, -1) + at(1, -1))
    gy = (at(1, -1) + 2 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2 * at(-1, 0) + at(-1, 1))
    return GradientField(gx, gy, np.hypot(gx, gy))


def trace_contour(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore boundary following around the component containing ``start``.

    ``start`` must be the component's topmost-then-leftmost pixel. Returns the
    clockwise pixel sequence without repeating the start pixel.
    """
    h, w = mask.shape

    def fg(x, y):
        return 0 <= x < w and 0 <= y < h and mask[y, x]

    def step(cur, back):
        cx, cy = cur
        for k in range(1, 9):
            i = (back + k) % 8
            dx, dy = _DIRS[i]
            nx, ny = cx + dx, cy + dy
            if fg(nx, ny):
                pdx, pdy = _DIRS[(i - 1) % 8]
                return (nx, ny), _DIR_INDEX[(cx + pdx - nx, cy + pdy - ny)]
        return None, None

    path = []
    cur, back = start, 0
    first = None
    for _ in range(4 * h * w + 8):
        nxt, nback = step(cur, back)
        if nxt is None:
            return [start]
        if first is None:
            first = (cur, nxt)
        elif (cur, nxt) == first:
            break
        path.append(cur)
        cur, back = nxt, nback
    return path


def external_contours(img: GlyphImage) -> list[list[tuple[int, int]]]:
    """External contour of every 8-connected component, top-left-first."""
    labels, n = ndimage.label(img.pixels, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return []
    flat = labels.ravel()
    # first raster-order pixel of each label is its topmost-then-leftmost pixel
    _, first_idx = np.unique(flat, return_index=True)
    starts = []
    for lab, idx in zip(np.unique(flat), first_idx):
        if lab == 0:
            continue
        y, x = divmod(int(idx), img.width)
        starts.append((idx, lab, (x, y)))
    starts.sort()
    return [trace_contour(labels == lab, start) for _, lab, start in starts]


def extract_seeds(img: GlyphImage) -> SeedSet:
    """Keep every second external-contour pixel, starting with the first."""
    seen = set()
    points = []
    for contour in external_contours(img):
        for p in contour[::2]:
            if p not in seen:
                seen.add(p)
                points.append(p)
    return SeedSet(tuple(points))


# --- file formats -----------------------------------------------------------

def read_pgm(path) -> GlyphImage:
    """Binary PGM (P5, maxval 255); values below 128 are foreground."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255")
    pos += 1
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return GlyphImage((raw.reshape(h, w) < 128).astype(np.uint8))


def pgm_bytes(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype=np.uint8)
    h, w = values.shape
    return b"P5\n%d %d\n255\n" % (w, h) + values.tobytes()


def glyph_to_gray(img: GlyphImage) -> np.ndarray:
    """Foreground black (0) on white (255)."""
    return np.where(img.pixels == 1, 0, 255).astype(np.uint8)


def write_pgm(path, img: GlyphImage):
    Path(path).write_bytes(pgm_bytes(glyph_to_gray(img)))


def read_text_raster(path) -> GlyphImage:
    """Lines of '0'/'1' characters, one raster row per line."""
    rows = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or any(set(r) - {"0", "1"} for r in rows) or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: expected equal-length lines of 0/1")
    return GlyphImage(np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8))


def write_text_raster(path, img: GlyphImage):
    Path(path).write_text("\n".join("".join(map(str, row)) for row in img.pixels) + "\n")


def load_glyph(path) -> GlyphImage:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_text_raster(path)
