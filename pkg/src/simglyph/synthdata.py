"""Synthetic similar-glyph pairs with a planted discriminative motif.

Both classes of a pair share the same random stroke scaffolding; only the
positive class carries an extra radical-like motif inside the planted region.
Ground truth for localization is the motif's bounding box in each positive
sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .geometry import CANVAS, Rect
from .imagecore import GlyphImage

MOTIFS = ("ticks", "bars", "box", "ring", "cross", "corner")
# background gap between the jittered motif and the scaffold
CLEARANCE = 2
# spanning strokes may tilt by this much at their far end
SPAN_TILT = 2


@dataclass(frozen=True)
class PairSpec:
    seed: int
    region: Rect
    motif: str = "bars"
    jitter: int = 0
    samples_per_class: int = 1
    thickness_variation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "region", Rect(*self.region))


@dataclass
class PairSamples:
    positives: list
    negatives: list
    truth: list = field(default_factory=list)  # motif bbox per positive sample


def clear_zone(spec: PairSpec) -> Rect:
    """Area wiped of scaffold strokes in every sample of the pair."""
    return spec.region.dilate(spec.jitter + CLEARANCE)


def _span_options(lo: int, hi: int) -> list:
    # a spanning stroke is up to 3 px thick and tilts by SPAN_TILT; keep it
    # (and its tilt) out of [lo, hi]
    pad = SPAN_TILT + 2
    return [v for v in range(2, CANVAS - 2) if v + pad < lo or v - pad > hi]


def validate(spec: PairSpec):
    r = spec.region
    if spec.motif not in MOTIFS:
        raise SpecError(f"unknown motif {spec.motif!r}; choose from {MOTIFS}")
    if spec.jitter < 0 or spec.samples_per_class < 1:
        raise SpecError("jitter must be >= 0 and samples_per_class >= 1")
    if r.width < 6 or r.height < 6:
        raise SpecError("planted region must be at least 6x6")
    if not r.dilate(spec.jitter).within(CANVAS, CANVAS):
        raise SpecError(f"region {tuple(r)} with jitter {spec.jitter} leaves the canvas")
    zone = clear_zone(spec)
    if not _span_options(zone.y0, zone.y1) or not _span_options(zone.x0, zone.x1):
        raise SpecError("planted region leaves no room for the scaffold")


def _stamp(canvas, x, y, t):
    h, w = canvas.shape
    lo, hi = (t - 1) // 2, t // 2
    canvas[max(0, y - lo):min(h, y + hi + 1), max(0, x - lo):min(w, x + hi + 1)] = 1


def draw_line(canvas, p, q, t):
    """Square-brush line of thickness ``t`` from ``p`` to ``q``, both (x, y)."""
    (x0, y0), (x1, y1) = p, q
    n = int(max(abs(x1 - x0), abs(y1 - y0))) * 2 + 1
    for s in np.linspace(0.0, 1.0, n):
        _stamp(canvas, int(round(x0 + s * (x1 - x0))), int(round(y0 + s * (y1 - y0))), t)


def _scaffold_strokes(spec: PairSpec):
    rng = np.random.default_rng([spec.seed, 0])
    zone = clear_zone(spec)
    # One horizontal and one vertical stroke span the canvas, so the
    # foreground bounding box is the whole raster and normalization leaves
    # every sample untouched.
    hy = int(rng.choice(_span_options(zone.y0, zone.y1)))
    vx = int(rng.choice(_span_options(zone.x0, zone.x1)))
    strokes = [((0, hy), (CANVAS - 1, hy), "h"), ((vx, 0), (vx, CANVAS - 1), "v")]
    for _ in range(int(rng.integers(2, 7))):
        p = tuple(int(v) for v in rng.integers(2, CANVAS - 2, size=2))
        q = tuple(int(v) for v in rng.integers(2, CANVAS - 2, size=2))
        strokes.append((p, q, "free"))
    thickness = [int(rng.integers(2, 4)) for _ in strokes]
    return strokes, thickness


def _jitter_stroke(p, q, kind, rng, j):
    if kind == "free":
        d = rng.integers(-j, j + 1, size=4)
        p = (int(np.clip(p[0] + d[0], 0, CANVAS - 1)), int(np.clip(p[1] + d[1], 0, CANVAS - 1)))
        q = (int(np.clip(q[0] + d[2], 0, CANVAS - 1)), int(np.clip(q[1] + d[3], 0, CANVAS - 1)))
        return p, q
    tilt = int(rng.integers(-min(j, SPAN_TILT), min(j, SPAN_TILT) + 1))
    if kind == "h":
        return p, (q[0], q[1] + tilt)
    return p, (q[0] + tilt, q[1])


def _fill_crop(m):
    """Shift the pattern so its bounding box starts at the array origin."""
    ys, xs = np.nonzero(m)
    out = np.zeros_like(m)
    sub = m[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
    out[:sub.shape[0], :sub.shape[1]] = sub
    return out


def motif_pixels(kind: str, w: int, h: int) -> np.ndarray:
    """Binary ``h`` x ``w`` stroke pattern whose bounding box fills the array."""
    m = np.zeros((h, w), dtype=np.uint8)
    t = 2 if min(w, h) < 16 else 3
    vertical = h >= w
    if kind == "ticks":
        # three short slanted strokes stacked along the long side
        for i in range(3):
            if vertical:
                a = i * (h - 1) // 3
                b = h - 1 if i == 2 else max(a, (i + 1) * (h - 1) // 3 - 2)
                draw_line(m, (0, a), (w - 1, b), t)
            else:
                a = i * (w - 1) // 3
                b = w - 1 if i == 2 else max(a, (i + 1) * (w - 1) // 3 - 2)
                draw_line(m, (a, h - 1), (b, 0), t)
    elif kind == "bars":
        for i in range(3):
            if vertical:
                y = i * (h - t) // 2
                m[y:y + t, :] = 1
            else:
                x = i * (w - t) // 2
                m[:, x:x + t] = 1
    elif kind == "box":
        m[:t, :] = 1
        m[-t:, :] = 1
        m[:, :t] = 1
        m[:, -t:] = 1
    elif kind == "ring":
        yy, xx = np.mgrid[0:h, 0:w]
        ny = (yy - (h - 1) / 2) / (h / 2)
        nx = (xx - (w - 1) / 2) / (w / 2)
        inner = (nx * w / (w - 2 * t)) ** 2 + (ny * h / (h - 2 * t)) ** 2
        m[(nx ** 2 + ny ** 2 <= 1.0) & (inner > 1.0)] = 1
    elif kind == "cross":
        cy, cx = (h - t) // 2, (w - t) // 2
        m[cy:cy + t, :] = 1
        m[:, cx:cx + t] = 1
    elif kind == "corner":
        m[:t, :] = 1
        m[:, :t] = 1
    else:
        raise SpecError(f"unknown motif {kind!r}")
    return _fill_crop(m)


def _render(spec, strokes, thickness, rng, with_motif):
    j = spec.jitter
    canvas = np.zeros((CANVAS, CANVAS), dtype=np.uint8)
    for (p, q, kind), t in zip(strokes, thickness):
        if j:
            p, q = _jitter_stroke(p, q, kind, rng, j)
            if spec.thickness_variation:
                t = int(np.clip(t + rng.integers(-1, 2), 2, 3))
        draw_line(canvas, p, q, t)
    zone = clear_zone(spec)
    canvas[max(0, zone.y0):zone.y1 + 1, max(0, zone.x0):zone.x1 + 1] = 0
    if not with_motif:
        return canvas, None
    dx, dy = (int(v) for v in rng.integers(-j, j + 1, size=2)) if j else (0, 0)
    r = spec.region
    motif = motif_pixels(spec.motif, r.width, r.height)
    canvas[r.y0 + dy:r.y1 + dy + 1, r.x0 + dx:r.x1 + dx + 1] |= motif
    ys, xs = np.nonzero(motif)
    truth = Rect(r.x0 + dx + int(xs.min()), r.y0 + dy + int(ys.min()),
                 r.x0 + dx + int(xs.max()), r.y0 + dy + int(ys.max()))
    return canvas, truth


def generate_pair(spec: PairSpec) -> PairSamples:
    """Deterministic positive/negative samples for one planted pair."""
    validate(spec)
    strokes, thickness = _scaffold_strokes(spec)
    out = PairSamples([], [], [])
    for i in range(spec.samples_per_class):
        img, truth = _render(spec, strokes, thickness, np.random.default_rng([spec.seed, 1, i]), True)
        out.positives.append(GlyphImage(img))
        out.truth.append(truth)
    for i in range(spec.samples_per_class):
        img, _ = _render(spec, strokes, thickness, np.random.default_rng([spec.seed, 2, i]), False)
        out.negatives.append(GlyphImage(img))
    return out


def motif_mask(spec: PairSpec) -> np.ndarray:
    """Full-canvas mask of the motif at zero offset."""
    r = spec.region
    m = np.zeros((CANVAS, CANVAS), dtype=np.uint8)
    m[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = motif_pixels(spec.motif, r.width, r.height)
    return m


# (width range, height range) of the planted region for each layout
LAYOUTS = {
    "side": ((14, 20), (30, 38)),   # left or right radical
    "top": ((30, 38), (14, 20)),    # top or bottom radical
    "block": ((18, 26), (18, 26)),  # central component
}


def random_pair_spec(seed: int, jitter: int = 4, samples_per_class: int = 75) -> PairSpec:
    """A valid spec whose layout, region and motif are drawn from ``seed``."""
    rng = np.random.default_rng([seed, 99])
    names = sorted(LAYOUTS)
    for _ in range(1000):
        (wlo, whi), (hlo, hhi) = LAYOUTS[names[int(rng.integers(len(names)))]]
        w = int(rng.integers(wlo, whi + 1))
        h = int(rng.integers(hlo, hhi + 1))
        x0 = int(rng.integers(jitter, CANVAS - jitter - w + 1))
        y0 = int(rng.integers(jitter, CANVAS - jitter - h + 1))
        spec = PairSpec(seed=seed, region=Rect(x0, y0, x0 + w - 1, y0 + h - 1),
                        motif=MOTIFS[int(rng.integers(len(MOTIFS)))], jitter=jitter,
                        samples_per_class=samples_per_class)
        try:
            validate(spec)
        except SpecError:
            continue
        return spec
    raise SpecError("could not draw a valid pair spec")
