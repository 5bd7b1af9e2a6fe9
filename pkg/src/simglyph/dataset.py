"""On-disk datasets: PGM glyphs listed in a CSV manifest.

``manifest.csv`` columns: class_id, file (relative to the dataset root),
split (train/test), gt_x0, gt_y0, gt_x1, gt_y1 (empty for negatives).
``pairs.csv`` lists each planted pair: pos_class, neg_class and the spec.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError
from .geometry import Rect
from .imagecore import GlyphImage, glyph_to_gray, load_glyph, normalize, pgm_bytes
from .synthdata import PairSpec, generate_pair
from .textio import atomic_write_bytes, atomic_write_text

MANIFEST_FIELDS = ["class_id", "file", "split", "gt_x0", "gt_y0", "gt_x1", "gt_y1"]
PAIR_FIELDS = ["pos_class", "neg_class", "seed", "x0", "y0", "x1", "y1", "motif", "jitter"]


@dataclass(frozen=True)
class Entry:
    class_id: int
    file: str
    split: str
    truth: Rect | None


@dataclass
class Dataset:
    root: Path
    entries: list
    pairs: list  # (pos_class, neg_class, PairSpec)

    def select(self, split=None, classes=None) -> list:
        return [e for e in self.entries
                if (split in (None, "all") or e.split == split)
                and (classes is None or e.class_id in classes)]

    def image(self, entry: Entry) -> GlyphImage:
        return normalize(load_glyph(self.root / entry.file))

    def pair_spec(self, pos: int, neg: int) -> PairSpec | None:
        for a, b, spec in self.pairs:
            if (a, b) == (pos, neg):
                return spec
        return None


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_pairs(root, specs, train_per_class: int) -> Dataset:
    """Render every spec as two classes (ids 2i and 2i+1, positive first)."""
    root = Path(root)
    entries, pairs = [], []
    for i, spec in enumerate(specs):
        pos_id, neg_id = 2 * i, 2 * i + 1
        samples = generate_pair(spec)
        pairs.append((pos_id, neg_id, spec))
        for cls, imgs, truths in ((pos_id, samples.positives, samples.truth),
                                  (neg_id, samples.negatives, [None] * len(samples.negatives))):
            for j, (img, gt) in enumerate(zip(imgs, truths)):
                split = "train" if j < train_per_class else "test"
                rel = f"images/c{cls:03d}_{split}_{j:03d}.pgm"
                atomic_write_bytes(root / rel, pgm_bytes(glyph_to_gray(img)))
                entries.append(Entry(cls, rel, split, gt))
    ds = Dataset(root, entries, pairs)
    save_index(ds)
    return ds


def save_index(ds: Dataset):
    rows = [[e.class_id, e.file, e.split, *(e.truth if e.truth else [""] * 4)] for e in ds.entries]
    atomic_write_text(ds.root / "manifest.csv", csv_text(MANIFEST_FIELDS, rows))
    prow = [[a, b, s.seed, *s.region, s.motif, s.jitter] for a, b, s in ds.pairs]
    atomic_write_text(ds.root / "pairs.csv", csv_text(PAIR_FIELDS, prow))


def load_dataset(root) -> Dataset:
    root = Path(root)
    try:
        with open(root / "manifest.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = []
        for r in rows:
            truth = Rect(*(int(r[k]) for k in MANIFEST_FIELDS[3:])) if r["gt_x0"] else None
            entries.append(Entry(int(r["class_id"]), r["file"], r["split"], truth))
        pairs = []
        pairs_path = root / "pairs.csv"
        if pairs_path.exists():
            with open(pairs_path, newline="") as fh:
                for r in csv.DictReader(fh):
                    spec = PairSpec(int(r["seed"]), Rect(*(int(r[k]) for k in ("x0", "y0", "x1", "y1"))),
                                    r["motif"], int(r["jitter"]))
                    pairs.append((int(r["pos_class"]), int(r["neg_class"]), spec))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{root}: malformed dataset index ({exc})") from None
    return Dataset(root, entries, pairs)
