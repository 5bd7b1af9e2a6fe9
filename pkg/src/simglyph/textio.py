"""Versioned plain-text formats for trained components.

Every file starts with ``simglyph-<kind> <version>``, followed by
``key=value`` header lines, a ``---`` separator and the data lines. Floats
are written with 9 significant digits.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .dsvm import SvmModel
from .errors import FormatError
from .features import Codebook
from .geometry import Rect, WindowGrid
from .pipeline import ConfidenceGate, NearestCentroid, SimilarPairTable
from .baselines.mil import AdaBoostEnsemble, MilWeakClassifier

VERSION = 1
SEPARATOR = "---"


def fmt(x) -> str:
    return f"{float(x):.9g}"


def fmt_row(values) -> str:
    return " ".join(fmt(v) for v in values)


def atomic_write_text(path, text: str):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_record(kind: str, header: dict, rows) -> str:
    lines = [f"simglyph-{kind} {VERSION}"]
    lines += [f"{k}={v}" for k, v in header.items()]
    lines.append(SEPARATOR)
    lines += list(rows)
    return "\n".join(lines) + "\n"


def loads_record(text: str, kind: str):
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != f"simglyph-{kind}":
        raise FormatError(f"expected a simglyph-{kind} file, found {lines[0]!r}")
    if magic[1] != str(VERSION):
        raise FormatError(f"unsupported {kind} version {magic[1]}")
    try:
        sep = lines.index(SEPARATOR)
    except ValueError:
        raise FormatError("missing header separator") from None
    header = {}
    for ln in lines[1:sep]:
        if "=" not in ln:
            raise FormatError(f"bad header line {ln!r}")
        k, v = ln.split("=", 1)
        header[k] = v
    return header, [ln for ln in lines[sep + 1:] if ln.strip()]


def _floats(row: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in row.split()])
    except ValueError:
        raise FormatError(f"bad numeric row {row!r}") from None


def canonical_centers(centers) -> np.ndarray:
    """Centers rounded to the precision they are stored with."""
    return np.array([_floats(fmt_row(c)) for c in np.asarray(centers)])


# --- codebook ---------------------------------------------------------------

def dumps_codebook(cb: Codebook) -> str:
    header = {"k": cb.k, "dims": cb.centers.shape[1], "min_cluster_size": cb.min_cluster_size,
              "seed": cb.seed, "centers": cb.size}
    return dumps_record("codebook", header, (fmt_row(c) for c in cb.centers))


def loads_codebook(text: str) -> Codebook:
    h, rows = loads_record(text, "codebook")
    centers = np.array([_floats(r) for r in rows])
    if centers.shape != (int(h["centers"]), int(h["dims"])):
        raise FormatError("codebook shape does not match its header")
    return Codebook(centers, int(h["min_cluster_size"]), int(h["k"]), int(h["seed"]))


# --- discriminative SVM -----------------------------------------------------

def dumps_model(m: SvmModel) -> str:
    header = {"codebook_hash": m.codebook_hash, "grid": m.grid.spec_string(),
              "C": fmt(m.C), "tau": fmt(m.tau), "dims": len(m.w)}
    return dumps_record("model", header, [fmt(m.b)] + [fmt(v) for v in m.w])


def loads_model(text: str) -> SvmModel:
    h, rows = loads_record(text, "model")
    vals = [float(r) for r in rows]
    if len(vals) != int(h["dims"]) + 1:
        raise FormatError("model weight count does not match its header")
    return SvmModel(np.array(vals[1:]), vals[0], WindowGrid.from_spec_string(h["grid"]),
                    h["codebook_hash"], float(h["C"]), float(h["tau"]))


# --- pipeline components ----------------------------------------------------

def dumps_gate(g: ConfidenceGate) -> str:
    return dumps_record("gate", {"sigma": fmt(g.sigma)}, [fmt_row(g.theta)])


def loads_gate(text: str) -> ConfidenceGate:
    h, rows = loads_record(text, "gate")
    return ConfidenceGate(_floats(rows[0]), float(h["sigma"]))


def dumps_baseline(b: NearestCentroid) -> str:
    header = {"classes": len(b.classes), "dims": b.centroids.shape[1], "shrinkage": fmt(b.shrinkage)}
    rows = (f"{int(c)} {fmt_row(v)}" for c, v in zip(b.classes, b.centroids))
    return dumps_record("baseline", header, rows)


def loads_baseline(text: str) -> NearestCentroid:
    h, rows = loads_record(text, "baseline")
    classes, cents = [], []
    for r in rows:
        head, _, rest = r.partition(" ")
        classes.append(int(head))
        cents.append(_floats(rest))
    return NearestCentroid(np.array(classes, dtype=np.int64), np.array(cents), float(h["shrinkage"]))


def dumps_table(table: SimilarPairTable) -> str:
    """Pairs only; models are stored next to the table and found by name."""
    return dumps_record("table", {"pairs": len(table)}, (f"{a} {b}" for a, b in table.pairs()))


def loads_table(text: str) -> SimilarPairTable:
    _, rows = loads_record(text, "table")
    try:
        return SimilarPairTable(tuple(int(v) for v in r.split()) for r in rows)
    except ValueError:
        raise FormatError("bad pair row") from None


# --- MIL ensemble -----------------------------------------------------------

def dumps_ensemble(ens: AdaBoostEnsemble) -> str:
    rows = []
    for w, a in zip(ens.weak, ens.alphas):
        geo = f"{w.window_index} {' '.join(str(v) for v in w.window)} {w.polarity}"
        rows.append(f"{geo} {fmt(w.threshold)} {fmt(a)} {fmt_row(w.pattern)}")
    return dumps_record("ensemble", {"rounds": ens.n_rounds, "stop_reason": ens.stop_reason}, rows)


def loads_ensemble(text: str) -> AdaBoostEnsemble:
    h, rows = loads_record(text, "ensemble")
    ens = AdaBoostEnsemble(stop_reason=h.get("stop_reason", ""))
    for r in rows:
        parts = r.split()
        idx, x0, y0, x1, y1, pol = (int(v) for v in parts[:6])
        ens.weak.append(MilWeakClassifier(np.array([float(v) for v in parts[8:]]), Rect(x0, y0, x1, y1),
                                          idx, pol, float(parts[6])))
        ens.alphas.append(float(parts[7]))
    if ens.n_rounds != int(h["rounds"]):
        raise FormatError("ensemble round count does not match its header")
    return ens


def save(path, text: str):
    atomic_write_text(path, text)


def load(path, loader):
    try:
        return loader(Path(path).read_text())
    except (KeyError, IndexError) as exc:
        raise FormatError(f"{path}: malformed file ({exc})") from None
