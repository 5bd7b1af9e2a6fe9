"""Command-line interface: ``simglyph <command> [options]``.

Every command writes into ``--out`` and records its fully resolved options
in ``<command>.config.txt`` next to its outputs.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dsvm, textio
from .baselines import mil
from .dataset import Dataset, csv_text, load_dataset, write_pairs
from .errors import ConfigError, SimGlyphError
from .features import GcParams, build_codebook, describe, encode
from .geometry import Rect, WindowGrid, enumerate_windows
from .imagecore import glyph_to_gray, pgm_bytes
from .pipeline import (ConfidenceGate, PairModel, SimilarPairTable, baseline_train, mine_pairs,
                       pair_predict, recognize, train_gate)
from .synthdata import PairSpec, random_pair_spec

SIGMA_GRID = (0.7, 0.8, 0.9, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 1.0)
BORDER_VALUE = 128


# --- helpers ----------------------------------------------------------------

def read_kv(path) -> dict:
    """Flat ``key=value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse_pair(text: str):
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("pair must look like A,B") from None
    return SimilarPairTable.key(a, b)


def stem(pair) -> str:
    return f"pair_{pair[0]}_{pair[1]}"


def record_config(args, out: Path):
    skip = {"func", "config"}
    lines = [f"{k}={_show(v)}" for k, v in sorted(vars(args).items()) if k not in skip]
    textio.atomic_write_text(out / f"{args.command}.config.txt", "\n".join(lines) + "\n")


def _show(v):
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def pairs_to_run(args, ds: Dataset) -> list:
    if args.pair:
        return [args.pair]
    if not ds.pairs:
        raise ConfigError("dataset lists no pairs; pass --pair A,B")
    return [(a, b) for a, b, _ in ds.pairs]


def grid_from(args) -> WindowGrid:
    return WindowGrid.from_spec_string(args.grid) if args.grid else WindowGrid()


def pair_training_data(ds: Dataset, pair, k: int, seed: int, grid: WindowGrid):
    """Codebook from the pair's training descriptors and window features of
    the training samples (positives first)."""
    pos_id, neg_id = pair
    groups = [ds.select("train", {pos_id}), ds.select("train", {neg_id})]
    if not groups[0] or not groups[1]:
        raise ConfigError(f"pair {pair} needs training samples of both classes")
    described = [[describe(ds.image(e)) for e in grp] for grp in groups]
    cb = build_codebook(np.concatenate([d for grp in described for _, d in grp]), k=k, seed=seed)
    # encode with the codebook exactly as it will be stored
    cb = textio.loads_codebook(textio.dumps_codebook(cb))
    feats = [[encode(None, cb, grid, described=dd).windows for dd in grp] for grp in described]
    return cb, feats[0], feats[1]


def _encode_entries(ds, entries, cb, grid):
    return [encode(ds.image(e), cb, grid).windows for e in entries]


def load_pair_model(models: Path, pair) -> PairModel:
    base = models / stem(pair)
    model = textio.load(base.with_suffix(".model"), textio.loads_model)
    cb = textio.load(base.with_suffix(".codebook"), textio.loads_codebook)
    if dsvm.codebook_hash(cb.centers) != model.codebook_hash:
        raise ConfigError(f"{base}: model and codebook do not belong together")
    return PairModel(model, cb, GcParams())


# --- commands ---------------------------------------------------------------

def cmd_gen(args, out: Path):
    fields = read_kv(args.spec) if args.spec else {}
    jitter = int(fields.get("jitter", args.jitter))
    per_class = int(fields.get("samples_per_class", args.samples_per_class))
    train = int(fields.get("train_per_class", args.train_per_class))
    if not 0 < train < per_class:
        raise ConfigError("train_per_class must lie strictly between 0 and samples_per_class")
    if "region" in fields:
        region = Rect(*(int(v) for v in fields["region"].split(",")))
        specs = [PairSpec(int(fields.get("seed", args.seed)), region, fields.get("motif", "bars"),
                          jitter, per_class)]
    else:
        n = int(fields.get("pairs", args.pairs))
        first = int(fields.get("seed", args.seed))
        specs = [random_pair_spec(first + i, jitter, per_class) for i in range(n)]
    ds = write_pairs(out, specs, train)
    print(f"wrote {len(ds.entries)} glyphs in {len(ds.pairs)} pairs to {out}")


def cmd_train_pair(args, out: Path):
    ds = load_dataset(args.data)
    grid = grid_from(args)
    cfg = dsvm.TrainConfig(C=args.C, tau=args.tau, max_outer_iters=args.max_outer,
                           inner_tol=args.inner_tol, inner_patience=args.inner_patience,
                           max_inner_iters=args.max_inner)
    for pair in pairs_to_run(args, ds):
        cb, pos, neg = pair_training_data(ds, pair, args.k, args.seed, grid)
        model, trace = dsvm.train(pos, neg, cfg, grid, cb)
        base = out / stem(pair)
        textio.save(base.with_suffix(".codebook"), textio.dumps_codebook(cb))
        textio.save(base.with_suffix(".model"), textio.dumps_model(model))
        rows = []
        for i in range(trace.n_outer):
            last = i == trace.n_outer - 1
            rows.append([i + 1, textio.fmt(trace.obj[i]), textio.fmt(trace.tv[i]), trace.cache_size[i],
                         len(trace.inner[i]) - 1, trace.stop_reason if last else ""])
        textio.atomic_write_text(base.with_suffix(".trace.csv"),
                                 csv_text(["k", "obj", "tv", "cache_size", "inner_iters", "stop"], rows))
        print(f"{stem(pair)}: {trace.n_outer} outer iterations, stop: {trace.stop_reason}")


def cmd_train_gate(args, out: Path):
    ds = load_dataset(args.data)
    train = ds.select("train")
    baseline = baseline_train([ds.image(e) for e in train], [e.class_id for e in train], args.shrinkage)
    samples, confusions = [], []
    for e in ds.select(args.split):
        o = baseline.score(ds.image(e))
        samples.append((o.s1, o.s2, 1.0 if o.c1 == e.class_id else 0.0))
        confusions.append((e.class_id, o.c1))
    theta = train_gate(samples, args.rate, args.iters)
    textio.save(out / "baseline.txt", textio.dumps_baseline(baseline))
    textio.save(out / "gate.txt", textio.dumps_gate(ConfidenceGate(theta, args.sigma)))
    textio.atomic_write_text(out / "confusions.csv", csv_text(["true_id", "predicted_id"], confusions))
    acc = float(np.mean([s[2] for s in samples]))
    print(f"baseline accuracy on {args.split}: {acc:.4f}; gate theta = {textio.fmt_row(theta)}")


def cmd_mine_pairs(args, out: Path):
    import csv
    with open(args.confusions, newline="") as fh:
        rows = [(int(r["true_id"]), int(r["predicted_id"])) for r in csv.DictReader(fh)]
    table = SimilarPairTable(mine_pairs(rows, args.T))
    textio.save(out / "pairs.table", textio.dumps_table(table))
    print(f"{len(table)} similar pairs with more than {args.T} confusions")


def _table_for_eval(args, ds: Dataset, models: Path) -> SimilarPairTable:
    path = Path(args.table) if args.table else models / "pairs.table"
    if path.exists():
        table = textio.load(path, textio.loads_table)
    else:
        table = SimilarPairTable((a, b) for a, b, _ in ds.pairs)
    for pair in table.pairs():
        table.set_model(*pair, load_pair_model(models, pair))
    return table


def cmd_eval(args, out: Path):
    ds = load_dataset(args.data)
    models = Path(args.models)
    table = _table_for_eval(args, ds, models)
    test = ds.select("test")
    images = [ds.image(e) for e in test]

    # per-pair accuracy of the discriminative SVM and localization quality
    pair_rows, loc_rows = [], []
    cache = {}
    for pair in table.pairs():
        pm = table.model(*pair)
        members = [i for i, e in enumerate(test) if e.class_id in pair]
        correct, ious = 0, []
        for i in members:
            pred = pair_predict(pm, images[i])
            cache[(i, pair)] = pred
            e = test[i]
            truth_label = 1 if e.class_id == pair[0] else -1
            correct += pred.label == truth_label
            iou = ""
            if truth_label == 1 and pred.label == 1 and e.truth is not None:
                iou = pred.window.iou(e.truth)
                ious.append(iou)
                iou = textio.fmt(iou)
            loc_rows.append([e.file, e.class_id, pred.label, textio.fmt(pred.score), *pred.window,
                             *(e.truth if e.truth else [""] * 4), iou])
        acc = correct / len(members) if members else 0.0
        pair_rows.append([pair[0], pair[1], len(members), textio.fmt(acc),
                          textio.fmt(np.mean(ious)) if ious else ""])

    index = {id(img): i for i, img in enumerate(images)}

    def cached(pm, img):
        i = index[id(img)]
        for pair in table.pairs():
            if table.model(*pair) is pm and (i, pair) in cache:
                return cache[(i, pair)]
        return pair_predict(pm, img)

    baseline = textio.load(models / "baseline.txt", textio.loads_baseline)
    gate = textio.load(models / "gate.txt", textio.loads_gate)
    acc_row, routed_row = ["accuracy"], ["svm_routed"]
    for sigma in SIGMA_GRID:
        g = ConfidenceGate(gate.theta, sigma)
        recs = [recognize(img, baseline, g, table, cached) for img in images]
        acc_row.append(textio.fmt(np.mean([r.label == e.class_id for r, e in zip(recs, test)])))
        routed_row.append(sum(r.route == "svm" for r in recs))
    header = ["sigma"] + [f"{s:.2f}" for s in SIGMA_GRID]
    textio.atomic_write_text(out / "sigma_sweep.csv", csv_text(header, [acc_row, routed_row]))
    textio.atomic_write_text(out / "pair_eval.csv",
                             csv_text(["pos_class", "neg_class", "n_test", "accuracy", "mean_iou"], pair_rows))
    textio.atomic_write_text(out / "localization.csv", csv_text(
        ["file", "class_id", "label", "score", "x0", "y0", "x1", "y1",
         "gt_x0", "gt_y0", "gt_x1", "gt_y1", "iou"], loc_rows))
    print(f"evaluated {len(test)} test glyphs over {len(table)} pairs")


def overlay(img, rect: Rect) -> np.ndarray:
    """Grey copy of the glyph with the rectangle's border set to 128."""
    g = glyph_to_gray(img).copy()
    x0, y0, x1, y1 = rect
    g[y0, x0:x1 + 1] = BORDER_VALUE
    g[y1, x0:x1 + 1] = BORDER_VALUE
    g[y0:y1 + 1, x0] = BORDER_VALUE
    g[y0:y1 + 1, x1] = BORDER_VALUE
    return g


def cmd_localize(args, out: Path):
    ds = load_dataset(args.data)
    models = Path(args.models)
    rows = []
    for pair in pairs_to_run(args, ds):
        pm = load_pair_model(models, pair)
        entries = ds.select(args.split, set(pair))
        negatives = [e for e in entries if e.class_id != pair[0]]
        if negatives:
            print(f"{stem(pair)}: skipping {len(negatives)} negative samples "
                  "(all of their windows are negative by construction)", file=sys.stderr)
        for e in entries:
            if e.class_id != pair[0]:
                continue
            img = ds.image(e)
            pred = pair_predict(pm, img)
            name = f"overlays/{stem(pair)}_{Path(e.file).stem}.pgm"
            textio.atomic_write_bytes(out / name, pgm_bytes(overlay(img, pred.window)))
            rows.append([name, e.file, *pred.window, textio.fmt(pred.score), pred.label])
    textio.atomic_write_text(out / "localize.csv", csv_text(
        ["overlay", "source", "x0", "y0", "x1", "y1", "score", "label"], rows))
    print(f"wrote {len(rows)} overlays")


def cmd_mil_train(args, out: Path):
    ds = load_dataset(args.data)
    grid = grid_from(args)
    cfg = mil.MilConfig(rounds=args.rounds, alpha=args.alpha, epochs=args.epochs,
                        pattern_budget=args.budget, seed=args.seed)
    for pair in pairs_to_run(args, ds):
        cb, pos, neg = pair_training_data(ds, pair, args.k, args.seed, grid)
        ens = mil.adaboost_train(pos, neg, enumerate_windows(grid), cfg)
        base = out / stem(pair)
        textio.save(base.with_suffix(".mil.codebook"), textio.dumps_codebook(cb))
        textio.save(base.with_suffix(".mil"), textio.dumps_ensemble(ens))
        print(f"{stem(pair)}: {ens.n_rounds} rounds ({ens.stop_reason})")


def cmd_mil_eval(args, out: Path):
    ds = load_dataset(args.data)
    models = Path(args.models)
    grid = grid_from(args)
    rows = []
    for pair in pairs_to_run(args, ds):
        base = models / stem(pair)
        ens = textio.load(base.with_suffix(".mil"), textio.loads_ensemble)
        cb = textio.load(base.with_suffix(".mil.codebook"), textio.loads_codebook)
        entries = ds.select("test", set(pair))
        feats = _encode_entries(ds, entries, cb, grid)
        truth = [1 if e.class_id == pair[0] else -1 for e in entries]
        correct = sum(mil.adaboost_classify(ens, x) == t for x, t in zip(feats, truth))
        rows.append([pair[0], pair[1], len(entries), textio.fmt(correct / len(entries) if entries else 0.0)])
    textio.atomic_write_text(out / "mil_eval.csv", csv_text(["pos_class", "neg_class", "n_test", "accuracy"], rows))
    print(f"evaluated MIL on {len(rows)} pairs")


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--config", help="flat key=value file supplying option defaults")
    common.add_argument("--out", default="out", help="output directory (default ./out)")

    p = argparse.ArgumentParser(prog="simglyph", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(func=func)
        return sp

    def training_flags(sp):
        sp.add_argument("--data", required=True, help="dataset directory written by gen")
        sp.add_argument("--pair", type=parse_pair, help="class pair A,B (default: every pair in the dataset)")
        sp.add_argument("--k", type=int, default=64, help="codebook size")
        sp.add_argument("--grid", help="window grid override, e.g. size=64,stride=4,scales=32x32;16x16")

    sp = add("gen", cmd_gen, "generate planted similar-glyph pairs as PGM files")
    sp.add_argument("--spec", help="key=value spec file (pairs, seed, region, motif, jitter, ...)")
    sp.add_argument("--pairs", type=int, default=1, help="number of random pairs")
    sp.add_argument("--jitter", type=int, default=4)
    sp.add_argument("--samples-per-class", type=int, default=75)
    sp.add_argument("--train-per-class", type=int, default=50)

    sp = add("train-pair", cmd_train_pair, "train the discriminative SVM of one or more pairs")
    training_flags(sp)
    d = dsvm.TrainConfig()
    sp.add_argument("--C", type=float, default=d.C, help="trade-off coefficient")
    sp.add_argument("--tau", type=float, default=d.tau, help="total-violation stopping threshold")
    sp.add_argument("--max-outer", type=int, default=d.max_outer_iters)
    sp.add_argument("--max-inner", type=int, default=d.max_inner_iters)
    sp.add_argument("--inner-patience", type=int, default=d.inner_patience)
    sp.add_argument("--inner-tol", type=float, default=d.inner_tol)

    sp = add("train-gate", cmd_train_gate, "train the baseline classifier and its logistic confidence gate")
    sp.add_argument("--data", required=True)
    sp.add_argument("--sigma", type=float, default=0.96, help="acceptance threshold stored with the gate")
    sp.add_argument("--rate", type=float, default=0.1)
    sp.add_argument("--iters", type=int, default=500)
    sp.add_argument("--shrinkage", type=float, default=1.0)
    sp.add_argument("--split", choices=("train", "test", "all"), default="all",
                    help="samples scored to fit the gate and log confusions")

    sp = add("mine-pairs", cmd_mine_pairs, "mine similar pairs from a confusion log")
    sp.add_argument("--confusions", required=True, help="CSV with true_id,predicted_id")
    sp.add_argument("--T", type=int, default=2, help="keep pairs confused more than T times")

    sp = add("eval", cmd_eval, "sigma sweep, per-pair accuracy and localization IoU")
    sp.add_argument("--data", required=True)
    sp.add_argument("--models", required=True, help="directory with baseline, gate and pair models")
    sp.add_argument("--table", help="similar-pair table (default: models/pairs.table or every dataset pair)")

    sp = add("localize", cmd_localize, "draw the predicted discriminative window on positive samples")
    sp.add_argument("--data", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--pair", type=parse_pair)
    sp.add_argument("--split", choices=("train", "test", "all"), default="test")

    sp = add("mil-train", cmd_mil_train, "train the multiple-instance boosting baseline")
    training_flags(sp)
    m = mil.MilConfig()
    sp.add_argument("--rounds", type=int, default=m.rounds)
    sp.add_argument("--alpha", type=float, default=m.alpha, help="perceptron learning rate")
    sp.add_argument("--epochs", type=int, default=m.epochs)
    sp.add_argument("--budget", type=int, default=m.pattern_budget, help="instance patterns searched per round")

    sp = add("mil-eval", cmd_mil_eval, "test accuracy of trained MIL ensembles")
    sp.add_argument("--data", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--pair", type=parse_pair)
    sp.add_argument("--grid")
    return p


def _apply_config(parser, argv):
    """Re-parse with defaults taken from the ``--config`` file, if any."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_kv(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key in ("config", "command"):
            continue
        if key not in actions:
            raise ConfigError(f"{args.config}: unknown option {key!r} for {args.command}")
        conv = actions[key].type or str
        defaults[key] = conv(raw)
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, out)
        record_config(args, out)
    except (SimGlyphError, OSError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
