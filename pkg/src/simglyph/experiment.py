"""Train/evaluate one planted pair end to end; shared by the CLI and the
acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsvm
from .features import GcParams, build_codebook, describe, encode
from .geometry import WindowGrid, enumerate_windows
from .synthdata import PairSpec, generate_pair


@dataclass
class PairSplit:
    train_pos: list
    train_neg: list
    test_pos: list
    test_neg: list
    test_truth: list


def split_pair(spec: PairSpec, n_train: int) -> PairSplit:
    d = generate_pair(spec)
    return PairSplit(d.positives[:n_train], d.negatives[:n_train],
                     d.positives[n_train:], d.negatives[n_train:], d.truth[n_train:])


@dataclass
class EncodedSplit:
    codebook: object
    grid: WindowGrid
    train_pos: list
    train_neg: list
    test_pos: list
    test_neg: list


def encode_split(split: PairSplit, grid: WindowGrid = WindowGrid(), k: int = 64, seed: int = 0,
                 params: GcParams = GcParams()) -> EncodedSplit:
    """Codebook from the training descriptors, then window features for all."""
    groups = [split.train_pos, split.train_neg, split.test_pos, split.test_neg]
    described = [[describe(g, params) for g in grp] for grp in groups]
    train_desc = np.concatenate([d for grp in described[:2] for _, d in grp])
    cb = build_codebook(train_desc, k=k, seed=seed)
    enc = [[encode(g, cb, grid, params, described=dd).windows for g, dd in zip(grp, dgrp)]
           for grp, dgrp in zip(groups, described)]
    return EncodedSplit(cb, grid, *enc)


@dataclass
class PairResult:
    accuracy: float
    mean_iou: float
    model: dsvm.SvmModel
    trace: dsvm.ConvergenceTrace
    test_predictions: list  # Prediction per test positive then per test negative


def run_pair(split: PairSplit, enc: EncodedSplit, cfg: dsvm.TrainConfig) -> PairResult:
    model, trace = dsvm.train(enc.train_pos, enc.train_neg, cfg, enc.grid, enc.codebook)
    rects = enumerate_windows(enc.grid)
    pos = [dsvm.predict(model, s, rects) for s in enc.test_pos]
    neg = [dsvm.predict(model, s, rects) for s in enc.test_neg]
    correct = sum(p.label == 1 for p in pos) + sum(p.label == -1 for p in neg)
    acc = correct / (len(pos) + len(neg))
    ious = [p.window.iou(gt) for p, gt in zip(pos, split.test_truth) if p.label == 1]
    return PairResult(acc, float(np.mean(ious)) if ious else 0.0, model, trace, pos + neg)
