"""Independent reference computations for the discriminative SVM tests."""
import numpy as np


def literal_objective(w, b, pos, neg, C):
    """Unconstrained training objective written with plain loops."""
    total = 0.5 * sum(v * v for v in w)
    for windows in pos:
        inner = min(-(sum(wi * xi for wi, xi in zip(w, x)) + b) for x in windows)
        total += C * max(-1.0, inner)
    for windows in neg:
        inner = max(sum(wi * yi for wi, yi in zip(w, y)) + b for y in windows)
        total += C * max(-1.0, inner)
    return total


def literal_gamma(w, b, xhat, neg, C):
    total = 0.5 * sum(v * v for v in w)
    for x in xhat:
        total += C * max(-1.0, -(sum(wi * xi for wi, xi in zip(w, x)) + b))
    for windows in neg:
        total += C * max(-1.0, max(sum(wi * yi for wi, yi in zip(w, y)) + b for y in windows))
    return total


def gamma_on_grid(points, xhat, neg, C):
    """Gamma at many (w..., b) points at once; ``points`` is (P, K+1)."""
    w, b = points[:, :-1], points[:, -1]
    val = 0.5 * (w ** 2).sum(axis=1)
    for x in xhat:
        val += C * np.maximum(-1.0, -(w @ x + b))
    for windows in neg:
        val += C * np.maximum(-1.0, (w @ np.asarray(windows).T).max(axis=1) + b)
    return val


def grid_minimum(xhat, neg, C, lo=-5.0, hi=5.0, coarse=101, fine=41, rounds=3):
    """Dense grid search over [lo, hi]^(K+1), refined around the best node."""
    dims = len(xhat[0]) + 1
    centre = np.zeros(dims)
    half = (hi - lo) / 2
    n = coarse
    best_val, best_pt = np.inf, None
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, n) for c in centre]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
        for chunk in np.array_split(mesh, max(1, len(mesh) // 200_000)):
            vals = gamma_on_grid(chunk, xhat, neg, C)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_pt = float(vals[i]), chunk[i].copy()
        half = 4 * (2 * half / (n - 1))
        centre = best_pt
        n = fine
    return best_val, best_pt
