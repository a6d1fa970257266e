"""Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

All components share one set of intervals; an interval is bisected while any
component still misses its tolerance and the interval is among the largest
contributors to that component's error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BudgetExceededError

# QUADPACK qk15 abscissae (positive half, descending) and weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467768411429,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
W_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
W_G = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (1, 3, 5 and the centre)
W_G[[1, 3, 5]] = _WG[:3]
W_G[[13, 11, 9]] = _WG[:3]
W_G[7] = _WG[3]

NODE_BUDGET = 1_000_000


@dataclass
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    nodes_used: int
    intervals: int


def _rule(func, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = (mid[:, None] + half[:, None] * NODES).ravel()
    f = np.asarray(func(x))  # shape (ncomp, nx)
    f = f.reshape(f.shape[0], a.size, 15)
    k = half * (f @ W_K)
    g = half * (f @ W_G)
    resabs = np.abs(half) * (np.abs(f) @ W_K)
    mean = (k / np.where(half == 0, 1.0, half))[..., None]
    resasc = np.abs(half) * (np.abs(f - mean * 0.5) @ W_K)
    err = np.abs(k - g)
    # QUADPACK error scaling
    scale = np.where(resasc > 0, np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), 1.0)
    err = np.where(resasc > 0, resasc * scale, err)
    eps = np.finfo(float).eps
    err = np.maximum(err, 50.0 * eps * resabs)
    return k, err


def integrate_adaptive(
    func: Callable[[np.ndarray], np.ndarray],
    breakpoints,
    atol,
    rtol: float = 0.0,
    node_budget: int = NODE_BUDGET,
) -> QuadResult:
    """Integrate each row of ``func(x)`` (shape ``(ncomp, len(x))``) over
    ``[breakpoints[0], breakpoints[-1]]``.

    Component ``i`` is accepted once its summed error estimate is at most
    ``max(atol[i], rtol * |value[i]|)``. Raises ``BudgetExceededError`` if
    that needs more than ``node_budget`` integrand evaluations.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    a, b = bp[:-1], bp[1:]
    val, err = _rule(func, a, b)
    atol = np.broadcast_to(np.asarray(atol, dtype=float), (val.shape[0],))
    used = 15 * a.size
    while True:
        total = val.sum(axis=1)
        total_err = err.sum(axis=1)
        target = np.maximum(atol, rtol * np.abs(total))
        failing = total_err > target
        if not np.any(failing):
            return QuadResult(total, total_err, used, a.size)
        split = np.zeros(a.size, dtype=bool)
        for i in np.flatnonzero(failing):
            # bisect the largest contributors until the rest fits in half the target
            order = np.argsort(err[i])[::-1]
            cum = total_err[i] - np.cumsum(err[i][order])
            n = int(np.searchsorted(-cum, -0.5 * target[i], side="left")) + 1
            split[order[: max(n, 1)]] = True
        if used + 30 * int(split.sum()) > node_budget:
            raise BudgetExceededError(
                f"quadrature needs more than {node_budget} nodes "
                f"(error {total_err.max():.3g}, target {target.min():.3g})"
            )
        m = 0.5 * (a[split] + b[split])
        na = np.concatenate([a[split], m])
        nb = np.concatenate([m, b[split]])
        v2, e2 = _rule(func, na, nb)
        used += 15 * na.size
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[:, keep], v2], axis=1)
        err = np.concatenate([err[:, keep], e2], axis=1)
