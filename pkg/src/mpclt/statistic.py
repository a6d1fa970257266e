"""The geodesic-length functional H_{L,tau} and the linear statistic S.

    F(x) = fhat(x/L) cos(x tau) / sinh(x/2)
    H(x) = (2x/L) * sum_{k=1}^{K(x)} F(kx),   K(x) = floor(beta L / x)

H vanishes identically for ``x >= beta L``, which is what allows the
point process to be simulated on the finite window ``(0, beta L]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._numerics import NeumaierAccumulator, fsum, sinh_safe
from .errors import BudgetExceededError, DomainError
from .mp_process import Realization
from .testfn import Family, TestFunctionSpec, fhat_values

TERM_BUDGET = 10 ** 8
# points needing more terms than this finish their k-sum one at a time
K_SWITCH = 1024
_BLOCK = 1 << 20


@dataclass(frozen=True)
class WindowParams:
    """Parameters of H: window scale ``L > 2``, center ``tau >= 0``, test function."""

    L: float
    tau: float
    fhat: TestFunctionSpec = TestFunctionSpec()

    def __post_init__(self):
        L, tau = float(self.L), float(self.tau)
        if not (math.isfinite(L) and L > 2):
            raise DomainError(f"L > 2 required, got {self.L!r}")
        if not (math.isfinite(tau) and tau >= 0):
            raise DomainError(f"tau >= 0 required, got {self.tau!r}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "tau", tau)

    @property
    def cutoff(self) -> float:
        """Support end ``beta * L``; H is zero beyond it."""
        return self.fhat.beta * self.L

    def with_tau(self, tau: float) -> "WindowParams":
        return replace(self, tau=tau)


def _fhat_fast(spec: TestFunctionSpec, x):
    # fhat for finite nonnegative x; skips the argument checks
    u = x / spec.beta
    if spec.family is Family.TRIANGULAR:
        return np.maximum(1.0 - u, 0.0)
    out = np.zeros_like(u)
    inside = u < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / ((1.0 - ui) * (1.0 + ui)))
    return out


def _f_terms(params: WindowParams, y):
    return _fhat_fast(params.fhat, y / params.L) * np.cos(y * params.tau) / sinh_safe(0.5 * y)


def _check_positive(x):
    if np.any(~(x > 0)) or np.any(~np.isfinite(x)):
        raise DomainError("H and F are defined for finite x > 0 only")


def f_values(params: WindowParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_positive(x)
    return _f_terms(params, x)


def eval_F(params: WindowParams, x: float) -> float:
    """``fhat(x/L) cos(x tau) / sinh(x/2)``; exactly 0 for ``x >= beta L``."""
    return float(f_values(params, np.array([x], dtype=float))[0])


def term_count(params: WindowParams, x: float) -> int:
    """Number of k-terms in H(x): ``floor(beta L / x)``."""
    return int(math.floor(params.cutoff / x))


def h_values(params: WindowParams, x, term_budget: int = TERM_BUDGET) -> np.ndarray:
    """Vectorized H. Each element's result depends only on its own x.

    The k-sum runs over a sorted copy so that step k touches only the
    points with ``x < beta L / k``; sums are compensated.
    """
    x = np.asarray(x, dtype=float)
    _check_positive(x)
    out = np.zeros(x.shape)
    cut = params.cutoff
    active = np.flatnonzero(x < cut)
    if active.size == 0:
        return out
    xa = x.ravel()[active]
    kmax = np.floor(cut / xa)
    if kmax.max() > term_budget:
        worst = xa[np.argmax(kmax)]
        raise BudgetExceededError(
            f"H({worst:.3g}) needs {int(kmax.max())} terms, budget is {term_budget}"
        )
    order = np.argsort(xa, kind="stable")
    xs = xa[order]
    ks = kmax[order]
    acc = NeumaierAccumulator(xs.size)
    for k in range(1, int(min(ks[0], K_SWITCH)) + 1):
        # ks is nonincreasing along xs, so the terms needed form a prefix
        n = _prefix_len(ks, k)
        acc.add(_f_terms(params, k * xs[:n]), slice(0, n))
    sums = acc.value
    for j in np.flatnonzero(ks > K_SWITCH):
        sums[j] = _tail_sum(params, xs[j], int(ks[j]), acc.s[j], acc.c[j])
    vals = np.empty_like(xs)
    vals[order] = 2.0 * xs / params.L * sums
    out.ravel()[active] = vals
    return out


def _prefix_len(ks, k):
    # ks sorted nonincreasing: count of entries >= k
    return int(np.searchsorted(-ks, -k, side="right"))


def _tail_sum(params, x, K, s, c):
    parts = [s, c]
    for start in range(K_SWITCH + 1, K + 1, _BLOCK):
        k = np.arange(start, min(start + _BLOCK, K + 1), dtype=float)
        parts.append(fsum(_f_terms(params, k * x)))
    return math.fsum(parts)


def eval_H(params: WindowParams, x: float, term_budget: int = TERM_BUDGET) -> float:
    """Scalar H(x) for ``x > 0``."""
    return float(h_values(params, np.array([x], dtype=float), term_budget)[0])


def eval_S(params: WindowParams, realization: Realization) -> float:
    """Linear statistic ``sum over points of H``, correctly rounded."""
    if realization.window_max < params.cutoff:
        raise DomainError(
            f"realization window {realization.window_max} is shorter than beta*L = {params.cutoff}"
        )
    if len(realization) == 0:
        return 0.0
    return fsum(h_values(params, realization.points))


def s_values(params: WindowParams, point_sets: Sequence[np.ndarray]) -> np.ndarray:
    """S for many realizations at once (points already known to lie in the window)."""
    sizes = np.array([p.size for p in point_sets], dtype=np.int64)
    if sizes.sum() == 0:
        return np.zeros(len(point_sets))
    h = h_values(params, np.concatenate(point_sets))
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return np.array([fsum(h[bounds[i]:bounds[i + 1]]) for i in range(len(point_sets))])


# --- bound profile -------------------------------------------------------

DEFAULT_TAU_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True)
class BoundRow:
    L: float
    tau: float
    regime: str  # "small" (0 < x < 1/2) or "large" (x >= 1/2)
    max_ratio: float


def default_x_grids(params: WindowParams, n: int = 1000, x_min: float = 1e-4):
    small = np.geomspace(x_min, 0.5, n + 1)[:-1]
    large = np.linspace(0.5, params.cutoff, n)
    return small, large


def bound_profile(
    params_ladder: Sequence[WindowParams],
    x_grid=None,
    tau_grid: Sequence[float] = DEFAULT_TAU_GRID,
) -> list[BoundRow]:
    """Normalized bound ratios for H, per L and tau.

    small regime: max of ``L |H| / log(L/x)`` over grid points in (0, 1/2);
    large regime: max of ``L |H| / (x exp(-x/2))`` over points ``>= 1/2``.
    """
    rows = []
    for p in params_ladder:
        if x_grid is None:
            small, large = default_x_grids(p)
        else:
            g = np.asarray(x_grid, dtype=float)
            small, large = g[(g > 0) & (g < 0.5)], g[g >= 0.5]
        for tau in tau_grid:
            q = p.with_tau(tau)
            r1 = r2 = 0.0
            if small.size:
                h = h_values(q, small)
                r1 = float(np.max(p.L * np.abs(h) / np.log(p.L / small)))
            if large.size:
                h = h_values(q, large)
                r2 = float(np.max(p.L * np.abs(h) / (large * np.exp(-0.5 * large))))
            rows.append(BoundRow(p.L, tau, "small", r1))
            rows.append(BoundRow(p.L, tau, "large", r2))
    return rows


def max_ratios(rows: Sequence[BoundRow]) -> dict[float, tuple[float, float]]:
    """Collapse bound rows to ``{L: (r1, r2)}`` maximized over tau."""
    out: dict[float, list[float]] = {}
    for r in rows:
        cur = out.setdefault(r.L, [0.0, 0.0])
        i = 0 if r.regime == "small" else 1
        cur[i] = max(cur[i], r.max_ratio)
    return {L: (v[0], v[1]) for L, v in out.items()}
