"""Exact cumulants of S_{L,tau} from Campbell's formula.

For a Poisson process with intensity nu, ``log E exp(zS) = int (e^{zH} - 1) dnu``,
so every cumulant is a moment integral: ``kappa_m = int H^m dnu``. The
integrals are taken by adaptive quadrature over ``[delta, beta L]``; the
piece ``(0, delta)`` is replaced by an analytic upper bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .mp_process import nu_values
from .quadrature import integrate_adaptive
from .statistic import WindowParams, h_values
from .testfn import TestFunctionSpec, goe_variance

DEFAULT_DELTA = 1e-3
DEFAULT_TOL = 1e-8
DEFAULT_ORDERS = 6
# sup of nu(x)/x over (0, 1/2] is nu(1/2)/(1/2) = 0.51050...
NU_SLOPE = 0.5106
TAIL_SAFETY = 2.0

HFunc = Callable[[WindowParams, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MomentIntegral:
    value: float
    error: float
    tail_bound: float


@dataclass(frozen=True)
class CumulantReport:
    """kappa_1..kappa_M of S_{L,tau} with per-order error budgets (index 0 is order 1)."""

    params: WindowParams
    max_order: int
    kappa: tuple[float, ...]
    quad_error: tuple[float, ...]
    tail_bound: tuple[float, ...]
    tol: float
    delta: float

    def __getitem__(self, m: int) -> float:
        """kappa_m, 1-based."""
        return self.kappa[m - 1]

    def total_error(self, m: int) -> float:
        return self.quad_error[m - 1] + self.tail_bound[m - 1]

    @property
    def meets_tolerance(self) -> bool:
        return all(q + t < self.tol for q, t in zip(self.quad_error, self.tail_bound))

    def rows(self):
        for m in range(1, self.max_order + 1):
            yield (self.params.L, self.params.tau, m, self[m],
                   self.quad_error[m - 1], self.tail_bound[m - 1])


def tail_constant(params: WindowParams, delta: float, h_func: HFunc = h_values) -> float:
    """Measured sup of ``L |H| / log(L/x)`` on ``[delta/10, 1/2)``, times the safety factor."""
    x = np.geomspace(delta / 10.0, 0.5, 200, endpoint=False)
    h = h_func(params, x)
    return TAIL_SAFETY * float(np.max(params.L * np.abs(h) / np.log(params.L / x)))


def tail_bound(params: WindowParams, m: int, delta: float, c_emp: float) -> float:
    """Bound on ``int_0^delta |H|^m dnu`` from ``|H| <= c_emp log(L/x)/L`` and ``nu <= NU_SLOPE x``.

    ``int_0^delta x log(L/x)^m dx = L^2 Gamma(m+1, 2 log(L/delta)) / 2^(m+1)``.
    """
    L = params.L
    t0 = math.log(L / delta)
    upper_gamma = special.gammaincc(m + 1, 2.0 * t0) * math.gamma(m + 1)
    integral = L * L * upper_gamma / 2.0 ** (m + 1)
    return (c_emp / L) ** m * NU_SLOPE * integral


def _breakpoints(params: WindowParams, delta: float, upper: float) -> np.ndarray:
    cut = params.cutoff
    pts = [np.geomspace(delta, min(1.0, upper), 40)]
    if upper > 1.0:
        pts.append(np.arange(1.0, upper, 0.5))
    # kinks of fhat(kx/L) sit at x = beta L / k
    k = np.arange(1, 65)
    kinks = cut / k
    pts.append(kinks[(kinks > delta) & (kinks < upper)])
    pts.append([upper])
    return np.unique(np.concatenate(pts))


def moment_integrals(
    params: WindowParams,
    orders: Sequence[int],
    delta: float = DEFAULT_DELTA,
    tol: float = DEFAULT_TOL,
    upper: float | None = None,
    h_func: HFunc = h_values,
    c_emp: float | None = None,
) -> list[MomentIntegral]:
    """``int_delta^upper H^m nu dx`` for several m sharing one adaptive mesh.

    Each order is accepted at ``max(tol, tol * |value|)``; the relative part
    only matters for kappa_1, which grows like ``e^{beta L / 2}``.
    """
    orders = [int(m) for m in orders]
    if min(orders) < 1:
        raise ValueError("moment orders start at 1")
    if not (0 < delta <= 1e-2):
        raise ValueError(f"delta must lie in (0, 1e-2], got {delta!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    upper = params.cutoff if upper is None else float(upper)
    powers = np.array(orders)[:, None]

    def integrand(x):
        h = h_func(params, x)
        return h[None, :] ** powers * nu_values(x)[None, :]

    res = integrate_adaptive(integrand, _breakpoints(params, delta, upper), tol, rtol=tol)
    if c_emp is None:
        c_emp = tail_constant(params, delta, h_func)
    return [
        MomentIntegral(float(v), float(e), tail_bound(params, m, delta, c_emp))
        for m, v, e in zip(orders, res.value, res.error)
    ]


def campbell_moment_integral(
    params: WindowParams,
    m: int,
    delta: float = DEFAULT_DELTA,
    tol: float = DEFAULT_TOL,
    **kwargs,
) -> MomentIntegral:
    """``int_delta^{beta L} H^m dnu`` with its error estimate and the (0, delta) tail bound."""
    return moment_integrals(params, [m], delta, tol, **kwargs)[0]


def cumulants(
    params: WindowParams,
    M: int = DEFAULT_ORDERS,
    tol: float = DEFAULT_TOL,
    delta: float = DEFAULT_DELTA,
    **kwargs,
) -> CumulantReport:
    if M < 2:
        raise ValueError("need at least two cumulant orders")
    ints = moment_integrals(params, range(1, M + 1), delta, tol, **kwargs)
    return CumulantReport(
        params=params,
        max_order=M,
        kappa=tuple(i.value for i in ints),
        quad_error=tuple(i.error for i in ints),
        tail_bound=tuple(i.tail_bound for i in ints),
        tol=tol,
        delta=delta,
    )


# --- convergence in L ----------------------------------------------------

@dataclass(frozen=True)
class VarianceRow:
    L: float
    kappa2: float
    deviation: float


def variance_convergence(
    spec: TestFunctionSpec,
    tau: float,
    L_ladder: Sequence[float],
    tol: float = DEFAULT_TOL,
    delta: float = DEFAULT_DELTA,
) -> list[VarianceRow]:
    """kappa_2(L) and its distance from the GOE variance along a ladder of L."""
    if not tau > 0:
        raise ValueError("tau > 0 required")
    target = goe_variance(spec)
    rows = []
    for L in L_ladder:
        k2 = campbell_moment_integral(WindowParams(L, tau, spec), 2, delta, tol).value
        rows.append(VarianceRow(float(L), k2, abs(k2 - target)))
    return rows


def richardson_limit(Ls: Sequence[float], values: Sequence[float]) -> float:
    """Extrapolate ``a + b/L`` through the last two ladder rungs."""
    if len(Ls) < 2:
        raise ValueError("need two rungs to extrapolate")
    (L1, v1), (L2, v2) = (Ls[-2], values[-2]), (Ls[-1], values[-1])
    return (L2 * v2 - L1 * v1) / (L2 - L1)


@dataclass(frozen=True)
class DecayFit:
    m: int
    slope: float
    intercept: float
    residual: float
    slope_log_corrected: float
    intercept_log_corrected: float
    residual_log_corrected: float
    L_used: tuple[float, ...]

    def as_json(self) -> dict:
        return {"m": self.m, "slope": self.slope,
                "slope_log_corrected": self.slope_log_corrected, "residual": self.residual}


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2)))


def fit_decay(m: int, Ls: Sequence[float], kappas: Sequence[float]) -> DecayFit:
    """Least squares of ``log|kappa|`` and ``log(|kappa| / log(L)^m)`` against ``log L``."""
    L = np.asarray(Ls, dtype=float)
    k = np.abs(np.asarray(kappas, dtype=float))
    if L.size < 2:
        raise ValueError("need at least two usable ladder points for a fit")
    x = np.log(L)
    s, c, r = _linfit(x, np.log(k))
    sl, cl, rl = _linfit(x, np.log(k) - m * np.log(np.log(L)))
    return DecayFit(m, s, c, r, sl, cl, rl, tuple(L))


def decay_fit(
    spec: TestFunctionSpec,
    tau: float,
    L_ladder: Sequence[float],
    m: int,
    tol: float = DEFAULT_TOL,
    delta: float = DEFAULT_DELTA,
    reports: Sequence[CumulantReport] | None = None,
) -> DecayFit:
    """Fit the decay of kappa_m in L; rungs where kappa_m is not resolved are dropped."""
    if m < 3:
        raise ValueError("decay fits are for m >= 3")
    if reports is None:
        reports = [cumulants(WindowParams(L, tau, spec), m, tol, delta) for L in L_ladder]
    Ls, ks = [], []
    for rep in reports:
        k, floor = rep[m], rep.total_error(m)
        if abs(k) <= floor:
            warnings.warn(f"kappa_{m} at L={rep.params.L} is below its error floor {floor:.3g}; dropped")
            continue
        Ls.append(rep.params.L)
        ks.append(k)
    return fit_decay(m, Ls, ks)
