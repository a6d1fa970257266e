"""The Mirzakhani-Petri Poisson process on the positive reals.

Intensity ``nu(x) = 2 sinh(x/2)**2 / x``; cumulative mass
``Lambda(x) = int_0^x nu``. Realizations on a window ``(0, x_max]`` are drawn
by placing a Poisson number of points through a tabulated inverse of
``Lambda``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._numerics import cosh_minus_one
from .errors import BudgetExceededError, DomainError

# below this node Lambda is taken from its Taylor series
CROSSOVER = 1e-4
NODE_BUDGET = 1_000_000

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def nu_values(x) -> np.ndarray:
    """Vectorized intensity density; requires ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("nu_mp requires x > 0")
    return cosh_minus_one(x) / x


def nu_mp(x: float) -> float:
    """Intensity density ``2 sinh(x/2)**2 / x = (cosh(x) - 1) / x`` at ``x > 0``."""
    return float(nu_values(np.array([x], dtype=float))[0])


def _nu_with_zero(x):
    # nu extends continuously by 0 at the origin
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = cosh_minus_one(x[pos]) / x[pos]
    return out


def segment_mass(a, b) -> np.ndarray:
    """int_a^b nu by 20-point Gauss-Legendre on each segment (vectorized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_X
    return half * (_nu_with_zero(nodes) @ _GL_W)


def _series_lambda(x):
    x2 = np.asarray(x, dtype=float) ** 2
    return x2 / 4.0 + x2 * x2 / 96.0


def _series_inverse(u):
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.maximum(4.0 * u - 2.0 * u * u / 3.0, 0.0))


@dataclass(frozen=True)
class IntensityTable:
    """Tabulated cumulative intensity on ``[0, x_max]``.

    ``grid[0] == 0`` and ``grid[1]`` is the series crossover; between nodes
    both ``Lambda`` and its inverse are cubic Hermite interpolants built from
    the exact derivative ``nu``.
    """

    x_max: float
    grid: np.ndarray
    lambda_values: np.ndarray
    total_mass: float
    tol: float
    _forward: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)
    _inverse: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.grid.setflags(write=False)
        self.lambda_values.setflags(write=False)
        if len(self.grid) > 2:
            g = self.grid[1:]
            lam = self.lambda_values[1:]
            slopes = nu_values(g)
            object.__setattr__(self, "_forward", CubicHermiteSpline(g, lam, slopes))
            object.__setattr__(self, "_inverse", CubicHermiteSpline(lam, g, 1.0 / slopes))

    @property
    def crossover(self) -> float:
        return float(self.grid[1])

    def cumulative(self, x) -> np.ndarray:
        """Lambda(x) for ``0 <= x <= x_max``."""
        x0 = np.asarray(x, dtype=float)
        x = np.atleast_1d(x0)
        if np.any((x < 0) | (x > self.x_max)):
            raise DomainError(f"cumulative intensity requested outside [0, {self.x_max}]")
        out = _series_lambda(x)
        hi = x > self.crossover
        if np.any(hi):
            out[hi] = self._forward(x[hi])
        return out.reshape(x0.shape)

    def inverse(self, u) -> np.ndarray:
        """Lambda^{-1}(u) for ``0 <= u <= total_mass``, clipped into ``[0, x_max]``."""
        u0 = np.asarray(u, dtype=float)
        u = np.atleast_1d(u0)
        out = _series_inverse(u)
        hi = u > self.lambda_values[1]
        if np.any(hi):
            out[hi] = self._inverse(u[hi])
        return np.clip(out, 0.0, self.x_max).reshape(u0.shape)


def build_intensity_table(x_max: float, tol: float = 1e-10) -> IntensityTable:
    """Tabulate Lambda on an adaptive grid.

    Segments are bisected until the forward and inverse Hermite interpolants
    agree with direct quadrature to ``tol * total_mass`` at the quarter points
    and the inverse satisfies the Fritsch-Carlson monotonicity condition.
    """
    if not (math.isfinite(x_max) and x_max > 0):
        raise DomainError(f"x_max must be positive, got {x_max!r}")
    if not (0 < tol < 1e-4):
        raise DomainError(f"tol must lie in (0, 1e-4), got {tol!r}")

    xc = min(CROSSOVER, x_max)
    lam_c = float(_series_lambda(xc))
    if x_max <= CROSSOVER:
        grid = np.array([0.0, x_max])
        lam = np.array([0.0, lam_c])
        return IntensityTable(x_max, grid, lam, lam_c, tol)

    nodes = np.unique(np.concatenate([
        np.geomspace(xc, min(1.0, x_max), 24),
        np.arange(1.0, x_max, 0.25),
        [x_max],
    ]))
    nodes = nodes[nodes >= xc]
    while True:
        if nodes.size > NODE_BUDGET:
            raise BudgetExceededError(
                f"intensity table needs more than {NODE_BUDGET} nodes for tol={tol}"
            )
        a, b = nodes[:-1], nodes[1:]
        lam = np.concatenate([[lam_c], lam_c + np.cumsum(segment_mass(a, b))])
        total = float(lam[-1])
        bad = _bad_segments(a, b, lam[:-1], lam[1:], tol * total)
        if not np.any(bad):
            break
        nodes = np.sort(np.concatenate([nodes, 0.5 * (a[bad] + b[bad])]))

    grid = np.concatenate([[0.0], nodes])
    lam = np.concatenate([[0.0], lam])
    return IntensityTable(float(x_max), grid, lam, total, tol)


def _hermite(s, h, y0, y1, d0, d1):
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _bad_segments(a, b, la, lb, abs_tol):
    h = b - a
    dl = lb - la
    na, nb = nu_values(a), nu_values(b)
    # Fritsch-Carlson: inverse interpolant monotone when alpha^2 + beta^2 <= 9
    secant = h / dl
    alpha = (1.0 / na) / secant
    beta_ = (1.0 / nb) / secant
    bad = alpha * alpha + beta_ * beta_ > 9.0
    for s in (0.25, 0.5, 0.75):
        xs = a + s * h
        fwd = _hermite(s, h, la, lb, na, nb)
        bad |= np.abs(fwd - (la + segment_mass(a, xs))) > 0.5 * abs_tol
        xi = _hermite(s, dl, a, b, 1.0 / na, 1.0 / nb)
        xi = np.clip(xi, a, b)
        bad |= np.abs(la + segment_mass(a, xi) - (la + s * dl)) > 0.5 * abs_tol
    return bad


@dataclass(frozen=True)
class Realization:
    """A finite sorted set of positive points in ``(0, window_max]``."""

    window_max: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size and (pts[0] <= 0 or pts[-1] > self.window_max or np.any(np.diff(pts) < 0)):
            raise DomainError("realization points must be sorted and lie in (0, window_max]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size


def sample_points(table: IntensityTable, rng: np.random.Generator) -> np.ndarray:
    """Sorted points of one realization on ``(0, table.x_max]``."""
    n = rng.poisson(table.total_mass)
    # 1 - U lies in (0, 1], so no point lands on the origin
    u = 1.0 - rng.random(n)
    x = table.inverse(u * table.total_mass)
    x.sort()
    # the inverse can only reach 0 for u below ~1e-308
    return x[x > 0]


def sample_realization(table: IntensityTable, rng: np.random.Generator) -> Realization:
    return Realization(table.x_max, sample_points(table, rng))


def write_realizations_csv(path, realizations: Iterable[Realization], header: Sequence[str] = ()):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["realization_id", "point"])
        for i, r in enumerate(realizations):
            for p in r.points:
                w.writerow([i, f"{p:.17g}"])


def write_table_csv(path, table: IntensityTable, header: Sequence[str] = ()):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["x", "lambda"])
        for x, lam in zip(table.grid, table.lambda_values):
            w.writerow([f"{x:.17g}", f"{lam:.17g}"])
