"""Reproducible Monte Carlo ensembles of S_{L,tau} and their Gaussianity diagnostics.

Realization ``i`` draws from a Philox stream keyed by the master seed with
``i`` written into the counter, and realizations are processed in chunks
whose size depends only on the parameters. Worker processes only decide who
computes a chunk, so output is bit-identical for every worker count.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ._numerics import fsum
from .campbell import CumulantReport
from .errors import BudgetExceededError, DomainError
from .mp_process import IntensityTable, build_intensity_table, sample_points
from .statistic import WindowParams, s_values
from .testfn import goe_variance

POINT_GUARD = 1_000_000
TABLE_TOL = 1e-10
# points per chunk; bounds peak memory of the batched H evaluation
CHUNK_POINTS = 2_000_000
MAX_CHUNK = 1024
ECF_GRID = np.linspace(-5.0, 5.0, 101)


def default_workers() -> int:
    env = os.environ.get("MPCLT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleConfig:
    params: WindowParams
    realizations: int
    master_seed: int
    workers: int = field(default_factory=default_workers)
    point_guard: float = POINT_GUARD

    def __post_init__(self):
        if self.realizations < 1:
            raise DomainError("at least one realization is required")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Generator for realization ``index``: Philox keyed by the seed, index in the counter."""
    key = np.random.SeedSequence(master_seed).generate_state(2, np.uint64)
    counter = np.array([0, 0, index, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def chunk_size(total_mass: float) -> int:
    return int(min(MAX_CHUNK, max(1, CHUNK_POINTS // max(1.0, total_mass))))


def _run_chunk(args):
    params, table, seed, start, stop = args
    pts = [sample_points(table, stream(seed, i)) for i in range(start, stop)]
    return s_values(params, pts)


def run_ensemble(config: EnsembleConfig, table: IntensityTable | None = None) -> np.ndarray:
    """R independent draws of S_{L,tau} on the window ``(0, beta L]``."""
    p = config.params
    if not p.tau > 0:
        raise DomainError("tau > 0 required for ensembles")
    if table is None:
        table = build_intensity_table(p.cutoff, TABLE_TOL)
    elif table.x_max < p.cutoff:
        raise DomainError("intensity table window is shorter than beta*L")
    if table.total_mass > config.point_guard:
        raise BudgetExceededError(
            f"expected {table.total_mass:.4g} points per realization at beta*L={p.cutoff}, "
            f"guard is {config.point_guard:.4g}"
        )
    size = chunk_size(table.total_mass)
    R = config.realizations
    jobs = [(p, table, config.master_seed, s, min(s + size, R)) for s in range(0, R, size)]
    if config.workers == 1 or len(jobs) == 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    return np.concatenate(parts)


# --- estimators ----------------------------------------------------------

def central_moments(samples) -> tuple[float, float, float, float]:
    """Mean and central moments m2, m3, m4 (compensated sums)."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    mean = fsum(x) / n
    d = x - mean
    d -= fsum(d) / n
    d2 = d * d
    return mean, fsum(d2) / n, fsum(d2 * d) / n, fsum(d2 * d2) / n


def k_statistics(samples) -> tuple[float, float, float]:
    """Unbiased cumulant estimators k2, k3, k4."""
    n = np.asarray(samples).size
    if n < 5:
        raise DomainError(f"k-statistics need at least 5 samples, got {n}")
    _, m2, m3, m4 = central_moments(samples)
    k2 = n / (n - 1) * m2
    k3 = n * n / ((n - 1) * (n - 2)) * m3
    k4 = n * n * ((n + 1) * m4 - 3 * (n - 1) * m2 * m2) / ((n - 1) * (n - 2) * (n - 3))
    return k2, k3, k4


def batch_standard_errors(samples, n_batches: int = 20) -> dict[str, float]:
    """Standard errors of k2, k3 and the fourth central moment by batching."""
    x = np.asarray(samples, dtype=float)
    batches = np.array_split(x, n_batches)
    est = np.array([(*k_statistics(b)[:2], central_moments(b)[3]) for b in batches])
    se = est.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return {"k2": float(se[0]), "k3": float(se[1]), "m4": float(se[2])}


def ks_distance(z) -> float:
    """Exact one-sample KS statistic against the standard normal CDF."""
    return float(stats.kstest(np.asarray(z, dtype=float), "norm").statistic)


def empirical_cf(z, t=ECF_GRID) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.array([np.mean(np.exp(1j * tt * z)) for tt in t])


def ecf_max_deviation(z, t=ECF_GRID) -> float:
    """max over t of |empirical CF - exp(-t^2/2)|."""
    t = np.asarray(t, dtype=float)
    return float(np.max(np.abs(empirical_cf(z, t) - np.exp(-0.5 * t * t))))


@dataclass(frozen=True)
class SampleSummary:
    R: int
    mean: float
    k2: float
    k3: float
    k4: float
    ks_distance: float
    ecf_max_dev: float
    standardization: str


def standardize(samples, cumulant_report: CumulantReport, mode: str = "goe") -> np.ndarray:
    """``(S - kappa_1) / sqrt(V)`` with V the GOE variance (``goe``) or kappa_2 (``campbell``)."""
    if mode == "goe":
        var = goe_variance(cumulant_report.params.fhat)
    elif mode == "campbell":
        var = cumulant_report[2]
        if not var > 0:
            raise DomainError("kappa_2 must be positive for campbell standardization")
    else:
        raise ValueError(f"unknown standardization {mode!r}")
    return (np.asarray(samples, dtype=float) - cumulant_report[1]) / math.sqrt(var)


def normality_report(
    samples,
    params: WindowParams,
    cumulant_report: CumulantReport,
    mode: str = "goe",
) -> SampleSummary:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("no samples")
    if cumulant_report.params != params:
        raise DomainError("cumulant report was computed for different parameters")
    if x.size >= 5:
        k2, k3, k4 = k_statistics(x)
    else:
        k2 = k3 = k4 = float("nan")
    z = standardize(x, cumulant_report, mode)
    return SampleSummary(
        R=int(x.size),
        mean=fsum(x) / x.size,
        k2=k2, k3=k3, k4=k4,
        ks_distance=ks_distance(z),
        ecf_max_dev=ecf_max_deviation(z),
        standardization=mode,
    )


# --- exports -------------------------------------------------------------

def _header(fh, header: Sequence[str]):
    for line in header:
        fh.write(f"# {line}\n")


def write_samples_csv(path, samples, header: Sequence[str] = ()):
    with open(path, "w", newline="") as fh:
        _header(fh, header)
        w = csv.writer(fh)
        w.writerow(["index", "S"])
        for i, s in enumerate(samples):
            w.writerow([i, f"{s:.17g}"])


def write_ecdf_csv(path, z, header: Sequence[str] = ()):
    z = np.sort(np.asarray(z, dtype=float))
    ecdf = np.arange(1, z.size + 1) / z.size
    with open(path, "w", newline="") as fh:
        _header(fh, header)
        w = csv.writer(fh)
        w.writerow(["z", "ecdf", "normal_cdf"])
        for zi, e, c in zip(z, ecdf, stats.norm.cdf(z)):
            w.writerow([f"{zi:.17g}", f"{e:.17g}", f"{c:.17g}"])


def write_ecf_csv(path, z, header: Sequence[str] = ()):
    phi = empirical_cf(z)
    with open(path, "w", newline="") as fh:
        _header(fh, header)
        w = csv.writer(fh)
        w.writerow(["t", "re", "im", "gaussian"])
        for t, ph in zip(ECF_GRID, phi):
            w.writerow([f"{t:.17g}", f"{ph.real:.17g}", f"{ph.imag:.17g}", f"{math.exp(-t * t / 2):.17g}"])
