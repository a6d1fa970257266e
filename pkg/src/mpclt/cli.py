"""Command-line front end.

Subcommands: probe, sample, cumulants, decay, clt, bounds. Settings come from
built-in defaults, then an optional flat ``key = value`` config file, then
flags. Exit codes: 0 ok, 2 config error, 3 numerical budget exceeded, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .campbell import cumulants, decay_fit
from .ensemble import (
    EnsembleConfig, default_workers, normality_report, run_ensemble, standardize, stream,
    write_ecdf_csv, write_ecf_csv, write_samples_csv,
)
from .errors import BudgetExceededError, ConfigError, DomainError
from .mp_process import build_intensity_table, sample_realization, write_realizations_csv, write_table_csv
from .statistic import WindowParams, bound_profile, h_values
from .testfn import Family, TestFunctionSpec

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("probe", "sample", "cumulants", "decay", "clt", "bounds")


@dataclass(frozen=True)
class RunConfig:
    command: str
    fhat: str = "triangular"
    beta: float = 1.0
    L: tuple[float, ...] = (8.0,)
    tau: tuple[float, ...] = (1.0,)
    R: int = 10000
    seed: int = 0
    tol: float = 1e-8
    delta: float = 1e-3
    M: int = 6
    workers: int = 0  # 0: logical cores (or MPCLT_WORKERS)
    out: str = "."
    x_min: float = 1e-3
    x_max: float = 0.0  # 0: beta * max(L)
    points: int = 1000

    @property
    def spec(self) -> TestFunctionSpec:
        return TestFunctionSpec(Family(self.fhat), self.beta)

    def resolved_workers(self) -> int:
        return self.workers or default_workers()


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLES = {"L", "tau"}
_INTS = {"R", "seed", "M", "workers", "points"}
_STRS = {"command", "fhat", "out"}


def _coerce(key: str, raw) -> object:
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        if key in _TUPLES:
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            vals = tuple(float(v) for v in items if str(v).strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if key in _INTS:
            return int(raw)
        if key in _STRS:
            return str(raw).strip().strip('"').strip("'")
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}: {exc}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value.strip('"').strip("'"))
    return out


def serialize(config: RunConfig) -> str:
    lines = []
    for key, val in asdict(config).items():
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        elif isinstance(val, str):
            val = f'"{val}"'
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


# settings that change where or how fast a run happens, never its results
_EXECUTION_KEYS = ("workers", "out")


def _provenance(config: RunConfig) -> dict:
    return {k: v for k, v in asdict(config).items() if k not in _EXECUTION_KEYS}


def _one_line(config: RunConfig) -> str:
    lines = serialize(config).strip().splitlines()
    return "; ".join(ln for ln in lines if ln.split(" = ", 1)[0] not in _EXECUTION_KEYS)


def validate(c: RunConfig) -> RunConfig:
    if c.command not in COMMANDS:
        raise ConfigError(f"unknown command {c.command!r}")
    try:
        Family(c.fhat)
    except ValueError:
        raise ConfigError(f"fhat must be one of {[f.value for f in Family]}") from None
    if not (math.isfinite(c.beta) and c.beta > 0):
        raise ConfigError("beta > 0 required")
    if any(not (math.isfinite(L) and L > 2) for L in c.L):
        raise ConfigError("L > 2 required")
    if any(not (math.isfinite(t) and t >= 0) for t in c.tau):
        raise ConfigError("tau >= 0 required")
    if c.command == "clt" and any(t <= 0 for t in c.tau):
        raise ConfigError("tau > 0 required for CLT mode")
    if c.command in ("probe", "clt") and (len(c.L) != 1 or len(c.tau) != 1):
        raise ConfigError(f"{c.command} takes a single L and a single tau")
    if c.command == "decay":
        if len(c.tau) != 1:
            raise ConfigError("decay takes a single tau")
        if len(c.L) < 4:
            raise ConfigError("decay needs an L ladder of length >= 4")
        if c.M < 3:
            raise ConfigError("decay needs M >= 3")
    if c.R < 1 or (c.command == "clt" and c.R < 5):
        raise ConfigError("R >= 1 required (R >= 5 for clt)")
    if not 0 <= c.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if not c.tol > 0:
        raise ConfigError("tol > 0 required")
    if not 0 < c.delta <= 1e-2:
        raise ConfigError("delta must lie in (0, 1e-2]")
    if c.M < 2:
        raise ConfigError("M >= 2 required")
    if c.workers < 0:
        raise ConfigError("workers >= 0 required")
    if not c.x_min > 0 or c.x_max < 0 or c.points < 2:
        raise ConfigError("x_min > 0, x_max >= 0 and points >= 2 required")
    return c


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting, so errors map onto the config exit code."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags take precedence")
    common.add_argument("--fhat", choices=[f.value for f in Family])
    common.add_argument("--beta", type=str)
    common.add_argument("--L", type=str, help="scalar or comma-separated ladder")
    common.add_argument("--tau", type=str, help="scalar or comma-separated grid")
    common.add_argument("--R", type=str, help="Monte Carlo realizations")
    common.add_argument("--seed", type=str)
    common.add_argument("--tol", type=str, help="quadrature tolerance (default 1e-8)")
    common.add_argument("--delta", type=str, help="lower quadrature cutoff (default 1e-3)")
    common.add_argument("--M", type=str, help="highest cumulant order (default 6)")
    common.add_argument("--workers", type=str, help="worker processes (default: logical cores)")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--x-min", dest="x_min", type=str)
    common.add_argument("--x-max", dest="x_max", type=str)
    common.add_argument("--points", type=str)

    parser = _Parser(prog="mpclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mpclt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "probe": "evaluate H on an x-grid (x,H)",
        "sample": "raw realizations of the point process",
        "cumulants": "Campbell cumulants by quadrature",
        "decay": "fit the decay of higher cumulants in L",
        "clt": "Monte Carlo ensemble and normality report",
        "bounds": "bound-ratio profile for H",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def parse_config(argv: Sequence[str], config_text: str | None = None) -> RunConfig:
    """Defaults < config file < flags."""
    ns = build_parser().parse_args(list(argv))
    values: dict = {}
    if config_text is None and ns.config:
        try:
            config_text = Path(ns.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    if config_text:
        values.update(parse_config_text(config_text))
        values.pop("command", None)
    for key in _FIELDS:
        if key == "command":
            continue
        raw = getattr(ns, key, None)
        if raw is not None:
            values[key] = _coerce(key, raw)
    return validate(RunConfig(command=ns.command, **values))


# --- execution -----------------------------------------------------------

class _Outputs:
    """Tracks written files so a failed run can remove its partial outputs."""

    def __init__(self, config: RunConfig):
        self.dir = Path(config.out)
        self.header = [f"mpclt {__version__}", f"config: {_one_line(config)}"]
        self.config = config
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.paths.append(p)
        return p

    def csv_rows(self, name: str, columns: Sequence[str], rows):
        with open(self.path(name), "w", newline="") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def json(self, name: str, payload):
        doc = {"version": __version__, "config": _provenance(self.config), "result": payload}
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    def cleanup(self):
        for p in self.paths:
            p.unlink(missing_ok=True)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _probe(c: RunConfig, out: _Outputs):
    p = WindowParams(c.L[0], c.tau[0], c.spec)
    x_max = c.x_max or 1.05 * p.cutoff
    x = np.linspace(c.x_min, x_max, c.points)
    h = h_values(p, x)
    out.csv_rows("probe.csv", ["x", "H"], zip(x.tolist(), h.tolist()))
    print(f"probe L={p.L:g} tau={p.tau:g}: {x.size} points, max|H|={np.max(np.abs(h)):.6g}")


def _sample(c: RunConfig, out: _Outputs):
    spec = c.spec
    x_max = c.x_max or spec.beta * max(c.L)
    table = build_intensity_table(x_max)
    reals = [sample_realization(table, stream(c.seed, i)) for i in range(c.R)]
    write_realizations_csv(out.path("realizations.csv"), reals, out.header)
    write_table_csv(out.path("table.csv"), table, out.header)
    counts = [len(r) for r in reals]
    print(f"sample window=(0, {x_max:g}] R={c.R} mean_count={np.mean(counts):.6g} "
          f"Lambda={table.total_mass:.10g}")


def _cumulants(c: RunConfig, out: _Outputs):
    rows = []
    for L in c.L:
        for tau in c.tau:
            rep = cumulants(WindowParams(L, tau, c.spec), c.M, c.tol, c.delta)
            for row in rep.rows():
                rows.append(row)
                print("cumulant L={:g} tau={:g} m={} kappa={:.10g} quad_error={:.3g} tail_bound={:.3g}".format(*row))
    out.csv_rows("cumulants.csv", ["L", "tau", "m", "kappa", "quad_error", "tail_bound"], rows)


def _decay(c: RunConfig, out: _Outputs):
    tau = c.tau[0]
    reports = [cumulants(WindowParams(L, tau, c.spec), c.M, c.tol, c.delta) for L in c.L]
    fits = []
    for m in range(3, c.M + 1):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                fit = decay_fit(c.spec, tau, c.L, m, c.tol, c.delta, reports=reports)
            except ValueError as exc:
                print(f"decay m={m}: skipped ({exc})")
                continue
        for w in caught:
            print(f"warning: {w.message}")
        fits.append(fit.as_json())
        print(f"decay m={m} slope={fit.slope:.4f} slope_log_corrected={fit.slope_log_corrected:.4f} "
              f"residual={fit.residual:.3g}")
    out.json("decay.json", fits)


def _clt(c: RunConfig, out: _Outputs):
    p = WindowParams(c.L[0], c.tau[0], c.spec)
    samples = run_ensemble(EnsembleConfig(p, c.R, c.seed, c.resolved_workers()))
    rep = cumulants(p, max(4, c.M), c.tol, c.delta)
    goe = normality_report(samples, p, rep, "goe")
    camp = normality_report(samples, p, rep, "campbell")
    write_samples_csv(out.path("samples.csv"), samples, out.header)
    z = standardize(samples, rep, "goe")
    write_ecdf_csv(out.path("ecdf.csv"), z, out.header)
    write_ecf_csv(out.path("ecf.csv"), z, out.header)
    summary = {
        "L": p.L, "tau": p.tau, "beta": p.fhat.beta, "family": p.fhat.family.value,
        "R": c.R, "seed": c.seed, "mean": goe.mean, "k2": goe.k2, "k3": goe.k3, "k4": goe.k4,
        "ks_goe": goe.ks_distance, "ks_campbell": camp.ks_distance, "ecf_max_dev": goe.ecf_max_dev,
    }
    out.json("summary.json", summary)
    print("clt " + " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in summary.items()))


def _bounds(c: RunConfig, out: _Outputs):
    ladder = [WindowParams(L, c.tau[0], c.spec) for L in c.L]
    rows = bound_profile(ladder, tau_grid=c.tau)
    out.csv_rows("bounds.csv", ["L", "tau", "regime", "max_ratio"],
                 [(r.L, r.tau, r.regime, r.max_ratio) for r in rows])
    for r in rows:
        print(f"bounds L={r.L:g} tau={r.tau:g} regime={r.regime} max_ratio={r.max_ratio:.6g}")


_RUNNERS = {"probe": _probe, "sample": _sample, "cumulants": _cumulants,
            "decay": _decay, "clt": _clt, "bounds": _bounds}


def execute(config: RunConfig) -> int:
    out = _Outputs(config)
    try:
        _RUNNERS[config.command](config, out)
    except BudgetExceededError as exc:
        out.cleanup()
        _fail("budget", exc)
        return EXIT_BUDGET
    except OSError as exc:
        out.cleanup()
        _fail("io", exc)
        return EXIT_IO
    except (DomainError, ConfigError) as exc:
        out.cleanup()
        _fail("config", exc)
        return EXIT_CONFIG
    except BaseException:
        out.cleanup()
        raise
    return EXIT_OK


def _fail(kind: str, exc: BaseException):
    msg = str(exc).replace("\n", " ")
    print(f"error kind={kind} message={json.dumps(msg)}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        _fail("config", exc)
        return EXIT_CONFIG
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
