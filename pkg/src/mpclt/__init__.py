"""Numerical checks of the Gaussian limit for smooth linear statistics of the
length spectrum of random large-genus hyperbolic surfaces, through the
limiting Mirzakhani-Petri Poisson process."""

__version__ = "0.1.0"

from .testfn import Family, TestFunctionSpec, eval_fhat, goe_variance  # noqa: E402
from .mp_process import IntensityTable, Realization, build_intensity_table, nu_mp, sample_realization  # noqa: E402
from .statistic import WindowParams, bound_profile, eval_F, eval_H, eval_S  # noqa: E402
from .campbell import CumulantReport, campbell_moment_integral, cumulants, decay_fit, variance_convergence  # noqa: E402
from .ensemble import EnsembleConfig, SampleSummary, k_statistics, normality_report, run_ensemble  # noqa: E402
