"""Independent reference computations used only by the tests."""
import math

import mpmath as mp
import numpy as np


def simpson(f, a, b, h):
    """Composite Simpson rule with step close to ``h`` (even panel count)."""
    n = int(round((b - a) / h))
    n += n % 2
    x = np.linspace(a, b, n + 1)
    y = f(x)
    step = (b - a) / n
    return step / 3 * (y[0] + y[-1] + 4 * math.fsum(y[1:-1:2]) + 2 * math.fsum(y[2:-1:2]))


def nu_plain(x):
    """(cosh x - 1)/x with the removable value 0 at the origin."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, (np.cosh(x) - 1.0) / safe, 0.0)


def lambda_series(x):
    """int_0^x (cosh t - 1)/t dt = sum_n x^(2n) / (2n (2n)!); all terms positive."""
    if x == 0:
        return 0.0
    lx = math.log(x)
    return math.fsum(
        math.exp(2 * n * lx - math.log(2 * n) - math.lgamma(2 * n + 1)) for n in range(1, 200)
    )


def h_reference(L, tau, beta, x, family="triangular", dps=40):
    """H by direct summation in extended precision."""
    with mp.workdps(dps):
        x = mp.mpf(x)
        L = mp.mpf(L)
        K = int(mp.floor(beta * L / x))
        s = mp.mpf(0)
        for k in range(1, K + 1):
            y = k * x
            u = y / L / beta
            if u >= 1:
                continue
            fh = 1 - u if family == "triangular" else mp.exp(-1 / (1 - u * u))
            s += fh * mp.cos(y * tau) / mp.sinh(y / 2)
        return 2 * x / L * s


def h_numpy(L, tau, beta, x):
    """H for the triangular family by a plain per-point loop over k."""
    K = int(math.floor(beta * L / x))
    k = np.arange(1, K + 1, dtype=float)
    y = k * x
    terms = np.maximum(1 - y / (beta * L), 0) * np.cos(y * tau) / np.sinh(y / 2)
    return 2 * x / L * math.fsum(terms)
