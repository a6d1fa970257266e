import math

import numpy as np
import pytest
from scipy import stats

from mpclt.errors import DomainError
from mpclt.mp_process import (
    Realization, build_intensity_table, nu_mp, nu_values, sample_points, sample_realization,
    segment_mass, write_realizations_csv, write_table_csv,
)
from oracles import lambda_series, nu_plain, simpson

# frozen oracle values: mpmath cosh at 40 digits
NU_1 = 0.5430806348152437
NU_2 = 1.3810978455418157
# fixed-step Simpson of (cosh t - 1)/t at step 1e-5
SIMPSON_LAMBDA_10 = 1243.2346852845599
SIMPSON_LAMBDA_6 = 40.62572589586395


@pytest.fixture(scope="module")
def table6():
    return build_intensity_table(6.0, 1e-10)


class TestNu:
    def test_values(self):
        assert nu_mp(1.0) == pytest.approx(NU_1, rel=1e-15)
        assert nu_mp(2.0) == pytest.approx(NU_2, rel=1e-15)

    def test_small_argument_limit(self):
        for x in (1e-4, 1e-6, 1e-8):
            assert nu_mp(x) / x == pytest.approx(0.5, rel=1e-7)

    def test_relative_accuracy_down_to_1e8(self):
        import mpmath as mp
        mp.mp.dps = 40
        for x in np.geomspace(1e-8, 50, 200):
            ref = (mp.cosh(mp.mpf(x)) - 1) / mp.mpf(x)
            assert abs(nu_mp(x) / float(ref) - 1) <= 1e-12

    @pytest.mark.parametrize("x", [0.0, -1.0, math.nan])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            nu_mp(x)


class TestIntensityTable:
    def test_small_window_mass(self):
        t = build_intensity_table(1e-3, 1e-8)
        assert t.total_mass == pytest.approx(2.5e-7, rel=1e-6)

    def test_total_mass_against_simpson(self):
        t = build_intensity_table(10.0, 1e-10)
        assert t.total_mass == pytest.approx(SIMPSON_LAMBDA_10, rel=1e-8)
        assert SIMPSON_LAMBDA_10 == pytest.approx(simpson(nu_plain, 0, 10, 1e-5), rel=1e-13)

    @pytest.mark.parametrize("x_max", [0.5, 3.0, 6.0, 16.0, 40.0])
    def test_total_mass_against_series(self, x_max):
        t = build_intensity_table(x_max, 1e-10)
        assert t.total_mass == pytest.approx(lambda_series(x_max), rel=1e-8)

    def test_grid_invariants(self, table6):
        assert table6.grid[0] == 0.0 and table6.lambda_values[0] == 0.0
        assert np.all(np.diff(table6.grid) > 0)
        assert np.all(np.diff(table6.lambda_values) > 0)
        assert table6.grid[-1] == 6.0

    def test_additivity(self, table6):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = np.sort(rng.uniform(0, 6, 2))
            diff = table6.cumulative(b) - table6.cumulative(a)
            assert diff == pytest.approx(float(segment_mass(a, b)), abs=1e-10 * table6.total_mass)

    def test_inverse_round_trip(self, table6):
        rng = np.random.default_rng(11)
        u = rng.random(10 ** 5)
        x = table6.inverse(u * table6.total_mass)
        # exact Lambda at the returned points: nearest node plus Gauss-Legendre
        idx = np.searchsorted(table6.grid, x, side="right") - 1
        exact = table6.lambda_values[idx] + segment_mass(table6.grid[idx], x)
        assert np.max(np.abs(exact - u * table6.total_mass)) <= 1e-10 * table6.total_mass
        sub = rng.choice(x, 300)
        series = np.array([lambda_series(v) for v in sub])
        assert np.allclose(table6.cumulative(sub), series, rtol=0, atol=1e-10 * table6.total_mass)

    @pytest.mark.parametrize("x_max,tol", [(0.0, 1e-8), (-1.0, 1e-8), (5.0, 1e-3), (5.0, 0.0)])
    def test_bad_arguments(self, x_max, tol):
        with pytest.raises(DomainError):
            build_intensity_table(x_max, tol)

    def test_csv_export(self, tmp_path, table6):
        p = tmp_path / "t.csv"
        write_table_csv(p, table6, ["hdr"])
        lines = p.read_text().splitlines()
        assert lines[0] == "# hdr" and lines[1] == "x,lambda"
        assert len(lines) == 2 + table6.grid.size
        assert float(lines[-1].split(",")[1]) == table6.total_mass


class TestSampler:
    def test_empty_fraction(self):
        # window with total mass 2: find x with Lambda(x) = 2
        from scipy.optimize import brentq
        x2 = brentq(lambda x: lambda_series(x) - 2.0, 1, 5, xtol=1e-14)
        t = build_intensity_table(x2, 1e-10)
        assert t.total_mass == pytest.approx(2.0, rel=1e-9)
        rng = np.random.default_rng(5)
        n = 20000
        empty = sum(sample_points(t, rng).size == 0 for _ in range(n))
        p = math.exp(-2)
        assert abs(empty / n - p) <= 4 * math.sqrt(p * (1 - p) / n)

    def test_realizations_sorted_and_in_window(self, table6):
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = sample_realization(table6, rng)
            if len(r):
                assert r.points[0] > 0 and r.points[-1] <= 6.0
                assert np.all(np.diff(r.points) >= 0)

    def test_realization_validation(self):
        with pytest.raises(DomainError):
            Realization(1.0, np.array([0.5, 0.2]))
        with pytest.raises(DomainError):
            Realization(1.0, np.array([0.0, 0.2]))
        with pytest.raises(DomainError):
            Realization(1.0, np.array([0.5, 1.2]))
        assert len(Realization(1.0, np.array([]))) == 0

    @pytest.mark.slow
    def test_counts_statistics(self, table6):
        rng = np.random.default_rng(2024)
        R = 10 ** 4
        edges = np.linspace(0, 6, 31)
        counts = np.zeros((R, 30))
        totals = np.zeros(R)
        for i in range(R):
            pts = sample_points(table6, rng)
            totals[i] = pts.size
            counts[i] = np.histogram(pts, edges)[0]
        lam = table6.total_mass
        assert abs(totals.mean() - lam) <= 4 * math.sqrt(lam / R)
        assert 0.9 <= totals.var(ddof=1) / totals.mean() <= 1.1
        # disjoint bins uncorrelated (bins with enough mass)
        a, b = counts[:, 25], counts[:, 29]
        assert abs(np.corrcoef(a, b)[0, 1]) <= 0.05
        masses = np.diff(table6.cumulative(edges))
        obs = counts.sum(axis=0)
        p = stats.chisquare(obs, masses * R * obs.sum() / (masses.sum() * R)).pvalue
        assert p >= 1e-3

    @pytest.mark.slow
    def test_poisson_dispersion_large_mass(self):
        t = build_intensity_table(8.0, 1e-10)  # mass ~ 200
        rng = np.random.default_rng(9)
        n = np.array([sample_points(t, rng).size for _ in range(10 ** 4)])
        assert t.total_mass >= 50
        assert 0.9 <= n.var(ddof=1) / n.mean() <= 1.1

    def test_csv_export(self, tmp_path, table6):
        rng = np.random.default_rng(0)
        reals = [sample_realization(table6, rng) for _ in range(3)]
        p = tmp_path / "r.csv"
        write_realizations_csv(p, reals)
        rows = p.read_text().splitlines()
        assert rows[0] == "realization_id,point"
        assert len(rows) == 1 + sum(len(r) for r in reals)
        ids, pts = zip(*(r.split(",") for r in rows[1:]))
        assert float(pts[0]) == reals[0].points[0]
