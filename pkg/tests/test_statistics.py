import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvforge.analysis import (
    RowStats,
    SiteClassification,
    poisson_single_probability,
    row_statistics,
    wilson_interval,
)
from nvforge.fabrication import PulseGridSpec


class TestWilson:
    def test_nine_of_twenty(self):
        lo, hi = wilson_interval(9, 20)
        assert (lo, hi) == (pytest.approx(0.26, abs=0.005), pytest.approx(0.66, abs=0.005))

    def test_endpoints_solve_score_equation(self):
        # the interval ends are exactly the p where the normal score
        # (p_hat - p) / sqrt(p(1-p)/n) hits +-z; check them as the roots
        # of the equivalent quadratic, computed independently
        n, k, z = 20, 9, 1.959963984540054
        roots = np.roots([1.0 + z**2 / n, -(2 * k / n + z**2 / n), (k / n) ** 2])
        np.testing.assert_allclose(sorted(wilson_interval(k, n)), sorted(roots), rtol=1e-12)

    def test_degenerate_counts(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert hi > 0.0
        lo, hi = wilson_interval(50, 50)
        assert hi == pytest.approx(1.0, abs=1e-12)
        assert lo < 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            wilson_interval(1, 0)
        with pytest.raises(ValueError):
            wilson_interval(5, 4)
        with pytest.raises(ValueError):
            wilson_interval(-1, 4)

    @given(st.integers(0, 200), st.integers(1, 200))
    def test_interval_brackets_the_estimate(self, k, n):
        if k > n:
            k = n
        lo, hi = wilson_interval(k, n)
        eps = 1e-9
        assert -eps <= lo <= k / n + eps
        assert k / n - eps <= hi <= 1.0 + eps


def classed_row(classes, row=0, separations=None):
    out = []
    for col, cls in enumerate(classes):
        sep = None if separations is None else separations[col]
        out.append(SiteClassification((row, col), cls, separation_nm=sep))
    return out


class TestRowStatistics:
    def spec(self, rows=1, cols=20, energy=25.7):
        return PulseGridSpec(rows=rows, cols=cols, energies_nj_per_row=[energy] * rows)

    def test_best_row_yield(self):
        classes = ["one"] * 9 + ["empty"] * 8 + ["two"] * 2 + ["three"]
        stats = row_statistics(classed_row(classes), self.spec())
        (rs,) = stats
        assert isinstance(rs, RowStats)
        assert rs.single_probability == pytest.approx(0.45)
        assert rs.singles == 9
        assert rs.total_nvs == 9 + 2 * 2 + 3
        assert rs.pulse_energy_nj == 25.7
        assert (rs.single_ci_low, rs.single_ci_high) == (
            pytest.approx(0.26, abs=0.005),
            pytest.approx(0.66, abs=0.005),
        )

    def test_all_empty_row(self):
        stats = row_statistics(classed_row(["empty"] * 20), self.spec())
        rs = stats[0]
        assert (rs.singles, rs.doubles, rs.pairs, rs.triples, rs.total_nvs) == (0, 0, 0, 0, 0)
        assert rs.single_probability == 0.0

    def test_pair_vs_double_resolution(self):
        classes = ["two", "two", "two", "empty"]
        seps = [650.0, 350.0, None, None]
        stats = row_statistics(
            classed_row(classes, separations=seps), self.spec(cols=4), resolution_nm=500.0
        )
        rs = stats[0]
        # 650 nm separation resolves into a pair; 350 nm and unknown stay doubles
        assert rs.pairs == 1
        assert rs.doubles == 2
        assert rs.total_nvs == 6

    def test_totals_permutation_invariant(self):
        classes = ["one", "two", "three", "empty", "graphitized", "one", "two", "one"]
        seps = [None, 700.0, None, None, None, None, 100.0, None]
        base = row_statistics(
            classed_row(classes, separations=seps), self.spec(cols=8)
        )[0]
        order = [3, 7, 1, 0, 6, 2, 5, 4]
        shuffled = [
            SiteClassification((0, i), classes[j], separation_nm=seps[j])
            for i, j in enumerate(order)
        ]
        perm = row_statistics(shuffled, self.spec(cols=8))[0]
        for f in ("singles", "doubles", "pairs", "triples", "total_nvs"):
            assert getattr(perm, f) == getattr(base, f)

    def test_row_order_follows_grid(self):
        spec = PulseGridSpec(rows=2, cols=3, energies_nj_per_row=[30.0, 20.0])
        sites = classed_row(["one"] * 3, row=1) + classed_row(["empty"] * 3, row=0)
        stats = row_statistics(sites, spec)
        assert [rs.row for rs in stats] == [0, 1]
        assert stats[0].singles == 0 and stats[1].singles == 3
        assert stats[1].pulse_energy_nj == 20.0

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            row_statistics(classed_row(["one"] * 19), self.spec())
        bad_row = classed_row(["one"] * 20, row=3)
        with pytest.raises(ValueError):
            row_statistics(bad_row, self.spec())

    def test_unknown_class_rejected(self):
        with pytest.raises(ValueError, match="unknown emitter class"):
            SiteClassification((0, 0), "quadruple")


class TestPoissonSingle:
    def test_points(self):
        assert poisson_single_probability(1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)
        assert poisson_single_probability(0.0) == 0.0

    def test_ceiling_below_best_row(self):
        # no Poisson vacancy model reaches the 45% single-NV row: the
        # global maximum of mu*exp(-mu) is 1/e ~ 0.368
        mu = np.linspace(0.0, 20.0, 200001)
        best = np.max(mu * np.exp(-mu))
        assert best == pytest.approx(math.exp(-1.0), abs=1e-6)
        assert best < 0.45

    def test_validation(self):
        with pytest.raises(ValueError):
            poisson_single_probability(-0.1)

    @given(st.floats(0.0, 50.0, allow_nan=False))
    def test_bounded_by_analytic_max(self, mu):
        assert 0.0 <= poisson_single_probability(mu) <= math.exp(-1.0) + 1e-15
