import math

import numpy as np
import pytest

from sizechain.analytics import (
    DEFAULT_GROUPING,
    EntropyTable,
    average_entropy,
    chapman_kolmogorov_check,
    column_entropy,
    compose,
    diagonal_dominance,
    entropy_table,
    group_entropy,
    matrix_power,
    propagate_path,
    transition_trend,
)
from sizechain.errors import NumericError, ValidationError
from sizechain.estimator import MarginalDistribution, TransitionMatrix


def tm(probs, origin=2000, dest=None, undefined=()):
    dest = origin + 1 if dest is None else dest
    return TransitionMatrix(origin, dest, np.array(probs, dtype=float), None, frozenset(undefined))


def uniform(n, year):
    return MarginalDistribution(year, np.full(n, 1.0 / n))


# ---------------------------------------------------------------------------
# path / power / compose
# ---------------------------------------------------------------------------

class TestPath:

    def test_identity_keeps_marginal(self):
        p0 = MarginalDistribution(2000, [0.2, 0.3, 0.5])
        path = propagate_path(p0, [tm(np.eye(3), 2000), tm(np.eye(3), 2001)])
        assert [m.year for m in path] == [2001, 2002]
        np.testing.assert_allclose(path[-1].p, p0.p)

    def test_mass_conserved(self):
        f = [[0.1, 0.5], [0.9, 0.5]]
        path = propagate_path(MarginalDistribution(2000, [1.0, 0.0]), [tm(f, 2000 + k) for k in range(15)])
        assert abs(path[-1].total - 1.0) <= 1e-10

    def test_two_state_example(self):
        path = propagate_path(MarginalDistribution(2000, [1.0, 0.0]), [tm([[0.5, 0.0], [0.5, 1.0]])])
        np.testing.assert_allclose(path[0].p, [0.5, 0.5])

    def test_year_mismatch(self):
        with pytest.raises(ValidationError, match="first matrix starts at 2000"):
            propagate_path(MarginalDistribution(1999, [1.0, 0.0]), [tm(np.eye(2))])

    def test_not_contiguous(self):
        with pytest.raises(ValidationError, match="not contiguous"):
            propagate_path(uniform(2, 2000), [tm(np.eye(2), 2000), tm(np.eye(2), 2002)])

    def test_mass_on_undefined_column(self):
        m = tm([[1.0, np.nan], [0.0, np.nan]], undefined=[1])
        with pytest.raises(NumericError, match="undefined column 1"):
            propagate_path(uniform(2, 2000), [m])

    def test_power(self):
        f = tm([[0.9, 0.2], [0.1, 0.8]])
        np.testing.assert_allclose(matrix_power(f, 2), np.array(f.probs) @ np.array(f.probs))
        with pytest.raises(ValidationError):
            matrix_power(f, 0)

    def test_power_splits(self):
        f = tm([[0.6, 0.2, 0.1], [0.3, 0.5, 0.4], [0.1, 0.3, 0.5]])
        for a, b in [(1, 1), (2, 3), (4, 1)]:
            np.testing.assert_allclose(matrix_power(f, a + b), matrix_power(f, a) @ matrix_power(f, b), atol=1e-12)

    def test_swap_squared_is_identity(self):
        swap = tm([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(matrix_power(swap, 2), np.eye(2))

    def test_power_rejects_undefined_columns(self):
        with pytest.raises(NumericError, match="undefined columns \\[1\\]"):
            matrix_power(tm([[1.0, np.nan], [0.0, np.nan]], undefined=[1]), 2)

    def test_compose_orders_product(self):
        a = tm([[0.0, 0.0], [1.0, 1.0]], 2000)
        b = tm([[0.5, 0.25], [0.5, 0.75]], 2001)
        c = compose(a, b)
        assert (c.origin_year, c.dest_year) == (2000, 2002)
        np.testing.assert_allclose(c.probs, b.probs @ a.probs)
        assert c.counts is None

    def test_compose_propagates_undefined(self):
        a = tm([[0.0, 0.5], [1.0, 0.5]], 2000)
        b = tm([[np.nan, 1.0], [np.nan, 0.0]], 2001, undefined=[0])
        # column 1 of a sends mass into undefined column 0 of b
        assert compose(a, b).undefined_columns == frozenset({1})


# ---------------------------------------------------------------------------
# trend
# ---------------------------------------------------------------------------

class TestTrend:

    def test_identity_has_no_trend(self):
        t = transition_trend(tm(np.eye(3)), uniform(3, 2001))
        assert t.L == 0 and t.R == 0 and t.Q is None

    def test_symmetric_gives_one(self):
        f = [[0.6, 0.4], [0.4, 0.6]]
        t = transition_trend(tm(f), uniform(2, 2001))
        assert t.Q == pytest.approx(1.0)

    def test_dest_weighting(self):
        f = [[0.5, 0.0], [0.5, 1.0]]
        t = transition_trend(tm(f), MarginalDistribution(2001, [0.25, 0.75]))
        assert t.L == pytest.approx(0.5 * 0.75)
        assert t.R == 0.0 and t.Q is None

    def test_origin_weighting(self):
        f = [[0.5, 0.2], [0.5, 0.8]]
        t = transition_trend(tm(f), MarginalDistribution(2000, [0.4, 0.6]), weight="origin")
        assert t.L == pytest.approx(0.5 * 0.4)
        assert t.R == pytest.approx(0.2 * 0.6)
        assert t.Q == pytest.approx(t.L / t.R)

    def test_marginal_year_checked(self):
        with pytest.raises(ValidationError, match="needs the 2001 marginal"):
            transition_trend(tm(np.eye(2)), uniform(2, 2000))

    def test_exclude_entry_exit(self):
        f = [[0.0, 0.3, 0.0], [1.0, 0.5, 0.2], [0.0, 0.2, 0.8]]
        full = transition_trend(tm(f), uniform(3, 2001))
        inner = transition_trend(tm(f), uniform(3, 2001), exclude_entry_exit=True)
        assert inner.L == pytest.approx(0.2 / 3)
        assert inner.R == pytest.approx(0.2 / 3)
        assert full.L > inner.L and full.R > inner.R

    def test_unknown_weight(self):
        with pytest.raises(ValidationError):
            transition_trend(tm(np.eye(2)), uniform(2, 2001), weight="both")


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

class TestEntropy:

    def test_deterministic_column(self):
        assert column_entropy(tm(np.eye(2)), 0) == 0.0

    def test_uniform_column(self):
        f = np.full((4, 4), 0.25)
        assert column_entropy(tm(f), 2) == pytest.approx(math.log(4))

    def test_row_permutation_invariance(self):
        f = np.array([[0.1, 0.0, 0.3], [0.6, 1.0, 0.3], [0.3, 0.0, 0.4]])
        shuffled = f[[2, 0, 1], :]
        for i in range(3):
            assert column_entropy(tm(shuffled), i) == pytest.approx(column_entropy(tm(f), i), abs=1e-15)

    def test_undefined_column_is_none(self):
        table = entropy_table(tm([[1.0, np.nan], [0.0, np.nan]], undefined=[1]))
        assert table.values == (0.0, None)
        assert table.undefined == frozenset({1})
        assert table.end_year == 2001

    def test_group_means(self):
        values = (0.0,) + tuple(float(k) for k in range(1, 13))
        g = group_entropy(EntropyTable(2001, values))
        assert g.small == pytest.approx(2.0)
        assert g.medium == pytest.approx(5.0)
        assert g.large == pytest.approx(9.5)

    def test_group_skips_undefined(self):
        values = (0.0, 1.0, None, 3.0) + (1.0,) * 9
        g = group_entropy(EntropyTable(2001, values, frozenset({2})))
        assert g.small == pytest.approx(2.0)

    def test_grouping_must_partition(self):
        bad = dict(DEFAULT_GROUPING, large=(7, 8, 9))
        with pytest.raises(ValidationError, match="exactly once"):
            group_entropy(EntropyTable(2001, (0.0,) * 13), bad)

    def test_average(self):
        a = EntropyTable(2001, (1.0, None))
        b = EntropyTable(2002, (3.0, 2.0))
        assert average_entropy([a, b]) == (2.0, 2.0)


def test_diagonal_dominance():
    f = [
        [0.0, 0.1, 0.1],
        [1.0, 0.6, 0.5],
        [0.0, 0.3, 0.4],
    ]
    assert diagonal_dominance(tm(f)) == [1]
    assert diagonal_dominance(tm(f), exclude_state0=False) == [1]


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov
# ---------------------------------------------------------------------------

class TestChapmanKolmogorov:

    def test_identity_second(self):
        first = tm([[0.7, 0.1], [0.3, 0.9]], 2000)
        direct = tm([[0.7, 0.1], [0.3, 0.9]], 2000, 2002)
        r = chapman_kolmogorov_check(first, tm(np.eye(2), 2001), direct)
        assert r.max_deviation == 0.0 and r.passed

    def test_failure_names_entry(self):
        first = tm(np.eye(2), 2000)
        direct = tm([[0.9, 0.0], [0.1, 1.0]], 2000, 2002)
        r = chapman_kolmogorov_check(first, tm(np.eye(2), 2001), direct, tolerance=0.05)
        assert not r.passed
        assert r.worst_entry in {(0, 0), (1, 0)}
        assert r.max_deviation == pytest.approx(0.1)

    def test_excluded_columns(self):
        first = tm([[1.0, np.nan], [0.0, np.nan]], 2000, undefined=[1])
        direct = tm([[1.0, 0.5], [0.0, 0.5]], 2000, 2002)
        r = chapman_kolmogorov_check(first, tm(np.eye(2), 2001), direct)
        assert r.excluded_columns == (1,)
        assert r.passed
        assert r.to_dict()["deviations"][0][1] is None

    def test_nothing_to_compare_does_not_pass(self):
        blank = [[np.nan, np.nan], [np.nan, np.nan]]
        first = tm(blank, 2000, undefined=[0, 1])
        direct = tm(np.eye(2), 2000, 2002)
        r = chapman_kolmogorov_check(first, tm(np.eye(2), 2001), direct)
        assert r.excluded_columns == (0, 1)
        assert r.worst_entry is None and not r.passed

    def test_years_must_match(self):
        with pytest.raises(ValidationError, match="does not match direct"):
            chapman_kolmogorov_check(tm(np.eye(2), 2000), tm(np.eye(2), 2001), tm(np.eye(2), 2000, 2003))
