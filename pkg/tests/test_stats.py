import math
import warnings

import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import keys_for, make_perf
from selector.distributions import kolmogorov_sf
from selector.errors import CoverageError, DomainError, StatisticalPreconditionWarning
from selector.stats import (
    PairwiseOutcome,
    RankingMatrix,
    build_ranking_matrix,
    compare_on_suite,
    dsc_rank_instance,
    fractional_ranks,
    friedman_test,
    ks_two_sample,
    nemenyi_posthoc,
    robustness_count,
)


def ranking(rows, algs=None):
    rows = np.asarray(rows, dtype=float)
    algs = algs or tuple("ABCDEFG"[: rows.shape[1]])
    return RankingMatrix(tuple(keys_for(rows.shape[0])), tuple(algs), rows)


# KS

def test_ks_identical():
    a = np.linspace(0, 1, 30)
    assert ks_two_sample(a, a) == (0.0, 1.0)


def test_ks_disjoint():
    r = np.random.default_rng(0)
    d, p = ks_two_sample(r.random(30), 2 + r.random(30))
    assert d == 1.0
    assert p < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(2, 40))
def test_ks_against_scipy_statistic(seed, n, m):
    r = np.random.default_rng(seed)
    a = r.normal(size=n).round(1)  # rounding creates ties
    b = r.normal(0.3, 1, size=m).round(1)
    d, p = ks_two_sample(a, b)
    assert d == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)
    ne = n * m / (n + m)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    assert p == pytest.approx(sps.kstwobign.sf(lam), abs=1e-12)
    assert p == kolmogorov_sf(lam)


def test_ks_too_few():
    with pytest.raises(DomainError):
        ks_two_sample([1.0], [1.0, 2.0])


# DSC ranking

def test_fractional_ranks():
    assert fractional_ranks([3.0, 1.0, 3.0, 2.0]).tolist() == [3.5, 1.0, 3.5, 2.0]


def test_dsc_identical_runs():
    runs = np.linspace(0, 1, 30)
    assert dsc_rank_instance({a: runs for a in "ABCD"}).tolist() == [2.5] * 4


def test_dsc_separated():
    r = np.random.default_rng(1)
    base = r.random(30)
    ranks = dsc_rank_instance({"A": base + 10, "B": base - 10, "C": base})
    assert ranks.tolist() == [3.0, 1.0, 2.0]


def test_dsc_pair_plus_dominated():
    r = np.random.default_rng(2)
    ranks = dsc_rank_instance({
        "A": r.normal(0, 1, 30), "B": r.normal(0, 1, 30), "C": r.normal(20, 1, 30)
    })
    assert ranks.tolist() == [1.5, 1.5, 3.0]


def test_dsc_non_transitive_falls_back_to_means():
    # A~B, B~C but A and C distinguishable: not a clique partition
    def fake_test(a, b):
        gap = abs(a.mean() - b.mean())
        return gap, 1.0 if gap < 1.5 else 0.0

    runs = {"A": np.full(5, 0.0), "B": np.full(5, 1.0), "C": np.full(5, 2.0)}
    assert dsc_rank_instance(runs, test=fake_test).tolist() == [1.0, 2.0, 3.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_dsc_rank_sum_identity(seed, m):
    r = np.random.default_rng(seed)
    runs = {f"a{i}": r.normal(r.integers(0, 3), 1, 15) for i in range(m)}
    ranks = dsc_rank_instance(runs)
    assert ranks.sum() == pytest.approx(m * (m + 1) / 2, abs=1e-12)
    assert np.all((ranks >= 1) & (ranks <= m))


def test_dsc_needs_two():
    with pytest.raises(DomainError):
        dsc_rank_instance({"A": [1.0, 2.0]})


def _perf(n, algs=("A", "B", "C"), seed=0, shift=None):
    r = np.random.default_rng(seed)
    shift = shift or {}
    return make_perf({
        k: {a: np.abs(r.normal(shift.get(a, 0.0), 1, 20)) for a in algs} for k in keys_for(n)
    })


def test_ranking_matrix_shapes():
    perf = _perf(21)
    keys = perf.keys
    one = build_ranking_matrix(perf, keys[:1])
    assert one.ranks.shape == (1, 3)
    full = build_ranking_matrix(perf, keys)
    assert full.ranks.shape == (21, 3)
    assert np.all(full.ranks.sum(axis=1) == 6)
    dup = build_ranking_matrix(perf, [keys[0], keys[0]])
    assert dup.ranks[0].tolist() == dup.ranks[1].tolist()


def test_ranking_matrix_coverage_hole():
    k = keys_for(2)
    perf = make_perf({k[0]: {"A": [1, 2], "B": [1, 2]}, k[1]: {"A": [1, 2]}})
    with pytest.raises(CoverageError):
        build_ranking_matrix(perf, k, algorithms=["A", "B"])


# Friedman

def test_friedman_hand_case():
    with pytest.warns(StatisticalPreconditionWarning):
        fr = friedman_test(ranking([[1, 2, 3]] * 4))
    assert fr.statistic == 8.0
    assert fr.df == 2
    # chi-square with 2 df has upper tail exp(-x/2)
    assert fr.p_value == pytest.approx(math.exp(-4.0), abs=1e-12)
    assert fr.p_value == pytest.approx(0.0183, abs=1e-4)


def test_friedman_all_tied():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StatisticalPreconditionWarning)
        fr = friedman_test(ranking([[2, 2, 2]] * 5))
    assert fr.statistic == 0.0 and fr.p_value == 1.0


def test_friedman_warns_below_minimum():
    with pytest.warns(StatisticalPreconditionWarning):
        friedman_test(ranking([[1, 2, 3]] * 9))
    with warnings.catch_warnings():
        warnings.simplefilter("error", StatisticalPreconditionWarning)
        friedman_test(ranking([[1, 2, 3]] * 10))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(10, 40), st.integers(2, 6))
def test_friedman_against_scipy(seed, n, k):
    r = np.random.default_rng(seed)
    rows = np.array([r.permutation(k) + 1 for _ in range(n)], dtype=float)
    fr = friedman_test(ranking(rows))
    if k >= 3:
        ref = sps.friedmanchisquare(*rows.T)
        assert fr.statistic == pytest.approx(ref.statistic, abs=1e-9)
        assert fr.p_value == pytest.approx(ref.pvalue, abs=1e-9)


# Nemenyi

def test_nemenyi_equal_means():
    out = nemenyi_posthoc(ranking([[1, 2], [2, 1]] * 6))
    assert out[0].p_value == 1.0 and out[0].bit == 1


def test_nemenyi_monte_carlo_oracle():
    rows = [[1.2, 2.0, 2.8]] * 21
    out = {o.pair: o for o in nemenyi_posthoc(ranking(rows))}
    extreme = out[("A", "C")]
    assert extreme.p_value < 0.05 and extreme.bit == 0
    # Monte-Carlo estimate of the range of three standard normals
    z = 1.6 / math.sqrt(3 * 4 / (6 * 21))
    q = z * math.sqrt(2)
    r = np.random.default_rng(2024)
    hits = 0
    total = 10_000_000
    for _ in range(10):
        x = r.standard_normal((total // 10, 3))
        hits += int(np.count_nonzero(np.ptp(x, axis=1) >= q))
    assert abs(extreme.p_value - hits / total) < 0.005


def test_pairwise_outcome_cell():
    o = PairwiseOutcome("A", "B", 0.333, 0.05)
    assert o.cell() == "0.33/1"
    assert PairwiseOutcome("A", "B", 0.01).cell() == "0.01/0"
    assert PairwiseOutcome("A", "B", 0.05).bit == 1


# comparisons and robustness

def test_relabelled_identical_algorithms():
    r = np.random.default_rng(5)
    data = {}
    for k in keys_for(12):
        runs = np.abs(r.normal(0, 1, 20))
        data[k] = {a: runs for a in ("A", "B", "C")}
    comp = compare_on_suite(make_perf(data), list(data))
    assert set(comp.bits().values()) == {1}
    assert "omnibus-not-rejected" in comp.flags


def test_dominated_algorithm_flagged():
    perf = _perf(15, shift={"C": 30.0})
    comp = compare_on_suite(perf, perf.keys)
    bits = comp.bits()
    assert bits[("A", "C")] == 0 and bits[("B", "C")] == 0
    assert bits[("A", "B")] == 1
    assert comp.omnibus_rejected and comp.flags == []


def test_small_suite_flag():
    perf = _perf(4)
    with pytest.warns(StatisticalPreconditionWarning):
        comp = compare_on_suite(perf, perf.keys)
    assert "below-friedman-minimum" in comp.flags


def test_robustness_same_suite_repeated():
    perf = _perf(12, shift={"C": 0.8}, seed=3)
    rep = robustness_count(perf, [perf.keys] * 30)
    assert rep.repetitions == 30
    assert all(c in (0, 30) for c in rep.counts.values())
    pv = rep.p_values()
    assert all(len(set(v)) == 1 for v in pv.values())
    assert rep.parameters["alpha"] == 0.05


def test_robustness_warns_once_for_small_suites():
    perf = _perf(12)
    with pytest.warns(StatisticalPreconditionWarning) as rec:
        robustness_count(perf, [perf.keys[:5], perf.keys[5:]])
    assert len([w for w in rec if w.category is StatisticalPreconditionWarning]) == 1


def test_robustness_empty():
    with pytest.raises(DomainError):
        robustness_count(_perf(2), [])
