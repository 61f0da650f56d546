"""DSC ranking, Friedman test, Nemenyi post-hoc and robustness counting.

Per instance, algorithms are ranked from their whole run distributions
(pairwise two-sample KS tests with Bonferroni correction). The ranks over a
suite feed a Friedman omnibus test and Nemenyi pairwise comparisons, whose
p-values are translated to bits: 1 = no significant difference, 0 =
significant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from selector.datamodel import InstanceKey, PerformanceTable
from selector.distributions import chi2_sf, kolmogorov_sf, studentized_range_sf
from selector.errors import CoverageError, DomainError, StatisticalPreconditionWarning

ALPHA = 0.05
FRIEDMAN_MIN_INSTANCES = 10


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sided two-sample Kolmogorov-Smirnov test with asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) < 2 or len(b) < 2:
        raise DomainError("KS test needs at least 2 values per sample")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = len(a) * len(b) / (len(a) + len(b))
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return d, kolmogorov_sf(lam)


def fractional_ranks(values) -> np.ndarray:
    """Ranks 1..n (ascending), ties share the average of the positions they span."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _cliques(related: np.ndarray):
    """Components of the relation if each is a clique, else None."""
    m = len(related)
    seen = [False] * m
    comps = []
    for s in range(m):
        if seen[s]:
            continue
        comp, stack = [], [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(related[u]).tolist():
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comp.sort()
        if not all(related[u, v] for u, v in combinations(comp, 2)):
            return None
        comps.append(comp)
    return comps


def dsc_rank_instance(runs: dict, alpha: float = ALPHA, test=ks_two_sample) -> np.ndarray:
    """DSC ranks for one instance, in the order of ``runs``' keys (lower values win).

    Algorithms whose corrected pairwise p-value is >= alpha are indistinguishable.
    If that relation splits into cliques, the cliques are ordered by mean of
    member run-means and share the average of the positions they span;
    otherwise ranks fall back to fractional ranking of the run means.
    """
    names = list(runs)
    m = len(names)
    if m < 2:
        raise DomainError("need at least 2 algorithms to rank")
    samples = [np.asarray(runs[n], dtype=float) for n in names]
    for n, s in zip(names, samples):
        if len(s) < 2:
            raise DomainError(f"algorithm {n!r} has fewer than 2 runs")
    n_pairs = m * (m - 1) // 2
    related = np.eye(m, dtype=bool)
    for i, j in combinations(range(m), 2):
        _, p = test(samples[i], samples[j])
        related[i, j] = related[j, i] = min(1.0, p * n_pairs) >= alpha
    means = np.array([s.mean() for s in samples])
    cliques = _cliques(related)
    if cliques is None:
        return fractional_ranks(means)
    cliques.sort(key=lambda c: (float(np.mean(means[c])), c[0]))
    ranks = np.empty(m)
    pos = 0
    for c in cliques:
        ranks[c] = pos + (len(c) + 1) / 2
        pos += len(c)
    return ranks


@dataclass(frozen=True)
class RankingMatrix:
    instances: tuple[InstanceKey, ...]
    algorithms: tuple[str, ...]
    ranks: np.ndarray

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def build_ranking_matrix(
    perf: PerformanceTable, suite, alpha: float = ALPHA, algorithms=None
) -> RankingMatrix:
    algorithms = tuple(algorithms or perf.algorithms)
    suite = tuple(suite)
    for key in suite:
        for alg in algorithms:
            if not perf.has(key, alg):
                raise CoverageError(f"no runs for instance {key} and algorithm {alg!r}")
    rows = [
        dsc_rank_instance({a: perf.runs(key, a) for a in algorithms}, alpha) for key in suite
    ]
    ranks = np.array(rows, dtype=float).reshape(len(suite), len(algorithms))
    ranks.setflags(write=False)
    return RankingMatrix(suite, algorithms, ranks)


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    df: int
    p_value: float


def friedman_test(ranks: RankingMatrix) -> FriedmanResult:
    r = ranks.ranks
    n, k = r.shape
    if n < 2 or k < 2:
        raise DomainError(f"Friedman test needs N >= 2 and k >= 2 (got N={n}, k={k})")
    if n < FRIEDMAN_MIN_INSTANCES:
        warnings.warn(
            f"Friedman test on {n} instances (below the {FRIEDMAN_MIN_INSTANCES}-instance minimum)",
            StatisticalPreconditionWarning,
            stacklevel=2,
        )
    # exact arithmetic: DSC ranks are multiples of 1/2
    sums = [sum(Fraction(float(v)) for v in r[:, j]) for j in range(k)]
    chi = Fraction(12, n * k * (k + 1)) * sum(s * s for s in sums) - 3 * n * (k + 1)
    stat = max(0.0, float(chi))
    p = 1.0 if stat == 0 else chi2_sf(stat, k - 1)
    return FriedmanResult(stat, k - 1, p)


@dataclass(frozen=True)
class PairwiseOutcome:
    first: str
    second: str
    p_value: float
    alpha: float = ALPHA

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha

    @property
    def bit(self) -> int:
        """1 = no significant difference, 0 = significant."""
        return 0 if self.significant else 1

    @property
    def pair(self) -> tuple[str, str]:
        return (self.first, self.second)

    def cell(self) -> str:
        return f"{self.p_value:.2f}/{self.bit}"


def nemenyi_posthoc(ranks: RankingMatrix, alpha: float = ALPHA) -> list[PairwiseOutcome]:
    n, k = ranks.ranks.shape
    if n < 1 or k < 2:
        raise DomainError("Nemenyi test needs N >= 1 and k >= 2")
    mean = ranks.mean_ranks
    se = math.sqrt(k * (k + 1) / (6.0 * n))
    out = []
    for i, j in combinations(range(k), 2):
        z = abs(mean[i] - mean[j]) / se
        p = studentized_range_sf(z * math.sqrt(2.0), k)
        out.append(PairwiseOutcome(ranks.algorithms[i], ranks.algorithms[j], p, alpha))
    return out


@dataclass(frozen=True)
class Comparison:
    ranking: RankingMatrix
    friedman: FriedmanResult
    outcomes: tuple[PairwiseOutcome, ...]
    alpha: float

    @property
    def omnibus_rejected(self) -> bool:
        return self.friedman.p_value < self.alpha

    @property
    def flags(self) -> list[str]:
        flags = []
        if not self.omnibus_rejected:
            flags.append("omnibus-not-rejected")
        if len(self.ranking.instances) < FRIEDMAN_MIN_INSTANCES:
            flags.append("below-friedman-minimum")
        return flags

    def bits(self) -> dict[tuple[str, str], int]:
        return {o.pair: o.bit for o in self.outcomes}


def compare_on_suite(
    perf: PerformanceTable, suite, alpha: float = ALPHA, algorithms=None
) -> Comparison:
    """Friedman + Nemenyi on one suite. Post-hoc results are always produced."""
    ranking = build_ranking_matrix(perf, suite, alpha, algorithms)
    fr = friedman_test(ranking)
    return Comparison(ranking, fr, tuple(nemenyi_posthoc(ranking, alpha)), alpha)


@dataclass(frozen=True)
class RobustnessReport:
    pairs: tuple[tuple[str, str], ...]
    counts: dict  # pair -> number of suites with bit 1
    repetitions: int
    comparisons: tuple[Comparison, ...]
    parameters: dict = field(default_factory=dict)

    def p_values(self) -> dict:
        return {
            pair: [c.outcomes[i].p_value for c in self.comparisons]
            for i, pair in enumerate(self.pairs)
        }


def robustness_count(
    perf: PerformanceTable, suites, alpha: float = ALPHA, algorithms=None,
    parameters: dict | None = None,
) -> RobustnessReport:
    """Count, per algorithm pair, the suites on which no significant difference is found."""
    suites = [tuple(s) for s in suites]
    if not suites:
        raise DomainError("need at least one suite")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StatisticalPreconditionWarning)
        comps = tuple(compare_on_suite(perf, s, alpha, algorithms) for s in suites)
    if any(len(s) < FRIEDMAN_MIN_INSTANCES for s in suites):
        warnings.warn(
            f"some suites have fewer than {FRIEDMAN_MIN_INSTANCES} instances",
            StatisticalPreconditionWarning,
            stacklevel=2,
        )
    pairs = tuple(o.pair for o in comps[0].outcomes)
    counts = {p: sum(c.outcomes[i].bit for c in comps) for i, p in enumerate(pairs)}
    params = {"alpha": alpha, **(parameters or {})}
    return RobustnessReport(pairs, counts, len(suites), comps, params)
