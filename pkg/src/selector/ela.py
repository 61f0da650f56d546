"""A subset of exploratory landscape analysis (ELA) features.

Groups: dispersion (16), y-distribution (3), meta-model (9), PCA (8),
nearest-better clustering (5) and information content (5). Level-set features
are not computed. All groups are derived from one sampled design, so no
extra function evaluations are spent beyond the initial sample.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from selector.datamodel import FeatureTable, InstanceKey, median_aggregate
from selector.errors import (
    DegenerateFeatureError,
    DomainError,
    FeatureError,
    FitError,
)
from selector.parallel import ordered_map
from selector.rng import derive_seed, make_rng

DISPERSION_QUANTILES = (0.02, 0.05, 0.10, 0.25)
LHS_CANDIDATES = 50
KDE_GRID_POINTS = 512
IC_SETTLING = 0.05
IC_RATIO = 0.5
RATIO_GUARD = 1e-12


def _quantile_tag(q: float) -> str:
    return f"{int(round(q * 100)):02d}"


DISPERSION_NAMES = tuple(
    f"disp.{kind}_{stat}_{_quantile_tag(q)}"
    for q in DISPERSION_QUANTILES
    for kind in ("ratio", "diff")
    for stat in ("mean", "median")
)
YDIST_NAMES = ("ela_distr.skewness", "ela_distr.kurtosis", "ela_distr.number_of_peaks")
META_NAMES = (
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
)
PCA_NAMES = tuple(
    f"pca.expl_var{pc1}.{mode}_{target}"
    for pc1 in ("", "_PC1")
    for target in ("x", "init")
    for mode in ("cov", "cor")
)
NBC_NAMES = (
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
)
IC_NAMES = ("ic.h_max", "ic.eps.s", "ic.eps.max", "ic.eps.ratio", "ic.m0")
FEATURE_NAMES = (
    DISPERSION_NAMES + YDIST_NAMES + META_NAMES + PCA_NAMES + NBC_NAMES + IC_NAMES
)
DEFAULT_DROP = ("ic.eps.s",)


@dataclass(frozen=True)
class Design:
    points: np.ndarray
    values: np.ndarray
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if pts.shape[0] != vals.shape[0]:
            raise DomainError(f"{pts.shape[0]} points but {vals.shape[0]} values")
        if pts.shape[1] != len(bounds):
            raise DomainError("bounds do not match point dimension")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise DomainError("design contains non-finite entries")
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        if np.any(pts < lo) or np.any(pts > hi):
            raise DomainError("design point outside bounds")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _check_bounds(bounds, d):
    b = np.asarray(bounds, dtype=float)
    if b.shape != (d, 2):
        raise DomainError(f"bounds must have shape ({d}, 2), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise DomainError("bounds must be finite")
    if np.any(b[:, 0] >= b[:, 1]):
        raise DomainError("every lower bound must be below its upper bound")
    return b


def _min_pair_distance(u: np.ndarray) -> float:
    if len(u) < 2:
        return math.inf
    dist, _ = cKDTree(u).query(u, k=2)
    return float(dist[:, 1].min())


def improved_lhs(n: int, d: int, bounds, seed: int, candidates: int = LHS_CANDIDATES) -> np.ndarray:
    """Maximin Latin hypercube: best of ``candidates`` random LHS designs.

    Candidates are scored by their smallest pairwise distance in the unit cube;
    the first candidate reaching the maximum wins.
    """
    if n < 1 or d < 1:
        raise DomainError("n and d must be positive")
    b = _check_bounds(bounds, d)
    rng = make_rng(seed)
    best, best_score = None, -1.0
    for _ in range(max(1, candidates)):
        perm = np.argsort(rng.random((n, d)), axis=0)
        u = (perm + rng.random((n, d))) / n
        score = _min_pair_distance(u)
        if score > best_score:
            best, best_score = u, score
    pts = b[:, 0] + best * (b[:, 1] - b[:, 0])
    return np.clip(pts, b[:, 0], b[:, 1])


def dispersion_features(design: Design, quantiles: Sequence[float] = DISPERSION_QUANTILES) -> dict:
    n = design.n
    order = np.argsort(design.values, kind="stable")
    all_d = pdist(design.points)
    if all_d.size == 0:
        raise FeatureError("dispersion needs at least 2 points")
    mean_all, median_all = all_d.mean(), np.median(all_d)
    if mean_all <= 0 or median_all <= 0:
        raise DegenerateFeatureError("dispersion: all design points coincide")
    out = {}
    for q in quantiles:
        m = math.ceil(q * n - 1e-9)
        if m < 2:
            raise FeatureError(f"dispersion quantile {q} selects {m} point(s); need >= 2")
        sub = pdist(design.points[order[:m]])
        mean_q, median_q = sub.mean(), np.median(sub)
        tag = _quantile_tag(q)
        out[f"disp.ratio_mean_{tag}"] = mean_q / mean_all
        out[f"disp.ratio_median_{tag}"] = median_q / median_all
        out[f"disp.diff_mean_{tag}"] = mean_q - mean_all
        out[f"disp.diff_median_{tag}"] = median_q - median_all
    return out


def silverman_bandwidth(y: np.ndarray) -> float:
    sd = y.std(ddof=1)
    q75, q25 = np.percentile(y, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return 0.9 * spread * len(y) ** (-0.2)


def count_kde_peaks(y: np.ndarray, grid_points: int = KDE_GRID_POINTS) -> int:
    """Local maxima of a Gaussian KDE (Silverman bandwidth) on a fixed grid."""
    y = np.asarray(y, dtype=float)
    h = silverman_bandwidth(y)
    if not h > 0:
        return 1
    grid = np.linspace(y.min() - 3 * h, y.max() + 3 * h, grid_points)
    dens = np.zeros(grid_points)
    for start in range(0, len(y), 4096):
        chunk = y[start:start + 4096]
        dens += np.exp(-0.5 * ((grid[:, None] - chunk[None, :]) / h) ** 2).sum(axis=1)
    slope = np.sign(np.diff(dens))
    slope = slope[slope != 0]
    return max(1, int(np.sum((slope[:-1] > 0) & (slope[1:] < 0))))


def ydist_features(values) -> dict:
    y = np.asarray(values, dtype=float)
    if y.size < 4:
        raise DomainError("y-distribution features need at least 4 values")
    c = y - y.mean()
    m2 = np.mean(c**2)
    if m2 <= 0 or np.ptp(y) == 0:
        raise DegenerateFeatureError(
            "zero variance: skewness and kurtosis undefined",
            partial={"ela_distr.number_of_peaks": 1.0},
        )
    return {
        "ela_distr.skewness": float(np.mean(c**3) / m2**1.5),
        "ela_distr.kurtosis": float(np.mean(c**4) / m2**2 - 3.0),
        "ela_distr.number_of_peaks": float(count_kde_peaks(y)),
    }


def _model_matrix(x: np.ndarray, kind: str) -> np.ndarray:
    n, d = x.shape
    cols = [np.ones(n), *x.T]
    if kind == "lin_w_interact":
        cols += [x[:, i] * x[:, j] for i, j in combinations(range(d), 2)]
    elif kind == "quad_simple":
        cols += [x[:, i] ** 2 for i in range(d)]
    elif kind == "quad_w_interact":
        cols += [x[:, i] * x[:, j] for i, j in combinations_with_replacement(range(d), 2)]
    return np.column_stack(cols)


def fit_linear_model(x: np.ndarray, y: np.ndarray, kind: str):
    """Least-squares fit; returns (coefficients, adjusted R^2)."""
    a = _model_matrix(x, kind)
    n, cols = a.shape
    p = cols - 1
    if n - p - 1 <= 0:
        raise FitError(f"{kind}: {n} points cannot fit {cols} parameters")
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < cols:
        raise FitError(f"{kind}: rank-deficient design matrix ({rank} < {cols})")
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss <= 0:
        raise DegenerateFeatureError(f"{kind}: constant objective values")
    rss = float(np.sum((y - a @ coef) ** 2))
    r2 = 1.0 if rss < 1e-18 * tss else 1.0 - rss / tss
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)
    return coef, min(adj, 1.0)


def metamodel_features(design: Design) -> dict:
    x, y, d = design.points, design.values, design.d
    lin, lin_adj = fit_linear_model(x, y, "lin_simple")
    _, inter_adj = fit_linear_model(x, y, "lin_w_interact")
    quad, quad_adj = fit_linear_model(x, y, "quad_simple")
    _, full_adj = fit_linear_model(x, y, "quad_w_interact")
    lin_abs = np.abs(lin[1:])
    quad_abs = np.abs(quad[1 + d:])
    return {
        "ela_meta.lin_simple.adj_r2": lin_adj,
        "ela_meta.lin_simple.intercept": float(lin[0]),
        "ela_meta.lin_simple.coef.min": float(lin_abs.min()),
        "ela_meta.lin_simple.coef.max": float(lin_abs.max()),
        "ela_meta.lin_simple.coef.max_by_min": float(lin_abs.max() / max(lin_abs.min(), RATIO_GUARD)),
        "ela_meta.lin_w_interact.adj_r2": inter_adj,
        "ela_meta.quad_simple.adj_r2": quad_adj,
        "ela_meta.quad_simple.cond": float(quad_abs.max() / max(quad_abs.min(), RATIO_GUARD)),
        "ela_meta.quad_w_interact.adj_r2": full_adj,
    }


def explained_variance(m: np.ndarray, mode: str) -> np.ndarray:
    """Per-component explained-variance fractions, largest first."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[0] < 2:
        raise DomainError("PCA needs at least 2 points")
    if mode == "cor":
        sd = m.std(axis=0)
        if np.any(sd == 0):
            raise DegenerateFeatureError("PCA on correlation: constant column")
        mat = np.atleast_2d(np.corrcoef(m, rowvar=False))
    elif mode == "cov":
        mat = np.atleast_2d(np.cov(m, rowvar=False))
    else:
        raise ValueError(f"unknown PCA mode {mode!r}")
    eig = np.clip(np.linalg.eigvalsh(mat)[::-1], 0.0, None)
    total = eig.sum()
    if total <= 0:
        raise DegenerateFeatureError("PCA: zero total variance")
    return eig / total


def pca_features(design: Design) -> dict:
    targets = {"x": design.points, "init": np.column_stack([design.points, design.values])}
    out = {}
    for target, m in targets.items():
        for mode in ("cov", "cor"):
            frac = explained_variance(m, mode)
            needed = int(np.searchsorted(np.cumsum(frac), 0.9 - 1e-12) + 1)
            out[f"pca.expl_var.{mode}_{target}"] = min(needed, len(frac)) / len(frac)
            out[f"pca.expl_var_PC1.{mode}_{target}"] = float(frac[0])
    return {k: out[k] for k in PCA_NAMES}


def _safe_cor(a: np.ndarray, b: np.ndarray) -> float:
    if a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def nearest_better(points: np.ndarray, values: np.ndarray, chunk: int = 512):
    """Nearest-neighbour distances, nearest-better distances and indices.

    Points with no strictly better point get index -1 and distance inf.
    """
    n = len(points)
    nn = np.empty(n)
    nb = np.empty(n)
    nb_idx = np.empty(n, dtype=int)
    sq = np.einsum("ij,ij->i", points, points)
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        d2 = sq[rows, None] + sq[None, :] - 2.0 * points[rows] @ points.T
        dist = np.sqrt(np.clip(d2, 0.0, None))
        dist[np.arange(len(rows)), rows] = np.inf
        nn[rows] = dist.min(axis=1)
        dist[values[None, :] >= values[rows, None]] = np.inf
        j = dist.argmin(axis=1)
        nb[rows] = dist[np.arange(len(rows)), j]
        nb_idx[rows] = np.where(np.isfinite(nb[rows]), j, -1)
    return nn, nb, nb_idx


def nbc_features(design: Design) -> dict:
    if design.n < 3:
        raise DomainError("nearest-better clustering needs at least 3 points")
    y = design.values
    if np.ptp(y) == 0:
        raise DegenerateFeatureError("nearest-better clustering: all fitness values equal")
    nn, nb, nb_idx = nearest_better(design.points, y)
    best = nb_idx < 0
    # points without a better neighbour take the largest nearest-better distance of the rest
    nb = np.where(best, nb[~best].max(), nb)
    ratio = nn / np.maximum(nb, RATIO_GUARD)
    indegree = np.bincount(nb_idx[~best], minlength=design.n).astype(float)
    return {
        "nbc.nn_nb.sd_ratio": float(nn.std(ddof=1) / max(nb.std(ddof=1), RATIO_GUARD)),
        "nbc.nn_nb.mean_ratio": float(nn.mean() / max(nb.mean(), RATIO_GUARD)),
        "nbc.nn_nb.cor": _safe_cor(nn, nb),
        "nbc.dist_ratio.coeff_var": float(ratio.std(ddof=1) / max(ratio.mean(), RATIO_GUARD)),
        "nbc.nb_fitness.cor": _safe_cor(indegree, y),
    }


def nearest_neighbor_tour(points: np.ndarray, start: int) -> np.ndarray:
    """Greedy tour: hop to the closest unvisited point, lowest index on ties."""
    n = len(points)
    visited = np.zeros(n, dtype=bool)
    tour = np.empty(n, dtype=int)
    cur = start
    for i in range(n):
        tour[i] = cur
        visited[cur] = True
        if i == n - 1:
            break
        d2 = np.sum((points - points[cur]) ** 2, axis=1)
        d2[visited] = np.inf
        cur = int(np.argmin(d2))
    return tour


def default_eps_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-5, 15, 1000)])


_UNEQUAL_PAIRS = [(a + 1) * 3 + (b + 1) for a in (-1, 0, 1) for b in (-1, 0, 1) if a != b]


def symbols(dy: np.ndarray, eps: float) -> np.ndarray:
    return np.where(dy > eps, 1, np.where(dy < -eps, -1, 0))


def entropy_curve(dy: np.ndarray, eps_grid: np.ndarray) -> np.ndarray:
    """H(eps): base-6 entropy of the six unequal consecutive symbol pairs."""
    if len(dy) < 2:
        raise DomainError("information content needs at least 3 points")
    eps = np.asarray(eps_grid, dtype=float)[:, None]
    s = np.where(dy[None, :] > eps, 1, np.where(dy[None, :] < -eps, -1, 0))
    codes = (s[:, :-1] + 1) * 3 + (s[:, 1:] + 1)
    total = codes.shape[1]
    h = np.zeros(len(eps))
    for c in _UNEQUAL_PAIRS:
        p = (codes == c).sum(axis=1) / total
        nz = p > 0
        h[nz] -= p[nz] * np.log(p[nz]) / np.log(6)
    return h


def partial_information(dy: np.ndarray, eps: float) -> float:
    """Fraction of sign changes among the non-zero symbols."""
    s = symbols(dy, eps)
    s = s[s != 0]
    changes = int(np.count_nonzero(s[1:] != s[:-1])) if len(s) > 1 else 0
    return changes / len(dy)


def ic_from_sequence(y_ordered, eps_grid=None) -> dict:
    """Information content features for fitness values already in tour order.

    eps.s, eps.max and eps.ratio are log10 of the selected thresholds and are
    searched on the positive part of the grid; H_max covers the whole grid.
    """
    y = np.asarray(y_ordered, dtype=float)
    if len(y) < 3:
        raise DomainError("information content needs at least 3 points")
    grid = default_eps_grid() if eps_grid is None else np.asarray(eps_grid, dtype=float)
    dy = np.diff(y)
    h = entropy_curve(dy, grid)
    pos = grid > 0
    pgrid, ph = grid[pos], h[pos]
    if len(pgrid) == 0:
        raise DomainError("eps grid needs positive values")
    settled = np.flatnonzero(ph < IC_SETTLING)
    eps_s = pgrid[settled[0]] if len(settled) else pgrid[-1]
    eps_max = pgrid[int(np.argmax(ph))]
    m0 = partial_information(dy, 0.0)
    eps_ratio = pgrid[-1]
    for e in pgrid:
        if partial_information(dy, e) <= IC_RATIO * m0:
            eps_ratio = e
            break
    return {
        "ic.h_max": float(h.max()),
        "ic.eps.s": math.log10(eps_s),
        "ic.eps.max": math.log10(eps_max),
        "ic.eps.ratio": math.log10(eps_ratio),
        "ic.m0": m0,
    }


def ic_features(design: Design, seed: int = 0, eps_grid=None) -> dict:
    if design.n < 3:
        raise DomainError("information content needs at least 3 points")
    start = int(make_rng(seed).integers(design.n))
    tour = nearest_neighbor_tour(design.points, start)
    return ic_from_sequence(design.values[tour], eps_grid)


def compute_features(design: Design, seed: int = 0) -> dict:
    """All feature groups for one design, keyed by feature name in canonical order."""
    out = {}
    out.update(dispersion_features(design))
    out.update(ydist_features(design.values))
    out.update(metamodel_features(design))
    out.update(pca_features(design))
    out.update(nbc_features(design))
    out.update(ic_features(design, seed))
    return {k: float(out[k]) for k in FEATURE_NAMES}


def sample_design(problem, n: int, seed: int) -> Design:
    pts = improved_lhs(n, problem.dimension, problem.bounds, seed)
    return Design(pts, problem.evaluate_many(pts), problem.bounds)


class FeatureExtractionError(FeatureError):
    """Some instances failed; ``table`` holds the rows that succeeded."""

    def __init__(self, failures, table):
        lines = "; ".join(f"{k}: {msg}" for k, msg in failures)
        super().__init__(f"{len(failures)} instance(s) dropped: {lines}")
        self.failures = failures
        self.table = table


@dataclass
class ExtractionSettings:
    repetitions: int = 30
    seed: int = 0
    sample_factor: int = 800
    drop: tuple[str, ...] = field(default=DEFAULT_DROP)


def _extract_one(args):
    idx, problem, cfg = args
    n = cfg.sample_factor * problem.dimension
    rows = []
    for rep in range(cfg.repetitions):
        s = derive_seed(cfg.seed, idx, rep)
        design = sample_design(problem, n, s)
        rows.append(compute_features(design, seed=derive_seed(s, 1)))
    return rows


def extract_features(
    problems,
    repetitions: int = 30,
    seed: int = 0,
    sample_factor: int = 800,
    drop: Sequence[str] = DEFAULT_DROP,
) -> FeatureTable:
    """Median over ``repetitions`` independent designs per problem.

    ``problems`` need ``key``, ``dimension``, ``bounds`` and ``evaluate_many``.
    Raises FeatureExtractionError if any instance fails; rows that worked are
    available on the exception.
    """
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    missing = [c for c in drop if c not in FEATURE_NAMES]
    if missing:
        raise DomainError(f"unknown feature(s) to drop: {', '.join(missing)}")
    cfg = ExtractionSettings(repetitions, seed, sample_factor, tuple(drop))
    problems = list(problems)

    def task(args):
        try:
            return _extract_one(args)
        except FeatureError as exc:
            return exc

    results = ordered_map(task, [(i, p, cfg) for i, p in enumerate(problems)])
    keep = [n for n in FEATURE_NAMES if n not in cfg.drop]
    keys: list[InstanceKey] = []
    per_rep: list[list[list[float]]] = [[] for _ in range(repetitions)]
    failures = []
    for problem, res in zip(problems, results):
        if isinstance(res, Exception):
            failures.append((str(problem.key), f"{type(res).__name__}: {res}"))
            continue
        keys.append(problem.key)
        for rep, feats in enumerate(res):
            per_rep[rep].append([feats[n] for n in keep])
    tables = [
        FeatureTable(keys, keep, np.array(rows, dtype=float).reshape(len(keys), len(keep)))
        for rows in per_rep
    ]
    table = median_aggregate(tables)
    if failures:
        raise FeatureExtractionError(failures, table)
    return table
