"""Desk-scale experiment data: synthetic problems, toy optimizers, fixed-budget runs.

Problems are minimised inside a box; performance is the target precision
(best value found minus the known optimum), clamped at zero. A run stops when
the budget is spent or the precision drops to ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from selector.datamodel import InstanceKey, PerformanceTable, PerfRecord
from selector.errors import DomainError
from selector.parallel import ordered_map
from selector.rng import derive_seed, make_rng

EPS_TARGET = 1e-8
BUDGET_PER_DIM = 2000
PAPER_BUDGET = 100_000
BOX = (-5.0, 5.0)


def _cond_weights(d, power=6.0):
    if d == 1:
        return np.ones(1)
    return 10.0 ** (power * np.arange(d) / (d - 1))


def sphere(z):
    return np.sum(z**2, axis=1)


def ellipsoid(z):
    return (z**2) @ _cond_weights(z.shape[1])


def rastrigin(z):
    d = z.shape[1]
    return 10.0 * d + np.sum(z**2 - 10.0 * np.cos(2 * np.pi * z), axis=1)


def rosenbrock(z):
    x = z + 1.0
    if x.shape[1] == 1:
        return z[:, 0] ** 2
    return np.sum(100.0 * (x[:, 1:] - x[:, :-1] ** 2) ** 2 + (1.0 - x[:, :-1]) ** 2, axis=1)


def discus(z):
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def different_powers(z):
    d = z.shape[1]
    exps = 2.0 + 4.0 * np.arange(d) / max(d - 1, 1)
    return np.sqrt(np.sum(np.abs(z) ** exps, axis=1))


def ackley(z):
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.mean(z**2, axis=1)))
    b = -np.exp(np.mean(np.cos(2 * np.pi * z), axis=1))
    return np.maximum(a + b + 20.0 + np.e, 0.0)


def griewank(z):
    x = 60.0 * z
    i = np.sqrt(np.arange(1, z.shape[1] + 1))
    return 1.0 + np.sum(x**2, axis=1) / 4000.0 - np.prod(np.cos(x / i), axis=1)


def schwefel_1_2(z):
    return np.sum(np.cumsum(z, axis=1) ** 2, axis=1)


def sharp_ridge(z):
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))


def levy(z):
    w = 1.0 + z / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:, :-1] + 1) ** 2), axis=1)
    tail = (w[:, -1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


BASE_FUNCTIONS = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "rastrigin": rastrigin,
    "rosenbrock": rosenbrock,
    "discus": discus,
    "bent_cigar": bent_cigar,
    "different_powers": different_powers,
    "ackley": ackley,
    "griewank": griewank,
    "schwefel_1_2": schwefel_1_2,
    "sharp_ridge": sharp_ridge,
    "levy": levy,
}


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class ProblemSpec:
    """f(x) = base(R (x - x_opt)) + f_opt on the box ``bounds``."""

    name: str
    key: InstanceKey
    bounds: tuple[tuple[float, float], ...]
    x_opt: np.ndarray
    rotation: np.ndarray
    known_optimum_value: float = 0.0

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    def evaluate_many(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x - self.x_opt) @ self.rotation.T
        return BASE_FUNCTIONS[self.name](z) + self.known_optimum_value

    def evaluator(self, x) -> float:
        return float(self.evaluate_many(np.asarray(x, dtype=float)[None, :])[0])


def make_problem(name: str, d: int, instance_id: int = 1, seed: int = 0,
                 suite: str = "SYN", rotation=None) -> ProblemSpec:
    """Instance 1 is the untransformed function; later instances are shifted and rotated."""
    if name not in BASE_FUNCTIONS:
        raise DomainError(f"unknown function {name!r}")
    if d < 1:
        raise DomainError("dimension must be >= 1")
    pid = list(BASE_FUNCTIONS).index(name) + 1
    bounds = tuple(BOX for _ in range(d))
    if instance_id == 1:
        x_opt, rot, f_opt = np.zeros(d), np.eye(d), 0.0
    else:
        rng = make_rng(seed, pid, instance_id, d)
        x_opt = rng.uniform(-4.0, 4.0, d)
        rot = random_rotation(d, rng)
        f_opt = round(float(rng.uniform(-100.0, 100.0)), 2)
    if rotation is not None:
        rot = np.asarray(rotation, dtype=float)
    return ProblemSpec(name, InstanceKey(suite, pid, instance_id, d), bounds, x_opt, rot, f_opt)


def builtin_problems(d: int, instances: int = 1, seed: int = 0, suite: str = "SYN"):
    """All base functions times ``instances`` instances, function-major order."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    return [
        make_problem(name, d, inst, seed, suite)
        for name in BASE_FUNCTIONS
        for inst in range(1, instances + 1)
    ]


@dataclass(frozen=True)
class RunRecord:
    problem: InstanceKey
    algorithm: str
    seed: int
    best_precision: float
    evaluations_used: int
    clamped: int
    trace: tuple[tuple[int, float], ...] = ()


class _Stop(Exception):
    pass


class Evaluator:
    """Budget- and target-aware wrapper around a problem; raises _Stop when done."""

    def __init__(self, problem: ProblemSpec, budget: int, eps: float, trace: bool = False):
        self.problem = problem
        self.budget = budget
        self.eps = eps
        self.lower = np.array([b[0] for b in problem.bounds])
        self.upper = np.array([b[1] for b in problem.bounds])
        self.used = 0
        self.clamped = 0
        self.best = math.inf
        self.trace = [] if trace else None

    def clamp(self, x: np.ndarray) -> np.ndarray:
        y = np.clip(x, self.lower, self.upper)
        if y.ndim == 1:
            self.clamped += int(np.any(y != x))
        else:
            self.clamped += int(np.count_nonzero(np.any(y != x, axis=1)))
        return y

    def many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate rows in order; stops after the budget or the target is reached."""
        xs = np.atleast_2d(xs)[: self.budget - self.used]
        vals = self.problem.evaluate_many(xs)
        prec = np.maximum(vals - self.problem.known_optimum_value, 0.0)
        hit = np.flatnonzero(prec <= self.eps)
        stop = len(hit) > 0
        upto = int(hit[0]) + 1 if stop else len(prec)
        running = np.minimum.accumulate(np.concatenate([[self.best], prec[:upto]]))[1:]
        if self.trace is not None:
            self.trace.extend(zip(range(self.used + 1, self.used + upto + 1), running.tolist()))
        self.best = float(running[-1]) if upto else self.best
        self.used += upto
        if stop or self.used >= self.budget:
            raise _Stop
        return vals

    def __call__(self, x: np.ndarray) -> float:
        return float(self.many(x[None, :])[0])


def random_search(ev: Evaluator, rng: np.random.Generator) -> None:
    while True:
        ev.many(rng.uniform(ev.lower, ev.upper, (256, len(ev.lower))))


def one_plus_one_es(ev: Evaluator, rng: np.random.Generator) -> None:
    """(1+1)-ES with the 1/5th success rule and restarts on step-size collapse."""
    d = len(ev.lower)
    span = ev.upper - ev.lower
    up = math.exp(1.0 / math.sqrt(d + 1))
    down = up ** -0.25
    while True:
        x = rng.uniform(ev.lower, ev.upper)
        fx = ev(x)
        sigma = 0.2
        while sigma > 1e-12:
            y = ev.clamp(x + sigma * span * rng.standard_normal(d))
            fy = ev(y)
            if fy <= fx:
                x, fx = y, fy
                sigma *= up
            else:
                sigma *= down


def differential_evolution(ev: Evaluator, rng: np.random.Generator) -> None:
    """DE/rand/1/bin with F = 0.5, CR = 0.9, generational replacement."""
    d = len(ev.lower)
    npop = max(10, 5 * d)
    pop = rng.uniform(ev.lower, ev.upper, (npop, d))
    fit = ev.many(pop)
    while True:
        idx = np.array([rng.choice(np.delete(np.arange(npop), i), 3, replace=False)
                        for i in range(npop)])
        mutant = pop[idx[:, 0]] + 0.5 * (pop[idx[:, 1]] - pop[idx[:, 2]])
        cross = rng.random((npop, d)) < 0.9
        cross[np.arange(npop), rng.integers(d, size=npop)] = True
        trial = ev.clamp(np.where(cross, mutant, pop))
        f_trial = ev.many(trial)
        better = f_trial <= fit
        pop[better] = trial[better]
        fit[better] = f_trial[better]


OPTIMIZERS = {
    "random_search": random_search,
    "one_plus_one_es": one_plus_one_es,
    "de": differential_evolution,
}


@dataclass(frozen=True)
class OptimizerSpec:
    """A labelled optimizer; ``budget_factor`` < 1 gives a handicapped variant."""

    label: str
    algorithm: str
    budget_factor: float = 1.0

    def __post_init__(self):
        if self.algorithm not in OPTIMIZERS:
            raise DomainError(f"unknown optimizer {self.algorithm!r}")


DEFAULT_OPTIMIZERS = tuple(OptimizerSpec(n, n) for n in OPTIMIZERS)


def _as_spec(o) -> OptimizerSpec:
    return o if isinstance(o, OptimizerSpec) else OptimizerSpec(str(o), str(o))


def run_single(problem: ProblemSpec, optimizer, budget: int, seed: int,
               eps: float = EPS_TARGET, trace: bool = False) -> RunRecord:
    spec = _as_spec(optimizer)
    budget = max(1, int(budget * spec.budget_factor))
    ev = Evaluator(problem, budget, eps, trace)
    try:
        OPTIMIZERS[spec.algorithm](ev, make_rng(seed))
    except _Stop:
        pass
    return RunRecord(
        problem.key, spec.label, seed, ev.best, ev.used, ev.clamped,
        tuple(ev.trace) if trace else (),
    )


def run_records(problems, optimizers=DEFAULT_OPTIMIZERS, budget: int | None = None,
                runs: int = 30, eps: float = EPS_TARGET, master_seed: int = 0,
                budget_per_dim: int = BUDGET_PER_DIM, trace: bool = False) -> list[RunRecord]:
    if runs < 1:
        raise DomainError("runs must be >= 1")
    if budget is not None and budget < 1:
        raise DomainError("budget must be >= 1")
    specs = [_as_spec(o) for o in optimizers]
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise DomainError("optimizer labels must be unique")
    tasks = [
        (pi, p, oi, o, r)
        for pi, p in enumerate(problems)
        for oi, o in enumerate(specs)
        for r in range(runs)
    ]

    def task(t):
        pi, p, oi, o, r = t
        b = budget if budget is not None else budget_per_dim * p.dimension
        return run_single(p, o, b, derive_seed(master_seed, pi, oi, r), eps, trace)

    return ordered_map(task, tasks)


def run_experiment(problems, optimizers=DEFAULT_OPTIMIZERS, budget: int | None = None,
                   runs: int = 30, eps: float = EPS_TARGET, master_seed: int = 0,
                   budget_per_dim: int = BUDGET_PER_DIM) -> PerformanceTable:
    """Fixed-budget runs of every optimizer on every problem.

    ``budget=None`` uses ``budget_per_dim * dimension`` evaluations per run.
    """
    records = run_records(problems, optimizers, budget, runs, eps, master_seed, budget_per_dim)
    runs_by_key: dict = {}
    out = []
    for rec in records:
        r = runs_by_key.setdefault((rec.problem, rec.algorithm), 0)
        runs_by_key[(rec.problem, rec.algorithm)] = r + 1
        out.append(PerfRecord(rec.problem, rec.algorithm, r, rec.best_precision))
    return PerformanceTable(tuple(out))
