"""Differential evolution with classic or fitness-weighted (EDE) recombination, and model selection."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NilmError
from .learn import ANN, ANN_EA, SVM, SplitDataset, accuracy, ea_refine, train_ann, train_svm

CLASSIC, EDE = "classic", "ede"
OF_FLOOR = 1e-12
STALL_EPS = 1e-12


@dataclass(frozen=True)
class GeneSpec:
    name: str
    lo: float
    hi: float
    kind: str = "real"  # "real" | "int"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"gene {self.name}: lower bound {self.lo} must be below upper bound {self.hi}")
        if self.kind not in ("real", "int"):
            raise ConfigError(f"gene {self.name}: kind must be 'real' or 'int'")

    @property
    def rounding(self) -> bool:
        return self.kind == "int"


@dataclass(frozen=True)
class DeConfig:
    M: int = 30
    F_scale: float = 0.5
    mode: str = EDE
    RR: float = 0.9
    max_iters: int = 50
    of_threshold: float = 1e-9
    stall_iters: int = 15
    seed: int = 0
    max_evals: int | None = None

    def __post_init__(self):
        if self.mode not in (CLASSIC, EDE):
            raise ConfigError(f"mode must be {CLASSIC!r} or {EDE!r}")
        if self.M < 4:
            raise ConfigError("differential evolution needs at least 4 individuals")
        if self.F_scale <= 0:
            raise ConfigError("F_scale must be positive")
        if not 0.0 <= self.RR <= 1.0:
            raise ConfigError("RR must lie in [0, 1]")
        if self.max_iters < 0 or self.stall_iters < 1:
            raise ConfigError("max_iters must be >= 0 and stall_iters >= 1")


@dataclass
class Population:
    X: np.ndarray  # (M, G)
    of: np.ndarray  # (M,)
    generation: int = 0

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.of))


@dataclass
class DeResult:
    best_genes: np.ndarray
    best_of: float
    history: list = field(default_factory=list)
    evaluations: int = 0
    stop_reason: str = ""

    def genes_dict(self, specs) -> dict:
        return {s.name: (int(v) if s.rounding else float(v)) for s, v in zip(specs, self.best_genes)}


def _bounds(specs):
    lo = np.array([s.lo for s in specs], dtype=float)
    hi = np.array([s.hi for s in specs], dtype=float)
    integer = np.array([s.rounding for s in specs], dtype=bool)
    return lo, hi, integer


def repair(X, specs) -> np.ndarray:
    """Clamp to bounds and round integer genes (rounded values are clamped again)."""
    lo, hi, integer = _bounds(specs)
    X = np.clip(np.asarray(X, dtype=float), lo, hi)
    if integer.any():
        X[..., integer] = np.clip(np.rint(X[..., integer]), np.ceil(lo[integer]), np.floor(hi[integer]))
    return X


def initial_population(specs, M: int, rng) -> np.ndarray:
    lo, hi, _ = _bounds(specs)
    return repair(lo + rng.random((M, len(specs))) * (hi - lo), specs)


def mutate(pop: Population, F_scale: float, rng, specs) -> np.ndarray:
    """DE/rand/1: U_v = X_a + F*(X_b - X_c) with a, b, c, v all distinct."""
    X = pop.X
    M = len(X)
    if M < 4:
        raise ConfigError("mutation needs at least 4 individuals")
    U = np.empty_like(X)
    for v in range(M):
        others = np.delete(np.arange(M), v)
        a, b, c = rng.choice(others, size=3, replace=False)
        U[v] = X[a] + F_scale * (X[b] - X[c])
    return repair(U, specs)


def ede_fitness(of_u: float, of_x: float) -> tuple[float, float]:
    """Relative fitness of mutant vs original: (of_x/(of_x+of_u), of_u/(of_x+of_u)).

    Objective values are floored at 1e-12; an infinite objective has zero fitness.
    """
    if of_u < 0 or of_x < 0:
        raise ConfigError("objective values must be non-negative")
    u = max(of_u, OF_FLOOR)
    x = max(of_x, OF_FLOOR)
    if math.isinf(u) and math.isinf(x):
        return 0.5, 0.5
    if math.isinf(u):
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    fit_u = (1.0 / u) / (1.0 / x + 1.0 / u)
    return fit_u, 1.0 - fit_u


def acceptance(of_u, of_x, config: DeConfig) -> np.ndarray:
    if config.mode == CLASSIC:
        return np.full(len(of_u), config.RR)
    return np.array([ede_fitness(u, x)[0] for u, x in zip(of_u, of_x)])


def _safe(objective, genes) -> float:
    try:
        val = float(objective(genes))
    except (NilmError, ArithmeticError, np.linalg.LinAlgError):
        return math.inf
    return val if math.isfinite(val) else math.inf


def select(pop: Population, U, of_u, rng, config: DeConfig, objective=None) -> tuple[Population, int]:
    """Gene-wise recombination of X and U; returns the next population and the evaluations spent.

    Individuals that end up a mix of X and U are re-evaluated with
    ``objective``. The current best individual is never replaced by a worse one.
    """
    X, of_x = pop.X, pop.of
    p = acceptance(of_u, of_x, config)
    mask = rng.random(X.shape) < p[:, None]
    nxt = np.where(mask, U, X)
    of = of_x.copy()
    evals = 0
    for v in range(len(X)):
        if np.array_equal(nxt[v], X[v]):
            of[v] = of_x[v]
        elif np.array_equal(nxt[v], U[v]):
            of[v] = of_u[v]
        elif objective is not None:
            of[v] = _safe(objective, nxt[v])
            evals += 1
        else:
            raise ConfigError("mixed individuals need an objective to be re-evaluated")
    elite = pop.best_index
    if of[elite] > of_x[elite]:
        nxt[elite] = X[elite]
        of[elite] = of_x[elite]
    return Population(nxt, of, pop.generation + 1), evals


def run_de(objective, specs, config: DeConfig = DeConfig()) -> DeResult:
    """Minimize ``objective`` over the box given by ``specs``.

    Stops when the best objective falls below ``of_threshold``, stays within
    1e-12 for ``stall_iters`` generations, ``max_iters`` generations have run,
    or the evaluation budget ``max_evals`` is spent.
    """
    specs = list(specs)
    if not specs:
        raise ConfigError("need at least one gene")
    rng = np.random.default_rng(config.seed)
    budget = config.max_evals if config.max_evals is not None else math.inf
    X = initial_population(specs, config.M, rng)
    of = np.array([_safe(objective, x) for x in X])
    evals = len(X)
    pop = Population(X, of, 0)
    history = [_record(pop)]
    stall = 0
    reason = "max_iters"
    for _ in range(config.max_iters):
        if history[-1]["best_of"] < config.of_threshold:
            reason = "threshold"
            break
        if evals + config.M > budget:
            reason = "budget"
            break
        U = mutate(pop, config.F_scale, rng, specs)
        of_u = np.array([_safe(objective, u) for u in U])
        evals += len(U)
        pop, spent = select(pop, U, of_u, rng, config, objective)
        evals += spent
        history.append(_record(pop))
        assert history[-1]["best_of"] <= history[-2]["best_of"], "best objective must not increase"
        if abs(history[-1]["best_of"] - history[-2]["best_of"]) <= STALL_EPS:
            stall += 1
            if stall >= config.stall_iters:
                reason = "validation_stop"
                break
        else:
            stall = 0
    else:
        if history[-1]["best_of"] < config.of_threshold:
            reason = "threshold"
    b = pop.best_index
    return DeResult(pop.X[b].copy(), float(pop.of[b]), history, evals, reason)


def _record(pop: Population) -> dict:
    finite = pop.of[np.isfinite(pop.of)]
    b = pop.best_index
    return {
        "generation": pop.generation,
        "best_of": float(pop.of[b]),
        "mean_of": float(finite.mean()) if len(finite) else math.inf,
        "best_genes": [float(g) for g in pop.X[b]],
    }


def history_csv(result: DeResult, specs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "best_of", "mean_of"] + [s.name for s in specs])
    for row in result.history:
        w.writerow([row["generation"], repr(row["best_of"]), repr(row["mean_of"])] + [repr(g) for g in row["best_genes"]])
    return buf.getvalue()


# --------------------------------------------------------------------------- model selection

GENE_SPACES = {
    ANN: [GeneSpec("n_h", 2, 40, "int")],
    ANN_EA: [GeneSpec("n_h", 2, 40, "int"), GeneSpec("m", 0.01, 0.99)],
    SVM: [GeneSpec("log10_gamma", -3.0, 2.0), GeneSpec("log10_cbox", -1.0, 3.0)],
}


def decode_genes(algorithm: str, genes) -> dict:
    if algorithm == ANN:
        return {"n_h": int(genes[0])}
    if algorithm == ANN_EA:
        return {"n_h": int(genes[0]), "m": float(genes[1])}
    if algorithm == SVM:
        return {"gamma": float(10.0 ** genes[0]), "cbox": float(10.0 ** genes[1])}
    raise ConfigError(f"model selection is not defined for {algorithm!r}")


def cv_error(algorithm: str, split: SplitDataset, params: dict, seed: int, n_classes=None, ea_generations: int = 10, ea_g: float = 0.05) -> float:
    """1 - CV accuracy of ``algorithm`` trained with ``params`` under a fixed seed."""
    if algorithm == ANN:
        model = train_ann(split, params["n_h"], seed, n_classes=n_classes)
    elif algorithm == ANN_EA:
        base = train_ann(split, params["n_h"], seed, n_classes=n_classes)
        model = ea_refine(base, split, params["m"], ea_g, ea_generations, seed)
    elif algorithm == SVM:
        model = train_svm(split, params["gamma"], params["cbox"], n_classes=n_classes)
    else:
        raise ConfigError(f"model selection is not defined for {algorithm!r}")
    return 1.0 - accuracy(model.predict(split.cv.X), split.cv.y)


@dataclass
class Selection:
    algorithm: str
    params: dict
    cv_error: float
    result: DeResult
    calls: int


def model_select(algorithm: str, split: SplitDataset, config: DeConfig = DeConfig(), train_seed: int | None = None, n_classes=None) -> Selection:
    """Tune the algorithm's setup parameters by DE/EDE on CV prediction error.

    The objective is deterministic (fixed training seed) and memoized, so
    repeated candidates cost nothing; total objective calls never exceed
    ``M * (max_iters + 1)``.
    """
    if len(split.cv) == 0:
        raise ConfigError("model selection needs a non-empty cross-validation set")
    if algorithm not in GENE_SPACES:
        raise ConfigError(f"model selection is not defined for {algorithm!r}")
    specs = GENE_SPACES[algorithm]
    seed = config.seed if train_seed is None else train_seed
    cache = {}
    calls = 0

    def objective(genes):
        nonlocal calls
        calls += 1
        key = tuple(float(g) for g in genes)
        if key not in cache:
            cache[key] = cv_error(algorithm, split, decode_genes(algorithm, genes), seed, n_classes)
        return cache[key]

    if config.max_evals is None:
        config = replace(config, max_evals=config.M * (config.max_iters + 1))
    res = run_de(objective, specs, config)
    return Selection(algorithm, decode_genes(algorithm, res.best_genes), res.best_of, res, calls)
