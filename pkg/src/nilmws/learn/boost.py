"""Multi-class AdaBoost over one-feature decision stumps.

Two variants share the stump search space. ``samme`` boosts stumps whose
leaves each vote one class. ``mh`` boosts stumps carrying a +/-1 vote per
class (the sign flips across the threshold) under a Hamming-style weight
over (example, class) pairs; with more than a handful of classes it is the
variant that actually converges, since two-leaf class stumps can only ever
name two classes at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .data import SplitDataset

EPS_FLOOR = 1e-10


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left: int  # class voted when x[feature] <= threshold
    right: int

    def predict(self, X) -> np.ndarray:
        return np.where(np.asarray(X)[:, self.feature] <= self.threshold, self.left, self.right)


def best_stump(X, y, w, n_classes: int) -> tuple[Stump, float]:
    """Exhaustive search over features and midpoint thresholds; leaves vote their heaviest class."""
    X = np.asarray(X, dtype=float)
    n, f = X.shape
    W = np.zeros((n, n_classes))
    W[np.arange(n), y] = w
    total = W.sum(axis=0)
    fallback = int(np.argmax(total))
    best = (Stump(0, math.inf, fallback, fallback), 1.0 - total[fallback])
    for j in range(f):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cum = np.cumsum(W[order], axis=0)[:-1]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if len(valid) == 0:
            continue
        left = cum[valid]
        right = total - left
        err = 1.0 - (left.max(axis=1) + right.max(axis=1))
        k = int(np.argmin(err))
        if err[k] < best[1] - 1e-15:
            pos = valid[k]
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            best = (Stump(j, float(thr), int(np.argmax(left[k])), int(np.argmax(right[k]))), float(err[k]))
    return best


def samme_alpha(eps: float, n_classes: int) -> float:
    return math.log((1.0 - eps) / eps) + math.log(n_classes - 1)


@dataclass(frozen=True)
class VoteStump:
    feature: int
    threshold: float
    votes: tuple  # +/-1 per class, emitted above the threshold; negated at or below it

    def outputs(self, X) -> np.ndarray:
        phi = np.where(np.asarray(X)[:, self.feature] > self.threshold, 1.0, -1.0)
        return phi[:, None] * np.array(self.votes, dtype=float)[None, :]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.outputs(X), axis=1)


def best_vote_stump(X, y, W, n_classes: int) -> tuple[VoteStump, float]:
    """Stump maximizing the edge sum_l |sum_i W[i,l] Y[i,l] phi(x_i)| over features and midpoints."""
    X = np.asarray(X, dtype=float)
    n, f = X.shape
    Y = -np.ones((n, n_classes))
    Y[np.arange(n), y] = 1.0
    WY = W * Y
    total = WY.sum(axis=0)
    best_edge = float(np.abs(total).sum())
    best = VoteStump(0, -math.inf, tuple(np.where(total >= 0, 1, -1).tolist()))
    for j in range(f):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if len(valid) == 0:
            continue
        gamma = total - 2.0 * np.cumsum(WY[order], axis=0)[valid]
        edges = np.abs(gamma).sum(axis=1)
        k = int(np.argmax(edges))
        if edges[k] > best_edge + 1e-15:
            pos = valid[k]
            best_edge = float(edges[k])
            best = VoteStump(j, float(0.5 * (xs[pos] + xs[pos + 1])), tuple(np.where(gamma[k] >= 0, 1, -1).tolist()))
    return best, best_edge


@dataclass(frozen=True)
class BoostModel:
    rounds: tuple  # ((Stump, alpha), ...)
    n_classes: int
    n_features: int
    prior: int = 0

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    def scores(self, X, upto: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        s = np.zeros((len(X), self.n_classes))
        if not self.rounds:
            s[:, self.prior] = 1.0
        for stump, alpha in self.rounds[:upto]:
            if isinstance(stump, VoteStump):
                s += alpha * stump.outputs(X)
            else:
                s[np.arange(len(X)), stump.predict(X)] += alpha
        return s

    def predict(self, X, upto: int | None = None) -> np.ndarray:
        return np.argmax(self.scores(X, upto), axis=1)


SAMME, MH = "samme", "mh"


def train_adaboost(split: SplitDataset, T: int = 50, seed: int = 0, n_classes: int | None = None,
                   trace: list | None = None, variant: str = SAMME) -> BoostModel:
    """Boosted stumps; stops early on a perfect stump or one no better than chance.

    ``trace`` collects each kept round's weighted error.

    ``seed`` is accepted for interface symmetry; the stump search is exhaustive
    and ties resolve to the lowest feature index, so training is deterministic.
    """
    if T < 1:
        raise ConfigError("T must be at least 1")
    if variant not in (SAMME, MH):
        raise ConfigError(f"AdaBoost variant must be {SAMME!r} or {MH!r}")
    train = split.train
    if len(train) == 0:
        raise ConfigError("empty training set")
    c = n_classes or max(split.n_classes, 2)
    X, y = train.X, train.y
    if variant == MH:
        return _train_mh(X, y, T, c, trace)
    w = np.full(len(y), 1.0 / len(y))
    rounds = []
    for _ in range(T):
        stump, _ = best_stump(X, y, w, c)
        miss = stump.predict(X) != y
        eps = float(w[miss].sum())
        if eps >= 1.0 - 1.0 / c:
            break
        alpha = samme_alpha(max(eps, EPS_FLOOR), c)
        rounds.append((stump, alpha))
        if trace is not None:
            trace.append(eps)
        if eps <= 0.0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    prior = int(np.argmax(np.bincount(y, minlength=c)))
    return BoostModel(tuple(rounds), c, X.shape[1], prior)


def _train_mh(X, y, T, c, trace) -> BoostModel:
    n = len(y)
    Y = -np.ones((n, c))
    Y[np.arange(n), y] = 1.0
    # half the mass on the true label, half spread over the others
    W = np.where(Y > 0, 0.5 / n, 0.5 / (n * (c - 1)))
    rounds = []
    for _ in range(T):
        stump, edge = best_vote_stump(X, y, W, c)
        eps = 0.5 * (1.0 - edge)
        if eps >= 0.5:
            break
        eps_c = max(eps, EPS_FLOOR)
        alpha = 0.5 * math.log((1.0 - eps_c) / eps_c)
        rounds.append((stump, alpha))
        if trace is not None:
            trace.append(eps)
        if eps <= 0.0:
            break
        W = W * np.exp(-alpha * stump.outputs(X) * Y)
        W /= W.sum()
    prior = int(np.argmax(np.bincount(y, minlength=c)))
    return BoostModel(tuple(rounds), c, X.shape[1], prior)
