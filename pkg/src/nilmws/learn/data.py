from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    y: int


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(X), -1) if len(X) else X.reshape(0, 0)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=int))
        if len(self.X) != len(self.y):
            raise ConfigError(f"{len(self.X)} feature rows but {len(self.y)} labels")

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1] if self.X.ndim == 2 else 0

    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(x, int(y)) for x, y in zip(self.X, self.y)]

    @classmethod
    def from_examples(cls, examples) -> "Dataset":
        examples = list(examples)
        if not examples:
            return cls(np.zeros((0, 0)), np.zeros(0, dtype=int))
        return cls(np.vstack([e.x for e in examples]), [e.y for e in examples])

    def scaled(self, s) -> "Dataset":
        return Dataset(self.X * s, self.y)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx].reshape(len(idx), self.X.shape[1]), self.y[idx])


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: Dataset
    cv: Dataset
    test: Dataset
    fractions: tuple
    indices: tuple = ()

    @property
    def n_classes(self) -> int:
        ys = [d.y for d in (self.train, self.cv, self.test) if len(d)]
        return int(max(y.max() for y in ys)) + 1 if ys else 0

    @property
    def n_features(self) -> int:
        return self.train.n_features

    def scaled(self, s) -> "SplitDataset":
        return SplitDataset(self.train.scaled(s), self.cv.scaled(s), self.test.scaled(s), self.fractions, self.indices)

    def eval_set(self) -> Dataset:
        """CV set when present, otherwise the training set."""
        return self.cv if len(self.cv) else self.train


def _apportion(n: int, fractions, behind) -> np.ndarray:
    """Largest-remainder apportionment of n items; remainder ties favour splits furthest behind."""
    quotas = np.array(fractions, dtype=float) * n
    counts = np.floor(quotas + 1e-9).astype(int)
    left = n - counts.sum()
    if left > 0:
        rema = quotas - counts
        order = sorted(range(len(fractions)), key=lambda j: (-round(rema[j], 9), -behind[j], j))
        for j in order[:left]:
            counts[j] += 1
    return counts


def split(X, y, fractions=(0.45, 0.10, 0.45), seed: int = 0) -> SplitDataset:
    """Stratified shuffle split into train / cv / test."""
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    data = Dataset(X, y)
    n = len(data)
    rng = np.random.default_rng(seed)
    parts = [[], [], []]
    classes, counts = np.unique(data.y, return_counts=True)
    active = sum(1 for f in fr if f > 0)
    if len(classes) and counts.min() < active:
        warnings.warn(
            "a class has fewer examples than non-empty splits; falling back to an unstratified shuffle",
            stacklevel=2,
        )
        perm = rng.permutation(n)
        sizes = _apportion(n, fr, np.zeros(3))
        bounds = np.cumsum(sizes)
        parts = [list(perm[: bounds[0]]), list(perm[bounds[0] : bounds[1]]), list(perm[bounds[1] :])]
    else:
        assigned = np.zeros(3)
        placed = 0
        for c in classes:
            idx = rng.permutation(np.flatnonzero(data.y == c))
            behind = np.array(fr) * (placed + len(idx)) - assigned
            sizes = _apportion(len(idx), fr, behind)
            start = 0
            for j in range(3):
                parts[j].extend(idx[start : start + sizes[j]])
                start += sizes[j]
            assigned += sizes
            placed += len(idx)
        parts = [list(rng.permutation(p)) if p else [] for p in parts]
    idx = tuple(np.array(p, dtype=int) for p in parts)
    return SplitDataset(data.subset(idx[0]), data.subset(idx[1]), data.subset(idx[2]), fr, idx)


def zscore_stats(X: np.ndarray):
    mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
    std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
    std = np.where(std > 0, std, 1.0)
    return mean, std


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float(np.mean(pred == truth)) if len(truth) else float("nan")
