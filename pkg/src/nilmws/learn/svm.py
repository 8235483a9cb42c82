"""One-vs-one Gaussian-kernel SVM trained by sequential minimal optimization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InputScalingError
from .data import SplitDataset, zscore_stats

KKT_TOL = 1e-3
TAU = 1e-12
MAX_ITER = 100_000


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    K = np.exp(-gamma * np.maximum(sq, 0.0))
    if not np.all(np.isfinite(K)):
        raise InputScalingError("kernel produced non-finite values; rescale the features")
    return K


@dataclass(frozen=True, eq=False)
class BinarySvm:
    pos: int
    neg: int
    support: np.ndarray  # normalized support vectors
    coef: np.ndarray  # alpha_i * y_i
    rho: float
    alpha: np.ndarray = field(repr=False)  # full dual vector over the pair's training rows
    y: np.ndarray = field(repr=False)
    kkt_gap: float = 0.0
    iterations: int = 0

    def decision(self, Z, gamma) -> np.ndarray:
        if len(self.coef) == 0:
            return np.full(len(Z), -self.rho)
        return rbf_kernel(Z, self.support, gamma) @ self.coef - self.rho


def smo(K: np.ndarray, y: np.ndarray, cbox: float, tol: float = KKT_TOL, max_iter: int = MAX_ITER):
    """Solve the C-SVM dual with second-order working-set selection.

    Returns ``(alpha, rho, gap, iterations)``; the decision function is
    ``sum(alpha*y*K) - rho``.
    """
    n = len(y)
    y = y.astype(float)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        up = ((y > 0) & (alpha < cbox)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < cbox))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_up = score[i]
        gap = m_up - score[low].min()
        if gap < tol:
            break
        cand = low & (score < m_up)
        idx = np.flatnonzero(cand)
        b = m_up - score[idx]
        a = diag[i] + diag[idx] - 2.0 * y[i] * y[idx] * Q[i, idx]
        a = np.where(a > 0, a, TAU)
        j = int(idx[np.argmin(-(b * b) / a)])

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > cbox:
                    alpha[i] = cbox
                    alpha[j] = cbox - diff
            elif alpha[j] > cbox:
                alpha[j] = cbox
                alpha[i] = cbox + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > cbox:
                if alpha[i] > cbox:
                    alpha[i] = cbox
                    alpha[j] = total - cbox
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > cbox:
                if alpha[j] > cbox:
                    alpha[j] = cbox
                    alpha[i] = total - cbox
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        G += Q[:, i] * (alpha[i] - ai) + Q[:, j] * (alpha[j] - aj)
        it += 1

    free = (alpha > 0) & (alpha < cbox)
    yG = y * G
    if free.any():
        rho = float(yG[free].mean())
    else:
        up = ((y > 0) & (alpha < cbox)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < cbox))
        ub = yG[up].min() if up.any() else np.inf
        lb = yG[low].max() if low.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = float((ub + lb) / 2.0)
        else:
            rho = float(ub if np.isfinite(ub) else lb)
    return alpha, rho, float(gap), it


@dataclass(frozen=True, eq=False)
class SvmModel:
    machines: list
    gamma: float
    cbox: float
    mean: np.ndarray
    std: np.ndarray
    n_classes: int

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def scores(self, X):
        Z = (np.asarray(X, dtype=float) - self.mean) / self.std
        votes = np.zeros((len(Z), self.n_classes))
        agg = np.zeros((len(Z), self.n_classes))
        for mach in self.machines:
            f = mach.decision(Z, self.gamma)
            win = f > 0
            votes[win, mach.pos] += 1
            votes[~win, mach.neg] += 1
            agg[:, mach.pos] += f
            agg[:, mach.neg] -= f
        return votes, agg

    def predict(self, X) -> np.ndarray:
        votes, agg = self.scores(X)
        out = np.empty(len(votes), dtype=int)
        for r in range(len(votes)):
            top = np.flatnonzero(votes[r] == votes[r].max())
            out[r] = top[np.argmax(agg[r, top])] if len(top) > 1 else top[0]
        return out


def train_svm(
    split: SplitDataset,
    gamma: float | None = None,
    cbox: float = 10.0,
    tol: float = KKT_TOL,
    n_classes: int | None = None,
) -> SvmModel:
    """Pairwise RBF SVMs on z-scored training features; ``gamma`` defaults to 1/F."""
    train = split.train
    if len(train) == 0:
        raise ConfigError("empty training set")
    gamma = 1.0 / train.n_features if gamma is None else float(gamma)
    if gamma <= 0 or cbox <= 0:
        raise ConfigError("gamma and cbox must be positive")
    c = n_classes or max(split.n_classes, 2)
    mean, std = zscore_stats(train.X)
    Z = (train.X - mean) / std
    machines = []
    present = set(np.unique(train.y).tolist())
    for a in range(c):
        for b in range(a + 1, c):
            if a not in present or b not in present:
                # a class missing from training can never win a vote
                winner_pos = a in present
                machines.append(
                    BinarySvm(a, b, np.zeros((0, Z.shape[1])), np.zeros(0), -1.0 if winner_pos else 1.0,
                              np.zeros(0), np.zeros(0))
                )
                continue
            rows = np.flatnonzero((train.y == a) | (train.y == b))
            y = np.where(train.y[rows] == a, 1.0, -1.0)
            K = rbf_kernel(Z[rows], Z[rows], gamma)
            alpha, rho, gap, it = smo(K, y, cbox, tol)
            sv = alpha > 0
            machines.append(BinarySvm(a, b, Z[rows][sv], (alpha * y)[sv], rho, alpha, y, gap, it))
    return SvmModel(machines, gamma, float(cbox), mean, std, c)
