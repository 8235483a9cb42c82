"""Single-hidden-layer feed-forward network trained by Levenberg-Marquardt, plus EA momentum refinement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TrainingStalledError
from .data import Dataset, SplitDataset, zscore_stats

LAMBDA_START = 1e-3
LAMBDA_MAX = 1e10
MAX_EPOCHS = 200
MAX_FAIL = 6
MIN_GRAD = 1e-7


@dataclass(frozen=True, eq=False)
class AnnModel:
    w1: np.ndarray  # (n_h, F)
    b1: np.ndarray  # (n_h,)
    w2: np.ndarray  # (C, n_h)
    b2: np.ndarray  # (C,)
    mean: np.ndarray
    std: np.ndarray

    @property
    def sizes(self) -> tuple:
        return (self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, theta) -> "AnnModel":
        w1, b1, w2, b2 = _unflatten(np.asarray(theta, dtype=float), self.sizes)
        return AnnModel(w1, b1, w2, b2, self.mean, self.std)

    def outputs(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mean) / self.std
        return _forward(Z, self.w1, self.b1, self.w2, self.b2)[1]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.outputs(X), axis=1)


def _unflatten(theta, sizes):
    f, h, c = sizes
    k = 0
    w1 = theta[k : k + h * f].reshape(h, f)
    k += h * f
    b1 = theta[k : k + h]
    k += h
    w2 = theta[k : k + c * h].reshape(c, h)
    k += c * h
    b2 = theta[k : k + c]
    return w1, b1, w2, b2


def _forward(Z, w1, b1, w2, b2):
    a = np.tanh(Z @ w1.T + b1)
    return a, a @ w2.T + b2


def _jacobian(Z, a, w2):
    n, f = Z.shape
    c, h = w2.shape
    g = w2[None, :, :] * (1.0 - a * a)[:, None, :]  # (n, C, h)
    j_w1 = (g[:, :, :, None] * Z[:, None, None, :]).reshape(n, c, h * f)
    eye = np.eye(c)
    j_w2 = (eye[None, :, :, None] * a[:, None, None, :]).reshape(n, c, c * h)
    j_b2 = np.broadcast_to(eye, (n, c, c))
    return np.concatenate([j_w1, g, j_w2, j_b2], axis=2).reshape(n * c, -1)


def one_hot(y, n_classes) -> np.ndarray:
    t = np.zeros((len(y), n_classes))
    t[np.arange(len(y)), np.asarray(y, dtype=int)] = 1.0
    return t


def _init_weights(f, h, c, rng):
    # Nguyen-Widrow style: rows scaled so the hidden units tile the normalized input range
    beta = 0.7 * h ** (1.0 / max(f, 1))
    w1 = rng.uniform(-0.5, 0.5, size=(h, f))
    norms = np.linalg.norm(w1, axis=1, keepdims=True)
    w1 = beta * w1 / np.where(norms > 0, norms, 1.0)
    b1 = rng.uniform(-beta, beta, size=h)
    w2 = rng.uniform(-0.5, 0.5, size=(c, h))
    b2 = np.zeros(c)
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _lm_step(J, r, lam):
    rows, cols = J.shape
    if cols <= rows:
        A = J.T @ J
        A[np.diag_indices_from(A)] += lam
        return -np.linalg.solve(A, J.T @ r)
    # dual form is cheaper when parameters outnumber residuals
    B = J @ J.T
    B[np.diag_indices_from(B)] += lam
    return -J.T @ np.linalg.solve(B, r)


def train_ann(
    split: SplitDataset,
    n_h: int,
    seed: int = 0,
    max_epochs: int = MAX_EPOCHS,
    max_fail: int = MAX_FAIL,
    n_classes: int | None = None,
    trace: list | None = None,
) -> AnnModel:
    """Fit tanh-hidden / linear-output network to one-hot targets by Levenberg-Marquardt.

    Early stopping watches the CV mean squared error (training error if the CV
    set is empty) and returns the weights of the best CV epoch.
    """
    if n_h < 1:
        raise ConfigError("n_h must be at least 1")
    train = split.train
    if len(train) == 0:
        raise ConfigError("empty training set")
    c = n_classes or max(split.n_classes, 2)
    f = train.n_features
    mean, std = zscore_stats(train.X)
    Z = (train.X - mean) / std
    T = one_hot(train.y, c)
    watch = split.cv if len(split.cv) else train
    Zv = (watch.X - mean) / std
    Tv = one_hot(watch.y, c)
    sizes = (f, n_h, c)
    rng = np.random.default_rng(seed)
    theta = _init_weights(f, n_h, c, rng)

    def residuals(th, Zs, Ts):
        w1, b1, w2, b2 = _unflatten(th, sizes)
        a, out = _forward(Zs, w1, b1, w2, b2)
        return a, (out - Ts).ravel()

    def cv_error(th):
        return float(np.mean(residuals(th, Zv, Tv)[1] ** 2))

    lam = LAMBDA_START
    best_theta, best_cv = theta.copy(), cv_error(theta)
    fails = 0
    accepted_any = False
    for _ in range(max_epochs):
        a, r = residuals(theta, Z, T)
        sse = float(r @ r)
        J = _jacobian(Z, a, _unflatten(theta, sizes)[2])
        grad = J.T @ r
        if np.linalg.norm(grad) < MIN_GRAD:
            break
        while True:
            try:
                step = _lm_step(J, r, lam)
                candidate = theta + step
                new_sse = float(np.sum(residuals(candidate, Z, T)[1] ** 2))
            except np.linalg.LinAlgError:
                new_sse = np.inf
            if np.isfinite(new_sse) and new_sse < sse:
                lam = max(lam / 10.0, 1e-20)
                break
            lam *= 10.0
            if lam > LAMBDA_MAX:
                break
        if lam > LAMBDA_MAX:
            if not accepted_any:
                raise TrainingStalledError("Levenberg-Marquardt damping exceeded 1e10 before any progress")
            break
        assert new_sse < sse, "accepted LM step must lower the training SSE"
        accepted_any = True
        theta = candidate
        if trace is not None:
            trace.append(new_sse)
        err = cv_error(theta)
        if err < best_cv:
            best_theta, best_cv, fails = theta.copy(), err, 0
        else:
            fails += 1
            if fails >= max_fail:
                break
    w1, b1, w2, b2 = _unflatten(best_theta, sizes)
    return AnnModel(w1.copy(), b1.copy(), w2.copy(), b2.copy(), mean, std)


# --------------------------------------------------------------------------- EA local search


@dataclass(frozen=True)
class EaState:
    m: float
    g: float
    delta_w: np.ndarray

    def __post_init__(self):
        check_ea_params(self.m, self.g)


def check_ea_params(m: float, g: float):
    if not 0.0 < m < 1.0:
        raise ConfigError(f"momentum m={m} must lie in (0, 1)")
    if not 0.0 < g < 0.1:
        raise ConfigError(f"g={g} must lie in (0, 0.1)")


def momentum_increment(delta_w, w, m: float, g: float):
    """Next weight increment: m * delta_w + (1 - m) * g * w."""
    return m * np.asarray(delta_w, dtype=float) + (1.0 - m) * g * np.asarray(w, dtype=float)


def _accuracy(model: AnnModel, theta, data: Dataset) -> float:
    return float(np.mean(model.with_flat(theta).predict(data.X) == data.y))


def ea_refine(
    model: AnnModel,
    split: SplitDataset,
    m: float,
    g: float,
    generations: int = 20,
    seed: int = 0,
    population: int = 10,
    jitter: float = 1e-3,
) -> AnnModel:
    """Momentum-driven evolutionary local search around trained weights.

    Each individual moves by ``W += m*dW + (1-m)*g*W + noise`` and keeps the
    move only if its CV accuracy does not drop. The best individual by CV
    accuracy is returned; the input wins ties, so CV accuracy never decreases.
    """
    check_ea_params(m, g)
    if generations <= 0:
        return model
    data = split.eval_set()
    rng = np.random.default_rng(seed)
    w0 = model.flat()
    acc0 = _accuracy(model, w0, data)
    weights = np.tile(w0, (population, 1))
    deltas = np.zeros_like(weights)
    accs = np.full(population, acc0)
    best_w, best_acc = w0, acc0
    for _ in range(generations):
        for p in range(population):
            w = weights[p]
            sigma = jitter * np.linalg.norm(w)
            step = momentum_increment(deltas[p], w, m, g) + rng.normal(0.0, sigma, size=w.shape)
            cand = w + step
            acc = _accuracy(model, cand, data)
            if acc >= accs[p]:
                weights[p], deltas[p], accs[p] = cand, step, acc
                if acc > best_acc:
                    best_w, best_acc = cand.copy(), acc
    if best_w is w0:
        return model
    return model.with_flat(best_w)
