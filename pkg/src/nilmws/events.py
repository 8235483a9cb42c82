"""Switching-event detection, delta-form signature extraction and K-means grouping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, ConfigError, MalformedSignalError
from .signal import CyclePair, Waveform, cycle_power, extract_cycle

SETTLE_CYCLES = 5
KMEANS_MAX_ITER = 300
KMEANS_RESTARTS = 10


@dataclass(frozen=True, eq=False)
class DeltaSignature:
    """Current difference across one switching event; voltage is the post-event cycle."""

    cycle: CyclePair
    event_index: int
    polarity: str
    p_delta: float
    label: int | None = None

    @classmethod
    def from_cycle(cls, cycle: CyclePair, event_index: int, label=None) -> "DeltaSignature":
        p = float(np.mean(cycle.v * cycle.i))
        return cls(cycle, int(event_index), "on" if p > 0 else "off", p, label)

    def with_label(self, label) -> "DeltaSignature":
        return DeltaSignature(self.cycle, self.event_index, self.polarity, self.p_delta, label)


def step_profile(power: np.ndarray, settle: int = SETTLE_CYCLES) -> np.ndarray:
    """d[k] = mean(p[k:k+settle]) - mean(p[k-settle:k]); NaN where either window is incomplete."""
    k = len(power)
    d = np.full(k, np.nan)
    if k < 2 * settle:
        return d
    csum = np.concatenate([[0.0], np.cumsum(power)])
    ks = np.arange(settle, k - settle + 1)
    after = (csum[ks + settle] - csum[ks]) / settle
    before = (csum[ks] - csum[ks - settle]) / settle
    d[ks] = after - before
    return d


def detect_events(i: Waveform, p_min: float, v: Waveform, settle: int = SETTLE_CYCLES) -> list[int]:
    """Sample indices (cycle boundaries) where cycle active power steps by at least ``p_min``.

    A step must hold for ``settle`` cycles on both sides; detections closer
    than ``settle`` cycles are suppressed in favour of the larger step.
    """
    if p_min < 0:
        raise ConfigError("p_min must be non-negative")
    n = v.samples_per_cycle
    d = step_profile(cycle_power(v, i), settle)
    mag = np.abs(np.nan_to_num(d, nan=0.0))
    cand = np.flatnonzero((mag >= p_min) & (mag > 0.0))
    if len(cand) == 0:
        return []
    # strongest-first non-maximum suppression; ties resolve to the earliest cycle
    order = cand[np.lexsort((cand, -mag[cand]))]
    taken = np.zeros(len(mag), dtype=bool)
    picked = []
    for k in order:
        lo, hi = max(k - settle + 1, 0), k + settle
        if taken[lo:hi].any():
            continue
        taken[k] = True
        picked.append(int(k))
    return sorted(k * n for k in picked)


def extract_delta(v: Waveform, i: Waveform, event_index: int, settle: int = SETTLE_CYCLES) -> DeltaSignature:
    """Post-settle steady cycle minus the last steady pre-event cycle, both voltage-aligned."""
    n = v.samples_per_cycle
    pre_at = event_index - 3 * n
    post_at = event_index + settle * n
    if event_index - settle * n < 0 or post_at + 2 * n > min(len(v), len(i)):
        raise BoundaryError(f"event at sample {event_index} is within {settle} cycles of the stream edge")
    try:
        pre = extract_cycle(v, i, pre_at)
        post = extract_cycle(v, i, post_at)
    except MalformedSignalError as exc:
        raise BoundaryError(str(exc)) from exc
    delta = CyclePair(post.v, post.i - pre.i, v.mains_freq)
    return DeltaSignature.from_cycle(delta, event_index)


# --------------------------------------------------------------------------- clustering


@dataclass(frozen=True, eq=False)
class Clustering:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    wcss: float
    history: list = field(default_factory=list)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == c)


def _sq_dists(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(points, k, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _lloyd(points, centroids, max_iter):
    history = []
    assign = None
    for _ in range(max_iter):
        d = _sq_dists(points, centroids)
        new_assign = np.argmin(d, axis=1)
        wcss = float(d[np.arange(len(points)), new_assign].sum())
        if history:
            assert wcss <= history[-1] * (1 + 1e-12) + 1e-12, "WCSS increased during Lloyd iteration"
        history.append(wcss)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(len(centroids)):
            mask = assign == c
            if mask.any():
                centroids[c] = points[mask].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centroid
                far = int(np.argmax(d[np.arange(len(points)), assign]))
                centroids[c] = points[far]
                assign[far] = c
    d = _sq_dists(points, centroids)
    assign = np.argmin(d, axis=1)
    for c in range(len(centroids)):
        mask = assign == c
        if mask.any():
            centroids[c] = points[mask].mean(axis=0)
    wcss = float(((points - centroids[assign]) ** 2).sum())
    return assign, centroids, wcss, history


def kmeans(points, k: int, seed: int = 0, restarts: int = KMEANS_RESTARTS, max_iter: int = KMEANS_MAX_ITER) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` runs by WCSS."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if k < 1 or k > len(pts):
        raise ConfigError(f"k={k} must lie in [1, {len(pts)}]")
    master = np.random.SeedSequence(seed)
    best = None
    for child in master.spawn(restarts):
        rng = np.random.default_rng(child)
        assign, centroids, wcss, history = _lloyd(pts, _plus_plus(pts, k, rng), max_iter)
        if best is None or wcss < best.wcss:
            best = Clustering(k, assign, centroids, wcss, history)
    return best


def purity(clustering, truth) -> float:
    """Fraction of points whose cluster's majority true label equals their own."""
    assign = np.asarray(getattr(clustering, "assignments", clustering))
    truth = np.asarray(truth)
    if len(assign) == 0:
        return 0.0
    total = 0
    for c in np.unique(assign):
        _, counts = np.unique(truth[assign == c], return_counts=True)
        total += counts.max()
    return total / len(assign)


def silhouette(points, assignments) -> float:
    """Mean silhouette coefficient (Euclidean); 0 when fewer than two clusters."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    labels = np.asarray(assignments)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        return 0.0
    dist = np.sqrt(np.maximum(_sq_dists(pts, pts), 0.0))
    code = np.searchsorted(uniq, labels)
    onehot = np.zeros((len(pts), len(uniq)))
    onehot[np.arange(len(pts)), code] = 1.0
    counts = onehot.sum(axis=0)
    sums = dist @ onehot
    rows = np.arange(len(pts))
    own_n = counts[code] - 1
    a = np.where(own_n > 0, sums[rows, code] / np.maximum(own_n, 1), 0.0)
    other = sums / counts
    other[rows, code] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_n > 0) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def zscore(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    mu = pts.mean(axis=0)
    sd = pts.std(axis=0)
    sd[sd == 0] = 1.0
    return (pts - mu) / sd


def choose_k(points, k_range=(2, 40), seed: int = 0) -> Clustering:
    """Scan k over ``k_range`` (inclusive) and keep the clustering with the best silhouette."""
    pts = np.asarray(points, dtype=float)
    lo, hi = k_range
    hi = min(hi, len(pts) - 1)
    if hi < lo:
        return kmeans(pts, min(lo, len(pts)), seed)
    best, best_score = None, -np.inf
    for k in range(lo, hi + 1):
        cl = kmeans(pts, k, seed)
        score = silhouette(pts, cl.assignments)
        if score > best_score:
            best, best_score = cl, score
    return best
