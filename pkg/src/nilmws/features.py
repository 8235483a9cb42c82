"""Load-signature feature spaces: PQ (power quantities), HAR (harmonic bands), WS (V-I wave shape)."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ConfigError, DegenerateInputError, SizeError
from .geometry import count_self_intersections, shoelace
from .signal import CyclePair, fft, rms

PQ, HAR, WS = "PQ", "HAR", "WS"
SPACES = (PQ, HAR, WS)

HAR_BANDS = 77
HAR_MAX_FREQ = 4000.0
MEAN_CURVE_POINTS = 64
EDGE_BAND = 0.2
LOOP_TOL = 1e-9
INTERSECTION_TOL = 1e-9

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class PQFeatures:
    p: float
    q: float
    thd_o: float
    thd_e: float

    def as_array(self):
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True, eq=False)
class HARFeatures:
    bands: np.ndarray

    def as_array(self):
        return np.array(self.bands, dtype=float)


@dataclass(frozen=True)
class WSFeatures:
    looping_direction: int
    area_enclosed: float
    curve_nonlinearity: float
    num_intersections: int
    middle_slope: float
    area_rl: float
    span: float

    def as_array(self):
        return np.array(astuple(self), dtype=float)


WS_NAMES = tuple(f.name for f in fields(WSFeatures))
PQ_NAMES = tuple(f.name for f in fields(PQFeatures))
DIMENSIONS = {PQ: 4, HAR: HAR_BANDS, WS: 7}


@dataclass(frozen=True, eq=False)
class FeatureVector:
    space: str
    values: np.ndarray
    label: int | None = None

    def __len__(self):
        return len(self.values)


def _fundamental_quadrature(v: np.ndarray) -> np.ndarray:
    """Fundamental of ``v`` delayed by a quarter cycle."""
    n = len(v)
    spec = fft(v)
    rot = np.zeros(n, dtype=complex)
    rot[1] = spec[1] * -1j
    rot[n - 1] = spec[n - 1] * 1j
    return np.real(fft(rot, inverse=True)) / n


def extract_pq(cycle: CyclePair, max_harmonic: int | None = None) -> PQFeatures:
    """Active/reactive power and odd/even current THD of one cycle.

    Q uses the fundamental of the voltage shifted by a quarter cycle, so an
    inductive (lagging) current gives Q > 0. THD sums every harmonic below
    Nyquist unless ``max_harmonic`` caps it.
    """
    v, i = cycle.v, cycle.i
    n = cycle.n
    p = float(np.mean(v * i))
    q = float(np.mean(_fundamental_quadrature(v) * i))

    mags = np.abs(fft(i)) * (2.0 / n)
    top = n // 2 - 1
    if max_harmonic is not None:
        top = min(top, int(max_harmonic))
    i_rms = rms(i)
    if i_rms == 0.0 or mags[1] <= 1e-12 * i_rms:
        raise DegenerateInputError("current fundamental vanishes; THD undefined")
    h = np.arange(2, top + 1)
    odd = h[h % 2 == 1]
    even = h[h % 2 == 0]
    thd_o = float(np.sqrt(np.sum(mags[odd] ** 2)) / mags[1])
    thd_e = float(np.sqrt(np.sum(mags[even] ** 2)) / mags[1])
    return PQFeatures(p, q, thd_o, thd_e)


def har_band_of(freq: float, n_bands: int = HAR_BANDS, max_freq: float = HAR_MAX_FREQ) -> int:
    return int(np.floor(freq / (max_freq / n_bands)))


def extract_har(cycle: CyclePair, n_bands: int = HAR_BANDS, max_freq: float = HAR_MAX_FREQ) -> HARFeatures:
    """Current spectral power in ``n_bands`` equal bands over [0, max_freq), normalized to unit sum."""
    n = cycle.n
    if cycle.sample_rate < 2.0 * max_freq:
        raise SizeError(f"sample rate {cycle.sample_rate:g} Hz cannot resolve {max_freq:g} Hz")
    spec = fft(cycle.i)
    c = np.arange(n // 2 + 1)
    power = np.abs(spec[: n // 2 + 1]) ** 2
    # one-sided power: mirror bins fold onto their positive twin
    power[1 : (n + 1) // 2] *= 2.0
    freq = c * cycle.mains_freq
    inside = freq < max_freq
    idx = np.floor(freq[inside] / (max_freq / n_bands)).astype(int)
    bands = np.bincount(idx, weights=power[inside], minlength=n_bands)[:n_bands]
    total = bands.sum()
    if total <= 0.0 or not np.isfinite(total):
        raise DegenerateInputError("current carries no spectral energy below the band limit")
    return HARFeatures(bands / total)


def mean_curve(v: np.ndarray, i: np.ndarray, points: int = MEAN_CURVE_POINTS):
    """Average of the two voltage-monotone arcs of the trajectory on a uniform voltage grid.

    Returns ``(grid, b)``.
    """
    n = len(v)
    k_max, k_min = int(np.argmax(v)), int(np.argmin(v))
    down = np.arange(k_max, k_max + ((k_min - k_max) % n) + 1) % n
    up = np.arange(k_min, k_min + ((k_max - k_min) % n) + 1) % n
    grid = np.linspace(v[k_min], v[k_max], points)

    def resample(arc):
        order = np.argsort(v[arc], kind="stable")
        return np.interp(grid, v[arc][order], i[arc][order])

    return grid, 0.5 * (resample(down) + resample(up))


def _edge_area(v: np.ndarray, i: np.ndarray, anchor: int, mask: np.ndarray) -> float:
    """|shoelace| of the contiguous (cyclic) run of ``mask`` around ``anchor``, closed by its chord."""
    n = len(v)
    if mask.all():
        run = np.arange(n)
    else:
        lo = anchor
        while mask[(lo - 1) % n]:
            lo -= 1
        hi = anchor
        while mask[(hi + 1) % n]:
            hi += 1
        run = np.arange(lo, hi + 1) % n
    return abs(shoelace(v[run], i[run]))


def extract_ws(cycle: CyclePair, edge_band: float = EDGE_BAND, points: int = MEAN_CURVE_POINTS) -> WSFeatures:
    """The seven V-I trajectory shape metrics of one cycle."""
    v, i = np.asarray(cycle.v), np.asarray(cycle.i)
    span_v = float(np.ptp(v))
    if span_v <= 0.0:
        raise DegenerateInputError("flat voltage: V-I trajectory has no extent")
    span_i = float(np.ptp(i))

    signed = shoelace(v, i)
    if abs(signed) < LOOP_TOL * span_v * span_i:
        direction = 0
    else:
        direction = 1 if signed > 0 else -1

    grid, b = mean_curve(v, i, points)
    line = b[0] + (b[-1] - b[0]) * (grid - grid[0]) / (grid[-1] - grid[0])
    nonlinearity = float(_trapezoid(np.abs(b - line), grid))

    v_lo, v_hi = grid[0], grid[-1]
    mid = (grid >= v_lo + span_v / 3.0 - 1e-12 * span_v) & (grid <= v_lo + 2.0 * span_v / 3.0 + 1e-12 * span_v)
    slope = float(np.polyfit(grid[mid], b[mid], 1)[0])

    area_rl = _edge_area(v, i, int(np.argmin(v)), v <= v_lo + edge_band * span_v) + _edge_area(
        v, i, int(np.argmax(v)), v >= v_hi - edge_band * span_v
    )

    crossings = count_self_intersections(v, i, INTERSECTION_TOL) if span_i > 0.0 else 0

    return WSFeatures(
        looping_direction=direction,
        area_enclosed=abs(signed),
        curve_nonlinearity=nonlinearity,
        num_intersections=crossings,
        middle_slope=slope,
        area_rl=area_rl,
        span=span_i,
    )


_EXTRACTORS = {PQ: extract_pq, HAR: extract_har, WS: extract_ws}


def oriented_cycle(sig) -> CyclePair:
    """The signature's cycle with off-events flipped so both polarities share one shape."""
    cycle = getattr(sig, "cycle", sig)
    if getattr(sig, "polarity", "on") == "off":
        return cycle.scaled(-1.0)
    return cycle


def featurize(sig, space: str, label: int | None = None, orient: bool = True) -> FeatureVector:
    """Map a delta signature (or a bare CyclePair) into one feature space.

    With ``orient`` set, off-event deltas are negated first so an appliance's
    on and off events land on the same point of the feature space.
    """
    if space not in _EXTRACTORS:
        raise ConfigError(f"unknown feature space {space!r}; expected one of {SPACES}")
    cycle = oriented_cycle(sig) if orient else getattr(sig, "cycle", sig)
    values = _EXTRACTORS[space](cycle).as_array()
    if label is None:
        label = getattr(sig, "label", None)
    return FeatureVector(space, values, label)


def feature_matrix(sigs, space: str, orient: bool = True) -> np.ndarray:
    return np.vstack([featurize(s, space, orient=orient).values for s in sigs]) if sigs else np.zeros((0, DIMENSIONS[space]))
