"""Waveform primitives: sampling grid, radix-2 DFT, RMS, resampling, noise, cycle alignment."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateInputError, MalformedSignalError, SizeError

DEFAULT_MAINS_FREQ = 60.0
DEFAULT_SAMPLES_PER_CYCLE = 256
DEFAULT_SAMPLE_RATE = DEFAULT_MAINS_FREQ * DEFAULT_SAMPLES_PER_CYCLE  # 15360 Hz
MIN_CYCLE_SAMPLES = 64

#: Pass as ``snr_db`` to disable noise injection.
NO_NOISE = None


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Waveform:
    """A uniformly sampled stream whose cycle length is a power-of-two sample count.

    Use :meth:`from_samples` for arbitrary sample rates; the constructor
    refuses grids that are not power-of-two per mains cycle.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    mains_freq: float = DEFAULT_MAINS_FREQ

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(self.samples))
        if self.samples.ndim != 1:
            raise SizeError("waveform samples must be one-dimensional")
        spc = self.sample_rate / self.mains_freq
        if abs(spc - round(spc)) > 1e-9 or not is_power_of_two(int(round(spc))):
            raise SizeError(
                f"sample_rate/mains_freq = {spc:g} is not a power of two; use Waveform.from_samples to resample"
            )

    @classmethod
    def from_samples(cls, samples, sample_rate, mains_freq=DEFAULT_MAINS_FREQ, samples_per_cycle=None):
        """Build a waveform, resampling onto the nearest power-of-two-per-cycle grid if needed."""
        samples = np.asarray(samples, dtype=float)
        spc = sample_rate / mains_freq
        if samples_per_cycle is None:
            if abs(spc - round(spc)) < 1e-9 and is_power_of_two(int(round(spc))):
                return cls(samples, sample_rate, mains_freq)
            samples_per_cycle = 2 ** int(round(math.log2(spc)))
        if not is_power_of_two(samples_per_cycle):
            raise SizeError(f"samples_per_cycle={samples_per_cycle} is not a power of two")
        new_rate = samples_per_cycle * mains_freq
        return cls(resample_linear(samples, sample_rate, new_rate), new_rate, mains_freq)

    @property
    def samples_per_cycle(self) -> int:
        return int(round(self.sample_rate / self.mains_freq))

    @property
    def n_cycles(self) -> int:
        return len(self.samples) // self.samples_per_cycle

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate, self.mains_freq)


@dataclass(frozen=True, eq=False)
class CyclePair:
    """One phase-aligned mains cycle of voltage and current."""

    v: np.ndarray
    i: np.ndarray
    mains_freq: float = DEFAULT_MAINS_FREQ

    def __post_init__(self):
        object.__setattr__(self, "v", _readonly(self.v))
        object.__setattr__(self, "i", _readonly(self.i))
        if self.v.shape != self.i.shape or self.v.ndim != 1:
            raise SizeError(f"v and i must be 1-D with equal length, got {self.v.shape} and {self.i.shape}")
        n = len(self.v)
        if n < MIN_CYCLE_SAMPLES or not is_power_of_two(n):
            raise SizeError(f"cycle length {n} must be a power of two >= {MIN_CYCLE_SAMPLES}")

    @property
    def n(self) -> int:
        return len(self.v)

    @property
    def sample_rate(self) -> float:
        return self.n * self.mains_freq

    def scaled(self, s: float) -> "CyclePair":
        """Current scaled by ``s``; voltage untouched."""
        return CyclePair(self.v, self.i * s, self.mains_freq)

    def equals(self, other: "CyclePair") -> bool:
        return (
            self.mains_freq == other.mains_freq
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.i, other.i)
        )


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Unnormalized DFT coefficients; bin ``c`` sits at ``c * bin_width`` Hz."""

    coefficients: np.ndarray
    bin_width: float = 1.0

    def __len__(self):
        return len(self.coefficients)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coefficients)


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=64)
def _twiddles(size: int, sign: int) -> np.ndarray:
    half = size // 2
    tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
    tw.setflags(write=False)
    return tw


def fft(x, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey transform along the last axis.

    Unnormalized in both directions; :func:`idft` applies the 1/N factor.
    """
    a = np.asarray(x, dtype=complex)
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise SizeError(f"radix-2 transform needs a power-of-two length, got {n}")
    batch = a.shape[:-1]
    a = a[..., _bit_reversal(n)]
    sign = 1 if inverse else -1
    size = 2
    while size <= n:
        half = size // 2
        a = a.reshape(*batch, n // size, size)
        even = a[..., :half]
        odd = a[..., half:] * _twiddles(size, sign)
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(*batch, n)


def dft(x, sample_rate: float | None = None) -> Spectrum:
    """Forward DFT. ``bin_width`` is ``sample_rate / N`` (1/N cycles per sample if no rate given)."""
    coeffs = fft(x)
    n = coeffs.shape[-1]
    width = (sample_rate / n) if sample_rate is not None else 1.0 / n
    return Spectrum(coeffs, width)


def idft(coefficients) -> np.ndarray:
    """Inverse DFT with 1/N normalization. Accepts a Spectrum or a coefficient array."""
    if isinstance(coefficients, Spectrum):
        coefficients = coefficients.coefficients
    c = np.asarray(coefficients, dtype=complex)
    return fft(c, inverse=True) / c.shape[-1]


def rms(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise SizeError("rms of an empty sequence")
    return float(np.sqrt(np.mean(x * x)))


def resample_linear(samples, rate_in: float, rate_out: float) -> np.ndarray:
    """Linear interpolation of a uniformly sampled stream onto a new rate, same start instant."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) == 0:
        return samples.copy()
    duration = (len(samples) - 1) / rate_in
    n_out = int(math.floor(duration * rate_out + 1e-9)) + 1
    t_out = np.arange(n_out) / rate_out
    t_in = np.arange(len(samples)) / rate_in
    return np.interp(t_out, t_in, samples)


def noise_sigma(signal_power: float, snr_db: float) -> float:
    return math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))


def _is_no_noise(snr_db) -> bool:
    return snr_db is None or (isinstance(snr_db, float) and math.isinf(snr_db) and snr_db > 0)


def add_noise(x: Waveform, snr_db, seed: int) -> Waveform:
    """Add zero-mean white Gaussian noise at ``snr_db`` relative to the mean-square of ``x``.

    ``snr_db=None`` (``NO_NOISE``) or ``+inf`` returns ``x`` unchanged.
    """
    if len(x.samples) == 0:
        raise SizeError("cannot add noise to an empty waveform")
    if _is_no_noise(snr_db):
        return x
    snr_db = float(snr_db)
    if not math.isfinite(snr_db):
        raise DegenerateInputError(f"snr_db must be finite or NO_NOISE, got {snr_db}")
    p_x = float(np.mean(x.samples * x.samples))
    if p_x == 0.0:
        raise DegenerateInputError("zero-power input cannot be referenced to a finite SNR")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma(p_x, snr_db), size=len(x.samples))
    return x.with_samples(x.samples + noise)


def find_rising_crossing(v: np.ndarray, at: int, n: int) -> int:
    """Sample index of the first positive-going zero crossing of ``v`` at or after ``at``.

    The crossing is located by linear interpolation and snapped to the nearest
    sample; only crossings within one cycle (``n`` samples) of ``at`` qualify.
    """
    lo = max(at - 1, 0)
    hi = min(at + n + 1, len(v) - 1)
    seg = v[lo : hi + 1]
    js = np.flatnonzero((seg[:-1] < 0.0) & (seg[1:] >= 0.0)) + lo
    for j in js:
        frac = -v[j] / (v[j + 1] - v[j])
        s = int(math.floor(j + frac + 0.5))
        if at <= s <= at + n:
            return s
    raise MalformedSignalError(f"no rising zero crossing of the voltage within one cycle of sample {at}")


def extract_cycle(v: Waveform, i: Waveform, at: int) -> CyclePair:
    """Cut one cycle starting at the first rising voltage zero crossing at or after ``at``."""
    if v.sample_rate != i.sample_rate or v.mains_freq != i.mains_freq:
        raise MalformedSignalError("voltage and current must share one sampling grid")
    n = v.samples_per_cycle
    if at < 0 or at + n > min(len(v), len(i)):
        raise MalformedSignalError(f"waveforms do not cover [{at}, {at + n})")
    start = find_rising_crossing(v.samples, at, n)
    if start + n > min(len(v), len(i)):
        raise MalformedSignalError(f"cycle starting at {start} runs past the end of the stream")
    return CyclePair(v.samples[start : start + n], i.samples[start : start + n], v.mains_freq)


def cycle_start(v: Waveform, at: int) -> int:
    return find_rising_crossing(v.samples, at, v.samples_per_cycle)


def cycle_power(v: Waveform, i: Waveform) -> np.ndarray:
    """Active power (mean of v*i) of every whole grid cycle of the stream."""
    n = v.samples_per_cycle
    k = min(len(v), len(i)) // n
    prod = v.samples[: k * n] * i.samples[: k * n]
    return prod.reshape(k, n).mean(axis=1)


def sine_cycle(amplitude: float = 1.0, phase: float = 0.0, n: int = DEFAULT_SAMPLES_PER_CYCLE, harmonic: int = 1) -> np.ndarray:
    """``amplitude * sin(harmonic * t + phase)`` on one cycle of ``n`` samples."""
    t = 2.0 * np.pi * np.arange(n) / n
    return amplitude * np.sin(harmonic * t + phase)
