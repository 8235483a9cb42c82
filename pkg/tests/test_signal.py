import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilmws.errors import DegenerateInputError, MalformedSignalError, SizeError
from nilmws.signal import (
    NO_NOISE,
    CyclePair,
    Waveform,
    add_noise,
    cycle_power,
    dft,
    extract_cycle,
    fft,
    find_rising_crossing,
    idft,
    resample_linear,
    rms,
    sine_cycle,
)

N = 256


def _sine_stream(cycles=6, n=N, phase=0.0, amp=170.0):
    t = np.arange(cycles * n) / n
    return Waveform(amp * np.sin(2 * np.pi * t + phase), 60.0 * n)


class TestDft:
    def test_impulse_gives_flat_spectrum(self):
        np.testing.assert_allclose(dft([1, 0, 0, 0]).coefficients, [1, 1, 1, 1])

    def test_constant_is_dc_only(self):
        c = 2.5
        out = dft([c] * 8).coefficients
        np.testing.assert_allclose(out, [8 * c] + [0] * 7, atol=1e-12)

    def test_matches_reference_fft(self):
        # numpy's FFT serves purely as an independent oracle here
        x = np.random.default_rng(0).normal(size=(3, 512)) + 1j * np.random.default_rng(1).normal(size=(3, 512))
        np.testing.assert_allclose(fft(x), np.fft.fft(x, axis=-1), atol=1e-9)

    def test_round_trip(self):
        x = np.random.default_rng(2).normal(size=N)
        back = idft(dft(x).coefficients)
        assert np.max(np.abs(back - x)) <= 1e-9 * np.max(np.abs(x))

    def test_bin_width(self):
        assert dft(np.zeros(N), sample_rate=15360.0).bin_width == pytest.approx(60.0)

    @pytest.mark.parametrize("n", [0, 3, 6, 100])
    def test_non_power_of_two_rejected(self, n):
        with pytest.raises(SizeError):
            dft(np.ones(n))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 9), st.integers(0, 2**32 - 1))
    def test_parseval_and_symmetry(self, log_n, seed):
        n = 2**log_n
        x = np.random.default_rng(seed).normal(size=n)
        X = dft(x).coefficients
        assert np.sum(np.abs(X) ** 2) / n == pytest.approx(np.sum(x**2), rel=1e-9)
        k = np.arange(1, n)
        np.testing.assert_allclose(X[k], np.conj(X[n - k]), atol=1e-12 * max(1.0, np.abs(X).max()))


class TestRms:
    def test_constant(self):
        assert rms([-4.0] * 10) == 4.0

    def test_sine(self):
        assert rms(3.0 * np.sin(2 * np.pi * np.arange(4 * N) / N)) == pytest.approx(3.0 / math.sqrt(2), rel=1e-12)

    def test_alternating(self):
        assert rms([3, -3, 3, -3]) == 3.0

    def test_empty(self):
        with pytest.raises(SizeError):
            rms([])


class TestNoise:
    def test_no_noise_sentinel(self):
        w = _sine_stream()
        assert add_noise(w, NO_NOISE, 1) is w
        assert np.array_equal(add_noise(w, math.inf, 1).samples, w.samples)

    @pytest.mark.parametrize("power,snr,expected", [(1.0, 0.0, 1.0), (4.0, 20.0, 0.04)])
    def test_variance_matches_snr(self, power, snr, expected):
        x = Waveform(np.full(2**17, math.sqrt(power)), 15360.0)
        out = add_noise(x, snr, 7)
        assert np.var(out.samples - x.samples) == pytest.approx(expected, rel=0.02)

    def test_reproducible(self):
        w = _sine_stream()
        assert np.array_equal(add_noise(w, 10, 3).samples, add_noise(w, 10, 3).samples)
        assert not np.array_equal(add_noise(w, 10, 3).samples, add_noise(w, 10, 4).samples)

    def test_zero_power(self):
        with pytest.raises(DegenerateInputError):
            add_noise(Waveform(np.zeros(N), 15360.0), 10, 0)


class TestWaveform:
    def test_power_of_two_grid_required(self):
        with pytest.raises(SizeError):
            Waveform(np.zeros(300), 60.0 * 300)

    def test_from_samples_resamples(self):
        rate = 16500.0  # 275 samples per 60 Hz cycle
        t = np.arange(int(rate)) / rate
        w = Waveform.from_samples(np.sin(2 * np.pi * 60 * t), rate)
        assert w.samples_per_cycle == 256
        assert w.n_cycles == pytest.approx(60, abs=1)

    def test_resample_identity(self):
        x = np.random.default_rng(0).normal(size=64)
        np.testing.assert_array_equal(resample_linear(x, 100.0, 100.0), x)

    def test_cycle_pair_invariants(self):
        with pytest.raises(SizeError):
            CyclePair(np.zeros(32), np.zeros(32))
        with pytest.raises(SizeError):
            CyclePair(np.zeros(64), np.zeros(128))


class TestExtractCycle:
    @pytest.mark.parametrize("at", [0, 17, 200, 511])
    def test_starts_at_rising_crossing(self, at):
        v = _sine_stream(phase=0.3)
        c = extract_cycle(v, v, at)
        assert abs(c.v[0]) <= 170.0 * math.sin(2 * math.pi / N)
        assert c.v[1] > c.v[0]

    def test_whole_cycle_shift_is_invariant(self):
        v = Waveform(np.tile(sine_cycle(170.0, 0.7), 6), 60.0 * N)
        i = Waveform(np.tile(sine_cycle(10.0, 0.2), 6), 60.0 * N)
        a = extract_cycle(v, i, 40)
        b = extract_cycle(v, i, 40 + 2 * N)
        assert a.equals(b)

    def test_rms_preserved(self):
        v = _sine_stream(phase=1.1)
        c = extract_cycle(v, v, 5)
        start = find_rising_crossing(v.samples, 5, N)
        assert rms(c.v) == rms(v.samples[start : start + N])

    def test_idempotent(self):
        v = _sine_stream(phase=2.0)
        s = find_rising_crossing(v.samples, 33, N)
        assert find_rising_crossing(v.samples, s, N) == s

    def test_no_crossing(self):
        v = Waveform(np.full(4 * N, 5.0), 60.0 * N)
        with pytest.raises(MalformedSignalError):
            extract_cycle(v, v, 0)


def test_cycle_power_per_cycle():
    v = _sine_stream(cycles=4)
    i = Waveform(np.concatenate([np.zeros(2 * N), v.samples[2 * N :] / 12.0]), v.sample_rate)
    p = cycle_power(v, i)
    np.testing.assert_allclose(p, [0, 0, 170.0**2 / 24, 170.0**2 / 24], atol=1e-9)


def test_sine_cycle_harmonic():
    x = sine_cycle(2.0, 0.0, 64, 3)
    X = dft(x).coefficients
    assert abs(X[3]) == pytest.approx(64.0, rel=1e-12)
