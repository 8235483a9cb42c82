import math

import numpy as np
import pytest

from nilmws.errors import ConfigError, DegenerateInputError, SizeError
from nilmws.features import (
    DIMENSIONS,
    HAR,
    PQ,
    SPACES,
    WS,
    extract_har,
    extract_pq,
    extract_ws,
    feature_matrix,
    featurize,
    har_band_of,
    mean_curve,
)
from nilmws.signal import CyclePair, sine_cycle
from oracles import ellipse_cycle

N = 256
V_PEAK = 120.0 * math.sqrt(2)


def _pair(i, v=None):
    return CyclePair(sine_cycle(V_PEAK, 0.0, N) if v is None else v, np.asarray(i, float))


def _square(n=N, amp=1.0):
    return amp * np.where(np.arange(n) < n // 2, 1.0, -1.0)


class TestPQ:
    @pytest.mark.parametrize("phi_deg", [0, 30, -45, 80])
    def test_sinusoid_powers(self, phi_deg):
        phi = math.radians(phi_deg)
        c = _pair(sine_cycle(10.0, -phi, N))
        out = extract_pq(c)
        s = (V_PEAK / math.sqrt(2)) * (10.0 / math.sqrt(2))
        assert out.p == pytest.approx(s * math.cos(phi), rel=5e-3, abs=1e-9 * s)
        assert out.q == pytest.approx(s * math.sin(phi), rel=5e-3, abs=1e-9 * s)
        assert out.thd_o == pytest.approx(0.0, abs=1e-9)
        assert out.thd_e == pytest.approx(0.0, abs=1e-9)

    def test_worked_example(self):
        # 120 V rms, 10 A rms lagging by 60 degrees
        out = extract_pq(_pair(sine_cycle(10.0 * math.sqrt(2), -math.pi / 3, N)))
        assert out.p == pytest.approx(600.0, rel=1e-9)
        assert out.q == pytest.approx(1039.2305, rel=1e-6)

    def test_square_wave_thd(self):
        # analytic: sqrt(sum over odd k>=3 of 1/k^2) = sqrt(pi^2/8 - 1)
        out = extract_pq(_pair(_square()))
        assert out.thd_o == pytest.approx(math.sqrt(math.pi**2 / 8 - 1), rel=0.01)
        assert out.thd_o == pytest.approx(0.4834, rel=0.01)
        assert out.thd_e == pytest.approx(0.0, abs=1e-9)

    def test_even_harmonic_goes_to_thd_e(self):
        i = sine_cycle(1.0) + 0.2 * sine_cycle(1.0, harmonic=2) + 0.1 * sine_cycle(1.0, harmonic=3)
        out = extract_pq(_pair(i))
        assert out.thd_e == pytest.approx(0.2, rel=1e-9)
        assert out.thd_o == pytest.approx(0.1, rel=1e-9)

    def test_harmonic_cap(self):
        i = sine_cycle(1.0) + 0.3 * sine_cycle(1.0, harmonic=41)
        assert extract_pq(_pair(i)).thd_o == pytest.approx(0.3, rel=1e-9)
        assert extract_pq(_pair(i), max_harmonic=37).thd_o == pytest.approx(0.0, abs=1e-12)

    def test_zero_current_is_degenerate(self):
        with pytest.raises(DegenerateInputError):
            extract_pq(_pair(np.zeros(N)))

    def test_linear_in_current_scale(self):
        c = _pair(sine_cycle(3.0, -0.4) + 0.5 * sine_cycle(1.0, 0.3, harmonic=5))
        a, b = extract_pq(c), extract_pq(c.scaled(2.5))
        assert b.p == pytest.approx(2.5 * a.p, rel=1e-12)
        assert b.q == pytest.approx(2.5 * a.q, rel=1e-12)
        assert b.thd_o == pytest.approx(a.thd_o, rel=1e-12)


class TestHAR:
    def test_shape_and_unit_sum(self):
        rng = np.random.default_rng(0)
        out = extract_har(_pair(rng.normal(size=N))).bands
        assert out.shape == (DIMENSIONS[HAR],)
        assert out.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all(out >= 0)

    def test_pure_fundamental_lands_in_its_band(self):
        out = extract_har(_pair(sine_cycle(5.0))).bands
        assert out[har_band_of(60.0)] == pytest.approx(1.0, rel=1e-12)
        assert har_band_of(60.0) == 1

    def test_harmonic_energy_split(self):
        i = sine_cycle(1.0) + 0.5 * sine_cycle(1.0, harmonic=7)
        out = extract_har(_pair(i)).bands
        assert out[har_band_of(420.0)] == pytest.approx(0.25 / 1.25, rel=1e-9)

    def test_scale_invariant(self):
        i = sine_cycle(1.0, 0.2) + 0.3 * sine_cycle(1.0, harmonic=3)
        np.testing.assert_allclose(extract_har(_pair(i)).bands, extract_har(_pair(7 * i)).bands, atol=1e-14)

    def test_low_rate_rejected(self):
        with pytest.raises(SizeError):
            extract_har(CyclePair(sine_cycle(1.0, n=64), sine_cycle(1.0, n=64)))


class TestWS:
    @pytest.mark.parametrize("phi_deg", [15, 30, 60, 90, -30])
    @pytest.mark.parametrize("a,b", [(1, 1), (1, 10), (10, 1), (10, 10)])
    def test_ellipse_area_and_direction(self, phi_deg, a, b):
        phi = math.radians(phi_deg)
        v, i = ellipse_cycle(a, b, phi)
        ws = extract_ws(CyclePair(v, i))
        assert ws.area_enclosed == pytest.approx(math.pi * a * b * abs(math.sin(phi)), rel=0.01)
        assert ws.looping_direction == int(np.sign(math.sin(phi)))
        assert ws.num_intersections == 0

    def test_resistive_line(self):
        v, i = ellipse_cycle(170.0, 5.0, 0.0)
        ws = extract_ws(CyclePair(v, i))
        assert ws.looping_direction == 0
        assert ws.area_enclosed == pytest.approx(0.0, abs=1e-9)
        assert ws.curve_nonlinearity == pytest.approx(0.0, abs=1e-9)
        assert ws.middle_slope == pytest.approx(5.0 / 170.0, rel=1e-9)
        assert ws.span == pytest.approx(10.0, rel=1e-3)

    def test_span_is_peak_to_peak(self):
        c = _pair(sine_cycle(4.0) + 1.5 * sine_cycle(1.0, harmonic=3))
        assert extract_ws(c).span == pytest.approx(np.ptp(c.i), rel=0, abs=0)

    def test_time_reversal_flips_direction_only(self):
        v, i = ellipse_cycle(170.0, 8.0, 0.5)
        fwd = extract_ws(CyclePair(v, i))
        rev = extract_ws(CyclePair(v[::-1].copy(), i[::-1].copy()))
        assert rev.looping_direction == -fwd.looping_direction
        assert rev.area_enclosed == pytest.approx(fwd.area_enclosed, rel=1e-12)
        assert rev.span == fwd.span

    def test_figure_eight(self):
        t = 2 * np.pi * np.arange(N) / N
        ws = extract_ws(CyclePair(np.sin(t), np.sin(2 * t)))
        assert ws.num_intersections == 1

    def test_mean_curve_of_ellipse_is_straight(self):
        v, i = ellipse_cycle(1.0, 1.0, 0.7)
        grid, b = mean_curve(v, i)
        # both arcs are symmetric about the line i = v cos(phi)
        np.testing.assert_allclose(b, grid * math.cos(0.7), atol=5e-3)

    def test_nonlinear_load_has_curvature(self):
        v = sine_cycle(V_PEAK)
        lin = extract_ws(_pair(v / 20.0))
        bent = extract_ws(_pair(v / 20.0 + 2.0 * sine_cycle(1.0, harmonic=3)))
        assert bent.curve_nonlinearity > lin.curve_nonlinearity + 1.0

    def test_flat_voltage(self):
        with pytest.raises(DegenerateInputError):
            extract_ws(CyclePair(np.zeros(N), sine_cycle(1.0)))

    def test_span_tracks_power_for_resistive_bank(self):
        rng = np.random.default_rng(3)
        v = sine_cycle(V_PEAK)
        spans, powers = [], []
        for r in np.linspace(5, 200, 20):
            i = v / r
            noise = rng.normal(scale=np.sqrt(np.mean(i**2) / 1000.0), size=N)
            c = _pair(i + noise, v)
            spans.append(extract_ws(c).span)
            powers.append(extract_pq(c).p)
        assert np.corrcoef(spans, powers)[0, 1] >= 0.95


class TestFeaturize:
    def test_dimensions(self):
        c = _pair(sine_cycle(3.0, -0.3) + 0.2 * sine_cycle(1.0, harmonic=3))
        for space in SPACES:
            fv = featurize(c, space, label=4)
            assert len(fv) == DIMENSIONS[space]
            assert fv.label == 4

    def test_unknown_space(self):
        with pytest.raises(ConfigError):
            featurize(_pair(sine_cycle(1.0)), "XYZ")

    def test_off_events_are_oriented(self):
        from types import SimpleNamespace

        c = _pair(sine_cycle(3.0, -0.3))
        on = SimpleNamespace(cycle=c, polarity="on", label=None)
        off = SimpleNamespace(cycle=c.scaled(-1.0), polarity="off", label=None)
        for space in (PQ, WS):
            np.testing.assert_allclose(featurize(on, space).values, featurize(off, space).values, atol=1e-9)
        assert featurize(off, PQ, orient=False).values[0] < 0

    def test_empty_matrix(self):
        assert feature_matrix([], WS).shape == (0, 7)
