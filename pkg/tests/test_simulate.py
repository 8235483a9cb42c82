import math
from dataclasses import replace

import numpy as np
import pytest

from nilmws.errors import ConfigError, StateError
from nilmws.events import detect_events, extract_delta
from nilmws.features import extract_pq, extract_ws
from nilmws.signal import fft, rms
from nilmws.simulate import (
    ApplianceSpec,
    ScenarioConfig,
    default_bank,
    export_scenario,
    generate_scenario,
    make_appliance,
    read_truth_csv,
    reconstruct_cw,
    schedule_events,
)


class TestAppliances:
    def test_resistive_power(self):
        m = make_appliance("resistive", 600.0)
        pq = extract_pq(m.base_cycle)
        assert pq.p == pytest.approx(600.0, abs=1.0)
        assert abs(pq.q) < 1e-6

    def test_inductive_loops_positive(self):
        m = make_appliance("inductive", 500.0, {"phi_deg": 30.0})
        assert extract_ws(m.base_cycle).looping_direction == 1
        assert extract_pq(m.base_cycle).p == pytest.approx(500.0, rel=1e-6)

    def test_power_electronic_shape(self):
        pe = make_appliance("power-electronic", 300.0)
        res = make_appliance("resistive", 300.0)
        assert extract_pq(pe.base_cycle).thd_o > 0.2
        assert abs(extract_ws(pe.base_cycle).middle_slope) * 10 < abs(extract_ws(res.base_cycle).middle_slope)

    def test_composite_power(self):
        m = make_appliance("composite", 800.0, {"split": 0.4})
        assert extract_pq(m.base_cycle).p == pytest.approx(800.0, rel=1e-6)

    @pytest.mark.parametrize(
        "cat,p,params",
        [("gas", 100, {}), ("resistive", -5, {}), ("inductive", 100, {"phi_deg": 95}), ("resistive", 100, {"phi_deg": 10}),
         ("resistive", 100, {"sigma": -0.1})],
    )
    def test_invalid(self, cat, p, params):
        with pytest.raises(ConfigError):
            make_appliance(cat, p, params)

    def test_snapshot_count(self):
        assert len(make_appliance("resistive", 100, {"n_snapshots": 3}).snapshots) == 3


class TestReconstruct:
    def test_single_snapshot_identity(self):
        m = make_appliance("inductive", 400.0, {"n_snapshots": 1, "sigma": 0.2, "h3": 0.2})
        c = reconstruct_cw(m, np.random.default_rng(0))
        expected = np.real(fft(np.asarray(m.snapshots[0]), inverse=True)) / m.n
        assert np.max(np.abs(c.i - expected)) <= 1e-9

    def test_bins_come_from_snapshots(self):
        m = make_appliance("power-electronic", 200.0, {"n_snapshots": 4, "sigma": 0.3})
        spec = fft(reconstruct_cw(m, 3).i)
        snaps = np.asarray(m.snapshots)
        for k in range(m.n):
            assert np.min(np.abs(snaps[:, k] - spec[k])) <= 1e-9 * max(1.0, np.abs(snaps[:, k]).max())

    def test_two_snapshot_frequency(self):
        base = make_appliance("inductive", 400.0, {"n_snapshots": 1, "sigma": 0.0, "h3": 0.2})
        s0 = np.array(base.snapshots[0])
        s1 = s0.copy()
        s1[3] *= 1.5
        s1[-3] = np.conj(s1[3])
        m = replace(base, snapshots=(s0, s1))
        rng = np.random.default_rng(0)
        hits = sum(abs(fft(reconstruct_cw(m, rng).i)[3]) > 1.25 * abs(s0[3]) for _ in range(10_000))
        assert hits / 10_000 == pytest.approx(0.5, abs=0.02)

    def test_power_within_snapshot_envelope(self):
        # voltage is a pure sinusoid, so active power depends on the fundamental bin alone
        m = make_appliance("composite", 700.0, {"n_snapshots": 5, "sigma": 0.2})
        v = m.base_cycle.v
        powers = [float(np.mean(v * np.real(fft(np.asarray(s), inverse=True)) / m.n)) for s in m.snapshots]
        lo, hi = min(powers), max(powers)
        rng = np.random.default_rng(1)
        for _ in range(200):
            c = reconstruct_cw(m, rng)
            p = float(np.mean(c.v * c.i))
            assert lo - 0.01 * abs(lo) <= p <= hi + 0.01 * abs(hi)

    def test_empty_db(self):
        m = replace(make_appliance("resistive", 100.0), snapshots=())
        with pytest.raises(StateError):
            reconstruct_cw(m, 0)


def _two_app(**kw):
    bank = (ApplianceSpec("a", "resistive", 800.0), ApplianceSpec("b", "inductive", 300.0, {"phi_deg": 35.0}))
    return ScenarioConfig(bank, **{"duration": 1.0, **kw})


class TestScenario:
    def test_events_recovered(self):
        sc = generate_scenario(_two_app(seed=4))
        det = detect_events(sc.i, 50.0, sc.v)
        assert det == [ev.event_index for ev in sc.truth]
        for ev in sc.truth:
            d = extract_delta(sc.v, sc.i, ev.event_index)
            ref = sc.appliances[ev.appliance].base_cycle.i * (1 if ev.polarity == "on" else -1)
            assert rms(d.cycle.i - ref) <= 0.01 * rms(ref)

    def test_superposition_exact(self):
        cfg = _two_app(seed=1)
        sc = generate_scenario(cfg)
        n = sc.v.samples_per_cycle
        on = set()
        bounds = [ev.event_index for ev in sc.truth] + [len(sc.i)]
        for ev, end in zip(sc.truth, bounds[1:]):
            on ^= {ev.appliance}
            expected = sum((sc.appliances[a].base_cycle.i for a in on), np.zeros(n))
            seg = sc.i.samples[ev.event_index : end].reshape(-1, n)
            assert np.array_equal(seg, np.broadcast_to(expected, seg.shape))

    @pytest.mark.parametrize("dynamics,tol", [(False, 0.01), (True, 0.15)])
    def test_truth_power_steps(self, dynamics, tol):
        sc = generate_scenario(_two_app(seed=2, dynamics=dynamics))
        n = sc.v.samples_per_cycle
        p = np.mean((sc.v.samples * sc.i.samples).reshape(-1, n), axis=1)
        for ev in sc.truth:
            k = ev.event_index // n
            step = p[k + 2] - p[k - 2]
            nominal = sc.appliances[ev.appliance].nominal_p * (1 if ev.polarity == "on" else -1)
            assert step == pytest.approx(nominal, rel=tol)

    def test_reproducible(self):
        cfg = _two_app(seed=9, snr_db=20.0, dynamics=True)
        a, b = generate_scenario(cfg), generate_scenario(cfg)
        assert np.array_equal(a.i.samples, b.i.samples) and a.truth == b.truth

    def test_dynamics_share_schedule_and_noise(self):
        a = generate_scenario(_two_app(seed=3, snr_db=20.0))
        b = generate_scenario(_two_app(seed=3, snr_db=20.0, dynamics=True))
        assert a.truth == b.truth
        np.testing.assert_allclose(a.i.samples - a.clean_i.samples, b.i.samples - b.clean_i.samples, atol=0, rtol=0.2)

    def test_two_week_event_count(self):
        cfg = ScenarioConfig(tuple(default_bank(6)), duration=14 * 24.0)
        counts = [len(schedule_events(cfg, np.random.default_rng(s))) for s in range(5)]
        for c in counts:
            assert c == pytest.approx(5040, rel=0.05)

    @pytest.mark.parametrize("kw", [{"duration": 0.0}, {"events_per_hour_mean": -1.0}, {"steady_cycles": 4}])
    def test_invalid_config(self, kw):
        with pytest.raises(ConfigError):
            _two_app(**kw)

    def test_needs_two_appliances(self):
        with pytest.raises(ConfigError):
            generate_scenario(ScenarioConfig((ApplianceSpec("a", "resistive", 100.0),)))

    def test_export(self, tmp_path):
        from nilmws.ingest import read_waveform_corpus

        sc = generate_scenario(_two_app(seed=5))
        paths = export_scenario(sc, tmp_path / "corp")
        corpus = read_waveform_corpus(paths["corpus"])
        assert np.array_equal(corpus.mains_current().samples, sc.i.samples)
        truth = read_truth_csv((tmp_path / "corp" / "truth.csv").read_text())
        assert [t.event_index for t in truth] == [t.event_index for t in sc.truth]
        assert corpus.header["appliance.0"] == "a"
