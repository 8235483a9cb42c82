"""Synthetic load scenarios: appliance archetypes, event schedules, aggregate demand, noise, dynamics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError
from .signal import (
    DEFAULT_MAINS_FREQ,
    DEFAULT_SAMPLES_PER_CYCLE,
    CyclePair,
    Waveform,
    add_noise,
    fft,
    sine_cycle,
)

V_RMS = 120.0
CATEGORIES = ("resistive", "inductive", "power-electronic", "composite")
STEADY_CYCLES = 12


@dataclass(frozen=True, eq=False)
class ApplianceModel:
    name: str
    category: str
    base_cycle: CyclePair
    snapshots: tuple  # full conjugate-symmetric current spectra
    nominal_p: float

    @property
    def n(self) -> int:
        return self.base_cycle.n


@dataclass(frozen=True)
class ApplianceSpec:
    """Declarative recipe for :func:`make_appliance`, as found in scenario config files."""

    name: str
    category: str
    nominal_p: float
    params: dict = field(default_factory=dict)

    def build(self, seed: int = 0, n: int = DEFAULT_SAMPLES_PER_CYCLE) -> ApplianceModel:
        return make_appliance(self.category, self.nominal_p, self.params, seed, name=self.name, n=n)


def _voltage(n: int, v_rms: float = V_RMS) -> np.ndarray:
    return sine_cycle(math.sqrt(2.0) * v_rms, 0.0, n)


def _pulse_shape(n: int, conduction_deg: float, shift_deg: float = 0.0) -> np.ndarray:
    """Odd-symmetric current pulses of the given conduction angle centred on the voltage peaks."""
    t = 2.0 * np.pi * np.arange(n) / n - math.radians(shift_deg)
    s = np.sin(t)
    floor = math.cos(math.radians(conduction_deg) / 2.0)
    return np.sign(s) * np.maximum(np.abs(s) - floor, 0.0)


def _scale_to_power(v, shape, p):
    p_unit = float(np.mean(v * shape))
    if p_unit <= 0:
        raise ConfigError("current shape draws no active power")
    return shape * (p / p_unit)


_PARAM_NAMES = {
    "resistive": {"n_snapshots", "sigma"},
    "inductive": {"n_snapshots", "sigma", "phi_deg", "h3"},
    "power-electronic": {"n_snapshots", "sigma", "conduction_deg", "shift_deg"},
    "composite": {"n_snapshots", "sigma", "phi_deg", "conduction_deg", "split"},
}


def make_appliance(category: str, nominal_p: float, params: dict | None = None, seed: int = 0,
                   name: str | None = None, n: int = DEFAULT_SAMPLES_PER_CYCLE, v_rms: float = V_RMS) -> ApplianceModel:
    """Build a canonical appliance cycle at ``v_rms`` and a bank of jittered spectral snapshots.

    Parameters (all optional): ``phi_deg`` lag for inductive loads, ``h3``
    relative third-harmonic content, ``conduction_deg``/``shift_deg`` for
    pulsed power-electronic current, ``split`` (inductive share of a
    composite), ``n_snapshots`` and ``sigma`` (relative harmonic magnitude
    jitter of the snapshots).
    """
    params = dict(params or {})
    if category not in CATEGORIES:
        raise ConfigError(f"unknown appliance category {category!r}; expected one of {CATEGORIES}")
    if not nominal_p > 0:
        raise ConfigError("nominal_p must be positive")
    unknown = set(params) - _PARAM_NAMES[category]
    if unknown:
        raise ConfigError(f"unknown {category} parameter(s): {sorted(unknown)}")
    n_snap = int(params.get("n_snapshots", 8))
    sigma = float(params.get("sigma", 0.05))
    if n_snap < 1 or sigma < 0:
        raise ConfigError("n_snapshots must be >= 1 and sigma >= 0")
    v = _voltage(n, v_rms)
    amp = math.sqrt(2.0)

    if category == "resistive":
        i = v * (nominal_p / v_rms**2)
    elif category == "inductive":
        phi = float(params.get("phi_deg", 30.0))
        h3 = float(params.get("h3", 0.0))
        if not 0.0 < phi < 90.0:
            raise ConfigError("phi_deg must lie in (0, 90)")
        i_rms = nominal_p / (v_rms * math.cos(math.radians(phi)))
        i = sine_cycle(amp * i_rms, -math.radians(phi), n) + sine_cycle(amp * i_rms * h3, -3 * math.radians(phi), n, 3)
    elif category == "power-electronic":
        cond = float(params.get("conduction_deg", 60.0))
        if not 0.0 < cond < 180.0:
            raise ConfigError("conduction_deg must lie in (0, 180)")
        i = _scale_to_power(v, _pulse_shape(n, cond, float(params.get("shift_deg", 0.0))), nominal_p)
    else:
        share = float(params.get("split", 0.5))
        if not 0.0 < share < 1.0:
            raise ConfigError("split must lie in (0, 1)")
        phi = math.radians(float(params.get("phi_deg", 25.0)))
        i_rms = share * nominal_p / (v_rms * math.cos(phi))
        i = sine_cycle(amp * i_rms, -phi, n) + _scale_to_power(
            v, _pulse_shape(n, float(params.get("conduction_deg", 70.0))), (1.0 - share) * nominal_p
        )

    base = CyclePair(v, i)
    rng = np.random.default_rng(seed)
    spec = fft(i)
    snaps = []
    half = n // 2
    for _ in range(n_snap):
        gain = 1.0 + sigma * rng.standard_normal(half + 1)
        gain[0] = 1.0
        s = spec.copy()
        s[: half + 1] *= gain
        s[half] = s[half].real
        s[half + 1 :] = np.conj(s[1:half][::-1])
        s.setflags(write=False)
        snaps.append(s)
    return ApplianceModel(name or f"{category}-{nominal_p:g}W", category, base, tuple(snaps), float(nominal_p))


def reconstruct_cw(model: ApplianceModel, rng) -> CyclePair:
    """Dynamic cycle: each frequency bin copies one uniformly chosen snapshot's coefficient.

    Real and imaginary parts come from the same snapshot and the upper half of
    the spectrum mirrors the lower half by conjugation, so the result is real.
    """
    if not model.snapshots:
        raise StateError(f"appliance {model.name!r} has no stored snapshots")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    snaps = np.asarray(model.snapshots)
    n = snaps.shape[1]
    half = n // 2
    pick = rng.integers(len(snaps), size=half + 1)
    coeffs = np.empty(n, dtype=complex)
    coeffs[: half + 1] = snaps[pick, np.arange(half + 1)]
    coeffs[0] = coeffs[0].real
    coeffs[half] = coeffs[half].real
    coeffs[half + 1 :] = np.conj(coeffs[1:half][::-1])
    x = fft(coeffs, inverse=True) / n
    if np.max(np.abs(x.imag)) > 1e-9:
        raise StateError("reconstructed cycle is not real")
    return CyclePair(model.base_cycle.v, x.real, model.base_cycle.mains_freq)


# --------------------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class ScenarioConfig:
    appliances: tuple
    duration: float = 24.0  # hours
    events_per_hour_mean: float = 15.0
    p_min: float = 50.0
    snr_db: float | None = None
    dynamics: bool = False
    seed: int = 0
    steady_cycles: int = STEADY_CYCLES

    def __post_init__(self):
        object.__setattr__(self, "appliances", tuple(self.appliances))
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.events_per_hour_mean > 0:
            raise ConfigError("events_per_hour_mean must be positive")
        if self.steady_cycles < 8:
            raise ConfigError("steady_cycles must be at least 8 to isolate each event")


@dataclass(frozen=True)
class TruthEvent:
    event_index: int
    appliance: int
    polarity: str
    time_s: float


@dataclass(frozen=True, eq=False)
class Scenario:
    v: Waveform
    i: Waveform
    truth: tuple
    appliances: tuple
    clean_i: Waveform | None = None

    def truth_csv(self) -> str:
        return truth_csv(self.truth, self.appliances)


def schedule_events(config: ScenarioConfig, rng) -> list[tuple[float, int]]:
    """(time in seconds, appliance id) per switching event, sorted by time.

    Hourly counts are Normal(mean, mean/4), truncated at zero and rounded;
    each event picks an appliance uniformly.
    """
    mean = config.events_per_hour_mean
    events = []
    full_hours = int(math.floor(config.duration))
    tail = config.duration - full_hours
    hours = [(h, 1.0) for h in range(full_hours)] + ([(full_hours, tail)] if tail > 1e-12 else [])
    for h, frac in hours:
        count = int(round(max(0.0, rng.normal(mean * frac, mean * frac / 4.0))))
        times = np.sort(rng.uniform(0.0, 3600.0 * frac, size=count)) + 3600.0 * h
        apps = rng.integers(len(config.appliances), size=count)
        events.extend(zip(times.tolist(), apps.tolist()))
    return events


def _models(config: ScenarioConfig, n: int):
    out = []
    for k, a in enumerate(config.appliances):
        out.append(a.build(seed=config.seed * 1000 + k, n=n) if isinstance(a, ApplianceSpec) else a)
    return tuple(out)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Aggregate voltage/current streams and the ground-truth event log.

    Each inter-event interval is materialized as at most ``steady_cycles``
    cycles of the steady aggregate (true times stay in the truth log), which
    keeps day-long scenarios small without changing any delta signature.
    """
    if len(config.appliances) < 2:
        raise ConfigError("a scenario needs at least two appliances")
    # independent streams: switching dynamics or SNR never perturb the schedule or the noise draw
    sched_ss, dyn_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(3)
    rng = np.random.default_rng(sched_ss)
    dyn_rng = np.random.default_rng(dyn_ss)
    first = config.appliances[0]
    n = first.n if isinstance(first, ApplianceModel) else DEFAULT_SAMPLES_PER_CYCLE
    models = _models(config, n)
    if any(m.n != n for m in models):
        raise ConfigError("all appliances must share one cycle length")
    f0 = models[0].base_cycle.mains_freq
    v_cycle = models[0].base_cycle.v

    events = schedule_events(config, rng)
    on = [None] * len(models)  # current cycle of each running appliance
    cycles = [int(math.floor(t * f0)) for t, _ in events]
    seg_lengths = []
    seg_currents = []
    truth = []
    pos = config.steady_cycles  # lead-in segment with everything off
    seg_lengths.append(config.steady_cycles)
    seg_currents.append(np.zeros(n))
    for e, (t, app) in enumerate(events):
        if on[app] is None:
            on[app] = reconstruct_cw(models[app], dyn_rng).i if config.dynamics else models[app].base_cycle.i
            polarity = "on"
        else:
            on[app] = None
            polarity = "off"
        truth.append(TruthEvent(pos * n, int(app), polarity, float(t)))
        gap = (cycles[e + 1] - cycles[e]) if e + 1 < len(events) else config.steady_cycles
        length = min(gap, config.steady_cycles)
        running = [c for c in on if c is not None]
        seg_currents.append(np.sum(running, axis=0) if running else np.zeros(n))
        seg_lengths.append(length)
        pos += length

    i_clean = np.concatenate([np.tile(c, k) for c, k in zip(seg_currents, seg_lengths)])
    total_cycles = sum(seg_lengths)
    v = Waveform(np.tile(v_cycle, total_cycles), n * f0, f0)
    i = Waveform(i_clean, n * f0, f0)
    noise_seed = int(noise_ss.generate_state(2, np.uint64)[0] >> np.uint64(1))
    noisy = add_noise(i, config.snr_db, noise_seed) if config.snr_db is not None else i
    return Scenario(v, noisy, tuple(truth), models, i)


def truth_csv(truth, appliances=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_index", "appliance", "name", "polarity", "time_s"])
    for ev in truth:
        name = appliances[ev.appliance].name if appliances else ""
        w.writerow([ev.event_index, ev.appliance, name, ev.polarity, repr(ev.time_s)])
    return buf.getvalue()


def read_truth_csv(text: str) -> list[TruthEvent]:
    rows = csv.DictReader(io.StringIO(text))
    return [TruthEvent(int(r["event_index"]), int(r["appliance"]), r["polarity"], float(r["time_s"])) for r in rows]


def default_bank(count: int = 6) -> list[ApplianceSpec]:
    """A well-separated mix of resistive, inductive, power-electronic and composite loads."""
    bank = [
        ApplianceSpec("kettle", "resistive", 1500.0),
        ApplianceSpec("fridge", "inductive", 250.0, {"phi_deg": 40.0, "h3": 0.1}),
        ApplianceSpec("computer", "power-electronic", 300.0, {"conduction_deg": 50.0}),
        ApplianceSpec("washer", "composite", 700.0, {"phi_deg": 30.0, "conduction_deg": 70.0, "split": 0.6}),
        ApplianceSpec("heater", "resistive", 600.0),
        ApplianceSpec("pump", "inductive", 1000.0, {"phi_deg": 25.0}),
        ApplianceSpec("tv", "power-electronic", 120.0, {"conduction_deg": 80.0}),
        ApplianceSpec("microwave", "composite", 1200.0, {"phi_deg": 15.0, "conduction_deg": 90.0, "split": 0.3}),
    ]
    if not 2 <= count <= len(bank):
        raise ConfigError(f"default bank holds 2..{len(bank)} appliances")
    return bank[:count]


def export_scenario(scenario: Scenario, path, encoding: str = "text") -> dict:
    """Write the aggregate streams as a one-channel corpus plus ``truth.csv``; returns written paths."""
    from pathlib import Path

    from .ingest import ChannelMap, write_waveform_corpus

    out = Path(path)
    write_waveform_corpus(out, ChannelMap(((1, "mains"),), (1,)), scenario.v, {1: scenario.i}, encoding)
    names = "".join(f"appliance.{k} = {m.name}\n" for k, m in enumerate(scenario.appliances))
    with open(out / "header.txt", "a") as fh:
        fh.write(names)
    (out / "truth.csv").write_text(scenario.truth_csv())
    return {"corpus": str(out), "truth": str(out / "truth.csv")}
