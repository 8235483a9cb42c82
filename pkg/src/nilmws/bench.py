"""Monte-Carlo experiments: precision metric, trial runner, sweeps and reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import BoundaryError, ConfigError, InsufficientDataError
from .events import choose_k, detect_events, extract_delta, kmeans, purity, zscore
from .features import PQ, SPACES, feature_matrix
from .learn import ADABOOST, ALGORITHMS, DEFAULTS, split, train
from .optimize import GENE_SPACES, DeConfig, model_select
from .simulate import ScenarioConfig, generate_scenario

log = logging.getLogger(__name__)

REPORT_VERSION = 1
TRUTH_WINDOW_CYCLES = 2
AXES = ("split", "p_min", "snr_db", "dynamics")


def precision(predicted, truth) -> float:
    """Fraction of events whose predicted class equals the true class."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ConfigError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ConfigError("precision of an empty prediction set is undefined")
    return int(np.sum(predicted == truth)) / predicted.size


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any sequence of printable parts."""
    h = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


@dataclass(frozen=True)
class ExperimentSpec:
    source: ScenarioConfig | str
    spaces: tuple = ("WS",)
    algorithms: tuple = (ADABOOST,)
    fractions: tuple = (0.45, 0.10, 0.45)
    p_min: float = 50.0
    trials: int = 25
    model_selection: bool = False
    de: DeConfig = DeConfig(M=10, max_iters=10, stall_iters=5)
    params: dict = field(default_factory=dict)  # algorithm -> parameter overrides
    seed: int = 0
    n_clusters: int | None = None  # corpus sources without truth; None scans k

    def __post_init__(self):
        object.__setattr__(self, "spaces", tuple(self.spaces))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.spaces or not self.algorithms:
            raise ConfigError("need at least one feature space and one algorithm")
        bad = [s for s in self.spaces if s not in SPACES] + [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown space/algorithm: {bad}")
        if self.p_min < 0:
            raise ConfigError("p_min must be non-negative")
        if len(self.fractions) != 3 or abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) < 0:
            raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {self.fractions}")
        if self.fractions[0] == 0:
            raise ConfigError("the training fraction must be positive")
        for alg, p in self.params.items():
            if alg not in DEFAULTS:
                raise ConfigError(f"parameters given for unknown algorithm {alg!r}")
            unknown = set(p) - set(DEFAULTS[alg])
            if unknown:
                raise ConfigError(f"unknown {alg} parameter(s): {sorted(unknown)}")


@dataclass
class CellMetrics:
    overall: list = field(default_factory=list)
    train: list = field(default_factory=list)
    test: list | None = field(default_factory=list)
    p_c: list = field(default_factory=list)
    p_t: list = field(default_factory=list)
    confusion: np.ndarray | None = None
    selected: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for name in ("overall", "train", "test"):
            xs = getattr(self, name)
            if xs is None:
                continue
            a = np.array(xs, dtype=float)
            out[name] = {"max": float(a.max()), "mean": float(a.mean()), "median": float(np.median(a))}
        return out


@dataclass
class MetricsReport:
    spec: dict
    cells: dict  # "space/algorithm" -> CellMetrics
    trials: list  # per-trial bookkeeping (events, purity, seeds)
    classes: list

    def cell(self, space: str, algorithm: str) -> CellMetrics:
        return self.cells[f"{space}/{algorithm}"]

    def median(self, space: str, algorithm: str, which: str = "overall") -> float:
        return float(np.median(getattr(self.cell(space, algorithm), which)))

    def to_dict(self) -> dict:
        cells = {}
        for key, c in self.cells.items():
            cells[key] = {
                "overall": c.overall,
                "train": c.train,
                "test": c.test,
                "p_c": c.p_c,
                "p_t": c.p_t,
                "confusion": c.confusion.tolist() if c.confusion is not None else None,
                "selected": c.selected,
                "summary": c.summary(),
            }
        return {"version": REPORT_VERSION, "spec": self.spec, "classes": self.classes, "trials": self.trials, "cells": cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self, extra: dict | None = None) -> str:
        """Long form: one row per (cell, trial, subset)."""
        extra = extra or {}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(extra) + ["space", "algorithm", "trial", "subset", "eta"])
        for key in sorted(self.cells):
            space, alg = key.split("/", 1)
            c = self.cells[key]
            for t in range(len(c.overall)):
                for subset in ("overall", "train", "test"):
                    xs = getattr(c, subset)
                    if xs is None:
                        continue
                    w.writerow(list(extra.values()) + [space, alg, t, subset, repr(float(xs[t]))])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        if d.get("version") != REPORT_VERSION:
            raise ConfigError(f"report version {d.get('version')} unsupported")
        cells = {}
        for key, c in d["cells"].items():
            conf = np.array(c["confusion"], dtype=int) if c.get("confusion") is not None else None
            cells[key] = CellMetrics(c["overall"], c["train"], c["test"], c["p_c"], c["p_t"], conf, c.get("selected", []))
        return cls(d["spec"], cells, d["trials"], d["classes"])


# --------------------------------------------------------------------------- trial data


@dataclass(frozen=True, eq=False)
class TrialData:
    deltas: list
    labels: np.ndarray
    classes: list
    info: dict


def _match_truth(detections, truth, n: int):
    """Pair detections with logged events lying within the truth window; returns (pairs, missed)."""
    tol = TRUTH_WINDOW_CYCLES * n
    times = np.array([ev.event_index for ev in truth], dtype=np.int64)
    used = np.zeros(len(times), dtype=bool)
    pairs = []
    for d in detections:
        if not len(times):
            break
        j = int(np.searchsorted(times, d))
        best = None
        for k in (j - 1, j):
            if 0 <= k < len(times) and not used[k] and abs(int(times[k]) - d) <= tol:
                if best is None or abs(int(times[k]) - d) < abs(int(times[best]) - d):
                    best = k
        if best is not None:
            used[best] = True
            pairs.append((d, truth[best]))
    return pairs, int((~used).sum())


def _deltas(v, i, p_min):
    out = []
    for at in detect_events(i, p_min, v):
        try:
            d = extract_delta(v, i, at)
        except BoundaryError:
            continue
        if abs(d.p_delta) >= p_min:
            out.append(d)
    return out


def scenario_trial(config: ScenarioConfig, p_min: float) -> TrialData:
    sc = generate_scenario(config)
    n = sc.v.samples_per_cycle
    deltas = _deltas(sc.v, sc.i, p_min)
    pairs, missed = _match_truth([d.event_index for d in deltas], sc.truth, n)
    by_index = {d.event_index: d for d in deltas}
    labeled = [by_index[at].with_label(ev.appliance) for at, ev in pairs]
    info = {
        "truth_events": len(sc.truth),
        "detected": len(deltas),
        "matched": len(labeled),
        "missed": missed,
        "label_source": "truth",
    }
    return TrialData(labeled, np.array([d.label for d in labeled], dtype=int), [a.name for a in sc.appliances], info)


def corpus_trial(path, p_min: float, seed: int, n_clusters=None, cluster_space: str = PQ) -> TrialData:
    from .ingest import read_waveform_corpus
    from .simulate import read_truth_csv

    corpus = read_waveform_corpus(path)
    v, i = corpus.voltage, corpus.mains_current()
    deltas = _deltas(v, i, p_min)
    truth_file = Path(path) / "truth.csv"
    info = {"detected": len(deltas)}
    if truth_file.is_file():
        truth = read_truth_csv(truth_file.read_text())
        pairs, missed = _match_truth([d.event_index for d in deltas], truth, v.samples_per_cycle)
        by_index = {d.event_index: d for d in deltas}
        labeled = [by_index[at].with_label(ev.appliance) for at, ev in pairs]
        n_cls = max((ev.appliance for ev in truth), default=-1) + 1
        names = [corpus.header.get(f"appliance.{k}", f"appliance_{k}") for k in range(n_cls)]
        info.update(truth_events=len(truth), matched=len(labeled), missed=missed, label_source="truth")
        return TrialData(labeled, np.array([d.label for d in labeled], dtype=int), names, info)
    if len(deltas) < 2:
        raise InsufficientDataError(f"only {len(deltas)} events survive p_min={p_min}; nothing to cluster")
    pts = zscore(feature_matrix(deltas, cluster_space))
    cl = kmeans(pts, n_clusters, seed) if n_clusters else choose_k(pts, (2, min(40, len(pts) - 1)), seed)
    labeled = [d.with_label(int(c)) for d, c in zip(deltas, cl.assignments)]
    info.update(matched=len(labeled), label_source="cluster", k=cl.k)
    return TrialData(labeled, cl.assignments.astype(int), [f"cluster_{k}" for k in range(cl.k)], info)


# --------------------------------------------------------------------------- runner


def _spec_dict(spec: ExperimentSpec) -> dict:
    src = spec.source
    if isinstance(src, ScenarioConfig):
        source = {
            "kind": "scenario",
            "appliances": [getattr(a, "name", str(a)) for a in src.appliances],
            "duration": src.duration,
            "events_per_hour_mean": src.events_per_hour_mean,
            "snr_db": src.snr_db,
            "dynamics": src.dynamics,
            "seed": src.seed,
        }
    else:
        source = {"kind": "corpus", "path": str(src)}
    return {
        "source": source,
        "spaces": list(spec.spaces),
        "algorithms": list(spec.algorithms),
        "fractions": list(spec.fractions),
        "p_min": spec.p_min,
        "trials": spec.trials,
        "model_selection": spec.model_selection,
        "params": {k: dict(sorted(v.items())) for k, v in sorted(spec.params.items())},
        "seed": spec.seed,
    }


def trial_data(spec: ExperimentSpec, trial: int) -> TrialData:
    """Events and labels for one trial; scenario sources are regenerated under a trial seed."""
    if isinstance(spec.source, ScenarioConfig):
        cfg = replace(spec.source, seed=derive_seed(spec.seed, "scenario", trial))
        data = scenario_trial(cfg, spec.p_min)
    else:
        data = corpus_trial(spec.source, spec.p_min, derive_seed(spec.seed, "cluster"), spec.n_clusters)
    need = 3 * len(data.classes)
    if len(data.deltas) < need:
        raise InsufficientDataError(
            f"trial {trial}: {len(data.deltas)} events left after the p_min={spec.p_min} W filter, need {need}"
        )
    return data


def run_experiment(spec: ExperimentSpec, progress=None) -> MetricsReport:
    cells = {f"{s}/{a}": CellMetrics(test=None if spec.fractions[2] == 0 else []) for s in spec.spaces for a in spec.algorithms}
    trials = []
    classes = None
    for t in range(spec.trials):
        data = trial_data(spec, t)
        classes = classes or data.classes
        C = len(data.classes)
        split_seed = derive_seed(spec.seed, "split", t)
        train_seed = derive_seed(spec.seed, "train", t)
        info = dict(data.info, trial=t, events=len(data.deltas))
        trials.append(info)
        for space in spec.spaces:
            X = feature_matrix(data.deltas, space)
            sp = split(X, data.labels, spec.fractions, split_seed)
            for alg in spec.algorithms:
                cell = cells[f"{space}/{alg}"]
                params = dict(spec.params.get(alg, {}))
                if spec.model_selection and alg in GENE_SPACES and len(sp.cv):
                    sel = model_select(alg, sp, replace(spec.de, seed=derive_seed(spec.seed, "de", t)), train_seed, C)
                    params.update(sel.params)
                    cell.selected.append({k: params[k] for k in sorted(sel.params)})
                model = train(alg, sp, train_seed, C, **params)
                pred_all = model.predict(X)
                cell.overall.append(precision(pred_all, data.labels))
                cell.train.append(precision(model.predict(sp.train.X), sp.train.y))
                if cell.test is not None:
                    cell.test.append(precision(model.predict(sp.test.X), sp.test.y) if len(sp.test) else math.nan)
                cell.p_c.append(int(np.sum(pred_all == data.labels)))
                cell.p_t.append(int(len(data.labels)))
                conf = np.zeros((C, C), dtype=int)
                np.add.at(conf, (data.labels, pred_all), 1)
                cell.confusion = conf if cell.confusion is None else cell.confusion + conf
        if progress:
            progress(t)
    return MetricsReport(_spec_dict(spec), cells, trials, classes or [])


# --------------------------------------------------------------------------- sweeps


def _with_axis(spec: ExperimentSpec, axis: str, value) -> ExperimentSpec:
    if axis == "split":
        return replace(spec, fractions=tuple(value))
    if axis == "p_min":
        return replace(spec, p_min=float(value))
    if not isinstance(spec.source, ScenarioConfig):
        raise ConfigError(f"axis {axis!r} needs a synthetic scenario source")
    if axis == "snr_db":
        return replace(spec, source=replace(spec.source, snr_db=None if value is None else float(value)))
    if axis == "dynamics":
        return replace(spec, source=replace(spec.source, dynamics=bool(value)))
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list

    def to_csv(self) -> str:
        out = []
        for k, (val, rep) in enumerate(zip(self.values, self.reports)):
            text = rep.to_csv({self.axis: json.dumps(val)})
            out.append(text if k == 0 else text.split("\n", 1)[1])
        return "".join(out)

    def to_json(self) -> str:
        body = {"version": REPORT_VERSION, "axis": self.axis, "values": self.values, "reports": [r.to_dict() for r in self.reports]}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def medians(self, space: str, algorithm: str, which: str = "overall") -> list:
        return [r.median(space, algorithm, which) for r in self.reports]


def sweep(spec: ExperimentSpec, axis: str, values, common_random_numbers: bool = True, progress=None) -> SweepResult:
    """One experiment per axis value.

    With common random numbers (the default) every value reuses the same
    trial seeds, so schedules, splits and noise realizations differ only
    through the swept quantity. Otherwise the value is mixed into the seed.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    reports = []
    for val in values:
        s = _with_axis(spec, axis, val)
        if not common_random_numbers:
            s = replace(s, seed=derive_seed(spec.seed, axis, val))
        reports.append(run_experiment(s, progress))
    return SweepResult(axis, values, reports)


def disparity(off: MetricsReport, on: MetricsReport, space: str, algorithm: str, which: str = "overall") -> float:
    """Drop in median precision when load dynamics are switched on."""
    return off.median(space, algorithm, which) - on.median(space, algorithm, which)


def write_report(report, out_dir, stem: str = "report") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    j, c = out / f"{stem}.json", out / f"{stem}.csv"
    j.write_text(report.to_json())
    c.write_text(report.to_csv())
    return j, c


def summary_table(report: MetricsReport) -> str:
    rows = ["space      algorithm  overall  train    test"]
    for key in sorted(report.cells):
        space, alg = key.split("/", 1)
        s = report.cells[key].summary()
        test = f"{s['test']['median']:.4f}" if "test" in s else "  -   "
        rows.append(f"{space:<10} {alg:<10} {s['overall']['median']:.4f}   {s['train']['median']:.4f}   {test}")
    return "\n".join(rows) + "\n"
