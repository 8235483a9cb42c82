"""Command implementations shared by the HTTP routes and, through them, the CLI.

Every handler takes a validated request model, writes its artifacts under
``request.out`` (a directory) and returns a :class:`CommandResponse`.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..bench import (
    ExperimentSpec,
    MetricsReport,
    _deltas,
    _match_truth,
    precision,
    run_experiment,
    summary_table,
    sweep,
)
from ..errors import ConfigError, DataError, InsufficientDataError
from ..events import DeltaSignature, choose_k, kmeans, purity, zscore
from ..features import HAR, PQ, PQ_NAMES, WS, WS_NAMES, DIMENSIONS, featurize
from ..ingest import SignatureRecord, read_model, read_signature_db, read_waveform_corpus, write_model, write_signature_db
from ..learn import DEFAULTS, split, train
from ..optimize import DeConfig, history_csv, model_select, GENE_SPACES
from ..signal import CyclePair
from ..simulate import ApplianceSpec, ScenarioConfig, default_bank, export_scenario, generate_scenario, read_truth_csv
from . import schemas as S

DB_NAME = "signatures.jsonl"
FEATURE_NAMES = {PQ: PQ_NAMES, WS: WS_NAMES, HAR: tuple(f"band_{k:02d}" for k in range(DIMENSIONS[HAR]))}


def _out(req) -> Path:
    out = Path(req.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> str:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return str(path)


def _config(req) -> dict:
    return req.model_dump(mode="json")


def scenario_config(s: S.ScenarioIn, seed: int) -> ScenarioConfig:
    if s.appliances:
        apps = tuple(ApplianceSpec(a.name, a.category, a.nominal_p, dict(a.params)) for a in s.appliances)
    else:
        apps = tuple(default_bank(s.bank))
    return ScenarioConfig(apps, s.duration, s.events_per_hour_mean, s.p_min, s.snr_db, s.dynamics, seed, s.steady_cycles)


def de_config(d: S.DeIn, seed: int) -> DeConfig:
    return DeConfig(d.M, d.F_scale, d.mode, d.RR, d.max_iters, d.of_threshold, d.stall_iters, seed)


def experiment_spec(e: S.ExperimentIn, seed: int) -> ExperimentSpec:
    if (e.scenario is None) == (e.corpus is None):
        raise ConfigError("an experiment needs exactly one of 'scenario' or 'corpus'")
    source = scenario_config(e.scenario, seed) if e.scenario is not None else e.corpus
    return ExperimentSpec(
        source,
        tuple(e.spaces),
        tuple(e.algorithms),
        tuple(e.fractions),
        e.p_min,
        e.trials,
        e.model_selection,
        de_config(e.de, seed),
        {k: dict(v) for k, v in e.params.items()},
        seed,
        e.n_clusters,
    )


# --------------------------------------------------------------------------- data helpers


def _record_features(rec: SignatureRecord, space: str) -> np.ndarray:
    if space in rec.features:
        return np.asarray(rec.features[space], dtype=float)
    return featurize(rec.delta, space).values


def _matrix(records, space):
    if not records:
        raise InsufficientDataError("the signature database holds no records")
    return np.vstack([_record_features(r, space) for r in records])


def _labeled(records, space):
    if any(r.label is None for r in records):
        raise DataError("every record needs a label; run 'cluster' on unlabeled databases first")
    X = _matrix(records, space)
    y = np.array([r.label for r in records], dtype=int)
    return X, y


def _load_db(path) -> list:
    p = Path(path)
    return read_signature_db(p / DB_NAME if p.is_dir() else p)


def _features_csv(records, space) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_index", "polarity", "label", *FEATURE_NAMES[space]])
    for r in records:
        w.writerow([r.delta.event_index, r.delta.polarity, "" if r.label is None else r.label,
                    *(repr(float(x)) for x in _record_features(r, space))])
    return buf.getvalue()


# --------------------------------------------------------------------------- commands


def simulate(req: S.SimulateRequest) -> S.CommandResponse:
    out = _out(req)
    sc = generate_scenario(scenario_config(req.scenario, req.seed))
    paths = export_scenario(sc, out, req.encoding)
    on = sum(1 for ev in sc.truth if ev.polarity == "on")
    result = {
        "events": len(sc.truth),
        "on_events": on,
        "off_events": len(sc.truth) - on,
        "samples": len(sc.i),
        "appliances": [m.name for m in sc.appliances],
    }
    return S.CommandResponse(command="simulate", config=_config(req), outputs=paths, result=result)


def ingest(req: S.IngestRequest) -> S.CommandResponse:
    out = _out(req)
    corpus = read_waveform_corpus(req.corpus)
    v, i = corpus.voltage, corpus.mains_current()
    deltas = _deltas(v, i, req.p_min)
    truth_file = Path(req.corpus) / "truth.csv"
    labels = {}
    result = {"samples": len(v), "channels": len(corpus.channel_map), "detected": len(deltas)}
    if truth_file.is_file():
        truth = read_truth_csv(truth_file.read_text())
        pairs, missed = _match_truth([d.event_index for d in deltas], truth, v.samples_per_cycle)
        labels = {at: ev.appliance for at, ev in pairs}
        result.update(truth_events=len(truth), matched=len(pairs), missed=missed)
    source = str(req.corpus)
    records = [
        SignatureRecord(
            d.with_label(labels.get(d.event_index)),
            {s: featurize(d, s).values for s in req.spaces},
            labels.get(d.event_index),
            source,
        )
        for d in deltas
    ]
    db = out / DB_NAME
    write_signature_db(records, db)
    result["records"] = len(records)
    return S.CommandResponse(command="ingest", config=_config(req), outputs={"db": str(db)}, result=result)


def extract(req: S.ExtractRequest) -> S.CommandResponse:
    out = _out(req)
    records = _load_db(req.db)
    filled = [
        SignatureRecord(r.delta, {**r.features, **{s: featurize(r.delta, s).values for s in req.spaces}}, r.label, r.source)
        for r in records
    ]
    outputs = {"db": str(out / DB_NAME)}
    write_signature_db(filled, out / DB_NAME)
    for s in req.spaces:
        path = out / f"features_{s}.csv"
        path.write_text(_features_csv(filled, s))
        outputs[f"features_{s}"] = str(path)
    return S.CommandResponse(command="extract", config=_config(req), outputs=outputs, result={"records": len(filled)})


def cluster(req: S.ClusterRequest) -> S.CommandResponse:
    out = _out(req)
    records = _load_db(req.db)
    pts = zscore(_matrix(records, req.space))
    if req.k is not None:
        cl = kmeans(pts, req.k, req.seed)
    else:
        hi = min(req.k_max, len(pts) - 1)
        if hi < req.k_min:
            raise InsufficientDataError(f"{len(pts)} records cannot support k >= {req.k_min}")
        cl = choose_k(pts, (req.k_min, hi), req.seed)
    result = {"k": cl.k, "wcss": cl.wcss, "sizes": np.bincount(cl.assignments, minlength=cl.k).tolist()}
    if all(r.label is not None for r in records):
        result["purity"] = purity(cl, [r.label for r in records])
    relabeled = [
        SignatureRecord(r.delta.with_label(int(c)), r.features, int(c), f"{r.source}#cluster")
        for r, c in zip(records, cl.assignments)
    ]
    write_signature_db(relabeled, out / DB_NAME)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_index", "cluster", "label"])
    for r, c in zip(records, cl.assignments):
        w.writerow([r.delta.event_index, int(c), "" if r.label is None else r.label])
    (out / "clusters.csv").write_text(buf.getvalue())
    outputs = {"db": str(out / DB_NAME), "clusters": str(out / "clusters.csv")}
    outputs["summary"] = _write_json(out / "cluster.json", result)
    return S.CommandResponse(command="cluster", config=_config(req), outputs=outputs, result=result)


def _split(req):
    records = _load_db(req.db)
    X, y = _labeled(records, req.space)
    n_classes = int(y.max()) + 1
    if len(y) < 3 * n_classes:
        raise InsufficientDataError(f"{len(y)} labeled records for {n_classes} classes; need at least {3 * n_classes}")
    return split(X, y, req.fractions, req.seed), n_classes


def model_select_cmd(req: S.ModelSelectRequest) -> S.CommandResponse:
    out = _out(req)
    sp, C = _split(req)
    sel = model_select(req.algorithm, sp, de_config(req.de, req.seed), req.seed, C)
    (out / "history.csv").write_text(history_csv(sel.result, GENE_SPACES[req.algorithm]))
    result = {
        "algorithm": req.algorithm,
        "params": sel.params,
        "cv_error": sel.cv_error,
        "objective_calls": sel.calls,
        "evaluations": sel.result.evaluations,
        "generations": len(sel.result.history) - 1,
        "stop_reason": sel.result.stop_reason,
    }
    outputs = {"history": str(out / "history.csv"), "selection": _write_json(out / "selection.json", result)}
    return S.CommandResponse(command="model-select", config=_config(req), outputs=outputs, result=result)


def train_cmd(req: S.TrainRequest) -> S.CommandResponse:
    out = _out(req)
    sp, C = _split(req)
    model = train(req.algorithm, sp, req.seed, C, **req.params)
    result = {"train": precision(model.predict(sp.train.X), sp.train.y)}
    for name in ("cv", "test"):
        d = getattr(sp, name)
        if len(d):
            result[name] = precision(model.predict(d.X), d.y)
    params = {**DEFAULTS[req.algorithm], **req.params}
    meta = {"space": req.space, "algorithm": req.algorithm, "params": params, "n_classes": C, "seed": req.seed}
    write_model(model, out / "model.json", meta)
    outputs = {"model": str(out / "model.json"), "metrics": _write_json(out / "train.json", result)}
    return S.CommandResponse(command="train", config=_config(req), outputs=outputs, result=result)


def evaluate(req: S.EvaluateRequest) -> S.CommandResponse:
    out = _out(req)
    model_path = Path(req.model)
    model, meta = read_model(model_path / "model.json" if model_path.is_dir() else model_path)
    records = _load_db(req.db)
    X, y = _labeled(records, meta["space"])
    pred = model.predict(X)
    C = max(int(meta.get("n_classes", 0)), int(y.max()) + 1, int(pred.max()) + 1)
    conf = np.zeros((C, C), dtype=int)
    np.add.at(conf, (y, pred), 1)
    result = {"eta": precision(pred, y), "p_c": int(np.sum(pred == y)), "p_t": int(len(y)), "confusion": conf.tolist()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_index", "label", "predicted"])
    for r, t, p in zip(records, y, pred):
        w.writerow([r.delta.event_index, int(t), int(p)])
    (out / "predictions.csv").write_text(buf.getvalue())
    outputs = {"predictions": str(out / "predictions.csv"), "evaluation": _write_json(out / "evaluation.json", result)}
    return S.CommandResponse(command="evaluate", config=_config(req), outputs=outputs, result=result)


def experiment(req: S.ExperimentRequest) -> S.CommandResponse:
    out = _out(req)
    report = run_experiment(experiment_spec(req.experiment, req.seed))
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    result = {k: c.summary() for k, c in sorted(report.cells.items())}
    outputs = {"json": str(out / "report.json"), "csv": str(out / "report.csv")}
    return S.CommandResponse(command="experiment", config=_config(req), outputs=outputs, result=result)


def sweep_cmd(req: S.SweepRequest) -> S.CommandResponse:
    out = _out(req)
    values = [tuple(v) if req.axis == "split" else v for v in req.values]
    res = sweep(experiment_spec(req.experiment, req.seed), req.axis, values, req.common_random_numbers)
    (out / "sweep.json").write_text(res.to_json())
    (out / "sweep.csv").write_text(res.to_csv())
    result = {
        "axis": req.axis,
        "values": req.values,
        "medians": {k: [r.median(*k.split("/", 1)) for r in res.reports] for k in sorted(res.reports[0].cells)},
    }
    outputs = {"json": str(out / "sweep.json"), "csv": str(out / "sweep.csv")}
    return S.CommandResponse(command="sweep", config=_config(req), outputs=outputs, result=result)


def _load_reports(path: Path):
    """(label, MetricsReport) pairs from a report or sweep JSON file (or a directory holding one)."""
    if path.is_dir():
        for name in ("report.json", "sweep.json"):
            if (path / name).is_file():
                path = path / name
                break
    try:
        body = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    if "reports" in body:
        return [(f"{body['axis']}={json.dumps(v)}", MetricsReport.from_dict(r)) for v, r in zip(body["values"], body["reports"])]
    return [("", MetricsReport.from_dict(body))]


def report(req: S.ReportRequest) -> S.CommandResponse:
    out = _out(req)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["report", "setting", "space", "algorithm", "subset", "max", "mean", "median", "trials"])
    text = []
    rows = []
    for src in req.reports:
        for setting, rep in _load_reports(Path(src)):
            text.append(f"# {src} {setting}".rstrip() + "\n" + summary_table(rep))
            for key in sorted(rep.cells):
                space, alg = key.split("/", 1)
                for subset, stats in rep.cells[key].summary().items():
                    row = [Path(src).name, setting, space, alg, subset, stats["max"], stats["mean"], stats["median"], len(rep.cells[key].overall)]
                    rows.append(row)
                    w.writerow(row[:5] + [repr(float(x)) for x in row[5:8]] + [row[8]])
    (out / "summary.csv").write_text(buf.getvalue())
    (out / "summary.txt").write_text("\n".join(text))
    outputs = {"csv": str(out / "summary.csv"), "text": str(out / "summary.txt")}
    return S.CommandResponse(command="report", config=_config(req), outputs=outputs, result={"table": "\n".join(text), "rows": len(rows)})


def features(req: S.FeaturesRequest) -> S.FeaturesResponse:
    cycle = CyclePair(np.asarray(req.v, dtype=float), np.asarray(req.i, dtype=float), req.mains_freq)
    sig = DeltaSignature(cycle, 0, req.polarity, float(np.mean(cycle.v * cycle.i)))
    out = {}
    for s in req.spaces:
        vals = featurize(sig, s).values
        out[s] = {name: float(x) for name, x in zip(FEATURE_NAMES[s], vals)}
    return S.FeaturesResponse(features=out)
