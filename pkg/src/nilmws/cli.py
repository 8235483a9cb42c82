"""Command-line client.

Each subcommand merges an optional YAML config file with its flags, posts the
request to the service (in-process by default, or ``--server URL``), echoes
the resolved config and result as YAML, and exits with 0 on success, 2 on a
config error, 3 on a data error and 4 on a numeric failure.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import yaml

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class ServiceError(Exception):
    def __init__(self, kind: str, exit_code: int, detail: str):
        super().__init__(detail)
        self.kind = kind
        self.exit_code = exit_code


class Client:
    """Posts JSON to the service; uses an in-process transport unless a URL is given."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._http = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message="Using `httpx`")
                from fastapi.testclient import TestClient

            from .service.app import app

            self._http = TestClient(app, raise_server_exceptions=True)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._http.post(path, json=payload)
        body = resp.json()
        if resp.status_code >= 400:
            raise ServiceError(body.get("kind", "error"), int(body.get("exit_code", 1)), body.get("detail", ""))
        return body


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ServiceError("config", EXIT_CONFIG, f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ServiceError("config", EXIT_CONFIG, f"config {path} must be a key-value mapping")
    return data


def _set(d: dict, dotted: str, value):
    if value is None:
        return
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _dump(title: str, data) -> str:
    return f"# {title}\n" + yaml.safe_dump(data, sort_keys=True, default_flow_style=False)


def _run(ctx, path: str, config_file, overrides: dict):
    """Merge, send, echo. ``overrides`` maps dotted keys to flag values (None = not given)."""
    obj = ctx.obj
    try:
        payload = _load_config(config_file)
        for key, value in overrides.items():
            _set(payload, key, value)
        if "out" not in payload:
            raise ServiceError("config", EXIT_CONFIG, "--out is required (flag or config key 'out')")
        body = Client(obj["server"]).post(path, payload)
    except ServiceError as exc:
        click.echo(f"error ({exc.kind}): {exc}", err=True)
        ctx.exit(exc.exit_code)
        return
    click.echo(_dump("resolved config", body["config"]), nl=False)
    click.echo(_dump("outputs", body.get("outputs", {})), nl=False)
    click.echo(_dump("result", body.get("result", {})), nl=False)


def _csv_floats(text):
    return None if text is None else [float(x) for x in text.split(",")]


def _csv_list(text):
    return None if text is None else [x.strip() for x in text.split(",") if x.strip()]


def _params(pairs):
    if not pairs:
        return None
    out = {}
    for p in pairs:
        if "=" not in p:
            raise click.BadParameter(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k] = yaml.safe_load(v)
    return out


def common(f):
    f = click.option("--config", "config_file", type=click.Path(dir_okay=False), help="YAML key-value config file.")(f)
    f = click.option("--seed", type=int, default=None, help="Master seed (default 0).")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    return f


@click.group()
@click.option("--server", envvar="NILMWS_SERVER", default=None, help="Service URL; omit to run in-process.")
@click.pass_context
def main(ctx, server):
    """Event-based load disaggregation with wave-shape features."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@common
@click.option("--duration", type=float, help="Scenario length in hours.")
@click.option("--events-per-hour", type=float)
@click.option("--snr-db", type=float)
@click.option("--dynamics/--no-dynamics", default=None)
@click.option("--bank", type=int, help="Use the first N built-in appliances.")
@click.option("--encoding", type=click.Choice(["text", "f32le"]))
@click.pass_context
def simulate(ctx, config_file, seed, out, duration, events_per_hour, snr_db, dynamics, bank, encoding):
    """Generate a synthetic scenario as a corpus plus truth log."""
    _run(ctx, "/simulate", config_file, {
        "seed": seed, "out": out, "encoding": encoding,
        "scenario.duration": duration, "scenario.events_per_hour_mean": events_per_hour,
        "scenario.snr_db": snr_db, "scenario.dynamics": dynamics, "scenario.bank": bank,
    })


@main.command()
@common
@click.option("--corpus", type=click.Path(file_okay=False), help="Corpus directory.")
@click.option("--p-min", type=float)
@click.option("--spaces", help="Comma-separated feature spaces to precompute.")
@click.pass_context
def ingest(ctx, config_file, seed, out, corpus, p_min, spaces):
    """Detect events in a corpus and store their signatures."""
    _run(ctx, "/ingest", config_file, {"seed": seed, "out": out, "corpus": corpus, "p_min": p_min, "spaces": _csv_list(spaces)})


@main.command()
@common
@click.option("--db", type=click.Path(), help="Signature database (file or directory).")
@click.option("--spaces", help="Comma-separated feature spaces.")
@click.pass_context
def extract(ctx, config_file, seed, out, db, spaces):
    """Compute feature vectors for stored signatures."""
    _run(ctx, "/extract", config_file, {"seed": seed, "out": out, "db": db, "spaces": _csv_list(spaces)})


@main.command()
@common
@click.option("--db", type=click.Path())
@click.option("--space", type=click.Choice(["PQ", "HAR", "WS"]))
@click.option("--k", type=int, help="Cluster count; omit to scan by silhouette.")
@click.pass_context
def cluster(ctx, config_file, seed, out, db, space, k):
    """Group signatures with K-means and label them by cluster."""
    _run(ctx, "/cluster", config_file, {"seed": seed, "out": out, "db": db, "space": space, "k": k})


@main.command("model-select")
@common
@click.option("--db", type=click.Path())
@click.option("--space", type=click.Choice(["PQ", "HAR", "WS"]))
@click.option("--algorithm", type=click.Choice(["ANN", "ANN+EA", "SVM"]))
@click.option("--fractions", help="train,cv,test fractions.")
@click.option("--mode", type=click.Choice(["classic", "ede"]))
@click.option("--population", type=int)
@click.option("--iters", type=int)
@click.pass_context
def model_select(ctx, config_file, seed, out, db, space, algorithm, fractions, mode, population, iters):
    """Tune classifier setup parameters by differential evolution."""
    _run(ctx, "/model-select", config_file, {
        "seed": seed, "out": out, "db": db, "space": space, "algorithm": algorithm,
        "fractions": _csv_floats(fractions), "de.mode": mode, "de.M": population, "de.max_iters": iters,
    })


@main.command()
@common
@click.option("--db", type=click.Path())
@click.option("--space", type=click.Choice(["PQ", "HAR", "WS"]))
@click.option("--algorithm", type=click.Choice(["ANN", "ANN+EA", "SVM", "AdaBoost"]))
@click.option("--fractions", help="train,cv,test fractions.")
@click.option("--param", "params", multiple=True, help="Algorithm parameter key=value (repeatable).")
@click.pass_context
def train(ctx, config_file, seed, out, db, space, algorithm, fractions, params):
    """Train one classifier on a labeled signature database."""
    _run(ctx, "/train", config_file, {
        "seed": seed, "out": out, "db": db, "space": space, "algorithm": algorithm,
        "fractions": _csv_floats(fractions), "params": _params(params),
    })


@main.command()
@common
@click.option("--model", type=click.Path())
@click.option("--db", type=click.Path())
@click.pass_context
def evaluate(ctx, config_file, seed, out, model, db):
    """Score a trained model on a labeled signature database."""
    _run(ctx, "/evaluate", config_file, {"seed": seed, "out": out, "model": model, "db": db})


def _experiment_overrides(trials, corpus, spaces, algorithms, p_min):
    return {
        "experiment.trials": trials, "experiment.corpus": corpus, "experiment.spaces": _csv_list(spaces),
        "experiment.algorithms": _csv_list(algorithms), "experiment.p_min": p_min,
    }


@main.command()
@common
@click.option("--trials", type=int)
@click.option("--corpus", type=click.Path(file_okay=False))
@click.option("--spaces")
@click.option("--algorithms")
@click.option("--p-min", type=float)
@click.pass_context
def experiment(ctx, config_file, seed, out, trials, corpus, spaces, algorithms, p_min):
    """Run a Monte-Carlo experiment and write JSON and CSV reports."""
    _run(ctx, "/experiment", config_file, {"seed": seed, "out": out, **_experiment_overrides(trials, corpus, spaces, algorithms, p_min)})


@main.command("sweep")
@common
@click.option("--axis", type=click.Choice(["split", "p_min", "snr_db", "dynamics"]))
@click.option("--values", help="YAML list, e.g. '[40, 30, 20]'.")
@click.option("--trials", type=int)
@click.option("--corpus", type=click.Path(file_okay=False))
@click.option("--spaces")
@click.option("--algorithms")
@click.option("--p-min", type=float)
@click.pass_context
def sweep_cmd(ctx, config_file, seed, out, axis, values, trials, corpus, spaces, algorithms, p_min):
    """Repeat an experiment across values of one axis."""
    _run(ctx, "/sweep", config_file, {
        "seed": seed, "out": out, "axis": axis, "values": None if values is None else yaml.safe_load(values),
        **_experiment_overrides(trials, corpus, spaces, algorithms, p_min),
    })


@main.command()
@common
@click.argument("reports", nargs=-1, type=click.Path(exists=True))
@click.pass_context
def report(ctx, config_file, seed, out, reports):
    """Summarize experiment or sweep reports into a table."""
    _run(ctx, "/report", config_file, {"seed": seed, "out": out, "reports": list(reports) or None})


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("nilmws.service.app:app", host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
