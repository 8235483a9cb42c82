"""FastAPI application exposing every pipeline command as a POST route."""
from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, NilmError
from . import handlers as H
from . import schemas as S

log = logging.getLogger(__name__)

STATUS = {2: 400, 3: 422, 4: 500}

app = FastAPI(title="nilmws", version=__version__, description="Event-based load disaggregation pipeline")


def _error(exc: Exception, kind: str, code: int, status: int) -> JSONResponse:
    body = S.ErrorResponse(kind=kind, exit_code=code, detail=str(exc))
    return JSONResponse(status_code=status, content=body.model_dump())


@app.exception_handler(NilmError)
async def _nilm_error(request: Request, exc: NilmError):
    return _error(exc, exc.kind, exc.exit_code, STATUS.get(exc.exit_code, 500))


@app.exception_handler(RequestValidationError)
async def _validation_error(request: Request, exc: RequestValidationError):
    detail = "; ".join(f"{'.'.join(str(p) for p in e['loc'][1:])}: {e['msg']}" for e in exc.errors())
    return _error(ConfigError(detail), "config", ConfigError.exit_code, 400)


@app.exception_handler(FileNotFoundError)
async def _missing_file(request: Request, exc: FileNotFoundError):
    return _error(exc, "data", 3, 422)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/features", response_model=S.FeaturesResponse)
def features(req: S.FeaturesRequest):
    return H.features(req)


@app.post("/simulate", response_model=S.CommandResponse)
def simulate(req: S.SimulateRequest):
    return H.simulate(req)


@app.post("/ingest", response_model=S.CommandResponse)
def ingest(req: S.IngestRequest):
    return H.ingest(req)


@app.post("/extract", response_model=S.CommandResponse)
def extract(req: S.ExtractRequest):
    return H.extract(req)


@app.post("/cluster", response_model=S.CommandResponse)
def cluster(req: S.ClusterRequest):
    return H.cluster(req)


@app.post("/model-select", response_model=S.CommandResponse)
def model_select(req: S.ModelSelectRequest):
    return H.model_select_cmd(req)


@app.post("/train", response_model=S.CommandResponse)
def train(req: S.TrainRequest):
    return H.train_cmd(req)


@app.post("/evaluate", response_model=S.CommandResponse)
def evaluate(req: S.EvaluateRequest):
    return H.evaluate(req)


@app.post("/experiment", response_model=S.CommandResponse)
def experiment(req: S.ExperimentRequest):
    return H.experiment(req)


@app.post("/sweep", response_model=S.CommandResponse)
def sweep(req: S.SweepRequest):
    return H.sweep_cmd(req)


@app.post("/report", response_model=S.CommandResponse)
def report(req: S.ReportRequest):
    return H.report(req)
