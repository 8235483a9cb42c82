"""Request and response models for the HTTP service."""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..features import SPACES
from ..learn import ALGORITHMS

Space = Literal["PQ", "HAR", "WS"]
Algorithm = Literal["ANN", "ANN+EA", "SVM", "AdaBoost"]
Axis = Literal["split", "p_min", "snr_db", "dynamics"]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ApplianceIn(Strict):
    name: str
    category: Literal["resistive", "inductive", "power-electronic", "composite"]
    nominal_p: float = Field(gt=0)
    params: dict[str, float] = Field(default_factory=dict)


class ScenarioIn(Strict):
    appliances: Optional[list[ApplianceIn]] = None
    bank: int = Field(default=6, ge=2, le=8, description="size of the built-in bank when appliances is omitted")
    duration: float = Field(default=24.0, gt=0)
    events_per_hour_mean: float = Field(default=15.0, gt=0)
    p_min: float = Field(default=50.0, ge=0)
    snr_db: Optional[float] = None
    dynamics: bool = False
    steady_cycles: int = Field(default=12, ge=8)


class DeIn(Strict):
    M: int = Field(default=30, ge=4)
    F_scale: float = Field(default=0.5, gt=0)
    mode: Literal["classic", "ede"] = "ede"
    RR: float = Field(default=0.9, ge=0, le=1)
    max_iters: int = Field(default=50, ge=0)
    of_threshold: float = 1e-9
    stall_iters: int = Field(default=15, ge=1)


Fractions = tuple[float, float, float]


class SeededOut(Strict):
    seed: int = 0
    out: str


class SimulateRequest(SeededOut):
    scenario: ScenarioIn = Field(default_factory=ScenarioIn)
    encoding: Literal["text", "f32le"] = "text"


class IngestRequest(SeededOut):
    corpus: str
    p_min: float = Field(default=50.0, ge=0)
    spaces: list[Space] = Field(default_factory=lambda: list(SPACES))


class ExtractRequest(SeededOut):
    db: str
    spaces: list[Space] = Field(default_factory=lambda: list(SPACES))


class ClusterRequest(SeededOut):
    db: str
    space: Space = "PQ"
    k: Optional[int] = Field(default=None, ge=1)
    k_min: int = Field(default=2, ge=2)
    k_max: int = Field(default=40, ge=2)


class _Supervised(SeededOut):
    db: str
    space: Space = "WS"
    algorithm: Algorithm = "AdaBoost"
    fractions: Fractions = (0.45, 0.10, 0.45)


class ModelSelectRequest(_Supervised):
    algorithm: Literal["ANN", "ANN+EA", "SVM"] = "ANN"
    de: DeIn = Field(default_factory=DeIn)


class TrainRequest(_Supervised):
    params: dict[str, Any] = Field(default_factory=dict)


class EvaluateRequest(SeededOut):
    model: str
    db: str


class ExperimentIn(Strict):
    scenario: Optional[ScenarioIn] = None
    corpus: Optional[str] = None
    spaces: list[Space] = Field(default_factory=lambda: ["WS"])
    algorithms: list[Algorithm] = Field(default_factory=lambda: ["AdaBoost"])
    fractions: Fractions = (0.45, 0.10, 0.45)
    p_min: float = Field(default=50.0, ge=0)
    trials: int = Field(default=25, ge=1)
    model_selection: bool = False
    de: DeIn = Field(default_factory=lambda: DeIn(M=10, max_iters=10, stall_iters=5))
    params: dict[Algorithm, dict[str, Any]] = Field(default_factory=dict)
    n_clusters: Optional[int] = Field(default=None, ge=1)

    @field_validator("spaces", "algorithms")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v


class ExperimentRequest(SeededOut):
    experiment: ExperimentIn = Field(default_factory=ExperimentIn)


class SweepRequest(SeededOut):
    experiment: ExperimentIn = Field(default_factory=ExperimentIn)
    axis: Axis
    values: list[Any]
    common_random_numbers: bool = True


class ReportRequest(SeededOut):
    reports: list[str]


class FeaturesRequest(Strict):
    v: list[float]
    i: list[float]
    mains_freq: float = 60.0
    spaces: list[Space] = Field(default_factory=lambda: list(SPACES))
    polarity: Literal["on", "off"] = "on"


class CommandResponse(BaseModel):
    command: str
    config: dict
    outputs: dict[str, str] = Field(default_factory=dict)
    result: dict = Field(default_factory=dict)


class FeaturesResponse(BaseModel):
    features: dict[str, dict[str, float]]


class ErrorResponse(BaseModel):
    kind: str
    exit_code: int
    detail: str


__all__ = [name for name in dir() if name[0].isupper()] + ["ALGORITHMS"]
