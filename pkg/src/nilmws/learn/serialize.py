"""Plain-dict round trip for trained models (floats kept exact through JSON)."""
from __future__ import annotations

import numpy as np

from ..errors import VersionMismatchError
from .ann import AnnModel
from .boost import BoostModel, Stump, VoteStump
from .svm import BinarySvm, SvmModel


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _thr(t: float):
    # JSON has no infinities; degenerate stumps keep theirs as strings
    return t if np.isfinite(t) else repr(float(t))


def _stump_dict(s, alpha) -> dict:
    if isinstance(s, VoteStump):
        return {"feature": s.feature, "threshold": _thr(s.threshold), "votes": list(s.votes), "alpha": alpha}
    return {"feature": s.feature, "threshold": _thr(s.threshold), "left": s.left, "right": s.right, "alpha": alpha}


def _stump_from(r: dict):
    if "votes" in r:
        return VoteStump(int(r["feature"]), float(r["threshold"]), tuple(int(v) for v in r["votes"]))
    return Stump(int(r["feature"]), float(r["threshold"]), int(r["left"]), int(r["right"]))


def model_to_dict(model) -> dict:
    if isinstance(model, AnnModel):
        return {
            "type": "ANN",
            "sizes": list(model.sizes),
            "w1": _arr(model.w1), "b1": _arr(model.b1), "w2": _arr(model.w2), "b2": _arr(model.b2),
            "mean": _arr(model.mean), "std": _arr(model.std),
        }
    if isinstance(model, SvmModel):
        return {
            "type": "SVM",
            "gamma": model.gamma, "cbox": model.cbox, "n_classes": model.n_classes,
            "mean": _arr(model.mean), "std": _arr(model.std),
            "machines": [
                {"pos": m.pos, "neg": m.neg, "support": _arr(m.support), "coef": _arr(m.coef), "rho": m.rho}
                for m in model.machines
            ],
        }
    if isinstance(model, BoostModel):
        return {
            "type": "AdaBoost",
            "n_classes": model.n_classes, "n_features": model.n_features, "prior": model.prior,
            "rounds": [_stump_dict(s, a) for s, a in model.rounds],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "ANN":
        f = d["sizes"][0]
        return AnnModel(
            np.array(d["w1"], dtype=float).reshape(d["sizes"][1], f), np.array(d["b1"], dtype=float),
            np.array(d["w2"], dtype=float).reshape(d["sizes"][2], d["sizes"][1]), np.array(d["b2"], dtype=float),
            np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
        )
    if kind == "SVM":
        f = len(d["mean"])
        machines = [
            BinarySvm(m["pos"], m["neg"], np.array(m["support"], dtype=float).reshape(-1, f),
                      np.array(m["coef"], dtype=float), float(m["rho"]), np.zeros(0), np.zeros(0))
            for m in d["machines"]
        ]
        return SvmModel(machines, float(d["gamma"]), float(d["cbox"]), np.array(d["mean"], dtype=float),
                        np.array(d["std"], dtype=float), int(d["n_classes"]))
    if kind == "AdaBoost":
        rounds = tuple((_stump_from(r), float(r["alpha"])) for r in d["rounds"])
        return BoostModel(rounds, int(d["n_classes"]), int(d["n_features"]), int(d.get("prior", 0)))
    raise VersionMismatchError(f"unknown model type {kind!r}")
