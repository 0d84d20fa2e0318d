"""The five estimator families behind one train/predict contract.

Families: ``SVM`` (RBF kernel, SMO), ``KNN``, ``DT`` (CART), ``GP`` (exact RBF
Gaussian process) and ``RF`` (random forest). Each supports the
``Regression`` task (predict PERCLOS) and the ``Classification`` task
(predict a :class:`~drowsiness.labeling.DrowsinessLevel` code 0/1/2).

Training rows are put into canonical order (lexicographic on the feature
columns, then the target) before fitting, so a fitted model does not depend
on the order the rows arrived in.

Hyperparameter domains
----------------------
KNN  ``k``: int >= 1
DT   ``max_depth``: int >= 1 or None (unlimited); ``min_samples_leaf``: int >= 1
RF   ``n_trees``: int >= 1; ``max_depth``; ``min_samples_leaf``;
     ``max_features``: int >= 1 or None (ceil(sqrt p) classification,
     ceil(p / 3) regression); ``bootstrap``: bool
SVM  ``C`` > 0; ``gamma`` > 0 or the string ``"1/p"``; ``epsilon`` >= 0 (regression)
GP   ``length_scale`` > 0; ``noise`` >= 0
"""

from __future__ import annotations

import base64
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParameterError
from . import gp, knn, svm, trees

FAMILIES = ("SVM", "KNN", "DT", "GP", "RF")
TASKS = ("Regression", "Classification")
N_CLASSES = 3

_DEFAULTS = {
    "KNN": {"k": 5},
    "DT": {"max_depth": None, "min_samples_leaf": 1},
    "RF": {"n_trees": 100, "max_depth": None, "min_samples_leaf": 1, "max_features": None, "bootstrap": True},
    "SVM": {"C": 1.0, "gamma": "1/p", "epsilon": 0.1},
    "GP": {"length_scale": 1.0, "noise": 1e-2},
}


def default_grid(family: str, task: str) -> list[dict]:
    """Grid points in enumeration order (last key varies fastest)."""
    axes = {
        "KNN": {"k": [1, 3, 5, 7, 9, 11]},
        "DT": {"max_depth": [3, 5, 8, 12, None], "min_samples_leaf": [1, 3, 5]},
        "RF": {"n_trees": [100], "max_depth": [12, None]},
        "SVM": {"C": [0.1, 1.0, 10.0, 100.0], "gamma": ["1/p", 0.1, 1.0]},
        "GP": {"length_scale": [0.5, 1.0, 2.0], "noise": [1e-4, 1e-2, 1e-1]},
    }[family]
    if family == "SVM" and task == "Regression":
        axes = {**axes, "epsilon": [0.01, 0.1]}
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _check_depth(v):
    return v is None or (_is_int(v) and v >= 1)


_CHECKS = {
    "k": lambda v: _is_int(v) and v >= 1,
    "max_depth": _check_depth,
    "min_samples_leaf": lambda v: _is_int(v) and v >= 1,
    "n_trees": lambda v: _is_int(v) and v >= 1,
    "max_features": lambda v: v is None or (_is_int(v) and v >= 1),
    "bootstrap": lambda v: isinstance(v, bool),
    "C": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0,
    "gamma": lambda v: v == "1/p" or (isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0),
    "epsilon": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v >= 0,
    "length_scale": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0,
    "noise": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v >= 0,
}


@dataclass(frozen=True)
class EstimatorSpec:
    family: str
    task: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown model family {self.family!r}")
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        params = dict(_DEFAULTS[self.family])
        for name, value in dict(self.hyperparameters).items():
            if name not in params:
                raise ParameterError(f"{self.family} has no hyperparameter {name!r}")
            params[name] = value
        for name, value in params.items():
            if not _CHECKS[name](value):
                raise ParameterError(f"{self.family} hyperparameter {name}={value!r} is outside its domain")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "hyperparameters", params)

    @property
    def classification(self) -> bool:
        return self.task == "Classification"

    def __hash__(self):
        return hash((self.family, self.task, json.dumps(self.hyperparameters, sort_keys=True), self.seed))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: EstimatorSpec
    state: dict
    feature_count: int
    info: dict = field(default_factory=dict)


def canonical_order(X, y) -> np.ndarray:
    """Row order sorting lexicographically by feature columns, then target."""
    X = np.asarray(X, dtype=np.float64)
    keys = [np.asarray(y, dtype=np.float64)] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _resolve_gamma(gamma, p):
    return 1.0 / p if gamma == "1/p" else float(gamma)


def train(spec: EstimatorSpec, X, y) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ParameterError("training matrix must be non-empty and 2-D")
    if y.shape != (X.shape[0],):
        raise ParameterError(f"target has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.all(np.isfinite(X)):
        raise ParameterError("training matrix contains non-finite values")
    if spec.classification:
        y = y.astype(np.int64)
        if np.any((y < 0) | (y >= N_CLASSES)):
            raise ParameterError("classification targets must be level codes 0, 1, 2")
    else:
        y = y.astype(np.float64)
    order = canonical_order(X, y)
    X = X[order]
    y = y[order]
    n, p = X.shape
    hp = spec.hyperparameters
    info = {}

    if spec.family == "KNN":
        if hp["k"] > n:
            raise ParameterError(f"k={hp['k']} exceeds the {n} training rows")
        state = {"X": X, "y": y.astype(np.float64)}
    elif spec.family in ("DT", "RF"):
        if spec.family == "DT":
            extra = {"n_trees": 1, "max_features": None, "bootstrap": False}
        else:
            mtry = hp["max_features"]
            if mtry is None:
                mtry = math.ceil(math.sqrt(p)) if spec.classification else math.ceil(p / 3)
            extra = {"n_trees": hp["n_trees"], "max_features": mtry, "bootstrap": hp["bootstrap"]}
        state = trees.fit_forest(
            X, y, classification=spec.classification, n_classes=N_CLASSES,
            max_depth=hp["max_depth"], min_samples_leaf=hp["min_samples_leaf"], seed=spec.seed, **extra,
        )
    elif spec.family == "SVM":
        gamma = _resolve_gamma(hp["gamma"], p)
        if spec.classification:
            state = svm.fit_svc(X, y, hp["C"], gamma, seed=spec.seed, n_classes=N_CLASSES)
            info["converged"] = all(m.get("converged", True) for m in state["machines"])
        else:
            state = svm.fit_svr(X, y, hp["C"], gamma, hp["epsilon"], seed=spec.seed)
            info["converged"] = bool(state["converged"])
    else:  # GP
        if spec.classification:
            targets = np.where(y[:, None] == np.arange(N_CLASSES)[None, :], 1.0, -1.0)
        else:
            targets = y
        state = gp.fit_gp(X, targets, hp["length_scale"], hp["noise"])
        info["jitter"] = state["jitter"]
    return TrainedModel(spec=spec, state=state, feature_count=p, info=info)


def predict(model: TrainedModel, X, return_var: bool = False):
    """Predictions for each row of ``X``: floats (regression) or level codes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, model.feature_count)
    if X.ndim != 2 or X.shape[1] != model.feature_count:
        raise ParameterError(f"model expects {model.feature_count} feature columns, got {X.shape[-1] if X.ndim else 0}")
    clf = model.spec.classification
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64 if clf else np.float64)
    if not np.all(np.isfinite(X)):
        raise ParameterError("prediction matrix contains non-finite values")
    fam = model.spec.family
    st = model.state
    if return_var and fam != "GP":
        raise ParameterError("predictive variance is only available for GP models")
    if fam == "KNN":
        return knn.predict_knn(st["X"], st["y"], X, model.spec.hyperparameters["k"], clf, N_CLASSES)
    if fam in ("DT", "RF"):
        per_tree = trees.tree_outputs(st, X)
        return trees.vote(per_tree, N_CLASSES) if clf else per_tree.mean(axis=1)
    if fam == "SVM":
        return svm.predict_svc(st, X, N_CLASSES) if clf else svm.predict_svr(st, X)
    out = gp.predict_gp(st, X, return_var=return_var)
    if clf:
        mean = out[0] if return_var else out
        return np.argmax(mean, axis=1)
    return out


# ---------------------------------------------------------------------------
# model.json


def _encode(obj):
    if isinstance(obj, np.ndarray):
        # integer arrays (tree links, indices) ride along as exact float64 values
        kind = "int" if np.issubdtype(obj.dtype, np.integer) else "float"
        data = np.ascontiguousarray(obj, dtype="<f8")
        return {
            "__ndarray__": base64.b64encode(data.tobytes()).decode("ascii"),
            "shape": list(obj.shape),
            "kind": kind,
        }
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            arr = np.frombuffer(base64.b64decode(obj["__ndarray__"]), dtype="<f8").reshape(obj["shape"])
            return arr.astype(np.int64 if obj["kind"] == "int" else np.float64)
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_json(model: TrainedModel) -> str:
    payload = {
        "family": model.spec.family,
        "task": model.spec.task,
        "hyperparameters": model.spec.hyperparameters,
        "seed": int(model.spec.seed),
        "feature_count": int(model.feature_count),
        "info": _encode(model.info),
        "state": _encode(model.state),
    }
    return json.dumps(payload, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    payload = json.loads(text)
    spec = EstimatorSpec(payload["family"], payload["task"], payload["hyperparameters"], payload["seed"])
    state = _decode(payload["state"])
    if spec.family == "SVM" and spec.classification:
        for mach in state["machines"]:
            mach["pair"] = tuple(mach["pair"])
    return TrainedModel(spec=spec, state=state, feature_count=payload["feature_count"], info=_decode(payload["info"]))


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
