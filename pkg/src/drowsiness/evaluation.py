"""Evaluation schemes, model selection and metrics.

Schemes
-------
``Individual``
    one model per recording: shuffle, hold out 25 % of its epochs.
``Pooled100``
    epochs of every recording pooled, then the same 25 % shuffle split.
``SubjectHoldout``
    ``round(holdout_fraction * n_recordings)`` subjects are held out entirely
    (by default only subjects with a single recording are eligible), the model
    is trained on every recording of the remaining subjects, and this repeats
    ``repetitions`` times over disjoint test groups while eligible subjects last.

Inside each unit the min-max scaler (PSD modes only) is fitted on training
rows, hyperparameters are picked by k-fold grid search on the training rows,
the winner is refitted on all training rows and scored on the test rows.
All randomness derives from the scheme seed through
:func:`~drowsiness.rng.derive_seed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import features as feat
from .errors import DrowsinessError, ParameterError, SchemeError, ValidationError
from .labeling import LEVELS
from .models import EstimatorSpec, default_grid, predict, train
from .rng import SplitMix64, derive_seed

SCHEMES = ("Individual", "Pooled100", "SubjectHoldout")
REGRESSION_METRICS = ("rmse", "r2")
CLASSIFICATION_METRICS = ("accuracy", "precision_macro", "recall_macro", "f1_macro")
SCALED_MODES = ("PSD5", "PSD_EOG6")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SchemeSpec:
    kind: str
    holdout_fraction: float = 0.10
    repetitions: int = 10
    test_fraction: float = 0.25
    seed: int = 0
    exclude_repeat_subjects_from_holdout: bool = True
    cv_folds: int = 10

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValidationError(f"scheme kind must be one of {SCHEMES}, got {self.kind!r}")
        for name in ("holdout_fraction", "test_fraction"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 < v < 1):
                raise ValidationError(f"{name} must lie in (0, 1), got {v!r}")
        if not (isinstance(self.repetitions, int) and self.repetitions >= 1):
            raise ValidationError(f"repetitions must be an integer >= 1, got {self.repetitions!r}")
        if not (isinstance(self.cv_folds, int) and self.cv_folds >= 2):
            raise ValidationError(f"cv_folds must be an integer >= 2, got {self.cv_folds!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# splitting


def shuffle_split(n: int, test_fraction: float, seed: int):
    """Fisher-Yates shuffle, first ``round(n * test_fraction)`` indices are the test part.

    Both parts are returned sorted.
    """
    if n < 4:
        raise ParameterError(f"need at least 4 rows to split, got {n}")
    if not 0 < test_fraction < 1:
        raise ParameterError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = round_half_up(n * test_fraction)
    n_test = min(max(n_test, 1), n - 1)
    perm = SplitMix64(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def kfold_indices(n: int, k: int = 10, seed: int = 0):
    """``k`` (train, validate) pairs over shuffled indices; larger folds first."""
    if not 2 <= k <= n:
        raise ParameterError(f"k={k} folds need 2 <= k <= n={n}")
    perm = SplitMix64(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        val = perm[start:start + size]
        train_idx = np.concatenate([perm[:start], perm[start + size:]])
        folds.append((np.sort(train_idx), np.sort(val)))
        start += size
    return folds


# ---------------------------------------------------------------------------
# metrics


def regression_metrics(y_true, y_pred) -> dict:
    """``rmse`` and ``r2``; r2 is None ("undefined") when y_true is constant
    and the predictions are not perfect."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ParameterError(f"length mismatch or empty input: {y_true.shape} vs {y_pred.shape}")
    resid = float(np.sum((y_pred - y_true) ** 2))
    total = float(np.sum((y_true - y_true.mean()) ** 2))
    rmse = math.sqrt(resid / y_true.size)
    if total == 0:
        r2 = 1.0 if resid == 0 else None
    else:
        r2 = 1.0 - resid / total
    return {"rmse": rmse, "r2": r2}


def confusion_matrix(y_true, y_pred, n_classes: int = 3) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def classification_metrics(y_true, y_pred) -> dict:
    """Accuracy plus macro precision, recall and f1 over the three levels.

    0/0 precision or recall counts as 0, and so does f1 when both are 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ParameterError(f"length mismatch or empty input: {y_true.shape} vs {y_pred.shape}")
    n_classes = len(LEVELS)
    if np.any((y_true < 0) | (y_true >= n_classes)) or np.any((y_pred < 0) | (y_pred >= n_classes)):
        raise ParameterError("labels must be drowsiness level codes 0, 1, 2")
    cm = confusion_matrix(y_true, y_pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    pred_tot = cm.sum(axis=0).astype(np.float64)
    true_tot = cm.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred_tot, out=np.zeros(n_classes), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros(n_classes), where=true_tot > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_classes), where=denom > 0)
    return {
        "accuracy": float(tp.sum() / cm.sum()),
        "precision_macro": float(precision.mean()),
        "recall_macro": float(recall.mean()),
        "f1_macro": float(f1.mean()),
        "confusion": cm.tolist(),
    }


def task_metrics(task: str, y_true, y_pred) -> dict:
    if task == "Regression":
        return regression_metrics(y_true, y_pred)
    return classification_metrics(y_true, y_pred)


def metric_names(task: str):
    return REGRESSION_METRICS if task == "Regression" else CLASSIFICATION_METRICS


def aggregate(units_metrics, task: str) -> dict:
    """Mean and sample SD per metric; None values (undefined r2) are skipped.

    A single value gets SD 0.
    """
    out = {}
    for name in metric_names(task):
        values = [m[name] for m in units_metrics if m.get(name) is not None]
        if not values:
            out[name] = {"mean": None, "sd": None, "n": 0}
            continue
        arr = np.asarray(values, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[name] = {"mean": float(arr.mean()), "sd": sd, "n": int(arr.size)}
    return out


# ---------------------------------------------------------------------------
# model selection


def grid_search(family: str, task: str, grid, X_train, y_train, k: int = 10, seed: int = 0):
    """Exhaustive k-fold search.

    Score is mean fold RMSE (minimized) for regression and mean fold macro-f1
    (maximized) for classification; ties keep the earliest grid point.
    Returns ``(best_point, best_score, scores)``.
    """
    grid = list(grid)
    if not grid:
        raise ParameterError("grid must contain at least one point")
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    folds = kfold_indices(X_train.shape[0], k, seed)
    regression = task == "Regression"
    scores = []
    for point in grid:
        fold_scores = []
        for f, (tr, va) in enumerate(folds):
            try:
                spec = EstimatorSpec(family, task, point, seed=derive_seed(seed, f))
                model = train(spec, X_train[tr], y_train[tr])
                pred = predict(model, X_train[va])
            except DrowsinessError as exc:
                raise exc.with_context(f"grid point {point}") from exc
            if regression:
                fold_scores.append(regression_metrics(y_train[va], pred)["rmse"])
            else:
                fold_scores.append(classification_metrics(y_train[va], pred)["f1_macro"])
        scores.append(float(np.mean(fold_scores)))
    best = 0
    for i, s in enumerate(scores):
        if (s < scores[best]) if regression else (s > scores[best]):
            best = i
    return dict(grid[best]), scores[best], scores


def feasible_grid(family: str, grid, n_fit: int):
    """Drop kNN points whose k exceeds the smallest fitting set."""
    if family != "KNN":
        return list(grid)
    kept = [g for g in grid if g.get("k", 1) <= n_fit]
    return kept or [{"k": 1}]


# ---------------------------------------------------------------------------
# scheme runner


@dataclass
class UnitData:
    """Feature rows and targets of one recording, ready for splitting."""

    key: str
    subject_id: str
    experiment_id: str
    X: np.ndarray
    perclos: np.ndarray
    levels: np.ndarray
    epoch_index: np.ndarray
    degenerate_labels: bool = False

    def target(self, task):
        return self.perclos if task == "Regression" else self.levels


def unit_data(prepared, mode: str) -> UnitData:
    fm = prepared.features[mode]
    return UnitData(
        key=prepared.key,
        subject_id=prepared.recording.subject_id,
        experiment_id=prepared.recording.experiment_id,
        X=fm.rows,
        perclos=prepared.perclos(),
        levels=prepared.labels(),
        epoch_index=fm.epoch_index,
        degenerate_labels=prepared.thresholds.degenerate,
    )


@dataclass
class UnitResult:
    unit: str
    n_train: int
    n_test: int
    hyperparameters: dict
    cv_score: float
    metrics: dict
    train_keys: list
    test_keys: list
    scaler: dict | None
    per_subject: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "unit": self.unit,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "hyperparameters": self.hyperparameters,
            "cv_score": self.cv_score,
            "metrics": self.metrics,
            "train_recordings": self.train_keys,
            "test_recordings": self.test_keys,
            "scaler": self.scaler,
            "per_subject": self.per_subject,
        }


@dataclass
class EvaluationReport:
    scheme: SchemeSpec
    family: str
    mode: str
    task: str
    units: list
    aggregate: dict
    per_subject_aggregate: dict | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        s = self.scheme
        return {
            "scheme": {
                "kind": s.kind, "holdout_fraction": s.holdout_fraction, "repetitions": s.repetitions,
                "test_fraction": s.test_fraction, "seed": int(s.seed),
                "exclude_repeat_subjects_from_holdout": s.exclude_repeat_subjects_from_holdout,
                "cv_folds": s.cv_folds,
            },
            "family": self.family,
            "mode": self.mode,
            "task": self.task,
            "units": [u.to_dict() for u in self.units],
            "aggregate": self.aggregate,
            "per_subject_aggregate": self.per_subject_aggregate,
            "warnings": list(self.warnings),
        }


def _fit_and_score(family, task, mode, grid, X_tr, y_tr, X_te, y_te, cv_folds, seed):
    scaler = None
    if mode in SCALED_MODES:
        params = feat.minmax_fit(X_tr)
        X_tr = feat.minmax_apply(X_tr, params)
        X_te = feat.minmax_apply(X_te, params)
        scaler = {"min": params.min.tolist(), "max": params.max.tolist()}
    k = min(cv_folds, X_tr.shape[0])
    if k < 2:
        raise SchemeError(f"only {X_tr.shape[0]} training rows; cannot cross-validate")
    smallest_fit = X_tr.shape[0] - math.ceil(X_tr.shape[0] / k)
    grid = feasible_grid(family, grid, smallest_fit)
    best, cv_score, _ = grid_search(family, task, grid, X_tr, y_tr, k=k, seed=derive_seed(seed, 1))
    model = train(EstimatorSpec(family, task, best, seed=derive_seed(seed, 2)), X_tr, y_tr)
    y_pred = predict(model, X_te)
    return best, cv_score, y_pred, scaler


def _holdout_groups(units, scheme: SchemeSpec):
    subjects = {}
    for u in units:
        subjects.setdefault(u.subject_id, []).append(u.key)
    eligible = sorted(
        s for s, keys in subjects.items()
        if len(keys) == 1 or not scheme.exclude_repeat_subjects_from_holdout
    )
    n_test = max(1, round_half_up(scheme.holdout_fraction * len(units)))
    if len(subjects) < 2:
        raise SchemeError("SubjectHoldout needs recordings from at least 2 subjects")
    if n_test > len(eligible) or n_test >= len(subjects):
        raise SchemeError(
            f"holdout of {n_test} subjects impossible with {len(eligible)} eligible of {len(subjects)} subjects"
        )
    groups = []
    pool = []
    cycle = 0
    for _ in range(scheme.repetitions):
        if len(pool) < n_test:
            fresh = list(eligible)
            SplitMix64(derive_seed(scheme.seed, 7, cycle)).shuffle(fresh)
            cycle += 1
            # top up from a fresh shuffle, skipping subjects already in the partial group
            pool = pool + [s for s in fresh if s not in pool]
        groups.append(sorted(pool[:n_test]))
        pool = pool[n_test:]
    return groups


def _run_unit(label, family, task, mode, grid, train_units, test_units, scheme, seed, row_split=None):
    if row_split is None:
        X_tr = np.vstack([u.X for u in train_units])
        y_tr = np.concatenate([u.target(task) for u in train_units])
        X_te = np.vstack([u.X for u in test_units])
        y_te = np.concatenate([u.target(task) for u in test_units])
        test_subj = [u.subject_id for u in test_units for _ in range(u.X.shape[0])]
        test_epoch = np.concatenate([u.epoch_index for u in test_units])
        n_train = X_tr.shape[0]
    else:
        X_all = np.vstack([u.X for u in train_units])
        y_all = np.concatenate([u.target(task) for u in train_units])
        subj_all = [u.subject_id for u in train_units for _ in range(u.X.shape[0])]
        epoch_all = np.concatenate([u.epoch_index for u in train_units])
        tr, te = row_split(X_all.shape[0])
        X_tr, y_tr, X_te, y_te = X_all[tr], y_all[tr], X_all[te], y_all[te]
        test_subj = [subj_all[i] for i in te]
        test_epoch = epoch_all[te]
        n_train = tr.size
    best, cv_score, y_pred, scaler = _fit_and_score(
        family, task, mode, grid, X_tr, y_tr, X_te, y_te, scheme.cv_folds, seed
    )
    per_subject = {}
    if scheme.kind == "SubjectHoldout":
        subj_arr = np.asarray(test_subj)
        for sid in sorted(set(test_subj)):
            sel = subj_arr == sid
            per_subject[sid] = task_metrics(task, y_te[sel], y_pred[sel])
    return UnitResult(
        unit=label,
        n_train=int(n_train),
        n_test=int(y_te.shape[0]),
        hyperparameters=best,
        cv_score=cv_score,
        metrics=task_metrics(task, y_te, y_pred),
        train_keys=sorted(u.key for u in train_units),
        test_keys=sorted(u.key for u in (test_units if row_split is None else train_units)),
        scaler=scaler,
        per_subject=per_subject,
        predictions={
            "subject_id": test_subj,
            "epoch_index": np.asarray(test_epoch).tolist(),
            "y_true": y_te.tolist(),
            "y_pred": np.asarray(y_pred).tolist(),
        },
    )


def run_scheme(units, scheme: SchemeSpec, combination, task: str, grid=None, jobs: int = 1) -> EvaluationReport:
    """Evaluate one (family, feature mode) combination under ``scheme``.

    ``units`` are :class:`UnitData` (see :func:`unit_data`) or prepared
    recordings, which are converted for the combination's mode.
    """
    family, mode = combination
    units = [u if isinstance(u, UnitData) else unit_data(u, mode) for u in units]
    units = sorted(units, key=lambda u: (u.subject_id, u.experiment_id))
    if not units:
        raise SchemeError("no recordings to evaluate")
    grid = default_grid(family, task) if grid is None else list(grid)
    warnings = [f"{u.key}: constant PERCLOS series, all epochs labelled Severe"
                for u in units if u.degenerate_labels and task == "Classification"]

    jobs_args = []
    if scheme.kind == "Individual":
        for i, u in enumerate(units):
            useed = derive_seed(scheme.seed, 1, i)
            split = (lambda n, s=useed: shuffle_split(n, scheme.test_fraction, derive_seed(s, 0)))
            jobs_args.append((u.key, [u], [], useed, split))
    elif scheme.kind == "Pooled100":
        useed = derive_seed(scheme.seed, 2)
        split = (lambda n: shuffle_split(n, scheme.test_fraction, derive_seed(useed, 0)))
        jobs_args.append(("pooled", units, [], useed, split))
    else:
        for r, group in enumerate(_holdout_groups(units, scheme)):
            gset = set(group)
            test_units = [u for u in units if u.subject_id in gset]
            train_units = [u for u in units if u.subject_id not in gset]
            jobs_args.append((f"rep{r:02d}", train_units, test_units, derive_seed(scheme.seed, 3, r), None))

    def run_one(args):
        label, tr_units, te_units, useed, split = args
        try:
            return _run_unit(label, family, task, mode, grid, tr_units, te_units, scheme, useed, split)
        except DrowsinessError as exc:
            raise exc.with_context(f"{scheme.kind}/{family}/{mode}/{task}/{label}") from exc

    if jobs > 1 and len(jobs_args) > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs, backend="threading")(delayed(run_one)(a) for a in jobs_args)
    else:
        results = [run_one(a) for a in jobs_args]

    per_subject_agg = None
    if scheme.kind == "SubjectHoldout":
        per_subject_agg = aggregate([m for r in results for m in r.per_subject.values()], task)
    return EvaluationReport(
        scheme=scheme,
        family=family,
        mode=mode,
        task=task,
        units=results,
        aggregate=aggregate([r.metrics for r in results], task),
        per_subject_aggregate=per_subject_agg,
        warnings=warnings,
    )
