"""Run configuration (JSON).

Schema, with defaults::

    {
      "data_dir": null,                 # directory of recording directories, or
      "synth": {                        # a synthetic cohort (used when data_dir is null)
        "n_subjects": 5, "n_epochs": 900, "repeat_subjects": 0, "seed": null,
        "drowsiness_walk_step": 0.02, "mains_amplitude_uv": 5.0,
        "blink_rate_per_min_at_full_drowsiness": 20.0, "snr_band_modulation": 0.8,
        "perclos_noise": 0.03
      },
      "scheme": {"kind": "Individual", "holdout_fraction": 0.1, "repetitions": 10,
                 "test_fraction": 0.25, "exclude_repeat_subjects_from_holdout": true,
                 "cv_folds": 10},
      "combinations": [["RF", "PSD5"]],   # (family, feature mode) pairs
      "task": "Both",                   # Regression | Classification | Both
      "seed": 0,
      "output_dir": "out",
      "grids": {},                      # family -> list of grid points, replaces the default grid
      "pipeline": {"notch_f0": 60.0, "notch_bandwidth": 2.0, "band_lo": 1.0, "band_hi": 30.0,
                   "ica_max_iter": 500, "ica_tol": 1e-5, "ica_r_threshold": 0.6,
                   "minor_fraction": 0.125, "moderate_fraction": 0.30}
    }

Unknown keys are rejected. Errors name the key and the line it sits on.
A relative ``data_dir`` or ``output_dir`` is resolved against the config file's directory.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DrowsinessError
from .evaluation import SchemeSpec
from .features import MODES
from .models import FAMILIES, EstimatorSpec
from .pipeline import PipelineParams

TASK_CHOICES = ("Regression", "Classification", "Both")
SYNTH_KEYS = {
    "n_subjects": 5, "n_epochs": 900, "repeat_subjects": 0, "seed": None,
    "drowsiness_walk_step": 0.02, "mains_amplitude_uv": 5.0,
    "blink_rate_per_min_at_full_drowsiness": 20.0, "snr_band_modulation": 0.8, "perclos_noise": 0.03,
}
SCHEME_KEYS = ("kind", "holdout_fraction", "repetitions", "test_fraction",
               "exclude_repeat_subjects_from_holdout", "cv_folds")
PIPELINE_KEYS = ("notch_f0", "notch_bandwidth", "band_lo", "band_hi", "ica_max_iter", "ica_tol",
                 "ica_r_threshold", "minor_fraction", "moderate_fraction")
TOP_KEYS = ("data_dir", "synth", "scheme", "combinations", "task", "seed", "output_dir", "grids", "pipeline")


@dataclass
class RunConfig:
    data_dir: Path | None = None
    synth: dict = field(default_factory=lambda: dict(SYNTH_KEYS))
    scheme: dict = field(default_factory=lambda: {"kind": "Individual"})
    combinations: list = field(default_factory=lambda: [("RF", "PSD5")])
    task: str = "Both"
    seed: int = 0
    output_dir: Path = Path("out")
    grids: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)

    @property
    def tasks(self):
        return ("Regression", "Classification") if self.task == "Both" else (self.task,)

    @property
    def modes(self):
        return tuple(m for m in MODES if any(c[1] == m for c in self.combinations))

    def scheme_spec(self) -> SchemeSpec:
        return SchemeSpec(**self.scheme, seed=self.seed)

    def pipeline_params(self) -> PipelineParams:
        return PipelineParams(**self.pipeline, ica_seed=self.seed)

    def to_dict(self) -> dict:
        """Echo of the effective settings for the report (paths as given)."""
        return {
            "data_dir": None if self.data_dir is None else str(self.data_dir),
            "synth": None if self.data_dir is not None else dict(self.synth),
            "scheme": dict(self.scheme),
            "combinations": [list(c) for c in self.combinations],
            "task": self.task,
            "seed": self.seed,
            "grids": self.grids,
            "pipeline": dict(self.pipeline),
        }


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


class _Checker:
    def __init__(self, text: str):
        self.text = text

    def fail(self, key: str, message: str):
        line = _line_of(self.text, key)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"key {key!r}{where}: {message}")

    def keys(self, obj, allowed, section):
        if not isinstance(obj, dict):
            self.fail(section, "must be an object")
        for k in obj:
            if k not in allowed:
                self.fail(k, f"unknown key in {section}")


def _no_duplicates(text):
    def hook(pairs):
        seen = {}
        for k, v in pairs:
            if k in seen:
                line = _line_of(text, k)
                raise ConfigError(f"key {k!r} (line {line}): duplicate key")
            seen[k] = v
        return seen
    return hook


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def parse_config_text(text: str, base_dir=Path(".")) -> RunConfig:
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    chk = _Checker(text)
    chk.keys(raw, TOP_KEYS, "config")
    cfg = RunConfig()

    if "seed" in raw:
        if not (_is_int(raw["seed"]) and 0 <= raw["seed"] < 2**64):
            chk.fail("seed", "must be an unsigned 64-bit integer")
        cfg.seed = raw["seed"]

    if raw.get("data_dir") is not None:
        if not isinstance(raw["data_dir"], str):
            chk.fail("data_dir", "must be a path string")
        cfg.data_dir = Path(base_dir) / raw["data_dir"]
    if "synth" in raw:
        chk.keys(raw["synth"], SYNTH_KEYS, "synth")
        cfg.synth.update(raw["synth"])
        for k in ("n_subjects", "n_epochs", "repeat_subjects"):
            v = cfg.synth[k]
            if not (_is_int(v) and v >= (0 if k == "repeat_subjects" else 1)):
                chk.fail(k, "must be a positive integer")
        if cfg.synth["n_epochs"] < 4:
            chk.fail("n_epochs", "must be >= 4")
        if cfg.synth["repeat_subjects"] > cfg.synth["n_subjects"]:
            chk.fail("repeat_subjects", "cannot exceed n_subjects")
        s = cfg.synth["seed"]
        if s is not None and not (_is_int(s) and 0 <= s < 2**64):
            chk.fail("seed", "must be an unsigned 64-bit integer")
        for k in ("drowsiness_walk_step", "mains_amplitude_uv", "blink_rate_per_min_at_full_drowsiness",
                  "snr_band_modulation", "perclos_noise"):
            if isinstance(cfg.synth[k], bool) or not isinstance(cfg.synth[k], (int, float)):
                chk.fail(k, "must be a number")

    if "scheme" in raw:
        chk.keys(raw["scheme"], SCHEME_KEYS, "scheme")
        cfg.scheme = dict(raw["scheme"])
        if "kind" not in cfg.scheme:
            chk.fail("scheme", "needs a 'kind'")
    try:
        cfg.scheme_spec()
    except DrowsinessError as exc:
        bad = next((k for k in SCHEME_KEYS if k in exc.detail), "scheme")
        chk.fail(bad, f"validation error: {exc.detail}")
    except TypeError as exc:
        chk.fail("scheme", str(exc))

    if "combinations" in raw:
        combos = raw["combinations"]
        if not isinstance(combos, list) or not combos:
            chk.fail("combinations", "must be a non-empty list of [family, mode] pairs")
        parsed = []
        for c in combos:
            if isinstance(c, dict):
                c = [c.get("family"), c.get("mode")]
            if not (isinstance(c, list) and len(c) == 2 and c[0] in FAMILIES and c[1] in MODES):
                chk.fail("combinations", f"bad entry {c!r}; families {FAMILIES}, modes {MODES}")
            parsed.append((c[0], c[1]))
        cfg.combinations = parsed

    if "task" in raw:
        if raw["task"] not in TASK_CHOICES:
            chk.fail("task", f"must be one of {TASK_CHOICES}")
        cfg.task = raw["task"]

    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            chk.fail("output_dir", "must be a path string")
        cfg.output_dir = Path(base_dir) / raw["output_dir"]
    else:
        cfg.output_dir = Path(base_dir) / "out"

    if "grids" in raw:
        chk.keys(raw["grids"], FAMILIES, "grids")
        for fam, points in raw["grids"].items():
            if not isinstance(points, list) or not points or not all(isinstance(p, dict) for p in points):
                chk.fail(fam, "grid must be a non-empty list of objects")
            for task in cfg.tasks:
                for p in points:
                    try:
                        EstimatorSpec(fam, task, p)
                    except DrowsinessError as exc:
                        chk.fail(fam, exc.detail)
        cfg.grids = raw["grids"]

    if "pipeline" in raw:
        chk.keys(raw["pipeline"], PIPELINE_KEYS, "pipeline")
        cfg.pipeline = dict(raw["pipeline"])
        p = cfg.pipeline
        for k, v in p.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v != v:
                chk.fail(k, "must be a number")
        lo = p.get("band_lo", 1.0)
        hi = p.get("band_hi", 30.0)
        if not 0 < lo < hi < 100:
            chk.fail("band_lo" if "band_lo" in p else "band_hi", "need 0 < band_lo < band_hi < 100")
        mf = p.get("minor_fraction", 0.125)
        mo = p.get("moderate_fraction", 0.30)
        if not 0 < mf < mo < 1:
            chk.fail("minor_fraction" if "minor_fraction" in p else "moderate_fraction",
                     "need 0 < minor_fraction < moderate_fraction < 1")
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, base_dir=path.parent)
