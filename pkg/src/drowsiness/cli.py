"""Command-line driver.

Subcommands::

    drowsiness synth   --out DIR [--subjects N] [--epochs N] [--repeat N] [--seed S]
    drowsiness inspect PATH [--json]
    drowsiness run     --config CFG [--seed S] [--out DIR] [--jobs N]
    drowsiness report  REPORT_JSON [--out DIR]

Exit codes: 0 ok, 2 configuration or parameter error, 3 data error,
4 numerical error. Errors print one line to stderr, ``drowsiness: <context>:
<kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import dataset, features, labeling, pipeline, reporting
from .config import RunConfig, parse_config
from .errors import ConfigError, DrowsinessError, RecordingIOError
from .evaluation import run_scheme, unit_data
from .rng import derive_seed


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drowsiness", description="EEG/EOG drowsiness estimation pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic cohort of recording directories")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--subjects", type=_positive, default=5)
    p.add_argument("--epochs", type=_positive, default=900)
    p.add_argument("--repeat", type=int, default=0, help="subjects with a second experiment")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--snr", type=float, default=0.8, help="snr_band_modulation")

    p = sub.add_parser("inspect", help="summarize a recording or a directory of recordings")
    p.add_argument("path", type=Path)
    p.add_argument("--json", action="store_true", help="one JSON object per recording")

    p = sub.add_parser("run", help="full pipeline: preprocess, features, labels, schemes, reports")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
    p.add_argument("--out", type=Path, default=None, help="overrides output_dir")
    p.add_argument("--jobs", type=_positive, default=1)

    p = sub.add_parser("report", help="re-render report.md from a report.json")
    p.add_argument("report_json", type=Path)
    p.add_argument("--out", type=Path, default=None, help="directory for report.md (default: alongside)")
    return ap


# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    if not 0 <= args.repeat <= args.subjects:
        raise ConfigError("--repeat must lie in [0, --subjects]")
    recs = dataset.synth_cohort(args.subjects, args.epochs, args.seed, repeat_subjects=args.repeat,
                                snr_band_modulation=args.snr)
    for rec in recs:
        dataset.write_recording(rec, args.out / dataset.recording_dirname(rec))
    print(f"wrote {len(recs)} recordings to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    for rec in dataset.load_cohort(args.path):
        t = labeling.compute_thresholds(rec.perclos)
        info = {
            "recording": rec.key,
            "sample_rate_hz": rec.sample_rate_hz,
            "n_samples": rec.n_samples,
            "n_epochs": rec.n_epochs,
            "perclos_min": t.perclos_min,
            "perclos_max": t.perclos_max,
            "th_minor": t.th_minor,
            "th_moder": t.th_moder,
            "level_counts": [int((labeling.discretize(rec.perclos, t) == k).sum()) for k in range(3)],
        }
        if args.json:
            print(json.dumps(info))
        else:
            print(f"{info['recording']}: {info['n_epochs']} epochs at {info['sample_rate_hz']} Hz, "
                  f"PERCLOS [{t.perclos_min:.3f}, {t.perclos_max:.3f}], thresholds "
                  f"{t.th_minor:.3f}/{t.th_moder:.3f}, levels {info['level_counts']}")
    return 0


def load_inputs(cfg: RunConfig):
    if cfg.data_dir is not None:
        return dataset.load_cohort(cfg.data_dir)
    s = dict(cfg.synth)
    seed = s.pop("seed")
    seed = derive_seed(cfg.seed, 0x5EED) if seed is None else seed
    return dataset.synth_cohort(s.pop("n_subjects"), s.pop("n_epochs"), seed,
                                repeat_subjects=s.pop("repeat_subjects"), **s)


def execute(cfg: RunConfig, jobs: int = 1, log=None) -> int:
    """Run the configured study and write every artifact into ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RecordingIOError(f"cannot create output directory {out}: {exc.strerror}") from exc
    log = log or (lambda msg: None)

    recs = load_inputs(cfg)
    log(f"{len(recs)} recordings")
    params = cfg.pipeline_params()
    prepared = [pipeline.prepare(r, cfg.modes, params) for r in recs]
    log("preprocessing and features done")

    labeling.write_thresholds_csv(
        [(p.recording.subject_id, p.recording.experiment_id, p.thresholds) for p in prepared],
        out / "thresholds.csv",
    )
    for mode in cfg.modes:
        features.write_feature_csv(features.concat_features([p.features[mode] for p in prepared]),
                                   out / f"features_{mode}.csv")

    spec = cfg.scheme_spec()
    reports = []
    for family, mode in cfg.combinations:
        units = [unit_data(p, mode) for p in prepared]
        for task in cfg.tasks:
            t0 = time.perf_counter()
            rep = run_scheme(units, spec, (family, mode), task, grid=cfg.grids.get(family), jobs=jobs)
            log(f"{spec.kind} {family} {mode} {task}: {time.perf_counter() - t0:.1f} s")
            reporting.write_predictions(rep, out)
            reports.append(rep)

    doc = reporting.report_document(reports, cfg.to_dict())
    reporting.write_report_json(doc, out / "report.json")
    reporting.write_report_markdown(doc, out / "report.md")
    return 0


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    out = Path(cfg.output_dir)
    lines = []

    def log(msg):
        # timestamps live only in the sidecar log, never in report.json
        lines.append(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {msg}")
        print(msg, file=sys.stderr)

    try:
        return execute(cfg, jobs=args.jobs, log=log)
    finally:
        if out.is_dir() and lines:
            (out / "run.log").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_report(args) -> int:
    try:
        doc = json.loads(args.report_json.read_text(encoding="utf-8"))
    except OSError as exc:
        raise RecordingIOError(f"cannot read {args.report_json}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.report_json} line {exc.lineno}: {exc.msg}") from exc
    target = (args.out or args.report_json.parent) / "report.md"
    reporting.write_report_markdown(doc, target)
    print(f"wrote {target}")
    return 0


COMMANDS = {"synth": cmd_synth, "inspect": cmd_inspect, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DrowsinessError as exc:
        print(f"drowsiness: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
