"""Command-line entry point.

Every subcommand prints one JSON document on stdout. Failures print
``{"error": ..., "message": ...}`` on stderr and exit non-zero. A
``--config`` JSON file may set any option by its long name (dashes or
underscores); explicit flags still win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import KINDS, baseline_fit, baseline_predict, baseline_session
from .errors import SohError
from .estimator import EstimateHistory, estimate_session, smooth_history
from .fingerprint import FingerprintModel, TrainConfig, evaluate_confusion, train_map
from .fitting import fit_power
from .preprocessing import preprocess
from .session import (ALPHA, MIN_SUBTRACE_S, SPIKE_MV, VALIDITY_R2, ChargeSessionLog,
                      RelaxSubTrace, segment_subtraces)
from .simulator import PRESETS, TrickleConfig, preset, simulate_campaign, simulate_overnight_session
from .storage import dump_json, load_dataset, load_truth, save_dataset, write_atomic
from .trace import BatterySpec, format_trace, parse_trace
from .usecases import (compensated_soc, detect_abnormal_drop, estimate_resistance, percentile_rank,
                       remaining_time)

DEFAULT_V_FULL = 4.2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_session(path, v_full=None, model_name="generic"):
    """Session CSV plus optional ``<stem>.json`` sidecar carrying ``v_full``."""
    path = Path(path)
    trace = parse_trace(path.read_text(encoding="utf-8"))
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    vf = v_full if v_full is not None else meta.get("v_full", DEFAULT_V_FULL)
    return ChargeSessionLog(trace, float(vf), meta.get("model_name", model_name), meta.get("i_cutoff_ma"))


def _segment_kw(a):
    return dict(spike_mv=a.spike_mv, alpha=a.alpha, validity_r2=a.validity_r2)


# ---------------------------------------------------------------- commands


def cmd_simulate(a):
    cfg = preset(a.preset, seed=a.seed, fade_per_cycle=a.fade, noise_sigma_v=a.noise_mv / 1000.0,
                 outlier_rate=a.outlier_rate)
    camp = simulate_campaign(cfg, a.cycles)
    save_dataset(camp.dataset(), a.output, camp.truth_dict())
    soh = camp.true_soh
    return {"output": str(a.output), "cycles": camp.n_cycles, "preset": a.preset, "seed": a.seed,
            "true_soh_first": float(soh[0]), "true_soh_last": float(soh[-1]),
            "outlier_indices": camp.outlier_indices}


def cmd_simulate_session(a):
    trickle = TrickleConfig(trigger_drop_mv=a.trickle_mv) if a.trickle_mv else None
    cfg = preset(a.preset, seed=a.seed, trickle=trickle)
    log, truth = simulate_overnight_session(
        cfg, a.soh, with_trickle=trickle is not None, duration_h=a.hours, seed=a.seed,
        v_full=a.v_full, noise_sigma_v=a.noise_mv / 1000.0)
    out = Path(a.output)
    write_atomic(out, format_trace(log.trace))
    meta = {"v_full": log.full_charge_voltage, "model_name": log.model_name, "truth": truth.to_dict()}
    write_atomic(out.with_suffix(".json"), dump_json(meta))
    return {"output": str(out), "samples": len(log.trace), "v_full": log.full_charge_voltage,
            "trickle_events": len(truth.trigger_indices)}


def cmd_preprocess(a):
    ds = load_dataset(a.input)
    kept, report = preprocess(ds, a.max_dev, a.worst_fraction, a.window, a.duration, a.interval,
                              smooth=not a.no_smooth)
    save_dataset(kept, a.output)
    if a.report:
        write_atomic(a.report, dump_json(report.to_dict()))
    return {"input_records": len(ds), "kept": len(kept), "removed": len(report.removed),
            **report.to_dict()}


def cmd_train(a):
    ds = load_dataset(a.input)
    cfg = TrainConfig(a.duration, a.interval, not a.raw_volts, a.variance_target, a.min_leaf,
                      a.max_depth, a.soh_step)
    model = train_map(ds, cfg)
    write_atomic(a.output, model.to_json() + "\n")
    return {"output": str(a.output), "n_train": model.n_train, "k": model.pca.k,
            "variance_retained": model.pca.variance_retained, "tree_depth": model.tree.depth(),
            "leaves": len(model.tree.leaves()), "uses_dropped_voltage": model.uses_dropped_voltage}


def _load_model(path):
    return FingerprintModel.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_segment(a):
    log = _read_session(a.session, a.v_full)
    subs = segment_subtraces(log, **_segment_kw(a))
    out = Path(a.output)
    manifest = []
    for k, sub in enumerate(subs):
        name = f"sub_{k:03d}.csv"
        write_atomic(out / name, format_trace(sub.trace))
        manifest.append({"file": name, **sub.to_dict()})
    write_atomic(out / "manifest.json", dump_json({"v_full": log.full_charge_voltage, "subtraces": manifest}))
    return {"output": str(out), "subtraces": manifest}


def cmd_estimate(a):
    model = _load_model(a.model)
    log = _read_session(a.session, a.v_full, model.model_name)
    sid = a.session_id or Path(a.session).stem
    est = estimate_session(model, log, sid, a.timestamp, min_subtrace_s=a.min_subtrace_s, **_segment_kw(a))
    hist = EstimateHistory()
    if a.history and Path(a.history).exists():
        hist = EstimateHistory.from_jsonl(Path(a.history).read_text(encoding="utf-8"))
    hist.append(est)
    hist = smooth_history(hist, a.window)
    if a.history:
        write_atomic(a.history, hist.to_jsonl())
    last = hist.estimates[-1]
    return {"session_id": sid, "raw": last.raw, "smoothed": last.smoothed, "n_subtraces": last.n_subtraces,
            "clamped": last.clamped, "predictions": list(last.predictions), "history_length": len(hist)}


def cmd_baseline(a):
    ds = load_dataset(a.input)
    model = baseline_fit(a.kind, ds)
    out = {"model": model.to_dict()}
    if a.output:
        write_atomic(a.output, dump_json(model.to_dict()))
    if a.trace:
        p = baseline_predict(model, parse_trace(Path(a.trace).read_text(encoding="utf-8")))
        out["prediction"] = {"soh": p.soh, "feature": p.feature, "anchor_path": p.anchor_path,
                             "out_of_range": p.out_of_range}
    if a.session:
        mean, preds = baseline_session(model, _read_session(a.session, a.v_full), **_segment_kw(a))
        out["session"] = {"soh": mean, "out_of_range": any(p.out_of_range for p in preds),
                          "anchor_paths": [p.anchor_path for p in preds]}
    return out


def cmd_evaluate(a):
    model = _load_model(a.model)
    hold = load_dataset(a.holdout)
    truth = load_truth(a.holdout) if a.use_truth else None
    true = None
    if truth:
        by_idx = {c["cycle_index"]: c["true_soh"] for c in truth["cycles"]}
        true = [by_idx[i] for i in hold.indices]
    conf = evaluate_confusion(model, hold, a.bins, true)
    pred = np.array([model.predict(r.relax_trace) for r in hold])
    ref = hold.soh if true is None else np.array(true)
    err = np.abs(pred - ref)
    return {"confusion": conf.to_dict(), "accuracy": conf.accuracy, "mean_abs_error": float(err.mean()),
            "p95_abs_error": float(np.percentile(err, 95)), "reference": "truth" if true else "labels"}


def cmd_usecase(a):
    if a.usecase in ("soc", "remaining"):
        spec = BatterySpec(a.design_mah)
        if a.usecase == "soc":
            r = compensated_soc(a.remaining_mah, a.soh, spec)
            return {"soc": r.soc, "clamped": r.clamped, "naive_soc": a.remaining_mah / a.design_mah}
        return {"minutes": remaining_time(a.remaining_mah, a.soh, spec, a.current_ma),
                "naive_minutes": remaining_time(a.remaining_mah, 1.0, spec, a.current_ma)}
    if a.usecase == "anomaly":
        hist = EstimateHistory.from_jsonl(Path(a.history).read_text(encoding="utf-8"))
        flags = detect_abnormal_drop(hist, a.threshold, a.field)
        return {"flags": [{"index": f.index, "session_id": f.session_id, "drop": f.drop} for f in flags]}
    if a.usecase == "resistance":
        tr = parse_trace(Path(a.trace).read_text(encoding="utf-8"))
        sub = RelaxSubTrace(tr, fit_power(tr), (float(tr.t[0]), float(tr.t[-1])))
        r = estimate_resistance(sub, a.i_before_ma, a.at_s)
        return {"r_mohm": r.r_mohm, "dv": r.dv, "di": r.di, "at_relax_s": r.at_relax_s, "valid": r.valid}
    text = Path(a.population).read_text(encoding="utf-8").strip()
    pop = json.loads(text) if text.startswith("[") else [float(x) for x in text.split()]
    return {"percentile": percentile_rank(a.soh, pop), "population": len(pop)}


def emit_plot_data(history: EstimateHistory = None, dataset=None) -> str:
    """Tidy CSV: ``session_id,timestamp,raw,smoothed,n_subtraces`` or ``cycle_index,soh,synthetic``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if history is not None:
        w.writerow(["session_id", "timestamp", "raw", "smoothed", "n_subtraces"])
        for e in history:
            w.writerow([e.session_id, repr(e.timestamp), repr(e.raw), repr(e.smoothed), e.n_subtraces])
    else:
        w.writerow(["cycle_index", "soh", "synthetic"])
        for r in dataset:
            w.writerow([r.cycle_index, repr(r.soh), int(r.synthetic)])
    return buf.getvalue()


def cmd_plot_data(a):
    if a.history:
        text = emit_plot_data(EstimateHistory.from_jsonl(Path(a.history).read_text(encoding="utf-8")))
    else:
        text = emit_plot_data(dataset=load_dataset(a.dataset))
    write_atomic(a.output, text)
    return {"output": str(a.output), "rows": text.count("\n") - 1}


# ------------------------------------------------------------------ parser


def _add_grid(p):
    p.add_argument("--duration", type=float, default=1800.0, help="grid length in seconds (default 1800)")
    p.add_argument("--interval", type=float, default=1.0, help="grid spacing in seconds (default 1)")


def _add_segment(p):
    p.add_argument("--v-full", type=float, default=None, help="full-charge voltage; else sidecar, else 4.2")
    p.add_argument("--spike-mv", type=float, default=SPIKE_MV, help="trickle trigger threshold (default 5 mV)")
    p.add_argument("--alpha", type=float, default=ALPHA, help="low-pass smoothing factor (default 0.3)")
    p.add_argument("--validity-r2", type=float, default=VALIDITY_R2, help="minimum power-fit R^2 (default 0.95)")


def build_parser():
    ap = _Parser(prog="sohprint", description="Battery SoH from relaxing voltage")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="JSON file with option overrides")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ap.commands = sub.choices

    p = sub.add_parser("simulate", help="simulate a cycling campaign")
    p.add_argument("--preset", choices=sorted(PRESETS), default="galaxy-s3")
    p.add_argument("--cycles", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fade", type=float, default=0.001, help="SoH lost per cycle (default 0.001)")
    p.add_argument("--noise-mv", type=float, default=0.5, help="voltage noise sigma (default 0.5 mV)")
    p.add_argument("--outlier-rate", type=float, default=0.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("simulate-session", help="simulate an over-night charge session")
    p.add_argument("--preset", choices=sorted(PRESETS), default="galaxy-s3")
    p.add_argument("--soh", type=float, required=True)
    p.add_argument("--hours", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-mv", type=float, default=1.0, help="voltage noise sigma (default 1 mV)")
    p.add_argument("--v-full", type=float, default=None)
    p.add_argument("--trickle-mv", type=float, default=None, help="trickle trigger drop; omit for none")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate_session)

    p = sub.add_parser("preprocess", help="filter outliers and smooth a dataset")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--max-dev", type=float, default=0.005, help="SoH residual limit (default 0.005)")
    p.add_argument("--worst-fraction", type=float, default=0.05, help="trace quota (default 0.05)")
    p.add_argument("--window", type=int, default=5, help="moving-average window (default 5)")
    p.add_argument("--no-smooth", action="store_true")
    p.add_argument("--report")
    _add_grid(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a fingerprint model")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--raw-volts", action="store_true", help="use raw volts instead of dropped voltage")
    p.add_argument("--variance-target", type=float, default=0.99)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=20)
    p.add_argument("--soh-step", type=float, default=0.001)
    _add_grid(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="cut a session into relaxation sub-traces")
    p.add_argument("-s", "--session", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_segment(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("estimate", help="estimate SoH from a session")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-s", "--session", required=True)
    p.add_argument("--history", help="JSON-lines history to append to")
    p.add_argument("--session-id")
    p.add_argument("--timestamp", type=float, default=0.0)
    p.add_argument("--window", type=int, default=10, help="smoother window (default 10)")
    p.add_argument("--min-subtrace-s", type=float, default=MIN_SUBTRACE_S)
    _add_segment(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("baseline", help="calibrate a baseline and optionally predict")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--trace")
    p.add_argument("-s", "--session")
    _add_segment(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="confusion matrix on a holdout dataset")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--bins", type=float, default=0.04)
    p.add_argument("--use-truth", action="store_true", help="compare with truth.json instead of labels")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("usecase", help="SoC, runtime, anomaly, resistance and rank")
    uc = p.add_subparsers(dest="usecase", required=True, parser_class=_Parser)
    ap.usecases = uc.choices
    q = uc.add_parser("soc")
    q.add_argument("--remaining-mah", type=float, required=True)
    q.add_argument("--soh", type=float, required=True)
    q.add_argument("--design-mah", type=float, required=True)
    q = uc.add_parser("remaining")
    q.add_argument("--remaining-mah", type=float, required=True)
    q.add_argument("--soh", type=float, required=True)
    q.add_argument("--design-mah", type=float, required=True)
    q.add_argument("--current-ma", type=float, required=True)
    q = uc.add_parser("anomaly")
    q.add_argument("--history", required=True)
    q.add_argument("--threshold", type=float, default=0.02)
    q.add_argument("--field", choices=("smoothed", "raw"), default="smoothed")
    q = uc.add_parser("resistance")
    q.add_argument("--trace", required=True)
    q.add_argument("--i-before-ma", type=float, required=True)
    q.add_argument("--at-s", type=float, default=1.0)
    q = uc.add_parser("rank")
    q.add_argument("--soh", type=float, required=True)
    q.add_argument("--population", required=True, help="file holding a JSON list or whitespace-separated values")
    p.set_defaults(func=cmd_usecase)

    p = sub.add_parser("plot-data", help="tidy CSV of a history or dataset")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--history")
    g.add_argument("--dataset")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot_data)
    return ap


def _apply_config(parser, argv):
    """Parse, then re-parse with ``--config`` values installed as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(overrides, dict):
        raise UsageError("--config must hold a JSON object")
    overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
    unknown = sorted(set(overrides) - set(vars(args)) - {"command", "usecase", "func"})
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    target = parser.commands[args.command]
    if getattr(args, "usecase", None):
        target = parser.usecases[args.usecase]
    target.set_defaults(**overrides)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        result = args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 2
    except (SohError, ValueError, OSError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
