"""Command-line interface: ``tcpreempt {fit,schedule,analyze,simulate}``.

Times are in hours unless a flag ends in ``-minutes``.  Exit status is 0 on
success, 1 for bad input and 2 for internal errors.  Output files are written
only after the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from typing import Optional

import numpy as np

from . import checkpointing, fitting, ingestion, models, policies, simulator

DEADLINE_ENV = "TCPREEMPT_DEADLINE"
FIT_FAMILIES = ("bathtub", "exponential", "weibull", "gompertz-makeham")


class UserError(Exception):
    """Bad input from the command line; exits with status 1."""


def default_deadline() -> float:
    raw = os.environ.get(DEADLINE_ENV)
    if raw is None or raw == "":
        return 24.0
    try:
        v = float(raw)
    except ValueError:
        raise UserError(f"{DEADLINE_ENV}={raw!r} is not a number") from None
    if not v > 0:
        raise UserError(f"{DEADLINE_ENV} must be positive")
    return v


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(outputs: dict) -> None:
    """Write ``{path: text}``; ``None`` or ``-`` paths go to stdout."""
    for path, text in outputs.items():
        if path in (None, "-"):
            sys.stdout.write(text)
        else:
            _write_atomic(path, text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_json_arg(arg: str, what: str):
    """Inline JSON or a path to a JSON file."""
    text = arg
    if not arg.lstrip().startswith(("{", "[")):
        try:
            with open(arg) as fh:
                text = fh.read()
        except OSError as exc:
            raise UserError(f"cannot read {what} {arg!r}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UserError(f"{what} is not valid JSON: {exc}") from None


def load_model(arg: str, deadline: Optional[float] = None) -> models.FailureModel:
    """Accepts ``{"family", "params"}``, a fit result, a ``fit --family all`` document or bare bathtub params."""
    d = _load_json_arg(arg, "params")
    if not isinstance(d, dict):
        raise UserError("params must be a JSON object")
    if "fits" in d and "best" in d:
        d = d["fits"][d["best"]]
    if "family" in d:
        fam = d["family"]
        body = d.get("params", d.get("model"))
        if not isinstance(body, dict):
            raise UserError("params document needs a 'params' object")
    else:
        fam, body = "bathtub", d
    body = dict(body)
    if fam == "bathtub" and "L" not in body and deadline is not None:
        body["L"] = deadline
    try:
        return models.model_from_dict(fam, body)
    except KeyError as exc:
        raise UserError(f"missing parameter {exc} for family {fam!r}") from None


def _hours_or_minutes(hours, minutes, name, default=None):
    if hours is not None and minutes is not None:
        raise UserError(f"give only one of --{name} and --{name}-minutes")
    if minutes is not None:
        return minutes / 60.0
    if hours is not None:
        return hours
    if default is None:
        raise UserError(f"--{name} or --{name}-minutes is required")
    return default


# ----------------------------------------------------------------------- fit

def cmd_fit(args) -> dict:
    L = args.deadline if args.deadline is not None else default_deadline()
    cmap = ingestion.load_column_map(args.column_map) if args.column_map else None
    if not os.path.exists(args.input):
        raise UserError(f"input file {args.input!r} not found")
    parsed = ingestion.parse_dataset(args.input, cmap)
    for err in parsed.errors[:20]:
        print(f"warning: {args.input}: {err}", file=sys.stderr)
    if len(parsed.errors) > 20:
        print(f"warning: {len(parsed.errors) - 20} more row errors", file=sys.stderr)
    if parsed.errors and args.strict:
        raise UserError(f"{len(parsed.errors)} malformed rows (first at line {parsed.errors[0].line})")
    flt = ingestion.CohortFilter.from_json(_load_json_arg(args.filter, "filter")) if args.filter else None
    ecdf = ingestion.group_and_build(parsed.records, flt, deadline=L)
    if args.family == "all":
        fits = fitting.fit_all(ecdf, L)
        best = max(fits, key=lambda k: fits[k].r_squared)
        doc = {"n": ecdf.n, "deadline": L, "row_errors": len(parsed.errors), "best": best,
               "fits": {k: v.to_json() for k, v in fits.items()}}
        rows = [f"{'family':<18}{'r2':>10}"]
        rows += [f"{k:<18}{v.r_squared:>10.5f}" for k, v in fits.items()]
        print("\n".join(rows), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    elif args.family == "bathtub":
        doc = fitting.fit_bathtub(ecdf, L).to_json()
    else:
        doc = fitting.fit_baseline(ecdf, args.family).to_json()
    return {args.out: _json_text(doc)}


# ------------------------------------------------------------------ schedule

def cmd_schedule(args) -> dict:
    L = default_deadline()
    model = load_model(args.params, L)
    delta = _hours_or_minutes(args.delta, args.delta_minutes, "delta")
    step = _hours_or_minutes(args.step, args.step_minutes, "step", default=1.0 / 60.0)
    if not step > 0:
        raise UserError("step must be positive")
    if not args.job_length > 0:
        raise UserError("job length must be positive")
    sched = checkpointing.optimal_checkpoint_schedule(model, args.job_length, args.start_age, delta, step)
    doc = sched.to_json()
    doc.update({"job_length_hours": args.job_length, "start_age_hours": args.start_age,
                "delta_hours": delta, "model": models.model_to_dict(model),
                "family": models.family_of(model)})
    if args.out not in (None, "-"):
        print("intervals (minutes): " + ", ".join(f"{m:g}" for m in doc["intervals_minutes"]))
    return {args.out: _json_text(doc)}


# ------------------------------------------------------------------- analyze

def _sweep_grid(args, hi_default):
    lo = args.min if args.min is not None else (hi_default / args.points if args.sweep == "job-length" else 0.0)
    hi = args.max if args.max is not None else hi_default
    if args.points < 2:
        raise UserError("--points must be >= 2")
    if not (0 <= lo < hi <= hi_default + 1e-12):
        raise UserError(f"sweep bounds must satisfy 0 <= min < max <= {hi_default:g}")
    if args.sweep == "job-length" and lo <= 0:
        raise UserError("job-length sweep must start above 0")
    return np.linspace(lo, hi, args.points)


def cmd_analyze(args) -> dict:
    L = default_deadline()
    model = load_model(args.params, L)
    if model.deadline is None:
        raise UserError("analyze compares against a deadline; use a bounded (bathtub or uniform) model")
    L = model.deadline
    uni = models.UniformDeadline(L)
    mode, sweep = args.mode, args.sweep
    rows = []
    if mode == "waste":
        if sweep != "job-length":
            raise UserError("waste is defined for jobs on a fresh VM; use --sweep job-length")
        for J in _sweep_grid(args, L):
            rows.append({"job_length": J, "bathtub": policies.expected_wasted_work(model, J),
                         "uniform": policies.expected_wasted_work(uni, J)})
    elif mode == "runtime":
        if sweep == "job-length":
            s = args.start_age
            for J in _sweep_grid(args, L - s):
                rows.append({"job_length": J, "start_age": s,
                             "bathtub": policies.expected_running_time(model, J, s) - J,
                             "uniform": policies.expected_running_time(uni, J, s) - J})
        else:
            J = _require_job_length(args, L)
            for s in _sweep_grid(args, L - J):
                rows.append({"job_length": J, "start_age": s,
                             "bathtub": policies.expected_running_time(model, J, s) - J,
                             "uniform": policies.expected_running_time(uni, J, s) - J})
    else:
        if sweep != "start-age":
            raise UserError("reuse-threshold is swept over VM age; use --sweep start-age")
        if args.max is None:
            args.max = L * (1 - 1 / args.points)
        if args.max >= L:
            raise UserError("reuse-threshold sweep needs --max below the deadline")
        for s in _sweep_grid(args, L):
            rows.append({"start_age": s, "bathtub": policies.reuse_threshold(model, s),
                         "uniform": policies.reuse_threshold(uni, s)})
    if not rows:
        raise UserError("empty sweep")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    return {args.out: buf.getvalue()}


def _require_job_length(args, L):
    if args.job_length is None:
        raise UserError("--job-length is required for a start-age sweep")
    if not 0 < args.job_length < L:
        raise UserError(f"--job-length must be in (0, {L:g})")
    return args.job_length


# ------------------------------------------------------------------ simulate

def cmd_simulate(args) -> dict:
    doc = _load_json_arg(args.config, "config")
    if not isinstance(doc, dict):
        raise UserError("config must be a JSON object")
    if args.seed is not None:
        doc = {**doc, "cluster": {**doc.get("cluster", {}), "rng_seed": args.seed}}
    cluster, bag = simulator.config_from_json(doc)
    if args.replications < 1:
        raise UserError("--replications must be >= 1")
    report = simulator.run_simulation(cluster, bag, args.replications)
    out = {args.out: report.dumps() + "\n"}
    if args.csv:
        out[args.csv] = report.to_csv()
    return out


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tcpreempt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit failure models to a lifetime CSV")
    f.add_argument("--input", required=True, help="lifetime CSV")
    f.add_argument("--column-map", help="JSON file mapping source column names to canonical ones")
    f.add_argument("--filter", help="cohort filter as inline JSON or a JSON file")
    f.add_argument("--deadline", type=float, help=f"lifetime bound L in hours (default ${DEADLINE_ENV} or 24)")
    f.add_argument("--family", default="all", choices=("all",) + FIT_FAMILIES)
    f.add_argument("--strict", action="store_true", help="fail on any malformed row")
    f.add_argument("--out", default="-", help="output JSON path (default stdout)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("schedule", help="optimal checkpoint intervals for one job")
    s.add_argument("--params", required=True, help="model JSON (inline or file)")
    s.add_argument("--job-length", type=float, required=True, help="hours")
    s.add_argument("--start-age", type=float, default=0.0, help="VM age at job start, hours")
    s.add_argument("--delta", type=float, help="checkpoint cost, hours")
    s.add_argument("--delta-minutes", type=float, help="checkpoint cost, minutes")
    s.add_argument("--step", type=float, help="discretization step, hours (default 1 minute)")
    s.add_argument("--step-minutes", type=float, help="discretization step, minutes")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_schedule)

    a = sub.add_parser("analyze", help="sweep tables comparing the model with uniform preemptions")
    a.add_argument("--params", required=True, help="model JSON (inline or file)")
    a.add_argument("--mode", required=True, choices=("waste", "runtime", "reuse-threshold"))
    a.add_argument("--sweep", default="job-length", choices=("job-length", "start-age"))
    a.add_argument("--job-length", type=float, help="hours, for start-age sweeps")
    a.add_argument("--start-age", type=float, default=0.0, help="hours, for job-length sweeps")
    a.add_argument("--min", type=float, help="sweep lower bound, hours")
    a.add_argument("--max", type=float, help="sweep upper bound, hours")
    a.add_argument("--points", type=int, default=48)
    a.add_argument("--out", default="-", help="output CSV path (default stdout)")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("simulate", help="run the cluster simulator")
    m.add_argument("--config", required=True, help="JSON with 'cluster' and 'bag' objects")
    m.add_argument("--replications", type=int, default=1)
    m.add_argument("--seed", type=int, help="overrides cluster.rng_seed")
    m.add_argument("--out", default="-", help="report JSON path (default stdout)")
    m.add_argument("--csv", help="per-replication CSV path")
    m.set_defaults(func=cmd_simulate)
    return p


USER_ERRORS = (UserError, ValueError, ArithmeticError, OSError, KeyError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        outputs = args.func(args)
        _emit(outputs)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
