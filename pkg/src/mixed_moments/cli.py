"""Command line: coeffs, moment, verify, osclab, meanvalue, constants."""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    DegenerateFit,
    constant_cf,
    predict,
    residual_scan,
    scan_from_values,
    two_diagonal_main_term,
)
from .hecke import (
    DELTA,
    CoefficientError,
    CoefficientTable,
    CoefficientParseError,
    InvariantViolation,
    check_invariants,
    emit_coefficients,
    ingest_coefficients,
    load_or_generate,
    tau_values,
)
from .lfun import lfun_near_one, required_terms
from .moments import (
    BudgetExceeded,
    MomentEvaluationError,
    MomentRequest,
    PreconditionError,
    mean_value_check,
    moment,
)
from .osclab import (
    DEFAULT_PROBLEMS,
    ProblemParseError,
    decay_certificate,
    load_problems,
    parse_problems,
    stationary_error_slope,
)
from .special import CutoffKernel
from .weights import BumpFunction, integral_c

log = logging.getLogger("mixed_moments")

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_THRESHOLD = 0, 1, 2, 3
TAU_PRINT_LIMIT = 30
TABLE_BLOCK = 10_000


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int, detail=None):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code
        self.detail = detail


# ---------------------------------------------------------------------------
# records


def _plain(obj):
    """JSON-ready copy: complex -> [re, im], tuples -> lists, dataclasses -> dicts."""
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def canonical(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def make_record(command: str, config: dict, results: dict, wall_time: float) -> dict:
    cfg = _plain(config)
    return {
        "command": command,
        "config": cfg,
        "results": _plain(results),
        "software_version": __version__,
        "input_hash": hashlib.sha256(canonical(cfg).encode()).hexdigest(),
        "wall_time": wall_time,
    }


def emit_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2)


def parse_record(text: str) -> dict:
    return json.loads(text)


def results_payload(record: dict) -> str:
    """The deterministic part of a record."""
    return canonical(record["results"])


def _write(path: str | None, text: str):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# config

DEFAULTS = {
    "n_max": None,
    "ingest": None,
    "emit": None,
    "cache_dir": None,
    "T": None,
    "T_list": "500,1000,2000,4000",
    "variant": "zeta_square",
    "cutoff": "smoothed",
    "weight": "plain",
    "delta": 10.0,
    "kernel": "gauss",
    "nodes_per_oscillation": 6.0,
    "panel_width": None,
    "workers": 1,
    "max_evaluations": None,
    "threshold": 0.85,
    "synthetic_exponent": None,
    "problems": None,
    "coeffs": "1,1",
    "json": None,
    "csv": None,
    "gnuplot": None,
    "allow_large_delta": False,
}

_TYPES = {
    "n_max": int,
    "T": float,
    "delta": float,
    "nodes_per_oscillation": float,
    "panel_width": float,
    "workers": int,
    "max_evaluations": int,
    "threshold": float,
    "synthetic_exponent": float,
}


def load_config(path: str | None, command: str) -> dict:
    """Values from the [common] and [<command>] sections of an INI-style file."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise CliError("PARSE_ERROR", f"config file: {exc}", EXIT_VALIDATION) from exc
    out = {}
    for section in ("common", command):
        if cp.has_section(section):
            for k, v in cp.items(section):
                key = k.replace("-", "_")
                if key.lower() == "t":
                    key = "T"
                elif key.lower() == "t_list":
                    key = "T_list"
                if key not in DEFAULTS:
                    raise CliError("PARSE_ERROR", f"unknown config key {k!r}", EXIT_VALIDATION)
                try:
                    out[key] = _TYPES.get(key, str)(v)
                except ValueError as exc:
                    raise CliError("PARSE_ERROR", f"config key {k}: {exc}", EXIT_VALIDATION) from exc
    return out


def resolve(args: argparse.Namespace, command: str) -> dict:
    """flags > config file > defaults."""
    cfg = dict(DEFAULTS)
    cfg.update(load_config(getattr(args, "config", None), command))
    for k, v in vars(args).items():
        if k in cfg and v is not None:
            cfg[k] = v
    return cfg


def _weight(cfg) -> BumpFunction:
    kind = {"plain": "plain_bump", "plain_bump": "plain_bump", "plateau": "plateau"}.get(cfg["weight"])
    if kind is None:
        raise CliError("VALIDATION", f"unknown weight {cfg['weight']!r}", EXIT_VALIDATION)
    try:
        return BumpFunction(kind, float(cfg["delta"]) if kind == "plateau" else 2.0)
    except ValueError as exc:
        raise CliError("VALIDATION", str(exc), EXIT_VALIDATION) from exc


def _kernel(cfg) -> CutoffKernel:
    try:
        return CutoffKernel(cfg["kernel"])
    except ValueError as exc:
        raise CliError("VALIDATION", str(exc), EXIT_VALIDATION) from exc


def _t_list(cfg) -> list[float]:
    try:
        Ts = [float(x) for x in str(cfg["T_list"]).split(",") if x.strip()]
    except ValueError as exc:
        raise CliError("VALIDATION", f"bad T list: {exc}", EXIT_VALIDATION) from exc
    if len(Ts) < 3 or any(b <= a for a, b in zip(Ts, Ts[1:])) or Ts[0] < 100:
        raise CliError("VALIDATION", "T list needs >= 3 increasing values, all >= 100", EXIT_VALIDATION)
    return Ts


def table_for(t_max: float, cache_dir=None):
    """Delta coefficients covering evaluations up to height t_max."""
    need = required_terms(t_max, DELTA)
    n_max = TABLE_BLOCK * math.ceil(need / TABLE_BLOCK)
    table, hit = load_or_generate(n_max, cache_dir)
    log.info("coefficients n_max=%d (%s)", n_max, "cache hit" if hit else "generated")
    return table


# ---------------------------------------------------------------------------
# commands


def cmd_coeffs(cfg) -> tuple[int, dict]:
    if cfg["ingest"]:
        try:
            table = ingest_coefficients(cfg["ingest"])
        except InvariantViolation as exc:
            raise CliError("COEFF_INVARIANT", str(exc), EXIT_VALIDATION,
                           {"first_failing_pair": exc.pair}) from exc
        except (CoefficientParseError, OSError) as exc:
            raise CliError("PARSE_ERROR", str(exc), EXIT_VALIDATION) from exc
        exact = table.exact_values
    else:
        n_max = cfg["n_max"]
        if n_max is None or n_max < 1:
            raise CliError("VALIDATION", "--n-max must be a positive integer", EXIT_VALIDATION)
        table, hit = load_or_generate(n_max, cfg["cache_dir"])
        sys.stderr.write(f"coefficient cache {'hit' if hit else 'miss'}: n_max={n_max}\n")
        exact = None
        if table.exact_values is not None:
            # fresh generation: the exact integer checks run as well
            exact_report = check_invariants(table)
            log.info("exact invariants: %s", exact_report.summary())
            if not exact_report.ok:
                raise CliError("COEFF_INVARIANT", "; ".join(exact_report.failures), EXIT_VALIDATION,
                               {"first_failing_pair": exact_report.first_failing_pair})
    # the printed summary uses the float checks so warm and cold runs agree
    report = check_invariants(CoefficientTable(table.values, table.source))
    if not report.ok:
        raise CliError("COEFF_INVARIANT", "; ".join(report.failures), EXIT_VALIDATION,
                       {"first_failing_pair": report.first_failing_pair})
    shown = min(table.n_max, TAU_PRINT_LIMIT)
    taus = list(exact[:shown]) if exact is not None else tau_values(shown)
    lines = ["n,tau,lambda"]
    lines += [f"{n},{taus[n - 1]},{float(table.values[n - 1])!r}" for n in range(1, shown + 1)]
    lines.append(report.summary())
    sys.stdout.write("\n".join(lines) + "\n")
    if cfg["emit"]:
        emit_coefficients(table, cfg["emit"])
    return EXIT_OK, {
        "n_max": table.n_max,
        "tau_head": taus,
        "invariants_ok": report.ok,
        "deligne_violations": report.deligne_violations[:20],
    }


def _moment_request(cfg, T) -> MomentRequest:
    V = _weight(cfg) if cfg["cutoff"] == "smoothed" else None
    try:
        return MomentRequest(T, cfg["variant"], cfg["cutoff"], V,
                             float(cfg["nodes_per_oscillation"]), cfg["panel_width"],
                             enforce_delta=not _flag(cfg["allow_large_delta"]))
    except PreconditionError as exc:
        raise CliError("VALIDATION", str(exc), EXIT_VALIDATION) from exc


def _flag(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "on")
    return bool(v)


def _validate_common(cfg):
    if int(cfg["workers"]) < 1:
        raise CliError("VALIDATION", "workers must be >= 1", EXIT_VALIDATION)
    if cfg["max_evaluations"] is not None and int(cfg["max_evaluations"]) < 1:
        raise CliError("VALIDATION", "max_evaluations must be positive", EXIT_VALIDATION)


def _run_moment(cfg, req, table, kernel):
    try:
        return moment(req, DELTA, table, kernel=kernel, workers=int(cfg["workers"]),
                      max_evaluations=cfg["max_evaluations"])
    except BudgetExceeded as exc:
        raise CliError("BUDGET_EXCEEDED", str(exc), EXIT_INTERNAL,
                       {"partial": exc.partial, "panels_done": exc.panels_done,
                        "panels_total": exc.panels_total}) from exc
    except MomentEvaluationError as exc:
        raise CliError("EVALUATION_ERROR", str(exc), EXIT_INTERNAL, {"t": exc.t}) from exc


def cmd_moment(cfg) -> tuple[int, dict]:
    if cfg["T"] is None:
        raise CliError("VALIDATION", "--T is required", EXIT_VALIDATION)
    req = _moment_request(cfg, float(cfg["T"]))
    kernel = _kernel(cfg)
    _validate_common(cfg)
    table = table_for(2 * req.T, cfg["cache_dir"])
    res = _run_moment(cfg, req, table, kernel)
    results = {
        "T": req.T,
        "variant": req.variant,
        "cutoff": req.cutoff,
        "value": res.value,
        "quad_error": res.quad_error,
        "eval_count": res.eval_count,
        "panels": res.panels,
        "delta_violation": req.delta_violation,
    }
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(_csv_text(
            ["T", "variant", "cutoff", "re", "im", "quad_error", "eval_count"],
            [[req.T, req.variant, req.cutoff, res.value.real, res.value.imag,
              res.quad_error, res.eval_count]]))
    return EXIT_OK, results


def cmd_verify(cfg) -> tuple[int, dict]:
    Ts = _t_list(cfg)
    V = _weight(cfg)
    threshold = float(cfg["threshold"])
    _validate_common(cfg)
    if cfg["synthetic_exponent"] is not None:
        # planted power law on top of the formula; no L-values needed
        p = float(cfg["synthetic_exponent"])
        table = table_for(100.0, cfg["cache_dir"])
        cf = constant_cf(V, DELTA, table) if cfg["variant"] == "zeta_square" else 0j
        preds = [predict(T, cfg["variant"], V, DELTA, table, c_f=cf).main_term for T in Ts]
        scan = scan_from_values(Ts, [m + T**p for m, T in zip(preds, Ts)], preds)
        extra = {}
    else:
        table = table_for(2 * Ts[-1], cfg["cache_dir"])
        reqs = [_moment_request(cfg, T) for T in Ts]
        kernel = _kernel(cfg)
        runs = [_run_moment(cfg, r, table, kernel) for r in reqs]
        try:
            scan = residual_scan(Ts, cfg["variant"], V if cfg["cutoff"] == "smoothed" else None,
                                 DELTA, table, cutoff=cfg["cutoff"],
                                 measured=[r.value for r in runs],
                                 quad_errors=[r.quad_error for r in runs])
        except DegenerateFit as exc:
            raise CliError("DEGENERATE_FIT", str(exc), EXIT_INTERNAL) from exc
        extra = {"eval_counts": [r.eval_count for r in runs]}
        if cfg["variant"] == "zeta_square" and cfg["cutoff"] == "smoothed":
            extra["two_diagonal_main_term"] = [two_diagonal_main_term(T, V, DELTA, table) for T in Ts]
    rows = [
        [r.T, r.measured.real, r.measured.imag, r.predicted.real, r.predicted.imag,
         r.abs_residual, r.scaled(0.5), r.scaled(2 / 3)]
        for r in scan.rows
    ]
    header = ["T", "measured_re", "measured_im", "predicted_re", "predicted_im",
              "abs_residual", "residual_over_T^0.5", "residual_over_T^(2/3)"]
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(_csv_text(header, rows))
    if cfg["gnuplot"]:
        Path(cfg["gnuplot"]).write_text(
            "# T |residual|\n" + "".join(f"{r.T!r} {r.abs_residual!r}\n" for r in scan.rows))
    passed = scan.fit_ok and scan.slope <= threshold
    results = {
        "variant": cfg["variant"],
        "cutoff": cfg["cutoff"],
        "T_list": Ts,
        "table": [dict(zip(header, r)) for r in rows],
        "slope": scan.slope,
        "fit_ok": scan.fit_ok,
        "threshold": threshold,
        "pass": passed,
        **extra,
    }
    sys.stderr.write(f"fitted exponent {scan.slope:.4f} (threshold {threshold}) "
                     f"{'PASS' if passed else 'FAIL'}\n")
    return (EXIT_OK if passed else EXIT_THRESHOLD), results


def cmd_osclab(cfg) -> tuple[int, dict]:
    try:
        problems = load_problems(cfg["problems"]) if cfg["problems"] else parse_problems(DEFAULT_PROBLEMS)
    except ProblemParseError as exc:
        raise CliError("PARSE_ERROR", str(exc), EXIT_VALIDATION) from exc
    certs, rows, ok = [], [], True
    for p in problems:
        if p.kind == "linear":
            c = decay_certificate(p)
            passed = c.passes(-3.0)
            certs.append({"name": p.name, "kind": p.kind, "lam": p.lam, "decay_slope": c.slope,
                          "underflow": c.underflow, "magnitudes": c.magnitudes,
                          "bound": -3.0, "pass": passed})
            rows.append([p.name, p.kind, p.lam, "decay_slope", c.slope, passed])
        else:
            lams = (p.lam, 4 * p.lam, 16 * p.lam)
            slope, errs = stationary_error_slope(p, lams)
            passed = slope <= -1.4
            certs.append({"name": p.name, "kind": p.kind, "lams": lams, "error_slope": slope,
                          "errors": errs, "comparison": -1.4, "pass": passed})
            rows.append([p.name, p.kind, p.lam, "error_slope", slope, passed])
        ok = ok and passed
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(_csv_text(["name", "kind", "lam", "statistic", "value", "pass"], rows))
    return (EXIT_OK if ok else EXIT_THRESHOLD), {"certificates": certs}


def cmd_meanvalue(cfg) -> tuple[int, dict]:
    try:
        a = [complex(x.replace(" ", "")) for x in str(cfg["coeffs"]).split(",") if x.strip()]
    except ValueError as exc:
        raise CliError("PARSE_ERROR", f"bad coefficient list: {exc}", EXIT_VALIDATION) from exc
    T = float(cfg["T"]) if cfg["T"] is not None else 10.0
    if not a or not T > 0:
        raise CliError("VALIDATION", "need a nonempty coefficient list and T > 0", EXIT_VALIDATION)
    try:
        lhs, rhs = mean_value_check(a, T)
    except BudgetExceeded as exc:
        raise CliError("BUDGET_EXCEEDED", "N and T must be <= 1e4", EXIT_VALIDATION) from exc
    passed = lhs <= 3 * rhs
    sys.stdout.write(f"lhs={lhs!r} rhs={rhs!r} {'PASS' if passed else 'FAIL'}\n")
    return (EXIT_OK if passed else EXIT_THRESHOLD), {
        "N": len(a), "T": T, "lhs": lhs, "rhs": rhs, "pass": passed}


def cmd_constants(cfg) -> tuple[int, dict]:
    V = _weight(cfg)
    table = table_for(100.0, cfg["cache_dir"])
    c = integral_c(V)
    L1 = lfun_near_one(0.0, DELTA, table).value
    cf = constant_cf(V, DELTA, table)
    sys.stdout.write(f"c={c!r}\nL(1,f)={L1!r}\nc_f={cf!r}\n")
    T = float(cfg["T"]) if cfg["T"] is not None else None
    out = {"c": c, "L1": L1, "c_f": cf}
    if T is not None:
        out["prediction"] = predict(T, cfg["variant"], V, DELTA, table, c_f=cf)
    return EXIT_OK, out


COMMANDS = {
    "coeffs": cmd_coeffs,
    "moment": cmd_moment,
    "verify": cmd_verify,
    "osclab": cmd_osclab,
    "meanvalue": cmd_meanvalue,
    "constants": cmd_constants,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixed-moments", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config")
        p.add_argument("--cache-dir", dest="cache_dir")
        p.add_argument("--json", help="write the JSON record here instead of stdout")
        p.add_argument("--csv")

    def moment_knobs(p):
        p.add_argument("--variant", choices=["zeta_square", "zeta_linear"])
        p.add_argument("--cutoff", choices=["smoothed", "sharp"])
        p.add_argument("--weight", choices=["plain", "plain_bump", "plateau"])
        p.add_argument("--delta", type=float)
        p.add_argument("--kernel", choices=["gauss", "quartic"])
        p.add_argument("--nodes-per-oscillation", dest="nodes_per_oscillation", type=float)
        p.add_argument("--panel-width", dest="panel_width", type=float)
        p.add_argument("--workers", type=int)
        p.add_argument("--max-evaluations", dest="max_evaluations", type=int)
        p.add_argument("--allow-large-delta", dest="allow_large_delta", action="store_true",
                       default=None, help="admit plateau delta > sqrt(T)/log T (reported)")

    p = sub.add_parser("coeffs", help="generate or ingest Hecke coefficients")
    common(p)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--ingest")
    p.add_argument("--emit", help="also write the table as CSV")

    p = sub.add_parser("moment", help="smoothed or sharp mixed moment")
    common(p)
    moment_knobs(p)
    p.add_argument("--T", dest="T", type=float)

    p = sub.add_parser("verify", help="residual scan against the predicted main term")
    common(p)
    moment_knobs(p)
    p.add_argument("--T-list", dest="T_list")
    p.add_argument("--threshold", type=float)
    p.add_argument("--synthetic-exponent", dest="synthetic_exponent", type=float)
    p.add_argument("--gnuplot")

    p = sub.add_parser("osclab", help="stationary-phase and decay certificates")
    common(p)
    p.add_argument("--problems")

    p = sub.add_parser("meanvalue", help="mean-value inequality diagnostic")
    common(p)
    p.add_argument("--coeffs")
    p.add_argument("--T", dest="T", type=float)

    p = sub.add_parser("constants", help="print c, c_f and L(1, f)")
    common(p)
    p.add_argument("--weight", choices=["plain", "plain_bump", "plateau"])
    p.add_argument("--delta", type=float)
    p.add_argument("--variant", choices=["zeta_square", "zeta_linear"])
    p.add_argument("--T", dest="T", type=float)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    cfg = {}
    try:
        cfg = resolve(args, args.command)
        code, results = COMMANDS[args.command](cfg)
    except CliError as exc:
        record = make_record(args.command, cfg, {"error": {
            "code": exc.code, "message": str(exc), "detail": exc.detail}},
            time.perf_counter() - start)
        _write(None, emit_record(record))
        return exc.exit_code
    except (CoefficientError, ValueError) as exc:
        record = make_record(args.command, cfg, {"error": {
            "code": "VALIDATION", "message": str(exc), "detail": None}},
            time.perf_counter() - start)
        _write(None, emit_record(record))
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - last-resort error record
        record = make_record(args.command, cfg, {"error": {
            "code": "INTERNAL", "message": f"{type(exc).__name__}: {exc}", "detail": None}},
            time.perf_counter() - start)
        _write(None, emit_record(record))
        return EXIT_INTERNAL
    record = make_record(args.command, cfg, results, time.perf_counter() - start)
    if cfg.get("json") or args.command not in ("coeffs", "meanvalue", "constants"):
        _write(cfg.get("json"), emit_record(record))
    return code


if __name__ == "__main__":
    sys.exit(main())
