"""Command-line front end: ``waveguide-lab <subcommand>``.

Subcommands: ``probe`` (one ratio), ``sweep`` (theorem / appendixA regimes),
``counterexample``, ``expsum`` (exponential-sum suites), ``xnorm`` (X^{p,q}
norm of a cube sample) and ``report`` (re-fit an existing CSV).

Exit codes: 0 success, 1 validation error, 2 numerical non-convergence, 3 I/O.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Any, Optional, Sequence

import yaml

from . import expsum as _expsum
from .errors import NonConvergenceError, WaveguideLabError
from .grid import make_cube, sample_on_cube
from .norms import xpq_norm, xpq_terms
from .probe import (
    FitResult,
    ProbeConfig,
    ProbeReport,
    ProbeRow,
    RowFailure,
    fit_exponent,
    run_sweep,
)

log = logging.getLogger("waveguide_lab")

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 1, 2, 3
CSV_COLUMNS = ("delta", "T", "p", "lhs", "rhs", "ratio")
CONFIG_KEYS = (
    "regime", "p", "deltas", "T", "T_rule", "separation", "resolution",
    "profile", "c", "seed", "output", "format",
    # extensions beyond the basic key set
    "axis", "override", "max_resolution",
)
_CONVERGENCE_KINDS = {"NonConvergenceError", "QuadratureFailure", "DerivativeOracleError"}


class ConfigError(WaveguideLabError, ValueError):
    """Invalid configuration; the message names the offending key."""


class ReportIOError(WaveguideLabError, OSError):
    """Reading or writing a report failed."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadedConfig:
    probe: ProbeConfig
    output: str = "-"
    format: str = "csv"


def _load_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ReportIOError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping of keys to values")
    return data


def _number(key: str, value) -> float:
    try:
        out = float(Fraction(value)) if isinstance(value, str) else float(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"key {key!r}: must be finite")
    return out


def _integer(key: str, value) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}") from None


def _number_list(key: str, value) -> list:
    if isinstance(value, str) and "," in value:
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        value = [value]
    return value


def parse_config(path: Optional[str] = None, flags: Optional[dict] = None, defaults: Optional[dict] = None) -> LoadedConfig:
    """Merge ``defaults`` < config file < ``flags`` (``None`` flag values are ignored).

    Raises :class:`ConfigError` for unknown keys or malformed values and
    :class:`~waveguide_lab.errors.RegimeError` for regime-inconsistent settings.
    """
    merged: dict[str, Any] = dict(defaults or {})
    if path is not None:
        data = _load_file(path)
        for key in data:
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r} in {path}")
        merged.update(data)
    for key, value in (flags or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            merged[key] = value

    kw: dict[str, Any] = {}
    if "regime" in merged:
        kw["regime"] = str(merged["regime"])
    if "p" in merged:
        kw["p"] = _number("p", merged["p"])
    if "deltas" in merged:
        kw["deltas"] = tuple(_integer("deltas", d) for d in _number_list("deltas", merged["deltas"]))
    if merged.get("T") is not None:
        kw["T"] = tuple(_number("T", t) for t in _number_list("T", merged["T"]))
    if merged.get("T_rule") is not None:
        kw["T_rule"] = str(merged["T_rule"])
    for key in ("separation", "c"):
        if key in merged:
            kw[key] = _number(key, merged[key])
    for key in ("resolution", "seed", "max_resolution"):
        if key in merged:
            kw[key] = _integer(key, merged[key])
    for key in ("profile", "axis"):
        if key in merged:
            kw[key] = str(merged[key])
    if "override" in merged:
        kw["override"] = bool(merged["override"])

    fmt = str(merged.get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise ConfigError(f"key 'format': must be 'csv' or 'json', got {fmt!r}")
    try:
        probe = ProbeConfig(**kw)
    except WaveguideLabError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return LoadedConfig(probe, str(merged.get("output", "-")), fmt)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def _json_encode(obj) -> str:
    # json.dumps has no hook for float formatting, so emit by hand
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_json_encode(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _row_dict(r: ProbeRow) -> dict:
    return {"delta": r.delta, "T": r.T, "p": r.p, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio, "resolution": r.resolution}


def report_to_dict(report: ProbeReport) -> dict:
    rows = sorted(report.rows, key=lambda r: (r.delta, r.T))
    return {
        "regime": report.regime,
        "rows": [_row_dict(r) for r in rows],
        "fitted": None if report.fitted is None else {f.name: getattr(report.fitted, f.name) for f in fields(FitResult)},
        "metadata": report.metadata,
        "failures": [{f.name: getattr(x, f.name) for f in fields(RowFailure)} for x in report.failures],
    }


def report_from_dict(data: dict) -> ProbeReport:
    rows = [ProbeRow(int(r["delta"]), r["T"], r["p"], r["lhs"], r["rhs"], r["ratio"], int(r.get("resolution", 0))) for r in data["rows"]]
    fitted = None if data.get("fitted") is None else FitResult(**data["fitted"])
    failures = [RowFailure(**x) for x in data.get("failures", [])]
    return ProbeReport(data["regime"], rows, fitted, dict(data.get("metadata", {})), failures)


def render_csv(report: ProbeReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(report.rows, key=lambda r: (r.delta, r.T)):
        writer.writerow([str(int(r.delta))] + [format_float(getattr(r, k)) for k in CSV_COLUMNS[1:]])
    return buf.getvalue()


def render_json(report: ProbeReport) -> str:
    return _json_encode(report_to_dict(report)) + "\n"


def _write_text(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from None


def emit_report(report: ProbeReport, format: str = "csv", path: str = "-") -> None:
    """Write ``report`` as CSV or JSON to ``path`` (``-`` for standard output)."""
    if format == "csv":
        text = render_csv(report)
    elif format == "json":
        text = render_json(report)
    else:
        raise ConfigError(f"key 'format': must be 'csv' or 'json', got {format!r}")
    _write_text(text, path)


def read_report_json(path: str) -> ProbeReport:
    try:
        with open(path, encoding="utf-8") as fh:
            return report_from_dict(json.load(fh))
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from None


def read_csv_rows(path: str) -> list[ProbeRow]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ConfigError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
            return [
                ProbeRow(int(r["delta"]), float(r["T"]), float(r["p"]), float(r["lhs"]), float(r["rhs"]), float(r["ratio"]))
                for r in reader
            ]
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_output(p: argparse.ArgumentParser, formats: bool = True) -> None:
    p.add_argument("--output", "-o", help="output path ('-' for stdout)")
    if formats:
        p.add_argument("--format", choices=("csv", "json"))


def _add_probe_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--p", help="exponent p, e.g. 12/7")
    p.add_argument("--separation", type=float, help="transversality multiple of delta")
    p.add_argument("--resolution", type=int, help="starting nodes per unit frequency")
    p.add_argument("--profile", help="data profile: smooth, indicator, random, ...")
    p.add_argument("--seed", type=int)
    p.add_argument("--axis", choices=("xi", "mode"), help="direction separating the two cubes")
    p.add_argument("--override", action="store_true", default=None, help="lift the regime guards (recorded)")
    p.add_argument("--jobs", type=int, help="worker processes (default from WAVEGUIDE_LAB_JOBS)")
    p.add_argument("--keep-going", action="store_true", help="exit 0 even if some rows failed")
    p.add_argument("--timestamp", action="store_true", help="record the run time in the metadata")
    _add_output(p)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; here 2 means non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waveguide-lab", description="Bilinear estimate laboratory on R x T.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", help="one ratio at a single (delta, T)")
    p.add_argument("--regime", choices=("theorem", "appendixA", "counterexample"))
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--T", dest="T", required=True)
    p.add_argument("--c", type=float)
    _add_probe_options(p)

    p = sub.add_parser("sweep", help="theorem or appendixA sweep over delta")
    p.add_argument("--regime", choices=("theorem", "appendixA"))
    p.add_argument("--deltas", help="comma separated, e.g. 4,8,16,32")
    p.add_argument("--T", dest="T", help="fixed times, comma separated")
    p.add_argument("--T-rule", dest="T_rule", help="'theorem', 'appendixA', 'degraded' or 'C*delta^k'")
    _add_probe_options(p)

    p = sub.add_parser("counterexample", help="indicator counterexample sweep over T")
    p.add_argument("--deltas", help="comma separated (default 8)")
    p.add_argument("--T", dest="T", help="comma separated (default 1,4,16,64)")
    p.add_argument("--c", type=float)
    _add_probe_options(p)

    p = sub.add_parser("expsum", help="exponential-sum suites")
    p.add_argument("--suite", choices=("lemma1", "lemma2", "poisson", "remark", "all"), default="all")
    _add_output(p, formats=False)

    p = sub.add_parser("xnorm", help="X^{p,q} norm of a cube sample")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--delta", type=int, default=4)
    p.add_argument("--profile", default="indicator")
    p.add_argument("--resolution", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", default="12/7")
    p.add_argument("--q", default="4")
    p.add_argument("--max-scale", type=int)
    _add_output(p, formats=False)

    p = sub.add_parser("report", help="re-fit a power law on an existing CSV")
    p.add_argument("csv")
    p.add_argument("--x", default="delta")
    p.add_argument("--y", default="ratio")
    _add_output(p, formats=False)
    return parser


def _flags(args: argparse.Namespace) -> dict:
    keys = ("regime", "p", "deltas", "T", "T_rule", "separation", "resolution", "profile", "c", "seed",
            "output", "format", "axis", "override")
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


_COMMAND_DEFAULTS = {
    "probe": {"regime": "theorem"},
    "sweep": {"regime": "theorem", "deltas": [4, 8, 16, 32]},
    "counterexample": {"regime": "counterexample", "deltas": [8], "T": [1, 4, 16, 64], "profile": "indicator"},
}


def _exit_for_failures(report: ProbeReport, keep_going: bool) -> int:
    if not report.failures or keep_going:
        return EXIT_OK
    for f in report.failures:
        log.error("row delta=%s T=%s failed: %s: %s", f.delta, f.T, f.kind, f.message)
    if any(f.kind in _CONVERGENCE_KINDS for f in report.failures):
        return EXIT_CONVERGENCE
    return EXIT_VALIDATION


def _run_probe_like(args: argparse.Namespace) -> int:
    defaults = dict(_COMMAND_DEFAULTS[args.command])
    flags = _flags(args)
    if args.command == "probe":
        flags["deltas"] = [args.delta]
    if args.command == "counterexample":
        flags["regime"] = "counterexample"
    loaded = parse_config(args.config, flags, defaults)
    config = loaded.probe
    if args.command == "probe":
        config = replace(config, fit=False)
    print("config: " + _json_encode(config.as_dict()), file=sys.stderr)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if args.timestamp else None
    report = run_sweep(config, jobs=args.jobs, timestamp=stamp)
    emit_report(report, loaded.format, loaded.output)
    return _exit_for_failures(report, args.keep_going)


def _run_expsum(args: argparse.Namespace) -> int:
    suites = {
        "lemma1": _expsum.lemma1_suite,
        "lemma2": _expsum.lemma2_suite,
        "poisson": _expsum.poisson_suite,
        "remark": _expsum.remark_suite,
    }
    chosen = list(suites) if args.suite == "all" else [args.suite]
    result = {name: suites[name]() for name in chosen}
    _write_text(_json_encode(result) + "\n", args.output or "-")
    return EXIT_OK


def _run_xnorm(args: argparse.Namespace) -> int:
    p = _number("p", args.p)
    q = _number("q", args.q)
    theta = make_cube(args.m, args.n, args.delta)
    F = sample_on_cube(theta, args.profile, args.resolution, seed=args.seed)
    terms = xpq_terms(F, p, q, args.max_scale)
    per_scale = {str(d): math.fsum(t.term for t in ts) for d, ts in terms.items()}
    result = {"p": p, "q": q, "cube": [args.m, args.n, args.delta], "norm": xpq_norm(F, p, q, args.max_scale),
              "per_scale": per_scale}
    _write_text(_json_encode(result) + "\n", args.output or "-")
    return EXIT_OK


def _run_report(args: argparse.Namespace) -> int:
    rows = read_csv_rows(args.csv)
    fit = fit_exponent(rows, args.x, args.y)
    result = {"x_field": args.x, "y_field": args.y, "exponent": fit.exponent, "constant": fit.constant,
              "residual": fit.max_residual, "rows": len(rows)}
    _write_text(_json_encode(result) + "\n", args.output or "-")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "probe": _run_probe_like,
        "sweep": _run_probe_like,
        "counterexample": _run_probe_like,
        "expsum": _run_expsum,
        "xnorm": _run_xnorm,
        "report": _run_report,
    }
    try:
        return handlers[args.command](args)
    except (ReportIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (WaveguideLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
