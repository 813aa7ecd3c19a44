"""Command-line surface for planning and assessing repeatability studies.

Subcommands::

    samplesize-spec   subjects needed for an effective-specificity floor
    samplesize-sens   subjects needed for an effective-sensitivity floor
    retro             retrospective assessment of an existing design
    estimate          within-subject SD / repeatability coefficient from CSV
    tables            regenerate the sample-size reference grids (m=2..5)
    figure-data       plot-ready CSV point sets for the standard figures
    simulate          Monte Carlo cross-check of the analytic values

Every subcommand reports through a self-describing envelope (inputs echoed,
each numeric result labeled exact/asymptotic/monte-carlo, warnings
collected, tool version pinned) rendered as a human table, JSON (floats at
10 significant digits), or CSV rows.

Exit codes: 0 success, 2 infeasible design, 64 usage error, 65 data error,
73 output I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import DataValidationError, DomainError, InfeasibleError
from .core import (
    TestRetestData,
    design_degrees_of_freedom,
    estimate_wsd,
    ratio_density_exact,
)
from .specificity import (
    MethodChoice,
    SpecificityQuery,
    effective_specificity_given_ratio,
    effective_specificity_pdf,
    expected_effective_specificity,
    sample_size_specificity,
    specificity_confidence,
    specificity_lower_bound,
)
from .sensitivity import (
    EffectSize,
    SensitivityApproximation,
    SensitivityQuery,
    effective_sensitivity_given_ratio,
    expected_effective_sensitivity,
    sample_size_sensitivity,
    sensitivity,
    sensitivity_lower_bound,
)
from .mc import (
    SimulationConfig,
    simulate_effective_sensitivity,
    simulate_effective_specificity,
    simulate_longitudinal_decisions,
)

__all__ = ["main", "build_parser", "MeasurementRecord", "ReportEnvelope"]

# Default parameter grids of the published sample-size reference tables.
TABLE_M_VALUES = (2, 3, 4, 5)
TABLE_CONF_VALUES = (0.800, 0.900, 0.925, 0.950, 0.975, 0.990)
TABLE_LB_VALUES = (0.700, 0.800, 0.900, 0.925, 0.950, 0.975)
TABLE_PSP_VALUES = (0.800, 0.900, 0.925, 0.950, 0.975, 0.990)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_CANTCREAT = 73


class UsageError(Exception):
    """Malformed flags or flag combinations; maps to exit code 64."""


@dataclass(frozen=True)
class MeasurementRecord:
    """One CSV row of test-retest input data."""

    subject_id: str
    replicate_index: int
    value: float


def _round10(x: float) -> float:
    # canonical 10-significant-digit float for machine-readable output
    return float(f"{x:.10g}")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{_round10(x):.10g}"
    return str(x)


@dataclass
class ReportEnvelope:
    """Self-describing result container shared by all subcommands."""

    command: str
    inputs: dict
    method: tuple[str, ...]
    results: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    tool_version: str = __version__

    def add(self, name: str, value, method: str, units: str):
        self.results.append(
            {"name": name, "value": value, "method": method, "units": units})

    def extend_warnings(self, caught):
        self.warnings.extend(str(w.message) for w in caught)

    def to_payload(self) -> dict:
        def clean(v):
            if isinstance(v, bool):
                return v
            if isinstance(v, float):
                return _round10(v)
            if isinstance(v, (list, tuple)):
                return [clean(item) for item in v]
            if isinstance(v, dict):
                return {k: clean(item) for k, item in v.items()}
            return v

        return {
            "command": self.command,
            "inputs": clean(self.inputs),
            "method": list(self.method),
            "results": clean(self.results),
            "warnings": list(self.warnings),
            "tool_version": self.tool_version,
        }

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(self.to_payload(), indent=2) + "\n"
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["name", "value", "method", "units"])
            for r in self.results:
                writer.writerow([r["name"], _fmt(r["value"]), r["method"], r["units"]])
            return buf.getvalue()
        lines = [f"repeatkit {self.command} (v{self.tool_version})", "inputs:"]
        for k, v in self.inputs.items():
            lines.append(f"  {k} = {_fmt(v)}")
        lines.append("results:")
        name_w = max((len(r["name"]) for r in self.results), default=0)
        for r in self.results:
            v = r["value"]
            if r["units"] == "probability" and isinstance(v, float):
                shown = f"{v * 100:.2f}%"
            else:
                shown = _fmt(v)
            lines.append(f"  {r['name']:<{name_w}}  {shown:>14}  [{r['method']}] {r['units']}")
        if self.warnings:
            lines.append("warnings:")
            lines.extend(f"  - {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# flag plumbing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through UsageError for exit 64
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _add_format_flag(sub):
    sub.add_argument("--format", choices=("table", "json", "csv"), default="table",
                     help="output rendering (default: table)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repeatkit",
                     description="Plan and assess test-retest repeatability studies.")
    parser.add_argument("--version", action="version", version=f"repeatkit {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("samplesize-spec", parents=[], add_help=True,
                        help="sample size for an effective-specificity floor")
    p.add_argument("--m", type=int, default=2, help="replicates per subject (default 2)")
    p.add_argument("--psp", type=float, default=0.95, help="target specificity (default 0.95)")
    p.add_argument("--esp-lb", type=float, required=True,
                   help="floor on the effective specificity")
    p.add_argument("--conf", type=float, default=0.95, help="confidence level (default 0.95)")
    _add_format_flag(p)
    p.set_defaults(func=cmd_samplesize_spec)

    p = subs.add_parser("samplesize-sens",
                        help="sample size for an effective-sensitivity floor")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--psp", type=float, default=0.95)
    p.add_argument("--delta", type=float, default=None,
                   help="noise-standardized effect size")
    p.add_argument("--mu-delta", type=float, default=None,
                   help="raw change in biomarker units (needs --wsd)")
    p.add_argument("--wsd", type=float, default=None,
                   help="within-subject SD for standardizing --mu-delta")
    p.add_argument("--ese-lb", type=float, required=True,
                   help="floor on the effective sensitivity")
    p.add_argument("--conf", type=float, default=0.95)
    _add_format_flag(p)
    p.set_defaults(func=cmd_samplesize_sens)

    p = subs.add_parser("retro", help="retrospective assessment of a design")
    p.add_argument("--n", type=int, default=None, help="number of subjects")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--nu", type=int, default=None,
                   help="pooled degrees of freedom (alternative to --n/--m)")
    p.add_argument("--psp", type=float, default=0.95)
    p.add_argument("--conf", type=float, default=0.95)
    p.add_argument("--bound", type=_float_list, default=(),
                   help="comma-separated floors b for P[effective specificity < b]")
    p.add_argument("--delta", type=_float_list, default=(),
                   help="comma-separated effect sizes for sensitivity summaries")
    _add_format_flag(p)
    p.set_defaults(func=cmd_retro)

    p = subs.add_parser("estimate", help="estimate the within-subject SD from CSV data")
    p.add_argument("--csv", required=True,
                   help="CSV path with header subject_id,replicate_index,value ('-' = stdin)")
    p.add_argument("--psp", type=float, default=0.95)
    _add_format_flag(p)
    p.set_defaults(func=cmd_estimate)

    p = subs.add_parser("tables", help="regenerate the sample-size reference grids")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--m-list", type=_int_list, default=TABLE_M_VALUES)
    p.add_argument("--conf-list", type=_float_list, default=TABLE_CONF_VALUES)
    p.add_argument("--esp-lb-list", type=_float_list, default=TABLE_LB_VALUES)
    p.add_argument("--psp-list", type=_float_list, default=TABLE_PSP_VALUES)
    _add_format_flag(p)
    p.set_defaults(func=cmd_tables)

    p = subs.add_parser("figure-data", help="emit plot-ready CSV point sets")
    p.add_argument("--figure", required=True,
                   help="figure id: one of 1, 2, 3a, 4a, 4b")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--psp", type=float, default=0.95)
    p.add_argument("--conf", type=float, default=0.95)
    p.add_argument("--delta", type=float, default=4.0)
    p.add_argument("--n", type=int, default=None,
                   help="design size override for the ratio-density figures")
    _add_format_flag(p)
    p.set_defaults(func=cmd_figure_data)

    p = subs.add_parser("simulate", help="Monte Carlo cross-check of analytic values")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--psp", type=float, default=0.95)
    p.add_argument("--wsd", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--longitudinal", action="store_true",
                   help="also run the end-to-end decision simulation")
    _add_format_flag(p)
    p.set_defaults(func=cmd_simulate)

    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_samplesize_spec(args) -> ReportEnvelope:
    env = ReportEnvelope(
        command="samplesize-spec",
        inputs={"m": args.m, "psp": args.psp, "esp_lb": args.esp_lb, "conf": args.conf},
        method=("exact", "asymptotic"))
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        asym = sample_size_specificity(args.m, args.psp, args.esp_lb, args.conf,
                                       MethodChoice.ASYMPTOTIC)
        exact = sample_size_specificity(args.m, args.psp, args.esp_lb, args.conf,
                                        MethodChoice.EXACT)
        expected = expected_effective_specificity(
            design_degrees_of_freedom(exact.n, args.m), args.psp, MethodChoice.EXACT)
    env.extend_warnings(caught)
    env.add("sample_size_raw", asym.raw, "asymptotic", "subjects")
    env.add("sample_size", asym.n, "asymptotic", "subjects")
    env.add("sample_size", exact.n, "exact", "subjects")
    env.add("expected_effective_specificity_at_exact_n", expected, "exact", "probability")
    return env


def _resolve_effect(args) -> EffectSize:
    if args.delta is not None:
        if args.mu_delta is not None or args.wsd is not None:
            raise UsageError("--delta and --mu-delta/--wsd are mutually exclusive")
        return EffectSize(args.delta)
    if args.mu_delta is None or args.wsd is None:
        raise UsageError("provide --delta, or both --mu-delta and --wsd")
    return EffectSize.from_change(args.mu_delta, args.wsd)


def cmd_samplesize_sens(args) -> ReportEnvelope:
    eff = _resolve_effect(args)
    env = ReportEnvelope(
        command="samplesize-sens",
        inputs={"m": args.m, "psp": args.psp, "delta": eff.signed,
                "ese_lb": args.ese_lb, "conf": args.conf},
        method=("exact", "asymptotic"))
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        asym = sample_size_sensitivity(args.m, eff, args.psp, args.ese_lb, args.conf,
                                       MethodChoice.ASYMPTOTIC)
        exact = sample_size_sensitivity(args.m, eff, args.psp, args.ese_lb, args.conf,
                                        MethodChoice.EXACT)
        nu_at_asym = design_degrees_of_freedom(asym.n, args.m)
        induced_exact = specificity_lower_bound(nu_at_asym, args.psp, args.conf,
                                                MethodChoice.EXACT)
        induced_asym = specificity_lower_bound(nu_at_asym, args.psp, args.conf,
                                               MethodChoice.ASYMPTOTIC)
    env.extend_warnings(caught)
    env.add("sample_size_raw", asym.raw, "asymptotic", "subjects")
    env.add("sample_size", asym.n, "asymptotic", "subjects")
    env.add("sample_size", exact.n, "exact", "subjects")
    env.add("induced_bound_evaluated_at_n", asym.n, "exact", "subjects")
    env.add("induced_specificity_lower_bound", induced_exact, "exact", "probability")
    env.add("induced_specificity_lower_bound", induced_asym, "asymptotic", "probability")
    return env


def _resolve_nu(args) -> int:
    if args.nu is not None:
        if args.n is not None:
            raise UsageError("--nu and --n are mutually exclusive")
        if args.nu < 1:
            raise UsageError(f"--nu must be >= 1, got {args.nu}")
        return args.nu
    if args.n is None:
        raise UsageError("provide --n (with --m) or --nu")
    try:
        return design_degrees_of_freedom(args.n, args.m)
    except DomainError as e:
        raise UsageError(str(e)) from None


def cmd_retro(args) -> ReportEnvelope:
    nu = _resolve_nu(args)
    env = ReportEnvelope(
        command="retro",
        inputs={"n": args.n, "m": args.m, "nu": nu, "psp": args.psp,
                "conf": args.conf, "bound": list(args.bound),
                "delta": list(args.delta)},
        method=("exact", "asymptotic"))
    env.add("expected_effective_specificity",
            expected_effective_specificity(nu, args.psp, MethodChoice.EXACT),
            "exact", "probability")
    env.add("expected_effective_specificity",
            expected_effective_specificity(nu, args.psp, MethodChoice.ASYMPTOTIC),
            "asymptotic", "probability")
    env.add("specificity_lower_bound",
            specificity_lower_bound(nu, args.psp, args.conf, MethodChoice.EXACT),
            "exact", "probability")
    env.add("specificity_lower_bound",
            specificity_lower_bound(nu, args.psp, args.conf, MethodChoice.ASYMPTOTIC),
            "asymptotic", "probability")
    for b in args.bound:
        q = SpecificityQuery(p_sp=args.psp, p_esp_lb=b, p_conf=args.conf, nu=nu)
        env.add(f"prob_effective_specificity_below[{b:g}]",
                1.0 - specificity_confidence(q, MethodChoice.EXACT),
                "exact", "probability")
        env.add(f"prob_effective_specificity_below[{b:g}]",
                1.0 - specificity_confidence(q, MethodChoice.ASYMPTOTIC),
                "asymptotic", "probability")
    for d in args.delta:
        eff = EffectSize(d)
        env.add(f"sensitivity[delta={d:g}]", sensitivity(eff, args.psp),
                "exact", "probability")
        env.add(f"expected_effective_sensitivity[delta={d:g}]",
                expected_effective_sensitivity(nu, eff, args.psp, MethodChoice.EXACT),
                "exact", "probability")
        env.add(f"sensitivity_lower_bound[delta={d:g}]",
                sensitivity_lower_bound(nu, eff, args.psp, args.conf, MethodChoice.EXACT),
                "exact", "probability")
    return env


def _read_measurements(stream, source: str) -> list[MeasurementRecord]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataValidationError(f"{source}: empty file") from None
    expected = ["subject_id", "replicate_index", "value"]
    if [h.strip() for h in header] != expected:
        raise DataValidationError(
            f"{source}: header must be {','.join(expected)!r}, got {','.join(header)!r}")
    records = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise DataValidationError(f"{source}:{lineno}: expected 3 columns, got {len(row)}")
        sid = row[0].strip()
        if not sid:
            raise DataValidationError(f"{source}:{lineno}: empty subject_id")
        try:
            idx = int(row[1])
        except ValueError:
            raise DataValidationError(
                f"{source}:{lineno}: replicate_index {row[1]!r} is not an integer") from None
        if idx < 1:
            raise DataValidationError(f"{source}:{lineno}: replicate_index must be >= 1")
        try:
            value = float(row[2])
        except ValueError:
            raise DataValidationError(
                f"{source}:{lineno}: value {row[2]!r} is not numeric") from None
        if not math.isfinite(value):
            raise DataValidationError(f"{source}:{lineno}: value {row[2]!r} is not finite")
        if (sid, idx) in seen:
            raise DataValidationError(
                f"{source}:{lineno}: duplicate (subject_id, replicate_index) = ({sid}, {idx})")
        seen.add((sid, idx))
        records.append(MeasurementRecord(sid, idx, value))
    if not records:
        raise DataValidationError(f"{source}: no data rows")
    return records


def _records_to_data(records: list[MeasurementRecord]) -> TestRetestData:
    by_subject: dict[str, dict[int, float]] = {}
    for rec in records:
        by_subject.setdefault(rec.subject_id, {})[rec.replicate_index] = rec.value
    subjects = tuple(
        (sid, tuple(v for _, v in sorted(reps.items())))
        for sid, reps in by_subject.items())
    return TestRetestData(subjects)


def cmd_estimate(args) -> ReportEnvelope:
    source = args.csv
    if source == "-":
        records = _read_measurements(sys.stdin, "<stdin>")
    else:
        try:
            with open(source, newline="", encoding="utf-8") as fh:
                records = _read_measurements(fh, source)
        except OSError as e:
            raise DataValidationError(f"cannot read {source}: {e}") from None
    data = _records_to_data(records)
    env = ReportEnvelope(
        command="estimate",
        inputs={"csv": source, "psp": args.psp,
                "subjects": len(data.subjects),
                "measurements": sum(len(v) for _, v in data.subjects)},
        method=("exact",))
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        est = estimate_wsd(data)
        rc = est.repeatability_coefficient(args.psp)
        bounds = {conf: specificity_lower_bound(est.nu, args.psp, conf, MethodChoice.EXACT)
                  for conf in (0.80, 0.90, 0.95)}
    env.extend_warnings(caught)
    env.add("wsd_hat", est.wsd_hat, "exact", "biomarker units")
    env.add("degrees_of_freedom", est.nu, "exact", "count")
    env.add(f"repeatability_coefficient[psp={args.psp:g}]", rc.value,
            "exact", "biomarker units")
    for conf, lb in bounds.items():
        env.add(f"specificity_lower_bound[conf={conf:g}]", lb, "exact", "probability")
    return env


# ---------------------------------------------------------------------------
# file emitters
# ---------------------------------------------------------------------------

def _sample_size_cell(m: int, p_sp: float, lb: float, conf: float) -> int | None:
    if lb >= p_sp:
        return None
    return sample_size_specificity(m, p_sp, lb, conf, MethodChoice.EXACT).n


def _table_grid(m, conf_values, lb_values, psp_values):
    rows = []
    for conf in conf_values:
        for lb in lb_values:
            cells = [_sample_size_cell(m, psp, lb, conf) for psp in psp_values]
            rows.append((conf, lb, cells))
    return rows


def _write_table_csv(path, m, psp_values, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["m", "p_conf", "p_esp_lb"]
                        + [f"psp_{psp:.3f}" for psp in psp_values])
        for conf, lb, cells in rows:
            writer.writerow([m, f"{conf:.3f}", f"{lb:.3f}"]
                            + ["" if c is None else str(c) for c in cells])


def _write_table_markdown(path, m, psp_values, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# Exact sample sizes, m = {m}\n\n")
        fh.write("Subjects needed so the effective specificity stays above the floor\n"
                 "(row) with the row's confidence, per target specificity (column).\n"
                 "Blank cells are infeasible (floor at or above target).\n\n")
        header = ["p_conf", "p_esp_lb"] + [f"{psp:.3f}" for psp in psp_values]
        fh.write("| " + " | ".join(header) + " |\n")
        fh.write("|" + "---|" * len(header) + "\n")
        for conf, lb, cells in rows:
            cols = [f"{conf:.3f}", f"{lb:.3f}"] + \
                ["" if c is None else str(c) for c in cells]
            fh.write("| " + " | ".join(cols) + " |\n")


def cmd_tables(args) -> ReportEnvelope:
    os.makedirs(args.out, exist_ok=True)
    env = ReportEnvelope(
        command="tables",
        inputs={"out": args.out, "m_list": list(args.m_list),
                "conf_list": list(args.conf_list),
                "esp_lb_list": list(args.esp_lb_list),
                "psp_list": list(args.psp_list)},
        method=("exact",))
    written = []
    for m in args.m_list:
        rows = _table_grid(m, args.conf_list, args.esp_lb_list, args.psp_list)
        csv_path = os.path.join(args.out, f"samplesize_spec_m{m}.csv")
        md_path = os.path.join(args.out, f"samplesize_spec_m{m}.md")
        _write_table_csv(csv_path, m, args.psp_list, rows)
        _write_table_markdown(md_path, m, args.psp_list, rows)
        written.extend([csv_path, md_path])
        populated = sum(1 for _, _, cells in rows for c in cells if c is not None)
        env.add(f"populated_cells[m={m}]", populated, "exact", "count")
    for path in written:
        env.add("file", path, "exact", "path")
    return env


def _write_points_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _figure_1a_rows(psp):
    rows = []
    for n in range(4, 101):
        nu = design_degrees_of_freedom(n, 2)
        rows.append((n, 2, nu,
                     expected_effective_specificity(nu, psp, MethodChoice.EXACT),
                     expected_effective_specificity(nu, psp, MethodChoice.ASYMPTOTIC)))
    return rows


def _figure_1b_rows(psp):
    grid = np.concatenate([
        np.linspace(0.001, 0.999, 1499),
        1.0 - np.geomspace(1e-3, 1e-7, 41)[1:],
    ])
    rows = []
    for n in (10, 30, 60):
        nu = design_degrees_of_freedom(n, 2)
        for p in grid:
            rows.append((n, float(p), effective_specificity_pdf(float(p), nu, psp)))
    return rows


def _figure_2_rows(psp):
    return [(d / 20.0, sensitivity(d / 20.0, psp)) for d in range(0, 201)]


def _figure_3a_rows(psp, conf):
    rows = []
    for m in (2, 3, 4, 5):
        for n in range(4, 101):
            nu = design_degrees_of_freedom(n, m)
            rows.append((n, m, nu,
                         specificity_lower_bound(nu, psp, conf, MethodChoice.EXACT)))
    return rows


def _figure_ratio_rows(nu, value_fn):
    rows = []
    for i in range(0, 1001):
        w = 0.5 + i / 1000.0
        rows.append((w, ratio_density_exact(w, nu), value_fn(w)))
    return rows


def cmd_figure_data(args) -> ReportEnvelope:
    figure = args.figure.lower()
    known = {"1", "2", "3a", "4a", "4b"}
    if figure not in known:
        raise UsageError(f"unknown figure id {args.figure!r}; choose from {sorted(known)}")
    os.makedirs(args.out, exist_ok=True)
    env = ReportEnvelope(
        command="figure-data",
        inputs={"figure": figure, "out": args.out, "psp": args.psp,
                "conf": args.conf, "delta": args.delta, "n": args.n},
        method=("exact", "asymptotic") if figure == "1" else ("exact",))
    written = []
    if figure == "1":
        path = os.path.join(args.out, "fig1a_expected_specificity.csv")
        _write_points_csv(path, ["n", "m", "nu", "expected_specificity_exact",
                                 "expected_specificity_asymptotic"],
                          _figure_1a_rows(args.psp))
        written.append(path)
        path = os.path.join(args.out, "fig1b_effective_specificity_density.csv")
        _write_points_csv(path, ["n", "p", "density"], _figure_1b_rows(args.psp))
        written.append(path)
    elif figure == "2":
        path = os.path.join(args.out, "fig2_sensitivity_vs_delta.csv")
        _write_points_csv(path, ["delta", "sensitivity"], _figure_2_rows(args.psp))
        written.append(path)
    elif figure == "3a":
        path = os.path.join(args.out, "fig3a_specificity_lower_bound.csv")
        _write_points_csv(path, ["n", "m", "nu", "specificity_lower_bound"],
                          _figure_3a_rows(args.psp, args.conf))
        written.append(path)
    elif figure == "4a":
        n = args.n if args.n is not None else 53
        nu = design_degrees_of_freedom(n, 2)
        path = os.path.join(args.out, "fig4a_ratio_density_specificity.csv")
        _write_points_csv(path, ["w", "ratio_density", "effective_specificity"],
                          _figure_ratio_rows(
                              nu, lambda w: effective_specificity_given_ratio(w, args.psp)))
        written.append(path)
    else:
        n = args.n if args.n is not None else 139
        nu = design_degrees_of_freedom(n, 2)
        path = os.path.join(args.out, "fig4b_ratio_density_sensitivity.csv")
        _write_points_csv(path, ["w", "ratio_density", "effective_sensitivity"],
                          _figure_ratio_rows(
                              nu, lambda w: effective_sensitivity_given_ratio(
                                  w, args.delta, args.psp,
                                  SensitivityApproximation.FULL_TWO_SIDED)))
        written.append(path)
    for path in written:
        env.add("file", path, "exact", "path")
    return env


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _add_distribution(env: ReportEnvelope, label: str, dist):
    env.add(f"{label}.mean", dist.mean, "monte-carlo", "probability")
    env.add(f"{label}.sd", dist.sd, "monte-carlo", "probability")
    env.add(f"{label}.mc_se_of_mean", dist.mc_standard_error_of_mean,
            "monte-carlo", "probability")
    for q, x in dist.quantiles:
        env.add(f"{label}.quantile[{q:g}]", x, "monte-carlo", "probability")


def _add_agreement(env: ReportEnvelope, name: str, analytic: float,
                   empirical: float, se: float):
    inside = abs(analytic - empirical) <= 3.0 * se
    env.add(f"{name}.analytic", analytic, "exact", "probability")
    env.add(f"{name}.empirical", empirical, "monte-carlo", "probability")
    env.add(f"{name}.mc_se", se, "monte-carlo", "probability")
    env.add(f"{name}.agreement", "inside" if inside else "outside",
            "monte-carlo", "+-3 MC-SE band")


def cmd_simulate(args) -> ReportEnvelope:
    if args.replicates <= 0:
        raise UsageError(f"--replicates must be positive, got {args.replicates}")
    if args.n is not None and args.n < 1:
        raise UsageError(f"--n must be positive, got {args.n}")
    try:
        cfg = SimulationConfig(n=args.n, m=args.m, w_sd=args.wsd, p_sp=args.psp,
                               delta=args.delta if args.delta is not None else 0.0,
                               replicates=args.replicates, seed=args.seed)
    except DomainError as e:
        raise UsageError(str(e)) from None
    env = ReportEnvelope(
        command="simulate",
        inputs={"n": cfg.n, "m": cfg.m, "wsd": cfg.w_sd, "psp": cfg.p_sp,
                "delta": args.delta, "replicates": cfg.replicates,
                "seed": cfg.seed, "longitudinal": bool(args.longitudinal)},
        method=("exact", "monte-carlo"))
    nu = cfg.nu

    spec_dist = simulate_effective_specificity(cfg)
    _add_distribution(env, "effective_specificity", spec_dist)
    _add_agreement(env, "expected_effective_specificity",
                   expected_effective_specificity(nu, cfg.p_sp, MethodChoice.EXACT),
                   spec_dist.mean, spec_dist.mc_standard_error_of_mean)
    q_lb = 1.0 - 0.95
    _add_agreement(env, "specificity_lower_bound[conf=0.95]",
                   specificity_lower_bound(nu, cfg.p_sp, 0.95, MethodChoice.EXACT),
                   spec_dist.quantile(q_lb),
                   spec_dist.quantile_standard_error(q_lb))

    if args.delta is not None:
        sens_dist = simulate_effective_sensitivity(cfg)
        _add_distribution(env, "effective_sensitivity", sens_dist)
        _add_agreement(env, "expected_effective_sensitivity",
                       expected_effective_sensitivity(nu, cfg.delta, cfg.p_sp,
                                                      MethodChoice.EXACT),
                       sens_dist.mean, sens_dist.mc_standard_error_of_mean)
        _add_agreement(env, "sensitivity_lower_bound[conf=0.95]",
                       sensitivity_lower_bound(nu, cfg.delta, cfg.p_sp, 0.95,
                                               MethodChoice.EXACT,
                                               SensitivityApproximation.FULL_TWO_SIDED),
                       sens_dist.quantile(q_lb),
                       sens_dist.quantile_standard_error(q_lb))

    if args.longitudinal:
        emp_spec, emp_sens = simulate_longitudinal_decisions(cfg)
        se_spec = math.sqrt(max(emp_spec * (1.0 - emp_spec), 1e-12) / cfg.replicates)
        _add_agreement(env, "longitudinal_specificity",
                       expected_effective_specificity(nu, cfg.p_sp, MethodChoice.EXACT),
                       emp_spec, se_spec)
        if args.delta is not None:
            se_sens = math.sqrt(max(emp_sens * (1.0 - emp_sens), 1e-12) / cfg.replicates)
            _add_agreement(env, "longitudinal_sensitivity",
                           expected_effective_sensitivity(nu, cfg.delta, cfg.p_sp,
                                                          MethodChoice.EXACT),
                           emp_sens, se_sens)
    return env


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        envelope = args.func(args)
    except UsageError as e:
        print(f"repeatkit: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as e:
        print(f"repeatkit: infeasible design: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DataValidationError as e:
        print(f"repeatkit: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as e:
        print(f"repeatkit: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"repeatkit: cannot write output: {e}", file=sys.stderr)
        return EXIT_CANTCREAT
    sys.stdout.write(envelope.render(args.format))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
