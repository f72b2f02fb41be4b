"""Command-line front end: certification sweeps, validation suites, benchmarks.

Exit codes: 0 success, 1 acceptance/validation failure, 2 usage error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import validation
from .model import chatter_matrices
from .oracle import stable_intervals
from .sweep import (
    CHATTER_CERTIFIED_INTERVALS,
    CHATTER_DELAY_INDEPENDENT_NOTE,
    CHATTER_EXACT_INTERVALS,
    CHATTER_LITERATURE_ROWS,
    DEFAULT_GRID,
    DEFAULT_ORDERS,
    CertificationReport,
    GridSpec,
    SweepConfig,
    run_sweep,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

CERTIFIED_TOL = 0.01  # endpoint tolerance against the published certified rows
ORACLE_TOL = 0.005  # endpoint tolerance against the published exact row


class ConfigError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: Optional[str]
    out_dir: Optional[str]
    seed: int

    def header(self) -> str:
        return f"pdecert {self.command} seed={self.seed}"

    def write(self, out_dir: str) -> None:
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def bundled_config(name: str = "chatter") -> str:
    """Filesystem path of a configuration shipped with the package."""
    return str(resources.files("pdecert").joinpath(f"configs/{name}.yaml"))


# --- configuration loading ---------------------------------------------------

_SCHEMA: Dict[str, object] = {
    "plant": {"A": None, "B": None},
    "uncertainty": {"kind": None},
    "grid": {"min": None, "max": None, "step": None},
    "orders": None,
    "eps": None,
    "refine": None,
    "oracle": None,
    "solver": {"tol": None, "max_iter": None},
}


def _check_fields(data: dict, schema: dict, path: str = "") -> None:
    for key, value in data.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"unknown field '{where}'")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"field '{where}' must be a table")
            _check_fields(value, sub, where)


def _square_matrix(data, where: str) -> np.ndarray:
    try:
        mat = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{where}' is not a numeric matrix: {exc}") from exc
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"field '{where}' must be a square matrix")
    return mat


def load_config(path: str) -> dict:
    """Parse and validate a sweep configuration file."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    _check_fields(data, _SCHEMA)
    if "plant" not in data:
        raise ConfigError("missing required table 'plant'")
    for key in ("A", "B"):
        if key not in data["plant"]:
            raise ConfigError(f"missing required field 'plant.{key}'")
    if "grid" not in data:
        raise ConfigError("missing required table 'grid'")
    for key in ("min", "max", "step"):
        if key not in data["grid"]:
            raise ConfigError(f"missing required field 'grid.{key}'")
    kind = data.get("uncertainty", {}).get("kind", "transport_delay")
    if kind != "transport_delay":
        raise ConfigError(
            f"unsupported uncertainty kind '{kind}'; only 'transport_delay' "
            "has a multiplier family"
        )
    return data


def _parse_grid_flag(text: str) -> GridSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid flag must be MIN:MAX:STEP, got '{text}'")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"grid flag must be numeric: {exc}") from exc
    return _grid_or_error(lo, hi, step, "grid flag")


def _grid_or_error(lo, hi, step, where: str) -> GridSpec:
    try:
        return GridSpec(float(lo), float(hi), float(step))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _sweep_config(data: dict, args) -> Tuple[SweepConfig, bool]:
    A = _square_matrix(data["plant"]["A"], "plant.A")
    B = _square_matrix(data["plant"]["B"], "plant.B")
    if A.shape != B.shape:
        raise ConfigError("plant.A and plant.B must have equal shapes")
    if args.grid is not None:
        grid = _parse_grid_flag(args.grid)
    else:
        g = data["grid"]
        grid = _grid_or_error(g["min"], g["max"], g["step"], "grid")
    orders = tuple(args.orders) if args.orders else tuple(data.get("orders", DEFAULT_ORDERS))
    if not orders or any((not isinstance(o, int)) or o < 0 for o in orders):
        raise ConfigError("orders must be nonnegative integers")
    eps = float(args.eps) if args.eps is not None else float(data.get("eps", 1e-6))
    if eps <= 0:
        raise ConfigError("eps must be positive")
    solver = data.get("solver", {})
    try:
        cfg = SweepConfig.from_delay_system(
            A,
            B,
            orders=orders,
            grid=grid,
            eps=eps,
            refine=bool(data.get("refine", True)),
            solver_tol=float(solver.get("tol", 1e-7)),
            solver_max_iter=int(solver.get("max_iter", 100)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with_oracle = bool(data.get("oracle", True)) and not args.no_oracle
    return cfg, with_oracle


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _emit_report(
    report: CertificationReport, manifest: RunManifest, with_oracle: bool
) -> None:
    out = manifest.out_dir
    os.makedirs(out, exist_ok=True)
    manifest.write(out)
    header = manifest.header()
    report.write_intervals_csv(os.path.join(out, "intervals.csv"), header)
    report.write_verdicts_csv(os.path.join(out, "verdicts.csv"), header)
    if with_oracle and report.oracle_intervals is not None:
        report.write_oracle_csv(os.path.join(out, "oracle_intervals.csv"), header)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(f"# {header}\n")
        fh.write(report.summary_text())


def cmd_certify(args) -> int:
    data = load_config(args.config)
    cfg, with_oracle = _sweep_config(data, args)
    report = run_sweep(cfg, with_oracle=with_oracle, jobs=args.jobs, progress=_progress)
    manifest = RunManifest("certify", args.config, args.out, args.seed)
    _emit_report(report, manifest, with_oracle)
    print(report.summary_text(), end="")
    if report.inconclusive_points():
        print(f"solver failures at {len(report.inconclusive_points())} grid points")
        return EXIT_SOLVER
    if with_oracle and not report.sound:
        print("soundness violation: certified points with unstable oracle spectrum")
        return EXIT_FAIL
    return EXIT_OK


def _format_intervals(intervals: Sequence[Tuple[float, float]]) -> str:
    if not intervals:
        return "-"
    return " ".join(f"[{lo:.3f}, {hi:.3f}]" for lo, hi in intervals)


def _interval_mismatches(
    computed: Sequence[Tuple[float, float]],
    reference: Sequence[Tuple[float, float]],
    tol: float,
    label: str,
) -> List[str]:
    problems = []
    if len(computed) != len(reference):
        problems.append(
            f"{label}: found {len(computed)} intervals, reference has {len(reference)}"
        )
        return problems
    for (clo, chi), (rlo, rhi) in zip(computed, reference):
        if abs(clo - rlo) > tol or abs(chi - rhi) > tol:
            problems.append(
                f"{label}: [{clo:.3f}, {chi:.3f}] vs reference [{rlo:.3f}, {rhi:.3f}]"
                f" beyond tolerance {tol}"
            )
    return problems


def compare_to_reference(
    report: CertificationReport, with_oracle: bool
) -> List[str]:
    """Deviations of a chatter-benchmark report from the published values."""
    problems: List[str] = []
    if with_oracle and report.oracle_intervals is not None:
        problems += _interval_mismatches(
            report.oracle_intervals, CHATTER_EXACT_INTERVALS, ORACLE_TOL, "oracle"
        )
    for order in report.orders:
        if order not in CHATTER_CERTIFIED_INTERVALS:
            continue
        computed = [(iv.lo, iv.hi) for iv in report.results[order].intervals]
        problems += _interval_mismatches(
            computed,
            CHATTER_CERTIFIED_INTERVALS[order],
            CERTIFIED_TOL,
            f"order {order}",
        )
    return problems


def table1_text(report: CertificationReport, with_oracle: bool) -> str:
    """Side-by-side benchmark table: computed intervals against references."""
    rows: List[Tuple[str, str, str]] = []
    if with_oracle and report.oracle_intervals is not None:
        rows.append(
            (
                "exact spectrum (oracle)",
                _format_intervals(report.oracle_intervals),
                _format_intervals(CHATTER_EXACT_INTERVALS),
            )
        )
    for order in report.orders:
        res = report.results[order]
        computed = _format_intervals([(iv.lo, iv.hi) for iv in res.intervals])
        if res.n_inconclusive:
            computed += f"  ({res.n_inconclusive} inconclusive)"
        ref = _format_intervals(CHATTER_CERTIFIED_INTERVALS.get(order, []))
        rows.append((f"certified, order {order}", computed, ref))
    for label, ivs in CHATTER_LITERATURE_ROWS:
        rows.append((label, "not recomputed", _format_intervals(ivs)))

    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows + [("", "computed", "")])
    lines = ["chatter benchmark (gain k = 2): stable delay intervals"]
    lines.append(f"{'':{w0}}  {'computed':{w1}}  reference")
    for label, comp, ref in rows:
        lines.append(f"{label:{w0}}  {comp:{w1}}  {ref}")
    lines.append("")
    lines.append(f"note: {CHATTER_DELAY_INDEPENDENT_NOTE}")
    return "\n".join(lines) + "\n"


def cmd_table1(args) -> int:
    A, B = chatter_matrices(2.0)
    grid = _parse_grid_flag(args.grid) if args.grid is not None else DEFAULT_GRID
    orders = tuple(args.orders) if args.orders else DEFAULT_ORDERS
    eps = float(args.eps) if args.eps is not None else 1e-6
    cfg = SweepConfig.from_delay_system(A, B, orders=orders, grid=grid, eps=eps)
    with_oracle = not args.no_oracle
    report = run_sweep(cfg, with_oracle=with_oracle, jobs=args.jobs, progress=_progress)

    text = table1_text(report, with_oracle)
    print(text, end="")
    problems = compare_to_reference(report, with_oracle)
    if args.out:
        manifest = RunManifest("table1", None, args.out, args.seed)
        _emit_report(report, manifest, with_oracle)
        with open(os.path.join(args.out, "table1.txt"), "w") as fh:
            fh.write(f"# {manifest.header()}\n")
            fh.write(text)
    for problem in problems:
        print(f"tolerance violation: {problem}")
    if problems:
        return EXIT_FAIL
    if report.inconclusive_points():
        print(f"solver failures at {len(report.inconclusive_points())} grid points")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_oracle(args) -> int:
    config_path = args.config or bundled_config()
    data = load_config(config_path)
    A = _square_matrix(data["plant"]["A"], "plant.A")
    B = _square_matrix(data["plant"]["B"], "plant.B")
    if args.grid is not None:
        grid = _parse_grid_flag(args.grid)
    else:
        g = data["grid"]
        grid = _grid_or_error(g["min"], g["max"], g["step"], "grid")
    intervals = stable_intervals(A, B, grid.values())
    text = "oracle stable delay intervals: " + _format_intervals(intervals) + "\n"
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        manifest = RunManifest("oracle", config_path, args.out, args.seed)
        manifest.write(args.out)
        with open(os.path.join(args.out, "oracle_intervals.csv"), "w") as fh:
            fh.write(f"# {manifest.header()}\n")
            fh.write("interval_lo,interval_hi\n")
            for lo, hi in intervals:
                fh.write(f"{lo:.10g},{hi:.10g}\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = validation.run_all(args.seed)
    lines = [r.line() for r in results]
    for line in lines:
        print(line)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} suites passed (seed={args.seed})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        manifest = RunManifest("validate", None, args.out, args.seed)
        manifest.write(args.out)
        with open(os.path.join(args.out, "validate.txt"), "w") as fh:
            fh.write(f"# {manifest.header()}\n")
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdecert",
        description="Stability certification of delay systems via projection "
        "filters, IQC multipliers and LMI feasibility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config: bool):
        if needs_config:
            p.add_argument("--config", required=True, help="YAML sweep configuration")
        else:
            p.add_argument("--config", default=None, help="YAML sweep configuration")
        p.add_argument("--out", default=None, help="output directory for artifacts")
        p.add_argument("--orders", type=int, nargs="+", default=None, metavar="N")
        p.add_argument("--grid", default=None, metavar="MIN:MAX:STEP")
        p.add_argument("--eps", type=float, default=None, help="strictness margin")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-oracle", action="store_true")
        p.add_argument("--jobs", type=int, default=None, help="worker processes")

    p_cert = sub.add_parser("certify", help="run a certification sweep from a config")
    common(p_cert, needs_config=True)
    p_cert.set_defaults(func=cmd_certify)

    p_t1 = sub.add_parser("table1", help="self-contained chatter benchmark regression")
    common(p_t1, needs_config=False)
    p_t1.set_defaults(func=cmd_table1)

    p_or = sub.add_parser("oracle", help="exact stable intervals from the delay spectrum")
    common(p_or, needs_config=False)
    p_or.set_defaults(func=cmd_oracle)

    p_val = sub.add_parser("validate", help="randomized IQC/Bessel/filter suites")
    p_val.add_argument("--seed", type=int, default=42)
    p_val.add_argument("--out", default=None)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    if args.command == "certify" and args.out is None:
        args.out = "pdecert-certify"
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
