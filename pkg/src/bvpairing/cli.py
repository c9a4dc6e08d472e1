"""Command line front end: run scenario files, the bundled suite, or normalize a scenario.

Exit codes: 0 when every executed check passes, 2 when any check fails, 1 on
a parse or validation error (diagnostic on stderr).
"""

from __future__ import annotations

import csv
import json
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .errors import PairingError, ScenarioParseError, ScenarioValidationError
from .measure1d import CANTOR_MAX_DEPTH, DEFAULT_TOL
from .scenario import CHECK_PARAMS, Scenario, SpecError, normalize_spec
from .verify import LAMBDA_GRID, N_LADDER, T_QUAD_TOL, run_check

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

REPORT_SCHEMA_VERSION = 1
SUITE_FIXTURES = (
    "s1_autonomous",
    "s2_sign_linear",
    "s3_sign_nonlinear",
    "s4_cantor",
    "s5_tensor",
    "s6_smooth",
)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _line_of(text: str, path: str) -> int | None:
    """Best-effort line of the key that ends ``path`` (e.g. ``field.terms[0].g``)."""
    keys = [k for k in re.split(r"[.\[\]]", path) if k and not k.isdigit() and not k.startswith("<")]
    if not keys:
        return None
    lines = text.splitlines()
    # walk the keys in order so that a later key is searched after the earlier ones
    start = 0
    found = None
    for key in keys:
        pat = re.compile(rf"(^|[\s{{,\[.]){re.escape(key)}\s*(=|\]|\.)")
        for i in range(start, len(lines)):
            if pat.search(lines[i]):
                found, start = i + 1, i
                break
    return found


def load_spec(path: str | Path) -> tuple[dict, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as err:
        raise ScenarioParseError(f"cannot read {p}: {err.strerror or err}") from None
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        col = getattr(err, "colno", None)
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(err))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        msg = getattr(err, "msg", str(err))
        raise ScenarioParseError(f"TOML syntax: {msg}", line, col) from None


def scenario_from_text(spec: dict, text: str, strict: bool = False, seed: int | None = None) -> Scenario:
    try:
        return Scenario.from_spec(spec, strict=strict, seed=seed)
    except SpecError as err:
        line = _line_of(text, err.path)
        raise ScenarioParseError(str(err), line, 1 if line else None, err.path) from None
    except (ScenarioValidationError, ScenarioParseError):
        raise
    except ValueError as err:
        raise ScenarioParseError(str(err)) from None


def parse_scenario(path: str | Path, strict: bool = False, seed: int | None = None) -> Scenario:
    """Read and fully validate a scenario file."""
    spec, text = load_spec(path)
    return scenario_from_text(spec, text, strict, seed)


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("bvpairing") / "fixtures" / f"{name}.toml"))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _run_entry(task: tuple) -> tuple[dict, dict]:
    # worker entry point; the scenario is rebuilt so no state leaks between checks
    spec, strict, seed, entry, tol_scale, timing = task
    start = time.perf_counter()
    sc = Scenario.from_spec(spec, strict=strict, seed=seed)
    res = run_check(sc, entry, tol_scale)
    out = res.to_dict()
    if timing:
        # wall-clock numbers are opt-in: they would break byte-identical reports
        out["timing_s"] = round(time.perf_counter() - start, 3)
    return out, {k: [list(r) for r in rows] for k, rows in res.tables.items()}


def _select_checks(sc: Scenario, only: list[str] | None) -> list[dict]:
    if not only:
        return list(sc.checks)
    unknown = [c for c in only if c not in CHECK_PARAMS]
    if unknown:
        raise ScenarioValidationError("checks", f"unknown check names {unknown}")
    chosen = [c for c in sc.checks if c["name"] in only or c["id"] in only]
    listed = {c["name"] for c in chosen}
    # checks not listed in the file run with default parameters
    chosen += [{"name": c, "id": c} for c in only if c not in listed and c not in {x["id"] for x in chosen}]
    return chosen


def _execute(tasks: list[tuple], jobs: int) -> list[tuple[dict, dict]]:
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_entry(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_entry, tasks))


def environment(tol_scale: float) -> dict:
    return {
        "quadrature": {
            "rule": "adaptive Gauss-Kronrod 7/15",
            "default_tol": DEFAULT_TOL,
            "t_integral_tol": T_QUAD_TOL,
        },
        "cantor_max_depth": CANTOR_MAX_DEPTH,
        "n_ladder": list(N_LADDER),
        "lambda_grid": list(LAMBDA_GRID),
        "tol_scale": tol_scale,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _report(sc: Scenario, results: list[tuple[dict, dict]], tol_scale: float) -> tuple[dict, dict]:
    checks = [r for r, _ in results]
    tables = {r["id"]: t for r, t in results if t}
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "scenario": sc.name,
        "seed": sc.seed,
        "pass": all(c["pass"] for c in checks),
        "checks": checks,
        "environment": environment(tol_scale),
    }
    return report, tables


def run(sc: Scenario, only: list[str] | None = None, jobs: int = 1, tol_scale: float = 1.0,
        strict: bool = False, timing: bool = False) -> tuple[dict, dict]:
    """Execute the requested checks; returns (report, tables). Independent of ``jobs``."""
    entries = _select_checks(sc, only)
    tasks = [(sc.spec, strict, sc.seed, e, tol_scale, timing) for e in entries]
    return _report(sc, _execute(tasks, jobs), tol_scale)


def run_suite(names=SUITE_FIXTURES, jobs: int = 1, tol_scale: float = 1.0, seed: int | None = None,
              only: list[str] | None = None, timing: bool = False) -> tuple[dict, dict]:
    scenarios = [parse_scenario(fixture_path(n), seed=seed) for n in names]
    tasks, owners = [], []
    for sc in scenarios:
        for e in _select_checks(sc, only):
            tasks.append((sc.spec, False, sc.seed, e, tol_scale, timing))
            owners.append(sc.name)
    results = _execute(tasks, jobs)
    reports, tables = [], {}
    for sc in scenarios:
        mine = [r for r, o in zip(results, owners) if o == sc.name]
        rep, tab = _report(sc, mine, tol_scale)
        rep.pop("environment")
        reports.append(rep)
        tables[sc.name] = tab
    suite = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "suite": list(names),
        "seed": seed,
        "pass": all(r["pass"] for r in reports),
        "scenarios": reports,
        "environment": environment(tol_scale),
    }
    return suite, tables


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _plain(obj):
    """JSON-safe copy: non-finite floats become strings, tuples lists, keys strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "table"


def write_csv(tables: dict, directory: str | Path, prefix: str = "") -> list[Path]:
    """One CSV per (check, table) with columns n, value, abs_error."""
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for check_id, per in sorted(tables.items()):
        for tname, rows in sorted(per.items()):
            path = out_dir / f"{_safe(prefix + check_id)}__{_safe(tname)}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "value", "abs_error"])
                for n, v, e in rows:
                    w.writerow([int(n), repr(float(v)), repr(float(e))])
            written.append(path)
    return written


def emit(report: dict, tables: dict | None = None, report_path: str | Path | None = None,
         csv_dir: str | Path | None = None, stream=None) -> None:
    text = dumps(report)
    if report_path:
        Path(report_path).write_text(text, encoding="utf-8")
    elif stream is not None:
        stream.write(text)
    if csv_dir and tables:
        if "scenarios" in report:
            for name, per in sorted(tables.items()):
                write_csv(per, csv_dir, prefix=f"{name}__")
        else:
            write_csv(tables, csv_dir)


def exit_code(report: dict) -> int:
    return 0 if report["pass"] else 2


# ---------------------------------------------------------------------------
# click commands
# ---------------------------------------------------------------------------


def _only(value: str | None) -> list[str] | None:
    if not value:
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def _fail(err: Exception) -> None:
    click.echo(str(err), err=True)
    sys.exit(1)


@click.group()
@click.version_option(__version__, prog_name="bvpairing")
def main():
    """Numerical verification of nonlinear pairings between BV functions and divergence-measure fields."""


@main.command("run")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--only", help="Comma-separated check names (or ids) to run.")
@click.option("--tol-scale", type=float, default=1.0, show_default=True, help="Multiply every tolerance.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON report here.")
@click.option("--csv", "csv_dir", type=click.Path(file_okay=False), help="Directory for convergence tables.")
@click.option("--seed", type=int, help="Override the scenario seed.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("--strict", is_flag=True, help="Reject unknown keys.")
@click.option("--timing", is_flag=True, help="Record per-check wall time (reports stop being byte-stable).")
def run_cmd(file, only, tol_scale, report_path, csv_dir, seed, jobs, strict, timing):
    """Run the checks of one scenario file."""
    if tol_scale <= 0:
        _fail(ScenarioValidationError("tolerance", "--tol-scale must be positive"))
    try:
        spec, text = load_spec(file)
        sc = scenario_from_text(spec, text, strict, seed)
        output = spec.get("output", {}) if isinstance(spec.get("output", {}), dict) else {}
        if strict and set(output) - {"report", "csv"}:
            raise ScenarioValidationError("schema", f"unknown output keys {sorted(set(output) - {'report', 'csv'})}")
        report, tables = run(sc, _only(only), jobs, tol_scale, strict, timing)
    except PairingError as err:
        _fail(err)
    report_path = report_path or output.get("report")
    csv_dir = csv_dir or output.get("csv")
    emit(report, tables, report_path, csv_dir, stream=sys.stdout)
    sys.exit(exit_code(report))


@main.command("suite")
@click.option("--only", help="Comma-separated check names to run in every scenario.")
@click.option("--tol-scale", type=float, default=1.0, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_dir", type=click.Path(file_okay=False))
@click.option("--seed", type=int, help="Override every scenario seed.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--timing", is_flag=True, help="Record per-check wall time.")
def suite_cmd(only, tol_scale, report_path, csv_dir, seed, jobs, timing):
    """Run all bundled fixture scenarios and aggregate one report."""
    try:
        report, tables = run_suite(jobs=jobs, tol_scale=tol_scale, seed=seed, only=_only(only), timing=timing)
    except PairingError as err:
        _fail(err)
    emit(report, tables, report_path, csv_dir, stream=sys.stdout)
    sys.exit(exit_code(report))


@main.command("normalize")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
def normalize_cmd(file, output):
    """Print the canonical, fully defaulted form of a scenario."""
    import tomli_w

    try:
        spec, text = load_spec(file)
        scenario_from_text(spec, text)
        doc = tomli_w.dumps(normalize_spec(spec))
    except PairingError as err:
        _fail(err)
    if output:
        Path(output).write_text(doc, encoding="utf-8")
    else:
        click.echo(doc, nl=False)


@main.command("fixtures")
def fixtures_cmd():
    """List the bundled fixture files."""
    for name in SUITE_FIXTURES + ("s2v_shifted_sign",):
        click.echo(str(fixture_path(name)))


if __name__ == "__main__":  # pragma: no cover
    main()
