"""Command line front end: grid info, norms, spectra, and experiment reports.

Subcommands print a JSON result to stdout and, where asked, write CSV, JSON
and SVG files.  Every written file carries the tool version and a hash of the
fully resolved configuration so outputs can be traced back to an invocation.
Exit codes: 0 on success, 1 when an acceptance threshold in a config file is
violated, 2 on any configuration or I/O problem.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import reporting
from .dyadic import GridError, GridWindow, Shift, all_shifts, enumerate_cubes_at, unit_window
from .haar import haar_transform
from .harness import (
    EXPERIMENT_IDS,
    config_from_mapping,
    config_key,
    quantised_block_spectrum,
    report_rows,
    run_experiment,
    run_experiments,
    summary_payload,
)
from .operators import commutator, conjugate_by_weight, riesz_matrix
from .spaces import besov_continuous, besov_dyadic, besov_dyadic_weighted
from .spectra import functional_report, singular_values
from .symbols import KINDS, SymbolSpec, symbol_library
from .weights import a2_constant, doubling_ratio, reverse_holder_index, weight_from_spec

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2

SUBCOMMANDS = ("grid-info", "haar", "besov", "a2", "spectrum", "verify", "report")

# short names accepted on the command line in addition to the exact kinds
_SYMBOL_ALIASES = {"gaussian": "gaussian-bump", "sine": "sine-product"}

_RIESZ_MODES = ("periodic-multiplier", "truncated-kernel")


@dataclass(frozen=True)
class CliInvocation:
    """One parsed command line: subcommand, resolved flags, optional config path."""

    subcommand: str
    flags: dict = field(default_factory=dict)
    config_path: str | None = None

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise GridError(f"unknown subcommand {self.subcommand!r}")


def _to_float(text, what: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise GridError(f"{what} must be a number, got {text!r}") from exc


def parse_weight(text: str, n: int) -> dict:
    """Weight flag grammar: ``constant[:value]`` or ``power:alpha[:c1,c2,...]``."""
    parts = text.split(":")
    kind = parts[0]
    if kind == "constant":
        if len(parts) > 2:
            raise GridError(f"constant weight takes at most one value, got {text!r}")
        value = _to_float(parts[1], "constant weight value") if len(parts) == 2 else 1.0
        return {"kind": "constant", "value": value}
    if kind == "power":
        if len(parts) not in (2, 3):
            raise GridError(f"power weight needs an exponent, got {text!r}")
        alpha = _to_float(parts[1], "power weight exponent")
        if len(parts) == 3:
            center = [_to_float(c, "weight center") for c in parts[2].split(",")]
        else:
            center = [0.5] * n
        if len(center) != n:
            raise GridError(f"weight center has {len(center)} entries for dimension {n}")
        return {"kind": "power", "alpha": alpha, "center": center}
    raise GridError(f"unknown weight kind {kind!r}")


def parse_symbol(name: str, params_json: str | None, seed: int) -> SymbolSpec:
    """Resolve a symbol flag into a spec; params come as a JSON object."""
    kind = _SYMBOL_ALIASES.get(name, name)
    if kind not in KINDS:
        raise GridError(f"unknown symbol {name!r}; known: {', '.join(KINDS)}")
    params = {}
    if params_json:
        try:
            params = json.loads(params_json)
        except json.JSONDecodeError as exc:
            raise GridError(f"symbol params are not valid JSON: {exc}") from exc
        if not isinstance(params, dict):
            raise GridError("symbol params must be a JSON object")
    return SymbolSpec(kind, params, seed)


def parse_shift(text: str, n: int) -> Shift:
    """Comma separated thirds, e.g. ``0,1`` for omega = (0, 1/3)."""
    try:
        thirds = tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise GridError(f"shift must be comma separated thirds, got {text!r}") from exc
    if len(thirds) != n:
        raise GridError(f"shift has {len(thirds)} entries for dimension {n}")
    return Shift(thirds)


def _window(flags: dict) -> GridWindow:
    n, N = flags["n"], flags["N"]
    if n < 1:
        raise GridError("dimension must be at least 1")
    if N < 4 or N & (N - 1):
        raise GridError(f"samples per side must be a power of two >= 4, got {N}")
    k_max = flags.get("k_max")
    if k_max is None:
        k_max = N.bit_length() - 2
    return unit_window(n, N, k_max, flags.get("k_min", 0))


def _symbol_from_flags(flags: dict) -> SymbolSpec:
    return parse_symbol(flags["symbol"], flags.get("symbol_params"), flags.get("symbol_seed", 0))


def _emit_json(payload: dict, resolved: dict, output: str | None) -> None:
    sys.stdout.write(reporting.render_json(payload))
    if output:
        reporting.write_json(output, reporting.stamp(resolved, **payload))


def _cmd_grid_info(inv: CliInvocation) -> int:
    flags = inv.flags
    win = _window(flags)
    shift = parse_shift(flags["shift"], win.n) if flags.get("shift") else Shift.zero(win.n)
    levels = {}
    total = 0
    for k in range(win.k_min, win.k_max + 1):
        count = len(enumerate_cubes_at(win, shift, k))
        levels[str(k)] = {
            "cubes": count,
            "parity": -1 if k % 2 else 1,
            "side": 0.5**k,
        }
        total += count
    payload = {
        "n": win.n,
        "N": win.samples_per_side,
        "h": win.h,
        "k_min": win.k_min,
        "k_max": win.k_max,
        "samples": win.samples_per_side**win.n,
        "cell_volume": win.cell_volume,
        "shift": str(shift),
        "systems": 3**win.n,
        "levels": levels,
        "cubes_total": total,
    }
    resolved = {
        "subcommand": "grid-info",
        "n": win.n,
        "N": win.samples_per_side,
        "k_min": win.k_min,
        "k_max": win.k_max,
        "shift": str(shift),
    }
    _emit_json(payload, resolved, flags.get("output"))
    return EXIT_OK


def _cmd_haar(inv: CliInvocation) -> int:
    flags = inv.flags
    win = _window(flags)
    spec = _symbol_from_flags(flags)
    shift = parse_shift(flags["shift"], win.n) if flags.get("shift") else Shift.zero(win.n)
    b = symbol_library(spec, win)
    coeffs = haar_transform(b, shift)
    mags = coeffs.magnitudes()
    payload = {
        "symbol": spec.kind,
        "shift": str(shift),
        "method": coeffs.method,
        "coefficients": len(coeffs.data),
        "max_abs": float(mags.max()) if len(mags) else 0.0,
        "l2": float(math.sqrt(float((mags**2).sum()))),
        "window_mean": coeffs.window_mean,
    }
    resolved = {
        "subcommand": "haar",
        "n": win.n,
        "N": win.samples_per_side,
        "k_min": win.k_min,
        "k_max": win.k_max,
        "symbol": json.loads(spec.key()),
        "shift": str(shift),
    }
    _emit_json(payload, resolved, flags.get("output"))
    return EXIT_OK


def _cmd_besov(inv: CliInvocation) -> int:
    flags = inv.flags
    win = _window(flags)
    spec = _symbol_from_flags(flags)
    p = flags.get("p")
    p = float(2 * win.n) if p is None else float(p)
    b = symbol_library(spec, win)
    per_shift = {}
    total = 0.0
    for sh in all_shifts(win.n):
        v = besov_dyadic(b, p, sh)
        per_shift[str(sh)] = v
        total += v**p
    payload = {
        "symbol": spec.kind,
        "p": p,
        "continuous": besov_continuous(b, p),
        "dyadic": per_shift[str(Shift.zero(win.n))],
        "dyadic_by_shift": per_shift,
        "dyadic_all_shifts": total ** (1.0 / p),
    }
    resolved = {
        "subcommand": "besov",
        "n": win.n,
        "N": win.samples_per_side,
        "p": p,
        "symbol": json.loads(spec.key()),
    }
    if flags.get("weight"):
        wspec = parse_weight(flags["weight"], win.n)
        w = weight_from_spec(win, wspec)
        payload["dyadic_weighted"] = besov_dyadic_weighted(b, w, p)
        resolved["weight"] = wspec
    _emit_json(payload, resolved, flags.get("output"))
    return EXIT_OK


def _cmd_a2(inv: CliInvocation) -> int:
    flags = inv.flags
    win = _window(flags)
    wspec = parse_weight(flags.get("weight") or "constant", win.n)
    w = weight_from_spec(win, wspec)
    sigma, const = reverse_holder_index(w)
    payload = {
        "a2_constant": a2_constant(w),
        "reverse_holder_sigma": sigma,
        "reverse_holder_constant": const,
        "doubling_ratio_2": doubling_ratio(w, 2.0),
    }
    resolved = {
        "subcommand": "a2",
        "n": win.n,
        "N": win.samples_per_side,
        "weight": wspec,
    }
    _emit_json(payload, resolved, flags.get("output"))
    return EXIT_OK


def _cmd_spectrum(inv: CliInvocation) -> int:
    flags = inv.flags
    win = _window(flags)
    spec = _symbol_from_flags(flags)
    b = symbol_library(spec, win)
    wspec = parse_weight(flags.get("weight") or "constant", win.n)
    w = weight_from_spec(win, wspec)
    op = flags["op"]
    if op == "commutator":
        j = flags.get("j", 1)
        T = conjugate_by_weight(commutator(b, riesz_matrix(j, win, mode=flags["mode"])), w)
        s = singular_values(T)
    else:
        if win.n != 2:
            raise GridError("the quantised operator is two dimensional")
        s, _ = quantised_block_spectrum(b, w)
    reference = flags.get("reference")
    reference = 1.0 / win.n if reference is None else float(reference)
    p = flags.get("p")
    p = float(win.n) if p is None else float(p)
    q = flags.get("q") or "inf"
    resolved = {
        "subcommand": "spectrum",
        "n": win.n,
        "N": win.samples_per_side,
        "op": op,
        "j": flags.get("j", 1),
        "mode": flags["mode"],
        "symbol": json.loads(spec.key()),
        "weight": wspec,
        "reference": reference,
        "p": p,
        "q": q,
    }
    out_dir = flags.get("output_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    svg_path, csv_path = reporting.emit_plot(
        s,
        reference,
        os.path.join(out_dir, "spectrum.svg"),
        title=f"{op} singular values",
        sidecar=reporting.stamp(resolved),
    )
    payload = {
        "op": op,
        "count": len(s),
        "schatten": functional_report(s, p, q),
        "svg": svg_path,
        "csv": csv_path,
    }
    sys.stdout.write(reporting.render_json(payload))
    return EXIT_OK


def _resolve_experiment(name: str) -> str:
    """Exact experiment id, or a unique prefix of one."""
    if name in EXPERIMENT_IDS:
        return name
    hits = [e for e in EXPERIMENT_IDS if e.startswith(name)]
    if len(hits) == 1:
        return hits[0]
    if hits:
        raise GridError(f"experiment name {name!r} is ambiguous: {', '.join(hits)}")
    raise GridError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENT_IDS)}")


def _load_sections(path: str | None) -> dict:
    """Experiment sections of a TOML config: the [run.*] tables if present,
    otherwise every top-level table."""
    if not path:
        raise GridError("this subcommand needs --config")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise GridError(f"cannot read config {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise GridError(f"config {path!r} is not valid TOML: {exc}") from exc
    run = doc.get("run")
    if isinstance(run, dict) and run and all(isinstance(v, dict) for v in run.values()):
        sections = run
    else:
        sections = {k: v for k, v in doc.items() if isinstance(v, dict)}
    if not sections:
        raise GridError(f"config {path!r} defines no experiment sections")
    return sections


def _section_experiment(name: str, mapping: dict) -> str:
    return _resolve_experiment(mapping.get("experiment", name))


def _resolve_section(name: str, sections: dict) -> tuple[str, dict]:
    if name in sections:
        return name, dict(sections[name])
    eid = _resolve_experiment(name)
    hits = [k for k, v in sections.items() if _section_experiment(k, v) == eid]
    if len(hits) != 1:
        raise GridError(f"config has {len(hits)} sections for experiment {eid!r}")
    return hits[0], dict(sections[hits[0]])


def _acceptance_checks(table: dict | None, summary: dict) -> tuple[list[dict], int]:
    """Evaluate max_*/min_*/require_* bounds against a report summary."""
    checks = []
    violations = 0
    for key in sorted(table or {}):
        bound = table[key]
        if key.startswith("max_"):
            fieldname, kind = key[4:], "max"
        elif key.startswith("min_"):
            fieldname, kind = key[4:], "min"
        elif key.startswith("require_"):
            fieldname, kind = key[8:], "require"
        else:
            raise GridError(
                f"acceptance key {key!r} must start with max_, min_ or require_"
            )
        if fieldname not in summary:
            raise GridError(f"report summary has no field {fieldname!r} for {key!r}")
        value = summary[fieldname]
        if kind == "require":
            ok = bool(value) == bool(bound)
        elif value is None:
            ok = False
        elif kind == "max":
            ok = float(value) <= float(bound)
        else:
            ok = float(value) >= float(bound)
        checks.append(
            {"check": key, "field": fieldname, "bound": bound, "value": value, "passed": ok}
        )
        if not ok:
            violations += 1
    return checks, violations


def _write_section(name: str, cfg, report, acceptance, out_dir: str) -> tuple[dict, int]:
    """CSV plus stamped summary for one section; returns (entry, violations)."""
    payload = summary_payload(cfg, report)
    stamp = reporting.stamp(payload["config"])
    header, body = report_rows(report)
    reporting.write_csv(os.path.join(out_dir, f"{name}.csv"), [header] + body, sidecar=stamp)
    checks, violations = _acceptance_checks(acceptance, payload["summary"])
    doc = dict(stamp)
    doc.update(
        experiment=payload["experiment"],
        rows=payload["rows"],
        summary=payload["summary"],
        acceptance=checks,
    )
    reporting.write_json(os.path.join(out_dir, f"{name}.summary.json"), doc)
    entry = {
        "experiment": payload["experiment"],
        "rows": payload["rows"],
        "summary": payload["summary"],
        "acceptance": checks,
    }
    return entry, violations


def _print_checks(name: str, checks: list[dict]) -> None:
    for c in checks:
        word = "PASS" if c["passed"] else "FAIL"
        print(f"{word} {name}.{c['check']}: {c['field']}={c['value']} bound={c['bound']}")


def _cmd_verify(inv: CliInvocation) -> int:
    name = inv.flags["name"]
    sections = _load_sections(inv.config_path)
    sec_name, mapping = _resolve_section(name, sections)
    acceptance = mapping.pop("acceptance", None)
    mapping["experiment"] = _section_experiment(sec_name, mapping)
    cfg = config_from_mapping(mapping)
    report = run_experiment(cfg)
    out_dir = inv.flags.get("output_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    entry, violations = _write_section(sec_name, cfg, report, acceptance, out_dir)
    _print_checks(sec_name, entry["acceptance"])
    print(f"{sec_name}: {entry['rows']} rows, {violations} violation(s)")
    return EXIT_VIOLATION if violations else EXIT_OK


def _cmd_report(inv: CliInvocation) -> int:
    sections = _load_sections(inv.config_path)
    items = []
    for name in sorted(sections):
        mapping = dict(sections[name])
        acceptance = mapping.pop("acceptance", None)
        mapping["experiment"] = _section_experiment(name, mapping)
        items.append((name, config_from_mapping(mapping), acceptance))
    results = run_experiments([cfg for _, cfg, _ in items])
    out_dir = inv.flags.get("output_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    combined = {}
    total = 0
    for name, cfg, acceptance in items:
        report = next(r for c, r in results if c is cfg)
        entry, violations = _write_section(name, cfg, report, acceptance, out_dir)
        _print_checks(name, entry["acceptance"])
        combined[name] = entry
        total += violations
    configs = {name: json.loads(config_key(cfg)) for name, cfg, _ in items}
    doc = reporting.stamp(configs, sections=combined, violations=total)
    reporting.write_json(os.path.join(out_dir, "report.json"), doc)
    print(f"{len(items)} section(s), {total} violation(s)")
    return EXIT_VIOLATION if total else EXIT_OK


_HANDLERS = {
    "grid-info": _cmd_grid_info,
    "haar": _cmd_haar,
    "besov": _cmd_besov,
    "a2": _cmd_a2,
    "spectrum": _cmd_spectrum,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def run(invocation: CliInvocation) -> int:
    """Dispatch one invocation; raises GridError on configuration problems."""
    return _HANDLERS[invocation.subcommand](invocation)


def _add_window_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=2, help="dimension (default 2)")
    p.add_argument(
        "--N", type=int, default=64, help="samples per side, a power of two (default 64)"
    )
    p.add_argument("--k-max", type=int, default=None, help="finest cube level")
    p.add_argument("--k-min", type=int, default=0, help="coarsest cube level (default 0)")


def _add_symbol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--symbol", required=True, help="symbol kind, e.g. gaussian or sine")
    p.add_argument("--symbol-params", default=None, help="JSON object of symbol parameters")
    p.add_argument("--symbol-seed", type=int, default=0, help="seed for random symbols")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schatten-lab",
        description="commutator spectra, dyadic norms and experiment reports",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("grid-info", help="window, levels and cube counts")
    _add_window_flags(p)
    p.add_argument("--shift", default=None, help="system shift as comma separated thirds")
    p.add_argument("--output", default=None, help="also write the JSON to this path")

    p = sub.add_parser("haar", help="coefficient statistics of one symbol")
    _add_window_flags(p)
    _add_symbol_flags(p)
    p.add_argument("--shift", default=None, help="system shift as comma separated thirds")
    p.add_argument("--output", default=None, help="also write the JSON to this path")

    p = sub.add_parser("besov", help="continuous and dyadic norms of one symbol")
    _add_window_flags(p)
    _add_symbol_flags(p)
    p.add_argument("--p", type=float, default=None, help="exponent (default 2n)")
    p.add_argument("--weight", default=None, help="weight, e.g. power:0.5 or constant:2")
    p.add_argument("--output", default=None, help="also write the JSON to this path")

    p = sub.add_parser("a2", help="weight characteristics")
    _add_window_flags(p)
    p.add_argument("--weight", default=None, help="weight, e.g. power:0.5 or constant:2")
    p.add_argument("--output", default=None, help="also write the JSON to this path")

    p = sub.add_parser("spectrum", help="singular values with CSV and SVG output")
    _add_window_flags(p)
    _add_symbol_flags(p)
    p.add_argument(
        "--op",
        choices=("commutator", "quantised"),
        default="commutator",
        help="operator to decompose",
    )
    p.add_argument("--j", type=int, default=1, help="transform direction (default 1)")
    p.add_argument(
        "--mode",
        choices=_RIESZ_MODES,
        default="periodic-multiplier",
        help="transform discretization",
    )
    p.add_argument("--weight", default=None, help="weight, e.g. power:0.5 or constant:2")
    p.add_argument("--p", type=float, default=None, help="Schatten exponent (default n)")
    p.add_argument("--q", default=None, help="Lorentz fine index (default inf)")
    p.add_argument(
        "--reference", type=float, default=None, help="reference slope exponent (default 1/n)"
    )
    p.add_argument("--output-dir", default=".", help="directory for the plot files")

    p = sub.add_parser("verify", help="run one configured experiment and check bounds")
    p.add_argument("name", help="section name or experiment id (prefix allowed)")
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--output-dir", default=".", help="directory for the report files")

    p = sub.add_parser("report", help="run every configured experiment")
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--output-dir", default=".", help="directory for the report files")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return EXIT_CONFIG if exc.code else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    invocation = CliInvocation(args.command, flags, getattr(args, "config", None))
    try:
        return run(invocation)
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
