"""Command-line front end: run studies from TOML configs, write CSV and SVG.

Usage::

    randmil convergence --config gbm --out out/
    randmil timing --config paper_example --samples 200 --out out/
    randmil quadrature --config quadrature --out out/
    randmil residual --config gbm --out out/

``--config`` takes a path or the name of a built-in config. Every
:class:`~randmil.harness.ExperimentConfig` field can be set in the file and
overridden by a flag; problem parameters go in a ``[problem_params]`` table
or ``--param key=value``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .diagnostics import ErrorEntry, ErrorReport
from .harness import (ExperimentConfig, default_workers, residual_decay_study,
                      strong_convergence_study, work_precision_study)
from .quadrature import build_integrand, quadrature_rate_study

CSV_HEADER = ["scheme", "n", "h", "samples", "p", "error", "stderr", "cpu_seconds", "eoc_slope"]
SUBCOMMANDS = ("convergence", "timing", "quadrature", "residual")


class ConfigError(ValueError):
    """A config file is missing, malformed or inconsistent."""


@dataclass(frozen=True)
class QuadratureConfig:
    integrand: str = "holder"
    integrand_params: dict = field(default_factory=lambda: {"gamma": 0.5})
    n_min: int = 2
    n_max: int = 12
    samples: int = 1000
    p: float = 2.0
    seed: int = 0
    baseline: bool = True

    def run(self) -> ErrorReport:
        integrand = build_integrand(self.integrand, **self.integrand_params)
        return quadrature_rate_study(integrand, range(self.n_min, self.n_max + 1), reps=self.samples,
                                     p=self.p, stream=self.seed, baseline=self.baseline)


# --------------------------------------------------------------------------- CSV

def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def csv_text(report: ErrorReport) -> str:
    """The CSV serialisation of ``report`` as a string."""
    if len(report) == 0:
        raise ValueError("cannot serialise an empty report")
    slopes = {s: report.fit(s)[0] for s in report.schemes}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for e in sorted(report.entries, key=lambda e: (e.scheme, -e.h)):
        writer.writerow([e.scheme, e.n, _fmt(e.h), e.samples, _fmt(float(e.p)), _fmt(e.error),
                         _fmt(e.standard_error), _fmt(float(e.cpu_seconds)), _fmt(slopes[e.scheme])])
    return buf.getvalue()


def emit_csv(report: ErrorReport, destination) -> None:
    """Write ``report`` as CSV, rows ordered by scheme then descending h."""
    text = csv_text(report)
    path = Path(destination)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(source) -> ErrorReport:
    """Parse a file written by :func:`emit_csv` back into a report."""
    with open(source, newline="") as fh:
        rows = list(csv.DictReader(fh))
    entries = [ErrorEntry(r["scheme"], int(r["n"]), float(r["h"]), int(r["samples"]), float(r["p"]),
                          float(r["error"]), float(r["stderr"]), float(r["cpu_seconds"]))
               for r in rows]
    return ErrorReport(entries)


# --------------------------------------------------------------------------- SVG

_COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 200, 30, 60


def _log_ticks(lo, hi):
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]


def emit_svg(report: ErrorReport, destination, *, schemes=None, x: str = "h", title: str = "") -> None:
    """Log-log line chart: one polyline and one fitted line per scheme.

    ``x="h"`` plots error against step size (convergence);
    ``x="error"`` plots CPU seconds against error (work-precision).
    ``schemes`` restricts the plotted series; an empty selection is an error
    and nothing is written.
    """
    keep = report.schemes if schemes is None else [s for s in report.schemes if s in set(schemes)]
    series = {}
    for s in keep:
        rows = report.for_scheme(s)
        if x == "h":
            pts = [(e.h, e.error) for e in rows]
        elif x == "error":
            pts = [(e.error, e.cpu_seconds) for e in rows]
        else:
            raise ValueError(f"x must be 'h' or 'error', got {x!r}")
        pts = [(a, b) for a, b in pts if a > 0 and b > 0]
        if pts:
            series[s] = pts
    if not series:
        raise ValueError("nothing to plot: no scheme with positive data after filtering")

    lx = [math.log10(a) for pts in series.values() for a, _ in pts]
    ly = [math.log10(b) for pts in series.values() for _, b in pts]
    x0, x1 = min(lx) - 0.1, max(lx) + 0.1
    y0, y1 = min(ly) - 0.1, max(ly) + 0.1
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(v):
        return _LEFT + (math.log10(v) - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + (y1 - math.log10(v)) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for t in _log_ticks(x0, x1):
        if x0 <= math.log10(t) <= x1:
            out.append(f'<line class="tick" x1="{px(t):.2f}" y1="{_TOP + ph}" x2="{px(t):.2f}" y2="{_TOP + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px(t):.2f}" y="{_TOP + ph + 18}" text-anchor="middle" font-size="11">{t:.0e}</text>')
    for t in _log_ticks(y0, y1):
        if y0 <= math.log10(t) <= y1:
            out.append(f'<line class="tick" x1="{_LEFT - 5}" y1="{py(t):.2f}" x2="{_LEFT}" y2="{py(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{_LEFT - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11">{t:.0e}</text>')
    xlabel, ylabel = ("step size h", "error") if x == "h" else ("error", "CPU seconds")
    out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 15}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="18" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 18 {_TOP + ph / 2:.1f})">{ylabel}</text>')

    for i, (s, pts) in enumerate(series.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        coords = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in pts)
        out.append(f'<polyline class="data" data-scheme="{escape(s)}" points="{coords}" '
                   f'fill="none" stroke="{colour}" stroke-width="2"/>')
        for a, b in pts:
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{colour}"/>')
        slope = math.nan
        if len(pts) >= 2:
            slope, icept = np.polyfit(np.log([a for a, _ in pts]), np.log([b for _, b in pts]), 1)
            ends = [min(a for a, _ in pts), max(a for a, _ in pts)]
            fit = " ".join(f"{px(a):.2f},{py(math.exp(icept) * a**slope):.2f}" for a in ends)
            out.append(f'<polyline class="fit" data-scheme="{escape(s)}" points="{fit}" '
                       f'fill="none" stroke="{colour}" stroke-dasharray="5,4"/>')
        ly_ = _TOP + 15 + 20 * i
        out.append(f'<line x1="{_W - _RIGHT + 10}" y1="{ly_}" x2="{_W - _RIGHT + 30}" y2="{ly_}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{_W - _RIGHT + 35}" y="{ly_ + 4}" font-size="11">'
                   f'{escape(s)} (slope {slope:.2f})</text>')
    out.append("</svg>")

    path = Path(destination)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


# --------------------------------------------------------------------------- configs

def builtin_configs() -> list:
    return sorted(p.name[:-5] for p in resources.files("randmil").joinpath("configs").iterdir()
                  if p.name.endswith(".toml"))


def load_config(source) -> dict:
    """Read a TOML config from a path or a built-in name (``gbm``, ``holder`` ...)."""
    path = Path(source)
    if path.is_file():
        data = path.read_bytes()
    else:
        res = resources.files("randmil").joinpath("configs", f"{source}.toml")
        if str(source).endswith(".toml") or os.sep in str(source) or not res.is_file():
            raise ConfigError(f"config file not found: {source}")
        data = res.read_bytes()
    try:
        return tomllib.loads(data.decode())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config {source}: {exc}") from exc


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _apply(cls, table: dict, overrides: dict, params_key: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(table)
    extra_params = overrides.pop("params", None) or {}
    merged.update({k: v for k, v in overrides.items() if v is not None and k in names})
    if extra_params:
        merged[params_key] = {**merged.get(params_key, {}), **extra_params}
    if "schemes" in merged and isinstance(merged["schemes"], str):
        merged["schemes"] = [s for s in merged["schemes"].split(",") if s]
    if "schemes" in merged:
        merged["schemes"] = tuple(merged["schemes"])
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def experiment_config(table: dict, overrides: dict) -> ExperimentConfig:
    return _apply(ExperimentConfig, table, overrides, "problem_params")


def quadrature_config(table: dict, overrides: dict) -> QuadratureConfig:
    return _apply(QuadratureConfig, table, overrides, "integrand_params")


# --------------------------------------------------------------------------- argparse

def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), _parse_value(v.strip())


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randmil", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML file or built-in name")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--n-min", type=int)
        p.add_argument("--n-max", type=int)
        p.add_argument("--param", action="append", type=_key_value, default=[],
                       help="problem (or integrand) parameter key=value; repeatable")
        if name == "quadrature":
            p.add_argument("--integrand")
            p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument("--problem")
            p.add_argument("--schemes", help="comma-separated scheme names")
            p.add_argument("--reference", choices=["exact", "numerical"])
            p.add_argument("--n-ref", type=int)
            p.add_argument("--chunk-size", type=int)
            p.add_argument("--metric", choices=["terminal", "max"])
            p.add_argument("--timing-repeats", type=int)
    return parser


def run(argv=None) -> int:
    """Entry point returning a process exit status."""
    args = _parser().parse_args(argv)
    try:
        table = load_config(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "param")}
        overrides["params"] = dict(args.param)
        if args.command == "quadrature":
            report = quadrature_config(table, overrides).run()
            x, title = "h", "randomised Riemann sum"
        else:
            if overrides.get("workers") is None and "workers" not in table:
                overrides["workers"] = default_workers()
            config = experiment_config(table, overrides)
            study = {"convergence": strong_convergence_study, "timing": work_precision_study,
                     "residual": residual_decay_study}[args.command]
            report = study(config)
            x = "error" if args.command == "timing" else "h"
            title = f"{args.command}: {config.problem}"
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
        emit_csv(report, out / f"{args.command}.csv")
        emit_svg(report, out / f"{args.command}.svg", x=x, title=title)
    except (ConfigError, ValueError, OSError, ArithmeticError) as exc:
        print(f"randmil {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for s in report.schemes:
        print(f"{s:22s} slope {report.fit(s)[0]: .3f}")
    print(f"wrote {out / (args.command + '.csv')} and {out / (args.command + '.svg')}")
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
