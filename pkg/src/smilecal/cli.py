"""Command-line front end: fit, check, refit, density, sweep, calibrate, bl-oracle.

Exit codes are a stable contract:

    0  success / density passes (adiabatic)
    1  density has interior relative minima (non-adiabatic)
    2  input could not be parsed or is out of domain
    3  a fit or search failed to converge / calibration not identifiable
    4  density goes negative beyond round-off
    5  even the constrained refit produced a non-unimodal density

All tabular output is plain CSV with a one-line header; scalar reports are
key=value text. Every command is deterministic for fixed inputs and
configuration. Configuration precedence: flags > config file > built-in
defaults; the SMILECAL_OUT environment variable supplies the default
output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import adiabatic as adiab
from . import density as dens
from ._svg import write_line_plot
from .bs_core import MarketEnv, strike_to_x
from .errors import (
    ConvergenceError,
    CriticalSearchError,
    DomainError,
    IdentifiabilityError,
    QuoteFormatError,
    SmilecalError,
)
from .smile import SmileParams, VolQuote, constrained_fit_smile, fit_smile, sigma_of_x

EXIT_OK = 0
EXIT_NON_ADIABATIC = 1
EXIT_PARSE = 2
EXIT_CONVERGENCE = 3
EXIT_NEGATIVE_DENSITY = 4
EXIT_CONSTRAINED_FAILURE = 5

ENV_OUT_DIR = "SMILECAL_OUT"

_COORD_KINDS = ("delta", "x", "strike")
_CONTEXT_KEYS = ("spot", "rate", "maturity")


@dataclass(frozen=True)
class RunConfig:
    grid_points: int = dens.STANDARD_GRID_POINTS
    span: float = dens.STANDARD_SPAN
    step_frac: float | None = None  # oracle step / strike; None -> adaptive
    chi_start: float = 1.01
    chi_step: float = 0.05
    chi_tol: float = 1e-4
    chi_max: float = 20.0
    mode: str = "formula"
    out_dir: str = "."
    svg: bool = False
    workers: int = 1

    def search_settings(self) -> adiab.ChiSearchSettings:
        return adiab.ChiSearchSettings(
            chi_start=self.chi_start,
            step=self.chi_step,
            tol=self.chi_tol,
            chi_max=self.chi_max,
            grid_points=self.grid_points,
            span=self.span,
        )


@dataclass(frozen=True)
class QuoteFile:
    """Parsed quote file: coordinate kind, (coordinate, vol) rows, context."""

    kind: str
    rows: tuple[tuple[float, float], ...]
    context: dict


# ----------------------------------------------------------------------
# configuration and small-file I/O
# ----------------------------------------------------------------------

_CONFIG_KEYS = {
    "grid": ("grid_points", int),
    "span": ("span", float),
    "step-frac": ("step_frac", float),
    "chi-start": ("chi_start", float),
    "chi-step": ("chi_step", float),
    "chi-tol": ("chi_tol", float),
    "chi-max": ("chi_max", float),
    "mode": ("mode", str),
    "out": ("out_dir", str),
    "svg": ("svg", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
    "workers": ("workers", int),
}


def load_config(path: str) -> RunConfig:
    cfg = RunConfig()
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise QuoteFormatError(f"{path}:{i}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower().replace("_", "-")
        if key not in _CONFIG_KEYS:
            raise QuoteFormatError(f"{path}:{i}: unknown config key {key!r}")
        field, conv = _CONFIG_KEYS[key]
        try:
            cfg = replace(cfg, **{field: conv(value.strip())})
        except ValueError as exc:
            raise QuoteFormatError(f"{path}:{i}: bad value for {key}: {exc}") from exc
    return cfg


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if cfg.out_dir == "." and os.environ.get(ENV_OUT_DIR):
        cfg = replace(cfg, out_dir=os.environ[ENV_OUT_DIR])
    overrides = {
        "grid": "grid_points",
        "span": "span",
        "step_frac": "step_frac",
        "chi_max": "chi_max",
        "mode": "mode",
        "out": "out_dir",
        "workers": "workers",
    }
    for flag, field in overrides.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg = replace(cfg, **{field: value})
    if getattr(args, "svg", False):
        cfg = replace(cfg, svg=True)
    return cfg


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_report(path: Path, items: list[tuple[str, object]]) -> None:
    path.write_text(
        "".join(f"{key}={_fmt(value)}\n" for key, value in items), encoding="utf-8"
    )


def read_report(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    """Read back any CSV this tool writes: header names and row fields.

    Floats are written with 17 significant digits, so parsing a numeric
    column with float() reproduces the original values exactly.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise QuoteFormatError(f"{path}: empty table")
    header = [f.strip() for f in lines[0].split(",")]
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    for i, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise QuoteFormatError(f"{path}: line {i}: expected {len(header)} fields")
    return header, rows


def parse_quote_file(path: str) -> QuoteFile:
    """Read a quote CSV: optional context rows, a typed header, data rows.

    Context rows ``spot,VALUE`` / ``rate,VALUE`` / ``maturity,VALUE`` may
    precede the header. The header names the coordinate kind:
    ``delta,vol`` or ``x,vol`` or ``strike,vol``. Comment lines start
    with ``#``.
    """
    kind: str | None = None
    rows: list[tuple[float, float]] = []
    context: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise QuoteFormatError(f"cannot read quote file {path}: {exc}") from exc

    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise QuoteFormatError(f"{path}: line {i}: expected two fields, got {len(fields)}")
        first, second = fields
        key = first.lower()
        if kind is None and key in _CONTEXT_KEYS:
            try:
                context[key] = float(second)
            except ValueError as exc:
                raise QuoteFormatError(f"{path}: line {i}: bad {key} value") from exc
            continue
        if key in _COORD_KINDS and second.lower() == "vol":
            if kind is not None:
                raise QuoteFormatError(f"{path}: line {i}: duplicate header")
            kind = key
            continue
        if kind is None:
            raise QuoteFormatError(
                f"{path}: line {i}: expected header 'delta,vol' | 'x,vol' | 'strike,vol'"
            )
        try:
            coord, vol = float(first), float(second)
        except ValueError as exc:
            raise QuoteFormatError(f"{path}: line {i}: bad numeric row {raw!r}") from exc
        if vol <= 0.0:
            raise QuoteFormatError(f"{path}: line {i}: vol must be positive")
        rows.append((coord, vol))

    if kind is None:
        raise QuoteFormatError(f"{path}: missing header row")
    if len({c for c, _ in rows}) != len(rows):
        raise QuoteFormatError(f"{path}: duplicate coordinates")
    return QuoteFile(kind=kind, rows=tuple(rows), context=context)


def quotes_from_file(
    qf: QuoteFile, maturity: float, spot: float, rate: float
) -> list[VolQuote]:
    if qf.kind == "x":
        return [VolQuote(vol=v, x=c) for c, v in qf.rows]
    if qf.kind == "delta":
        return [VolQuote(vol=v, delta=c) for c, v in qf.rows]
    env = MarketEnv(spot=spot, rate=rate, maturity=maturity)
    return [VolQuote(vol=v, x=strike_to_x(env, c)) for c, v in qf.rows]


# ----------------------------------------------------------------------
# shared helpers for the commands
# ----------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_maturity(args, qf: QuoteFile | None) -> float:
    if args.maturity is not None:
        return args.maturity
    if qf is not None and "maturity" in qf.context:
        return qf.context["maturity"]
    raise QuoteFormatError("maturity required: pass --maturity or a maturity context row")


def _market_context(args, qf: QuoteFile | None) -> tuple[float, float]:
    spot = args.spot
    rate = args.rate
    if qf is not None:
        if spot is None:
            spot = qf.context.get("spot")
        if rate is None:
            rate = qf.context.get("rate")
    return (1.0 if spot is None else spot), (0.0 if rate is None else rate)


def _params_from_args(args) -> tuple[SmileParams | None, float | None]:
    """Smile parameters from --params G,CHI,N or a --params-file report."""
    if getattr(args, "params", None):
        parts = args.params.split(",")
        if len(parts) != 3:
            raise QuoteFormatError("--params expects G,CHI,N")
        try:
            g, chi, n = (float(p) for p in parts)
        except ValueError as exc:
            raise QuoteFormatError(f"--params: {exc}") from exc
        if args.maturity is None:
            raise QuoteFormatError("--params also requires --maturity")
        return SmileParams(g=g, chi=chi, n=n, maturity=args.maturity), args.maturity
    if getattr(args, "params_file", None):
        report = read_report(args.params_file)
        try:
            params = SmileParams(
                g=float(report["g"]),
                chi=float(report["chi"]),
                n=float(report["n"]),
                maturity=float(report["maturity"]),
            )
        except KeyError as exc:
            raise QuoteFormatError(f"{args.params_file}: missing key {exc}") from exc
        return params, params.maturity
    return None, None


def _fit_from_quote_args(args):
    qf = parse_quote_file(args.quotefile)
    maturity = _need_maturity(args, qf)
    spot, rate = _market_context(args, qf)
    quotes = quotes_from_file(qf, maturity, spot, rate)
    result = fit_smile(quotes, maturity)
    return qf, maturity, spot, rate, quotes, result


def _density_verdict_exit(report: dens.DensityReport) -> int:
    if report.negative_regions:
        return EXIT_NEGATIVE_DENSITY
    if report.minima:
        return EXIT_NON_ADIABATIC
    return EXIT_OK


def _fit_report_items(result, label: str = "") -> list[tuple[str, object]]:
    prefix = f"{label}_" if label else ""
    p = result.params
    return [
        (f"{prefix}g", p.g),
        (f"{prefix}chi", p.chi),
        (f"{prefix}n", p.n),
        (f"{prefix}maturity", p.maturity),
        (f"{prefix}residual_rms", result.residual_rms),
        (f"{prefix}converged", result.converged),
        (f"{prefix}constrained", result.constrained),
        (f"{prefix}iterations", result.iterations),
    ]


def _print_report(items: list[tuple[str, object]]) -> None:
    for key, value in items:
        print(f"{key}={_fmt(value)}")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    qf, maturity, _, _, quotes, result = _fit_from_quote_args(args)

    items = _fit_report_items(result)
    write_report(out / "fit.txt", items)
    xs = np.array([q.to_x(maturity) for q in quotes])
    vols = np.array([q.vol for q in quotes])
    fitted = _smile_vols(result.params, xs)
    write_csv(
        out / "fit_residuals.csv",
        ["x", "vol_observed", "vol_fitted", "residual"],
        zip(xs, vols, fitted, fitted - vols),
    )
    if cfg.svg:
        dense_x = np.linspace(xs.min(), xs.max(), 401)
        write_line_plot(
            out / "smile.svg",
            [
                ("observed", xs, vols),
                ("fitted", dense_x, _smile_vols(result.params, dense_x)),
            ],
            title="volatility smile fit",
            xlabel="x",
            ylabel="vol",
        )
    _print_report(items)
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _smile_vols(params: SmileParams, xs: np.ndarray) -> np.ndarray:
    return np.asarray(sigma_of_x(params, xs))


def cmd_check(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)

    params, _ = _params_from_args(args)
    if params is None:
        if not getattr(args, "quotefile", None):
            raise QuoteFormatError("check needs a quote file, --params or --params-file")
        _, _, _, _, _, fit_result = _fit_from_quote_args(args)
        if not fit_result.converged:
            print("fit did not converge", file=sys.stderr)
            return EXIT_CONVERGENCE
        params = fit_result.params

    verdict = adiab.adiabatic_check(
        params, mode=cfg.mode, settings=cfg.search_settings()
    )
    curve = dens.density_curve(params, points=cfg.grid_points, span=cfg.span)
    report = dens.analyze(curve)

    write_csv(out / "density.csv", ["x", "density"], zip(curve.xs, curve.ps))
    items = [
        ("chi_opt", verdict.chi_opt),
        ("chi_c", verdict.chi_c),
        ("chi_c_source", verdict.source),
        ("adiabatic", verdict.adiabatic),
        ("total_mass", report.total_mass),
        ("martingale_gap", report.martingale_gap),
        ("n_minima", len(report.minima)),
        ("n_negative_regions", len(report.negative_regions)),
        ("unimodal", report.unimodal),
    ]
    write_report(out / "check.txt", items)
    _print_report(items)
    for point in report.minima:
        print(f"minimum at x={_fmt(point.x)} density={_fmt(point.p)}")
    for lo, hi in report.negative_regions:
        print(f"negative density on [{_fmt(lo)}, {_fmt(hi)}]")
    if cfg.svg:
        write_line_plot(
            out / "density.svg",
            [("density", curve.xs, curve.ps)],
            title="smile-implied return density",
            xlabel="x",
            ylabel="p(x)",
        )
    code = _density_verdict_exit(report)
    label = {0: "adiabatic", 1: "non-adiabatic", 4: "negative-density"}[code]
    print(f"verdict={label}")
    return code


def cmd_refit(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    settings = cfg.search_settings()

    _, maturity, _, _, quotes, free = _fit_from_quote_args(args)
    if not free.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE

    verdict = adiab.adiabatic_check(free.params, mode=cfg.mode, settings=settings)
    free_report = dens.analyze(
        dens.density_curve(free.params, points=cfg.grid_points, span=cfg.span)
    )

    final = free
    if verdict.adiabatic and free_report.unimodal:
        final_report = free_report
    else:
        bound = verdict.chi_c
        final = constrained_fit_smile(quotes, maturity, chi_max=bound)
        final_report = dens.analyze(
            dens.density_curve(final.params, points=cfg.grid_points, span=cfg.span)
        )
        # The closed-form chi_c is approximate, and re-optimizing (g, n)
        # under the clamp moves the true critical ratio; fall back to the
        # numerical search at the constrained optimum, shaving the bound a
        # little more on each retry until the verdicts cross.
        attempt = 0
        while not final_report.unimodal and attempt < 5:
            numeric = adiab.chi_critical_numeric(
                final.params.g, final.params.n, maturity, settings
            )
            bound = min(bound, numeric) * (1.0 - 1e-3) * (0.995**attempt)
            final = constrained_fit_smile(quotes, maturity, chi_max=bound)
            final_report = dens.analyze(
                dens.density_curve(final.params, points=cfg.grid_points, span=cfg.span)
            )
            attempt += 1

    items = (
        _fit_report_items(free, "unconstrained")
        + _fit_report_items(final, "final")
        + [
            ("chi_c", verdict.chi_c),
            ("chi_c_source", verdict.source),
            ("refit_applied", final is not free),
            ("final_unimodal", final_report.unimodal),
        ]
    )
    write_report(out / "refit.txt", items)

    grid = dens.density_curve(free.params, points=cfg.grid_points, span=cfg.span)
    xs = grid.xs
    vol_free = _smile_vols(free.params, xs)
    vol_final = _smile_vols(final.params, xs)
    p_free = grid.ps
    p_final = dens.return_density(final.params, xs)
    write_csv(
        out / "refit_comparison.csv",
        ["x", "vol_unconstrained", "vol_constrained", "density_unconstrained", "density_constrained"],
        zip(xs, vol_free, vol_final, p_free, p_final),
    )
    if cfg.svg:
        write_line_plot(
            out / "refit_density.svg",
            [("unconstrained", xs, p_free), ("constrained", xs, p_final)],
            title="return density before/after adiabatic constraint",
            xlabel="x",
            ylabel="p(x)",
        )
        write_line_plot(
            out / "refit_smile.svg",
            [("unconstrained", xs, vol_free), ("constrained", xs, vol_final)],
            title="smile before/after adiabatic constraint",
            xlabel="x",
            ylabel="vol",
        )
    _print_report(items)
    if not final_report.unimodal:
        print("constrained refit still non-unimodal", file=sys.stderr)
        return EXIT_CONSTRAINED_FAILURE
    return EXIT_OK


def cmd_density(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    params, _ = _params_from_args(args)
    if params is None:
        raise QuoteFormatError("density needs --params G,CHI,N with --maturity, or --params-file")
    curve = dens.density_curve(params, points=cfg.grid_points, span=cfg.span)
    report = dens.analyze(curve)
    write_csv(out / "density.csv", ["x", "density"], zip(curve.xs, curve.ps))
    items = [
        ("total_mass", report.total_mass),
        ("martingale_gap", report.martingale_gap),
        ("n_minima", len(report.minima)),
        ("n_negative_regions", len(report.negative_regions)),
        ("unimodal", report.unimodal),
    ]
    write_report(out / "density.txt", items)
    _print_report(items)
    if cfg.svg:
        write_line_plot(
            out / "density.svg",
            [("density", curve.xs, curve.ps)],
            title="smile-implied return density",
            xlabel="x",
            ylabel="p(x)",
        )
    return EXIT_OK


def _parse_axis(spec: str, default: tuple[float, float, int]) -> np.ndarray:
    if not spec:
        lo, hi, count = default
    else:
        parts = spec.split(":")
        if len(parts) != 3:
            raise QuoteFormatError(f"axis spec must be LO:HI:COUNT, got {spec!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise QuoteFormatError(f"bad axis spec {spec!r}: {exc}") from exc
    if not (0 < lo <= hi) or count < 1:
        raise QuoteFormatError(f"axis spec out of range: {spec!r}")
    return np.geomspace(lo, hi, count)


_SWEEP_HEADER = ["g", "T", "n", "rho", "chi_c", "status"]


def read_sweep_csv(path: str) -> list[adiab.SweepRow]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or [f.strip() for f in lines[0].split(",")] != _SWEEP_HEADER:
        raise QuoteFormatError(f"{path}: expected header {','.join(_SWEEP_HEADER)}")
    rows = []
    for i, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        fields = line.split(",", maxsplit=5)
        if len(fields) != 6:
            raise QuoteFormatError(f"{path}: line {i}: expected 6 fields")
        try:
            rows.append(
                adiab.SweepRow(
                    g=float(fields[0]),
                    maturity=float(fields[1]),
                    n=float(fields[2]),
                    rho=float(fields[3]),
                    chi_c=float(fields[4]),
                    status=fields[5].strip(),
                )
            )
        except ValueError as exc:
            raise QuoteFormatError(f"{path}: line {i}: {exc}") from exc
    return rows


def _row_key(g: float, rho: float, maturity: float) -> tuple[str, str, str]:
    return (format(g, ".12g"), format(rho, ".12g"), format(maturity, ".12g"))


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    g_axis = _parse_axis(args.g_range, (*adiab.TABLE_RANGES["g"], 6))
    rho_axis = _parse_axis(args.rho_range, (*adiab.TABLE_RANGES["rho"], 6))
    t_axis = _parse_axis(args.t_range, (*adiab.TABLE_RANGES["t"], 6))
    path = out / "sweep.csv"

    done: dict[tuple[str, str, str], adiab.SweepRow] = {}
    if path.exists():
        for row in read_sweep_csv(str(path)):
            if row.status == "ok":
                done[_row_key(row.g, row.rho, row.maturity)] = row

    lattice = [
        (float(g), float(rho), float(t))
        for g, rho, t in product(g_axis, rho_axis, t_axis)
    ]
    missing = [pt for pt in lattice if _row_key(*pt) not in done]
    print(f"sweep: {len(lattice)} rows, {len(lattice) - len(missing)} reused, "
          f"{len(missing)} to compute")

    if cfg.workers <= 1:
        computed = [
            adiab._sweep_one((g, rho, t, cfg.search_settings()))
            for g, rho, t in missing
        ]
    else:
        computed = _parallel_rows(missing, cfg)

    fresh = {_row_key(r.g, r.rho, r.maturity): r for r in computed}
    rows = [
        done.get(_row_key(*pt)) or fresh[_row_key(*pt)]
        for pt in lattice
    ]
    write_csv(
        path,
        _SWEEP_HEADER,
        ((r.g, r.maturity, r.n, r.rho, r.chi_c, r.status) for r in rows),
    )
    ok = sum(1 for r in rows if r.status == "ok")
    print(f"sweep complete: {ok}/{len(rows)} rows ok -> {path}")
    if cfg.svg:
        _sweep_svg(out, rows)
    return EXIT_OK if ok >= 0.9 * len(rows) else EXIT_CONVERGENCE


def _parallel_rows(missing, cfg: RunConfig) -> list[adiab.SweepRow]:
    from concurrent.futures import ProcessPoolExecutor

    tasks = [(g, rho, t, cfg.search_settings()) for g, rho, t in missing]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(adiab._sweep_one, tasks, chunksize=4))


def _sweep_svg(out: Path, rows: list[adiab.SweepRow]) -> None:
    by_gt: dict[tuple[float, float], list[adiab.SweepRow]] = {}
    for r in rows:
        if r.status == "ok":
            by_gt.setdefault((r.g, r.maturity), []).append(r)
    series = []
    for (g, t), group in sorted(by_gt.items())[:6]:
        group = sorted(group, key=lambda r: r.n)
        series.append(
            (f"g={g:.3g},T={t:.3g}", [r.n for r in group], [r.chi_c for r in group])
        )
    if series:
        write_line_plot(
            out / "boundary.svg",
            series,
            title="critical plateau ratio vs squared half-width",
            xlabel="n",
            ylabel="chi_c",
        )


def cmd_calibrate(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    rows = read_sweep_csv(args.sweepfile)
    try:
        result = adiab.calibrate_critical_fit(rows)
    except (DomainError, IdentifiabilityError) as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    p, err = result.params, result.stderr
    items = [
        ("alpha", p.alpha),
        ("alpha_stderr", err[0]),
        ("beta", p.beta),
        ("beta_stderr", err[1]),
        ("gamma", p.gamma),
        ("gamma_stderr", err[2]),
        ("delta", p.delta),
        ("delta_stderr", err[3]),
        ("mse", result.mse),
        ("n_rows", result.n_rows),
    ]
    write_report(out / "calibration.txt", items)
    _print_report(items)
    return EXIT_OK


def cmd_bl_oracle(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    params, _ = _params_from_args(args)
    if params is None:
        raise QuoteFormatError("bl-oracle needs --params G,CHI,N with --maturity, or --params-file")
    spot = 1.0 if args.spot is None else args.spot
    rate = 0.0 if args.rate is None else args.rate
    env = MarketEnv(spot=spot, rate=rate, maturity=params.maturity)

    curve = dens.density_curve(params, points=cfg.grid_points, span=cfg.span)
    strikes = spot * np.exp(curve.xs + rate * params.maturity)
    vol_fn = dens.smile_vol_of_strike(env, params)
    step = None if cfg.step_frac is None else strikes * cfg.step_frac
    oracle, err = dens.bl_density_oracle(env, vol_fn, strikes, step=step, with_error=True)
    oracle_x = oracle * strikes  # convert price-space density to x-space
    analytic = curve.ps
    denom = np.maximum(np.abs(analytic), 1e-300)
    rel = np.abs(oracle_x - analytic) / denom
    flagged = (err * strikes) > 1e-3 * np.abs(oracle_x)
    write_csv(
        out / "bl_oracle.csv",
        ["strike", "x", "density_oracle", "density_analytic", "rel_diff", "flagged"],
        zip(strikes, curve.xs, oracle_x, analytic, rel, flagged),
    )
    core = analytic > 1e-3 * analytic.max()
    print(f"max rel diff where density > 1e-3 of peak: {_fmt(float(rel[core].max()))}")
    print(f"flagged points: {int(flagged.sum())}")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--maturity", type=float, default=None, help="time to maturity in years")
    p.add_argument("--spot", type=float, default=None, help="spot price (default 1)")
    p.add_argument("--rate", type=float, default=None, help="risk-free rate (default 0)")
    p.add_argument("--grid", type=int, default=None, help="density grid points")
    p.add_argument("--span", type=float, default=None, help="grid half-width in smile scales")
    p.add_argument("--chi-max", dest="chi_max", type=float, default=None,
                   help="upper end of the chi search")
    p.add_argument("--mode", choices=("formula", "numeric"), default=None,
                   help="how to evaluate the critical ratio")
    p.add_argument("--step-frac", dest="step_frac", type=float, default=None,
                   help="oracle stencil step as a fraction of strike")
    p.add_argument("--workers", type=int, default=None, help="parallel sweep workers")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    p.add_argument("--config", type=str, default=None, help="key=value config file")


def _add_params_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", type=str, default=None, help="smile parameters G,CHI,N")
    p.add_argument("--params-file", dest="params_file", type=str, default=None,
                   help="key=value file with g, chi, n, maturity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smilecal",
        description="volatility smile calibration with risk-neutral density validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the smile to a quote file")
    p.add_argument("quotefile")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check", help="adiabatic check and density report")
    p.add_argument("quotefile", nargs="?")
    _add_params_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("refit", help="fit, check, and constrain if needed")
    p.add_argument("quotefile")
    _add_common(p)
    p.set_defaults(func=cmd_refit)

    p = sub.add_parser("density", help="evaluate the implied density on the standard grid")
    _add_params_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("sweep", help="map the critical ratio over a parameter lattice")
    p.add_argument("--g-range", dest="g_range", type=str, default="",
                   help="LO:HI:COUNT (default 0.03:0.5:6)")
    p.add_argument("--rho-range", dest="rho_range", type=str, default="",
                   help="LO:HI:COUNT (default 2.5:10:6)")
    p.add_argument("--t-range", dest="t_range", type=str, default="",
                   help="LO:HI:COUNT (default 1/365:4:6)")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit the critical-ratio surface to a sweep CSV")
    p.add_argument("sweepfile")
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bl-oracle", help="finite-difference density vs the closed form")
    _add_params_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bl_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QuoteFormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConvergenceError, CriticalSearchError, IdentifiabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SmilecalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
