"""Batch command-line front end.

Every invocation resolves to an :class:`~osclab.config.ExperimentConfig`,
writes its canonical echo ``config.ini`` plus ``summary.json`` and a CSV
(and optionally an SVG) into the output directory, and exits with

====  =====================================================
0     all checks requested by the command passed
1     computation finished but at least one check failed
2     configuration error
3     phase could not be loaded
4     numerical error (quadrature, reduction, fitting, ...)
====  =====================================================
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .config import COMMANDS, ExperimentConfig, config_to_text, load_config
from .decay_lab import lq_decay, region_probe, sup_decay, sweep_to_csv, sweep_to_svg
from .errors import ConfigError, OsclabError, PhaseLoadError
from .exponents import ExponentQuery, exponent_table_csv, k_sharp, branch_crossover
from .normal_form import SurfaceProfile, analyze
from .orders import FLAT, format_order, parse_order
from .osc_quad import vdc_probe_1d
from .phase_model import PolynomialPhase, corpus_names, corpus_phase, load_phase_file
from .sharpness_lab import growth_fit, growth_to_csv, growth_to_svg, predicted_growth

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_CONFIG = 2
EXIT_PHASE = 3
EXIT_NUMERIC = 4

SUMMARY_SCHEMA = "osclab.summary v1"
DECAY_TOL = 0.05
DECAY_R2 = 0.98
LQ_SLACK = 0.05
REGION_LAMBDA_SPREAD = 2.0
REGION_DELTA_SPREAD = 10.0
GROWTH_TOL = 0.15
VDC_SPREAD = 10.0


def load_phase(source: str) -> PolynomialPhase:
    if source.startswith("file:"):
        return load_phase_file(source[5:])
    if source in corpus_names():
        return corpus_phase(source)
    if Path(source).is_file():
        return load_phase_file(source)
    raise PhaseLoadError(f"{source!r} is neither a corpus name nor a readable coefficient file")


def _profile_block(profile: SurfaceProfile) -> dict:
    return {
        "m": format_order(profile.m),
        "n": format_order(profile.n),
        "type": profile.surface_type,
        "r_condition": bool(profile.r_condition),
        "regime": profile.regime,
    }


def _k_table(m, n, r_condition, p_grid) -> List[dict]:
    rows = []
    for p in p_grid:
        res = k_sharp(ExponentQuery(Fraction(p), m, n, r_condition=r_condition))
        rows.append({
            "p": str(res.query.p),
            "k_sharp": None if res.k_p is None else str(res.k_p),
            "regime": res.regime,
            "branch": res.binding_branch,
            "sugimoto_upper": str(res.sugimoto_upper),
            "covered": res.covered,
            "reason": res.reason,
        })
    return rows


def _fit_block(fit) -> dict:
    return {
        "norm_kind": fit.norm_kind,
        "alpha_hat": fit.alpha_hat,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "j_range": list(fit.j_range),
        "predicted_alpha": fit.predicted_alpha,
    }


class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: Dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def write(self):
        self.root.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            target = (self.root / name).resolve()
            if self.root.resolve() not in target.parents:
                raise ConfigError(f"refusing to write outside the output directory: {name}")
            target.write_text(self.files[name], encoding="utf-8", newline="\n")


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the exit status."""
    out = _Outputs(Path(cfg.output_dir))
    out.add("config.ini", config_to_text(cfg, runtime=False))
    summary: dict = {"schema": SUMMARY_SCHEMA, "command": cfg.command, "phase": cfg.phase}
    checks: Dict[str, bool] = {}
    profile = None
    phase = None
    if cfg.phase:
        phase = load_phase(cfg.phase)
        profile = analyze(phase)
        summary["profile"] = _profile_block(profile)
        summary["k_table"] = _k_table(profile.m, profile.n, profile.r_condition, cfg.p_grid)
    handler = _HANDLERS[cfg.command]
    handler(cfg, phase, profile, summary, checks, out)
    summary["checks"] = {k: bool(v) for k, v in sorted(checks.items())}
    summary["passed"] = all(checks.values())
    out.add("summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    out.write()
    return EXIT_OK if summary["passed"] else EXIT_CHECKS


def _classify(cfg, phase, profile, summary, checks, out):
    out.add("profile.json", profile.to_text())
    err = profile.reconstruction_error
    summary["reconstruction_error"] = err
    if err is not None:
        checks["reconstruction"] = err < 1e-8


def _exponent(cfg, phase, profile, summary, checks, out):
    if profile is not None:
        m, n, rc = profile.m, profile.n, profile.r_condition
    else:
        m, n, rc = cfg.m, cfg.n, cfg.r_condition
        summary["k_table"] = _k_table(m, n, rc, cfg.p_grid)
    out.add("exponent.csv", exponent_table_csv(m, n, cfg.p_grid, rc))
    summary["orders"] = {"m": format_order(m), "n": format_order(n), "r_condition": rc}
    cross = branch_crossover(m, n) if m is not FLAT else None
    summary["crossover"] = None if cross is None else str(cross)
    results = [k_sharp(ExponentQuery(Fraction(p), m, n, r_condition=rc)) for p in sorted(cfg.p_grid)]
    covered = [r for r in results if r.covered]
    checks["below_class_bound"] = all(r.k_p <= r.sugimoto_upper for r in covered)
    checks["nonincreasing_in_p"] = all(a.k_p >= b.k_p for a, b in zip(covered, covered[1:]))
    checks["zero_at_p2"] = all(r.k_p == 0 for r in covered if r.query.p == 2)


def _decay(cfg, phase, profile, summary, checks, out):
    sweep = sup_decay(phase, profile, cfg.z_box, cfg.js, workers=cfg.workers)
    summary["fit"] = _fit_block(sweep.fit)
    out.add("decay.csv", sweep_to_csv(sweep, cfg.phase))
    if cfg.emit_plots:
        out.add("decay.svg", sweep_to_svg(sweep, f"sup |I|, {cfg.phase}"))
    checks["alpha_within_0.05"] = abs(sweep.fit.alpha_hat - sweep.fit.predicted_alpha) <= DECAY_TOL
    checks["r_squared_0.98"] = sweep.fit.r_squared >= DECAY_R2


def _lq(cfg, phase, profile, summary, checks, out):
    sweep = lq_decay(phase, cfg.q, profile, cfg.z_box, cfg.js, workers=cfg.workers)
    summary["fit"] = _fit_block(sweep.fit)
    summary["note"] = sweep.note
    out.add("lq_decay.csv", sweep_to_csv(sweep, cfg.phase))
    if cfg.emit_plots:
        out.add("lq_decay.svg", sweep_to_svg(sweep, f"{sweep.fit.norm_kind} norm, {cfg.phase}"))
    if sweep.fit.predicted_alpha is not None:
        checks["alpha_at_least_prediction_minus_0.05"] = sweep.fit.alpha_hat >= sweep.fit.predicted_alpha - LQ_SLACK


def _region(cfg, phase, profile, summary, checks, out):
    lines = ["# schema: osclab.region v1", "delta,region,j,ratio"]
    blocks = []
    stats = []
    for delta in cfg.deltas:
        inner, outer = region_probe(phase, delta, profile, cfg.js, z_max=cfg.z_box, workers=cfg.workers)
        for probe in (inner, outer):
            for j, r in zip(probe.js, probe.per_lambda):
                lines.append(f"{delta!r},{probe.region},{j},{r!r}")
            blocks.append({"delta": delta, "region": probe.region, "ratio_stat": probe.ratio_stat,
                           "lambda_spread": probe.variation})
        stats.append(inner.ratio_stat)
        checks[f"inner_spread_below_2_delta_{delta!r}"] = (
            np.isfinite(inner.ratio_stat) and inner.variation < REGION_LAMBDA_SPREAD
        )
    summary["region"] = blocks
    if len(stats) > 1:
        checks["inner_delta_spread_below_10"] = max(stats) / min(stats) < REGION_DELTA_SPREAD
    out.add("region.csv", "\n".join(lines) + "\n")


def _sharpness(cfg, phase, profile, summary, checks, out):
    m, n = profile.m, profile.n
    threshold = predicted_growth(cfg.case, cfg.p, 0, m, n)
    runs = []
    csv_parts = []
    for off in cfg.k_offsets:
        k = threshold + off
        rep = growth_fit(cfg.case, phase, cfg.p, k, m, n, cfg.js, profile=profile, workers=cfg.workers)
        pred = float(rep.predicted_exponent)
        runs.append({
            "k": str(k), "fitted_exponent": rep.fitted_exponent, "predicted_exponent": str(rep.predicted_exponent),
            "nonoscillation_max_phase": rep.nonoscillation_max_phase, "dropped": rep.dropped,
        })
        tag = f"k={k}"
        csv_parts.append(f"# run {tag}\n" + growth_to_csv(rep))
        checks[f"fit_within_0.15_{tag}"] = abs(rep.fitted_exponent - pred) <= GROWTH_TOL
        if abs(pred) >= 0.15:
            checks[f"sign_{tag}"] = rep.sign_agrees
        checks[f"nonoscillation_{tag}"] = rep.nonoscillation_max_phase <= 0.2
        if cfg.emit_plots:
            out.add(f"sharpness_{len(runs)}.svg", growth_to_svg(rep, f"{cfg.case}, {tag}"))
    summary["threshold"] = str(threshold)
    summary["growth"] = runs
    out.add("sharpness.csv", "".join(csv_parts))


def _vdc(cfg, phase, profile, summary, checks, out):
    k = cfg.vdc_order
    lams = [2.0**j for j in cfg.js]

    def amp(x):
        x = np.asarray(x, dtype=float)
        res = np.zeros(x.shape)
        inside = np.abs(x) < 1
        res[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return res

    stat, scaled = vdc_probe_1d(lams, lambda x: x**k, k, amp, dphase1d=lambda x: k * np.abs(x) ** (k - 1))
    lines = ["# schema: osclab.vdc v1", "j,lambda,scaled_modulus"]
    lines += [f"{j},{lam!r},{float(v)!r}" for j, lam, v in zip(cfg.js, lams, scaled)]
    out.add("vdc.csv", "\n".join(lines) + "\n")
    summary["vdc"] = {"order": k, "statistic": stat, "spread": float(scaled.max() / scaled.min())}
    checks["bounded_spread_below_10"] = scaled.max() / scaled.min() <= VDC_SPREAD


_HANDLERS = {
    "classify": _classify,
    "exponent": _exponent,
    "decay": _decay,
    "lq-decay": _lq,
    "region": _region,
    "sharpness": _sharpness,
    "vdc": _vdc,
}


# ---------------------------------------------------------------------------
# argument parsing


def _csv_fracs(text):
    return tuple(Fraction(t.strip()) for t in text.split(",") if t.strip())


def _csv_floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osclab", description="Oscillatory-integral exponent laboratory.")
    parser.add_argument("--version", action="version", version=f"osclab {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--out", dest="output_dir")
    run_p.add_argument("--workers", type=int)

    sub.add_parser("corpus", help="list built-in phases")

    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} experiment")
        p.add_argument("phase", nargs="?" if name in ("exponent", "vdc") else None, default="")
        p.add_argument("--out", dest="output_dir", default="out")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--plots", action="store_true")
        p.add_argument("--j-min", type=int, default=6)
        p.add_argument("--j-max", type=int, default=14)
        p.add_argument("--z-box", type=float, default=0.125)
        p.add_argument("--p-grid", type=_csv_fracs, default=None)
        p.add_argument("--deltas", type=_csv_floats, default=None)
        p.add_argument("--q", type=float, default=None)
        p.add_argument("--m", default=None)
        p.add_argument("--n", default=None)
        p.add_argument("--no-r-condition", action="store_true")
        p.add_argument("--case", default="case_i")
        p.add_argument("--p", type=Fraction, default=Fraction(1))
        p.add_argument("--k-offsets", type=_csv_fracs, default=None)
        p.add_argument("--order", type=int, default=3)
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.cmd == "run":
        cfg = load_config(args.config)
        if args.output_dir:
            cfg = replace(cfg, output_dir=args.output_dir)
        if args.workers:
            cfg = replace(cfg, workers=args.workers)
        return cfg
    kw = dict(
        command=args.cmd, phase=args.phase or "", output_dir=args.output_dir, emit_plots=args.plots,
        workers=args.workers, j_min=args.j_min, j_max=args.j_max, z_box=args.z_box, q=args.q,
        r_condition=not args.no_r_condition, case=args.case, p=args.p, vdc_order=args.order,
    )
    try:
        if args.m is not None:
            kw["m"] = parse_order(args.m)
        if args.n is not None:
            kw["n"] = parse_order(args.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.p_grid is not None:
        kw["p_grid"] = args.p_grid
    if args.deltas is not None:
        kw["deltas"] = args.deltas
    if args.k_offsets is not None:
        kw["k_offsets"] = args.k_offsets
    return ExperimentConfig(**kw)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.cmd == "corpus":
        for name in corpus_names():
            print(f"{name}\t{corpus_phase(name).to_string()}")
        return EXIT_OK
    try:
        cfg = config_from_args(args)
        status = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhaseLoadError as exc:
        print(f"phase load error: {exc}", file=sys.stderr)
        return EXIT_PHASE
    except OsclabError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps({"status": status, "output_dir": cfg.output_dir}))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
