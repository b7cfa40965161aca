"""Command-line surface: estimate | simulate | plot.

Every command reads an optional JSON config, applies flag overrides, writes
its artifacts under --out, and echoes the effective configuration (with the
run timestamp confined to a metadata field) for exact reproduction.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dr_core, frequentist, nuisance, simulation
from .data_model import FULL_REUSE, load_csv, trim_by_overlap
from .errors import (ConfigurationError, DegenerateSampleError, DrBayesError,
                     FailureBudgetExceeded, NumericError, ParseError,
                     SchemaError, ValidationError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_BUDGET = 5


@dataclass
class RunConfig:
    """Effective settings of one CLI invocation; every field has a default."""

    functional: str = "ATE"
    variant: str = "doubly-robust"
    B: int = 1000
    alpha: float = 0.05
    c_sigma: float = 1.0
    trim_lo: float = 0.05
    trim_hi: float = 0.95
    trim: bool = True
    split_mode: str = FULL_REUSE
    swap_split: bool = False
    seed: int = 0
    hyperopt_budget: int = 600
    hyperopt_starts: int = 3
    share_lengthscales: bool = False
    propensity_kind: str = "logistic-regression"
    # simulate-only settings
    design: str = "I"
    n: int = 250
    p: int = 15
    replications: int = 100
    methods: list = field(default_factory=lambda: ["doubly-robust"])
    c_sigma_sweep: list = field(default_factory=list)
    n_jobs: int = 1

    def proc_config(self, c_sigma=None) -> dr_core.ProcedureConfig:
        return dr_core.ProcedureConfig(
            functional=self.functional, variant=self.variant, B=self.B,
            alpha=self.alpha,
            c_sigma=self.c_sigma if c_sigma is None else c_sigma,
            split_mode=self.split_mode, swap_split=self.swap_split,
            seed=self.seed, hyperopt_budget=self.hyperopt_budget,
            hyperopt_starts=self.hyperopt_starts,
            share_lengthscales=self.share_lengthscales,
            propensity_kind=self.propensity_kind)


def _load_config(path) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    raw.pop("metadata", None)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    return replace(cfg, **raw)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            updates[f.name] = v
    return replace(cfg, **updates)


def _echo_config(cfg: RunConfig, out: Path) -> None:
    record = asdict(cfg)
    record["metadata"] = {
        "generated_at": datetime.now(timezone.utc).isoformat()}
    with open(out / "effective_config.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")


def cmd_estimate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_csv(args.data, args.schema)

    trim_info = {"applied": False}
    if cfg.trim and cfg.functional in ("ATE", "MAR"):
        pm = nuisance.fit_propensity(data, kind=cfg.propensity_kind)
        pscores = pm.evaluate(data.x)
        data, kept = trim_by_overlap(data, pscores, cfg.trim_lo, cfg.trim_hi)
        trim_info = {"applied": True, "bounds": [cfg.trim_lo, cfg.trim_hi],
                     "kept": int(kept.size)}

    draws, summary, diagnostics = dr_core.run_procedure(data, cfg.proc_config())

    comparators = {}
    if cfg.functional == "ATE":
        pm = nuisance.fit_propensity(data, kind=cfg.propensity_kind)
        gamma = nuisance.riesz_ate(pm).with_sup_bound(data)
        spec_dict = diagnostics["kernel"]
        from .kernel import KernelSpec
        m_hat = nuisance.fit_pilot_outcome(
            data, KernelSpec.from_json_dict(spec_dict))
        for name, fn in (("aipw", frequentist.aipw), ("plug-in", None)):
            est = frequentist.aipw(data, m_hat, gamma, cfg.alpha) \
                if name == "aipw" else frequentist.plug_in(data, m_hat, cfg.alpha)
            comparators[name] = json.loads(est.to_json())

    dr_core.export_draws_csv(draws, out / "draws.csv")
    dr_core.export_summary_json(
        summary, out / "summary.json",
        extra={"variant": cfg.variant, "functional": cfg.functional,
               "trimming": trim_info, "diagnostics": _plain(diagnostics),
               "comparators": comparators})
    _echo_config(cfg, out)
    print(f"{cfg.variant} {cfg.functional}: {summary.point:.4f} "
          f"[{summary.lower:.4f}, {summary.upper:.4f}]")
    return EXIT_OK


def _plain(obj):
    """JSON-serializable copy of a diagnostics mapping."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (bool, int, float, str, type(None))):
        return obj
    return repr(obj)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.replications < 1:
        raise ConfigurationError("replications must be >= 1")
    spec = simulation.DesignSpec(cfg.design, cfg.n, cfg.p, seed=cfg.seed)
    sweep = cfg.c_sigma_sweep or [cfg.c_sigma]

    sections = []
    rows = []
    for c_sigma in sweep:
        mc_cfg = simulation.MCConfig(proc=cfg.proc_config(c_sigma=c_sigma),
                                     n_jobs=cfg.n_jobs)
        report = simulation.run_mc(spec, cfg.methods, cfg.replications,
                                   alpha=cfg.alpha, config=mc_cfg)
        sections.append(f"c_sigma={c_sigma}\n{report.to_text()}")
        for r in report.rows:
            rows.append([c_sigma, r.method, r.bias, r.cp, r.cp_se, r.cil,
                         r.replications, r.successes, r.failures])

    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c_sigma", "method", "bias", "cp", "cp_se", "cil",
                         "replications", "successes", "failures"])
        writer.writerows(rows)
    text = "\n\n".join(sections) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    _echo_config(cfg, out)
    print(text)
    return EXIT_OK


def _read_draw_values(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "value" not in reader.fieldnames:
            raise ParseError(f"{path}: missing 'value' column")
        try:
            values = [float(row["value"]) for row in reader]
        except (TypeError, ValueError):
            raise ParseError(f"{path}: non-numeric draw value") from None
    if not values:
        raise ValidationError(f"{path}: no draws")
    return np.asarray(values)


def cmd_plot(args) -> int:
    a = _read_draw_values(args.draws[0])
    b = _read_draw_values(args.draws[1])
    svg = histogram_svg(a, b, labels=(Path(args.draws[0]).stem,
                                      Path(args.draws[1]).stem),
                        reference=args.ref, bins=args.bins)
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def histogram_svg(a: np.ndarray, b: np.ndarray, labels=("a", "b"),
                  reference: float = None, bins: int = 40,
                  width: int = 800, height: int = 500) -> str:
    """Overlaid histogram of two draw samples as a standalone SVG."""
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if reference is not None:
        lo, hi = min(lo, reference), max(hi, reference)
    if hi == lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    ha, _ = np.histogram(a, bins=edges)
    hb, _ = np.histogram(b, bins=edges)
    peak = max(ha.max(), hb.max(), 1)
    ml, mr, mt, mb = 60, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - lo) / (hi - lo) * pw

    def sy(c):
        return mt + ph - c / peak * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for counts, color in ((ha, "#1f77b4"), (hb, "#d62728")):
        for i, c in enumerate(counts):
            if c == 0:
                continue
            x0, x1 = sx(edges[i]), sx(edges[i + 1])
            y = sy(c)
            parts.append(f'<rect x="{x0:.2f}" y="{y:.2f}" '
                         f'width="{x1 - x0:.2f}" height="{mt + ph - y:.2f}" '
                         f'fill="{color}" fill-opacity="0.45"/>')
    if reference is not None:
        xr = sx(reference)
        parts.append(f'<line x1="{xr:.2f}" y1="{mt}" x2="{xr:.2f}" '
                     f'y2="{mt + ph}" stroke="black" stroke-width="2" '
                     f'stroke-dasharray="6,4"/>')
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" '
                 f'y2="{mt + ph}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" '
                 f'stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        parts.append(f'<text x="{sx(v):.2f}" y="{height - 20}" '
                     f'text-anchor="middle" font-size="14">{v:.3f}</text>')
    parts.append(f'<text x="{ml + pw / 2}" y="{height - 4}" '
                 f'text-anchor="middle" font-size="14">draw value</text>')
    parts.append(f'<text x="16" y="{mt + ph / 2}" font-size="14" '
                 f'transform="rotate(-90 16 {mt + ph / 2})" '
                 f'text-anchor="middle">count</text>')
    for i, (label, color) in enumerate(zip(labels, ("#1f77b4", "#d62728"))):
        y = mt + 10 + 22 * i
        parts.append(f'<rect x="{ml + pw - 160}" y="{y - 11}" width="14" '
                     f'height="14" fill="{color}" fill-opacity="0.45"/>')
        parts.append(f'<text x="{ml + pw - 140}" y="{y}" '
                     f'font-size="14">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drbayes",
        description="Doubly robust Bayesian treatment-effect estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a functional on CSV data")
    est.add_argument("--data", required=True)
    est.add_argument("--schema", required=True,
                     help="JSON file naming the y/d/covariate columns")
    est.add_argument("--config", default=None)
    est.add_argument("--out", required=True)
    est.add_argument("--functional", choices=["ATE", "APE", "AD", "MAR"])
    est.add_argument("--variant",
                     choices=["uncorrected", "prior-corrected", "doubly-robust"])
    est.add_argument("--B", type=int)
    est.add_argument("--alpha", type=float)
    est.add_argument("--c-sigma", dest="c_sigma", type=float)
    est.add_argument("--trim-lo", dest="trim_lo", type=float)
    est.add_argument("--trim-hi", dest="trim_hi", type=float)
    est.add_argument("--no-trim", dest="trim", action="store_const", const=False)
    est.add_argument("--split-mode", dest="split_mode",
                     choices=["full-reuse", "half-split"])
    est.add_argument("--swap-split", dest="swap_split", action="store_const",
                     const=True)
    est.add_argument("--seed", type=int)
    est.add_argument("--hyperopt-budget", dest="hyperopt_budget", type=int)
    est.add_argument("--propensity-kind", dest="propensity_kind",
                     choices=["logistic-regression", "gp-classifier"])
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="Monte Carlo benchmark tables")
    sim.add_argument("--config", default=None)
    sim.add_argument("--out", required=True)
    sim.add_argument("--design", choices=["I", "II"])
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--B", type=int)
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--methods", nargs="+")
    sim.add_argument("--c-sigma", dest="c_sigma", type=float)
    sim.add_argument("--c-sigma-sweep", dest="c_sigma_sweep", nargs="+",
                     type=float)
    sim.add_argument("--split-mode", dest="split_mode",
                     choices=["full-reuse", "half-split"])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--hyperopt-budget", dest="hyperopt_budget", type=int)
    sim.add_argument("--n-jobs", dest="n_jobs", type=int)
    sim.set_defaults(func=cmd_simulate)

    plot = sub.add_parser("plot", help="overlaid histogram of two draw files")
    plot.add_argument("--draws", nargs=2, required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--ref", type=float, default=None)
    plot.add_argument("--bins", type=int, default=40)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, OSError, SchemaError, ParseError,
            ValidationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FailureBudgetExceeded as exc:
        print(f"failure budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NumericError, DegenerateSampleError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
