"""Command line entry point: ``invgrid {analyze,sweep,freqresp,plot}``.

Exit status is 0 on success, 2 for configuration errors and 3 for I/O errors.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .cases import build_wscc9, case_to_dict, condition_for, load_case
from .core import ConfigurationError
from .dae import DEFAULT_POLICY
from .inverters import GfmGains
from .lines import LineModel, LineRealization, exact_input_impedance, input_impedance
from .smallsignal import analyze, write_eigen_csv
from .sweep import (
    DEFAULT_CONDITIONS, build_grid, default_rules, gfl_rule_diagnostics, read_results_csv, run_sweep,
    sample_plan, write_results_csv, write_summary_json, write_timings_csv,
)

log = logging.getLogger("invgrid")

CONFIG_KEYS = {"case_file", "levels", "current_voltage_ratio", "conditions", "line_models", "segments",
               "samples", "seed", "workers", "gains", "case", "load_scale", "line_model"}

EXIT_CONFIG = 2
EXIT_IO = 3


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    return cfg


def _pick(args, cfg, name, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _template(cfg):
    return load_case(cfg["case_file"]) if cfg.get("case_file") else None


def _case_for(cfg, case_no, scale):
    cond = condition_for(case_no, scale)
    tmpl = _template(cfg)
    if tmpl is None:
        return build_wscc9(scale, cond)
    from .sweep import _template_data
    return build_wscc9(scale, cond, data=_template_data(case_to_dict(tmpl)))


def _parse_gains(items, cfg) -> GfmGains:
    values = GfmGains.midrange().as_dict()
    values.update(cfg.get("gains", {}))
    for item in items or []:
        name, sep, raw = item.partition("=")
        if not sep or name not in values:
            raise ConfigurationError(f"bad --gain {item!r}; expected one of {sorted(values)} as name=value")
        values[name] = float(raw)
    try:
        return GfmGains(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None


def cmd_analyze(args, cfg) -> int:
    case_no = int(_pick(args, cfg, "case", 2))
    scale = float(_pick(args, cfg, "load_scale", 0.4))
    model = LineModel(_pick(args, cfg, "line_model", "statpi"))
    segments = int(_pick(args, cfg, "segments", 5))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gains = _parse_gains(args.gain, cfg)
    case = _case_for(cfg, case_no, scale)
    sys_, eq, jac, verdict = analyze(case, model.value, gains, n_segments=segments)
    ident = f"case{case_no}_{scale:g}_{model.value}"
    write_eigen_csv(out / f"eigs_{ident}.csv", [(ident, model.value, verdict)])
    doc = eq.summary(sys_)
    doc.update({
        "states": sys_.n, "algebraic": sys_.m, "gy_condition": jac.gy_condition,
        "max_real": verdict.max_real, "stable": verdict.stable,
        "least_stable": [verdict.eigenvalues[verdict.least_stable].real,
                         verdict.eigenvalues[verdict.least_stable].imag],
        "dominant": [list(p) for p in verdict.dominant], "zero_mode_flag": verdict.zero_mode_flag,
        "gains": gains.as_dict(), "numeric_policy": DEFAULT_POLICY.as_dict(),
    })
    (out / f"equilibrium_{ident}.json").write_text(json.dumps(doc, indent=2))
    print(f"{ident}: n={sys_.n} m={sys_.m} max_real={verdict.max_real:.6g} "
          f"stable={verdict.stable} top={verdict.top_participant}")
    return 0


def cmd_sweep(args, cfg) -> int:
    samples = int(_pick(args, cfg, "samples", 1000))
    seed = int(_pick(args, cfg, "seed", 0))
    workers = int(_pick(args, cfg, "workers", 1))
    segments = int(_pick(args, cfg, "segments", 5))
    ratio = float(cfg.get("current_voltage_ratio", 1.0))
    grid = build_grid(levels=cfg.get("levels"), rules=default_rules(ratio))
    conditions = [tuple(c) for c in cfg.get("conditions", DEFAULT_CONDITIONS)]
    if args.case is not None:
        conditions = [c for c in conditions if c[0] == args.case] or [(args.case, 0.4), (args.case, 1.0)]
    if args.load_scale is not None:
        conditions = sorted({(c, args.load_scale) for c, _ in conditions})
    models = cfg.get("line_models", [m.value for m in LineModel])
    if args.line_model is not None:
        models = [args.line_model]
    plan = sample_plan(grid, samples, seed, conditions, models, segments)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("grid: %d admissible of %d; %d cells", grid.count, grid.product_size,
             plan.sample_count * len(plan.conditions) * len(plan.line_models))
    rows = run_sweep(plan, _template(cfg), workers=workers)
    write_results_csv(out / "results.csv", rows)
    write_timings_csv(out / "timings.csv", rows)
    write_summary_json(out / "summary.json", rows, plan, extra={
        "grid": {"admissible": grid.count, "product": grid.product_size,
                 "rules": [str(r) for r in grid.rules]},
        "gfl_rule_check": gfl_rule_diagnostics(),
    })
    if args.plot:
        from .plots import boxplot_svg
        boxplot_svg(rows, out / "boxplot.svg")
    failed = sum(1 for r in rows if r.status != "ok")
    print(f"{len(rows)} cells, {failed} failed; results in {out}")
    return 0


def cmd_freqresp(args, cfg) -> int:
    case = _case_for(cfg, int(_pick(args, cfg, "case", 2)), 1.0)
    segments = int(_pick(args, cfg, "segments", 5))
    branches = {b.name or f"{b.from_bus}-{b.to_bus}": b for b in case.branches}
    name = args.branch or max(branches, key=lambda k: branches[k].length_km)
    if name not in branches:
        raise ConfigurationError(f"unknown branch {name!r}; choose from {sorted(branches)}")
    br = branches[name]
    models = [args.line_model] if args.line_model else [m.value for m in LineModel]
    f0 = case.base.omega_b / (2 * math.pi)
    freqs = np.geomspace(args.fmin, args.fmax, args.points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "freqresp.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "line_model", "freq_hz", "z_abs", "z_arg", "z_re", "z_im",
                    "exact_abs", "exact_arg"])
        for m in models:
            real = LineRealization.from_branch(br, m, segments)
            for f in freqs:
                w_pu = f / f0
                z = input_impedance(real, w_pu, case.base.omega_b)
                ex = exact_input_impedance(complex(br.r_km, w_pu * br.l_km), 1j * w_pu * br.c_km, br.length_km)
                w.writerow([name, m, repr(float(f)), repr(abs(z)), repr(cmath.phase(z)), repr(z.real), repr(z.imag),
                            repr(abs(ex)), repr(cmath.phase(ex))])
    print(f"open-circuit input impedance of {name} written to {out / 'freqresp.csv'}")
    return 0


def cmd_plot(args, cfg) -> int:
    from .plots import boxplot_svg, eigen_scatter_svg
    out = Path(args.out)
    results = Path(args.results) if args.results else out / "results.csv"
    made = []
    if results.exists():
        boxplot_svg(read_results_csv(results), out / "boxplot.svg")
        made.append("boxplot.svg")
    eigs = sorted(out.glob("eigs_*.csv"))
    if eigs:
        eigen_scatter_svg(eigs, out / "eigs.svg", xlim=(args.xmin, args.xmax) if args.xmin is not None else None)
        made.append("eigs.svg")
    if not made:
        raise FileNotFoundError(f"nothing to plot in {out}")
    print("wrote " + ", ".join(made))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invgrid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--case", type=int, choices=(1, 2, 3, 4))
        sp.add_argument("--load-scale", type=float)
        sp.add_argument("--line-model", choices=[m.value for m in LineModel])
        sp.add_argument("--segments", type=int)

    a = sub.add_parser("analyze", help="small-signal analysis of a single configuration")
    common(a)
    a.add_argument("--gain", action="append", metavar="NAME=VALUE", help="override a GFM gain")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="randomized GFM gain sweep")
    common(s)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--plot", action="store_true", help="also write boxplot.svg")
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("freqresp", help="open-circuit input impedance of the line models")
    common(f)
    f.add_argument("--branch")
    f.add_argument("--fmin", type=float, default=1.0)
    f.add_argument("--fmax", type=float, default=5000.0)
    f.add_argument("--points", type=int, default=200)
    f.set_defaults(func=cmd_freqresp)

    pl = sub.add_parser("plot", help="SVG figures from earlier outputs")
    common(pl)
    pl.add_argument("--results", help="results.csv (default: <out>/results.csv)")
    pl.add_argument("--xmin", type=float)
    pl.add_argument("--xmax", type=float)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args.config)
        if args.segments is not None and args.segments < 1:
            raise ConfigurationError("--segments must be >= 1")
        return args.func(args, cfg)
    except (ConfigurationError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
