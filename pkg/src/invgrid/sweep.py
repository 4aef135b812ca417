"""GFM gain grids, seeded sampling and parallel stability sweeps.

A sweep evaluates every (sample, operating condition, line model) cell
independently: build the case, assemble, find the equilibrium, linearize,
eigensolve.  Cells that fail are recorded with a status and kept out of the
summary statistics.
"""
from __future__ import annotations

import copy
import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .cases import build_wscc9, condition_for
from .core import ConfigurationError, NetworkCase
from .dae import DEFAULT_POLICY, EquilibriumError, NumericPolicy, PowerFlowError, assemble, find_equilibrium, solve_powerflow
from .inverters import GFM_GAIN_RANGES, GflGains, GfmGains
from .lines import LineModel
from .machine import InitializationError
from .smallsignal import DegeneracyError, EigenSolveError, eigensolve, linearize

__all__ = [
    "GAIN_NAMES",
    "INNER_LOOP_GAINS",
    "DEFAULT_LEVELS",
    "DEFAULT_CONDITIONS",
    "RatioRule",
    "default_rules",
    "GainGrid",
    "build_grid",
    "gfl_rule_diagnostics",
    "SweepPlan",
    "sample_plan",
    "SweepResultRow",
    "run_cell",
    "run_sweep",
    "summarize",
    "correlate_gain",
    "write_results_csv",
    "read_results_csv",
    "write_summary_json",
]

GAIN_NAMES = tuple(GFM_GAIN_RANGES)
INNER_LOOP_GAINS = ("k_pv", "k_iv", "k_pc", "k_ic")

# 5*5*5*2*4 outer/voltage levels times 7 admissible current-loop pairs = 7000
DEFAULT_LEVELS = {
    "t_a": 5,
    "k_d": 5,
    "k_q": 5,
    "k_pv": 2,
    "k_iv": 4,
    "k_pc": 3,
    "k_ic": 7,
}

DEFAULT_CONDITIONS = tuple((c, s) for s in (0.4, 1.0) for c in (1, 2, 3, 4))


@dataclass(frozen=True)
class RatioRule:
    """Admit a combination when ``gains[lhs] >= factor * gains[rhs]`` (``>`` if strict)."""

    lhs: str
    rhs: str
    factor: float
    strict: bool = False

    def admits(self, gains: dict) -> bool:
        bound = self.factor * gains[self.rhs]
        return gains[self.lhs] > bound if self.strict else gains[self.lhs] >= bound

    def __str__(self) -> str:
        op = ">" if self.strict else ">="
        return f"{self.lhs} {op} {self.factor:g}*{self.rhs}"


def default_rules(current_voltage_ratio: float = 1.0) -> tuple[RatioRule, ...]:
    """Time-scale separation rules for the GFM inner loops.

    Integral gains are at least ten times the proportional gain of the same
    loop; the current-loop proportional gain exceeds ``current_voltage_ratio``
    times the voltage-loop one.  A ratio of 10 empties the swept gain ranges.
    """
    return (
        RatioRule("k_ic", "k_pc", 10.0),
        RatioRule("k_iv", "k_pv", 10.0),
        RatioRule("k_pc", "k_pv", float(current_voltage_ratio), strict=True),
    )


def gfl_rule_diagnostics(gains: GflGains = GflGains()) -> dict[str, bool]:
    """Check the fixed GFL gains against the same integral/proportional separation."""
    g = asdict(gains)
    return {
        str(r): r.admits(g)
        for r in (RatioRule("k_ip", "k_pp", 10.0), RatioRule("k_iq", "k_pq", 10.0),
                  RatioRule("k_ic", "k_pc", 10.0))
    }


def _levels_for(name, spec, ranges) -> tuple[float, ...]:
    if isinstance(spec, int):
        if spec < 1:
            raise ConfigurationError(f"{name}: level count must be positive")
        lo, hi = ranges[name]
        if spec == 1:
            return (0.5 * (lo + hi),)
        return tuple(float(v) for v in np.linspace(lo, hi, spec))
    values = tuple(float(v) for v in spec)
    if not values:
        raise ConfigurationError(f"{name}: empty level list")
    return values


@dataclass(frozen=True)
class GainGrid:
    levels: dict                     # name -> tuple of values
    rules: tuple
    combinations: tuple = field(repr=False)   # admissible combinations, product order

    @property
    def count(self) -> int:
        return len(self.combinations)

    @property
    def product_size(self) -> int:
        return math.prod(len(v) for v in self.levels.values())

    def gains(self, index: int) -> GfmGains:
        return GfmGains(**dict(zip(GAIN_NAMES, self.combinations[index])))


def build_grid(
    ranges: dict | None = None,
    levels: dict | None = None,
    rules=None,
) -> GainGrid:
    """Cartesian product of per-gain levels filtered by ``rules``.

    ``levels`` maps a gain to a level count (evenly spaced over its range) or
    an explicit sequence of values.
    """
    ranges = dict(GFM_GAIN_RANGES if ranges is None else ranges)
    spec = dict(DEFAULT_LEVELS if levels is None else levels)
    rules = tuple(default_rules() if rules is None else rules)
    lv = {name: _levels_for(name, spec.get(name, 1), ranges) for name in GAIN_NAMES}
    combos = []
    survivors = {str(r): 0 for r in rules}
    for values in itertools.product(*(lv[n] for n in GAIN_NAMES)):
        g = dict(zip(GAIN_NAMES, values))
        ok = True
        for r in rules:
            if r.admits(g):
                survivors[str(r)] += 1
            else:
                ok = False
        if ok:
            combos.append(values)
    if not combos:
        binding = min(survivors, key=survivors.get) if survivors else "none"
        raise ConfigurationError(f"gain grid is empty after filtering; binding rule: {binding}")
    return GainGrid(lv, rules, tuple(combos))


@dataclass(frozen=True)
class SweepPlan:
    samples: tuple                   # (sample_id, GfmGains)
    seed: int
    conditions: tuple                # (case number, load scale)
    line_models: tuple
    n_segments: int = 5
    grid_count: int = 0

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    def cells(self):
        for case, scale in self.conditions:
            for model in self.line_models:
                for sid, gains in self.samples:
                    yield sid, gains, case, scale, model


def sample_plan(
    grid: GainGrid,
    n: int = 1000,
    seed: int = 0,
    conditions=DEFAULT_CONDITIONS,
    line_models=tuple(m.value for m in LineModel),
    n_segments: int = 5,
) -> SweepPlan:
    """Uniform sample of ``n`` grid combinations without replacement."""
    if n < 1 or n > grid.count:
        raise ConfigurationError(f"sample count {n} outside 1..{grid.count}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(grid.count, size=n, replace=False)
    samples = tuple((int(i), grid.gains(int(k))) for i, k in enumerate(picks))
    models = tuple(LineModel(m).value for m in line_models)
    conds = tuple((int(c), float(s)) for c, s in conditions)
    for c, s in conds:
        condition_for(c, s)
    return SweepPlan(samples, int(seed), conds, models, int(n_segments), grid.count)


@dataclass
class SweepResultRow:
    sample_id: int
    case_name: str
    load_scale: float
    line_model: str
    max_real: float
    stable: bool
    status: str
    top_participant: str
    damping_ratio: float
    gains: dict
    wall_time: float = 0.0

    def key(self):
        return (self.case_name, self.load_scale, self.line_model, self.sample_id)


RESULT_COLUMNS = ("sample_id", "case_name", "load_scale", "line_model", "max_real", "stable", "status",
                  "top_participant", "damping_ratio") + GAIN_NAMES


def run_cell(case: NetworkCase, model: str, gains: GfmGains, sample_id: int = 0, *,
             n_segments: int = 5, policy: NumericPolicy = DEFAULT_POLICY, powerflow=None) -> SweepResultRow:
    """Evaluate one sweep cell; failures become rows with a non-``ok`` status."""
    t0 = time.perf_counter()
    status, max_real, top, zeta = "ok", math.nan, "", math.nan
    try:
        sys_ = assemble(case, model, gains, n_segments=n_segments, powerflow=powerflow)
        eq = find_equilibrium(sys_, policy=policy)
        verdict = eigensolve(linearize(sys_, eq, policy), zero_tol=policy.zero_eig_tol)
        max_real = verdict.max_real
        top = verdict.top_participant
        zeta = float(verdict.damping_ratios[verdict.least_stable])
    except (EquilibriumError, InitializationError, PowerFlowError):
        status = "no_equilibrium"
    except DegeneracyError:
        status = "degenerate"
    except EigenSolveError:
        status = "eig_failed"
    cond = case.condition
    return SweepResultRow(
        sample_id=sample_id, case_name=cond.case_name if cond else "", load_scale=cond.load_scale if cond else 1.0,
        line_model=LineModel(model).value, max_real=max_real, stable=bool(max_real < 0), status=status,
        top_participant=top, damping_ratio=zeta, gains=gains.as_dict(),
        wall_time=time.perf_counter() - t0,
    )


def _run_group(args):
    """Worker task: all samples of one (condition, model) pair."""
    case_no, scale, model, samples, n_segments, policy, case_data = args
    data = _template_data(copy.deepcopy(case_data)) if case_data is not None else None
    case = build_wscc9(scale, condition_for(case_no, scale), data=data)
    try:
        pf = solve_powerflow(case)
    except PowerFlowError:
        pf = None
    return [run_cell(case, model, g, sid, n_segments=n_segments, policy=policy, powerflow=pf)
            if pf is not None else _failed_row(case, model, g, sid)
            for sid, g in samples]


def _failed_row(case, model, gains, sid):
    cond = case.condition
    return SweepResultRow(sid, cond.case_name, cond.load_scale, LineModel(model).value, math.nan, False,
                          "no_equilibrium", "", math.nan, gains.as_dict())


def _template_data(d: dict) -> dict:
    # a saved case already carries scaled loads and dispatch; undo the scaling
    cond = d.get("condition") or {}
    s = float(cond.get("load_scale", 1.0)) or 1.0
    for bus in d["buses"]:
        bus["load_p"] = bus["load_p"] / s
        bus["load_q"] = bus["load_q"] / s
    return d


def run_sweep(plan: SweepPlan, case_template: NetworkCase | None = None, *, workers: int = 1,
              policy: NumericPolicy = DEFAULT_POLICY, progress=None) -> list[SweepResultRow]:
    """Evaluate every cell of ``plan``; rows come back in canonical order.

    ``case_template`` replaces the shipped 9-bus data (loads are rescaled per
    condition).  Results do not depend on ``workers``.
    """
    from .cases import case_to_dict
    data = case_to_dict(case_template) if case_template is not None else None
    tasks = [(c, s, m, plan.samples, plan.n_segments, policy, data)
             for c, s in plan.conditions for m in plan.line_models]
    rows: list[SweepResultRow] = []
    if workers <= 1:
        for t in tasks:
            rows.extend(_run_group(t))
            if progress:
                progress(len(rows))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_group, tasks):
                rows.extend(chunk)
                if progress:
                    progress(len(rows))
    rows.sort(key=SweepResultRow.key)
    return rows


def _stats(values) -> dict:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return {"min": None, "q1": None, "median": None, "q3": None, "max": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"min": float(v[0]), "q1": float(q1), "median": float(med), "q3": float(q3), "max": float(v[-1])}


def summarize(rows) -> list[dict]:
    """Boxplot statistics of ``max_real`` per (case, load scale, line model)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.case_name, r.load_scale, r.line_model), []).append(r)
    out = []
    for (case, scale, model) in sorted(groups):
        g = groups[(case, scale, model)]
        ok = [r.max_real for r in g if r.status == "ok"]
        rec = {"case_name": case, "load_scale": scale, "line_model": model, "count": len(ok),
               "failures": len(g) - len(ok), "unstable": sum(1 for x in ok if x >= 0)}
        rec.update(_stats(ok))
        out.append(rec)
    return out


def correlate_gain(rows, gain_name: str, min_rows: int = 30) -> dict:
    """Spearman correlation of one gain with ``max_real`` per (case, load scale, model)."""
    if gain_name not in GAIN_NAMES:
        raise ConfigurationError(f"unknown gain {gain_name!r}")
    groups: dict = {}
    for r in rows:
        if r.status == "ok":
            groups.setdefault((r.case_name, r.load_scale, r.line_model), []).append(r)
    out = {}
    for key in sorted(groups):
        g = groups[key]
        if len(g) < min_rows:
            out[key] = {"rho": math.nan, "n": len(g), "flagged": True}
            continue
        x = [r.gains[gain_name] for r in g]
        y = [r.max_real for r in g]
        rho = stats.spearmanr(x, y).statistic if np.ptp(x) > 0 else math.nan
        out[key] = {"rho": float(rho), "n": len(g), "flagged": False}
    return out


def write_results_csv(path, rows) -> None:
    """Canonically sorted result table; floats written with ``repr`` for exact round trips."""
    rows = sorted(rows, key=SweepResultRow.key)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([r.sample_id, r.case_name, repr(r.load_scale), r.line_model, repr(r.max_real),
                        int(r.stable), r.status, r.top_participant, repr(r.damping_ratio)]
                       + [repr(r.gains[k]) for k in GAIN_NAMES])


def write_timings_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "case_name", "load_scale", "line_model", "wall_time"])
        for r in sorted(rows, key=SweepResultRow.key):
            w.writerow([r.sample_id, r.case_name, r.load_scale, r.line_model, f"{r.wall_time:.6f}"])


def read_results_csv(path) -> list[SweepResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepResultRow(
                sample_id=int(rec["sample_id"]), case_name=rec["case_name"], load_scale=float(rec["load_scale"]),
                line_model=rec["line_model"], max_real=float(rec["max_real"]), stable=rec["stable"] == "1",
                status=rec["status"], top_participant=rec["top_participant"],
                damping_ratio=float(rec["damping_ratio"]), gains={k: float(rec[k]) for k in GAIN_NAMES},
            ))
    return rows


def write_summary_json(path, rows, plan: SweepPlan | None = None, policy: NumericPolicy = DEFAULT_POLICY,
                       extra: dict | None = None) -> None:
    doc = {"summary": summarize(rows), "numeric_policy": policy.as_dict()}
    if plan is not None:
        doc["plan"] = {"seed": plan.seed, "samples": plan.sample_count, "grid_count": plan.grid_count,
                       "conditions": [list(c) for c in plan.conditions], "line_models": list(plan.line_models),
                       "n_segments": plan.n_segments}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
