"""
Randomized GFM gain sweep
=========================

Sample GFM control gains from the filtered grid and record the real part
of the least stable eigenvalue for each operating condition and line
model.  A reduced sweep keeps the run short; raise ``SAMPLES`` for the full
study.
"""

from pathlib import Path

from invgrid.sweep import (
    INNER_LOOP_GAINS, build_grid, correlate_gain, run_sweep, sample_plan, summarize, write_results_csv,
)

SAMPLES = 30
out = Path("sweep_demo")
out.mkdir(exist_ok=True)

grid = build_grid()
print(f"{grid.count} admissible gain combinations out of {grid.product_size}")

plan = sample_plan(grid, SAMPLES, seed=1, conditions=[(1, 0.4), (2, 0.4), (2, 1.0)],
                   line_models=["statpi", "dynpi"])
rows = run_sweep(plan, workers=1)
write_results_csv(out / "results.csv", rows)

# %%
# Distribution of max real part per group
for rec in summarize(rows):
    print(f"{rec['case_name']} load {rec['load_scale']:.1f} {rec['line_model']:6s} "
          f"median {rec['median']:+.4f}  IQR [{rec['q1']:+.4f}, {rec['q3']:+.4f}]  unstable {rec['unstable']}")

# %%
# Which gains move the least stable mode?  Spearman correlation per group.
for gain in ("t_a", "k_d", "k_q") + INNER_LOOP_GAINS:
    res = correlate_gain(rows, gain, min_rows=20)
    print(gain.ljust(5), "  ".join(f"{k[0]}/{k[1]}/{k[2]} {v['rho']:+.2f}" for k, v in res.items()))

# %%
# The SVG boxplot needs matplotlib
from invgrid.plots import boxplot_svg  # noqa: E402

boxplot_svg(rows, out / "boxplot.svg")
print("wrote", out / "boxplot.svg")
