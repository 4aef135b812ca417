"""
Small-signal analysis of one operating point
=============================================

Build the modified 9-bus case, find its equilibrium under the dynamic pi
line model and look at the least damped modes.
"""

import numpy as np

from invgrid import CASES, GfmGains, build_wscc9
from invgrid.smallsignal import analyze

# 40 % load, GFM and GFL each carrying their Case-2 share of the demand
case = build_wscc9(0.4, CASES[2])
gains = GfmGains.midrange()
sys_, eq, jac, verdict = analyze(case, "dynpi", gains)
print(f"{sys_.n} states, {sys_.m} algebraic variables, residual {eq.residual_norm:.1e}")

# %%
# Operating point: bus voltages and what each device delivers
for rec in eq.summary(sys_)["buses"]:
    print(f"bus {rec['bus']}: |v| = {rec['v']:.4f}, angle = {np.degrees(rec['theta']):7.3f} deg")
for name, s in eq.device_power.items():
    print(f"{name:6s} p = {s.real:+.4f}  q = {s.imag:+.4f}")

# %%
# The eight rightmost eigenvalues with their leading participants
lam = verdict.eigenvalues
for i in np.argsort(-lam.real)[:8]:
    top = ", ".join(f"{n} {p:.2f}" for n, p in verdict.top_participants(i, 3))
    print(f"{lam[i].real:9.4f} {lam[i].imag:+9.4f}j   zeta {verdict.damping_ratios[i]:.3f}   {top}")

print("stable" if verdict.stable else "UNSTABLE", "max real part", verdict.max_real)
