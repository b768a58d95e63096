"""
Identities a maximiser must satisfy
===================================

A converged patch is a level set of psi - W x2, so several quantities
that are computed in unrelated ways have to agree.
"""

# %%
import numpy as np

from sadovskii import diagnostics as D
from sadovskii.solver import SolverConfig, solve

reps = {n: solve(SolverConfig(mu=0.05, n1=n, n2=n // 2)) for n in (64, 128, 256)}

# %%
# Virial-type balance between energy, speed and impulse. The residual
# falls with resolution.
for n, rep in reps.items():
    print(n, "pohozaev residual", D.pohozaev_residual(rep.patch, rep.multipliers, rep.psi))

# %%
# Three routes to the speed: the multiplier, the double integral over the
# patch, and 4E/(3 mu).
rep = reps[128]
print("multiplier ", rep.multipliers.W)
print("formula    ", D.speed_formula(rep.patch))
print("from energy", 4 * rep.energy / (3 * rep.config.mu))

# %%
# The fluid on the axis under the dipole moves faster than twice the
# translation speed.
print("u(0,0)/2W - 1 =", D.central_speed_margin(rep.patch, rep.multipliers))

# %%
# Axis velocity: the closed arctan form from the row half-widths against
# direct quadrature.
b = D.boundary_extract(rep.patch, rep.multipliers, rep.psi)
hs = np.linspace(0, 1.2 * b.s.max(), 20)
print("max relative gap", D.axis_profile_check(rep.patch, b, hs).max())
