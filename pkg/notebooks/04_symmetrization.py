"""
Steiner symmetrization never lowers the energy
==============================================

Rearranging each row into a centred, decreasing profile keeps mass and
impulse and can only raise the interaction energy.
"""

# %%
import numpy as np

from sadovskii.grid import PatchDensity, build_grid, mass, impulse
from sadovskii.greens import energy
from sadovskii.symmetry import steiner_symmetrize

g = build_grid(64, 32, 1.0, 1.0)
rng = np.random.default_rng(0)

gains = []
for _ in range(200):
    w = PatchDensity(g, rng.random(g.shape) * (rng.random(g.shape) < rng.random()))
    s = steiner_symmetrize(w)
    assert np.isclose(mass(s), mass(w), rtol=1e-15)
    assert np.isclose(impulse(s), impulse(w), rtol=1e-15)
    gains.append(energy(s) - energy(w))

gains = np.array(gains)
print("min gain", gains.min(), " median gain", np.median(gains))

# %%
# A single row, before and after.
v = np.zeros(g.shape)
v[3, 5:12] = 1.0
v[3, 40] = 0.5
print(np.flatnonzero(steiner_symmetrize(PatchDensity(g, v)).values[3]))
