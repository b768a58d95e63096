"""
Small-impulse scaling
=====================

Mass, speed, energy and size follow power laws in the impulse. The window
grows like mu^(1/3), so the discrete problem is exactly scale covariant
and the fitted slopes land on the rational exponents.
"""

# %%
from sadovskii.diagnostics import scaling_study

st = scaling_study([0.0125, 0.025, 0.05, 0.1])
for r in st.rows:
    print(r)

# %%
for k, (c, tol) in st.BANDS.items():
    print(f"{k:7s} slope {st.slopes[k]:.5f}  expected {c:.5f} +/- {tol}")
