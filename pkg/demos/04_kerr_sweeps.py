"""
Constant incident power through a nonlinear cavity
==================================================

A softening Kerr pull drags the cavity resonance down as photons build
up, so the detuning of strongest damping moves with drive power.
"""

# %%
import numpy as np

from backaction import KerrCavity, SystemParams, solve_kerr_occupation
from backaction.experiment import sweep_constant_incident
from backaction.io import load_config

dev = SystemParams.paper_device()
kerr = load_config().kerr
wm, kappa = dev.mech.omega_m, dev.cavity.kappa
grid = np.linspace(-3, -0.01, 801) * wm

# %%
for P in np.geomspace(16e-9, 16e-9 * 10**0.8, 8):
    k = sweep_constant_incident(P, grid, dev, kerr).argmax_damping()
    lin = sweep_constant_incident(P, grid, dev, KerrCavity.linear(dev.cavity)).argmax_damping()
    print(f"P_i = {P * 1e9:5.1f} nW  peak damping at {k / 1e6:+.3f} MHz (linear {lin / 1e6:+.3f})")

# %%
# Far enough below resonance the self-consistency has three roots.  The
# solver keeps the branch reached by ramping the drive up from zero.
for P in (1e-10, 3e-10, 1e-9):
    sol = solve_kerr_occupation(P, -3 * kappa, kerr)
    print(f"P_i = {P:.0e} W  n = {sol.n_bar:.3e}  multistable = {sol.multistable}  "
          f"roots = {len(sol.roots)}")
