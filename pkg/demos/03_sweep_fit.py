"""
Recovering the circulating power from a detuning sweep
======================================================

Fit damping and frequency shift together with the circulating power as
the only unknown.
"""

# %%
import numpy as np

from backaction import SystemParams, SweepPoint, fit_detuning_sweep
from backaction.experiment import sweep_constant_circulating

dev = SystemParams.paper_device()
wm = dev.mech.omega_m
s = sweep_constant_circulating(9e-7, np.linspace(-2, 2, 161) * wm, dev)

# %%
# Add measurement scatter comparable to a linewidth fit on each point.
rng = np.random.default_rng(3)
points = [SweepPoint(d, g + 0.3 * rng.normal(), o + 0.1 * rng.normal())
          for d, g, o in zip(s.detuning, s.gamma_m, s.Omega)]
fit = fit_detuning_sweep(points, dev)
print(f"P_c = {fit.params['P_c'] * 1e9:.1f} +- {fit.sigmas['P_c'] * 1e9:.1f} nW (true 900)")

# %%
# Freeing the intrinsic damping costs little precision when both
# sidebands are covered.
fit2 = fit_detuning_sweep(points, dev, free_gamma_m0=True)
print(f"P_c = {fit2.params['P_c'] * 1e9:.1f} nW, gamma_m0 = {fit2.params['gamma_m0']:.3f} Hz")
