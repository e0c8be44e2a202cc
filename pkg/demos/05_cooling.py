"""
Sideband cooling versus power
=============================

Sit at the optimal red detuning for each circulating power and track
damping, mode temperature and occupancy, with and without parasitic
heating of the bath.
"""

# %%
import numpy as np

from backaction import SystemParams, cooling_curve, fit_heating_model

dev = SystemParams.paper_device()
powers = np.geomspace(46e-12, 7.3e-6, 6)
c = cooling_curve(powers, dev)
for P, gm, T, n in zip(c.P_c, c.gamma_m, c.T_m, c.m_bar):
    print(f"P_c = {P:.2e} W  gamma_m = {gm:8.2f} Hz  T_m = {T * 1e3:6.2f} mK  m = {n:7.1f}")

# %%
# Radiation damping alone cools in proportion to the damping increase.
# A bath that warms with power and an intrinsic damping that grows with
# temperature can hold the same damping gain to a much smaller cooling
# factor.  Here both targets are met together at 22 uW.
P_top = 2.2e-5
h = fit_heating_model(P_top, dev, damping_ratio=30, cooling_ratio=5)
print(f"alpha = {h.alpha:.3e} K/W  eta = {h.eta:.2f} /K")
low, top = cooling_curve([46e-12], dev), cooling_curve([P_top], dev, heating=h)
print(f"damping x{top.gamma_m[0] / low.gamma_m[0]:.1f}  "
      f"temperature /{dev.env.T_0 / top.T_m[0]:.2f}  bath {top.T_0[0] * 1e3:.1f} mK")
