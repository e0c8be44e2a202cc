"""
Radiation-pressure damping and the optical spring
=================================================

Evaluate the closed-form backaction rates for the bundled device and
look at how they depend on detuning.
"""

# %%
import numpy as np

from backaction import SystemParams, phonon_occupancy, sideband_resolution
from backaction.experiment import sweep_constant_circulating
from backaction.physics import TWO_PI

dev = SystemParams.paper_device()
wm, kappa = dev.mech.omega_m, dev.cavity.kappa
print(f"omega_m / kappa      = {sideband_resolution(wm, kappa):.3f}")
print(f"x_zp                 = {dev.x_zp:.3e} m")
print(f"thermal quanta 50 mK = {phonon_occupancy(0.050, wm):.1f}")

# %%
# Hold the circulating power fixed and step the detuning across both
# sidebands.  Red detuning adds damping, blue detuning removes it.
sweep = sweep_constant_circulating(9e-7, np.linspace(-2, 2, 9) * wm, dev)
for row in sweep.rows():
    print(f"{row['detuning'] / 1e6:+6.2f} MHz  gamma_m = {row['gamma_m']:7.3f} Hz  "
          f"shift = {row['Omega']:+7.3f} Hz")

# %%
# The blue-side damping crosses zero just above 900 nW for this quality
# factor; past that point the mode self-oscillates and thermometry stops.
for P in (9e-7, 1.2e-6):
    s = sweep_constant_circulating(P, [wm], dev)
    print(f"P_c = {P * 1e9:6.0f} nW  gamma_m(+omega_m) = {s.gamma_m[0]:+.3f} Hz  "
          f"regenerative = {bool(s.regenerative[0])}")
print(f"intrinsic linewidth = {dev.mech.gamma_m0 / TWO_PI:.3f} Hz")
