"""
Thermometry from a noise spectrum and coupling calibration
==========================================================

Synthesise an averaged thermal spectrum, fit a Lorentzian and turn the
area back into a temperature.  Then recover the coupling from the slope
of the frequency-noise variance against bath temperature.
"""

# %%
import numpy as np

from backaction import SystemParams, calibrate_coupling, fit_lorentzian, temperature_from_area
from backaction.physics import TWO_PI
from backaction.spectra import (
    linewidth_grid,
    mean_square_displacement,
    synth_spectrum,
    thermal_model,
)

dev = SystemParams.paper_device()
m = dev.mech
grid = linewidth_grid(m.omega_m / TWO_PI, m.gamma_m0 / TWO_PI, 20, 801)
trace = synth_spectrum(thermal_model(grid, 0.050, m.gamma_m0, m, floor=1e-28), grid,
                       n_avg=100, seed=7)

# %%
fit = fit_lorentzian(trace)
print(f"fwhm = {fit.params['fwhm']:.3f} +- {fit.sigmas['fwhm']:.3f} Hz "
      f"(true {m.gamma_m0 / TWO_PI:.3f})")
print(f"T    = {temperature_from_area(fit.params['area'], m) * 1e3:.2f} mK (true 50)")

# %%
# The frequency-noise variance grows linearly with temperature; the
# slope fixes g and the intercept absorbs any constant background.
T = np.linspace(0.050, 0.250, 9)
truth = (dev.coupling.g / TWO_PI) ** 2 * mean_square_displacement(T, m)
rng = np.random.default_rng(1)
cal = calibrate_coupling(T, truth * (1 + 0.05 * rng.standard_normal(T.size)) + 4.0, m)
print(f"g = {cal.g_hz_per_m / 1e12:.2f} +- {cal.sigma_g / TWO_PI / 1e12:.2f} kHz/nm")
print(f"background = {cal.intercept:.1f} Hz^2")
