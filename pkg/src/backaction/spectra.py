"""Thermal-motion spectra, mechanical response and seeded spectrum synthesis.

PSDs are one-sided and normalised so that integrating over ordinary
frequency (``d omega / 2 pi``) gives the variance.  Arguments named
``omega`` are angular; :class:`SpectrumTrace` grids are in Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .physics import CODATA, MechanicalParams, PhysicalConstants, TWO_PI

RNG_ALGORITHM = "numpy.random.PCG64"

UNIT_TAGS = {"displacement": "m^2/Hz", "cavity_frequency": "Hz^2/Hz"}


@dataclass
class SpectrumTrace:
    freq_grid: np.ndarray
    psd: np.ndarray
    unit_tag: str = "displacement"
    n_avg: int = 1
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq_grid = np.asarray(self.freq_grid, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.freq_grid.ndim != 1 or self.freq_grid.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if self.psd.shape != self.freq_grid.shape:
            raise ValueError("psd and frequency grid lengths differ")
        if np.any(np.diff(self.freq_grid) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(self.psd < 0):
            raise ValueError("psd values must be non-negative")
        if self.unit_tag not in UNIT_TAGS:
            raise ValueError(f"unknown unit tag {self.unit_tag!r}")
        if int(self.n_avg) < 1:
            raise ValueError("n_avg must be >= 1")
        self.n_avg = int(self.n_avg)

    @property
    def units(self) -> str:
        return UNIT_TAGS[self.unit_tag]


@dataclass(frozen=True)
class NoiseModel:
    """White detection floor that scales inversely with circulating power."""

    imprecision_ref: float
    P_ref: float

    def __post_init__(self):
        if not (self.imprecision_ref > 0 and self.P_ref > 0):
            raise ValueError("imprecision_ref and P_ref must both be > 0")


def mechanical_susceptibility(omega, mech: MechanicalParams, gamma_m=None):
    """Complex compliance chi(omega) = 1 / (m (omega_m^2 - omega^2 - i gamma_m omega))."""
    if gamma_m is None:
        gamma_m = mech.gamma_m0
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (mech.mass * (mech.omega_m**2 - omega**2 - 1j * gamma_m * omega))


def displacement_psd(omega, T_m, gamma_m, mech: MechanicalParams,
                     c: PhysicalConstants = CODATA):
    """One-sided thermal displacement PSD in m^2/Hz."""
    if not gamma_m > 0:
        raise ValueError("gamma_m must be > 0 for a thermal spectrum")
    if T_m < 0:
        raise ValueError("T_m must be >= 0")
    omega = np.asarray(omega, dtype=float)
    num = 4.0 * c.k_B * T_m * gamma_m / mech.mass
    return num / ((mech.omega_m**2 - omega**2) ** 2 + (gamma_m * omega) ** 2)


def cavity_frequency_psd(omega, T_m, gamma_m, mech: MechanicalParams, g,
                         c: PhysicalConstants = CODATA):
    """PSD of cavity-frequency fluctuations (Hz^2/Hz) driven by thermal motion.

    ``g`` is the angular pull in rad/s per metre.
    """
    return (g / TWO_PI) ** 2 * displacement_psd(omega, T_m, gamma_m, mech, c)


def mean_square_displacement(T, mech: MechanicalParams, c: PhysicalConstants = CODATA):
    if np.any(np.asarray(T) < 0):
        raise ValueError("T must be >= 0")
    return c.k_B * T / (mech.mass * mech.omega_m**2)


def imprecision_floor(P_c, noise: NoiseModel):
    if np.any(np.asarray(P_c) <= 0):
        raise ValueError("P_c must be > 0")
    return noise.imprecision_ref * (noise.P_ref / np.asarray(P_c, dtype=float))


def thermal_model(freq_grid, T_m, gamma_m, mech: MechanicalParams, floor=0.0,
                  g=None, c: PhysicalConstants = CODATA):
    """Expected PSD on an ordinary-frequency grid: thermal peak plus white floor."""
    omega = TWO_PI * np.asarray(freq_grid, dtype=float)
    if g is None:
        return displacement_psd(omega, T_m, gamma_m, mech, c) + floor
    return cavity_frequency_psd(omega, T_m, gamma_m, mech, g, c) + floor


def synth_spectrum(true_psd, freq_grid, n_avg: int, seed: int | None = None,
                   unit_tag: str = "displacement", provenance: dict | None = None):
    """Draw an averaged periodogram around ``true_psd``.

    Every bin is ``true_psd * X / (2 n_avg)`` with ``X ~ chi2(2 n_avg)``,
    so bins are unbiased with relative standard deviation 1/sqrt(n_avg).
    """
    freq_grid = np.asarray(freq_grid, dtype=float)
    if freq_grid.size == 0:
        raise ValueError("empty frequency grid")
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    true_psd = np.broadcast_to(np.asarray(true_psd, dtype=float), freq_grid.shape)
    rng = np.random.Generator(np.random.PCG64(seed))
    dof = 2 * int(n_avg)
    psd = true_psd * rng.chisquare(dof, size=freq_grid.shape) / dof
    prov = {"rng": RNG_ALGORITHM}
    prov.update(provenance or {})
    return SpectrumTrace(freq_grid, psd, unit_tag=unit_tag, n_avg=n_avg, seed=seed,
                         provenance=prov)


def linewidth_grid(f_center: float, fwhm: float, n_widths: float = 20.0,
                   points: int = 801) -> np.ndarray:
    """Uniform grid of ``n_widths`` linewidths centred on ``f_center`` (all Hz)."""
    half = 0.5 * n_widths * fwhm
    lo = max(f_center - half, math.ulp(f_center))
    return np.linspace(lo, f_center + half, points)
