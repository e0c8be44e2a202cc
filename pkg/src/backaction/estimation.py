"""Inverse problems: Lorentzian peak fits, thermometry, coupling calibration
and the joint damping/spring fit of a detuning sweep."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Sequence

import numpy as np

from .lsq import FitError, FitResult, nonlinear_least_squares
from .physics import (
    CODATA,
    MechanicalParams,
    PhysicalConstants,
    SystemParams,
    TWO_PI,
    backaction_prefactor,
)
from .spectra import SpectrumTrace


class NoPeakError(FitError):
    pass


class CalibrationError(FitError):
    pass


class InsensitiveSweepError(FitError):
    pass


@dataclass(frozen=True)
class LorentzianModel:
    """Peak on a white floor; ``area`` is the integrated excess (trace units x Hz)."""

    center: float
    fwhm: float
    area: float
    floor: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("fwhm must be > 0")
        if self.area < 0 or self.floor < 0:
            raise ValueError("area and floor must be >= 0")

    def __call__(self, f):
        return lorentzian(f, self.center, self.fwhm, self.area, self.floor)


@dataclass(frozen=True)
class SweepPoint:
    detuning: float  # Hz
    gamma_m: float  # Hz
    freq_shift: float  # Hz


def lorentzian(f, center, fwhm, area, floor=0.0):
    hw = 0.5 * fwhm
    return floor + (area / math.pi) * hw / ((np.asarray(f) - center) ** 2 + hw**2)


def lorentzian_jacobian(f, center, fwhm, area, floor=0.0):
    """Partial derivatives of :func:`lorentzian` w.r.t. (center, fwhm, area, floor)."""
    f = np.asarray(f, dtype=float)
    hw = 0.5 * fwhm
    u = f - center
    den = u**2 + hw**2
    shape = hw / (math.pi * den)
    d_c = area * shape * 2 * u / den
    d_w = (area / math.pi) * 0.5 * (u**2 - hw**2) / den**2
    return np.column_stack([d_c, d_w, shape, np.ones_like(f)])


def initial_lorentzian(trace: SpectrumTrace) -> LorentzianModel:
    """Heuristic starting point read directly off the trace."""
    f, y = trace.freq_grid, trace.psd
    floor = float(np.median(y))
    i = int(np.argmax(y))
    half = floor + 0.5 * (y[i] - floor)
    lo = i
    while lo > 0 and y[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < y.size - 1 and y[hi + 1] >= half:
        hi += 1
    df = np.diff(f)
    fwhm = max(f[hi] - f[lo], float(np.min(df)))
    area = max(float(np.trapezoid(np.clip(y - floor, 0, None), f)), 1e-300)
    return LorentzianModel(center=float(f[i]), fwhm=float(fwhm), area=area, floor=max(floor, 0.0))


def _peak_threshold(trace: SpectrumTrace, floor: float) -> float:
    # Bins are chi-squared with relative sigma 1/sqrt(n_avg); the sqrt(2 ln N)
    # term stops the largest of N floor-only bins from passing as a peak.
    n = trace.psd.size
    k = 3.0 + math.sqrt(2.0 * math.log(max(n, 2)))
    return floor * (1.0 + k / math.sqrt(trace.n_avg))


def fit_lorentzian(trace: SpectrumTrace, init: LorentzianModel | None = None,
                   *, max_iter: int = 500) -> FitResult:
    """Weighted least-squares Lorentzian fit of a measured PSD.

    Bin uncertainties are ``model / sqrt(n_avg)``; the fit is repeated once
    with weights taken from the first-pass model so the weights do not
    follow the noise in the data.  Returned parameters are ``center``,
    ``fwhm``, ``area`` and ``floor`` in the trace's units.
    """
    f, y = trace.freq_grid, trace.psd
    if f.size < 8:
        raise ValueError("need at least 8 points to fit a Lorentzian")
    guess = initial_lorentzian(trace)
    if np.max(y) < _peak_threshold(trace, guess.floor):
        raise NoPeakError("no resolvable peak above the noise floor")
    if init is not None:
        guess = init

    c0, w0 = guess.center, guess.fwhm
    a0 = guess.area
    s0 = a0 / (math.pi * 0.5 * w0)  # peak height scale

    def unpack(p):
        return c0 + p[0] * w0, p[1] * w0, p[2] * a0, p[3] * s0

    scale = np.array([w0, w0, a0, s0])

    def model_and_jac(p):
        theta = unpack(p)
        return lorentzian(f, *theta), lorentzian_jacobian(f, *theta) * scale

    p = np.array([0.0, 1.0, 1.0, guess.floor / s0])
    sqrt_n = math.sqrt(trace.n_avg)
    result = None
    for _ in range(2):
        sigma = model_and_jac(p)[0] / sqrt_n

        def res(q, sigma=sigma):
            return (y - model_and_jac(q)[0]) / sigma

        def jac(q, sigma=sigma):
            return -model_and_jac(q)[1] / sigma[:, None]

        result = nonlinear_least_squares(
            res, p, jac, names=["center", "fwhm", "area", "floor"], max_iter=max_iter
        )
        p = result.x

    c, w, a, fl = unpack(p)
    if not (w > 0 and a > 0):
        raise NoPeakError("fit collapsed to a non-physical peak", result)
    result.params = {"center": c, "fwhm": w, "area": a, "floor": fl}
    result.sigmas = dict(zip(result.params, (np.array(list(result.sigmas.values())) * scale).tolist()))
    result.covariance = result.covariance * np.outer(scale, scale)
    result.extra.update(unit_tag=trace.unit_tag, n_avg=trace.n_avg)
    if not result.converged:
        raise FitError("Lorentzian fit did not meet the convergence criteria", result)
    return result


def temperature_from_area(area, mech: MechanicalParams, c: PhysicalConstants = CODATA):
    """Mode temperature from the integrated displacement PSD (inverse equipartition)."""
    if np.any(np.asarray(area) < 0):
        raise ValueError("area must be >= 0")
    return area * mech.mass * mech.omega_m**2 / c.k_B


@dataclass(frozen=True)
class CouplingCalibration:
    g: float  # rad/s per metre
    sigma_g: float
    slope: float  # Hz^2 per K
    intercept: float  # Hz^2
    sigma_slope: float
    sigma_intercept: float

    @property
    def g_hz_per_m(self) -> float:
        return self.g / TWO_PI

    def to_dict(self) -> dict:
        return {
            "g_hz_per_m": self.g_hz_per_m,
            "sigma_g_hz_per_m": self.sigma_g / TWO_PI,
            "slope_hz2_per_k": self.slope,
            "intercept_hz2": self.intercept,
            "sigma_slope_hz2_per_k": self.sigma_slope,
            "sigma_intercept_hz2": self.sigma_intercept,
        }


def calibrate_coupling(temperatures, mean_square_freq, mech: MechanicalParams,
                       sigmas=None, c: PhysicalConstants = CODATA) -> CouplingCalibration:
    """Coupling strength from the slope of <delta f^2> against bath temperature.

    The intercept soaks up any temperature-independent background and does
    not enter ``g``.  Without ``sigmas`` the uncertainties are scaled by the
    scatter of the points about the line.
    """
    T = np.asarray(temperatures, dtype=float)
    y = np.asarray(mean_square_freq, dtype=float)
    if T.size != y.size:
        raise ValueError("temperatures and mean_square_freq differ in length")
    if np.unique(T).size < 3:
        raise ValueError("need at least 3 distinct temperatures")
    w = np.ones_like(T) if sigmas is None else 1.0 / np.asarray(sigmas, dtype=float)
    A = np.column_stack([T, np.ones_like(T)]) * w[:, None]
    coef, *_ = np.linalg.lstsq(A, y * w, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    if sigmas is None:
        resid = y * w - A @ coef
        dof = T.size - 2
        cov = cov * (resid @ resid / dof if dof > 0 else 0.0)
    slope, intercept = coef
    s_slope, s_int = np.sqrt(np.diag(cov))
    if not slope > 0:
        raise CalibrationError(f"fitted slope {slope:g} Hz^2/K is not positive")
    g = TWO_PI * math.sqrt(slope * mech.mass * mech.omega_m**2 / c.k_B)
    return CouplingCalibration(
        g=g,
        sigma_g=0.5 * g * s_slope / slope,
        slope=float(slope),
        intercept=float(intercept),
        sigma_slope=float(s_slope),
        sigma_intercept=float(s_int),
    )


def _sweep_design(points: Sequence[SweepPoint], params: SystemParams):
    """Damping and spring response per watt of circulating power (rad/s per W)."""
    d = TWO_PI * np.array([p.detuning for p in points], dtype=float)
    omega_e = params.cavity.omega_c + d
    B_per_watt = backaction_prefactor(1.0 / (params.constants.hbar * omega_e**2),
                                      params.coupling.g, params.x_zp)
    k, wm = params.cavity.kappa, params.mech.omega_m
    plus = k**2 + 4 * (d + wm) ** 2
    minus = k**2 + 4 * (d - wm) ** 2
    damp = B_per_watt * (k / plus - k / minus)
    spring = B_per_watt * ((d + wm) / plus + (d - wm) / minus)
    # Dimensionless sensitivity relative to the respective peak responses.
    rel = np.maximum(np.abs(k / plus - k / minus) * k, 2 * np.abs((d + wm) / plus + (d - wm) / minus) * k)
    return damp, spring, rel


def _block_scale(values):
    values = np.asarray(values, dtype=float)
    s = float(np.std(values))
    if s > 0:
        return s
    s = float(np.sqrt(np.mean(values**2)))
    return s if s > 0 else 1.0


def fit_detuning_sweep(points: Sequence[SweepPoint], params: SystemParams, *,
                       free_gamma_m0: bool = False, block_weights=None,
                       P_init: float = 1e-6) -> FitResult:
    """Joint fit of damping and frequency shift versus detuning.

    The circulating power is the only free parameter unless
    ``free_gamma_m0`` is set.  Each residual block is divided by its
    own scale: ``block_weights`` (w_damping, w_shift) are inverse variances
    when given, otherwise the empirical spread of each block's data is used.
    """
    if len(points) < 2:
        raise ValueError("need at least two sweep points")
    damp, spring, rel = _sweep_design(points, params)
    if np.max(rel) < 1e-2:
        raise InsensitiveSweepError(
            "sweep detunings are too far from the mechanical sidebands to constrain the power"
        )
    gam = TWO_PI * np.array([p.gamma_m for p in points], dtype=float)
    shift = TWO_PI * np.array([p.freq_shift for p in points], dtype=float)
    if block_weights is None:
        s1, s2 = _block_scale(gam), _block_scale(shift)
    else:
        w1, w2 = block_weights
        s1, s2 = 1.0 / math.sqrt(w1), 1.0 / math.sqrt(w2)

    g0 = params.mech.gamma_m0
    zero = np.zeros_like(damp)

    def res(p):
        P = p[0] * P_init
        gm0 = p[1] * g0 if free_gamma_m0 else g0
        return np.concatenate([(gam - gm0 - damp * P) / s1, (shift - spring * P) / s2])

    def jac(p):
        cols = [np.concatenate([-damp * P_init / s1, -spring * P_init / s2])]
        if free_gamma_m0:
            cols.append(np.concatenate([-g0 / s1 + zero, zero]))
        return np.column_stack(cols)

    x0 = [1.0, 1.0] if free_gamma_m0 else [1.0]
    names = ["P_c", "gamma_m0"] if free_gamma_m0 else ["P_c"]
    result = nonlinear_least_squares(res, x0, jac, names=names, absolute_sigma=block_weights is not None)
    scale = np.array([P_init, g0 / TWO_PI][: len(x0)])
    x = result.x * scale
    result.params = dict(zip(names, x.tolist()))
    result.sigmas = dict(zip(names, (np.array(list(result.sigmas.values())) * scale).tolist()))
    result.covariance = result.covariance * np.outer(scale, scale)
    result.extra.update(block_scales_hz=[s1 / TWO_PI, s2 / TWO_PI])
    if not result.converged:
        raise FitError("sweep fit did not converge", result)
    return result
