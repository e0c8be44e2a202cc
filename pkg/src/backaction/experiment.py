"""Virtual experiments: detuning sweeps at fixed circulating or incident
power, a Kerr-nonlinear cavity, optimal-detuning search and cooling curves.

Detunings passed in are angular (rad/s); :class:`SweepResult` and
:class:`CoolingResult` report ordinary frequencies (Hz) so they can be
written out and plotted directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .physics import (
    CODATA,
    CavityParams,
    RegenerativeError,
    SystemParams,
    TWO_PI,
    backaction_damping,
    backaction_prefactor,
    backaction_spring,
    effective_temperature,
    photon_number_from_circulating,
    phonon_occupancy,
)
from .spectra import NoiseModel, imprecision_floor

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class KerrCavity:
    """Cavity whose resonance is pulled down by ``K`` rad/s per photon."""

    K: float
    base: CavityParams

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("Kerr coefficient must be >= 0")

    @classmethod
    def linear(cls, base: CavityParams) -> "KerrCavity":
        return cls(0.0, base)


@dataclass(frozen=True)
class KerrSolution:
    n_bar: float
    multistable: bool
    roots: tuple
    discriminant: float


@dataclass(frozen=True)
class HeatingModel:
    """Power-dependent bath warming and intrinsic-damping increase.

    ``T_0 -> T_0 + alpha P**beta`` and
    ``gamma_m0 -> gamma_m0 (1 + eta dT)``; a disabled model changes nothing.
    """

    alpha: float = 0.0
    beta: float = 1.0
    eta: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.eta < 0:
            raise ValueError("alpha and eta must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    def apply(self, P_c, T_0, gamma_m0):
        if not self.enabled:
            return T_0, gamma_m0
        dT = self.alpha * P_c**self.beta
        return T_0 + dT, gamma_m0 * (1.0 + self.eta * dT)


@dataclass
class SweepResult:
    detuning: np.ndarray  # Hz
    n_bar: np.ndarray
    Gamma: np.ndarray  # Hz
    Omega: np.ndarray  # Hz
    gamma_m: np.ndarray  # Hz
    T_m: np.ndarray  # K, NaN on regenerative rows
    m_bar: np.ndarray  # NaN on regenerative rows
    regenerative: np.ndarray
    multistable: np.ndarray
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("detuning", "n_bar", "Gamma", "Omega", "gamma_m", "T_m", "m_bar",
               "regenerative", "multistable")

    def __post_init__(self):
        d = np.diff(self.detuning)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep detunings must be strictly monotone")

    def __len__(self):
        return len(self.detuning)

    def rows(self):
        for i in range(len(self)):
            yield {c: getattr(self, c)[i] for c in self.COLUMNS}

    def argmax_damping(self) -> float:
        """Detuning (Hz) of the largest total damping."""
        return float(self.detuning[int(np.argmax(self.gamma_m))])


@dataclass
class CoolingResult:
    P_c: np.ndarray  # W
    detuning: np.ndarray  # Hz, optimal detuning at each power
    Gamma: np.ndarray  # Hz
    gamma_m: np.ndarray  # Hz
    T_0: np.ndarray  # K, bath temperature after heating
    T_m: np.ndarray  # K
    m_bar: np.ndarray
    floor: np.ndarray  # m^2/Hz
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("P_c", "detuning", "Gamma", "gamma_m", "T_0", "T_m", "m_bar", "floor")

    def __post_init__(self):
        if np.any(np.diff(self.P_c) <= 0):
            raise ValueError("cooling powers must be strictly increasing")

    def __len__(self):
        return len(self.P_c)


def _cubic_discriminant(a, b, c, d):
    return 18 * a * b * c * d - 4 * b**3 * d + b**2 * c**2 - 4 * a * c**3 - 27 * a**2 * d**2


def solve_kerr_occupation(P_i, detuning, kerr: KerrCavity, constants=None) -> KerrSolution:
    """Self-consistent photon number of a driven Kerr cavity.

    Solves ``n = (P_i kappa / hbar omega_e) / (kappa^2 + 4 (detuning + K n)^2)``
    with the detuning measured from the low-power resonance.  Where the
    cavity is bistable the lowest root is returned, i.e. the branch reached
    by ramping the drive up from zero.
    """
    c = constants or CODATA
    if P_i < 0:
        raise ValueError("P_i must be >= 0")
    kappa = kerr.base.kappa
    omega_e = kerr.base.omega_c + detuning
    drive = P_i * kappa / (c.hbar * omega_e)
    if P_i == 0:
        return KerrSolution(0.0, False, (0.0,), 0.0)
    if kerr.K == 0:
        n = drive / (kappa**2 + 4.0 * detuning**2)
        return KerrSolution(n, False, (n,), 0.0)

    # v = K n / kappa (pull in linewidths), delta = detuning / kappa:
    # 4 v^3 + 8 delta v^2 + (1 + 4 delta^2) v - a = 0
    delta = detuning / kappa
    a = kerr.K * drive / kappa**3
    coeffs = (4.0, 8.0 * delta, 1.0 + 4.0 * delta**2, -a)
    disc = _cubic_discriminant(*coeffs)
    raw = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(raw))))
    real = np.sort(raw[np.abs(raw.imag) <= 1e-7 * scale].real)
    real = real[real > 0] if real.size else real
    if real.size == 0:  # numerically complex pair swallowed the real root
        real = np.array([float(raw[np.argmin(np.abs(raw.imag))].real)])
    roots = []
    for v in real:
        for _ in range(3):  # Newton polish
            f = ((4.0 * v + 8.0 * delta) * v + coeffs[2]) * v - a
            df = (12.0 * v + 16.0 * delta) * v + coeffs[2]
            if df != 0:
                v -= f / df
        roots.append(v * kappa / kerr.K)
    return KerrSolution(roots[0], bool(disc > 0), tuple(roots), float(disc))


def _thermometry(params: SystemParams, gamma_m0, T_0, Gamma):
    gamma_m = gamma_m0 + Gamma
    if gamma_m <= 0:
        return math.nan, math.nan
    T_m = effective_temperature(gamma_m0, T_0, Gamma, params.env.T_p)
    return T_m, phonon_occupancy(T_m, params.mech.omega_m, params.constants)


def _sweep(params: SystemParams, detunings, n_of, K, metadata):
    k, wm = params.cavity.kappa, params.mech.omega_m
    g0, T_0 = params.mech.gamma_m0, params.env.T_0
    cols = {c: [] for c in SweepResult.COLUMNS}
    for d in np.asarray(detunings, dtype=float):
        n, multi = n_of(d)
        B = backaction_prefactor(n, params.coupling.g, params.x_zp)
        d_eff = d + K * n
        Gam = backaction_damping(B, k, wm, d_eff)
        Om = backaction_spring(B, k, wm, d_eff)
        T_m, m_bar = _thermometry(params, g0, T_0, Gam)
        cols["detuning"].append(d / TWO_PI)
        cols["n_bar"].append(n)
        cols["Gamma"].append(Gam / TWO_PI)
        cols["Omega"].append(Om / TWO_PI)
        cols["gamma_m"].append((g0 + Gam) / TWO_PI)
        cols["T_m"].append(T_m)
        cols["m_bar"].append(m_bar)
        cols["regenerative"].append(g0 + Gam < 0)
        cols["multistable"].append(multi)
    arrays = {c: np.array(v, dtype=bool if c in ("regenerative", "multistable") else float)
              for c, v in cols.items()}
    return SweepResult(**arrays, metadata=metadata)


def sweep_constant_circulating(P_c, detunings, params: SystemParams,
                               kerr: KerrCavity | None = None) -> SweepResult:
    """Detuning sweep with the incident power readjusted to hold ``P_c`` fixed."""
    if not P_c > 0:
        raise ValueError("P_c must be > 0")
    if np.size(detunings) == 0:
        raise ValueError("empty detuning grid")
    K = kerr.K if kerr is not None else 0.0

    def n_of(d):
        return photon_number_from_circulating(P_c, params.cavity.omega_c + d,
                                              params.constants), False

    meta = {"mode": "const_circulating", "power": float(P_c), "kerr_coeff": K / TWO_PI}
    return _sweep(params, detunings, n_of, K, meta)


def sweep_constant_incident(P_i, detunings, params: SystemParams,
                            kerr: KerrCavity | None = None) -> SweepResult:
    """Detuning sweep at fixed incident power through a (possibly Kerr) cavity."""
    if not P_i >= 0:
        raise ValueError("P_i must be >= 0")
    if np.size(detunings) == 0:
        raise ValueError("empty detuning grid")
    kerr = kerr if kerr is not None else KerrCavity.linear(params.cavity)

    def n_of(d):
        sol = solve_kerr_occupation(P_i, d, kerr, params.constants)
        return sol.n_bar, sol.multistable

    meta = {"mode": "const_incident", "power": float(P_i), "kerr_coeff": kerr.K / TWO_PI}
    return _sweep(params, detunings, n_of, kerr.K, meta)


def golden_section_max(f, a, b, tol):
    """Maximise a unimodal ``f`` on [a, b] to an interval of width ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _damping_objective(params: SystemParams, P_c=None, P_i=None, kerr=None):
    if (P_c is None) == (P_i is None):
        raise ValueError("give exactly one of P_c or P_i")
    k, wm = params.cavity.kappa, params.mech.omega_m
    K = kerr.K if kerr is not None else 0.0
    if P_i is not None and kerr is None:
        kerr = KerrCavity.linear(params.cavity)

    def gamma(d):
        if P_c is not None:
            n = photon_number_from_circulating(P_c, params.cavity.omega_c + d, params.constants)
        else:
            n = solve_kerr_occupation(P_i, d, kerr, params.constants).n_bar
        B = backaction_prefactor(n, params.coupling.g, params.x_zp)
        return backaction_damping(B, k, wm, d + K * n)

    return gamma


def find_optimal_detuning(params: SystemParams, *, P_c=None, P_i=None,
                          kerr: KerrCavity | None = None, n_grid: int = 600) -> float:
    """Red detuning (rad/s) that maximises the radiation damping.

    A coarse scan of [-3 omega_m, 0) brackets the maximum, which golden-section
    search then refines to 1e-3 of the cavity linewidth.
    """
    if n_grid < 400:
        raise ValueError("coarse grid needs at least 400 points")
    wm, k = params.mech.omega_m, params.cavity.kappa
    f = _damping_objective(params, P_c=P_c, P_i=P_i, kerr=kerr)
    grid = np.linspace(-3.0 * wm, 0.0, n_grid, endpoint=False)
    vals = np.array([f(d) for d in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[i + 1] if i + 1 < grid.size else 0.0
    return golden_section_max(f, lo, hi, 1e-3 * k)


def cooling_curve(powers, params: SystemParams, heating: HeatingModel | None = None,
                  kerr: KerrCavity | None = None,
                  noise: NoiseModel | None = None) -> CoolingResult:
    """Sideband cooling at the optimal detuning for each circulating power."""
    powers = np.asarray(powers, dtype=float)
    if powers.size == 0 or np.any(powers <= 0):
        raise ValueError("powers must be non-empty and > 0")
    heating = heating or HeatingModel()
    k, wm = params.cavity.kappa, params.mech.omega_m
    K = kerr.K if kerr is not None else 0.0
    rows = []
    for P in powers:
        d = find_optimal_detuning(params, P_c=P, kerr=kerr)
        n = photon_number_from_circulating(P, params.cavity.omega_c + d, params.constants)
        B = backaction_prefactor(n, params.coupling.g, params.x_zp)
        Gam = backaction_damping(B, k, wm, d + K * n)
        T_0, g0 = heating.apply(P, params.env.T_0, params.mech.gamma_m0)
        if g0 + Gam <= 0:
            raise RegenerativeError(f"negative total damping at optimum for P_c={P:g} W")
        T_m = effective_temperature(g0, T_0, Gam, params.env.T_p)
        rows.append((
            P, d / TWO_PI, Gam / TWO_PI, (g0 + Gam) / TWO_PI, T_0, T_m,
            phonon_occupancy(T_m, wm, params.constants),
            imprecision_floor(P, noise) if noise is not None else math.nan,
        ))
    cols = np.array(rows, dtype=float).T
    meta = {"heating": heating.enabled, "kerr_coeff": K / TWO_PI}
    return CoolingResult(*cols, metadata=meta)


def fit_heating_model(P_top, params: SystemParams, damping_ratio: float = 30.0,
                      cooling_ratio: float = 5.0, beta: float = 1.0,
                      kerr: KerrCavity | None = None) -> HeatingModel:
    """Heating parameters that give the requested damping increase and
    temperature reduction (both relative to the unheated low-power values)
    at ``P_top``.

    ``beta`` is fixed by the caller; ``alpha`` and ``eta`` follow in closed
    form.  Raises ``ValueError`` when the radiation damping at ``P_top`` is
    incompatible with both ratios for non-negative heating.
    """
    d = find_optimal_detuning(params, P_c=P_top, kerr=kerr)
    K = kerr.K if kerr is not None else 0.0
    n = photon_number_from_circulating(P_top, params.cavity.omega_c + d, params.constants)
    B = backaction_prefactor(n, params.coupling.g, params.x_zp)
    Gam = backaction_damping(B, params.cavity.kappa, params.mech.omega_m, d + K * n)
    g0, T_0, T_p = params.mech.gamma_m0, params.env.T_0, params.env.T_p
    G = Gam / g0
    r = damping_ratio - G  # gamma_m0' / gamma_m0
    if r < 1.0:
        raise ValueError(
            f"radiation damping alone ({G:.3g} x gamma_m0) exceeds the target ratio"
        )
    dT = (damping_ratio * T_0 / cooling_ratio - G * T_p) / r - T_0
    if dT < 0:
        raise ValueError(
            f"targets need the bath to cool, not heat (radiation damping {G:.3g} x gamma_m0)"
        )
    eta = (r - 1.0) / dT if dT > 0 else 0.0
    return HeatingModel(alpha=dT / P_top**beta, beta=beta, eta=eta, enabled=True)
