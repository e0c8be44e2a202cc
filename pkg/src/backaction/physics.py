"""Closed-form cavity optomechanics relations.

All frequencies and rates are angular (rad/s).  Conversions to ordinary
frequency happen only at the I/O boundary (see :mod:`backaction.io`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

TWO_PI = 2.0 * math.pi


class RegenerativeError(ValueError):
    """Raised when thermometry is requested for a negatively damped oscillator."""


def _require_positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise ValueError(f"{name} must be > 0, got {value!r}")


def _require_nonnegative(name, value):
    if not np.all(np.asarray(value) >= 0):
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34
    k_B: float = 1.380649e-23


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class CavityParams:
    omega_c: float
    kappa: float

    def __post_init__(self):
        _require_positive("omega_c", self.omega_c)
        _require_positive("kappa", self.kappa)
        if not self.kappa < self.omega_c:
            raise ValueError("kappa must be smaller than omega_c")


@dataclass(frozen=True)
class MechanicalParams:
    omega_m: float
    gamma_m0: float
    mass: float

    def __post_init__(self):
        _require_positive("omega_m", self.omega_m)
        _require_positive("gamma_m0", self.gamma_m0)
        _require_positive("mass", self.mass)

    @property
    def quality_factor(self) -> float:
        return self.omega_m / self.gamma_m0


@dataclass(frozen=True)
class CouplingParams:
    g: float  # rad/s per metre

    def __post_init__(self):
        _require_nonnegative("g", self.g)


@dataclass(frozen=True)
class ThermalEnvironment:
    T_0: float
    T_p: float = 10e-6

    def __post_init__(self):
        _require_nonnegative("T_0", self.T_0)
        _require_nonnegative("T_p", self.T_p)


@dataclass(frozen=True)
class SystemParams:
    """Everything needed to evaluate the backaction chain for one device."""

    cavity: CavityParams
    mech: MechanicalParams
    coupling: CouplingParams
    env: ThermalEnvironment
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    @classmethod
    def paper_device(cls) -> "SystemParams":
        """The device quoted in the dynamical-backaction letter (Q_m = 3e5)."""
        omega_m = TWO_PI * 1.525e6
        return cls(
            cavity=CavityParams(omega_c=TWO_PI * 5.22e9, kappa=TWO_PI * 230e3),
            mech=MechanicalParams(omega_m=omega_m, gamma_m0=omega_m / 3e5, mass=6.2e-15),
            coupling=CouplingParams(g=TWO_PI * 6.4e12),
            env=ThermalEnvironment(T_0=0.050, T_p=10e-6),
        )

    @property
    def x_zp(self) -> float:
        return zero_point_motion(self.mech, self.constants)


@dataclass(frozen=True)
class DriveSettings:
    """A microwave tone: its detuning from the cavity plus one power specification.

    Exactly one of ``circulating_power``, ``incident_power`` or
    ``photon_number`` is stored; the others are derived on demand.
    """

    cavity: CavityParams
    detuning: float
    circulating_power: float | None = None
    incident_power: float | None = None
    photon_number: float | None = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        given = [
            v for v in (self.circulating_power, self.incident_power, self.photon_number)
            if v is not None
        ]
        if len(given) != 1:
            raise ValueError(
                "exactly one of circulating_power, incident_power, photon_number must be set"
            )
        _require_nonnegative("power specification", given[0])
        if not self.omega_e > 0:
            raise ValueError("excitation frequency must be positive")

    @property
    def omega_e(self) -> float:
        return self.cavity.omega_c + self.detuning

    @property
    def n_bar(self) -> float:
        if self.photon_number is not None:
            return self.photon_number
        if self.circulating_power is not None:
            return photon_number_from_circulating(
                self.circulating_power, self.omega_e, self.constants
            )
        return photon_number_from_incident(
            self.incident_power, self.omega_e, self.detuning, self.cavity.kappa,
            self.constants,
        )

    @property
    def P_c(self) -> float:
        if self.circulating_power is not None:
            return self.circulating_power
        return circulating_power(self.n_bar, self.omega_e, self.constants)

    @property
    def P_i(self) -> float:
        if self.incident_power is not None:
            return self.incident_power
        return incident_power(
            self.n_bar, self.omega_e, self.detuning, self.cavity.kappa, self.constants
        )


@dataclass(frozen=True)
class BackactionResult:
    Gamma: float
    Omega: float
    gamma_m_total: float
    regenerative: bool


def zero_point_motion(mech: MechanicalParams, c: PhysicalConstants = CODATA) -> float:
    """Ground-state rms displacement sqrt(hbar / (2 m omega_m))."""
    _require_positive("mass", mech.mass)
    _require_positive("omega_m", mech.omega_m)
    return math.sqrt(c.hbar / (2.0 * mech.mass * mech.omega_m))


def photon_number_from_circulating(P_c, omega_e, c: PhysicalConstants = CODATA):
    """Mean intracavity photon number for a circulating power ``P_c = hbar omega_e**2 n``."""
    _require_nonnegative("P_c", P_c)
    _require_positive("omega_e", omega_e)
    return P_c / (c.hbar * np.square(omega_e))


def circulating_power(n_bar, omega_e, c: PhysicalConstants = CODATA):
    _require_nonnegative("n_bar", n_bar)
    _require_positive("omega_e", omega_e)
    return c.hbar * np.square(omega_e) * n_bar


def incident_power(n_bar, omega_e, detuning, kappa, c: PhysicalConstants = CODATA):
    """Incident power needed to hold ``n_bar`` photons in an overcoupled cavity."""
    _require_nonnegative("n_bar", n_bar)
    _require_positive("kappa", kappa)
    return c.hbar * omega_e * n_bar * (kappa**2 + 4.0 * np.square(detuning)) / kappa


def photon_number_from_incident(P_i, omega_e, detuning, kappa, c: PhysicalConstants = CODATA):
    _require_nonnegative("P_i", P_i)
    _require_positive("kappa", kappa)
    return P_i * kappa / (c.hbar * omega_e * (kappa**2 + 4.0 * np.square(detuning)))


def backaction_prefactor(n_bar, g, x_zp):
    """Interaction strength B = 4 n g**2 x_zp**2, in (rad/s)**2."""
    for name, v in (("n_bar", n_bar), ("g", g), ("x_zp", x_zp)):
        _require_nonnegative(name, v)
    return 4.0 * n_bar * (g * x_zp) ** 2


def _lorentz_terms(kappa, omega_m, detuning):
    d = np.asarray(detuning, dtype=float)
    plus = kappa**2 + 4.0 * (d + omega_m) ** 2
    minus = kappa**2 + 4.0 * (d - omega_m) ** 2
    return d, plus, minus


def backaction_damping(B, kappa, omega_m, detuning):
    """Radiation-pressure damping rate added to the mechanical mode.

    Positive (cooling) for red detuning, negative for blue detuning.
    """
    _require_positive("kappa", kappa)
    _require_positive("omega_m", omega_m)
    _, plus, minus = _lorentz_terms(kappa, omega_m, detuning)
    out = B * (kappa / plus - kappa / minus)
    return out if np.ndim(out) else float(out)


def backaction_spring(B, kappa, omega_m, detuning):
    """Optical-spring shift of the mechanical resonance (add to omega_m)."""
    _require_positive("kappa", kappa)
    _require_positive("omega_m", omega_m)
    d, plus, minus = _lorentz_terms(kappa, omega_m, detuning)
    out = B * ((d + omega_m) / plus + (d - omega_m) / minus)
    return out if np.ndim(out) else float(out)


def total_damping(mech: MechanicalParams, Gamma: float, Omega: float = 0.0) -> BackactionResult:
    gamma_m = mech.gamma_m0 + Gamma
    return BackactionResult(
        Gamma=Gamma, Omega=Omega, gamma_m_total=gamma_m, regenerative=bool(gamma_m < 0)
    )


def backaction(params: SystemParams, drive: DriveSettings) -> BackactionResult:
    """Full chain: drive -> photon number -> B -> (Gamma, Omega, gamma_m)."""
    B = backaction_prefactor(drive.n_bar, params.coupling.g, params.x_zp)
    k, wm = params.cavity.kappa, params.mech.omega_m
    return total_damping(
        params.mech,
        backaction_damping(B, k, wm, drive.detuning),
        backaction_spring(B, k, wm, drive.detuning),
    )


def effective_temperature(gamma_m0, T_0, Gamma, T_p):
    """Mode temperature from the damping-weighted average of the two baths."""
    gamma_m = gamma_m0 + Gamma
    if np.any(np.asarray(gamma_m) <= 0):
        raise RegenerativeError(
            f"total damping {gamma_m!r} <= 0: no steady-state temperature"
        )
    return (gamma_m0 * T_0 + Gamma * T_p) / gamma_m


def phonon_occupancy(T, omega_m, c: PhysicalConstants = CODATA):
    """Bose-Einstein occupancy of a mode at angular frequency ``omega_m``."""
    T = np.asarray(T, dtype=float)
    _require_nonnegative("T", T)
    with np.errstate(divide="ignore"):
        x = np.where(T > 0, c.hbar * omega_m / (c.k_B * np.where(T > 0, T, 1.0)), np.inf)
    out = np.where(T > 0, 1.0 / np.expm1(x), 0.0)
    return out if out.ndim else float(out)


def sideband_resolution(omega_m, kappa):
    _require_positive("kappa", kappa)
    return omega_m / kappa
