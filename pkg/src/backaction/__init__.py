"""Dynamical backaction of a microwave cavity on a nanomechanical oscillator:
closed-form physics, thermal spectra, estimators and virtual experiments."""

__version__ = "0.1.0"

from .physics import (  # noqa: E402
    CODATA,
    BackactionResult,
    CavityParams,
    CouplingParams,
    DriveSettings,
    MechanicalParams,
    PhysicalConstants,
    RegenerativeError,
    SystemParams,
    ThermalEnvironment,
    backaction,
    backaction_damping,
    backaction_prefactor,
    backaction_spring,
    circulating_power,
    effective_temperature,
    incident_power,
    phonon_occupancy,
    photon_number_from_circulating,
    photon_number_from_incident,
    sideband_resolution,
    total_damping,
    zero_point_motion,
)
from .spectra import (  # noqa: E402
    NoiseModel,
    SpectrumTrace,
    cavity_frequency_psd,
    displacement_psd,
    imprecision_floor,
    mean_square_displacement,
    mechanical_susceptibility,
    synth_spectrum,
    thermal_model,
)
from .lsq import FitError, FitResult, nonlinear_least_squares  # noqa: E402
from .estimation import (  # noqa: E402
    LorentzianModel,
    SweepPoint,
    calibrate_coupling,
    fit_detuning_sweep,
    fit_lorentzian,
    temperature_from_area,
)
from .experiment import (  # noqa: E402
    HeatingModel,
    KerrCavity,
    cooling_curve,
    find_optimal_detuning,
    fit_heating_model,
    solve_kerr_occupation,
    sweep_constant_circulating,
    sweep_constant_incident,
)
