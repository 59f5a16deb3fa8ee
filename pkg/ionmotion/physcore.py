"""
Physical constants, parameter records for ion, trap, Raman beams and electric
field noise, and the closed-form quantities derived from them.

Everything in here is SI with angular frequencies in rad/s. Conversion from
the MHz/us/um values of config files happens in ionmotion.config and
ionmotion.datafiles through hz_to_angular/angular_to_hz.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.constants

from .errors import ContractError, DomainError

E_CHARGE = scipy.constants.e
HBAR = scipy.constants.hbar
# CODATA 2018 atomic mass unit; pinned so results do not move with scipy's table
AMU = 1.66053906660e-27
TWO_PI = 2 * math.pi


def hz_to_angular(freq_hz):
    return _scalar(TWO_PI * np.asarray(freq_hz, dtype=float))


def angular_to_hz(omega):
    return _scalar(np.asarray(omega, dtype=float) / TWO_PI)


def _require_positive(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive, got {value}")


def _require_non_negative(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative, got {value}")


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class IonSpecies:
    """
    Species-dependent constants of a singly charged ion.

    mass in kg, transition_wavelength in m, gamma0 (excited state linewidth)
    and omega_hf (ground state hyperfine splitting) in rad/s.
    """
    name: str
    mass: float
    transition_wavelength: float
    gamma0: float
    omega_hf: float = 0.0

    def __post_init__(self):
        for attr in ("mass", "transition_wavelength", "gamma0"):
            if not getattr(self, attr) > 0:
                raise ContractError(f"IonSpecies.{attr} must be positive, got {getattr(self, attr)}")
        if self.omega_hf < 0:
            raise ContractError("IonSpecies.omega_hf must be non-negative")

    @property
    def wavenumber(self):
        return TWO_PI / self.transition_wavelength


@dataclass(frozen=True)
class RamanGeometry:
    """
    delta_k: wave-vector difference of the Raman beams projected on the
    simulated axis (rad/m); omega0: carrier Rabi frequency (rad/s)
    """
    delta_k: float
    omega0: float

    def __post_init__(self):
        if not self.delta_k >= 0:
            raise ContractError(f"RamanGeometry.delta_k must be non-negative, got {self.delta_k}")
        if not self.omega0 >= 0:
            raise ContractError(f"RamanGeometry.omega0 must be non-negative, got {self.omega0}")

    @classmethod
    def from_beam_angle(cls, ion: IonSpecies, angle_deg=90.0, omega0=TWO_PI * 100e3):
        """
        Two beams of wavenumber k crossing at angle_deg, difference vector
        along the axis: delta_k = 2 k sin(angle/2), i.e. sqrt(2) k at 90 degrees
        """
        delta_k = 2 * ion.wavenumber * math.sin(math.radians(angle_deg) / 2)
        return cls(delta_k=delta_k, omega0=omega0)


@dataclass(frozen=True)
class TrapConfig:
    """
    One simulated trap axis. The drive fields (rf amplitude V0 in volts,
    drive frequency Omega_T in rad/s, static potential U0 in volts) are
    descriptive only.
    """
    omega_x: float
    electrode_distance: float
    label: str = ""
    rf_amplitude: Optional[float] = None
    drive_frequency: Optional[float] = None
    static_potential: Optional[float] = None

    def __post_init__(self):
        if not self.omega_x > 0:
            raise ContractError(f"TrapConfig.omega_x must be positive, got {self.omega_x}")
        if not self.electrode_distance > 0:
            raise ContractError(
                f"TrapConfig.electrode_distance must be positive, got {self.electrode_distance}")

    def with_frequency(self, omega_x):
        return replace(self, omega_x=omega_x)


@dataclass(frozen=True)
class NoiseModel:
    """
    Electric field noise spectral density S_E(omega, d) in (V/m)^2/Hz:

        s0 (omega/omega_ref)^-alpha (d/d_ref)^-p + floor (d/d_ref)^-floor_p

    The power law describes patch-potential noise; the optional flat floor
    stands in for Johnson-like noise, which scales as 1/d^2.
    """
    s0: float
    omega_ref: float
    d_ref: float
    alpha: float = 1.4
    p: float = 4.0
    floor: float = 0.0
    floor_p: float = 2.0

    def __post_init__(self):
        if not self.s0 >= 0:
            raise ContractError(f"NoiseModel.s0 must be non-negative, got {self.s0}")
        if not self.omega_ref > 0:
            raise ContractError(f"NoiseModel.omega_ref must be positive, got {self.omega_ref}")
        if not self.d_ref > 0:
            raise ContractError(f"NoiseModel.d_ref must be positive, got {self.d_ref}")
        if not self.floor >= 0:
            raise ContractError(f"NoiseModel.floor must be non-negative, got {self.floor}")


CD111 = IonSpecies(
    name="111Cd+",
    mass=110.904 * AMU,
    transition_wavelength=214.5e-9,
    gamma0=TWO_PI * 47e6,
    omega_hf=TWO_PI * 14.53e9,
)

QUADRUPOLE_TRAP = TrapConfig(
    omega_x=TWO_PI * 5.8e6, electrode_distance=150e-6, label="Cd quadrupole (U0=30 V)",
    rf_amplitude=400.0, drive_frequency=TWO_PI * 50e6, static_potential=30.0)

LINEAR_TRAP = TrapConfig(
    omega_x=TWO_PI * 2.69e6, electrode_distance=100e-6, label="Cd linear", rf_amplitude=400.0)


def standard_geometry(ion: IonSpecies = CD111, omega0=TWO_PI * 100e3):
    """
    90 degree Raman beams; reproduces eta_x = 0.28 nu^-1/2 for Cd-111
    """
    return RamanGeometry.from_beam_angle(ion, 90.0, omega0)


def lamb_dicke(geometry: RamanGeometry, ion: IonSpecies, omega_x):
    """
    eta = delta_k sqrt(hbar / (2 m omega_x))
    """
    _require_positive("omega_x", omega_x)
    eta = geometry.delta_k * np.sqrt(HBAR / (2 * ion.mass * np.asarray(omega_x, dtype=float)))
    return _scalar(eta)


def recoil_frequency(geometry: RamanGeometry, ion: IonSpecies):
    return HBAR * geometry.delta_k ** 2 / (2 * ion.mass)


def doppler_limit_nbar(ion: IonSpecies, omega_x):
    _require_positive("omega_x", omega_x)
    return _scalar(ion.gamma0 / (2 * np.asarray(omega_x, dtype=float)))


def cooling_threshold(ion: IonSpecies, geometry: RamanGeometry):
    """
    Trap frequency above which Doppler cooling followed by first-sideband
    Raman cooling reaches the ground state: sqrt(gamma0 omega_R / 2)
    """
    return math.sqrt(ion.gamma0 * recoil_frequency(geometry, ion) / 2)


def lamb_dicke_limit_factor(eta, nbar):
    """
    eta^2 nbar; first-sideband cooling needs this to be at most about 1
    """
    _require_non_negative("nbar", nbar)
    return eta ** 2 * nbar


def lamb_dicke_regime(eta, n):
    """
    eta sqrt(n + 1); the first-order sideband couplings hold while this is << 1
    """
    return eta * math.sqrt(n + 1)


def sideband_rabi_frequency(geometry: RamanGeometry, ion: IonSpecies, omega_x):
    """
    Lamb-Dicke first sideband Rabi frequency eta Omega0 for the |0> <-> |1> pair
    """
    return lamb_dicke(geometry, ion, omega_x) * geometry.omega0


def _heating_scale(ion: IonSpecies, omega_x):
    return 4 * ion.mass * HBAR * np.asarray(omega_x, dtype=float)


def heating_rate_from_noise(s_e, ion: IonSpecies, omega_x):
    """
    ndot = e^2 S_E(omega_x) / (4 m hbar omega_x), in quanta/s
    """
    _require_non_negative("s_e", s_e)
    _require_positive("omega_x", omega_x)
    return _scalar(E_CHARGE ** 2 * np.asarray(s_e, dtype=float) / _heating_scale(ion, omega_x))


def noise_from_heating_rate(ndot, ion: IonSpecies, omega_x):
    _require_non_negative("ndot", ndot)
    _require_positive("omega_x", omega_x)
    return _scalar(np.asarray(ndot, dtype=float) * _heating_scale(ion, omega_x) / E_CHARGE ** 2)


def evaluate_noise(model: NoiseModel, omega, d):
    _require_positive("omega", omega)
    _require_positive("d", d)
    omega = np.asarray(omega, dtype=float)
    d = np.asarray(d, dtype=float)
    s_e = model.s0 * (omega / model.omega_ref) ** (-model.alpha) * (d / model.d_ref) ** (-model.p)
    if model.floor:
        s_e = s_e + model.floor * (d / model.d_ref) ** (-model.floor_p)
    return _scalar(s_e)


def heating_rate_at(model: NoiseModel, ion: IonSpecies, trap: TrapConfig):
    """
    Heating rate the noise model produces for one trap axis
    """
    s_e = evaluate_noise(model, trap.omega_x, trap.electrode_distance)
    return heating_rate_from_noise(s_e, ion, trap.omega_x)


@dataclass(frozen=True)
class DerivedQuantities:
    eta: float
    recoil_frequency: float
    doppler_nbar: float
    cooling_threshold: float
    lamb_dicke_factor: float
    sideband_rabi: float
    s_e: float = float("nan")
    heating_rate: float = float("nan")


def derive(ion: IonSpecies, geometry: RamanGeometry, trap: TrapConfig, noise: Optional[NoiseModel] = None):
    """
    All closed-form quantities for one configuration, as used by `ionmotion derive`
    """
    eta = lamb_dicke(geometry, ion, trap.omega_x)
    nbar_d = doppler_limit_nbar(ion, trap.omega_x)
    s_e = float("nan")
    ndot = float("nan")
    if noise is not None:
        s_e = evaluate_noise(noise, trap.omega_x, trap.electrode_distance)
        ndot = heating_rate_from_noise(s_e, ion, trap.omega_x)
    return DerivedQuantities(
        eta=eta,
        recoil_frequency=recoil_frequency(geometry, ion),
        doppler_nbar=nbar_d,
        cooling_threshold=cooling_threshold(ion, geometry),
        lamb_dicke_factor=lamb_dicke_limit_factor(eta, nbar_d),
        sideband_rabi=sideband_rabi_frequency(geometry, ion, trap.omega_x),
        s_e=s_e,
        heating_rate=ndot,
    )
