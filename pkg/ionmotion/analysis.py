"""
Fits of the measurement chain: heating rates from n̄(t) series, power laws
in trap frequency and electrode distance, and the species-independent noise
survey across traps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dynamics import HeatingSeries
from .errors import ContractError, DomainError, FitError, InsufficientDataError
from .physcore import AMU, IonSpecies, heating_rate_from_noise, noise_from_heating_rate

logger = logging.getLogger(__name__)

MIN_POINTS = 3


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Named best-fit parameters with their covariance matrix (rows and columns
    in the order of `parameters`) and the norm of the (weighted) residuals.
    """
    parameters: Dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    weighted: bool = False
    residuals: Optional[np.ndarray] = None

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        size = len(self.parameters)
        if cov.shape != (size, size):
            raise ContractError(f"covariance must be {size}x{size}, got {cov.shape}")
        # symmetrize round-off from the normal equations
        cov = (cov + cov.T) / 2
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "parameters", dict(self.parameters))

    def _index(self, name):
        try:
            return list(self.parameters).index(name)
        except ValueError:
            raise KeyError(f"no fit parameter named {name!r}") from None

    def value(self, name):
        return self.parameters[name]

    def uncertainty(self, name):
        index = self._index(name)
        return math.sqrt(max(self.covariance[index, index], 0.0))

    def to_dict(self):
        result = {
            "parameters": {k: float(v) for k, v in self.parameters.items()},
            "uncertainties": {k: self.uncertainty(k) for k in self.parameters},
            "covariance": self.covariance.tolist(),
            "residual_norm": float(self.residual_norm),
            "weighted": self.weighted,
        }
        if self.residuals is not None:
            result["residuals"] = np.asarray(self.residuals, dtype=float).tolist()
        return result


def _linear_fit(x, y, sigma=None):
    """
    Straight line y = intercept + slope x by least squares.

    With sigma the fit is inverse-variance weighted and the covariance is
    (A^T W A)^-1. Without it the covariance is scaled by the residual
    variance s^2 = RSS / (N - 2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    if sigma is not None:
        weights = 1.0 / np.asarray(sigma, dtype=float)
        design_w = design * weights[:, None]
        y_w = y * weights
    else:
        design_w, y_w = design, y
    coeffs, _, rank, _ = np.linalg.lstsq(design_w, y_w, rcond=None)
    if rank < 2:
        raise FitError("degenerate abscissae: all x values coincide")
    residuals = y - design @ coeffs
    normal = design_w.T @ design_w
    covariance = np.linalg.inv(normal)
    if sigma is None:
        dof = x.size - 2
        covariance = covariance * (float(residuals @ residuals) / dof if dof > 0 else 0.0)
        norm = float(np.linalg.norm(residuals))
    else:
        norm = float(np.linalg.norm(residuals * weights))
    return coeffs, covariance, residuals, norm


def fit_heating_rate(series: HeatingSeries, weighted=False):
    """
    Linear fit n̄(t) = intercept + slope t; the slope is the heating rate in
    quanta/s. weighted=True uses the series' sigmas unless any of them is zero,
    in which case all points are fitted unweighted.
    """
    if not isinstance(series, HeatingSeries):
        series = HeatingSeries(*zip(*series))
    if len(series) < MIN_POINTS:
        raise InsufficientDataError(
            f"a heating-rate fit needs at least {MIN_POINTS} points, got {len(series)}")
    sigma = None
    if weighted:
        if np.any(series.sigma == 0):
            logger.info("zero uncertainties in the heating series; fitting unweighted")
        else:
            sigma = series.sigma
    (intercept, slope), cov, residuals, norm = _linear_fit(series.delays, series.nbar, sigma)
    # parameter order slope, intercept
    cov = cov[::-1, ::-1]
    return FitResult(parameters={"slope": float(slope), "intercept": float(intercept)},
                     covariance=cov, residual_norm=norm, weighted=sigma is not None,
                     residuals=residuals)


def fit_power_law(xs: Sequence[float], ys: Sequence[float], sigmas: Optional[Sequence[float]] = None):
    """
    Fit y = amplitude x^exponent as a straight line in log-log space.

    sigmas are absolute uncertainties of y, carried into log space as
    sigma / y. The amplitude uncertainty follows from that of log(amplitude).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ContractError("power-law abscissae and ordinates differ in length")
    if xs.size < MIN_POINTS:
        raise InsufficientDataError(f"a power-law fit needs at least {MIN_POINTS} points, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("power-law fits need strictly positive data")
    log_sigma = None
    if sigmas is not None:
        sigmas = np.asarray(sigmas, dtype=float)
        if np.all(sigmas > 0):
            log_sigma = sigmas / ys
        else:
            logger.info("zero uncertainties in power-law data; fitting unweighted")
    (log_amp, exponent), cov, residuals, norm = _linear_fit(np.log(xs), np.log(ys), log_sigma)
    amplitude = math.exp(log_amp)
    # d amplitude / d log_amp = amplitude
    jacobian = np.array([[0.0, 1.0], [amplitude, 0.0]])
    cov = jacobian @ cov @ jacobian.T
    return FitResult(parameters={"exponent": float(exponent), "amplitude": amplitude},
                     covariance=cov, residual_norm=norm, weighted=log_sigma is not None,
                     residuals=residuals)


def implied_noise_exponent(heating_exponent):
    """
    ndot ~ S_E(omega) / omega, so the S_E exponent is the heating exponent + 1
    """
    return heating_exponent + 1


@dataclass(frozen=True)
class SurveyRecord:
    """
    One published heating-rate measurement: mass in kg, distance in m, trap
    frequency in rad/s, heating rate in quanta/s
    """
    system_label: str
    ion_mass: float
    electrode_distance: float
    trap_frequency: float
    heating_rate: float
    source_tag: str = ""

    def __post_init__(self):
        for attr in ("ion_mass", "electrode_distance", "trap_frequency", "heating_rate"):
            value = getattr(self, attr)
            if not (value > 0 and math.isfinite(value)):
                raise ContractError(f"survey record {self.system_label!r}: {attr} must be positive, got {value}")

    def species(self):
        """
        Stand-in species carrying only the mass; the noise conversion needs
        nothing else
        """
        return IonSpecies(name=self.system_label, mass=self.ion_mass,
                          transition_wavelength=1.0, gamma0=1.0)

    @property
    def mass_amu(self):
        return self.ion_mass / AMU


@dataclass(frozen=True)
class SurveyRow:
    system_label: str
    electrode_distance: float
    trap_frequency: float
    heating_rate: float
    s_e: float
    source_tag: str = ""


def survey_noise_inference(records: Sequence[SurveyRecord]) -> List[SurveyRow]:
    """
    Noise spectral density at the ion for every record, from its own mass and
    trap frequency, sorted by electrode distance
    """
    if not records:
        raise InsufficientDataError("the noise survey needs at least one record")
    rows = [
        SurveyRow(
            system_label=r.system_label,
            electrode_distance=r.electrode_distance,
            trap_frequency=r.trap_frequency,
            heating_rate=r.heating_rate,
            s_e=noise_from_heating_rate(r.heating_rate, r.species(), r.trap_frequency),
            source_tag=r.source_tag,
        )
        for r in records
    ]
    return sorted(rows, key=lambda row: row.electrode_distance)


def heating_rate_from_row(row: SurveyRow, ion_mass):
    """
    Inverse of the survey inference for one row
    """
    ion = IonSpecies(name=row.system_label, mass=ion_mass, transition_wavelength=1.0, gamma0=1.0)
    return heating_rate_from_noise(row.s_e, ion, row.trap_frequency)


SURVEY_QUANTITIES = ("s_e", "heating_rate")


def fit_distance_scaling(rows: Sequence[SurveyRow], quantity="s_e"):
    """
    Power law of S_E (or of the raw heating rate) vs. electrode distance
    over survey rows
    """
    if quantity not in SURVEY_QUANTITIES:
        raise ContractError(f"cannot fit distance scaling of {quantity!r}")
    xs = [row.electrode_distance for row in rows]
    ys = [getattr(row, quantity) for row in rows]
    return fit_power_law(xs, ys)


def thermal_floor_ratio(observed_s_e, assumed_floor):
    """
    How many times the observed noise exceeds an assumed thermal floor
    """
    if not assumed_floor > 0:
        raise DomainError(f"assumed noise floor must be positive, got {assumed_floor}")
    return observed_s_e / assumed_floor
