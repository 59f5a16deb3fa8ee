"""
Raman sideband spectra, sideband Rabi-flopping traces, finite-shot detection
and sideband-asymmetry thermometry.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from .errors import ContractError, DomainError, FitError, UnphysicalRatioError
from .fockstate import (LAMB_DICKE, LOWER, UPPER, PopulationDistribution,
                        rabi_coupling, required_n_max)
from .physcore import TWO_PI
from .util import as_generator, is_infinite

logger = logging.getLogger(__name__)

PEAK_RATIO = "peak_ratio"
FLOP_FIT = "flop_fit"
METHODS = (PEAK_RATIO, FLOP_FIT)

DEFAULT_FIDELITY = 0.997

# smallest lower-sideband transfer a peak ratio is read from
MIN_LOWER_TRANSFER = 0.05


@dataclass(frozen=True, eq=False)
class ProbeConfig:
    """
    Probe settings: pulse length t_probe (s), detunings from the carrier
    (rad/s), sideband orders included in spectra, shots per point (math.inf
    for exact probabilities) and the symmetric detection fidelity.
    flop_times are the pulse lengths of Rabi-flopping traces (s).

    t_probe None follows the trap: it becomes the pi time of the ground-state
    lower sideband for whatever eta the probe is used at (see `resolved`).
    """
    t_probe: Optional[float] = None
    detuning_grid: Sequence[float] = ()
    orders: Tuple[int, ...] = (LOWER, UPPER)
    shots: float = math.inf
    detection_fidelity: float = DEFAULT_FIDELITY
    flop_times: Sequence[float] = ()

    def __post_init__(self):
        if self.t_probe is not None and not self.t_probe > 0:
            raise ContractError(f"probe duration must be positive, got {self.t_probe}")
        if not is_infinite(self.shots):
            if int(self.shots) != self.shots or self.shots < 1:
                raise ContractError(f"shots must be a positive integer or inf, got {self.shots}")
            object.__setattr__(self, "shots", int(self.shots))
        else:
            object.__setattr__(self, "shots", math.inf)
        if not 0.5 < self.detection_fidelity <= 1:
            raise ContractError(f"detection fidelity must lie in (0.5, 1], got {self.detection_fidelity}")
        if any(abs(s) > 2 for s in self.orders):
            raise ContractError("only sideband orders |s| <= 2 are supported")
        for name in ("detuning_grid", "flop_times"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.flop_times < 0):
            raise ContractError("flop times must be non-negative")
        object.__setattr__(self, "orders", tuple(int(s) for s in self.orders))

    @property
    def noiseless(self):
        return is_infinite(self.shots)

    def with_shots(self, shots):
        return replace(self, shots=shots)

    @property
    def follows_trap(self):
        return self.t_probe is None

    def resolved(self, eta, omega0, mode=LAMB_DICKE):
        """
        This probe with a concrete pulse length; a pinned t_probe is kept
        """
        if not self.follows_trap:
            return self
        return replace(self, t_probe=ground_pi_time(eta, omega0, mode))


def ground_pi_time(eta, omega0, mode=LAMB_DICKE):
    """
    Pi time of the lower sideband |0> -> |1>, pi / (eta Omega0) to leading order
    """
    coupling = rabi_coupling(0, LOWER, eta, omega0, mode)
    if not coupling > 0:
        raise DomainError(f"no lower-sideband coupling at eta={eta}")
    return math.pi / coupling


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Bright-state probability vs. detuning from the carrier (rad/s)
    """
    delta: np.ndarray
    p_bright: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, name), dtype=float).ravel()
                  for name in ("delta", "p_bright", "sigma")]
        if len({a.size for a in arrays}) != 1:
            raise ContractError("spectrum columns differ in length")
        if np.any(arrays[1] < 0) or np.any(arrays[1] > 1):
            raise ContractError("spectrum probabilities must lie in [0, 1]")
        for name, arr in zip(("delta", "p_bright", "sigma"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def peak(self, center, half_width):
        """
        Largest probability within center +- half_width and its detuning
        """
        mask = np.abs(self.delta - center) <= half_width
        if not np.any(mask):
            raise ContractError("no grid points in the requested window")
        index = np.flatnonzero(mask)[np.argmax(self.p_bright[mask])]
        return float(self.delta[index]), float(self.p_bright[index])


@dataclass(frozen=True, eq=False)
class FlopTrace:
    order: int
    times: np.ndarray
    p_bright: np.ndarray
    sigma: np.ndarray

    def points(self):
        return list(zip(self.times.tolist(), self.p_bright.tolist()))


def flop_probability(omega, delta_detuning, t):
    """
    Transfer probability of a two-level system driven at Rabi frequency
    omega and detuning delta for a time t:
        omega^2 / (omega^2 + delta^2) sin^2(sqrt(omega^2 + delta^2) t / 2)
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError("pulse duration must be non-negative")
    omega = np.asarray(omega, dtype=float)
    delta_detuning = np.asarray(delta_detuning, dtype=float)
    generalized_sq = omega ** 2 + delta_detuning ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(generalized_sq > 0, omega ** 2 / generalized_sq, 0.0)
    p = weight * np.sin(np.sqrt(generalized_sq) * np.asarray(t, dtype=float) / 2) ** 2
    return float(p) if np.ndim(p) == 0 else p


def effective_probability(p_true, fidelity):
    p_true = np.asarray(p_true, dtype=float)
    return fidelity * p_true + (1 - fidelity) * (1 - p_true)


def simulate_detection(p_true, shots, fidelity, rng=None):
    """
    Binomial detection with symmetric state-detection error. Returns the
    empirical bright fraction and its binomial standard error; infinite shots
    return the exact effective probability with zero error.
    """
    p_eff = np.clip(effective_probability(p_true, fidelity), 0.0, 1.0)
    if is_infinite(shots):
        p_est, sigma = p_eff, np.zeros_like(p_eff)
    else:
        if shots < 1:
            raise ContractError(f"shots must be at least 1, got {shots}")
        counts = as_generator(rng).binomial(int(shots), p_eff)
        p_est = counts / shots
        sigma = np.sqrt(p_est * (1 - p_est) / shots)
    if np.ndim(p_est) == 0:
        return float(p_est), float(sigma)
    return p_est, sigma


def correct_detection(p_est, sigma, fidelity):
    """
    Invert the symmetric detection error: p_true = (p_eff - (1 - F)) / (2F - 1)
    """
    scale = 2 * fidelity - 1
    p_true = np.clip((np.asarray(p_est) - (1 - fidelity)) / scale, 0.0, 1.0)
    sigma = np.asarray(sigma) / scale
    if np.ndim(p_true) == 0:
        return float(p_true), float(sigma)
    return p_true, sigma


def _order_probabilities(dist, s, eta, omega0, detuning, t, mode):
    couplings = rabi_coupling(dist.levels, s, eta, omega0, mode)
    per_level = flop_probability(couplings[None, :], np.asarray(detuning, dtype=float)[:, None], t)
    return per_level @ dist.probabilities


def synthesize_spectrum(dist: PopulationDistribution, eta, omega0, probe: ProbeConfig, omega_x,
                        mode=LAMB_DICKE, rng=None):
    """
    Bright-state probability at each probe detuning delta: the sum over the
    probe's orders s and the levels n of P_n times the detuned transfer
    probability on n -> n - s, which is resonant at delta = s omega_x.
    Overlapping orders saturating above 1 are clamped with a warning.
    """
    probe = probe.resolved(eta, omega0, mode)
    deltas = probe.detuning_grid
    total = np.zeros(deltas.size)
    for s in probe.orders:
        total += _order_probabilities(dist, s, eta, omega0, deltas - s * omega_x, probe.t_probe, mode)
    if np.any(total > 1):
        logger.warning("spectrum saturates at %d grid points; clamped to 1", int(np.sum(total > 1)))
        total = np.minimum(total, 1.0)
    if probe.noiseless:
        return Spectrum(delta=deltas, p_bright=total, sigma=np.zeros(deltas.size))
    p_est, sigma = simulate_detection(total, probe.shots, probe.detection_fidelity, rng)
    return Spectrum(delta=deltas, p_bright=np.atleast_1d(p_est), sigma=np.atleast_1d(sigma))


def sideband_strength(dist: PopulationDistribution, s, eta, omega0, t, mode=LAMB_DICKE):
    """
    Resonant transfer probability on order s summed over the populations:
    sum_n P_n sin^2(Omega_{n,n-s} t / 2). Accepts an array of times.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise DomainError("pulse duration must be non-negative")
    couplings = rabi_coupling(dist.levels, s, eta, omega0, mode)
    values = np.sin(np.outer(times, couplings) / 2) ** 2 @ dist.probabilities
    return float(values[0]) if np.ndim(t) == 0 else values


def rabi_flop_trace(dist: PopulationDistribution, s, eta, omega0, times, mode=LAMB_DICKE,
                    shots=math.inf, fidelity=1.0, rng=None):
    times = np.asarray(times, dtype=float).ravel()
    exact = sideband_strength(dist, s, eta, omega0, times, mode)
    if is_infinite(shots):
        return FlopTrace(order=s, times=times, p_bright=exact, sigma=np.zeros(times.size))
    p_est, sigma = simulate_detection(exact, shots, fidelity, rng)
    return FlopTrace(order=s, times=times, p_bright=np.atleast_1d(p_est), sigma=np.atleast_1d(sigma))


def nbar_from_sideband_ratio(r):
    """
    For a thermal state the upper/lower sideband ratio is nbar / (1 + nbar)
    """
    if not r >= 0:
        raise DomainError(f"sideband ratio must be non-negative, got {r}")
    if r >= 1:
        raise UnphysicalRatioError(
            f"sideband ratio {r:.4g} >= 1: the upper sideband cannot exceed the lower one")
    return r / (1 - r)


def _measured_strength(exact, probe, rng):
    if probe.noiseless:
        return exact, 0.0
    p_est, sigma = simulate_detection(exact, probe.shots, probe.detection_fidelity, rng)
    return correct_detection(p_est, sigma, probe.detection_fidelity)


def _peak_ratio(dist, eta, omega0, probe, mode, rng):
    upper, sigma_u = _measured_strength(
        sideband_strength(dist, UPPER, eta, omega0, probe.t_probe, mode), probe, rng)
    lower, sigma_l = _measured_strength(
        sideband_strength(dist, LOWER, eta, omega0, probe.t_probe, mode), probe, rng)
    floor = MIN_LOWER_TRANSFER
    if not probe.noiseless:
        floor = max(floor, 1 - probe.detection_fidelity, 1 / probe.shots)
    if lower < floor:
        raise UnphysicalRatioError(
            f"lower sideband transfer {lower:.3g} at t_probe={probe.t_probe * 1e6:.4g} us is below the "
            f"resolvable {floor:.3g}; choose another probe time")
    ratio = upper / lower
    nbar = nbar_from_sideband_ratio(ratio)
    sigma_r = math.hypot(sigma_u / lower, ratio * sigma_l / lower)
    return nbar, sigma_r / (1 - ratio) ** 2


def _thermal_model(levels_cap, eta, omega0, mode):
    def model(times_pair, nbar):
        times, which = times_pair
        nbar = max(float(nbar), 0.0)
        n_max = max(levels_cap, required_n_max(nbar)) if nbar > 0 else levels_cap
        levels = np.arange(n_max + 1)
        q = nbar / (1 + nbar)
        weights = (1 - q) * q ** levels
        weights /= weights.sum()
        result = np.empty(times.size)
        for s in (UPPER, LOWER):
            mask = which == s
            couplings = rabi_coupling(levels, s, eta, omega0, mode)
            result[mask] = np.sin(np.outer(times[mask], couplings) / 2) ** 2 @ weights
        return result
    return model


def _flop_fit(dist, eta, omega0, probe, mode, rng):
    times = probe.flop_times
    if times.size < 2:
        times = np.linspace(0.0, 2.5 * probe.t_probe, 26)[1:]
    traces = [rabi_flop_trace(dist, s, eta, omega0, times, mode, probe.shots,
                              probe.detection_fidelity, rng) for s in (UPPER, LOWER)]
    observed = []
    errors = []
    for trace in traces:
        if probe.noiseless:
            observed.append(trace.p_bright)
            errors.append(np.zeros(times.size))
        else:
            p, sigma = correct_detection(trace.p_bright, trace.sigma, probe.detection_fidelity)
            observed.append(p)
            # empty or saturated bins report zero binomial error
            errors.append(np.maximum(sigma, 1.0 / probe.shots))
    which = np.concatenate([np.full(times.size, UPPER), np.full(times.size, LOWER)])
    x = (np.concatenate([times, times]), which)
    y = np.concatenate(observed)
    guess = 0.1
    try:
        guess = max(_peak_ratio(dist, eta, omega0, probe.with_shots(math.inf), mode, None)[0], 1e-3)
    except UnphysicalRatioError:
        pass
    kwargs = {}
    if not probe.noiseless:
        kwargs = {"sigma": np.concatenate(errors), "absolute_sigma": True}
    try:
        params, cov = curve_fit(_thermal_model(dist.n_max, eta, omega0, mode), x, y,
                                p0=[guess], bounds=(0.0, np.inf), **kwargs)
    except (RuntimeError, ValueError) as e:
        raise FitError(f"Rabi-flop thermometry fit failed: {e}") from e
    sigma = float(np.sqrt(cov[0, 0])) if np.isfinite(cov[0, 0]) else float("inf")
    return float(params[0]), sigma


def measure_nbar(dist: PopulationDistribution, eta, omega0, probe: ProbeConfig, method=PEAK_RATIO,
                 mode=LAMB_DICKE, rng=None):
    """
    Sideband-asymmetry thermometry. peak_ratio probes both first sidebands on
    resonance for t_probe and inverts the ratio; flop_fit fits a thermal
    state to Rabi-flopping traces on both sidebands. Returns (nbar, sigma).
    """
    if method not in METHODS:
        raise ContractError(f"unknown thermometry method {method!r}")
    rng = as_generator(rng)
    probe = probe.resolved(eta, omega0, mode)
    if method == PEAK_RATIO:
        return _peak_ratio(dist, eta, omega0, probe, mode, rng)
    return _flop_fit(dist, eta, omega0, probe, mode, rng)


def sideband_grid(omega_x, orders, half_width, points):
    """
    Detunings covering a window of +-half_width around every order's resonance
    """
    if points < 2:
        raise ContractError("a spectrum window needs at least two points")
    offsets = np.linspace(-half_width, half_width, points)
    return np.concatenate([s * omega_x + offsets for s in sorted(orders)])


def grid_from_khz(omega_x, orders, half_width_khz, points):
    return sideband_grid(omega_x, orders, TWO_PI * half_width_khz * 1e3, points)
