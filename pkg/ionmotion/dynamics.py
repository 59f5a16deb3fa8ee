"""
Time evolution of a motional population distribution: Doppler pre-cooling,
Raman sideband cooling cycles and heating by electric field noise, plus the
synthetic heating-rate experiment that chains them with thermometry.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp

from .errors import ContractError, DomainError, IntegrationError, TruncationError
from .fockstate import (LAMB_DICKE, TAIL_BUDGET, UPPER, PopulationDistribution,
                        edge_mass, ground_state_fraction, mean_occupation, rabi_coupling,
                        required_n_max, resize, thermal_distribution)
from .physcore import (IonSpecies, NoiseModel, RamanGeometry, TrapConfig,
                       doppler_limit_nbar, heating_rate_at, lamb_dicke)
from .spectroscopy import PEAK_RATIO, ProbeConfig, measure_nbar
from .util import spawn_generators

logger = logging.getLogger(__name__)

IDEAL = "ideal"
RECOIL = "recoil"

UNIFORM = "uniform"
GRADUATED = "graduated"

# dimensionless-time integration tolerances for the heating master equation
HEAT_RTOL = 1e-10
HEAT_ATOL = 1e-14
MAX_WINDOW = 20000


@dataclass(frozen=True)
class RepumpModel:
    """
    Motional effect of optical pumping back to the initial qubit state.
    ideal: no change. recoil: each scattered photon kicks the ion one level
    up or down (probability eta_repump^2 / 2 each).
    """
    kind: str = IDEAL
    eta_repump: float = 0.0
    photons_per_repump: float = 0.0

    def __post_init__(self):
        if self.kind not in (IDEAL, RECOIL):
            raise ContractError(f"unknown repump model {self.kind!r}")
        if self.eta_repump < 0 or self.photons_per_repump < 0:
            raise ContractError("repump recoil parameters must be non-negative")

    @property
    def kick_probability(self):
        if self.kind == IDEAL:
            return 0.0
        return min(1.0, self.eta_repump ** 2 * self.photons_per_repump)


IDEAL_REPUMP = RepumpModel()


@dataclass(frozen=True)
class CoolingSchedule:
    """
    Per-cycle upper-sideband pulse durations (s) and the repump model
    """
    durations: Tuple[float, ...]
    repump: RepumpModel = IDEAL_REPUMP
    kind: str = UNIFORM

    def __post_init__(self):
        durations = tuple(float(t) for t in self.durations)
        if any(not t > 0 for t in durations):
            raise ContractError("cooling pulse durations must be positive")
        object.__setattr__(self, "durations", durations)

    @property
    def cycles(self):
        return len(self.durations)

    @classmethod
    def uniform(cls, cycles, duration, repump=IDEAL_REPUMP):
        if cycles < 0:
            raise ContractError(f"cycle count must be non-negative, got {cycles}")
        return cls(durations=(duration,) * cycles, repump=repump, kind=UNIFORM)

    @classmethod
    def uniform_pi(cls, cycles, eta, omega0, repump=IDEAL_REPUMP, mode=LAMB_DICKE):
        """
        Every pulse is the upper-sideband pi pulse of |1>
        """
        return cls.uniform(cycles, pi_time(1, eta, omega0, mode), repump)

    @classmethod
    def graduated(cls, cycles, eta, omega0, start_level, repump=IDEAL_REPUMP, mode=LAMB_DICKE):
        """
        Pulse k is the upper-sideband pi pulse of level
        ceil(start_level (cycles - k) / cycles), so the pulses lengthen from the
        pi time of start_level down to that of |1> as the ion cools.
        """
        if cycles < 0:
            raise ContractError(f"cycle count must be non-negative, got {cycles}")
        if start_level < 1:
            raise ContractError(f"start level must be at least 1, got {start_level}")
        targets = [max(1, math.ceil(start_level * (cycles - k) / cycles)) for k in range(cycles)]
        durations = tuple(pi_time(m, eta, omega0, mode) for m in targets)
        return cls(durations=durations, repump=repump, kind=GRADUATED)


def graduated_start_level(nbar):
    """
    Top target level for a graduated schedule starting from a thermal state
    of mean nbar
    """
    return max(1, math.ceil(5 * nbar))


def pi_time(level, eta, omega0, mode=LAMB_DICKE):
    coupling = abs(rabi_coupling(level, UPPER, eta, omega0, mode))
    if coupling == 0:
        raise DomainError(f"no upper-sideband coupling from level {level}")
    return math.pi / coupling


@dataclass(frozen=True, eq=False)
class HeatingSeries:
    """
    Mean occupation vs. heating delay, with one standard error per point
    """
    delays: np.ndarray
    nbar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, name), dtype=float).ravel()
                  for name in ("delays", "nbar", "sigma")]
        if len({a.size for a in arrays}) != 1:
            raise ContractError("heating series columns differ in length")
        delays, nbar, sigma = arrays
        if np.any(delays < 0):
            raise ContractError("heating delays must be non-negative")
        if np.any(np.diff(delays) <= 0):
            raise ContractError("heating delays must be strictly increasing")
        if np.any(sigma < 0) or np.any(~np.isfinite(sigma)):
            raise ContractError("uncertainties must be finite and non-negative")
        for name, arr in zip(("delays", "nbar", "sigma"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.delays.size

    def points(self):
        return list(zip(self.delays.tolist(), self.nbar.tolist(), self.sigma.tolist()))


def doppler_cool(ion: IonSpecies, omega_x, n_max=None):
    """
    Doppler cooling is represented by its fixed point, a thermal state at the
    Doppler limit
    """
    return thermal_distribution(doppler_limit_nbar(ion, omega_x), n_max)


def _apply_repump(probs, repump: RepumpModel):
    kick = repump.kick_probability
    if kick == 0:
        return probs
    half = kick / 2
    kicked = probs * (1 - kick)
    kicked[1:] += half * probs[:-1]
    kicked[:-1] += half * probs[1:]
    # no level below 0: the down-kick of |0> leaves it in place
    kicked[0] += half * probs[0]
    # no level above n_max: reflect
    kicked[-1] += half * probs[-1]
    if kicked[-1] >= TAIL_BUDGET:
        raise TruncationError(
            f"repump recoil pushes population {kicked[-1]:.2e} to the window edge n_max={probs.size - 1}")
    return kicked


def raman_cooling_cycle(dist: PopulationDistribution, eta, omega0, t_pulse,
                        repump: RepumpModel = IDEAL_REPUMP, mode=LAMB_DICKE):
    """
    One cooling cycle: an upper-sideband pulse of length t_pulse moves the
    fraction sin^2(Omega_{n,n-1} t / 2) of every level n >= 1 down by one,
    then the repump acts.
    """
    if not isinstance(dist, PopulationDistribution):
        raise ContractError("raman_cooling_cycle needs a PopulationDistribution")
    if not t_pulse > 0:
        raise ContractError(f"pulse duration must be positive, got {t_pulse}")
    probs = np.array(dist.probabilities)
    couplings = rabi_coupling(dist.levels[1:], UPPER, eta, omega0, mode)
    moved = probs[1:] * np.sin(couplings * t_pulse / 2) ** 2
    probs[1:] -= moved
    probs[:-1] += moved
    probs = _apply_repump(probs, repump)
    return PopulationDistribution.from_unnormalized(probs)


def run_cooling(dist: PopulationDistribution, schedule: CoolingSchedule, eta, omega0, mode=LAMB_DICKE):
    """
    Apply the schedule cycle by cycle. Returns the final distribution and the
    mean occupation before the first and after every cycle.
    """
    dist, trajectory, _ = trace_cooling(dist, schedule, eta, omega0, mode)
    return dist, trajectory


def trace_cooling(dist: PopulationDistribution, schedule: CoolingSchedule, eta, omega0,
                  mode=LAMB_DICKE):
    """
    run_cooling that also records the ground-state fraction. Returns the
    final distribution, then n̄ and P_0 before the first and after every cycle.
    """
    nbar = [mean_occupation(dist)]
    ground = [ground_state_fraction(dist)]
    for t_pulse in schedule.durations:
        dist = raman_cooling_cycle(dist, eta, omega0, t_pulse, schedule.repump, mode)
        nbar.append(mean_occupation(dist))
        ground.append(ground_state_fraction(dist))
    logger.debug("cooled from nbar=%.4g to %.4g in %d cycles", nbar[0], nbar[-1], schedule.cycles)
    return dist, np.array(nbar), np.array(ground)


def heating_generator(n_max):
    """
    Generator of the equal-rate birth-death process in units of ndot:
    up n -> n+1 at rate n+1, down n -> n-1 at rate n. The top level has no
    up transition so the truncated generator conserves probability.
    """
    n = np.arange(n_max + 1, dtype=float)
    diagonal = -(2 * n + 1)
    diagonal[-1] = -n_max
    off = n[1:]
    return scipy.sparse.diags([off, diagonal, off], offsets=[-1, 0, 1], format="csr")


def _integrate_heating(probs, ndot_tau):
    generator = heating_generator(probs.size - 1)
    solution = solve_ivp(lambda _, p: generator @ p, (0.0, ndot_tau), probs,
                         method="DOP853", rtol=HEAT_RTOL, atol=HEAT_ATOL)
    if not solution.success:
        raise IntegrationError(f"heating integration failed: {solution.message}")
    result = solution.y[:, -1]
    drift = abs(result.sum() - 1.0)
    if drift > TAIL_BUDGET:
        raise IntegrationError(f"heating integration drifted from normalization by {drift:.2e}")
    return np.clip(result, 0.0, None)


def heat_evolve(dist: PopulationDistribution, ndot, tau):
    """
    Evolve under dP_n/dt = ndot [n P_{n-1} + (n+1) P_{n+1} - (2n+1) P_n] for
    time tau. The mean grows as nbar(0) + ndot tau.

    The window grows as needed so the top level stays below the tail budget;
    the result may therefore have a larger n_max than the input.
    """
    if not ndot >= 0:
        raise DomainError(f"heating rate must be non-negative, got {ndot}")
    if not tau >= 0:
        raise DomainError(f"heating time must be non-negative, got {tau}")
    ndot_tau = ndot * tau
    if ndot_tau == 0:
        return dist
    final_nbar = mean_occupation(dist) + ndot_tau
    n_work = max(dist.n_max, required_n_max(final_nbar, TAIL_BUDGET * 1e-3), 20)
    while n_work <= MAX_WINDOW:
        heated = PopulationDistribution.from_unnormalized(
            _integrate_heating(np.array(resize(dist, n_work).probabilities), ndot_tau))
        spill = edge_mass(heated)
        if spill < TAIL_BUDGET:
            return heated
        logger.debug("heating window n_max=%d too small (edge mass %.2e), doubling", n_work, spill)
        n_work *= 2
    raise TruncationError(f"heating to nbar={final_nbar:g} needs a window beyond n_max={MAX_WINDOW}")


def ground_state_heating_solution(ndot_tau, n_max):
    """
    Closed-form populations after heating |0> for ndot_tau quanta:
    P_n = x^n / (1 + x)^(n+1) with x = ndot_tau
    """
    n = np.arange(n_max + 1)
    x = float(ndot_tau)
    weights = x ** n / (1 + x) ** (n + 1)
    return PopulationDistribution.from_unnormalized(weights)


def _validate_delays(delays):
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise ContractError("at least one heating delay is required")
    if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
        raise ContractError("heating delays must be non-negative and strictly increasing")
    return delays


def cool_from_doppler(ion: IonSpecies, trap: TrapConfig, geometry: RamanGeometry,
                      schedule: CoolingSchedule, mode=LAMB_DICKE):
    """
    Doppler cooling followed by the Raman cooling schedule
    """
    eta = lamb_dicke(geometry, ion, trap.omega_x)
    return run_cooling(doppler_cool(ion, trap.omega_x), schedule, eta, geometry.omega0, mode)


def run_heating_experiment(ion: IonSpecies, trap: TrapConfig, geometry: RamanGeometry,
                           noise: NoiseModel, schedule: CoolingSchedule, probe: ProbeConfig,
                           delays: Sequence[float], shots=None, seed=0, method=PEAK_RATIO,
                           mode=LAMB_DICKE, jobs=1):
    """
    Synthetic heating-rate measurement: cool, wait each delay, measure nbar
    by sideband thermometry with the probe's shot count (or `shots`). A probe
    without a pinned t_probe uses the ground-state pi time at this trap's eta.

    Each delay gets its own random stream spawned from `seed`, so the series
    does not depend on `jobs`.
    """
    delays = _validate_delays(delays)
    if shots is not None:
        probe = probe.with_shots(shots)
    eta = lamb_dicke(geometry, ion, trap.omega_x)
    probe = probe.resolved(eta, geometry.omega0, mode)
    cooled, _ = cool_from_doppler(ion, trap, geometry, schedule, mode)
    ndot = heating_rate_at(noise, ion, trap)
    logger.info("heating %s at ndot=%.4g quanta/s over %d delays, t_probe=%.4g us",
                trap.label or "trap", ndot, delays.size, probe.t_probe * 1e6)

    heated = []
    dist, elapsed = cooled, 0.0
    for delay in delays:
        dist = heat_evolve(dist, ndot, delay - elapsed)
        elapsed = delay
        heated.append(dist)

    generators = spawn_generators(seed, delays.size)

    def measure(item):
        state, rng = item
        return measure_nbar(state, eta, geometry.omega0, probe, method=method, mode=mode, rng=rng)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(measure, zip(heated, generators)))
    nbar = [value for value, _ in results]
    sigma = [error for _, error in results]
    return HeatingSeries(delays=delays, nbar=nbar, sigma=sigma)


@dataclass(frozen=True)
class SweepPoint:
    omega_x: float
    heating_rate: float
    sigma: float = 0.0


def sweep_heating_rates(ion: IonSpecies, trap: TrapConfig, geometry: RamanGeometry,
                        noise: NoiseModel, frequencies: Sequence[float], schedule_for=None,
                        probe: ProbeConfig = None, delays=None, seed=0, method=PEAK_RATIO,
                        mode=LAMB_DICKE, jobs=1):
    """
    Heating rate vs. secular frequency. Without a probe the rates come straight
    from the noise model; with one, each frequency runs a synthetic heating
    experiment (schedule_for(trap) supplies its cooling schedule) and the
    rate is the fitted slope. A probe that follows the trap is re-timed at
    every frequency; a pinned t_probe is used as given.
    """
    from .analysis import fit_heating_rate

    frequencies = [float(w) for w in frequencies]
    if probe is None:
        return [SweepPoint(w, heating_rate_at(noise, ion, trap.with_frequency(w))) for w in frequencies]
    if schedule_for is None or delays is None:
        raise ContractError("a measured sweep needs a schedule factory and delays")
    seeds = np.random.SeedSequence(seed).generate_state(len(frequencies)).tolist()

    def measure(item):
        omega_x, point_seed = item
        point_trap = trap.with_frequency(omega_x)
        series = run_heating_experiment(ion, point_trap, geometry, noise, schedule_for(point_trap),
                                        probe, delays, seed=point_seed, method=method, mode=mode)
        fit = fit_heating_rate(series)
        return SweepPoint(omega_x, fit.value("slope"), fit.uncertainty("slope"))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(measure, zip(frequencies, seeds)))
