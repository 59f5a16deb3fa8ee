"""
Truncated Fock-space population distributions of one motional mode and the
Raman coupling strengths between its levels.

Distributions are classical populations P_n, n = 0..n_max. The truncation
window is chosen so that the population beyond n_max stays below TAIL_BUDGET;
operations that cannot guarantee this raise TruncationError.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, TruncationError

logger = logging.getLogger(__name__)

TAIL_BUDGET = 1e-9
NORM_TOLERANCE = 1e-9
MAX_ORDER = 2

LAMB_DICKE = "lamb_dicke"
EXACT = "exact"
COUPLING_MODES = (LAMB_DICKE, EXACT)

UPPER = 1
CARRIER = 0
LOWER = -1


@dataclass(frozen=True, eq=False)
class PopulationDistribution:
    """
    Occupation probabilities of the levels 0..n_max. The array is copied and
    made read-only on construction.
    """
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probabilities, dtype=float).ravel()
        if probs.size < 2:
            raise ContractError("a distribution needs at least the levels 0 and 1 (n_max >= 1)")
        if not np.all(np.isfinite(probs)):
            raise ContractError("populations must be finite")
        if probs.min() < -NORM_TOLERANCE:
            raise ContractError(f"negative population {probs.min():.3e}")
        probs = np.clip(probs, 0.0, None)
        total = probs.sum()
        if abs(total - 1.0) > NORM_TOLERANCE:
            raise ContractError(f"populations sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def n_max(self):
        return self.probabilities.size - 1

    @property
    def levels(self):
        return np.arange(self.probabilities.size)

    def __len__(self):
        return self.probabilities.size

    def __repr__(self):
        return f"PopulationDistribution(n_max={self.n_max}, nbar={mean_occupation(self):.6g})"

    @classmethod
    def from_unnormalized(cls, weights):
        weights = np.asarray(weights, dtype=float)
        return cls(weights / weights.sum())


def default_n_max(nbar):
    """
    Starting window for a distribution of mean nbar: max(20, ceil(10 nbar + 10))
    """
    return max(20, math.ceil(10 * nbar + 10))


def thermal_tail_mass(nbar, n_max):
    """
    Population of a thermal distribution above n_max
    """
    if nbar == 0:
        return 0.0
    return (nbar / (1 + nbar)) ** (n_max + 1)


def required_n_max(nbar, budget=TAIL_BUDGET):
    """
    Smallest window whose thermal tail mass is below budget
    """
    if nbar == 0:
        return 1
    q = nbar / (1 + nbar)
    return max(1, math.ceil(math.log(budget) / math.log(q)))


def fock_state(n, n_max=None):
    """
    Pure number state |n>
    """
    if n < 0:
        raise DomainError(f"level must be non-negative, got {n}")
    n_max = max(n + 1, 1) if n_max is None else n_max
    if n > n_max:
        raise ContractError(f"level {n} outside the window 0..{n_max}")
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return PopulationDistribution(probs)


def ground_state(n_max=1):
    return fock_state(0, n_max)


def thermal_distribution(nbar, n_max=None):
    """
    Thermal (geometric) populations P_n = nbar^n / (1 + nbar)^(n+1),
    renormalized over 0..n_max.

    Without an explicit n_max the window starts at default_n_max(nbar) and is
    raised until the tail mass is below TAIL_BUDGET; an explicit n_max that is
    too small raises TruncationError.
    """
    if not nbar >= 0 or not math.isfinite(nbar):
        raise DomainError(f"nbar must be non-negative, got {nbar}")
    if n_max is None:
        n_max = default_n_max(nbar)
        if thermal_tail_mass(nbar, n_max) >= TAIL_BUDGET:
            raised = required_n_max(nbar)
            logger.debug("thermal window for nbar=%g raised from %d to %d", nbar, n_max, raised)
            n_max = raised
    elif n_max < 1:
        raise ContractError(f"n_max must be at least 1, got {n_max}")
    tail = thermal_tail_mass(nbar, n_max)
    if tail >= TAIL_BUDGET:
        raise TruncationError(
            f"thermal nbar={nbar:g} leaves tail mass {tail:.2e} above n_max={n_max}; "
            f"need n_max >= {required_n_max(nbar)}")
    if nbar == 0:
        return ground_state(n_max)
    q = nbar / (1 + nbar)
    weights = (1 - q) * q ** np.arange(n_max + 1)
    return PopulationDistribution.from_unnormalized(weights)


def mean_occupation(dist: PopulationDistribution):
    return float(np.dot(dist.levels, dist.probabilities))


def ground_state_fraction(dist: PopulationDistribution):
    return float(dist.probabilities[0])


def edge_mass(dist: PopulationDistribution, width=1):
    """
    Population in the top `width` levels of the window
    """
    return float(dist.probabilities[-width:].sum())


def resize(dist: PopulationDistribution, n_max):
    """
    Same populations in a window 0..n_max; shrinking may only drop less than
    TAIL_BUDGET of population
    """
    if n_max < 1:
        raise ContractError(f"n_max must be at least 1, got {n_max}")
    probs = dist.probabilities
    if n_max >= dist.n_max:
        return PopulationDistribution(np.concatenate([probs, np.zeros(n_max - dist.n_max)]))
    dropped = probs[n_max + 1:].sum()
    if dropped >= TAIL_BUDGET:
        raise TruncationError(f"shrinking to n_max={n_max} drops population {dropped:.2e}")
    return PopulationDistribution.from_unnormalized(probs[:n_max + 1])


def total_variation(a: PopulationDistribution, b: PopulationDistribution):
    size = max(len(a), len(b))
    pa = np.zeros(size)
    pb = np.zeros(size)
    pa[:len(a)] = a.probabilities
    pb[:len(b)] = b.probabilities
    return 0.5 * float(np.abs(pa - pb).sum())


def generalized_laguerre(n, alpha, x):
    """
    Associated Laguerre polynomial L_n^alpha(x) for an integer or an array of
    integer degrees, via the three-term recurrence
        k L_k = (2k - 1 + alpha - x) L_{k-1} - (k - 1 + alpha) L_{k-2}
    """
    degrees = np.asarray(n, dtype=int)
    top = int(degrees.max()) if degrees.size else 0
    values = np.empty(top + 1)
    values[0] = 1.0
    if top >= 1:
        values[1] = 1.0 + alpha - x
    for k in range(2, top + 1):
        values[k] = ((2 * k - 1 + alpha - x) * values[k - 1] - (k - 1 + alpha) * values[k - 2]) / k
    result = values[degrees]
    return float(result) if result.ndim == 0 else result


def rabi_coupling(n, s, eta, omega0, mode=LAMB_DICKE):
    """
    Rabi frequency of the transition n -> n - s.

    s = +1 is the first upper sideband (n -> n-1), s = -1 the first lower
    sideband (n -> n+1), s = 0 the carrier. Transitions below the ground
    state have zero coupling. `mode` selects the leading-order Lamb-Dicke
    expressions or the full Fock matrix element

        Omega0 exp(-eta^2/2) eta^|s| sqrt(n_<! / n_>!) L_{n_<}^|s|(eta^2)

    Works elementwise on arrays of n; the result depends only on the pair of
    levels, so n -> n+1 and n+1 -> n couple identically.
    """
    if mode not in COUPLING_MODES:
        raise ContractError(f"unknown coupling mode {mode!r}")
    if abs(s) > MAX_ORDER:
        raise ContractError(f"sideband order {s} outside |s| <= {MAX_ORDER}")
    if eta < 0:
        raise DomainError(f"Lamb-Dicke parameter must be non-negative, got {eta}")
    levels = np.asarray(n, dtype=int)
    if np.any(levels < 0):
        raise DomainError("levels must be non-negative")
    target = levels - s
    order = abs(s)
    n_lo = np.clip(np.minimum(levels, target), 0, None)
    # (n_lo + 1)(n_lo + 2)...(n_hi) = n_>! / n_<!
    ladder = np.ones(levels.shape)
    for j in range(1, order + 1):
        ladder = ladder * (n_lo + j)

    if mode == LAMB_DICKE:
        coupling = omega0 * eta ** order * np.sqrt(ladder) / math.factorial(order)
    else:
        eta_sq = eta * eta
        coupling = (omega0 * math.exp(-eta_sq / 2) * eta ** order
                    * generalized_laguerre(n_lo, order, eta_sq) / np.sqrt(ladder))
    coupling = np.where(target < 0, 0.0, coupling)
    return float(coupling) if coupling.ndim == 0 else coupling


def sideband_label(s):
    return {UPPER: "upper", CARRIER: "carrier", LOWER: "lower"}.get(s, f"order {s:+d}")
