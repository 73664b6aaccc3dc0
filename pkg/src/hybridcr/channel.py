"""Finite-state Markov model of a Rayleigh-fading link.

The received SNR is exponential with mean ``gamma0``.  It is quantised into
``K`` levels whose boundaries are spaced by a constant achievable-rate step
``eta / B``; the level process moves at most one step per slot with
probabilities derived from the level crossing rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit

SPEED_OF_LIGHT = 3.0e8


class InvalidParamsError(ValueError):
    """Channel parameters violate their domain constraints."""


class ModelInvalidError(ValueError):
    """The slot is too long (or Doppler too high) for an adjacent-level chain."""

    def __init__(self, message: str, level: int):
        super().__init__(message)
        self.level = level


@dataclass(frozen=True)
class ChannelParams:
    K: int
    eta: float
    B: float
    gamma0: float
    fdopp: float
    tau_pkt: float

    def __post_init__(self):
        problems = []
        if int(self.K) != self.K or self.K < 2:
            problems.append(f"K must be an integer >= 2 (got {self.K})")
        if not self.eta > 0:
            problems.append(f"eta must be > 0 (got {self.eta})")
        if not self.B > 0:
            problems.append(f"B must be > 0 (got {self.B})")
        if not self.gamma0 > 0:
            problems.append(f"gamma0 must be > 0 (got {self.gamma0})")
        if not self.fdopp >= 0:
            problems.append(f"fdopp must be >= 0 (got {self.fdopp})")
        if not self.tau_pkt > 0:
            problems.append(f"tau_pkt must be > 0 (got {self.tau_pkt})")
        if problems:
            raise InvalidParamsError("; ".join(problems))


def doppler_frequency(speed: float, carrier: float, c: float = SPEED_OF_LIGHT) -> float:
    """Maximum Doppler shift ``v * f_c / c`` in Hz."""
    return speed * carrier / c


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def build_thresholds(params: ChannelParams) -> np.ndarray:
    """Level boundaries ``e^{k eta/B} - 1`` for k < K, followed by ``+inf``.

    Level ``k`` is the half-open SNR interval ``[bounds[k], bounds[k+1])``.
    """
    if not isinstance(params, ChannelParams):
        raise InvalidParamsError("expected ChannelParams")
    k = np.arange(params.K, dtype=np.float64)
    bounds = np.empty(params.K + 1)
    bounds[:-1] = np.expm1(k * params.eta / params.B)
    bounds[-1] = np.inf
    return bounds


def stationary_distribution(thresholds: np.ndarray, gamma0: float) -> np.ndarray:
    """Probability mass of each level under an exponential SNR with mean ``gamma0``."""
    if not gamma0 > 0:
        raise InvalidParamsError(f"gamma0 must be > 0 (got {gamma0})")
    tail = np.exp(-np.asarray(thresholds, dtype=np.float64) / gamma0)
    return tail[:-1] - tail[1:]


def level_crossing_rate(gamma_level: float, gamma0: float, fdopp: float) -> float:
    """Mean number of crossings per second of the SNR boundary ``gamma_level``."""
    if gamma_level < 0 or not gamma0 > 0 or fdopp < 0:
        raise InvalidParamsError("need gamma_level >= 0, gamma0 > 0, fdopp >= 0")
    if math.isinf(gamma_level):
        return 0.0
    ratio = gamma_level / gamma0
    return math.sqrt(2.0 * math.pi * ratio) * fdopp * math.exp(-ratio)


def transition_matrix(params: ChannelParams) -> np.ndarray:
    """Tridiagonal per-slot transition matrix of the level chain.

    Raises ModelInvalidError naming the first level whose outgoing
    probabilities exceed one.
    """
    bounds = build_thresholds(params)
    pi = stationary_distribution(bounds, params.gamma0)
    K = params.K
    lcr = np.array(
        [level_crossing_rate(b, params.gamma0, params.fdopp) for b in bounds[:-1]]
    )
    U = np.zeros((K, K))
    for k in range(K):
        if not pi[k] > 0:
            raise ModelInvalidError(f"level {k} has zero stationary probability", level=k)
        up = lcr[k + 1] * params.tau_pkt / pi[k] if k < K - 1 else 0.0
        down = lcr[k] * params.tau_pkt / pi[k] if k > 0 else 0.0
        if up > 1.0 or down > 1.0 or up + down > 1.0:
            raise ModelInvalidError(
                f"level {k}: outgoing transition probability {up + down:.6g} > 1; "
                f"reduce tau_pkt ({params.tau_pkt}) or fdopp ({params.fdopp})",
                level=k,
            )
        if k < K - 1:
            U[k, k + 1] = up
        if k > 0:
            U[k, k - 1] = down
        U[k, k] = 1.0 - up - down
    return U


@njit(cache=True)
def _next_level(U, level, u):
    K = U.shape[0]
    lo = level - 1 if level > 0 else 0
    hi = level + 1 if level < K - 1 else K - 1
    acc = 0.0
    for j in range(lo, hi):
        acc += U[level, j]
        if u < acc:
            return j
    return hi


@njit(cache=True)
def _snr_in_level(level, bounds, tails, gamma0, u):
    # inverse CDF of the exponential truncated to [bounds[level], bounds[level+1])
    a = tails[level]
    x = -gamma0 * math.log(a - u * (a - tails[level + 1]))
    if x < bounds[level]:
        x = bounds[level]
    elif x >= bounds[level + 1]:
        x = np.nextafter(bounds[level + 1], 0.0)
    return x


def sample_next_level(matrix: np.ndarray, level: int, rng: np.random.Generator) -> int:
    """Advance the chain one slot from ``level`` using a single uniform draw."""
    return int(_next_level(matrix, int(level), rng.random()))


def sample_snr_in_level(
    level: int, thresholds: np.ndarray, gamma0: float, rng: np.random.Generator
) -> float:
    """Instantaneous SNR conditioned on the chain being in ``level``."""
    level = int(level)
    edges = np.asarray(thresholds[level:level + 2], dtype=np.float64)
    return float(_snr_in_level(0, edges, np.exp(-edges / gamma0), gamma0, rng.random()))


@dataclass(frozen=True)
class ChannelModel:
    """Derived quantities of a validated :class:`ChannelParams`."""

    params: ChannelParams
    bounds: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    tails: np.ndarray = field(repr=False)

    @classmethod
    def from_params(cls, params: ChannelParams) -> "ChannelModel":
        bounds = build_thresholds(params)
        pi = stationary_distribution(bounds, params.gamma0)
        U = transition_matrix(params)
        tails = np.exp(-bounds / params.gamma0)
        for arr in (bounds, pi, U, tails):
            arr.setflags(write=False)
        return cls(params, bounds, pi, U, tails)

    @property
    def K(self) -> int:
        return self.params.K

    def level_of(self, snr: float) -> int:
        return int(np.searchsorted(self.bounds, snr, side="right") - 1)
