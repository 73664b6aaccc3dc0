"""Belief tracking over the primary link level and the greedy mode selector."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ._jit import njit


class Action(IntEnum):
    COOPERATE = 0
    UNDERLAY = 1


class InvalidMagnitudesError(ValueError):
    pass


@dataclass(frozen=True)
class OutageModel:
    """Target rates (bits/s/Hz) and the SNR thresholds they imply."""

    R_p: float
    R_s: float

    @property
    def rho_p(self) -> float:
        return 2.0**self.R_p - 1.0

    @property
    def rho_s(self) -> float:
        return 2.0**self.R_s - 1.0

    @property
    def gamma_threshold(self) -> float:
        return self.rho_p


@dataclass(frozen=True)
class RewardTable:
    A: np.ndarray
    B_mag: np.ndarray
    p_out: np.ndarray
    r_coop: np.ndarray
    r_under: np.ndarray

    def rewards(self, action: Action) -> np.ndarray:
        return self.r_coop if action == Action.COOPERATE else self.r_under


def init_belief(pi: np.ndarray) -> np.ndarray:
    return np.array(pi, dtype=np.float64, copy=True)


def update_on_observation(belief: np.ndarray, observed_level: int, matrix: np.ndarray) -> np.ndarray:
    """Next-slot prediction after overhearing the level; the prior is discarded."""
    K = matrix.shape[0]
    if not 0 <= observed_level < K:
        raise IndexError(f"observed level {observed_level} outside 0..{K - 1}")
    return np.array(matrix[observed_level], dtype=np.float64, copy=True)


def update_blind(belief: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """One-step Markov prediction, used when no feedback was overheard."""
    return np.asarray(belief, dtype=np.float64) @ matrix


def within_level_outage(
    thresholds: np.ndarray, gamma0: float, gamma_threshold: float
) -> np.ndarray:
    """P(SNR < gamma_threshold | level k) for each level.

    Levels straddling the threshold use the truncated exponential; all others
    are exactly 0 or 1.
    """
    lo, hi = thresholds[:-1], thresholds[1:]
    tails = np.exp(-thresholds / gamma0)
    pi = tails[:-1] - tails[1:]
    p_out = np.where(hi <= gamma_threshold, 1.0, 0.0)
    straddle = (lo < gamma_threshold) & (hi > gamma_threshold)
    p_out[straddle] = (tails[:-1][straddle] - np.exp(-gamma_threshold / gamma0)) / pi[straddle]
    return np.clip(p_out, 0.0, 1.0)


def build_reward_table(
    thresholds: np.ndarray,
    outage: OutageModel,
    gamma0: float,
    A,
    B_mag,
) -> RewardTable:
    K = len(thresholds) - 1
    A = np.broadcast_to(np.asarray(A, dtype=np.float64), (K,)).copy()
    B_mag = np.broadcast_to(np.asarray(B_mag, dtype=np.float64), (K,)).copy()
    if (A < 0).any() or (B_mag < 0).any():
        raise InvalidMagnitudesError("reward magnitudes must be non-negative")
    p_out = within_level_outage(thresholds, gamma0, outage.gamma_threshold)
    return RewardTable(A, B_mag, p_out, A * p_out, B_mag * (1.0 - p_out))


def expected_reward(belief: np.ndarray, table: RewardTable, action: Action) -> float:
    return float(np.dot(belief, table.rewards(Action(action))))


@njit(cache=True)
def _prefers_underlay(belief, r_coop, r_under):
    diff = 0.0
    for k in range(belief.shape[0]):
        diff += belief[k] * (r_under[k] - r_coop[k])
    return diff > 0.0


def select_action(belief: np.ndarray, table: RewardTable) -> Action:
    """Greedy one-slot choice; a tie goes to cooperation."""
    belief = np.asarray(belief, dtype=np.float64)
    if _prefers_underlay(belief, table.r_coop, table.r_under):
        return Action.UNDERLAY
    return Action.COOPERATE
