"""Slot-level simulation of the primary/secondary access protocol.

Every slot consumes exactly ``DRAWS_PER_SLOT`` uniforms, one per random event
(see the ``_U_*`` column indices), whether or not the event is needed.  Runs
that share a seed therefore share their random numbers across modes and
power fractions, and the numba and pure-Python paths agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ._jit import njit
from .belief import RewardTable, init_belief
from .channel import ChannelModel, _next_level, _snr_in_level


class Mode(IntEnum):
    NONCOOP = 0
    COOP = 1
    HYBRID = 2

    @classmethod
    def parse(cls, name) -> "Mode":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown mode {name!r}; expected noncoop, coop or hybrid") from None

    @property
    def label(self) -> str:
        return self.name.lower()


class SlotAction(IntEnum):
    IDLE_RELAY_SERVE = 0
    IDLE_OWN_SERVE = 1
    COOPERATE_LISTEN = 2
    UNDERLAY_TRANSMIT = 3
    SILENT = 4  # non-cooperative SU during a busy slot


_A_RELAY = int(SlotAction.IDLE_RELAY_SERVE)
_A_OWN = int(SlotAction.IDLE_OWN_SERVE)
_A_COOP = int(SlotAction.COOPERATE_LISTEN)
_A_UNDERLAY = int(SlotAction.UNDERLAY_TRANSMIT)
_A_SILENT = int(SlotAction.SILENT)

# uniform columns
_U_ARRIVAL = 0
_U_LEVEL = 1
_U_SNR = 2
_U_IDLE_LINK = 3
_U_PS_DECODE = 4
_U_INTERF_PU = 5
_U_SU_SIGNAL = 6
_U_INTERF_SU = 7
DRAWS_PER_SLOT = 8

# counter slots in SimState.counters
Q_P = 0
Q_PS = 1
LEVEL = 2
SLOTS = 3
SU_DELIVERED = 4
RELAYED_DELIVERED = 5
PU_DIRECT = 6
ARRIVALS = 7
ADMITS = 8
BUSY_SLOTS = 9
CLEAN_ATTEMPTS = 10
CLEAN_SUCCESSES = 11
UNDERLAY_SLOTS = 12
FIRST_VIOLATION = 13
SUM_QP = 14
SUM_QPS = 15
N_COUNTERS = 16

# link parameter vector layout
_P_GAMMA_PS = 0
_P_GAMMA_SD = 1
_P_GAMMA_SPD = 2
_P_GAMMA_SP_INT = 3
_P_GAMMA_PSD = 4
_P_ALPHA = 5
_P_RHO_P = 6
_P_RHO_S = 7
_P_LAMBDA = 8


@dataclass(frozen=True)
class LinkBudget:
    """Mean SNRs (linear) of every link plus the underlay power fraction.

    ``gamma_spd`` is the SU to PU-destination link used to forward relayed
    packets at full power.  ``gamma_sp_int`` is the interference-to-noise
    ratio the SU causes at the PU destination at full power; an underlay
    transmission scales it by ``alpha``.  ``gamma_psd`` is the PU's
    interference at the SU destination.
    """

    gamma_pd: float
    gamma_ps: float
    gamma_sd: float
    gamma_spd: float
    gamma_sp_int: float
    gamma_psd: float
    alpha: float

    def __post_init__(self):
        for name in ("gamma_pd", "gamma_ps", "gamma_sd", "gamma_spd", "gamma_sp_int", "gamma_psd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1] (got {self.alpha})")


@dataclass
class SimState:
    counters: np.ndarray
    belief: np.ndarray
    level_hist: np.ndarray = field(repr=False)

    @classmethod
    def initial(cls, model: ChannelModel, rng: np.random.Generator) -> "SimState":
        """Empty queues, level drawn from the stationary law, belief = that law."""
        counters = np.zeros(N_COUNTERS, dtype=np.int64)
        counters[FIRST_VIOLATION] = -1
        cdf = np.cumsum(model.pi)
        counters[LEVEL] = min(int(np.searchsorted(cdf, rng.random(), side="right")), model.K - 1)
        return cls(counters, init_belief(model.pi), np.zeros(model.K, dtype=np.int64))

    def __getattr__(self, name):
        idx = _COUNTER_NAMES.get(name)
        if idx is None:
            raise AttributeError(name)
        return int(self.counters[idx])


_COUNTER_NAMES = {
    "q_p": Q_P,
    "q_ps": Q_PS,
    "pu_level": LEVEL,
    "slots": SLOTS,
    "su_delivered": SU_DELIVERED,
    "relayed_delivered": RELAYED_DELIVERED,
    "pu_direct": PU_DIRECT,
    "arrivals": ARRIVALS,
    "admits": ADMITS,
}


@dataclass(frozen=True)
class SlotOutcome:
    pu_active: bool
    action: SlotAction
    direct_success: bool
    relay_admit: bool
    su_success: bool
    relayed_success: bool
    observed_level: int | None


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    first_violation_slot: int | None = None

    def __bool__(self):
        return self.passed


@njit(cache=True)
def _exp_draw(mean, u):
    return -mean * math.log1p(-u)


@njit(cache=True, inline="always")
def _slot(st, hist, belief, scratch, U, bounds, tails, gamma0, r_coop, r_under,
          mode, prm, u, out, checked):
    K = U.shape[0]
    rho_p = prm[_P_RHO_P]
    rho_s = prm[_P_RHO_S]

    if u[_U_ARRIVAL] < prm[_P_LAMBDA]:
        st[Q_P] += 1
        st[ARRIVALS] += 1

    level = _next_level(U, st[LEVEL], u[_U_LEVEL])
    st[LEVEL] = level
    snr = _snr_in_level(level, bounds, tails, gamma0, u[_U_SNR])

    active = st[Q_P] > 0
    action = _A_SILENT
    direct = False
    admit = False
    su_ok = False
    relayed_ok = False

    if not active:
        if st[Q_PS] > 0:
            action = _A_RELAY
            if _exp_draw(prm[_P_GAMMA_SPD], u[_U_IDLE_LINK]) >= rho_p:
                relayed_ok = True
                st[Q_PS] -= 1
                st[RELAYED_DELIVERED] += 1
        else:
            action = _A_OWN
            if _exp_draw(prm[_P_GAMMA_SD], u[_U_IDLE_LINK]) >= rho_s:
                su_ok = True
                st[SU_DELIVERED] += 1
    else:
        st[BUSY_SLOTS] += 1
        hist[level] += 1
        if mode == 0:
            action = _A_SILENT
        elif mode == 1:
            action = _A_COOP
        else:
            diff = 0.0
            for k in range(K):
                diff += belief[k] * (r_under[k] - r_coop[k])
            if diff > 0.0:
                action = _A_UNDERLAY
            else:
                action = _A_COOP

        if action == _A_UNDERLAY:
            st[UNDERLAY_SLOTS] += 1
            alpha = prm[_P_ALPHA]
            i_sp = _exp_draw(prm[_P_GAMMA_SP_INT], u[_U_INTERF_PU])
            direct = snr / (1.0 + alpha * i_sp) >= rho_p
            s = _exp_draw(prm[_P_GAMMA_SD], u[_U_SU_SIGNAL])
            i_ps = _exp_draw(prm[_P_GAMMA_PSD], u[_U_INTERF_SU])
            if alpha * s / (1.0 + i_ps) >= rho_s:
                su_ok = True
                st[SU_DELIVERED] += 1
        else:
            st[CLEAN_ATTEMPTS] += 1
            direct = snr >= rho_p
            if direct:
                st[CLEAN_SUCCESSES] += 1
            elif action == _A_COOP:
                admit = _exp_draw(prm[_P_GAMMA_PS], u[_U_PS_DECODE]) >= rho_p

        if direct:
            st[Q_P] -= 1
            st[PU_DIRECT] += 1
        elif admit:
            st[Q_P] -= 1
            st[Q_PS] += 1
            st[ADMITS] += 1

    # belief for the next slot
    if active:
        for j in range(K):
            belief[j] = U[level, j]
    else:
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += belief[i] * U[i, j]
            scratch[j] = acc
        for j in range(K):
            belief[j] = scratch[j]

    st[SLOTS] += 1
    st[SUM_QP] += st[Q_P]
    st[SUM_QPS] += st[Q_PS]
    if checked and st[FIRST_VIOLATION] < 0:
        if st[ARRIVALS] != st[PU_DIRECT] + st[RELAYED_DELIVERED] + st[Q_P] + st[Q_PS]:
            st[FIRST_VIOLATION] = st[SLOTS] - 1

    out[0] = 1 if active else 0
    out[1] = action
    out[2] = 1 if direct else 0
    out[3] = 1 if admit else 0
    out[4] = 1 if su_ok else 0
    out[5] = 1 if relayed_ok else 0
    out[6] = level if active else -1


@njit(cache=True)
def _run_block(st, hist, belief, U, bounds, tails, gamma0, r_coop, r_under,
               mode, prm, draws, checked):
    scratch = np.empty(U.shape[0])
    out = np.empty(7, dtype=np.int64)
    for i in range(draws.shape[0]):
        _slot(st, hist, belief, scratch, U, bounds, tails, gamma0, r_coop, r_under,
              mode, prm, draws[i], out, checked)


def _param_vector(links: LinkBudget, policy_rho_p: float, policy_rho_s: float, lambda_p: float) -> np.ndarray:
    prm = np.empty(9)
    prm[_P_GAMMA_PS] = links.gamma_ps
    prm[_P_GAMMA_SD] = links.gamma_sd
    prm[_P_GAMMA_SPD] = links.gamma_spd
    prm[_P_GAMMA_SP_INT] = links.gamma_sp_int
    prm[_P_GAMMA_PSD] = links.gamma_psd
    prm[_P_ALPHA] = links.alpha
    prm[_P_RHO_P] = policy_rho_p
    prm[_P_RHO_S] = policy_rho_s
    prm[_P_LAMBDA] = lambda_p
    return prm


def _check_lambda(lambda_p: float):
    if not 0.0 <= lambda_p <= 1.0:
        raise ValueError(f"lambda_p must lie in [0, 1] (got {lambda_p})")


def _check_links(model: ChannelModel, links: LinkBudget):
    if not np.isclose(links.gamma_pd, model.params.gamma0, rtol=1e-12, atol=0.0):
        raise ValueError("links.gamma_pd must equal the channel model's mean SNR")


def step(
    state: SimState,
    mode: Mode,
    model: ChannelModel,
    links: LinkBudget,
    policy: RewardTable,
    lambda_p: float,
    rng: np.random.Generator,
    *,
    rho_p: float,
    rho_s: float,
    checked: bool = True,
) -> SlotOutcome:
    """Advance ``state`` by one slot in place and describe what happened."""
    _check_lambda(lambda_p)
    mode = Mode.parse(mode)
    prm = _param_vector(links, rho_p, rho_s, lambda_p)
    u = rng.random(DRAWS_PER_SLOT)
    out = np.empty(7, dtype=np.int64)
    scratch = np.empty(model.K)
    _slot(state.counters, state.level_hist, state.belief, scratch, model.U, model.bounds,
          model.tails, model.params.gamma0, policy.r_coop, policy.r_under,
          int(mode), prm, u, out, checked)
    return SlotOutcome(
        pu_active=bool(out[0]),
        action=SlotAction(int(out[1])),
        direct_success=bool(out[2]),
        relay_admit=bool(out[3]),
        su_success=bool(out[4]),
        relayed_success=bool(out[5]),
        observed_level=None if out[6] < 0 else int(out[6]),
    )


@dataclass(frozen=True)
class RunConfig:
    mode: Mode
    lambda_p: float
    links: LinkBudget
    model: ChannelModel
    policy: RewardTable
    rho_p: float
    rho_s: float
    slots: int
    seed: object = 0
    checked: bool = False


@dataclass(frozen=True)
class Metrics:
    su_throughput: float
    pu_throughput: float
    pu_delivered_fraction: float
    mean_qp: float
    mean_qps: float
    admits: int
    slots: int
    busy_slots: int
    underlay_slots: int
    clean_attempts: int
    clean_successes: int
    level_hist: tuple
    final_state: SimState = field(repr=False, compare=False)


CHUNK = 1 << 15


def run(config: RunConfig) -> Metrics:
    """Simulate ``config.slots`` slots; deterministic for a given seed."""
    if config.slots < 1:
        raise ValueError("slots must be >= 1")
    _check_lambda(config.lambda_p)
    _check_links(config.model, config.links)
    model, policy = config.model, config.policy
    rng = np.random.default_rng(config.seed)
    state = SimState.initial(model, rng)
    prm = _param_vector(config.links, config.rho_p, config.rho_s, config.lambda_p)
    mode = int(Mode.parse(config.mode))
    remaining = config.slots
    while remaining > 0:
        n = min(CHUNK, remaining)
        draws = rng.random((n, DRAWS_PER_SLOT))
        _run_block(state.counters, state.level_hist, state.belief, model.U, model.bounds,
                   model.tails, model.params.gamma0, policy.r_coop, policy.r_under,
                   mode, prm, draws, config.checked)
        remaining -= n
    return _metrics(state)


def _metrics(state: SimState) -> Metrics:
    c = state.counters
    slots = int(c[SLOTS])
    delivered = int(c[PU_DIRECT] + c[RELAYED_DELIVERED])
    return Metrics(
        su_throughput=c[SU_DELIVERED] / slots,
        pu_throughput=delivered / slots,
        pu_delivered_fraction=delivered / c[ARRIVALS] if c[ARRIVALS] else 1.0,
        mean_qp=c[SUM_QP] / slots,
        mean_qps=c[SUM_QPS] / slots,
        admits=int(c[ADMITS]),
        slots=slots,
        busy_slots=int(c[BUSY_SLOTS]),
        underlay_slots=int(c[UNDERLAY_SLOTS]),
        clean_attempts=int(c[CLEAN_ATTEMPTS]),
        clean_successes=int(c[CLEAN_SUCCESSES]),
        level_hist=tuple(int(x) for x in state.level_hist),
        final_state=state,
    )


def audit_conservation(state: SimState) -> AuditResult:
    """Every PU arrival is delivered or still queued at the PU or the relay."""
    c = state.counters
    if c[FIRST_VIOLATION] >= 0:
        return AuditResult(False, int(c[FIRST_VIOLATION]))
    balance = c[PU_DIRECT] + c[RELAYED_DELIVERED] + c[Q_P] + c[Q_PS]
    if c[ARRIVALS] != balance or c[Q_P] < 0 or c[Q_PS] < 0:
        return AuditResult(False, None)
    return AuditResult(True)
