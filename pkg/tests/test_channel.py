import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from hybridcr.channel import (
    ChannelModel,
    ChannelParams,
    InvalidParamsError,
    ModelInvalidError,
    build_thresholds,
    db_to_linear,
    doppler_frequency,
    level_crossing_rate,
    sample_next_level,
    sample_snr_in_level,
    stationary_distribution,
    transition_matrix,
)

GAMMA0 = db_to_linear(15.0)
FDOPP = doppler_frequency(2.0, 50e6)
RHO = 2.0**3.5 - 1.0


@pytest.fixture(scope="module")
def params():
    return ChannelParams(K=8, eta=3e6, B=6e6, gamma0=GAMMA0, fdopp=FDOPP, tau_pkt=0.1)


@pytest.fixture(scope="module")
def model(params):
    return ChannelModel.from_params(params)


def test_thresholds_match_direct_evaluation(params):
    bounds = build_thresholds(params)
    oracle = [math.exp(k * 0.5) - 1.0 for k in range(8)]
    np.testing.assert_allclose(bounds[:-1], oracle, rtol=1e-14, atol=0)
    assert bounds[0] == 0.0
    assert math.isinf(bounds[-1])
    expected = [0, 0.64872, 1.71828, 3.48169, 6.38906, 11.18249, 19.08554, 32.11545]
    np.testing.assert_allclose(bounds[:-1], expected, atol=5e-6)
    assert bounds[1] == pytest.approx(0.64872, abs=5e-6)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(K=1),
        dict(eta=0.0),
        dict(B=-1.0),
        dict(gamma0=0.0),
        dict(fdopp=-0.1),
        dict(tau_pkt=0.0),
    ],
)
def test_invalid_params_rejected(kwargs):
    base = dict(K=8, eta=3e6, B=6e6, gamma0=GAMMA0, fdopp=FDOPP, tau_pkt=0.1)
    base.update(kwargs)
    with pytest.raises(InvalidParamsError):
        ChannelParams(**base)


def test_stationary_distribution_against_quadrature(params):
    bounds = build_thresholds(params)
    pi = stationary_distribution(bounds, GAMMA0)
    pdf = lambda g: math.exp(-g / GAMMA0) / GAMMA0
    oracle = [integrate.quad(pdf, bounds[k], bounds[k + 1])[0] for k in range(8)]
    np.testing.assert_allclose(pi, oracle, rtol=1e-9)
    assert pi[0] == pytest.approx(0.02031, abs=1e-5)
    assert pi[7] == pytest.approx(math.exp(-32.11545196 / GAMMA0), abs=1e-8)
    assert pi[7] == pytest.approx(0.36219, abs=1e-5)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_level_crossing_rate_examples():
    assert level_crossing_rate(0.0, GAMMA0, FDOPP) == 0.0
    assert level_crossing_rate(5.0, GAMMA0, 0.0) == 0.0
    assert FDOPP == pytest.approx(0.33333, abs=5e-6)
    assert level_crossing_rate(0.64872127, GAMMA0, FDOPP) == pytest.approx(0.11725, abs=1e-5)


def test_level_crossing_rate_against_simulated_rayleigh_envelope():
    """Count up-crossings of a sum-of-sinusoids Rayleigh process."""
    rng = np.random.default_rng(7)
    fd, dt, T, n_paths = 1.0, 0.01, 4000.0, 32
    t = np.arange(0.0, T, dt)
    threshold_db = [-10.0, -3.0, 0.0, 3.0]
    counts = np.zeros(len(threshold_db))
    for _ in range(4):
        theta = rng.uniform(0, 2 * np.pi, n_paths)
        phi_i = rng.uniform(0, 2 * np.pi, n_paths)
        phi_q = rng.uniform(0, 2 * np.pi, n_paths)
        dop = 2 * np.pi * fd * np.cos(theta)
        i_part = np.zeros_like(t)
        q_part = np.zeros_like(t)
        for n in range(n_paths):
            i_part += np.cos(dop[n] * t + phi_i[n])
            q_part += np.cos(dop[n] * t + phi_q[n])
        power = (i_part**2 + q_part**2) / n_paths  # unit mean
        for j, th in enumerate(threshold_db):
            g = 10 ** (th / 10)
            counts[j] += np.count_nonzero((power[:-1] < g) & (power[1:] >= g))
    measured = counts / (4 * T)
    predicted = [level_crossing_rate(10 ** (th / 10), 1.0, fd) for th in threshold_db]
    np.testing.assert_allclose(measured, predicted, rtol=0.1)


def test_transition_matrix_examples(model):
    U = model.U
    assert U[0, 1] == pytest.approx(0.57740, abs=5e-6)
    assert U[0, 0] == pytest.approx(0.42260, abs=5e-6)
    np.testing.assert_allclose(model.pi @ U, model.pi, atol=1e-9)


def test_transition_matrix_structure(model):
    U, pi = model.U, model.pi
    K = U.shape[0]
    np.testing.assert_allclose(U.sum(axis=1), 1.0, atol=1e-12)
    assert ((U >= 0) & (U <= 1)).all()
    for k in range(K):
        for l in range(K):
            if abs(k - l) > 1:
                assert U[k, l] == 0.0
    for k in range(K - 1):
        assert pi[k] * U[k, k + 1] == pytest.approx(pi[k + 1] * U[k + 1, k], abs=1e-12)
        assert U[k, k + 1] > 0 and U[k + 1, k] > 0


def test_matrix_powers_converge_to_pi(model):
    P = np.linalg.matrix_power(model.U, 2000)
    assert np.abs(P - model.pi).max() < 1e-6


def test_static_channel_is_identity(params):
    static = ChannelParams(K=8, eta=3e6, B=6e6, gamma0=GAMMA0, fdopp=0.0, tau_pkt=0.1)
    np.testing.assert_array_equal(transition_matrix(static), np.eye(8))


def test_slot_too_long_names_level():
    p = ChannelParams(K=8, eta=3e6, B=6e6, gamma0=GAMMA0, fdopp=FDOPP, tau_pkt=1.0)
    with pytest.raises(ModelInvalidError) as err:
        transition_matrix(p)
    assert err.value.level == 0
    assert "level 0" in str(err.value)


@settings(max_examples=150, deadline=None)
@given(
    K=st.integers(2, 14),
    step=st.floats(0.05, 1.5),
    gamma0_db=st.floats(-5.0, 30.0),
    fdopp=st.floats(0.0, 2.0),
    tau=st.floats(1e-3, 0.2),
)
def test_chain_invariants_hold_for_valid_params(K, step, gamma0_db, fdopp, tau):
    p = ChannelParams(K=K, eta=step, B=1.0, gamma0=db_to_linear(gamma0_db), fdopp=fdopp, tau_pkt=tau)
    bounds = build_thresholds(p)
    assert bounds[0] == 0 and math.isinf(bounds[-1])
    assert (np.diff(bounds) > 0).all()
    pi = stationary_distribution(bounds, p.gamma0)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    try:
        U = transition_matrix(p)
    except ModelInvalidError:
        assume(False)
    assume((pi > 1e-300).all())
    np.testing.assert_allclose(U.sum(axis=1), 1.0, atol=1e-12)
    assert (np.triu(U, 2) == 0).all() and (np.tril(U, -2) == 0).all()
    lhs = pi[:-1] * np.diag(U, 1)
    rhs = pi[1:] * np.diag(U, -1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    np.testing.assert_allclose(pi @ U, pi, atol=1e-9)


def test_sample_next_level_identity_matrix():
    rng = np.random.default_rng(1)
    assert all(sample_next_level(np.eye(8), 3, rng) == 3 for _ in range(100))


def test_sample_next_level_consumes_one_draw(model):
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    sample_next_level(model.U, 4, a)
    b.random()
    assert a.random() == b.random()


def test_single_step_frequency_from_level_zero(model):
    rng = np.random.default_rng(11)
    n = 1_000_000
    moves = sum(sample_next_level(model.U, 0, rng) for _ in range(n))
    assert moves / n == pytest.approx(0.57740, abs=0.005)


def test_long_run_occupancy_matches_pi(model):
    rng = np.random.default_rng(12)
    n = 1_000_000
    hist = np.zeros(model.K)
    level = 0
    for _ in range(n):
        level = sample_next_level(model.U, level, rng)
        hist[level] += 1
    np.testing.assert_allclose(hist / n, model.pi, atol=0.01)


def test_trajectories_deterministic(model):
    def path(seed):
        rng = np.random.default_rng(seed)
        lvl, out = 4, []
        for _ in range(500):
            lvl = sample_next_level(model.U, lvl, rng)
            out.append(lvl)
        return out

    assert path(3) == path(3)


@settings(max_examples=200, deadline=None)
@given(level=st.integers(0, 7), seed=st.integers(0, 2**32 - 1))
def test_snr_draw_lands_in_level(model, level, seed):
    snr = sample_snr_in_level(level, model.bounds, GAMMA0, np.random.default_rng(seed))
    assert model.bounds[level] <= snr < model.bounds[level + 1]
    assert model.level_of(snr) == level


def test_snr_in_straddling_level_exceeds_threshold_fraction(model):
    rng = np.random.default_rng(21)
    n = 1_000_000
    draws = np.array([sample_snr_in_level(4, model.bounds, GAMMA0, rng) for _ in range(n)])
    oracle = (math.exp(-RHO / GAMMA0) - math.exp(-model.bounds[5] / GAMMA0)) / model.pi[4]
    assert oracle == pytest.approx(0.17017, abs=2e-5)
    assert np.mean(draws >= RHO) == pytest.approx(oracle, abs=0.005)


@pytest.mark.parametrize("level", [0, 4, 7])
def test_snr_in_level_ks(model, level):
    rng = np.random.default_rng(100 + level)
    draws = [sample_snr_in_level(level, model.bounds, GAMMA0, rng) for _ in range(5000)]
    lo, hi = model.bounds[level], model.bounds[level + 1]
    mass = model.pi[level]

    def cdf(x):
        x = np.clip(x, lo, hi)
        return (math.exp(-lo / GAMMA0) - np.exp(-x / GAMMA0)) / mass

    assert stats.kstest(draws, cdf).pvalue > 0.001


def test_mixture_recovers_exponential_mean(model):
    rng = np.random.default_rng(31)
    n = 1_000_000
    levels = rng.choice(model.K, size=n, p=model.pi)
    total = 0.0
    for lvl in levels:
        total += sample_snr_in_level(int(lvl), model.bounds, GAMMA0, rng)
    assert total / n == pytest.approx(GAMMA0, rel=0.01)
