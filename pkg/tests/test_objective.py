import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_channel, small_scenario
from sixdma import _kernels
from sixdma.beamform import centralized_mmse, decentralized_beamformers, local_receiver
from sixdma.channel import assemble_channel, sample_fading, stack_blocks
from sixdma.objective import (
    block_stats,
    decentralized_rates,
    grad_c,
    grad_c_from_stats,
    grad_numeric,
    objective_from_stats,
    per_user_rates,
    sample_objective,
    sinr,
    sum_rate_from_stats,
    uatf_bound,
    uatf_from_samples,
)


def sinr_loops(H, W, sigma2):
    """Textbook per-user SINR, written with explicit loops."""
    K = H.shape[1]
    out = np.empty(K)
    for k in range(K):
        w = W[:, k]
        sig = abs(np.vdot(w, H[:, k])) ** 2
        interf = sum(abs(np.vdot(w, H[:, j])) ** 2 for j in range(K) if j != k)
        out[k] = sig / (interf + sigma2 * np.vdot(w, w).real)
    return out


def test_sinr_oracle(rng):
    H = random_channel(rng, 6, 3)
    W = random_channel(rng, 6, 3)
    assert np.allclose(sinr(H, W, 0.2), sinr_loops(H, W, 0.2))
    rep = per_user_rates(H, W, 0.2)
    assert rep.sum_rate == pytest.approx(np.log2(1 + sinr_loops(H, W, 0.2)).sum())


def test_zero_beamformer_gives_zero_rate(rng):
    H = random_channel(rng, 4, 2)
    W = np.zeros((4, 2), dtype=complex)
    assert np.all(sinr(H, W, 1.0) == 0.0)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_sample_objective_matches_generic_rate(M, N, K, seed):
    rng = np.random.default_rng(seed)
    Hb = random_channel(rng, M, N, K)
    c = random_channel(rng, K, M, K)
    W = decentralized_beamformers(local_receiver(Hb, 0.5), c)
    oracle = np.log2(1 + sinr_loops(Hb.reshape(M * N, K), W, 0.5)).sum()
    assert sample_objective(Hb, c, 0.5) == pytest.approx(oracle, rel=1e-10)
    assert decentralized_rates(Hb, c, 0.5).sum_rate == pytest.approx(oracle, rel=1e-10)
    A, B = block_stats(Hb, 0.5)
    assert sum_rate_from_stats(A, B, c, 0.5) == pytest.approx(oracle, rel=1e-10)
    assert _kernels.sum_rate_from_stats_numpy(A, B, c, 0.5) == pytest.approx(oracle, rel=1e-10)


def test_batched_objective(rng):
    Hb = random_channel(rng, 5, 2, 3, 2)
    c = random_channel(rng, 2, 2, 2)
    vals = sample_objective(Hb, c, 0.3)
    assert vals.shape == (5,)
    assert vals[2] == pytest.approx(sample_objective(Hb[2], c, 0.3))
    A, B = block_stats(Hb, 0.3)
    assert np.allclose(objective_from_stats(A, B, c, 0.3), vals)


def _fd_grad_c(f, c, h=1e-6):
    """Central differences on real and imaginary parts; returns d/d conj(c)."""
    g = np.zeros_like(c)
    for idx in np.ndindex(c.shape):
        e = np.zeros_like(c)
        e[idx] = h
        dr = (f(c + e) - f(c - e)) / (2 * h)
        di = (f(c + 1j * e) - f(c - 1j * e)) / (2 * h)
        g[idx] = 0.5 * (dr + 1j * di)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_grad_c_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Hb = random_channel(rng, 2, 2, 2)
    c = random_channel(rng, 2, 2, 2)
    g = grad_c(Hb, c, 0.4)
    fd = _fd_grad_c(lambda x: sample_objective(Hb, x, 0.4), c)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5
    A, B = block_stats(Hb, 0.4)
    assert np.allclose(grad_c_from_stats(A, B, c, 0.4), g)


def test_grad_c_ascent_direction(rng):
    Hb = random_channel(rng, 3, 2, 3)
    c = random_channel(rng, 3, 3, 3)
    g = grad_c(Hb, c, 0.2)
    # df = 2 Re<g, dc> for a real-valued f of complex c
    assert sample_objective(Hb, c + 1e-4 * g, 0.2) > sample_objective(Hb, c, 0.2)


def test_grad_c_scale_invariance(rng):
    # the objective is invariant to scaling each c_k, so grad is orthogonal to c_k
    Hb = random_channel(rng, 2, 3, 2)
    c = random_channel(rng, 2, 2, 2)
    g = grad_c(Hb, c, 0.3)
    for k in range(2):
        assert abs(np.vdot(c[k], g[k]).real) < 1e-10


def test_grad_numeric_quadratic_and_boundaries():
    f = lambda x: -np.sum((x - 1.0) ** 2) + x[0] * x[1]
    x = np.array([0.5, -0.2, 2.0])
    exact = -2 * (x - 1.0) + np.array([x[1], x[0], 0.0])
    assert np.allclose(grad_numeric(f, x), exact, atol=1e-6)
    # at an upper bound: one-sided towards the interior
    g = grad_numeric(f, x, lower=[-5, -5, -5], upper=[5, 5, 2.0])
    assert g[2] == pytest.approx(exact[2], abs=1e-5)
    # no room on either side
    g = grad_numeric(f, x, lower=[0.5, -5, -5], upper=[0.5, 5, 5])
    assert g[0] == 0.0
    with pytest.raises(ValueError):
        grad_numeric(f, x, h=0.0)


def test_uatf_known_case():
    # deterministic channel: UatF equals the instantaneous rate
    rng = np.random.default_rng(0)
    H = random_channel(rng, 4, 2)
    W = centralized_mmse(H, 0.1)
    s = uatf_from_samples(np.stack([H] * 10), np.stack([W] * 10), 0.1)
    assert np.allclose(s, sinr(H, W, 0.1))


def test_uatf_below_ergodic_rate():
    sc, paths = small_scenario(seed=3)
    t, r = sc.initial_positions(), np.zeros((2, 3))
    sigma2 = sc.noise_power
    sampler = lambda g: stack_blocks(assemble_channel(paths, sample_fading(paths, g), t, r, sc.wavelength))
    policy = lambda H: centralized_mmse(H, sigma2)
    bound = uatf_bound(sampler, policy, sigma2, 2000, np.random.default_rng(1))
    rng = np.random.default_rng(2)
    erg = np.mean([per_user_rates(h, policy(h), sigma2).sum_rate for h in (sampler(rng) for _ in range(2000))])
    assert 0 < bound <= erg
    with pytest.raises(ValueError):
        uatf_bound(sampler, policy, sigma2, 1, rng)
