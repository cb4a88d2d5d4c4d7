"""Rates, the long-timescale sample objective and its gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .beamform import decentralized_beamformers, local_receiver

LN2 = np.log(2.0)
FLOOR = 1e-30


@dataclass(frozen=True)
class RateReport:
    per_user_rate: np.ndarray
    sum_rate: float


def sinr(H: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR for stacked channel ``H`` and beamformers ``W`` (both (..., MN, K)).

    A zero beamformer gives SINR 0.
    """
    X = np.conj(np.swapaxes(W, -1, -2)) @ H  # X[k, j] = w_k^H h_j
    pw = np.abs(X) ** 2
    sig = np.diagonal(pw, axis1=-2, axis2=-1)
    noise = sigma2 * np.sum(np.abs(W) ** 2, axis=-2)
    interf = pw.sum(axis=-1) - sig + noise
    return sig / np.maximum(interf, FLOOR)


def per_user_rates(H: np.ndarray, W: np.ndarray, sigma2: float) -> RateReport:
    rates = np.log2(1.0 + sinr(H, W, sigma2))
    return RateReport(rates, float(rates.sum()))


def block_stats(H_blocks: np.ndarray, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """``A_m = G_m^H H_m`` and ``B_m = G_m^H G_m`` for blocks (..., M, N, K)."""
    G = local_receiver(H_blocks, sigma2)
    Gh = np.conj(np.swapaxes(G, -1, -2))
    return Gh @ H_blocks, Gh @ G


def objective_from_stats(A: np.ndarray, B: np.ndarray, c: np.ndarray, sigma2: float) -> np.ndarray:
    """Sample objective per sample from batched stats ``(..., M, K, K)``."""
    a = np.einsum("kmi,...mij->...kj", c.conj(), A)
    p = np.einsum("kmi,...mij,kmj->...k", c.conj(), B, c).real
    pw = np.abs(a) ** 2
    sig = np.diagonal(pw, axis1=-2, axis2=-1)
    interf = pw.sum(axis=-1) - sig + sigma2 * p
    return np.log2(1.0 + sig / np.maximum(interf, FLOOR)).sum(axis=-1)


def sample_objective(H_blocks: np.ndarray, c: np.ndarray, sigma2: float):
    """Sum rate of the decentralized receiver ``w_k = G c_k``.

    ``H_blocks`` is ``(M, N, K)`` or a batch ``(S, M, N, K)``; a batch gives
    one value per sample.
    """
    A, B = block_stats(np.asarray(H_blocks, dtype=complex), sigma2)
    out = objective_from_stats(A, B, np.asarray(c, dtype=complex), sigma2)
    return float(out) if np.ndim(out) == 0 else out


def decentralized_rates(H_blocks: np.ndarray, c: np.ndarray, sigma2: float) -> RateReport:
    """Per-user rates of ``w_k = G c_k`` via the generic rate formula."""
    G = local_receiver(H_blocks, sigma2)
    W = decentralized_beamformers(G, c)
    M, N, K = H_blocks.shape
    return per_user_rates(H_blocks.reshape(M * N, K), W, sigma2)


def uatf_from_samples(H: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user UatF SINR from joint samples ``H``, ``W`` of shape (S, MN, K)."""
    X = np.conj(np.swapaxes(W, -1, -2)) @ H  # (S, K, K)
    K = X.shape[-1]
    desired = X[:, np.arange(K), np.arange(K)]
    mean_d = desired.mean(axis=0)
    var_d = np.mean(np.abs(desired - mean_d) ** 2, axis=0)
    second = np.mean(np.abs(X) ** 2, axis=0)
    interf = second.sum(axis=1) - np.diagonal(second)
    noise = sigma2 * np.mean(np.sum(np.abs(W) ** 2, axis=-2), axis=0)
    return np.abs(mean_d) ** 2 / np.maximum(interf + var_d + noise, FLOOR)


def uatf_bound(sampler: Callable[[np.random.Generator], np.ndarray],
               policy: Callable[[np.ndarray], np.ndarray],
               sigma2: float, num_samples: int, rng: np.random.Generator) -> float:
    """UatF lower bound on the ergodic sum rate (bits/s/Hz).

    ``sampler(rng)`` draws one stacked channel (MN, K); ``policy(H)`` maps it
    to beamformers (MN, K). Expectations are sample averages.
    """
    if num_samples < 2:
        raise ValueError("need at least two samples")
    Hs, Ws = [], []
    for _ in range(num_samples):
        H = sampler(rng)
        Hs.append(H)
        Ws.append(policy(H))
    s = uatf_from_samples(np.stack(Hs), np.stack(Ws), sigma2)
    return float(np.sum(np.log2(1.0 + s)))


def grad_c_from_stats(A: np.ndarray, B: np.ndarray, c: np.ndarray, sigma2: float) -> np.ndarray:
    """Closed-form gradient w.r.t. conj(c) from per-AP stats (M, K, K).

    For user k with ``u_j = G^H h_j`` and ``Q = sum_j u_j u_j^H + sigma2 G^H G``,
    ``g_k = log2(c^H Q c) - log2(c^H Q_{-k} c)``; the Wirtinger derivative
    is ``(Q c / c^H Q c - Q_{-k} c / c^H Q_{-k} c) / ln 2``.
    """
    K, M, _ = c.shape
    a = np.einsum("kmi,mij->kj", c.conj(), A)  # a[k, j] = c_k^H u_j
    Bc = np.einsum("mij,kmj->kmi", B, c)
    # sum_j u_j conj(a[k, j]) per AP block: A_m[:, j] conj(a[k, j])
    Ua = np.einsum("mij,kj->kmi", A, a.conj())
    pw = np.abs(a) ** 2
    p = np.einsum("kmi,kmi->k", c.conj(), Bc).real
    total = pw.sum(axis=1) + sigma2 * p
    own = np.einsum("mik,k->kmi", A, np.conj(np.diagonal(a)))  # u_k conj(a[k, k])
    interf = total - np.diagonal(pw)
    full = (Ua + sigma2 * Bc) / np.maximum(total, FLOOR)[:, None, None]
    minus = (Ua - own + sigma2 * Bc) / np.maximum(interf, FLOOR)[:, None, None]
    return (full - minus) / LN2


def grad_c(H_blocks: np.ndarray, c: np.ndarray, sigma2: float) -> np.ndarray:
    """Gradient of the sample objective w.r.t. conj(c), shaped like ``c``."""
    A, B = block_stats(np.asarray(H_blocks, dtype=complex), sigma2)
    return grad_c_from_stats(A, B, np.asarray(c, dtype=complex), sigma2)


def grad_numeric(f: Callable[[np.ndarray], float], x: np.ndarray, lower=None, upper=None,
                 h: float | None = None, f0: float | None = None) -> np.ndarray:
    """Finite-difference gradient of a scalar function of a real vector.

    Central differences with step ``h`` (default ``1e-6 * max(1, |x_i|)``);
    where a central probe would leave ``[lower, upper]`` the difference is
    taken one-sided towards the interior, and a coordinate with no room on
    either side gets zero.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    lo = np.full(n, -np.inf) if lower is None else np.broadcast_to(np.asarray(lower, dtype=float).ravel(), (n,))
    hi = np.full(n, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, dtype=float).ravel(), (n,))
    if h is None:
        steps = 1e-6 * np.maximum(1.0, np.abs(x))
    else:
        if h <= 0:
            raise ValueError("step must be positive")
        steps = np.full(n, float(h))
    grad = np.zeros(n)
    probe = x.copy()
    for i in range(n):
        hi_ok = x[i] + steps[i] <= hi[i]
        lo_ok = x[i] - steps[i] >= lo[i]
        if not (hi_ok or lo_ok):
            continue
        if hi_ok:
            probe[i] = x[i] + steps[i]
            fp = f(probe)
        if lo_ok:
            probe[i] = x[i] - steps[i]
            fm = f(probe)
        probe[i] = x[i]
        if hi_ok and lo_ok:
            grad[i] = (fp - fm) / (2.0 * steps[i])
        else:
            if f0 is None:
                f0 = f(x)
            grad[i] = (fp - f0) / steps[i] if hi_ok else (f0 - fm) / steps[i]
    return grad


def sum_rate_from_stats(A, B, c, sigma2) -> float:
    """Single-sample objective through the compiled kernel when available."""
    return float(_kernels.sum_rate_from_stats(A, B, c, sigma2))
