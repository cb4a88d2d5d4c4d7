"""Short-timescale receivers and the long-timescale combining parameter.

The long-timescale parameter ``c`` is stored as a ``(K, M, K)`` array with
``c[k, m]`` the K-vector that AP ``m`` applies to its local MMSE receiver
when decoding user ``k``. ``c.reshape(-1)`` is the stacked length-K^2 M
vector ``[c_1; ...; c_K]`` with ``c_k = [c_{k,1}; ...; c_{k,M}]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import PathSet, sample_fading, steering_tensor

log = logging.getLogger(__name__)

PD_TOL = 1e-10
_CHUNK = 2048


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """An estimated ``I - V_m`` is not positive definite (too few SAA samples)."""


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite channel entries")


def local_receiver(H_m: np.ndarray, sigma2: float) -> np.ndarray:
    """Local MMSE receiver ``(H H^H + sigma2 I)^-1 H``; accepts leading batch axes."""
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    H_m = np.asarray(H_m, dtype=complex)
    _check_finite(H_m)
    n = H_m.shape[-2]
    C = H_m @ np.conj(np.swapaxes(H_m, -1, -2)) + sigma2 * np.eye(n)
    return np.linalg.solve(C, H_m)


def lmmse_beamformer(G_m: np.ndarray, c_km: np.ndarray) -> np.ndarray:
    return np.asarray(G_m) @ np.asarray(c_km)


def decentralized_beamformers(G_blocks: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Stacked beamformers ``W`` (..., MN, K) from local receivers (..., M, N, K) and ``c``."""
    W = np.einsum("...mnj,kmj->...mnk", G_blocks, c)
    *lead, M, N, K = W.shape
    return W.reshape(*lead, M * N, K)


def identity_long_param(K: int, M: int) -> np.ndarray:
    """``c_{k,m} = e_k`` for every AP (the interference-free solution)."""
    return np.broadcast_to(np.eye(K)[:, None, :], (K, M, K)).astype(complex)


@dataclass(frozen=True)
class StatMatrixV:
    """SAA estimate of ``V_m = E[H_m^H G_m]``, stored as ``(M, K, K)``."""

    blocks: np.ndarray
    num_samples: int

    def min_eig_margin(self) -> np.ndarray:
        """Smallest eigenvalue of the Hermitian part of ``I - V_m`` for each AP."""
        K = self.blocks.shape[-1]
        D = np.eye(K) - self.blocks
        herm = 0.5 * (D + np.conj(np.swapaxes(D, -1, -2)))
        return np.linalg.eigvalsh(herm)[:, 0]

    def is_valid(self, tol: float = PD_TOL) -> bool:
        return bool(np.all(self.min_eig_margin() > tol))


def _sample_V(paths, t, r, sigma2, num_samples, rng, wavelength):
    S = steering_tensor(paths, t, r, wavelength)
    M, N, K, _ = S.shape
    total = np.zeros((M, K, K), dtype=complex)
    done = 0
    while done < num_samples:
        n = min(_CHUNK, num_samples - done)
        psi = sample_fading(paths, rng, size=n)
        H = np.einsum("mnkl,skml->smnk", S, psi)
        G = local_receiver(H, sigma2)
        total += np.einsum("smnk,smnj->mkj", np.conj(H), G)
        done += n
    return total / num_samples


def estimate_V(paths: PathSet, t, r, sigma2: float, num_samples: int,
               rng: np.random.Generator, wavelength: float) -> StatMatrixV:
    """SAA estimate of ``V`` from ``num_samples`` fading draws at fixed (t, r).

    Raises :class:`NotPositiveDefiniteError` if some ``I - V_m`` is not
    positive definite after one retry with twice the samples.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    V = StatMatrixV(_sample_V(paths, t, r, sigma2, num_samples, rng, wavelength), num_samples)
    if V.is_valid():
        return V
    log.warning("I - V not positive definite with %d samples; retrying with %d", num_samples, 2 * num_samples)
    V = StatMatrixV(_sample_V(paths, t, r, sigma2, 2 * num_samples, rng, wavelength), 2 * num_samples)
    if not V.is_valid():
        raise NotPositiveDefiniteError(
            f"I - V_m not positive definite (min margin {V.min_eig_margin().min():.3e}) "
            f"with {V.num_samples} samples"
        )
    return V


def long_param_system(V_blocks: np.ndarray) -> np.ndarray:
    """``blkdiag(U - V) + U^T V`` as a dense ``(KM, KM)`` matrix."""
    V_blocks = np.asarray(V_blocks)
    M, K, _ = V_blocks.shape
    A = np.tile(np.concatenate(list(V_blocks), axis=1), (M, 1)).astype(complex)
    for m in range(M):
        A[m * K:(m + 1) * K, m * K:(m + 1) * K] = np.eye(K)
    return A


def solve_long_param(V: StatMatrixV | np.ndarray, K: int | None = None, M: int | None = None) -> np.ndarray:
    """Solve ``c_{k,m} + sum_{i != m} V_i c_{k,i} = e_k`` for all ``k, m``.

    Returns ``c`` with shape ``(K, M, K)``. Raises ``LinAlgError`` if the
    system is singular, which can only happen for an invalid ``V``.
    """
    blocks = V.blocks if isinstance(V, StatMatrixV) else np.asarray(V)
    Mv, Kv, _ = blocks.shape
    if (K is not None and K != Kv) or (M is not None and M != Mv):
        raise ValueError(f"V has shape {blocks.shape}, expected M={M}, K={K}")
    A = long_param_system(blocks)
    rhs = np.tile(np.eye(Kv), (Mv, 1))  # column k is U^T e_k
    C = np.linalg.solve(A, rhs)  # (KM, K)
    return np.ascontiguousarray(C.T.reshape(Kv, Mv, Kv))


def long_param_residual(V_blocks: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Per-(k, m) residual norms of the stacked optimality equations."""
    V_blocks = np.asarray(V_blocks)
    M, K, _ = V_blocks.shape
    Vc = np.einsum("mij,kmj->kmi", V_blocks, c)  # V_m c_{k,m}
    total = Vc.sum(axis=1, keepdims=True)
    lhs = c + total - Vc
    return np.linalg.norm(lhs - np.eye(K)[:, None, :], axis=-1)


def _rms(x):
    return np.sqrt(np.mean(np.abs(x) ** 2))


def stationarity_residual(paths: PathSet, t, r, sigma2: float, c: np.ndarray, num_samples: int,
                          rng: np.random.Generator, wavelength: float) -> float:
    """Relative residual of the per-AP stationarity condition of ``w_{k,m} = G_m c_{k,m}``.

    For each draw, AP ``m`` and user ``k`` the residual is
    ``H_m (sum_{i != m} E[H_i^H w_{k,i}] + H_m^H w_{k,m} - e_k) + sigma2 w_{k,m}``,
    with the expectations estimated from the same ``num_samples`` draws.
    Returns the RMS residual divided by the sum of the RMS norms of its two
    parts, the other-AP term ``H_m sum_{i != m} E[H_i^H w_{k,i}]`` and the
    local remainder, so 0 means exact balance and 1 means no cancellation.
    """
    S = steering_tensor(paths, t, r, wavelength)
    M, N, K, _ = S.shape
    H = np.einsum("mnkl,skml->smnk", S, sample_fading(paths, rng, size=num_samples))
    G = local_receiver(H, sigma2)
    W = np.einsum("smnj,kmj->smnk", G, c)  # w_{k,m} per sample
    E = np.einsum("smnj,smnk->mjk", np.conj(H), W) / num_samples  # E[H_m^H w_{k,m}] columns
    others = np.einsum("smnj,mjk->smnk", H, E.sum(axis=0, keepdims=True) - E)
    local = np.einsum("smnj,smjk->smnk", H, np.einsum("smnj,smnk->smjk", np.conj(H), W) - np.eye(K)) + sigma2 * W
    return float(_rms(others + local) / max(_rms(others) + _rms(local), 1e-300))


def centralized_mmse(H: np.ndarray, sigma2: float) -> np.ndarray:
    """Network-wide MMSE receiver ``(H H^H + sigma2 I)^-1 H`` on the stacked channel."""
    return local_receiver(H, sigma2)
