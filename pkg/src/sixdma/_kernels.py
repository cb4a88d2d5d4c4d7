"""Per-AP hot kernels used inside the finite-difference gradient loops.

Each kernel has a numba implementation (explicit loops) and a numpy one
(vectorised); the module-level names point at whichever
:mod:`sixdma._accel` selects. Both are importable directly for the parity
tests and the benchmark.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit

_PEAK = 16.0 / np.pi


def ap_channel_numpy(t, R, dirs, psi, k0):
    """Channel block ``H_m`` (N, K) of one AP.

    t: (N, 3) antenna positions; R: (3, 3) rotation; dirs: (K, L, 3) unit
    arrival directions in the unrotated frame; psi: (K, L) fading; k0 = 2pi/lambda.
    """
    local = dirs @ R  # rows are R^T rho
    x, y = local[..., 0], local[..., 1]
    rxy = np.sqrt(x * x + y * y)
    safe = np.where(rxy > 0.0, rxy, 1.0)
    gain = np.sqrt(np.where((y > 0.0) & (rxy > 0.0), _PEAK * y * y / safe, 0.0))
    phase = k0 * np.einsum("nd,kld->nkl", t, local)
    return np.einsum("nkl,kl->nk", np.exp(1j * phase), psi * gain)


def ap_stats_numpy(H, sigma2):
    """``(A, B) = (G^H H, G^H G)`` with ``G = (H H^H + sigma2 I)^-1 H``."""
    n = H.shape[0]
    G = np.linalg.solve(H @ H.conj().T + sigma2 * np.eye(n), H)
    Gh = G.conj().T
    return Gh @ H, Gh @ G


def _ap_channel_loops(t, R, dirs, psi, k0):
    n_ant = t.shape[0]
    n_users = psi.shape[0]
    n_paths = psi.shape[1]
    H = np.zeros((n_ant, n_users), dtype=np.complex128)
    for k in range(n_users):
        for l in range(n_paths):
            d0 = dirs[k, l, 0]
            d1 = dirs[k, l, 1]
            d2 = dirs[k, l, 2]
            x = R[0, 0] * d0 + R[1, 0] * d1 + R[2, 0] * d2
            y = R[0, 1] * d0 + R[1, 1] * d1 + R[2, 1] * d2
            z = R[0, 2] * d0 + R[1, 2] * d1 + R[2, 2] * d2
            rxy = np.sqrt(x * x + y * y)
            if y <= 0.0 or rxy <= 0.0:
                continue
            coef = psi[k, l] * np.sqrt(_PEAK * y * y / rxy)
            for n in range(n_ant):
                ph = k0 * (x * t[n, 0] + y * t[n, 1] + z * t[n, 2])
                H[n, k] += coef * complex(np.cos(ph), np.sin(ph))
    return H


def _ap_stats_loops(H, sigma2):
    n = H.shape[0]
    Hh = np.ascontiguousarray(H.conj().T)
    C = H @ Hh
    for i in range(n):
        C[i, i] += sigma2
    G = np.linalg.solve(C, H)
    Gh = np.ascontiguousarray(G.conj().T)
    return Gh @ H, Gh @ G


def sum_rate_from_stats_numpy(A, B, c, sigma2):
    """Sample objective from per-AP ``A_m = G_m^H H_m`` and ``B_m = G_m^H G_m``.

    A, B: (M, K, K); c: (K, M, K). Returns the sum over users of
    ``log2(1 + SINR_k)`` for ``w_k = G c_k``.
    """
    a = np.einsum("kmi,mij->kj", c.conj(), A)
    p = np.einsum("kmi,mij,kmj->k", c.conj(), B, c).real
    pw = np.abs(a) ** 2
    sig = np.diagonal(pw).copy()
    interf = pw.sum(axis=1) - sig + sigma2 * p
    sinr = sig / np.maximum(interf, 1e-30)
    return float(np.sum(np.log2(1.0 + sinr)))


def _sum_rate_loops(A, B, c, sigma2):
    n_aps = A.shape[0]
    n_users = A.shape[1]
    total = 0.0
    for k in range(n_users):
        sig = 0.0
        interf = 0.0
        for j in range(n_users):
            acc = 0j
            for m in range(n_aps):
                for i in range(n_users):
                    acc += np.conj(c[k, m, i]) * A[m, i, j]
            pw = acc.real * acc.real + acc.imag * acc.imag
            if j == k:
                sig = pw
            else:
                interf += pw
        p = 0.0
        for m in range(n_aps):
            for i in range(n_users):
                row = 0j
                for j in range(n_users):
                    row += B[m, i, j] * c[k, m, j]
                p += (np.conj(c[k, m, i]) * row).real
        interf += sigma2 * p
        if interf < 1e-30:
            interf = 1e-30
        total += np.log2(1.0 + sig / interf)
    return total


ap_channel_numba = njit(_ap_channel_loops) if HAS_NUMBA else None
ap_stats_numba = njit(_ap_stats_loops) if HAS_NUMBA else None
sum_rate_from_stats_numba = njit(_sum_rate_loops) if HAS_NUMBA else None

if HAS_NUMBA:
    ap_channel = ap_channel_numba
    ap_stats = ap_stats_numba
    sum_rate_from_stats = sum_rate_from_stats_numba
else:
    ap_channel = ap_channel_numpy
    ap_stats = ap_stats_numpy
    sum_rate_from_stats = sum_rate_from_stats_numpy
