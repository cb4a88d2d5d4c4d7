"""Array rotation, angle-of-arrival transforms, steering vectors and the
cosine element pattern.

Angles are radians throughout. Orientation is (pitch, roll, yaw) =
(alpha, beta, gamma), rotations about the local x, y and z axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi
PATTERN_PEAK = 16.0 / np.pi


class Orientation(NamedTuple):
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0


class PathAngles(NamedTuple):
    phi: float
    theta: float


def rotation_matrix(o) -> np.ndarray:
    """Return ``Rz(gamma) @ Ry(beta) @ Rx(alpha)`` for one orientation."""
    alpha, beta, gamma = (float(v) for v in o)
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    return np.array(
        [
            [cb * cg, sa * sb * cg - ca * sg, ca * sb * cg + sa * sg],
            [cb * sg, sa * sb * sg + ca * cg, ca * sb * sg - sa * cg],
            [-sb, sa * cb, ca * cb],
        ]
    )


def rotation_matrices(r: np.ndarray) -> np.ndarray:
    """Stack of rotation matrices for an ``(M, 3)`` array of orientations."""
    r = np.asarray(r, dtype=float).reshape(-1, 3)
    return np.stack([rotation_matrix(row) for row in r])


def wave_vector(a) -> np.ndarray:
    phi, theta = a
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def wave_vectors(phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Vectorised :func:`wave_vector`; output has a trailing axis of size 3."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def angles_from_vectors(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth in [0, 2pi) and elevation in [0, pi] of unit vectors ``(..., 3)``."""
    v = np.asarray(v, dtype=float)
    phi = np.mod(np.arctan2(v[..., 1], v[..., 0]), TWO_PI)
    # mod can return exactly 2pi for tiny negative inputs
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    # atan2 keeps full precision near the poles, where arccos(z) does not
    theta = np.arctan2(np.hypot(v[..., 0], v[..., 1]), v[..., 2])
    return phi, theta


def transform_angles(o, a) -> PathAngles:
    """Angles of path ``a`` seen from the rotated array frame."""
    rho = rotation_matrix(o).T @ wave_vector(a)
    phi, theta = angles_from_vectors(rho)
    return PathAngles(float(phi), float(theta))


def pattern_power(phi_local, theta_local):
    """Cosine pattern ``U`` evaluated at angles already in the array frame."""
    phi_local = np.asarray(phi_local, dtype=float)
    theta_local = np.asarray(theta_local, dtype=float)
    front = (phi_local >= 0.0) & (phi_local < np.pi)
    u = PATTERN_PEAK * np.sin(phi_local) ** 2 * np.sin(theta_local)
    return np.where(front, u, 0.0)


def pattern_gain(o, a) -> float:
    """Field amplitude ``sqrt(U)`` of the rotated element towards ``a``."""
    phi, theta = transform_angles(o, a)
    return float(np.sqrt(pattern_power(phi, theta)))


def pattern_gain_from_local(v_local: np.ndarray) -> np.ndarray:
    """``sqrt(U)`` from unit direction vectors already in the rotated frame.

    Uses ``sin(phi)^2 sin(theta) = y^2 / sqrt(x^2 + y^2)``, which avoids the
    trig round trip; equal to :func:`pattern_gain` away from the poles and
    zero at them.
    """
    v_local = np.asarray(v_local, dtype=float)
    x, y = v_local[..., 0], v_local[..., 1]
    rxy = np.sqrt(x * x + y * y)
    safe = np.where(rxy > 0.0, rxy, 1.0)
    u = np.where((y > 0.0) & (rxy > 0.0), PATTERN_PEAK * y * y / safe, 0.0)
    return np.sqrt(u)


def array_response(positions: np.ndarray, o, a, wavelength: float) -> np.ndarray:
    """Steering vector ``exp(j 2pi/lambda rho^T R t_n)`` for ``(N, 3)`` positions."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    rho = wave_vector(a)
    phase = (TWO_PI / wavelength) * (positions @ (rotation_matrix(o).T @ rho))
    return np.exp(1j * phase)


@dataclass(frozen=True)
class AntennaLayout:
    """Antenna positions of one array in its local frame plus per-antenna boxes.

    ``lower``/``upper`` are ``(N, 3)`` bounds of the movable region of each
    antenna. The array plane is local x-z; the local +y axis is boresight.
    """

    positions: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("positions", "lower", "upper"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1, 3)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.positions.shape == self.lower.shape == self.upper.shape):
            raise ValueError("positions, lower and upper must share shape (N, 3)")
        if np.any(self.lower > self.upper):
            raise ValueError("box lower bound exceeds upper bound")
        if np.any(self.positions < self.lower) or np.any(self.positions > self.upper):
            raise ValueError("antenna position outside its movable box")

    @property
    def num_antennas(self) -> int:
        return self.positions.shape[0]

    def min_box_gap(self) -> float:
        """Smallest distance between any two antenna boxes (0 if they touch)."""
        n = self.num_antennas
        best = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                gap = np.maximum(0.0, np.maximum(self.lower[i] - self.upper[j], self.lower[j] - self.upper[i]))
                best = min(best, float(np.linalg.norm(gap)))
        return best

    @classmethod
    def grid(cls, num_antennas: int, wavelength: float, spacing: float | None = None,
             box_halfwidth: float | None = None) -> "AntennaLayout":
        """Near-square grid in the x-z plane, centred on the array origin.

        Default spacing is 5 wavelengths and default box half-width half a
        wavelength (a lambda x lambda movable square). Boxes have no extent
        along the boresight axis. Raises ``ValueError`` when the boxes could
        bring two antennas closer than half a wavelength.
        """
        if num_antennas < 1:
            raise ValueError("need at least one antenna")
        spacing = 5.0 * wavelength if spacing is None else spacing
        hw = 0.5 * wavelength if box_halfwidth is None else box_halfwidth
        if hw < 0:
            raise ValueError("box half-width must be non-negative")
        if num_antennas > 1 and spacing - 2.0 * hw < 0.5 * wavelength - 1e-15:
            raise ValueError(
                f"movable boxes of half-width {hw:g} m with spacing {spacing:g} m "
                "allow antennas closer than half a wavelength"
            )
        rows = int(np.floor(np.sqrt(num_antennas)))
        while num_antennas % rows:
            rows -= 1
        cols = num_antennas // rows
        xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
        zs = (np.arange(rows) - (rows - 1) / 2.0) * spacing
        pos = np.array([[x, 0.0, z] for z in zs for x in xs])
        half = np.array([hw, 0.0, hw])
        return cls(pos, pos - half, pos + half)
