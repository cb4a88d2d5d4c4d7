"""Scenario geometry, quasi-static path statistics and channel realizations.

Conventions
-----------
* Global frame: z up, APs on a ring of radius ``ring_radius`` at height
  ``height_diff`` above the users (users at z = 0).
* Each AP's unrotated local frame has +y pointing horizontally at the ring
  centre (array boresight), +z up and x = y cross z. Antenna positions and
  arrival angles are expressed in this frame.
* Arrays are indexed ``(K, M, L)`` for per-path quantities and
  ``(M, N, K)`` for channel blocks; leading axes are fading-sample batches.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .geometry import AntennaLayout, angles_from_vectors, rotation_matrix, wave_vectors

SPEED_OF_LIGHT = 299_792_458.0


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def dbm_to_watt(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float)) + 30.0


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Scenario:
    """Static world description. Powers are linear watts, angles radians."""

    num_aps: int = 10
    num_antennas: int = 6
    num_users: int = 10
    num_paths: int = 6
    carrier_freq: float = 20e9
    wavelength: float = 0.015
    noise_power: float = 1e-10  # -70 dBm
    tx_power: float = 0.1  # 20 dBm
    rician_factor: float = 10.0  # 10 dB
    ring_radius: float = 140.0
    user_area_radius: float = 120.0
    height_diff: float = 10.0
    movable_box_halfwidth: float = 0.0075  # lambda x lambda region
    rotatable_range: float = np.pi / 6
    antenna_spacing: float | None = None  # None -> 5 lambda
    hotspot_radius: float = 10.0
    user_positions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("num_aps", "num_antennas", "num_users", "num_paths"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("carrier_freq", "wavelength", "noise_power", "tx_power", "rician_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.height_diff <= 0:
            raise ValueError("APs must sit above the users (height_diff > 0)")
        if self.movable_box_halfwidth < 0 or self.rotatable_range < 0:
            raise ValueError("movable box and rotatable range must be non-negative")
        if self.user_positions is not None:
            up = np.asarray(self.user_positions, dtype=float).reshape(self.num_users, 3)
            object.__setattr__(self, "user_positions", up)

    @property
    def spacing(self) -> float:
        return 5.0 * self.wavelength if self.antenna_spacing is None else self.antenna_spacing

    @property
    def ap_positions(self) -> np.ndarray:
        ang = 2.0 * np.pi * np.arange(self.num_aps) / self.num_aps
        r = self.ring_radius
        return np.stack([r * np.cos(ang), r * np.sin(ang), np.full_like(ang, self.height_diff)], axis=1)

    def ap_frames(self) -> np.ndarray:
        """``(M, 3, 3)``; columns of each matrix are the AP's local axes in global coordinates."""
        ang = 2.0 * np.pi * np.arange(self.num_aps) / self.num_aps
        ey = np.stack([-np.cos(ang), -np.sin(ang), np.zeros_like(ang)], axis=1)
        ez = np.tile([0.0, 0.0, 1.0], (self.num_aps, 1))
        ex = np.cross(ey, ez)
        return np.stack([ex, ey, ez], axis=2)

    def layout(self) -> AntennaLayout:
        return AntennaLayout.grid(self.num_antennas, self.wavelength, self.spacing, self.movable_box_halfwidth)

    def initial_positions(self) -> np.ndarray:
        """``(M, N, 3)`` initial antenna positions (identical for every AP)."""
        return np.broadcast_to(self.layout().positions, (self.num_aps, self.num_antennas, 3)).copy()

    def position_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lay = self.layout()
        shape = (self.num_aps, self.num_antennas, 3)
        return np.broadcast_to(lay.lower, shape).copy(), np.broadcast_to(lay.upper, shape).copy()

    def rotation_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rr = self.rotatable_range
        return np.full((self.num_aps, 3), -rr), np.full((self.num_aps, 3), rr)

    def with_users(self, positions) -> "Scenario":
        return dataclasses.replace(self, user_positions=np.asarray(positions, dtype=float))

    # -- config boundary -------------------------------------------------
    def to_config(self) -> dict:
        """Human-units dict (dB, dBm, degrees, wavelengths) for JSON files."""
        return {
            "num_aps": self.num_aps,
            "num_antennas": self.num_antennas,
            "num_users": self.num_users,
            "num_paths": self.num_paths,
            "carrier_freq_hz": self.carrier_freq,
            "wavelength_m": self.wavelength,
            "noise_power_dbm": float(watt_to_dbm(self.noise_power)),
            "tx_power_dbm": float(watt_to_dbm(self.tx_power)),
            "rician_factor_db": float(lin_to_db(self.rician_factor)),
            "ring_radius_m": self.ring_radius,
            "user_area_radius_m": self.user_area_radius,
            "height_diff_m": self.height_diff,
            "movable_region_wavelengths": 2.0 * self.movable_box_halfwidth / self.wavelength,
            "rotatable_range_deg": float(np.degrees(self.rotatable_range)),
            "antenna_spacing_wavelengths": self.spacing / self.wavelength,
            "hotspot_radius_m": self.hotspot_radius,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Scenario":
        cfg = dict(cfg)
        known = set(cls().to_config())
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        base = cls().to_config()
        base.update(cfg)
        lam = float(base["wavelength_m"])
        return cls(
            num_aps=int(base["num_aps"]),
            num_antennas=int(base["num_antennas"]),
            num_users=int(base["num_users"]),
            num_paths=int(base["num_paths"]),
            carrier_freq=float(base["carrier_freq_hz"]),
            wavelength=lam,
            noise_power=float(dbm_to_watt(base["noise_power_dbm"])),
            tx_power=float(dbm_to_watt(base["tx_power_dbm"])),
            rician_factor=float(db_to_lin(base["rician_factor_db"])),
            ring_radius=float(base["ring_radius_m"]),
            user_area_radius=float(base["user_area_radius_m"]),
            height_diff=float(base["height_diff_m"]),
            movable_box_halfwidth=0.5 * float(base["movable_region_wavelengths"]) * lam,
            rotatable_range=float(np.radians(base["rotatable_range_deg"])),
            antenna_spacing=float(base["antenna_spacing_wavelengths"]) * lam,
            hotspot_radius=float(base["hotspot_radius_m"]),
        )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read scenario config {path}: {exc}") from exc
    return Scenario.from_config(cfg)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_config(), indent=2, sort_keys=True) + "\n")


def path_loss_db(d, f_c):
    """3GPP UMi path loss in dB (negative) at 3D distance ``d`` metres."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if f_c <= 0:
        raise ValueError("carrier frequency must be positive")
    out = -22.7 - 36.7 * np.log10(d) - 26.0 * np.log10(f_c / 1e9)
    return float(out) if out.ndim == 0 else out


def _uniform_disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    a = 2.0 * np.pi * rng.random(n)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


def place_users(kind: str, scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """User positions ``(K, 3)`` at ground level.

    ``uniform``: area-uniform over the serving disk. ``hotspot``: three
    centres drawn uniformly in the disk, users split round-robin between
    them, each uniform within ``hotspot_radius`` of its centre and clipped
    radially back into the serving disk.
    """
    R = scenario.user_area_radius
    if R <= 0:
        raise ValueError("user_area_radius must be positive")
    K = scenario.num_users
    if kind == "uniform":
        xy = _uniform_disk(rng, K, R)
    elif kind == "hotspot":
        centres = _uniform_disk(rng, 3, R)
        xy = centres[np.arange(K) % 3] + _uniform_disk(rng, K, scenario.hotspot_radius)
        norm = np.linalg.norm(xy, axis=1)
        scale = np.where(norm > R, R / np.maximum(norm, 1e-300), 1.0)
        xy = xy * scale[:, None]
    else:
        raise ValueError(f"unknown user distribution {kind!r}")
    return np.column_stack([xy, np.zeros(K)])


@dataclass(frozen=True)
class PathSet:
    """Statistical CSI: arrival angles in each AP's unrotated frame and path powers.

    ``phi``, ``theta`` and ``variances`` are ``(K, M, L)``; path 0 is LoS.
    """

    phi: np.ndarray
    theta: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        for name in ("phi", "theta", "variances"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dirs = wave_vectors(self.phi, self.theta)
        dirs.setflags(write=False)
        object.__setattr__(self, "_dirs", dirs)

    @property
    def directions(self) -> np.ndarray:
        """Unit arrival directions ``(K, M, L, 3)``."""
        return self._dirs

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.variances.shape

    def link_gain(self) -> np.ndarray:
        return self.variances.sum(axis=-1)


def generate_paths(scenario: Scenario, rng: np.random.Generator) -> PathSet:
    if scenario.user_positions is None:
        raise ValueError("scenario has no user positions; call place_users first")
    K, M, L = scenario.num_users, scenario.num_aps, scenario.num_paths
    aps = scenario.ap_positions
    frames = scenario.ap_frames()
    diff = scenario.user_positions[:, None, :] - aps[None, :, :]  # AP -> user
    dist = np.linalg.norm(diff, axis=-1)
    local = np.einsum("mdi,kmd->kmi", frames, diff / dist[..., None])
    los_phi, los_theta = angles_from_vectors(local)

    phi = np.empty((K, M, L))
    theta = np.empty((K, M, L))
    phi[:, :, 0] = los_phi
    theta[:, :, 0] = los_theta
    if L > 1:
        u1 = rng.random((K, M, L - 1))
        u2 = rng.random((K, M, L - 1))
        theta[:, :, 1:] = np.arccos(1.0 - 2.0 * u1)
        phi[:, :, 1:] = np.pi * u2

    gain = db_to_lin(path_loss_db(dist, scenario.carrier_freq)) * scenario.tx_power
    kappa = scenario.rician_factor
    var = np.empty((K, M, L))
    if L == 1:
        var[:, :, 0] = gain
    else:
        var[:, :, 0] = kappa * gain / (kappa + 1.0)
        var[:, :, 1:] = (gain / ((kappa + 1.0) * (L - 1)))[..., None]
    return PathSet(phi, theta, var)


def sample_fading(paths: PathSet | np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Independent ``CN(0, b)`` draws shaped like the variances, with optional batch axis."""
    b = paths.variances if isinstance(paths, PathSet) else np.asarray(paths, dtype=float)
    shape = b.shape if size is None else (size,) + b.shape
    z = rng.standard_normal(shape + (2,))
    return np.sqrt(b / 2.0) * (z[..., 0] + 1j * z[..., 1])


def _as_positions(t, M):
    return np.ascontiguousarray(np.asarray(t, dtype=float).reshape(M, -1, 3))


def _as_orientations(r, M):
    return np.asarray(r, dtype=float).reshape(M, 3)


def steering_tensor(paths: PathSet, t, r, wavelength: float) -> np.ndarray:
    """Pattern-weighted steering vectors ``(M, N, K, L)`` for fixed (t, r)."""
    K, M, L = paths.shape
    t = _as_positions(t, M)
    r = _as_orientations(r, M)
    k0 = 2.0 * np.pi / wavelength
    out = np.empty((M, t.shape[1], K, L), dtype=complex)
    for m in range(M):
        R = rotation_matrix(r[m])
        local = paths.directions[:, m] @ R
        x, y = local[..., 0], local[..., 1]
        rxy = np.sqrt(x * x + y * y)
        gain = np.sqrt(np.where((y > 0) & (rxy > 0), (16.0 / np.pi) * y * y / np.where(rxy > 0, rxy, 1.0), 0.0))
        out[m] = gain * np.exp(1j * k0 * np.einsum("nd,kld->nkl", t[m], local))
    return out


def assemble_channel(paths: PathSet, psi: np.ndarray, t, r, wavelength: float) -> np.ndarray:
    """Channel blocks ``(..., M, N, K)`` for fading ``psi`` of shape ``(..., K, M, L)``.

    A single realization goes through the per-AP kernel; batches use one
    steering tensor shared by every sample.
    """
    K, M, L = paths.shape
    psi = np.asarray(psi, dtype=complex)
    if psi.shape == (K, M, L):
        t = _as_positions(t, M)
        r = _as_orientations(r, M)
        k0 = 2.0 * np.pi / wavelength
        dirs = paths.directions
        blocks = [
            _kernels.ap_channel(t[m], rotation_matrix(r[m]), np.ascontiguousarray(dirs[:, m]),
                                np.ascontiguousarray(psi[:, m]), k0)
            for m in range(M)
        ]
        return np.stack(blocks)
    S = steering_tensor(paths, t, r, wavelength)
    return np.einsum("mnkl,...kml->...mnk", S, psi)


def ap_channel(paths: PathSet, psi: np.ndarray, t_m, r_m, m: int, wavelength: float) -> np.ndarray:
    """Block ``H_m`` of AP ``m`` alone (single realization)."""
    dirs = np.ascontiguousarray(paths.directions[:, m])
    return _kernels.ap_channel(
        np.ascontiguousarray(np.asarray(t_m, dtype=float).reshape(-1, 3)),
        rotation_matrix(r_m),
        dirs,
        np.ascontiguousarray(psi[:, m]),
        2.0 * np.pi / wavelength,
    )


def stack_blocks(blocks: np.ndarray) -> np.ndarray:
    """``(..., M, N, K)`` blocks to the stacked ``(..., MN, K)`` channel."""
    *lead, M, N, K = blocks.shape
    return blocks.reshape(*lead, M * N, K)
