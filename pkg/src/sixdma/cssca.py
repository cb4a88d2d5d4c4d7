"""Long-timescale optimizer: stochastic SCA over antenna positions ``t``,
array orientations ``r`` and the combining parameter ``c``.

Each iteration draws one fading sample, tracks a smoothed gradient of the
sample objective, maximises the proximal-linear surrogate (a projected
ascent step of size ``kappa`` per block) and moves a fraction ``gamma``
towards it.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .beamform import (
    centralized_mmse,
    decentralized_beamformers,
    estimate_V,
    identity_long_param,
    local_receiver,
    solve_long_param,
)
from .channel import PathSet, Scenario, sample_fading, stack_blocks, steering_tensor
from .geometry import rotation_matrix
from .objective import grad_c_from_stats, grad_numeric, objective_from_stats, per_user_rates

log = logging.getLogger(__name__)

BASELINES = ("fpa", "position_only", "orientation_only", "centralized_mmse")


class NonFiniteIterateError(FloatingPointError):
    pass


def step_schedule(s: int) -> tuple[float, float]:
    """``(rho, gamma) = (1/(1+s)^0.9, 15/(15+s))``."""
    if s < 0:
        raise ValueError("iteration index must be non-negative")
    return 1.0 / (1.0 + s) ** 0.9, 15.0 / (15.0 + s)


@dataclass
class CsscaConfig:
    s_max: int = 100
    # proximal weights: tau_v = -kappa_v, so each surrogate maximiser is an
    # ascent step of length 1 / (2 kappa_v) along the tracked gradient
    kappa_t: float | None = None  # None -> kappa_r; positions measured in wavelengths
    kappa_r: float = 10.0
    kappa_c: float = 10.0
    optimize_t: bool = True
    optimize_r: bool = True
    optimize_c: bool = True
    c_init: str = "identity"  # or "saa": solve the stationarity system from an SAA estimate of V
    saa_samples: int = 500
    fd_step: float | None = None  # None -> 1e-6 * max(1, |x|)
    early_stop_tol: float | None = None
    record_beamformers: bool = False

    def __post_init__(self):
        if self.s_max < 0:
            raise ValueError("s_max must be non-negative")
        if self.c_init not in ("identity", "saa"):
            raise ValueError(f"unknown c_init {self.c_init!r}")
        for name in ("kappa_r", "kappa_c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa_t is not None and self.kappa_t <= 0:
            raise ValueError("kappa_t must be positive")

    def taus(self, wavelength: float) -> tuple[float, float, float]:
        """``(tau_t, tau_r, tau_c)``; ``tau_t`` applies ``kappa_t`` to t / wavelength."""
        kt = self.kappa_r if self.kappa_t is None else self.kappa_t
        return -kt / wavelength**2, -self.kappa_r, -self.kappa_c


@dataclass
class CsscaState:
    s: int
    t: np.ndarray  # (M, N, 3)
    r: np.ndarray  # (M, 3)
    c: np.ndarray  # (K, M, K)
    f_t: np.ndarray
    f_r: np.ndarray
    f_c: np.ndarray
    tau_t: float
    tau_r: float
    tau_c: float

    def __post_init__(self):
        if not (self.tau_t < 0 and self.tau_r < 0 and self.tau_c < 0):
            raise ValueError("proximal weights tau must be strictly negative")

    @classmethod
    def initial(cls, t, r, c, taus) -> "CsscaState":
        t = np.array(t, dtype=float)
        r = np.array(r, dtype=float)
        c = np.array(c, dtype=complex)
        return cls(0, t, r, c, np.zeros_like(t), np.zeros_like(r), np.zeros_like(c), *taus)


@dataclass(frozen=True)
class TraceRecord:
    s: int
    rho: float
    gamma: float
    g: float
    f_avg: float
    feasible_t: bool
    feasible_r: bool


TRACE_FIELDS = [f.name for f in dataclasses.fields(TraceRecord)]


@dataclass
class CsscaResult:
    t: np.ndarray
    r: np.ndarray
    c: np.ndarray | None
    trace: list[TraceRecord]
    beamformers: list[np.ndarray] = field(default_factory=list)

    @property
    def f_trace(self) -> np.ndarray:
        return np.array([rec.f_avg for rec in self.trace])


def project_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lower), upper)


def track_gradients(state: CsscaState, grads: dict, rho: float) -> None:
    """In-place ``f_v <- (1 - rho) f_v + rho grad_v``; blocks missing from ``grads`` are left alone."""
    for name in ("t", "r", "c"):
        if name in grads:
            attr = "f_" + name
            setattr(state, attr, (1.0 - rho) * getattr(state, attr) + rho * grads[name])


def solve_subproblems(state: CsscaState, t_bounds, r_bounds):
    """Maximisers of the three decoupled surrogates (projected for t and r)."""
    t_bar = project_box(state.t - state.f_t / (2.0 * state.tau_t), *t_bounds)
    r_bar = project_box(state.r - state.f_r / (2.0 * state.tau_r), *r_bounds)
    c_bar = state.c - state.f_c / (2.0 * state.tau_c)
    return t_bar, r_bar, c_bar


def smooth_update(state: CsscaState, bars, gamma: float) -> CsscaState:
    t_bar, r_bar, c_bar = bars
    return dataclasses.replace(
        state,
        s=state.s + 1,
        t=(1.0 - gamma) * state.t + gamma * t_bar,
        r=(1.0 - gamma) * state.r + gamma * r_bar,
        c=(1.0 - gamma) * state.c + gamma * c_bar,
    )


def _in_box(x, lower, upper, tol=1e-12):
    return bool(np.all(x >= lower - tol) and np.all(x <= upper + tol))


class _SampleModel:
    """Per-AP stats of one fading sample with cheap single-AP updates."""

    def __init__(self, paths: PathSet, psi: np.ndarray, sigma2: float, wavelength: float):
        self.dirs = [np.ascontiguousarray(paths.directions[:, m]) for m in range(paths.shape[1])]
        self.psi = [np.ascontiguousarray(psi[:, m]) for m in range(paths.shape[1])]
        self.sigma2 = sigma2
        self.k0 = 2.0 * np.pi / wavelength

    def block(self, m, t_m, R_m):
        return _kernels.ap_channel(t_m, R_m, self.dirs[m], self.psi[m], self.k0)

    def stats(self, m, t_m, R_m):
        return _kernels.ap_stats(self.block(m, t_m, R_m), self.sigma2)


def _fresh_gradients(model: _SampleModel, state: CsscaState, cfg: CsscaConfig, t_bounds, r_bounds):
    M = state.t.shape[0]
    sigma2 = model.sigma2
    t = np.ascontiguousarray(state.t)
    Rs = [rotation_matrix(state.r[m]) for m in range(M)]
    A = np.empty((M,) + (state.c.shape[0],) * 2, dtype=complex)
    B = np.empty_like(A)
    H = []
    for m in range(M):
        Hm = model.block(m, t[m], Rs[m])
        H.append(Hm)
        A[m], B[m] = _kernels.ap_stats(Hm, sigma2)
    c = np.ascontiguousarray(state.c)
    g0 = float(_kernels.sum_rate_from_stats(A, B, c, sigma2))
    grads = {}
    if cfg.optimize_c:
        grads["c"] = grad_c_from_stats(A, B, c, sigma2)

    if cfg.optimize_t:
        gt = np.zeros_like(t)
        for m in range(M):
            def f_t(x, m=m):
                Am, Bm = model.stats(m, x.reshape(-1, 3), Rs[m])
                A2, B2 = A.copy(), B.copy()
                A2[m], B2[m] = Am, Bm
                return float(_kernels.sum_rate_from_stats(A2, B2, c, sigma2))

            gt[m] = grad_numeric(f_t, t[m].ravel(), t_bounds[0][m], t_bounds[1][m],
                                 h=cfg.fd_step, f0=g0).reshape(-1, 3)
        grads["t"] = gt

    if cfg.optimize_r:
        gr = np.zeros_like(state.r)
        for m in range(M):
            def f_r(x, m=m):
                Am, Bm = model.stats(m, t[m], rotation_matrix(x))
                A2, B2 = A.copy(), B.copy()
                A2[m], B2[m] = Am, Bm
                return float(_kernels.sum_rate_from_stats(A2, B2, c, sigma2))

            gr[m] = grad_numeric(f_r, state.r[m], r_bounds[0][m], r_bounds[1][m], h=cfg.fd_step, f0=g0)
        grads["r"] = gr
    return g0, grads, H


def _running_average(paths, history, t, r, c, sigma2, wavelength):
    S = steering_tensor(paths, t, r, wavelength)
    H = np.einsum("mnkl,skml->smnk", S, history)
    G = local_receiver(H, sigma2)
    Gh = np.conj(np.swapaxes(G, -1, -2))
    return float(np.mean(objective_from_stats(Gh @ H, Gh @ G, c, sigma2)))


def initial_long_param(scenario: Scenario, paths: PathSet, cfg: CsscaConfig, t, r,
                       rng: np.random.Generator | None) -> np.ndarray:
    K, M = scenario.num_users, scenario.num_aps
    if cfg.c_init == "identity":
        return identity_long_param(K, M)
    if rng is None:
        raise ValueError("c_init='saa' needs an rng for the SAA samples")
    V = estimate_V(paths, t, r, scenario.noise_power, cfg.saa_samples, rng, scenario.wavelength)
    return solve_long_param(V, K, M)


def run(scenario: Scenario, paths: PathSet, config: CsscaConfig, rng: np.random.Generator,
        saa_rng: np.random.Generator | None = None, t0=None, r0=None, c0=None) -> CsscaResult:
    """Run the stochastic SCA loop for ``config.s_max`` iterations.

    ``rng`` drives the per-iteration fading samples only, so two runs with
    equally seeded generators see the same fading sequence whatever blocks
    they optimise. ``saa_rng`` is used for an SAA warm start of ``c``.
    """
    cfg = config
    sigma2, lam = scenario.noise_power, scenario.wavelength
    t_bounds = scenario.position_bounds()
    r_bounds = scenario.rotation_bounds()
    t0 = scenario.initial_positions() if t0 is None else np.asarray(t0, dtype=float)
    r0 = np.zeros((scenario.num_aps, 3)) if r0 is None else np.asarray(r0, dtype=float)
    if c0 is None:
        c0 = initial_long_param(scenario, paths, cfg, t0, r0, saa_rng)
    state = CsscaState.initial(t0, r0, c0, cfg.taus(lam))
    if not (_in_box(state.t, *t_bounds) and _in_box(state.r, *r_bounds)):
        raise ValueError("initial point is outside the feasible region")

    trace: list[TraceRecord] = []
    beamformers: list[np.ndarray] = []
    history = np.empty((cfg.s_max,) + paths.shape, dtype=complex)
    for s in range(cfg.s_max):
        rho, gamma = step_schedule(s)
        psi = sample_fading(paths, rng)
        history[s] = psi
        model = _SampleModel(paths, psi, sigma2, lam)
        g, grads, H = _fresh_gradients(model, state, cfg, t_bounds, r_bounds)
        if cfg.record_beamformers:
            G = local_receiver(np.stack(H), sigma2)
            beamformers.append(decentralized_beamformers(G, state.c))
        f_avg = _running_average(paths, history[: s + 1], state.t, state.r, state.c, sigma2, lam)

        track_gradients(state, grads, rho)
        bars = solve_subproblems(state, t_bounds, r_bounds)
        state = smooth_update(state, bars, gamma)
        if not (np.all(np.isfinite(state.t)) and np.all(np.isfinite(state.r)) and np.all(np.isfinite(state.c))):
            raise NonFiniteIterateError(f"non-finite iterate after iteration {s} (g={g!r})")
        trace.append(TraceRecord(s, rho, gamma, g, f_avg,
                                 _in_box(state.t, *t_bounds), _in_box(state.r, *r_bounds)))
        if cfg.early_stop_tol is not None and len(trace) >= 20:
            last = [rec.f_avg for rec in trace[-20:]]
            if max(last) - min(last) < cfg.early_stop_tol:
                log.info("early stop at iteration %d", s)
                break
    return CsscaResult(state.t, state.r, state.c, trace, beamformers)


def baseline_config(kind: str, config: CsscaConfig) -> CsscaConfig:
    """Config for a restricted-flexibility baseline (frozen blocks get no gradient)."""
    if kind == "proposed_6dma":
        return config
    if kind == "fpa":
        return dataclasses.replace(config, optimize_t=False, optimize_r=False)
    if kind == "position_only":
        return dataclasses.replace(config, optimize_r=False)
    if kind == "orientation_only":
        return dataclasses.replace(config, optimize_t=False)
    raise ValueError(f"unknown baseline {kind!r}")


def run_centralized(scenario: Scenario, paths: PathSet, num_samples: int, rng: np.random.Generator) -> CsscaResult:
    """Centralized MMSE on the fixed initial layout; trace holds per-sample sum rates."""
    t0 = scenario.initial_positions()
    r0 = np.zeros((scenario.num_aps, 3))
    S = steering_tensor(paths, t0, r0, scenario.wavelength)
    trace = []
    total = 0.0
    for s in range(num_samples):
        psi = sample_fading(paths, rng)
        H = stack_blocks(np.einsum("mnkl,kml->mnk", S, psi))
        g = per_user_rates(H, centralized_mmse(H, scenario.noise_power), scenario.noise_power).sum_rate
        total += g
        rho, gamma = step_schedule(s)
        trace.append(TraceRecord(s, rho, gamma, g, total / (s + 1), True, True))
    return CsscaResult(t0, r0, None, trace)


def run_baseline(kind: str, scenario: Scenario, paths: PathSet, config: CsscaConfig,
                 rng: np.random.Generator, saa_rng: np.random.Generator | None = None) -> CsscaResult:
    if kind == "centralized_mmse":
        return run_centralized(scenario, paths, config.s_max, rng)
    return run(scenario, paths, baseline_config(kind, config), rng, saa_rng)


def write_trace_csv(records, path, extra: dict | None = None) -> None:
    """Write trace records; ``extra`` maps leading column names to constant values."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(extra) + TRACE_FIELDS)
        for rec in records:
            w.writerow([*extra.values(), *(_fmt(getattr(rec, k)) for k in TRACE_FIELDS)])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v
