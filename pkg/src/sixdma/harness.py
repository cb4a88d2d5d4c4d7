"""Monte Carlo experiment driver: realizations x schemes x sweep values.

Every realization derives its random streams from ``(master_seed,
realization, stream)`` only, so all schemes and all sweep values of one
realization share users, arrival angles and fading draws.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beamform import centralized_mmse, local_receiver
from .channel import PathSet, Scenario, db_to_lin, generate_paths, place_users, sample_fading, stack_blocks, steering_tensor
from .cssca import CsscaConfig, TraceRecord, baseline_config, run
from .objective import sinr

log = logging.getLogger(__name__)

SCHEMES = ("proposed_6dma", "fpa", "position_only", "orientation_only", "centralized_mmse")
SWEEP_AXES = ("none", "movable_region", "rotation_range", "rician_db")

# stream ids
_USERS, _PATHS, _CSSCA, _EVAL, _SAA = range(5)


def desk_scenario(**overrides) -> Scenario:
    """Small CI-sized scenario (4 APs x 4 antennas, 4 users, 4 paths, 70 dBm)."""
    base = dict(num_aps=4, num_antennas=4, num_users=4, num_paths=4, tx_power=10.0 ** ((70.0 - 30.0) / 10.0))
    base.update(overrides)
    return Scenario(**base)


def paper_scenario(**overrides) -> Scenario:
    return Scenario(**overrides)


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=desk_scenario)
    schemes: tuple[str, ...] = SCHEMES
    num_realizations: int = 20
    s_max: int = 100
    eval_samples: int = 200
    sweep_axis: str = "none"
    sweep_values: tuple[float, ...] = ()
    master_seed: int = 0
    user_dist: str = "uniform"
    cssca: CsscaConfig = field(default_factory=CsscaConfig)
    jobs: int = 1
    keep_traces: bool = False

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.sweep_values = tuple(float(v) for v in self.sweep_values)
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ValueError(f"unknown schemes {sorted(bad)}; choose from {SCHEMES}")
        if self.num_realizations < 1 or self.eval_samples < 1 or self.s_max < 0:
            raise ValueError("realizations and eval_samples must be positive, s_max non-negative")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none" and not self.sweep_values:
            raise ValueError("a sweep needs at least one value")
        if self.sweep_axis == "movable_region" and any(v < 0 for v in self.sweep_values):
            raise ValueError("movable region size must be >= 0")
        if self.sweep_axis == "rotation_range" and any(not 0 <= v <= 180 for v in self.sweep_values):
            raise ValueError("rotation range must lie in [0, 180] degrees")
        if self.user_dist not in ("uniform", "hotspot"):
            raise ValueError(f"unknown user distribution {self.user_dist!r}")
        self.cssca = dataclasses.replace(self.cssca, s_max=self.s_max)

    @property
    def points(self) -> tuple[float, ...]:
        return self.sweep_values if self.sweep_axis != "none" else (float("nan"),)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    sweep_axis: str
    sweep_value: float
    realization: int
    ergodic_sum_rate: float
    per_user_rates: tuple[float, ...]
    stream_hash: str
    error: str = ""
    wall_time: float = 0.0


CSV_FIELDS = ["scheme", "sweep_axis", "sweep_value", "realization", "ergodic_sum_rate",
              "per_user_rates", "stream_hash", "error"]


def apply_sweep(scenario: Scenario, axis: str, value: float) -> Scenario:
    """Scenario with one parameter set; region in wavelengths, range in degrees, kappa in dB."""
    if axis == "none":
        return scenario
    if axis == "movable_region":
        return dataclasses.replace(scenario, movable_box_halfwidth=0.5 * value * scenario.wavelength)
    if axis == "rotation_range":
        return dataclasses.replace(scenario, rotatable_range=float(np.radians(value)))
    if axis == "rician_db":
        return dataclasses.replace(scenario, rician_factor=float(db_to_lin(value)))
    raise ValueError(f"unknown sweep axis {axis!r}")


def stream(master_seed: int, realization: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, realization, stream_id]))


def _hash(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def realization_setup(config: ExperimentConfig, realization: int, value: float):
    """Scenario with users placed and the PathSet for one (realization, sweep value)."""
    sc = apply_sweep(config.scenario, config.sweep_axis, value)
    users = place_users(config.user_dist, sc, stream(config.master_seed, realization, _USERS))
    sc = sc.with_users(users)
    paths = generate_paths(sc, stream(config.master_seed, realization, _PATHS))
    return sc, paths


def ergodic_rates(scenario: Scenario, paths: PathSet, t, r, c, psi: np.ndarray) -> np.ndarray:
    """Per-user rates averaged over fading draws ``psi`` (S, K, M, L).

    ``c=None`` scores the network-wide MMSE receiver instead of ``w_k = G c_k``.
    """
    sigma2 = scenario.noise_power
    S = steering_tensor(paths, t, r, scenario.wavelength)
    Hb = np.einsum("mnkl,skml->smnk", S, psi)
    H = stack_blocks(Hb)
    if c is None:
        W = centralized_mmse(H, sigma2)
    else:
        G = local_receiver(Hb, sigma2)
        W = np.einsum("smnj,kmj->smnk", G, c).reshape(H.shape)
    return np.log2(1.0 + sinr(H, W, sigma2)).mean(axis=0)


def _run_point(config: ExperimentConfig, realization: int, value: float):
    sc, paths = realization_setup(config, realization, value)
    psi_eval = sample_fading(paths, stream(config.master_seed, realization, _EVAL), size=config.eval_samples)
    # tag the leading raw draws of the shared streams (not psi, whose scale follows the sweep)
    h = _hash(np.concatenate([stream(config.master_seed, realization, sid).standard_normal(8)
                              for sid in (_CSSCA, _EVAL)]))
    t0, r0 = sc.initial_positions(), np.zeros((sc.num_aps, 3))
    rows, traces = [], []
    for scheme in config.schemes:
        start = time.perf_counter()
        try:
            if scheme == "centralized_mmse":
                rates = ergodic_rates(sc, paths, t0, r0, None, psi_eval)
            else:
                res = run(sc, paths, baseline_config(scheme, config.cssca),
                          stream(config.master_seed, realization, _CSSCA),
                          saa_rng=stream(config.master_seed, realization, _SAA))
                rates = ergodic_rates(sc, paths, res.t, res.r, res.c, psi_eval)
                if config.keep_traces:
                    traces.append((scheme, value, realization, res.trace))
            err = ""
        except Exception as exc:  # recorded per row, the run continues
            log.exception("scheme %s failed on realization %d", scheme, realization)
            rates = np.full(sc.num_users, np.nan)
            err = f"{type(exc).__name__}: {exc}"
        rows.append(ResultRow(scheme, config.sweep_axis, value, realization, float(np.sum(rates)),
                              tuple(float(x) for x in rates), h, err, time.perf_counter() - start))
    return rows, traces


def _task(args):
    return _run_point(*args)


def run_experiment(config: ExperimentConfig, return_traces: bool = False):
    """All rows ordered by (sweep value, realization, scheme order in config)."""
    tasks = [(config, i, v) for v in config.points for i in range(config.num_realizations)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(ex.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    rows = [row for r, _ in results for row in r]
    traces = [tr for _, t in results for tr in t]
    return (rows, traces) if return_traces else rows


def compute_cdf(rates) -> list[tuple[float, float]]:
    """Empirical CDF points ``(x_(i), i / n)`` of the sorted input."""
    x = np.sort(np.asarray(list(rates), dtype=float))
    if x.size == 0:
        raise ValueError("cannot build a CDF from no data")
    n = x.size
    return [(float(v), (i + 1) / n) for i, v in enumerate(x)]


def _fmt(v) -> str:
    return repr(float(v))


def emit_csv(rows, path, include_timing: bool = False) -> None:
    """Write result rows with a fixed column order and round-trip float text."""
    fields = CSV_FIELDS + (["wall_time"] if include_timing else [])
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for row in rows:
                rec = [row.scheme, row.sweep_axis, _fmt(row.sweep_value), row.realization,
                       _fmt(row.ergodic_sum_rate), ";".join(_fmt(x) for x in row.per_user_rates),
                       row.stream_hash, row.error]
                if include_timing:
                    rec.append(_fmt(row.wall_time))
                w.writerow(rec)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            pur = tuple(float(x) for x in rec["per_user_rates"].split(";")) if rec["per_user_rates"] else ()
            rows.append(ResultRow(rec["scheme"], rec["sweep_axis"], float(rec["sweep_value"]), int(rec["realization"]),
                                  float(rec["ergodic_sum_rate"]), pur, rec["stream_hash"], rec["error"],
                                  float(rec.get("wall_time") or 0.0)))
    return rows


def emit_cdf_csv(rows, path) -> None:
    by_scheme: dict[str, list[float]] = {}
    for row in rows:
        if not row.error:
            by_scheme.setdefault(row.scheme, []).append(row.ergodic_sum_rate)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "ergodic_sum_rate", "cumulative_probability"])
        for scheme, rates in by_scheme.items():
            for x, p in compute_cdf(rates):
                w.writerow([scheme, _fmt(x), _fmt(p)])


def emit_traces_csv(traces, path) -> None:
    names = [f.name for f in dataclasses.fields(TraceRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "sweep_value", "realization"] + names)
        for scheme, value, realization, recs in traces:
            for rec in recs:
                vals = [getattr(rec, k) for k in names]
                w.writerow([scheme, _fmt(value), realization] +
                           [int(v) if isinstance(v, bool) else (_fmt(v) if isinstance(v, float) else v) for v in vals])


def summarize(rows) -> dict[tuple[str, float], tuple[float, float, int]]:
    """Mean, standard error and count of the ergodic sum rate per (scheme, sweep value)."""
    groups: dict[tuple[str, float], list[float]] = {}
    for row in rows:
        if not row.error:
            groups.setdefault((row.scheme, row.sweep_value), []).append(row.ergodic_sum_rate)
    out = {}
    for key, vals in groups.items():
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        out[key] = (float(v.mean()), se, int(v.size))
    return out
