import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sixdma.channel import db_to_lin
from sixdma.harness import (
    ExperimentConfig,
    apply_sweep,
    compute_cdf,
    desk_scenario,
    emit_csv,
    read_csv,
    realization_setup,
    run_experiment,
    summarize,
)

FAST = dict(num_realizations=2, s_max=5, eval_samples=20)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(schemes=())
    with pytest.raises(ValueError):
        ExperimentConfig(schemes=("magic",))
    with pytest.raises(ValueError):
        ExperimentConfig(num_realizations=0)
    with pytest.raises(ValueError):
        ExperimentConfig(sweep_axis="rician_db")
    with pytest.raises(ValueError):
        ExperimentConfig(sweep_axis="rotation_range", sweep_values=(200,))
    with pytest.raises(ValueError):
        ExperimentConfig(sweep_axis="movable_region", sweep_values=(-1,))
    with pytest.raises(ValueError):
        ExperimentConfig(user_dist="grid")
    assert ExperimentConfig(s_max=7).cssca.s_max == 7


def test_apply_sweep():
    sc = desk_scenario()
    assert apply_sweep(sc, "movable_region", 2.0).movable_box_halfwidth == pytest.approx(sc.wavelength)
    assert apply_sweep(sc, "rotation_range", 30.0).rotatable_range == pytest.approx(np.pi / 6)
    assert apply_sweep(sc, "rician_db", 20.0).rician_factor == pytest.approx(100.0)
    assert apply_sweep(sc, "none", 1.0) is sc
    with pytest.raises(ValueError):
        apply_sweep(sc, "height", 1.0)


def test_paired_streams_across_sweep_values():
    cfg = ExperimentConfig(sweep_axis="rician_db", sweep_values=(-10.0, 20.0), **FAST)
    sa, pa = realization_setup(cfg, 1, -10.0)
    sb, pb = realization_setup(cfg, 1, 20.0)
    assert np.array_equal(sa.user_positions, sb.user_positions)
    assert np.array_equal(pa.phi, pb.phi) and np.array_equal(pa.theta, pb.theta)
    assert sb.rician_factor == pytest.approx(float(db_to_lin(20.0)))
    s2, _ = realization_setup(cfg, 0, -10.0)
    assert not np.array_equal(sa.user_positions, s2.user_positions)


def test_run_experiment_rows_and_pairing():
    cfg = ExperimentConfig(**FAST)
    rows = run_experiment(cfg)
    assert len(rows) == 2 * 5
    for r in range(2):
        group = [row for row in rows if row.realization == r]
        assert [row.scheme for row in group] == list(cfg.schemes)
        assert len({row.stream_hash for row in group}) == 1
    assert rows[0].stream_hash != rows[-1].stream_hash
    for row in rows:
        assert not row.error
        assert math.isfinite(row.ergodic_sum_rate) and row.ergodic_sum_rate >= 0
        assert row.ergodic_sum_rate == pytest.approx(sum(row.per_user_rates))
        assert len(row.per_user_rates) == cfg.scenario.num_users
    # centralized MMSE upper-bounds the decentralized FPA receiver on the same layout
    for r in range(2):
        by = {row.scheme: row.ergodic_sum_rate for row in rows if row.realization == r}
        assert by["centralized_mmse"] >= by["fpa"]


def test_partial_failure_recorded(monkeypatch):
    import sixdma.harness as h

    def boom(*a, **k):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(h, "run", boom)
    rows = run_experiment(ExperimentConfig(schemes=("fpa", "centralized_mmse"), **FAST))
    fpa = [r for r in rows if r.scheme == "fpa"]
    cen = [r for r in rows if r.scheme == "centralized_mmse"]
    assert all("diverged" in r.error and math.isnan(r.ergodic_sum_rate) for r in fpa)
    assert all(not r.error for r in cen)
    assert [k[0] for k in summarize(rows)] == ["centralized_mmse"]


def test_jobs_match_serial():
    cfg = ExperimentConfig(schemes=("fpa",), **FAST)
    serial = run_experiment(cfg)
    par = run_experiment(dataclasses.replace(cfg, jobs=2))
    assert [(r.ergodic_sum_rate, r.stream_hash) for r in serial] == [(r.ergodic_sum_rate, r.stream_hash) for r in par]


def test_csv_roundtrip_and_determinism(tmp_path):
    cfg = ExperimentConfig(schemes=("fpa", "centralized_mmse"), sweep_axis="movable_region",
                           sweep_values=(0.0, 1.0), **FAST)
    rows = run_experiment(cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(rows, p1)
    emit_csv(run_experiment(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()
    back = read_csv(p1)
    for a, b in zip(rows, back):
        assert dataclasses.replace(a, wall_time=0.0) == b
    emit_csv(rows, p1, include_timing=True)
    assert p1.read_text().splitlines()[0].endswith("wall_time")
    with pytest.raises(OSError):
        emit_csv(rows, tmp_path / "missing" / "x.csv")


def test_compute_cdf():
    cdf = compute_cdf([3.0, 1.0, 2.0, 2.0])
    assert cdf == [(1.0, 0.25), (2.0, 0.5), (2.0, 0.75), (3.0, 1.0)]
    with pytest.raises(ValueError):
        compute_cdf([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_cdf_properties(xs):
    cdf = compute_cdf(xs)
    vals = [v for v, _ in cdf]
    probs = [p for _, p in cdf]
    assert vals == sorted(vals)
    assert probs[-1] == 1.0 and all(0 < p <= 1 for p in probs)
    assert all(b > a for a, b in zip(probs, probs[1:]))


def test_summarize():
    rows = run_experiment(ExperimentConfig(schemes=("fpa",), **FAST))
    (key, (mean, se, n)), = summarize(rows).items()
    assert key[0] == "fpa" and n == 2
    assert mean == pytest.approx(np.mean([r.ergodic_sum_rate for r in rows]))


def test_s_max_zero_matches_fpa_initial_layout():
    from sixdma.harness import ergodic_rates, sample_fading, stream
    from sixdma.beamform import identity_long_param
    base = dict(num_realizations=1, s_max=0, eval_samples=30)
    a = run_experiment(ExperimentConfig(schemes=("proposed_6dma",), **base))
    b = run_experiment(ExperimentConfig(schemes=("fpa",), **base))
    assert len(a) == 1 and a[0].ergodic_sum_rate == b[0].ergodic_sum_rate
    cfg = ExperimentConfig(**base)
    sc, paths = realization_setup(cfg, 0, float("nan"))
    psi = sample_fading(paths, stream(0, 0, 3), size=30)
    direct = ergodic_rates(sc, paths, sc.initial_positions(), np.zeros((4, 3)), identity_long_param(4, 4), psi)
    assert a[0].ergodic_sum_rate == pytest.approx(direct.sum(), rel=1e-12)


def test_emit_csv_sizes(tmp_path):
    p = tmp_path / "e.csv"
    emit_csv([], p)
    assert len(p.read_text().splitlines()) == 1
    rows = run_experiment(ExperimentConfig(schemes=("fpa",), num_realizations=1, s_max=1, eval_samples=5))
    emit_csv(rows, p)
    assert len(p.read_text().splitlines()) == 2


def test_cdf_examples():
    assert compute_cdf([5.0]) == [(5.0, 1.0)]
    assert [p for _, p in compute_cdf([1, 2, 3, 4])] == [0.25, 0.5, 0.75, 1.0]
