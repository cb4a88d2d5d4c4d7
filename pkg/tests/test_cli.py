import json

import pytest

from sixdma.cli import build_parser, main, make_config
from sixdma.harness import read_csv

TINY = ["--realizations", "1", "--s-max", "3", "--eval-samples", "10"]


def test_parser_defaults():
    args = build_parser().parse_args(["cdf", "--out", "x.csv"])
    cfg = make_config(args)
    assert args.scale == "desk" and cfg.num_realizations == 20
    assert cfg.scenario.num_aps == 4 and cfg.sweep_axis == "none"
    args = build_parser().parse_args(["sweep-rician", "--out", "x.csv", "--paper-scale"])
    cfg = make_config(args)
    assert cfg.scenario.num_aps == 10 and cfg.num_realizations == 200
    assert cfg.sweep_values == (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def test_bad_arguments():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["cdf", "--out", "x.csv", "--schemes", "magic"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["cdf"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["cdf", "--out", "x", "--desk", "--paper-scale"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep-movable", "--out", "x", "--values", "a,b"])


def test_cdf_command(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["cdf", "--out", str(out), "--schemes", "fpa,centralized_mmse"] + TINY) == 0
    rows = read_csv(out)
    assert [r.scheme for r in rows] == ["fpa", "centralized_mmse"]
    assert (tmp_path / "r_cdf.csv").exists()
    assert "fpa" in capsys.readouterr().out


def test_sweep_and_convergence_commands(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep-rotation", "--out", str(out), "--schemes", "orientation_only",
                 "--values", "0,30", "--user-dist", "hotspot"] + TINY) == 0
    assert sorted({r.sweep_value for r in read_csv(out)}) == [0.0, 30.0]
    conv = tmp_path / "c.csv"
    trace = tmp_path / "t.csv"
    assert main(["convergence", "--out", str(conv), "--trace-out", str(trace), "--schemes", "fpa"] + TINY) == 0
    lines = trace.read_text().splitlines()
    assert lines[0].startswith("scheme,sweep_value,realization,s,rho,gamma,g,f_avg")
    assert len(lines) == 1 + 3


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": {"num_aps": 2, "tx_power_dbm": 60}, "cssca": {"kappa_r": 5}}))
    args = build_parser().parse_args(["cdf", "--out", "x.csv", "--config", str(cfg)])
    c = make_config(args)
    assert c.scenario.num_aps == 2 and c.scenario.num_antennas == 4
    assert c.cssca.kappa_r == 5
    cfg.write_text(json.dumps({"cssca": {"nope": 1}}))
    with pytest.raises(SystemExit):
        make_config(build_parser().parse_args(["cdf", "--out", "x.csv", "--config", str(cfg)]))
    cfg.write_text("{not json")
    with pytest.raises(SystemExit):
        make_config(build_parser().parse_args(["cdf", "--out", "x.csv", "--config", str(cfg)]))


def test_invalid_config_value_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": {"num_aps": 0}}))
    assert main(["cdf", "--out", str(tmp_path / "x.csv"), "--config", str(cfg)] + TINY) == 2
    assert "error" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    assert main(["cdf", "--out", str(tmp_path / "no" / "x.csv"), "--schemes", "fpa"] + TINY) == 1
