import numpy as np
import pytest

from n2dsolve.cli import RunConfig, load_config, main, run_verify

BASIC = """
[problem]
a = const
b = const
v = cosh_x
kappa = 1.0

[discretization]
levels = 1
n_gauss = 10

[sweep]
n_gauss_values = 4 5
level_values = 1 2
fd_grids = 32 64
"""


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(BASIC)
    return str(p)


def run(args):
    return main(args)


def test_missing_config_file_is_config_error(tmp_path):
    assert run(["solve", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2


def test_unknown_preset_is_config_error(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[problem]\nv = warp\n")
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_unknown_key_is_config_error(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[problem]\nwhatsthis = 1\n")
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_out_of_range_levels_is_config_error(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[discretization]\nlevels = 9\n")
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_degenerate_b_rejected_before_build(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[problem]\nb = zero\n")
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_solve_writes_expected_files(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["solve", "--config", config_path, "--out", str(out)]) == 0
    assert (out / "solution.csv").exists()
    assert (out / "solution.png").exists()
    assert (out / "summary.txt").exists()
    lines = (out / "solution.csv").read_text().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[1] == "edge_id,orientation,node_x,node_y,u,v"
    assert "max_edge_error" in (out / "summary.txt").read_text()


def test_solution_csv_is_deterministic(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(["solve", "--config", config_path, "--out", str(out1)]) == 0
    assert run(["solve", "--config", config_path, "--out", str(out2)]) == 0
    body1 = (out1 / "solution.csv").read_text().splitlines()[1:]
    body2 = (out2 / "solution.csv").read_text().splitlines()[1:]
    assert body1 == body2


def test_converge_command(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["converge", "--config", config_path, "--out", str(out)]) == 0
    lines = (out / "converge.csv").read_text().splitlines()
    assert lines[1] == "n_gauss,max_error"
    assert len(lines) == 4  # comment + header + two sweep rows
    errs = [float(line.split(",")[1]) for line in lines[2:]]
    assert errs[1] < errs[0]
    assert (out / "converge.png").exists()


def test_converge_requires_analytic_preset(tmp_path, config_path):
    p = tmp_path / "var.ini"
    p.write_text("[problem]\na = bump\nb = osc\n[discretization]\nlevels = 1\nn_gauss = 4\n")
    assert run(["converge", "--config", str(p), "--out", str(tmp_path / "o")]) == 1


def test_scaling_command(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["scaling", "--config", config_path, "--out", str(out)]) == 0
    lines = (out / "scaling.csv").read_text().splitlines()
    assert lines[1] == "L,N_nodes,N_edge,flops_build,flops_solve"
    rows = [line.split(",") for line in lines[2:]]
    for row in rows:
        L, n_edge = int(row[0]), int(row[2])
        n = 2**L
        assert n_edge == 2 * n * (n - 1) + 4 * n
    flops_lines = (out / "flops.csv").read_text().splitlines()
    assert flops_lines[1] == "L,N_nodes,flops_leaf,flops_merge,flops_total"
    assert (out / "scaling.png").exists()


def test_rankprobe_command(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["rankprobe", "--config", config_path, "--out", str(out)]) == 0
    lines = (out / "rank.csv").read_text().splitlines()
    assert lines[1] == "level,block,dim,rank@1e-6,rank@1e-8,rank@1e-10"
    assert len(lines) == 2 + 12  # twelve off-diagonal side pairs
    for line in lines[2:]:
        parts = line.split(",")
        r6, r8, r10 = int(parts[3]), int(parts[4]), int(parts[5])
        assert r6 <= r8 <= r10


def test_verify_command_passes(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["verify", "--config", config_path, "--out", str(out)]) == 0
    lines = (out / "verify_report.csv").read_text().splitlines()
    assert lines[1] == "check,detail,value,threshold,status"
    assert all("fail" not in line for line in lines[2:])
    assert (out / "verify.png").exists()


def test_verify_detects_corrupted_leaf():
    cfg = RunConfig(levels=1, n_gauss=5, fd_grids=(32, 64))
    rows, ok = run_verify(cfg, corrupt_box_id=2)
    assert not ok
    failed = {r[0] for r in rows if r[4] == "fail"}
    assert "cross_path" in failed


def test_seed_flag_accepted(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["solve", "--config", config_path, "--out", str(out), "--seed", "7"]) == 0


def test_threads_flag(config_path, tmp_path):
    out = tmp_path / "out"
    assert run(["solve", "--config", config_path, "--out", str(out), "--threads", "2"]) == 0


def test_load_config_defaults():
    cfg = load_config(None)
    assert cfg.levels == 2
    assert cfg.n_gauss == 10
    cfg.validate()
