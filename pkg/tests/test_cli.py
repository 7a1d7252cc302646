import json
import subprocess
import sys

import pytest

from dxplain.cli import NO_CXP_MESSAGE, main
from dxplain.models import save_instance, save_model

from helpers import and_problem, grid_problem


@pytest.fixture
def grid_files(tmp_path):
    problem = grid_problem()
    model = tmp_path / "grid_model.json"
    inst = tmp_path / "grid_inst.json"
    save_model(problem.model, problem.space, model)
    save_instance(problem.instance, inst)
    return str(model), str(inst)


@pytest.fixture
def and_files(tmp_path):
    problem = and_problem()
    model = tmp_path / "and_model.json"
    inst = tmp_path / "and_inst.json"
    save_model(problem.model, problem.space, model)
    save_instance(problem.instance, inst)
    return str(model), str(inst)


def grid_args(grid_files, *extra):
    model, inst = grid_files
    return ["--model", model, "--instance", inst,
            "--epsilon", "1.0", "--norm", "l1", *extra]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def records(out):
    return [json.loads(line) for line in out.splitlines()]


def test_cxp_record_shape(capsys, grid_files):
    code, out, err = run(capsys, ["cxp", *grid_args(grid_files)])
    assert code == 0
    (record,) = records(out)
    assert record == {"algo": "dicho", "calls": record["calls"],
                      "epsilon": 1.0, "features": [1], "kind": "cxp",
                      "norm": "l1", "verified": True}
    assert "elapsed" in err and "elapsed" not in out


@pytest.mark.parametrize("algo", ["linear", "dicho", "swift"])
def test_cxp_algorithms_agree(capsys, grid_files, algo):
    code, out, _ = run(capsys, ["cxp", *grid_args(grid_files),
                                "--algo", algo, "--workers", "3"])
    assert code == 0
    assert records(out)[0]["features"] == [1]


def test_stdout_is_byte_stable(capsys, grid_files):
    argv = ["cxp", *grid_args(grid_files), "--algo", "swift", "--workers", "4"]
    _, first, _ = run(capsys, argv)
    _, second, _ = run(capsys, argv)
    assert first.encode() == second.encode()


def test_axp_record(capsys, grid_files):
    code, out, _ = run(capsys, ["axp", *grid_args(grid_files)])
    assert code == 0
    (record,) = records(out)
    assert record["kind"] == "axp"
    assert record["features"] == [1]
    assert record["verified"] is True


def test_no_verify_drops_the_field(capsys, grid_files):
    code, out, _ = run(capsys, ["cxp", *grid_args(grid_files), "--no-verify"])
    assert code == 0
    assert "verified" not in records(out)[0]


def test_enumerate_streams_then_summarises(capsys, grid_files):
    code, out, _ = run(capsys, ["enumerate", *grid_args(grid_files)])
    assert code == 0
    stream = records(out)
    summary = stream.pop()
    assert stream == [{"kind": "cxp", "features": [1]},
                      {"kind": "axp", "features": [1]}]
    assert summary["kind"] == "summary"
    assert summary["axps"] == 1 and summary["cxps"] == 1
    assert summary["complete"] is True


def test_enumerate_limit_spellings(capsys, and_files):
    model, inst = and_files
    base = ["enumerate", "--model", model, "--instance", inst,
            "--epsilon", "1", "--norm", "l0"]
    code, out, _ = run(capsys, [*base, "--limit", "cxp:1"])
    assert code == 0
    stream = records(out)
    assert stream[0] == {"kind": "cxp", "features": [2]}
    assert stream[-1]["complete"] is False
    code, out, _ = run(capsys, [*base, "--limit", "1"])
    assert code == 0 and records(out)[-1]["complete"] is False
    code, out, _ = run(capsys, [*base, "--limit", "axp:1"])
    assert code == 0 and records(out)[-1]["axps"] == 1


def test_min_cxp_record(capsys, grid_files):
    code, out, _ = run(capsys, ["min-cxp", *grid_args(grid_files)])
    assert code == 0
    (record,) = records(out)
    assert record["features"] == [1]
    assert record["size"] == 1
    assert record["lower_bound"] == 1
    assert record["iterations"] == 2
    assert record["verified"] is True


def test_ffa_csv_bytes(capsys, and_files):
    model, inst = and_files
    code, out, _ = run(capsys, ["ffa", "--model", model, "--instance", inst,
                                "--epsilon", "1", "--norm", "l0"])
    assert code == 0
    assert out == "feature,score\n1,0.5\n2,0.5\n3,0.0\n4,0.0\n"


def test_ffa_pgm_heatmap(capsys, and_files, tmp_path):
    model, inst = and_files
    pgm = tmp_path / "heat.pgm"
    code, _, _ = run(capsys, ["ffa", "--model", model, "--instance", inst,
                              "--epsilon", "1", "--norm", "l0",
                              "--shape", "2x2", "--output", str(pgm)])
    assert code == 0
    assert pgm.read_text() == "P2\n2 2\n255\n128 128\n0 0\n"


def test_ffa_shape_validation(capsys, and_files, tmp_path):
    model, inst = and_files
    base = ["ffa", "--model", model, "--instance", inst,
            "--epsilon", "1", "--norm", "l0"]
    code, _, err = run(capsys, [*base, "--output", str(tmp_path / "x.pgm")])
    assert code == 1 and "--shape" in err
    code, _, err = run(capsys, [*base, "--shape", "3x3",
                                "--output", str(tmp_path / "x.pgm")])
    assert code == 1 and "does not cover" in err


def test_exit_2_when_ball_is_clean(capsys, grid_files):
    model, inst = grid_files
    for command in ("cxp", "min-cxp", "ffa"):
        code, out, _ = run(capsys, [command, "--model", model,
                                    "--instance", inst,
                                    "--epsilon", "0.25", "--norm", "l1"])
        assert code == 2
        assert out == NO_CXP_MESSAGE + "\n"


def test_usage_error_exits_1(capsys):
    code, _, err = run(capsys, ["cxp", "--epsilon", "1", "--norm", "l1"])
    assert code == 1
    assert "--model" in err


def test_missing_model_file_exits_1(capsys, grid_files):
    _, inst = grid_files
    code, _, err = run(capsys, ["cxp", "--model", "/no/such/file.json",
                                "--instance", inst,
                                "--epsilon", "1", "--norm", "l1"])
    assert code == 1
    assert "error" in err


def test_malformed_model_exits_1(capsys, tmp_path, grid_files):
    _, inst = grid_files
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "linear"}')
    code, _, err = run(capsys, ["cxp", "--model", str(bad), "--instance", inst,
                                "--epsilon", "1", "--norm", "l1"])
    assert code == 1
    assert "num_features" in err


def test_fractional_l0_epsilon_exits_1(capsys, grid_files):
    model, inst = grid_files
    code, _, err = run(capsys, ["cxp", "--model", model, "--instance", inst,
                                "--epsilon", "1.5", "--norm", "l0"])
    assert code == 1
    assert "error" in err


def test_order_from_file(capsys, grid_files, tmp_path):
    perm = tmp_path / "order.json"
    perm.write_text("[3, 1, 2]")
    code, out, _ = run(capsys, ["cxp", *grid_args(grid_files),
                                "--order", "file=%s" % perm])
    assert code == 0
    assert records(out)[0]["features"] == [1]


def test_unknown_order_exits_1(capsys, grid_files):
    code, _, err = run(capsys, ["cxp", *grid_args(grid_files),
                                "--order", "bogus"])
    assert code == 1
    assert "order" in err


def test_external_oracle_round_trip(capsys, grid_files):
    model, _ = grid_files
    spec = "external:%s -m dxplain.backend %s" % (sys.executable, model)
    code, out, _ = run(capsys, ["cxp", *grid_args(grid_files),
                                "--oracle", spec])
    assert code == 0
    assert records(out)[0]["features"] == [1]


def test_bench_record(capsys, grid_files):
    code, out, err = run(capsys, ["bench", *grid_args(grid_files),
                                  "--workers", "2", "--delay", "0.001"])
    assert code == 0
    (record,) = records(out)
    assert record["kind"] == "bench"
    assert record["identical"] is True
    assert record["dicho"]["features"] == [1]
    assert record["swift"]["features"] == [1]
    assert "speedup" in err


def test_module_entry_point(grid_files):
    model, inst = grid_files
    proc = subprocess.run(
        [sys.executable, "-m", "dxplain.cli", "cxp", "--model", model,
         "--instance", inst, "--epsilon", "0.25", "--norm", "l1"],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stdout == NO_CXP_MESSAGE + "\n"
