import json
import math

import pytest

from csa_lab import build_config, build_parser, main, parse_config_file


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def test_rates_random_walk_regime(capsys):
    code, out = run(["rates", "--lambda", "2", "--n", "20", "--c", "1"], capsys)
    payload = json.loads(out)
    assert code == 0
    assert payload["rate_no_cumulation"] == 0.0
    assert payload["rate_with_cumulation"] == 0.0
    assert payload["rel_std"] == "inf"
    assert payload["rate_is_zero"] is True


def test_rates_with_cumulation(capsys):
    code, out = run(["rates", "--lambda", "8", "--n", "20", "--c", "0.2236"], capsys)
    payload = json.loads(out)
    assert code == 0
    assert payload["rate_with_cumulation"] > 0.0
    assert math.isfinite(payload["rel_std"])
    for key in ("a", "k4", "k31", "k22", "k211", "k1111", "fourth_moment_limit", "second_moment_limit", "variance"):
        assert key in payload


def test_rates_csv(capsys):
    code, out = run(["rates", "--lambda", "8", "--n", "20", "--c", "1", "--format", "csv"], capsys)
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "key,value"
    assert "lambda,8" in lines


@pytest.mark.parametrize('argv', [
    ["rates", "--c", "0"],
    ["rates", "--lambda", "0"],
    ["simulate", "--runs", "0"],
    ["sweep", "--policy", "beta:1"],
    ["simulate", "--levels", "0.5,1.5"],
])
def test_invalid_parameters_exit_2(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2


def test_simulate_quantile_file(tmp_path, capsys):
    out = tmp_path / "quantiles.csv"
    code = main(["simulate", "--runs", "20", "--steps", "10", "--seed", "3", "--out", str(out)])
    lines = out.read_text().splitlines()
    assert code == 0
    assert lines[0] == "t,level,value"
    assert len(lines) == 1 + 11 * 9


def test_simulate_single_run_levels_coincide(capsys):
    code, out = run(["simulate", "--runs", "1", "--steps", "5", "--levels", "0.1,0.5,0.9"], capsys)
    rows = [line.split(",") for line in out.splitlines()[1:]]
    for t in range(6):
        values = {row[2] for row in rows if row[0] == str(t)}
        assert len(values) == 1


def test_simulate_independent_of_workers(capsys):
    argv = ["simulate", "--runs", "16", "--steps", "30", "--seed", "5"]
    _, single = run(argv + ["--workers", "1"], capsys)
    _, several = run(argv + ["--workers", "2"], capsys)
    assert single == several


def test_simulate_falls_back_to_streaming(capsys):
    argv = ["simulate", "--runs", "40", "--steps", "30", "--levels", "0.5"]
    code, out = run(argv + ["--memory-budget", "500"], capsys)
    assert code == 0
    assert len(out.splitlines()) == 1 + 31


def test_sweep_against_n(capsys):
    code, out = run(["sweep", "--policy", "constant:1", "--policy", "alpha:0.5", "--grid", "2", "1000", "10"], capsys)
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "policy,n,rel_std"
    assert {line.split(",")[0] for line in lines[1:]} == {"constant:1", "alpha:0.5"}


def test_sweep_against_c(capsys):
    code, out = run(["sweep", "--against", "c", "--format", "json"], capsys)
    rows = json.loads(out)
    assert code == 0
    assert {row["n"] for row in rows} == {2, 20, 200, 2000}


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "run.txt"
    config.write_text(
        "# test\n"
        "alg 3 5 0.5 1 11\n"
        "run 100 200 2\n"
        "lvl 0.1 0.9\n"
        "pol alpha 0.25\n"
        "mode full\n"
    )
    args = build_parser().parse_args(["simulate", "--config", str(config), "--n", "7"])
    run_config = build_config(args, environ={})
    assert (run_config.lam, run_config.n, run_config.c, run_config.seed) == (3, 7, 0.5, 11)
    assert (run_config.runs, run_config.steps, run_config.workers) == (100, 200, 2)
    assert run_config.levels == (0.1, 0.9)
    assert run_config.policies == ("alpha:0.25",)
    assert run_config.mode == "full"


def test_config_file_rejects_unknown_records(tmp_path):
    config = tmp_path / "bad.txt"
    config.write_text("cam 1 2 3\n")
    with pytest.raises(ValueError):
        parse_config_file(str(config))


def test_defaults_and_seed_from_environment():
    args = build_parser().parse_args(["simulate"])
    run_config = build_config(args, environ={"CSA_LAB_SEED": "42"})
    assert run_config.seed == 42
    assert (run_config.lam, run_config.n, run_config.runs, run_config.steps) == (8, 20, 5001, 5000)
    assert run_config.cumulation == pytest.approx(1.0 / math.sqrt(20.0))
    assert run_config.output_format == "csv"


def test_seed_flag_beats_environment():
    args = build_parser().parse_args(["rates", "--seed", "1"])
    run_config = build_config(args, environ={"CSA_LAB_SEED": "42"})
    assert run_config.seed == 1
    assert run_config.output_format == "json"


@pytest.mark.slow
def test_validate_fails_with_perturbed_damping(tmp_path):
    report = tmp_path / "report.txt"
    code = main(["validate", "--quick", "--perturb-dsigma", "1.5", "--out", str(report)])
    assert code == 1
    assert "FAIL" in report.read_text()


@pytest.mark.slow
def test_validate_passes_unperturbed(tmp_path):
    report = tmp_path / "report.txt"
    code = main(["validate", "--quick", "--out", str(report)])
    text = report.read_text()
    assert code == 0, text
    assert "FAIL" not in text
