import json

import pytest
from click.testing import CliRunner

from prodspec.cli import ExperimentConfig, main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, list(args))


# ---------------------------------------------------------------------------
# basic commands and exit codes

def test_count_command(runner):
    r = invoke(runner, "count", "--spec", "T2", "--lambda-max", "10")
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["count"] == 317
    assert payload["spec"] == "T2"


def test_parse_errors_exit_2(runner):
    r = invoke(runner, "count", "--spec", "Q9", "--lambda-max", "10")
    assert r.exit_code == 2
    assert "offset 0" in r.stderr
    r = invoke(runner, "count", "--spec", "T2", "--lambda-max", "banana")
    assert r.exit_code == 2
    r = invoke(runner, "spectrum", "--spec", "T2", "--convention", "weird", "--lambda-max", "3")
    assert r.exit_code == 2


def test_spectrum_with_csv_and_cache(runner, tmp_path):
    out = tmp_path / "lines.csv"
    cache = tmp_path / "cache"
    args = (
        "spectrum", "--spec", "T1", "--lambda-max", "3",
        "--out", str(out), "--cache", str(cache),
    )
    r1 = invoke(runner, *args)
    assert r1.exit_code == 0
    assert json.loads(r1.stdout)["lines"] == 4
    assert out.read_text() == "q4,mult\n0,1\n4,2\n16,2\n36,2\n"
    assert len(list(cache.iterdir())) == 1
    # warm cache run must produce identical bytes
    r2 = invoke(runner, *args)
    assert r2.stdout == r1.stdout
    assert out.read_text() == "q4,mult\n0,1\n4,2\n16,2\n36,2\n"


def test_window_single_and_swept(runner, tmp_path):
    r = invoke(runner, "window", "--spec", "T2", "--sqrt-center", "10")
    assert r.exit_code == 0
    assert json.loads(r.stdout)["count"] == 12

    r = invoke(runner, "window", "--spec", "T2", "--center", "3", "--width", "1/2")
    assert json.loads(r.stdout)["q4_bounds"] == ["25", "49"]

    r = invoke(runner, "window", "--spec", "T2")
    assert r.exit_code == 2

    out = tmp_path / "sweep.csv"
    r = invoke(runner, "window", "--spec", "T2", "--m-range", "10:40", "--out", str(out))
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["m_range"] == [10, 40]
    assert payload["total"] > 0
    assert len(out.read_text().strip().split("\n")) == 32


def test_gaps_command(runner):
    r = invoke(runner, "gaps", "--spec", "T2", "--lambda-min", "2", "--lambda-max", "12")
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["lines"] == 56
    assert payload["min_normalized_gap"] == pytest.approx(0.47213595, abs=1e-6)


def test_lattice_verify(runner, tmp_path):
    out = tmp_path / "r2.csv"
    r = invoke(runner, "lattice", "--n", "2", "--m-max", "500", "--verify", "--out", str(out))
    assert r.exit_code == 0
    assert json.loads(r.stdout)["mismatches"] == 0
    assert len(out.read_text().strip().split("\n")) == 502


def test_weyl_fit_verdicts(runner):
    ok = invoke(runner, "weyl-fit", "--spec", "T1", "--grid", "20:400:25")
    assert ok.exit_code == 0
    assert json.loads(ok.stdout)["verdict"] is True

    bad = invoke(
        runner, "weyl-fit", "--spec", "T2", "--grid", "20:400:25", "--schedule", "pow:1"
    )
    assert bad.exit_code == 1
    assert json.loads(bad.stdout)["verdict"] is False


def test_beta_check(runner):
    r = invoke(runner, "beta-check", "--dmax", "8")
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["verdict"] is True
    assert payload["worst_residual"] < 1e-12


def test_exponent_command(runner):
    r = invoke(runner, "exponent", "--q", "6", "--d", "2")
    payload = json.loads(r.stdout)
    assert payload["alpha"][0] == "1/6"
    assert payload["q_crit"][0] == "6"

    r = invoke(runner, "exponent", "--q", "inf", "--d", "5")
    payload = json.loads(r.stdout)
    assert payload["alpha"] == ["2", 2.0]
    assert payload["branch"] == "upper"

    r = invoke(runner, "exponent", "--q", "2", "--d", "7")
    assert json.loads(r.stdout)["branch"] == "lower"


def test_multiplier_decay_command(runner):
    r = invoke(runner, "multiplier-decay", "--grid", "10:1000:60")
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["verdict"] is True
    assert payload["slope"] == pytest.approx(-2.0, abs=0.15)

    r = invoke(runner, "multiplier-decay", "--grid", "10:20000:30")
    assert r.exit_code == 2


def test_norms_fit_target(runner):
    args = ("norms-fit", "--family", "zonal", "--q", "inf", "--k-range", "10:400:10")
    ok = invoke(runner, *args, "--target", "0.5")
    assert ok.exit_code == 0
    assert json.loads(ok.stdout)["verdict"] is True

    bad = invoke(runner, *args, "--target", "0.9")
    assert bad.exit_code == 1

    r = invoke(runner, "norms-fit", "--family", "tensor", "--q", "inf",
               "--k-range", "10:400:10")
    assert r.exit_code == 2


def test_norms_sweep_csv(runner, tmp_path):
    out = tmp_path / "norms.csv"
    r = invoke(runner, "norms", "--family", "highest", "--q", "4",
               "--k-range", "5:200:8", "--out", str(out))
    assert r.exit_code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "k,lambda,norm"
    assert len(lines) == json.loads(r.stdout)["k_count"] + 1


# ---------------------------------------------------------------------------
# annulus commands

def test_annulus_stats_and_csv(runner, tmp_path):
    out = tmp_path / "annulus.csv"
    r = invoke(runner, "annulus", "--spec-x", "T1", "--spec-y", "T1",
               "--lam", "10", "--eps", "1/2", "--out", str(out))
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["total_mult"] == sum(payload["mult_sums"].values())
    n_rows = len(out.read_text().strip().split("\n")) - 1
    assert n_rows == sum(payload["points"].values())


def test_annulus_verify_command(runner):
    r = invoke(runner, "annulus-verify", "--spec-x", "T1", "--spec-y", "T1",
               "--seeds", "5", "--lambda-lo", "20", "--lambda-hi", "100",
               "--schedule", "pow:1", "--schedule", "unit")
    assert r.exit_code == 0
    payload = json.loads(r.stdout)
    assert payload["partition_ok"] is True
    assert payload["worst_constant"] <= 8.0
    assert payload["schedules"] == ["pow:1", "unit"]


# ---------------------------------------------------------------------------
# determinism across thread counts

def test_thread_count_does_not_change_output(runner, tmp_path):
    outs = {}
    for threads in ("1", "4"):
        out = tmp_path / f"sweep{threads}.csv"
        r = invoke(runner, "window", "--spec", "T2", "--m-range", "10:60",
                   "--threads", threads, "--out", str(out))
        assert r.exit_code == 0
        outs[threads] = (r.stdout, out.read_bytes())
    assert outs["1"] == outs["4"]


def test_annulus_threads_identical(runner, tmp_path):
    outs = {}
    for threads in ("1", "4"):
        out = tmp_path / f"ann{threads}.csv"
        r = invoke(runner, "annulus", "--spec-x", "T1", "--spec-y", "T2",
                   "--lam", "40", "--eps", "1/4", "--threads", threads,
                   "--out", str(out))
        assert r.exit_code == 0
        outs[threads] = (r.stdout, out.read_bytes())
    assert outs["1"] == outs["4"]


# ---------------------------------------------------------------------------
# config-driven runs

def test_config_roundtrip():
    cfg = ExperimentConfig.from_json('{"operation": "count", "spec": "T2", "lambda_max": "10"}')
    assert cfg.operation == "count"
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown config fields"):
        ExperimentConfig.from_json('{"operation": "count", "bogus": 1}')
    with pytest.raises(ValueError):
        ExperimentConfig.from_json('[1, 2]')


def test_run_matches_direct_invocation(runner, tmp_path):
    cfg = tmp_path / "job.json"
    cfg.write_text('{"operation": "count", "spec": "T2", "lambda_max": "10"}')
    via_run = invoke(runner, "run", str(cfg))
    direct = invoke(runner, "count", "--spec", "T2", "--lambda-max", "10")
    assert via_run.exit_code == 0
    assert via_run.stdout == direct.stdout


def test_run_bad_configs_exit_2(runner, tmp_path):
    unknown_field = tmp_path / "a.json"
    unknown_field.write_text('{"operation": "count", "bogus": 1}')
    assert invoke(runner, "run", str(unknown_field)).exit_code == 2

    unknown_op = tmp_path / "b.json"
    unknown_op.write_text('{"operation": "frobnicate"}')
    assert invoke(runner, "run", str(unknown_op)).exit_code == 2

    missing_opt = tmp_path / "c.json"
    missing_opt.write_text('{"operation": "count", "spec": "T2"}')
    assert invoke(runner, "run", str(missing_opt)).exit_code == 2

    assert invoke(runner, "run", str(tmp_path / "nope.json")).exit_code == 2


def test_run_propagates_verdict_exit(runner, tmp_path):
    cfg = tmp_path / "fit.json"
    cfg.write_text(
        '{"operation": "weyl-fit", "spec": "T2", "grid": "20:400:25", "schedule": "pow:1"}'
    )
    r = invoke(runner, "run", str(cfg))
    assert r.exit_code == 1
