import csv
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from multipeak import cli, pipeline
from multipeak.config import ConfigError, RunConfig, emit, parse


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "run.cfg"
        path.write_text(config)
        argv += ["--config", str(path)]
    return cli.main(argv)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_round_trip():
    cfg = RunConfig()
    assert parse(emit(cfg)) == cfg


@settings(max_examples=60, deadline=None)
@given(st.floats(1.1, 5.0), st.floats(1e-12, 1.0), st.integers(6, 40), st.booleans(),
       st.sampled_from(["explicit", "auto"]), st.floats(0.0, 1e12))
def test_round_trip_property(p, tol, k, cont, mode, lam):
    cfg = RunConfig(p=p, newton_tol=tol, k=k, continuation=cont, triplets=mode, Lambda=lam)
    assert parse(emit(cfg)) == cfg
    assert emit(parse(emit(cfg))) == emit(cfg)


def test_comments_and_blank_lines():
    cfg = parse("# run\n\nk = 10   # decagon\nLambda = 1e8\n")
    assert cfg.k == 10 and cfg.Lambda == 1e8


@pytest.mark.parametrize("text", ["bogus = 1", "k 8", "h = -1", "k = eight",
                                  "balance = other", "continuation = maybe"])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse(text)


def test_help_lists_every_stage(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for stage in ("triplets", "construct", "verify", "refine", "all"):
        assert stage in out
    assert "exit codes" in out


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "multipeak.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "construct" in res.stdout


def test_unknown_key_exit_code(tmp_path):
    assert run(tmp_path, "triplets", config="colour = blue\n") == pipeline.EXIT_CONFIG


def test_bad_flag_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["triplets", "--nope"])
    assert exc.value.code == pipeline.EXIT_CONFIG


def test_triplets_default(tmp_path):
    assert run(tmp_path, "triplets") == 0
    rows = read_csv(tmp_path / "out" / "triplets.csv")
    first = rows[0]
    assert (first["m"], first["n"], first["k"], first["admissible"]) == ("5", "3", "8", "true")
    assert all(r["admissible"] == "true" for r in rows)


def test_bose_einstein_exit_code(tmp_path, capsys):
    code = run(tmp_path, "triplets", config="a1 = 1\na2 = 2\nb1 = 2\nb2 = 1\n")
    assert code == pipeline.EXIT_HYPOTHESIS
    assert "(ab)" in capsys.readouterr().err


def test_small_polygon_exit_code(tmp_path):
    assert run(tmp_path, "triplets", config="k = 5\n") == pipeline.EXIT_WINDOW


def test_inadmissible_triplet_exit_code(tmp_path):
    assert run(tmp_path, "construct", config="m = 4\nn = 2\n") == pipeline.EXIT_WINDOW


def test_weak_coupling_exit_code(tmp_path):
    assert run(tmp_path, "construct", config="Lambda = 10\n") == pipeline.EXIT_SCALES


def test_construct_outputs_and_determinism(tmp_path):
    cfg = "Lambda = 1e8\n"
    assert run(tmp_path, "construct", config=cfg) == 0
    out = tmp_path / "out"
    scales = {r["name"]: float(r["value"]) for r in read_csv(out / "scales.csv")}
    assert all(abs(v) < 1e-10 for name, v in scales.items() if name.startswith("residual"))
    peaks = read_csv(out / "peaks.csv")
    assert len(peaks) == 88
    assert list(peaks[0]) == ["component", "i", "j", "x1", "x2"]
    first = {name: (out / name).read_bytes() for name in
             ("profile.csv", "constants.csv", "scales.csv", "peaks.csv")}
    assert run(tmp_path, "construct", config=cfg) == 0
    for name, data in first.items():
        assert (out / name).read_bytes() == data


def test_refine_on_coarse_grid(tmp_path):
    assert run(tmp_path, "refine", config="h = 1.0\n") == 0
    report = {r["key"]: r["value"] for r in read_csv(tmp_path / "out" / "solve_report.csv")}
    assert float(report["residual_sup"]) < 1e-8
    assert report["linear_solver"] == "direct"
    header = (tmp_path / "out" / "fields.csv").open().readline().strip()
    assert header == "x1,x2,u1,u2,E1,E2"


def test_refine_iteration_cap_exit_code(tmp_path):
    assert run(tmp_path, "refine", config="h = 1.0\nmax_iter = 1\n") == pipeline.EXIT_REFINE


def test_config_stage_prints_effective_values(tmp_path, capsys):
    assert run(tmp_path, "config", config="k = 12\n") == 0
    assert parse(capsys.readouterr().out) == RunConfig(k=12)
