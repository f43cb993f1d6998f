import json
import subprocess
import sys

import pytest

from toricding.cli import EXIT_ERROR, EXIT_OK, EXIT_UNSTABLE, main

from conftest import DATA


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_stable(capsys):
    code, out, _ = run(["analyze", DATA / "p2.poly"], capsys)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["alpha"] == "0" and data["class"] == "UNIFORM_STABLE"


def test_analyze_needs_raw_for_non_reflexive(capsys):
    code, _, err = run(["analyze", DATA / "interval_m1_2.poly"], capsys)
    assert code == EXIT_ERROR and "--raw" in err
    code, out, _ = run(["analyze", "--raw", DATA / "interval_m1_2.poly"], capsys)
    assert code == EXIT_OK and json.loads(out)["alpha"] == "1"


def test_analyze_unstable_raw_is_advisory(capsys):
    code, out, _ = run(["analyze", "--raw", DATA / "interval_m1_3.poly"], capsys)
    assert code == EXIT_OK and json.loads(out)["class"] == "UNSTABLE"


def test_missing_file_and_usage_errors(capsys):
    assert run(["analyze", DATA / "nope.poly"], capsys)[0] == EXIT_ERROR
    assert run(["analyze"], capsys)[0] == EXIT_ERROR
    assert run(["frobnicate"], capsys)[0] == EXIT_ERROR


def test_survey_bundled_with_figure(tmp_path, capsys):
    code, out, _ = run(["survey", "--bundled", "--figures", tmp_path], capsys)
    assert code == EXIT_OK
    assert len(out.splitlines()) == 6
    assert (tmp_path / "survey_alpha.png").stat().st_size > 0


def test_survey_diagnostics_exit_one(tmp_path, capsys):
    out_file = tmp_path / "r.json"
    code, _, err = run(["survey", DATA / "mixed_db.txt", "--format", "json", "--out", out_file], capsys)
    assert code == EXIT_ERROR and "diagnostic" in err
    assert len(json.loads(out_file.read_text())["rows"]) == 2


def test_survey_unstable_exit_two(tmp_path, capsys, monkeypatch):
    import toricding.cli as cli
    from toricding import from_vertices

    db = [from_vertices([(-1,), (1,)], name="ok")]
    monkeypatch.setattr(cli, "load_database", lambda path: (db, []))

    class Summary:
        total, counts, boundary_ids, has_unstable = 1, {"UNSTABLE": 1}, [], True

    real = cli.run_survey
    monkeypatch.setattr(cli, "run_survey", lambda d, jobs: (real(d, 1)[0], Summary()))
    code, _, _ = run(["survey", tmp_path], capsys)
    assert code == EXIT_UNSTABLE


def test_survey_jobs_flag_deterministic(capsys):
    a = run(["survey", "--bundled", "--jobs", "1"], capsys)[1]
    b = run(["survey", "--bundled", "--jobs", "3"], capsys)[1]
    assert a == b


def test_eval_zero_potential(capsys):
    code, out, _ = run(["eval", DATA / "p1.poly", "--potential", "zero", "--h", "0.25"], capsys)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["nonlinear"] == pytest.approx(-0.6931471805599453, abs=1e-10)
    assert data["I"] == 0 and data["J"] == 0


def test_eval_potential_files(tmp_path, capsys):
    pieces = tmp_path / "pl.json"
    pieces.write_text(json.dumps({"pieces": [[0, [0]], [0, [1]]]}))
    code, out, _ = run(["eval", DATA / "p1.poly", "--potential", pieces, "--h", "0.25"], capsys)
    assert code == EXIT_OK and json.loads(out)["J"] == pytest.approx(0.25)
    values = tmp_path / "v.json"
    values.write_text(json.dumps({"values": [1, 0, 0]}))
    code, _, err = run(["eval", DATA / "p1.poly", "--potential", values, "--h", "0.25"], capsys)
    assert code == EXIT_ERROR and "9 nodes" in err


@pytest.mark.parametrize("bad", ["0", "0.3", "-1"])
def test_eval_rejects_bad_spacing(bad, capsys):
    assert run(["eval", DATA / "p1.poly", "--h", bad], capsys)[0] == EXIT_ERROR


def test_eval_config_file(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"polytope = {DATA / 'p1.poly'}\nh = 0.125\n")
    code, out, _ = run(["eval", "--config", cfg, "--potential", "zero"], capsys)
    assert code == EXIT_OK and json.loads(out)["h"] == 0.125
    assert run(["eval", "--config", tmp_path / "none.cfg"], capsys)[0] == EXIT_ERROR
    assert run(["eval"], capsys)[0] == EXIT_ERROR


def test_tolerance_override(capsys):
    assert run(["eval", DATA / "p1.poly", "--h", "0.25", "--tol", "bogus=1"], capsys)[0] == EXIT_ERROR
    assert run(["eval", DATA / "p1.poly", "--h", "0.25", "--tol", "tail_decay=25"], capsys)[0] == EXIT_OK


def test_probe_spike_on_unstable_interval(tmp_path, capsys):
    code, out, err = run(
        ["probe", "--raw", DATA / "interval_m1_3.poly", "--family", "spike", "--vertex", "1", "--h", "0.0625",
         "--growth", 1, 2, 3, 4, 6, 8, 12, 16, "--eps", 1, 0.0625, "--figures", tmp_path],
        capsys,
    )
    assert code == EXIT_OK
    data = json.loads(out)
    assert [e["verdict"] for e in data["eps"]] == ["FINITE", "DIVERGING"]
    assert "evidence only" in data["note"]
    assert (tmp_path / "probe.png").exists()


def test_probe_argument_errors(capsys):
    base = ["probe", DATA / "p1.poly", "--h", "0.125"]
    assert run(base + ["--family", "spike", "--vertex", "5"], capsys)[0] == EXIT_ERROR
    assert run(base + ["--eps", "2"], capsys)[0] == EXIT_ERROR
    assert run(base + ["--growth", "1", "2"], capsys)[0] == EXIT_ERROR


def test_minimize_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run(["minimize", DATA / "p1.poly", "--h", "0.1", "--out", out, "--figures", out], capsys)
    assert code == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["converged"] and result["trace"][-1] < result["trace"][0]
    assert (out / "minimizer.csv").read_text().startswith("x1,u\n")
    assert (out / "trace.dat").read_text().startswith("# step D\n")
    assert (out / "trace.png").exists() and (out / "minimizer.png").exists()


def test_minimize_flags_unstable(tmp_path, capsys):
    code, stdout, err = run(["minimize", "--raw", DATA / "interval_m1_3.poly", "--h", "0.25", "--steps", "3", "--out", tmp_path], capsys)
    assert code == EXIT_OK and "flag: alpha = 3/2" in err
    assert json.loads(stdout)["converged"] is False


def test_gen_bundled_check(capsys):
    assert run(["gen-bundled", "--check"], capsys)[0] == EXIT_OK


def test_console_script_version():
    proc = subprocess.run([sys.executable, "-m", "toricding.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
