import subprocess
import sys

import pytest

from covlab.cli import fmt, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(out):
    return [l for l in out.splitlines() if not l.startswith("#")]


def kv(out):
    return dict(l.split(" = ", 1) for l in body(out) if " = " in l)


def test_fmt_tokens():
    assert fmt(float("inf")) == "inf" and fmt(float("-inf")) == "-inf" and fmt(float("nan")) == "nan"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(3) == "3"


def test_header(capsys):
    code, out, _ = call(capsys, "survival", "--cantor", "--c", "0.5", "--t", "critical", "--x", "0",
                        "--k", "3", "--trials", "200", "--seed", "17")
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("# covlab ")
    assert lines[1] == "# argv: covlab survival --cantor --c 0.5 --t critical --x 0 --k 3 --trials 200 --seed 17"
    assert lines[2] == "# seed: 17"


def test_ball_measure_example(capsys):
    code, out, _ = call(capsys, "ball-measure", "--cantor", "--x", "0", "--r", "0.3333333333")
    mass = float(body(out)[1].split(",")[2])
    assert code == 0 and mass == pytest.approx(0.5, abs=1e-6)


def test_cantor_bounds_report(capsys):
    code, out, _ = call(capsys, "cantor-bounds", "--paper-vector", "--k-density", "3", "--k-zero", "5")
    d = kv(out)
    assert code == 0
    assert d["constant_lower"] == "1.06126"
    assert float(d["constant_lower"]) <= float(d["constant_upper"])


def test_cantor_bounds_csv(capsys):
    code, out, _ = call(capsys, "cantor-bounds", "--uniform", "1", "--k-density", "2", "--csv")
    rows = [l.split(",") for l in body(out)[1:]]
    assert code == 0 and rows[0] == ["key", "raw", "rounded"]
    lower = next(r for r in rows if r[0] == "constant_lower")
    assert lower[2] == format(float(lower[2]), ".5f") and float(lower[2]) <= float(lower[1])


def test_crux_demo(capsys):
    code, out, _ = call(capsys, "crux-check", "--preset", "demo")
    d = kv(out)
    assert code == 0 and d["holds"] == "true"
    assert float(d["lhs_i"]) >= float(d["rhs_i"]) and float(d["lhs_ii"]) >= float(d["rhs_ii"])


def test_crux_custom_instance(capsys):
    code, out, _ = call(capsys, "crux-check", "--atoms", "0,0.5,1", "--radii", "0.1,0.1", "--A", "0",
                        "--x", "0.5", "--y", "1")
    d = kv(out)
    assert code == 0 and d["defined_ii"] == "false" and d["lhs_ii"] == "nan"


def test_byte_identical_reruns(capsys, monkeypatch):
    argv = ["simulate", "--cantor", "--c", "0.5", "--t", "critical", "--k", "50", "--seed", "9"]
    _, a, _ = call(capsys, *argv)
    monkeypatch.setenv("COVLAB_THREADS", "4")
    _, b, _ = call(capsys, *argv)
    assert a == b


def test_thread_variable_validated(capsys, monkeypatch):
    monkeypatch.setenv("COVLAB_THREADS", "zero")
    code, _, err = call(capsys, "shepp", "--c", "0.5", "--t", "1", "--N", "100")
    assert code == 2 and "COVLAB_THREADS" in err


@pytest.mark.parametrize("argv, field", [
    (["ball-measure", "--cantor", "--x", "abc", "--r", "0.1"], "--x"),
    (["ball-measure", "--cantor", "--x", "0"], "--r"),
    (["simulate", "--lebesgue", "--k", "3"], "--radii"),
    (["survival", "--lebesgue", "--c", "1", "--x", "0"], "--t"),
    (["cantor-bounds", "--weights", "0.5,0.6"], "--weights"),
    (["crux-check", "--preset", "other"], "--preset"),
])
def test_config_errors_exit_2(capsys, argv, field):
    code, out, err = call(capsys, *argv)
    assert code == 2 and field in err and out == ""


def test_unknown_subcommand_exit_2(capsys):
    assert call(capsys, "frobnicate")[0] == 2


def test_budget_error_reported_verbatim(capsys):
    code, _, err = call(capsys, "cantor-bounds", "--paper-vector", "--k-density", "4")
    assert code == 1 and "BudgetExceeded" in err and "exceed the budget" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[measure]\nkind = atomic\npoints = 0, 1/2, 1\n\n[run]\nx = 0.5\nr = 0.1\n")
    code, out, _ = call(capsys, "ball-measure", "--config", str(cfg))
    assert code == 0 and float(body(out)[1].split(",")[2]) == pytest.approx(1 / 3)
    code, out, _ = call(capsys, "ball-measure", "--config", str(cfg), "--r", "0.6")
    assert float(body(out)[1].split(",")[2]) == 1.0


def test_config_typo_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[measure]\nkind = lebesgue\ntorsu = true\n")
    code, _, err = call(capsys, "ball-measure", "--config", str(cfg), "--x", "0.5", "--r", "0.1")
    assert code == 2 and "measure.torsu" in err


def test_out_file(tmp_path, capsys):
    path = tmp_path / "shepp.csv"
    code, out, _ = call(capsys, "shepp", "--c", "0.3", "--t", "1", "--N", "1000", "--out", str(path))
    text = path.read_text()
    assert code == 0 and out == ""
    assert text.startswith("# covlab ") and "classification = converging" in text


def test_shepp_inf_token(capsys):
    code, out, _ = call(capsys, "shepp", "--c", "1000", "--t", "0.0001", "--N", "100")
    assert code == 0 and body(out)[-1].endswith(",inf")


def test_energy_and_jk(capsys):
    code, out, _ = call(capsys, "energy", "--lebesgue", "--torus", "--c", "0.3", "--t", "1",
                        "--nu-cells", "16", "--N", "64")
    assert code == 0 and float(kv(out)["energy"]) > 1
    code, out, _ = call(capsys, "energy", "--cantor", "--c", "0.5", "--t", "critical", "--nu-cells", "4",
                        "--jk", "3")
    js = [float(l.split(",")[1]) for l in body(out)[1:]]
    assert code == 0 and len(js) == 3 and js == sorted(js)


def test_martingale_reports_seed(capsys):
    code, out, _ = call(capsys, "martingale", "--lebesgue", "--torus", "--c", "0.3", "--t", "1",
                        "--nu-atoms", "0.2,0.7", "--k", "4", "--trials", "500", "--seed", "5")
    assert code == 0 and "# seed: 5" in out and body(out)[1].endswith(",5")


def test_series_and_avg_density(capsys):
    code, out, _ = call(capsys, "series", "--cantor", "--c", "1", "--t", "critical", "--x", "0",
                        "--power", "2", "--N", "1000")
    assert code == 0 and kv(out)["classification"] == "converging"
    code, out, _ = call(capsys, "avg-density", "--word", "0000", "--t-min", "0.01")
    assert code == 0 and kv(out)["converged"] == "true"


def test_optimize_small(capsys):
    code, out, _ = call(capsys, "optimize", "--n", "1")
    d = kv(out)
    assert code == 0 and d["weights"] == "0.5;0.5"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "covlab", "--version"], capture_output=True, text=True)
    if proc.returncode != 0:
        proc = subprocess.run(["covlab", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("covlab ")
