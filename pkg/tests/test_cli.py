import csv
import io
import json

import pytest

from collapse_lab.cli import EXIT_CONFIG, EXIT_OK, main


def _scenario(tmp_path, **overrides):
    doc = {
        "name": "gram ball",
        "geometry": {"kind": "ball", "mass": "1 g", "radius": "0.5 cm"},
        "resolution": {"sigma": "1e-7 m"},
        "displacements": ["1e-14 m"],
    }
    doc.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_rate_reports_ball_row(tmp_path, capsys):
    assert main(["--config", _scenario(tmp_path), "rate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# scenario=gram ball")
    (row,) = _rows(out)
    assert row["model"] == "dp"
    assert row["method"] == "ClosedForm"
    G = 6.6743e-11
    assert float(row["l2_j"]) == pytest.approx(G * 1e-6 * 1e-28 / 5e-3**3, rel=1e-3)
    assert float(row["rate_hz"]) > 0
    assert row["regime_valid"] == "true"
    assert row["heuristic"] == "false"


def test_rate_nuclear_first_order_is_heuristic(tmp_path, capsys):
    matter = {"rho": "1000 kg/m3", "a": "1e-10 m", "sigmaNuc": "1e-14 m"}
    path = _scenario(tmp_path, model="both", matter=matter, displacements=["1e-16 m"])
    assert main(["--config", path, "rate"]) == EXIT_OK
    dp, csl = _rows(capsys.readouterr().out)
    assert float(dp["first_order_rate_hz"]) > 0
    assert dp["regime_valid"] == "true"
    assert dp["heuristic"] == "true"
    assert csl["heuristic"] == "false"


def test_rate_zero_displacement_never_collapses(tmp_path, capsys):
    assert main(["--config", _scenario(tmp_path, model="both"), "rate", "--dx", "0 m"]) == EXIT_OK
    for row in _rows(capsys.readouterr().out):
        assert row["tau_s"] == "inf"
        assert row["l2_j"] == "0.0000000000000000e+00"
        assert row["rate_hz"] == "0.0000000000000000e+00"


def test_rate_both_models(tmp_path, capsys):
    assert main(["--config", _scenario(tmp_path, model="both"), "rate"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert [r["model"] for r in rows] == ["dp", "csl"]
    assert rows[1]["first_order_rate_hz"] == ""


def test_rate_writes_to_out_file(tmp_path, capsys):
    out = tmp_path / "rate.csv"
    assert main(["--config", _scenario(tmp_path), "--out", str(out), "rate"]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert len(_rows(out.read_text(encoding="utf-8"))) == 1


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["rate"],
        ["--config", "/nonexistent/scenario.json", "rate"],
        ["verify", "--suite", "nope"],
        ["sweep", "--param", "mass", "--range", "1", "2"],
    ],
)
def test_configuration_errors_exit_one(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_bad_scenario_exits_one(tmp_path, capsys):
    path = _scenario(tmp_path, resolution={"sigma": "3 kg"})
    assert main(["--config", path, "rate"]) == EXIT_CONFIG
    assert "Error:" in capsys.readouterr().err


def test_sweep_dx(tmp_path, capsys):
    argv = ["--config", _scenario(tmp_path), "sweep", "--param", "dx", "--range", "5e-7 m", "5e-5 m", "--points", "3"]
    assert main(argv) == EXIT_OK
    captured = capsys.readouterr()
    rows = _rows(captured.out)
    assert [float(r["dx_m"]) for r in rows] == pytest.approx([5e-7, 5e-6, 5e-5])
    rates = [float(r["rate_hz"]) for r in rows]
    assert rates[1] / rates[0] == pytest.approx(100.0, rel=1e-2)
    assert "# seed=" in captured.err


def test_sweep_rejects_inverted_range(tmp_path, capsys):
    argv = ["--config", _scenario(tmp_path), "sweep", "--param", "dx", "--range", "2", "1"]
    assert main(argv) == EXIT_CONFIG


def test_sweep_sigma(tmp_path, capsys):
    argv = ["--config", _scenario(tmp_path), "sweep", "--param", "sigma", "--range", "1e-8", "1e-6", "--points", "2"]
    assert main(argv) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert [float(r["sigma_m"]) for r in rows] == pytest.approx([1e-8, 1e-6])


def test_sweep_spread_width_on_lattice(tmp_path, capsys):
    path = _scenario(
        tmp_path,
        constants={"G": 1.0, "hbar": 1.0},
        geometry={"kind": "lattice", "a": 1.0, "dims": [2, 1, 1], "nucleusMass": 1.0, "sigmaNuc": 0.1},
        resolution={"sigma": 0.01},
        displacements=[0.01],
        mc={"samples": 200},
    )
    argv = ["--seed", "7", "--config", path, "sweep", "--param", "spreadWidth", "--range", "0", "0.03"]
    argv += ["--scale", "linear", "--points", "2"]
    assert main(argv) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 2
    assert all(r["valid"] == "true" for r in rows)


def test_spread_width_sweep_needs_lattice(tmp_path, capsys):
    argv = ["--config", _scenario(tmp_path), "sweep", "--param", "spreadWidth", "--range", "0", "1", "--scale", "linear"]
    assert main(argv) == EXIT_CONFIG


def test_compare_with_environment(tmp_path, capsys):
    argv = ["--config", _scenario(tmp_path), "compare", "--env-rate", "1e9 /s"]
    assert main(argv) == EXIT_OK
    (row,) = _rows(capsys.readouterr().out)
    assert row["dp_method"] == "ClosedForm"
    assert row["verdict"] == "masked"
    assert float(row["max_com_shift_m"]) == pytest.approx(5e-15)


def test_compare_without_environment(tmp_path, capsys):
    assert main(["--config", _scenario(tmp_path), "compare"]) == EXIT_OK
    (row,) = _rows(capsys.readouterr().out)
    assert "verdict" not in row
    assert float(row["csl_l2_j"]) > 0


def test_verify_magnitude_suite(capsys):
    assert main(["verify", "--suite", "paperNumbers"]) == EXIT_OK
    lines = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert lines
    assert all(line["status"] == "pass" for line in lines)


def test_demo_conservation_is_seeded(capsys):
    argv = ["--seed", "11", "demo-conservation", "--separation", "2 m", "--trials", "5"]
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    rows = _rows(first)
    assert len(rows) == 5
    assert all(float(r["shift_m"]) == pytest.approx(1.0) for r in rows)


def test_demo_conservation_rejects_zero_trials(capsys):
    assert main(["demo-conservation", "--trials", "0"]) == EXIT_CONFIG
