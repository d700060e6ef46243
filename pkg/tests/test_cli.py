import json
from pathlib import Path

import numpy as np
import pytest

from degentrace.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, run
from degentrace.config import (
    ConfigError,
    load_experiment,
    load_model,
    model_from_dict,
    parse_phi,
    parse_range,
    parse_term,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_usage_errors_exit_64(capsys):
    assert run([]) == EXIT_USAGE
    assert run(["bogus"]) == EXIT_USAGE
    assert run(["check"]) == EXIT_USAGE
    assert run(["--help"]) == EXIT_OK


def test_rejected_model_exits_2(tmp_path, capsys):
    code = run(["check", "--model", str(CONFIGS / "k2.cfg"), "--out", str(tmp_path)])
    assert code == EXIT_VALIDATION
    assert "k>2" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert run(["check", "--model", str(tmp_path / "nope.cfg")]) == EXIT_VALIDATION


def test_check_writes_report(tmp_path):
    assert run(["check", "--model", str(CONFIGS / "k3.cfg"), "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["h2_ok"] and report["h4_ok"]


@pytest.mark.parametrize("argv", [
    ["lvol", "--model", "k3.cfg"],
    ["coeff", "--model", "k3.cfg"],
    ["osc", "--n", "2", "--k", "4"],
    ["mellin"],
    ["spectrum", "--model", "k3.cfg", "--h", "1e-3"],
    ["trace", "--config", "flagship.cfg"],
    ["germ", "--model", "k4.cfg"],
])
def test_dry_runs_write_nothing(tmp_path, argv):
    argv = [str(CONFIGS / a) if a.endswith(".cfg") else a for a in argv]
    assert run(argv + ["--dry-run", "--out", str(tmp_path / "o")]) == EXIT_OK
    assert not (tmp_path / "o").exists()


def test_dry_run_still_validates(tmp_path):
    args = ["--dry-run", "--out", str(tmp_path)]
    assert run(["spectrum", "--model", str(CONFIGS / "k3.cfg"), "--h", "1e-3", "--eps", "0.5"] + args) == EXIT_VALIDATION
    assert run(["trace", "--model", str(CONFIGS / "k3.cfg"), "--h", "1e-2,1e-3"] + args) == EXIT_VALIDATION
    assert run(["trace", "--config", str(CONFIGS / "quick.cfg"), "--tol", "bogus=1"] + args) == EXIT_VALIDATION


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DEGENTRACE_OUT", str(tmp_path / "env"))
    assert run(["mellin", "--n", "1", "--k", "3", "--z-max", "2"]) == EXIT_OK
    payload = json.loads((tmp_path / "env" / "mellin.json").read_text())
    assert payload["canonical_constant"] == "3/4"
    assert payload["poles"][0] == {"location": [2, 3], "order": 1}


def test_coeff_and_germ_outputs(tmp_path):
    assert run(["coeff", "--model", str(CONFIGS / "k3.cfg"), "--out", str(tmp_path)]) == EXIT_OK
    pred = json.loads((tmp_path / "prediction.json").read_text())
    assert pred["exponent"] == "-1/3"
    assert pred["leading_coefficient"] == pytest.approx(0.15284900985, rel=1e-9)
    assert run(["germ", "--model", str(CONFIGS / "k3.cfg"), "--trajectory", "0.2,0.1",
                "--out", str(tmp_path)]) == EXIT_OK
    germ = json.loads((tmp_path / "germ.json").read_text())
    assert germ["slope"] >= 2.9 and germ["energy_drift"] < 1e-10
    assert (tmp_path / "trajectory.csv").exists()


def test_trace_csv_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = run(["trace", "--config", str(CONFIGS / "quick.cfg"), "--h", "1e-2:1e-3:8", "--out", str(out)])
        assert code == EXIT_OK
        outs.append((out / "trace_samples.csv").read_bytes())
    assert outs[0] == outs[1]
    report = json.loads((tmp_path / "a" / "trace_report.json").read_text())
    assert report["verdict"] in ("pass", "fail")
    assert len(report["samples"]) == 8


def test_family_and_explicit_models_agree():
    a, b = load_model(CONFIGS / "k3.cfg"), load_model(CONFIGS / "k3_terms.cfg")
    assert a.principal == b.principal
    assert a.other_critical_values == pytest.approx(b.other_critical_values)


def test_experiment_file():
    exp = load_experiment(CONFIGS / "flagship.cfg")
    assert exp.h_values.size == 12
    assert exp.h_values[0] == pytest.approx(1e-2) and exp.h_values[-1] == pytest.approx(1e-4)
    assert exp.model.k == 3
    assert exp.phi.support_radius == 1.0 and exp.phi.shift == 0.0
    assert exp.sweep.eps_widen == 1.5


def test_experiment_file_options(tmp_path):
    (tmp_path / "m.cfg").write_text('[model]\nfamily = "rotation-confined"\nk = 3\n')
    path = tmp_path / "e.cfg"
    path.write_text('[experiment]\nmodel = "m.cfg"\nphi = { radius = 0.5, shift = 0.2 }\neps_widen = false\n')
    exp = load_experiment(path)
    assert exp.phi.support_radius == 0.5 and exp.phi.shift == 0.2
    assert exp.sweep.eps_widen is None
    path.write_text('[experiment]\nmodel = "m.cfg"\nphi = { hat = "gauss" }\n')
    with pytest.raises(ConfigError):
        load_experiment(path)
    path.write_text('[experiment]\nmodel = "m.cfg"\nwidth = 3\n')
    with pytest.raises(ConfigError):
        load_experiment(path)


def test_value_parsers():
    assert parse_term("3 0 : 1.5") == ((3, 0), 1.5)
    with pytest.raises(ConfigError):
        parse_term("3 0 1.5")
    with pytest.raises(ConfigError):
        parse_term("3 : 1", dim=2)
    phi = parse_phi("R=2,a=0.5")
    assert phi.support_radius == 2.0 and phi.shift == 0.5
    for bad in ("R=0", "b=1", "R="):
        with pytest.raises(ConfigError):
            parse_phi(bad)
    np.testing.assert_allclose(parse_range("1e-2:1e-4:3"), [1e-2, 1e-3, 1e-4])
    np.testing.assert_allclose(parse_range("0.1, 0.2"), [0.1, 0.2])
    with pytest.raises(ConfigError):
        parse_range("1:0:3")


def test_model_dict_validation():
    with pytest.raises(ConfigError):
        model_from_dict({"family": "other", "k": 3})
    with pytest.raises(ConfigError):
        model_from_dict({"family": "rotation-confined", "k": 3, "colour": 1})
    with pytest.raises(ConfigError):
        model_from_dict({"n": 1, "k": 3})
    m = model_from_dict({"family": "rotation-confined", "k": 3, "subprincipal": 0.25})
    assert m.subprincipal_value == 0.25
    with pytest.raises(ConfigError, match="below k"):
        model_from_dict({"n": 1, "k": 3, "terms": ["2 0 : 1", "3 0 : 1"]})
    with pytest.raises(ConfigError):
        model_from_dict({"n": 1, "k": 3, "terms": ["3 0 : 1"], "leading": ["3 0 : 1"]})
    split = model_from_dict({"n": 1, "k": 3, "terms": ["3 0 : 1", "0 4 : 2"], "E_c": 0.5})
    assert split.higher.terms == {(0, 4): 2.0} and split.critical_energy == 0.5
