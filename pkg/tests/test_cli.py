import json

import pytest
import yaml
from pydantic import ValidationError

import workbench
from src.models.run_config import RunConfig, TolerancesConfig
from src.utils.config import load_json


def write_config(tmp_path, **overrides):
    data = {"schema_version": 1, "n": 2, "N": 8, "seed": 4,
            "suites": ["courant-axioms", "hodge"],
            "odd_twist": {"kind": "odd",
                          "F": {"degree": 2, "modes": [{"component": [0, 1], "wavevector": [0, 0],
                                                        "amplitude": 0.5}]}},
            "sampling": {"courant_triples": 2, "hodge_forms": 1, "random_twists": 0},
            "metric": {"samples": 1}}
    data.update(overrides)
    path = tmp_path / "run.yml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_verify_courant_writes_reports(tmp_path):
    out = tmp_path / "reports"
    code = workbench.main(["verify-courant", "--config", write_config(tmp_path), "--out", str(out)])
    assert code == 0
    report = load_json(out / "courant-axioms.json")
    assert report["suite"] == "courant-axioms"
    assert "wall_time" not in report
    assert load_json(out / "summary.json")["suites"] == {"courant-axioms": True}


def test_all_runs_configured_suites_as_csv(tmp_path):
    out = tmp_path / "csv"
    code = workbench.main(["all", "--config", write_config(tmp_path), "--out", str(out), "--format", "csv"])
    assert code == 0
    header = (out / "hodge.csv").read_text().splitlines()[0]
    assert header == "suite,check_id,anchor,residual,tolerance,pass,informational"
    assert (out / "courant-axioms.csv").exists()


def test_reports_are_deterministic(tmp_path):
    config = write_config(tmp_path)
    for name in ("first", "second"):
        workbench.main(["hodge-report", "--config", config, "--out", str(tmp_path / name), "--seed", "9"])
    first = (tmp_path / "first" / "hodge.json").read_bytes()
    assert first == (tmp_path / "second" / "hodge.json").read_bytes()
    assert json.loads(first)["suite"] == "hodge"


def test_unknown_key_is_a_config_error(tmp_path, capsys):
    assert workbench.main(["all", "--config", write_config(tmp_path, resolution=16)]) == 2
    assert "resolution" in capsys.readouterr().err


def test_non_closed_f_is_a_config_error(tmp_path, capsys):
    odd_twist = {"kind": "odd",
                 "F": {"degree": 2, "modes": [{"component": [0, 1], "wavevector": [0, 0, 1], "amplitude": 1.0}]}}
    config = write_config(tmp_path, n=3, N=12, odd_twist=odd_twist)
    assert workbench.main(["verify-courant", "--config", config]) == 2
    assert "dF = 0" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert workbench.main(["all", "--config", str(tmp_path / "absent.yml")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as error:
        workbench.main(["verify-everything"])
    assert error.value.code == 2


def test_wavevector_outside_the_band():
    omega = {"degree": 2, "modes": [{"component": [0, 1], "wavevector": [5, 0], "amplitude": 1.0}]}
    with pytest.raises(ValidationError, match="outside the band"):
        RunConfig(n=2, N=16, genmetric={"omega": omega})


def test_unknown_suite():
    with pytest.raises(ValidationError, match="unknown suite"):
        RunConfig(suites=["hodge", "moduli"])


def test_exact_twist_rejects_f():
    F = {"degree": 2, "modes": [{"component": [0, 1], "wavevector": [0, 0, 0], "amplitude": 1.0}]}
    with pytest.raises(ValidationError, match="carries no F"):
        RunConfig(twist={"kind": "exact", "F": F})


def test_tolerance_scale():
    scaled = TolerancesConfig().scaled(10.0)
    assert scaled.axiom == pytest.approx(1e-6)
    assert scaled.negative_control == TolerancesConfig().negative_control
    with pytest.raises(ValueError):
        TolerancesConfig().scaled(0.0)
