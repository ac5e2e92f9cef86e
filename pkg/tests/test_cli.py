from pathlib import Path

import numpy as np
import pytest

from opfree.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, main
from opfree.config import build, from_mapping, load_config
from opfree.errors import ConfigError, ValidationError
from opfree.report import FAIL, NOT_REPRODUCIBLE, PASS, WARN, VerificationReport, fingerprint
from opfree.suites import REGISTRY

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SCALAR = """
name: scalar
algebra: {blocks: [1]}
covariance: {kind: identity}
depth: 3
"""


def test_golden_scalar_config_passes(capsys):
    code = main(["run", str(CONFIGS / "scalar_semicircular.yaml")])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "# overall=PASS" in out
    assert "[suite not-reproducible] status=NOT-REPRODUCIBLE" in out
    assert "status=FAIL" not in out


def test_coupled_covariance_fails_with_witness(capsys):
    code = main(["run", str(CONFIGS / "coupled_freeness.yaml")])
    out = capsys.readouterr().out
    assert code == EXIT_FAIL
    assert "witness kappa_2(x1 1 (x) x2)" in out


def test_missing_kraus_is_a_config_error(capsys):
    code = main(["run", str(CONFIGS / "missing_kraus.yaml")])
    err = capsys.readouterr().err
    assert code == EXIT_ERROR
    assert "covariance.kraus: required for kind 'kraus'" in err


def test_describe_zero_covariance(capsys):
    assert main(["describe", str(CONFIGS / "zero_covariance.yaml")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "bimodule dimension 0" in out
    assert "levels: 2,0,0; exact to degree 4" in out


def test_describe_depth_flag(tmp_path, capsys):
    assert main(["describe", write(tmp_path, SCALAR), "--depth", "4"]) == EXIT_OK
    assert "levels: 1,1,1,1,1; exact to degree 8" in capsys.readouterr().out


def test_flags_and_output_file(tmp_path, capsys):
    out_file = tmp_path / "report.txt"
    code = main(["run", write(tmp_path, SCALAR), "--suite", "semicircular-oracle",
                 "--suite", "integration-by-parts", "--seed", "5", "--tolerance", "1e-8",
                 "--depth", "2", "--out", str(out_file)])
    assert code == EXIT_OK
    assert "report written" in capsys.readouterr().out
    text = out_file.read_text()
    assert "# depth=2 seed=5 tolerance=1.0e-08" in text
    assert text.count("[suite ") == 2


def test_reports_are_reproducible(tmp_path, capsys):
    args = ["run", write(tmp_path, SCALAR), "--suite", "adjoint-formula", "--suite", "j-isometry"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_unknown_suite_and_keys(tmp_path, capsys):
    assert main(["run", write(tmp_path, SCALAR), "--suite", "nope"]) == EXIT_ERROR
    assert "unknown ['nope']" in capsys.readouterr().err
    bad = write(tmp_path, SCALAR + "colour: red\n", "bad.yaml")
    assert main(["run", bad]) == EXIT_ERROR


def test_yaml_syntax_error_reports_position(tmp_path):
    path = write(tmp_path, "name: x\nalgebra: {blocks: [1\n")
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        load_config(path)


def test_config_validation_messages():
    base = {"algebra": {"blocks": [1]}, "covariance": {"kind": "identity"}}
    with pytest.raises(ConfigError, match="covariance.kind"):
        build(from_mapping({**base, "covariance": {"kind": "gaussian"}}))
    with pytest.raises(ConfigError, match="depth"):
        from_mapping({**base, "depth": 0})
    with pytest.raises(ConfigError, match=r"kraus\[0\]"):
        build(from_mapping({"algebra": {"blocks": [2]},
                            "covariance": {"kind": "kraus", "kraus": [[[1, 0]]]}}))
    with pytest.raises(ConfigError, match="algebra"):
        from_mapping({"covariance": {"kind": "identity"}})


def test_non_cp_table_is_a_validation_error():
    cfg = from_mapping({"algebra": {"blocks": [1]},
                        "covariance": {"kind": "scalar_table", "index_count": 2,
                                       "table": [[1, 2], [2, 1]]}})
    with pytest.raises(ValidationError, match="covariance"):
        build(cfg)


def test_complex_entries_and_blocks():
    cfg = from_mapping({
        "algebra": {"blocks": [1, 1]},
        "covariance": {"kind": "blocks", "parts": [
            {"kind": "identity"},
            {"kind": "kraus", "kraus": [[[[0, 1], 0], [0, [0, -1]]]]},
        ]},
    })
    built = build(cfg)
    assert built.eta.index_count == 2
    assert np.allclose(built.eta.coef[1, 1], np.eye(2))


def test_suites_listing(capsys):
    assert main(["suites"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in REGISTRY:
        assert name in out
    assert "freeness" in out and "(opt-in)" in out


def test_report_status_rules():
    rep = VerificationReport("x")
    rep.add("a", "anchor", 1e-12, 1e-9)
    assert rep.status() == PASS
    rep.add("b", "anchor", 0.01, 0.05, status=WARN)
    assert rep.status() == WARN and rep.passed
    rep.add("c", "anchor", 1.0, 1e-9)
    assert rep.status() == FAIL and not rep.passed
    nr = VerificationReport("y")
    nr.add("d", "anchor", np.nan, 0.0, status=NOT_REPRODUCIBLE)
    assert nr.status() == NOT_REPRODUCIBLE and "defect=-" in nr.to_text()
    assert fingerprint(np.ones(3)) == fingerprint(np.ones(3)) != fingerprint(np.zeros(3))
