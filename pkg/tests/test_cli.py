import csv
import dataclasses
import io
import json

import pytest

from softrh.cli import (EXIT_FAIL, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, build_config,
                        main, model_checks, parse_config_text, run, selftest)


def read_report(path):
    with open(path / "report.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_radial_run(tmp_path):
    out = tmp_path / "run"
    cfg = RunConfig(potential="radial_gaussian", sigma0=0.2, m_list=[16], out=str(out))
    assert run(cfg) == EXIT_OK
    doc = json.loads((out / "artifacts_m16.json").read_text())
    # F~ = 1 for the radial Gaussian: the only coefficient is the constant mode
    F = {d: complex(re, im) for d, re, im in doc["F"]}
    assert abs(F[0] - 1) == 0 and all(abs(v) <= 1e-8 for d, v in F.items() if d != 0)
    assert all(c["passed"] for c in doc["checks"].values())
    rows = read_report(out)
    assert [r["m"] for r in rows] == ["16"] and rows[0]["sup_defect_Dm"] == ""
    assert (out / "model.json").exists() and not (out / "samples_m16.csv").exists()


def test_oracle_run_writes_samples(tmp_path):
    out = tmp_path / "orc"
    assert main(["--potential", "radial_gaussian", "--sigma0", "0.2", "--m", "16",
                 "--oracle", "on", "--precision", "53", "--out", str(out)]) == EXIT_OK
    rows = read_report(out)
    assert float(rows[0]["sup_defect_Dm"]) <= 1e-8
    assert int(rows[0]["oracle_precision_bits"]) >= 53
    with open(out / "samples_m16.csv") as fh:
        head = next(csv.reader(fh))
    assert head == ["re_z", "im_z", "abs_P", "abs_P_approx", "rel_err"]


def test_json_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["--potential", "elliptic", "--t", "0.2", "--m", "16", "--m", "32",
                     "--out", str(d)]) == EXIT_OK
    for name in ("model.json", "artifacts_m16.json", "artifacts_m32.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("cfg, match", [
    (dict(m_list=[]), "m_list is empty"),
    (dict(m_list=[32, 16]), "strictly increasing"),
    (dict(N=8), "N must be"),
    (dict(sigma0=0.7), "sigma0"),
    (dict(orders=12), "orders"),
    (dict(potential="user_file"), "geometry"),
])
def test_validation(cfg, match):
    with pytest.raises(UsageError, match=match):
        RunConfig(**cfg).validate()


def test_t_bound_is_usage_error(tmp_path, capsys):
    code = main(["--potential", "elliptic", "--t", "0.5", "--out", str(tmp_path)])
    assert code == EXIT_USAGE
    assert "0.3" in capsys.readouterr().err


def test_config_merge(tmp_path):
    text = "# sweep\npotential = elliptic\nt = 0.1\nm = 16, 32\noracle = off\nout = x  # trailing\n"
    vals = parse_config_text(text)
    assert vals == {"potential": "elliptic", "t": "0.1", "m": [16, 32], "oracle": "off", "out": "x"}
    cfg = build_config(vals, {"t": 0.2, "m": None, "oracle": None})
    assert cfg.t == 0.2 and cfg.m_list == [16, 32] and cfg.oracle is False
    with pytest.raises(UsageError, match="unknown key"):
        parse_config_text("colour = red")
    with pytest.raises(UsageError, match="on/off"):
        build_config({"oracle": "maybe"}, {})


def test_config_file_through_main(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("potential = radial_gaussian\nm = 16\n")
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--m", "32", "--out", str(out)]) == EXIT_OK
    assert [r["m"] for r in read_report(out)] == ["32"]


def test_selftest_passes():
    buf = io.StringIO()
    assert selftest(stream=buf) == EXIT_OK
    text = buf.getvalue()
    assert "FAIL" not in text and "checks passed" in text


def test_corrupted_H_fails_boundary_check(radial_model):
    bad = dataclasses.replace(radial_model, H_R=radial_model.H_R * 1.01)
    failed = {c.name: c for c in model_checks(bad) if not c.passed}
    assert "H_boundary" in failed
    assert "[potential]" in failed["H_boundary"].message
    assert EXIT_FAIL == 1
