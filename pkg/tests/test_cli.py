"""Config parsing, report files, and exit codes of the command line."""

import json
import math
from pathlib import Path

import pytest

from phasekit.cli import main, parse_config, render_config
from phasekit.errors import ExprParseError, SchemaError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _eval_doc(**extra):
    doc = {
        "mode": "eval",
        "integral": {
            "dimension": 1,
            "phase": "A*(x1 - 1.5)^2",
            "weight": "bump(2*x1 - 3)",
            "box": [1, 2],
            "params": {"A": 500},
        },
    }
    doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# parsing


def test_rejects_malformed_json():
    with pytest.raises(SchemaError, match="not valid JSON"):
        parse_config("{mode: oracle}")


def test_rejects_unknown_mode():
    with pytest.raises(SchemaError, match="must be one of"):
        parse_config(json.dumps({"mode": "frobnicate"}))


def test_rejects_keys_foreign_to_the_mode():
    doc = {"mode": "oracle", "integral": _eval_doc()["integral"], "window": [1, 2]}
    with pytest.raises(SchemaError, match="window"):
        parse_config(json.dumps(doc))


def test_collects_every_problem_before_raising():
    doc = _eval_doc(tol=-1.0, n_max="three")
    with pytest.raises(SchemaError) as info:
        parse_config(json.dumps(doc))
    assert "tol" in str(info.value) and "n_max" in str(info.value)


def test_rejects_unbound_parameter():
    doc = _eval_doc()
    del doc["integral"]["params"]
    with pytest.raises(SchemaError, match="A is not bound"):
        parse_config(json.dumps(doc))


def test_sweep_binds_its_parameter():
    doc = _eval_doc(sweep={"param": "A", "values": [10, 20]})
    del doc["integral"]["params"]
    cfg = parse_config(json.dumps(doc))
    assert cfg.sweep.values == (10.0, 20.0)


def test_rejects_variable_beyond_dimension():
    doc = _eval_doc()
    doc["integral"]["weight"] = "bump(2*x2 - 3)"
    with pytest.raises(SchemaError, match="x2 is beyond dimension 1"):
        parse_config(json.dumps(doc))


def test_expression_errors_carry_position():
    doc = _eval_doc()
    doc["integral"]["phase"] = "A*(x1 - "
    with pytest.raises(ExprParseError):
        parse_config(json.dumps(doc))


def test_flat_box_means_one_interval():
    nested = _eval_doc()
    nested["integral"]["box"] = [[1, 2]]
    a = parse_config(json.dumps(_eval_doc()))
    b = parse_config(json.dumps(nested))
    assert render_config(a) == render_config(b)


def test_parse_inverts_render():
    doc = _eval_doc(
        mode="compare",
        tol=1e-9,
        sweep={"param": "A", "values": [100, 400]},
        scales={"x": 0.5},
    )
    del doc["integral"]["params"]
    cfg = parse_config(json.dumps(doc))
    assert parse_config(render_config(cfg)) == cfg


def test_shipped_configs_parse_and_round_trip():
    paths = sorted(CONFIG_DIR.glob("*.cfg"))
    assert len(paths) >= 6
    for p in paths:
        cfg = parse_config(p.read_text())
        assert parse_config(render_config(cfg)) == cfg


# ---------------------------------------------------------------------------
# entry point


def test_missing_config_file_is_usage_error(tmp_path, capsys):
    code = main(["oracle", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2
    assert "cannot read config" in capsys.readouterr().err


def test_mode_mismatch_is_usage_error(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text(json.dumps(_eval_doc()))
    code = main(["oracle", "--config", str(p)])
    assert code == 2
    assert "config has mode" in capsys.readouterr().err


def test_bad_overrides_are_usage_errors(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(json.dumps(_eval_doc()))
    assert main(["eval", "--config", str(p), "--nmax", "99"]) == 2
    assert main(["eval", "--config", str(p), "--tol", "-1"]) == 2


def test_oracle_writes_both_reports(tmp_path):
    out = tmp_path / "out"
    code = main(["oracle", "--config", str(CONFIG_DIR / "oracle.cfg"),
                 "--out", str(out)])
    assert code == 0
    csv = (out / "report.csv").read_text().splitlines()
    assert csv[0].startswith("case,value_re,value_im,abs_value")
    assert len(csv) == 2
    # the flat mass of the window bump, frozen elsewhere in the suite
    assert float(csv[1].split(",")[3]) == pytest.approx(0.22199690808, rel=1e-9)
    txt = (out / "report.txt").read_text().splitlines()
    assert set(txt[1]) <= {"-", " "}
    assert not (out / "sweep.csv").exists()


def test_eval_report_row(tmp_path):
    out = tmp_path / "out"
    code = main(["eval", "--config", str(CONFIG_DIR / "eval.cfg"), "--out", str(out)])
    assert code == 0
    row = (out / "report.csv").read_text().splitlines()[1].split(",")
    assert math.isfinite(float(row[2])) and float(row[4]) > 0


def test_nmax_override_changes_the_value(tmp_path):
    rows = []
    for tag, extra in (("a", []), ("b", ["--nmax", "0"])):
        out = tmp_path / tag
        assert main(["eval", "--config", str(CONFIG_DIR / "eval.cfg"),
                     "--out", str(out)] + extra) == 0
        rows.append((out / "report.csv").read_text().splitlines()[1].split(","))
    assert rows[0][2] != rows[1][2]
    assert float(rows[0][5]) < float(rows[1][5])  # fewer terms, larger budget


def test_compare_sweep_outputs(tmp_path):
    out = tmp_path / "out"
    code = main(["compare", "--config", str(CONFIG_DIR / "fresnel-compare.cfg"),
                 "--out", str(out)])
    assert code == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0].split(",")[-1] == "verdict"
    assert [r.split(",")[-1] for r in rows[1:]] == ["pass"] * 3
    sweep = (out / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "parameter,abs_value,arg_value"
    assert len(sweep) == 4
    assert [float(r.split(",")[0]) for r in sweep[1:]] == [100.0, 1000.0, 10000.0]


def test_rerun_writes_identical_bytes(tmp_path):
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        assert main(["compare", "--config", str(CONFIG_DIR / "fresnel-compare.cfg"),
                     "--out", str(out)]) == 0
        outs.append(out)
    for name in ("report.csv", "report.txt", "sweep.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_nonstationary_rows_bound_the_oracle(tmp_path):
    out = tmp_path / "out"
    code = main(["compare", "--config",
                 str(CONFIG_DIR / "nonstationary-compare.cfg"), "--out", str(out)])
    assert code == 0
    for row in (out / "report.csv").read_text().splitlines()[1:]:
        cells = row.split(",")
        assert cells[-2] == "NonStationary"
        assert cells[4] == "" and cells[5] == ""  # no asymptotic value claimed
        assert cells[-1] == "pass"


def test_inert_check_runs_green(tmp_path):
    out = tmp_path / "out"
    code = main(["inert-check", "--config", str(CONFIG_DIR / "inert-check.cfg"),
                 "--out", str(out)])
    assert code == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0].startswith("j,c_hat,limit")
    assert len(rows) == 5  # orders 0..3


def test_false_scale_claim_exits_one(tmp_path, capsys):
    doc = {
        "mode": "inert-check", "max_order": 2,
        "n_param_samples": 6, "n_point_samples": 33,
        "family": {"dimension": 1, "weight": "bump((x1 - 1.5)/h)",
                   "x_scales": [1], "scale": 1.0,
                   "param_ranges": {"h": [0.02, 0.05]}},
    }
    p = tmp_path / "bad.cfg"
    p.write_text(json.dumps(doc))
    code = main(["inert-check", "--config", str(p), "--out", str(tmp_path / "out")])
    assert code == 1
    assert "FAIL" in (tmp_path / "out" / "report.csv").read_text()


def test_degenerate_window_exits_three(tmp_path, capsys):
    doc = _eval_doc()
    doc["integral"]["phase"] = "(x1 - 1.5)^3"
    del doc["integral"]["params"]
    p = tmp_path / "c.cfg"
    p.write_text(json.dumps(doc))
    code = main(["eval", "--config", str(p), "--out", str(tmp_path / "out")])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_example_ci_prunes_cleanly(tmp_path):
    doc = {"mode": "example-ci", "example": {"P": 100, "ratios": [16, 1, 1]}}
    p = tmp_path / "c.cfg"
    p.write_text(json.dumps(doc))
    code = main(["example-ci", "--config", str(p), "--out", str(tmp_path / "out")])
    assert code == 0
    text = (tmp_path / "out" / "report.csv").read_text()
    assert "pruned: lam1" in text


def test_example_ci_small_case(tmp_path):
    doc = {"mode": "example-ci", "n_max": 1, "tol": 1e-5, "abs_floor": 1e-5,
           "example": {"P": 100, "ratios": [1, 1, 1]}}
    p = tmp_path / "c.cfg"
    p.write_text(json.dumps(doc))
    code = main(["example-ci", "--config", str(p), "--out", str(tmp_path / "out")])
    assert code == 0
    row = (tmp_path / "out" / "report.csv").read_text().splitlines()[1]
    assert row.split(",")[-1] == "pass"
