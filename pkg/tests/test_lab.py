import json
from pathlib import Path

import pytest
import yaml

from cclab.lab import ConfigError, dump_config, emit_report, parse_config, run_experiment
from cclab.lab.cli import main
from cclab.lab.config import EXPERIMENTS
from cclab.lab.report import ExperimentReport, to_csv, to_plotdata

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL_WSI = """
experiment: wsi
seed: 1
example: {name: grushin}
params: {I: [1, 2]}
"""


def strip_time(text: str) -> dict:
    d = json.loads(text)
    d.pop("wall_time")
    return d


# ---------------------------------------------------------------- config


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL_WSI)
    assert cfg.experiment == "wsi" and cfg.seed == 1 and cfg.workers == 1
    assert cfg.example["r"] == 2 and cfg.example["resolution"] == 128
    assert cfg.params["p"] == 1.0 and cfg.params["family"]["kind"] == "bump"
    assert cfg.frame().q == 3


def test_heisenberg_default_resolution():
    cfg = parse_config({"experiment": "frame", "example": {"name": "heisenberg"}})
    assert cfg.grid().shape == (48, 48, 48)


def test_p_must_be_below_QI():
    with pytest.raises(ConfigError, match="p must be < Q_I"):
        parse_config({"experiment": "wsi", "seed": 1, "example": {"name": "grushin"},
                      "params": {"I": [1, 2], "p": 3}})


def test_all_violations_reported():
    with pytest.raises(ConfigError) as e:
        parse_config({"experiment": "wsi", "example": {"name": "grushin"},
                      "params": {"p": 1, "extra": 2}, "colour": "red"})
    msgs = " | ".join(e.value.violations)
    assert "unknown top-level key 'colour'" in msgs
    assert "unknown parameter 'extra'" in msgs
    assert "missing required key 'I'" in msgs
    assert "seed is required" in msgs


@pytest.mark.parametrize("data, needle", [
    ({"experiment": "nope"}, "unknown experiment"),
    ({"experiment": "frame", "example": {"name": "custom", "generators": [["1", "x1^"]]}},
     "malformed polynomial"),
    ({"experiment": "sharpness", "example": {"name": "grushin"}}, "missing required key 'q'"),
    ({"experiment": "kernel", "example": {"name": "grushin"}, "params": {"I": [1, 2]}},
     "seed is required"),
    ({"experiment": "frame", "example": {"name": "grushin", "resolution": 1}}, "resolution"),
    ({"experiment": "wpe", "example": {"name": "grushin"}, "params": {"I": [1, 5]}}, "I indices"),
])
def test_config_errors(data, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(data)


def test_custom_system_rational_coefficient():
    cfg = parse_config({"experiment": "frame",
                        "example": {"name": "custom", "r": 2,
                                    "generators": [["1", "0"], ["0", "2*x1^2 - 1/3*x2"]]}})
    assert cfg.frame().generators[1].to_strings()[1] in ("2*x1^2 - 1/3*x2", "-1/3*x2 + 2*x1^2")


def test_yaml_and_json_agree():
    a = parse_config(MINIMAL_WSI)
    b = parse_config(json.dumps(yaml.safe_load(MINIMAL_WSI)))
    assert a == b


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
@pytest.mark.parametrize("fmt", ["yaml", "json"])
def test_round_trip(path, fmt):
    cfg = parse_config(path.read_text())
    assert parse_config(dump_config(cfg, fmt)) == cfg


def test_every_experiment_has_a_canned_config():
    names = {yaml.safe_load(p.read_text())["experiment"] for p in CONFIGS.glob("*.yaml")}
    assert names == set(EXPERIMENTS)


# ---------------------------------------------------------------- runs and reports


@pytest.fixture(scope="module")
def nsw_euclid():
    cfg = parse_config({"experiment": "nsw", "example": {"name": "euclidean", "resolution": 64},
                        "params": {"points": [[0, 0], [0.3, -0.2]], "deltas": [0.0625, 0.125, 0.25],
                                   "adapted": False}})
    return run_experiment(cfg)


def test_nsw_euclid_constant_ratio(nsw_euclid):
    assert nsw_euclid.passed and nsw_euclid.summary["spread"] <= 1.5


def test_nsw_csv_columns(nsw_euclid):
    header = to_csv(nsw_euclid).splitlines()[0]
    assert header == "x,delta,volume,predicted,ratio"


def test_report_round_trip(nsw_euclid):
    text = nsw_euclid.to_json()
    back = ExperimentReport.from_json(text)
    assert back.to_json() == text
    s, inv, ok = back.recompute()
    assert s == nsw_euclid.summary and ok == nsw_euclid.passed


def test_sharpness_report_and_plotdata():
    cfg = parse_config({"experiment": "sharpness", "example": {"name": "grushin"},
                        "params": {"p": 1, "q": 1.5, "zoom_resolution": 64}})
    rep = run_experiment(cfg)
    assert rep.summary["slope"] == pytest.approx(0.0, abs=0.1)
    text = to_plotdata(rep)
    assert text.count("# curve:") == 1 and "log_delta_vs_log_ratio" in text
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert len(rows) == len(cfg.params["deltas"])


def test_empty_records_give_headers_only(tmp_path):
    rep = ExperimentReport("nsw", {"params": {"bound": 10}}, None, 1, [], {}, {}, False)
    assert to_csv(rep) == "x,delta,volume,predicted,ratio\n"
    for fmt in ("json", "csv", "plotdata"):
        assert emit_report(rep, fmt, tmp_path).exists()
    assert json.loads((tmp_path / "nsw.json").read_text())["records"] == []


def test_unwritable_destination(tmp_path, nsw_euclid):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(nsw_euclid, "json", blocker / "sub")


def test_rerun_is_identical():
    cfg = parse_config(MINIMAL_WSI.replace("{name: grushin}", "{name: grushin, resolution: 32}"))
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert strip_time(a.to_json()) == strip_time(b.to_json())


# ---------------------------------------------------------------- CLI


def test_cli_pass(tmp_path, capsys):
    assert main(["frame", "--config", str(CONFIGS / "frame.yaml"), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "frame.json").read_text())["pass"] is True


def test_cli_config_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: wsi\nexample: {name: grushin}\nparams: {I: [1, 2], p: 3}\n")
    assert main(["wsi", "--config", str(bad), "--seed", "1", "--out", str(tmp_path)]) == 2


def test_cli_numeric_failure(tmp_path):
    cfg = tmp_path / "tight.yaml"
    cfg.write_text("experiment: nsw\nexample: {name: grushin}\n"
                   "params: {points: [[0, 0], [0.5, 0]], deltas: [0.0625, 0.25], bound: 1.0001}\n")
    assert main(["nsw", "--config", str(cfg), "--out", str(tmp_path), "--format", "csv"]) == 3


def test_cli_invariant_violation(tmp_path):
    code = main(["poincare", "--config", str(CONFIGS / "poincare-vanishing.yaml"),
                 "--out", str(tmp_path)])
    assert code == 4
    rep = json.loads((tmp_path / "poincare.json").read_text())
    assert "doubling failure" in rep["summary"]["flags"]
