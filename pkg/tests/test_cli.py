import json
import subprocess
import sys
from pathlib import Path

import pytest

from starprod.cli import COMMANDS, ConfigError, config_from_dict, load_config, main, run_command

GOLDEN = Path(__file__).resolve().parent.parent / "golden"
EXPECTED_EXIT = {c: 0 for c in COMMANDS} | {"invariance-check": 1}


def write(tmp_path, raw, name="job.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def test_minimal_config_loads(tmp_path):
    cfg = load_config(write(tmp_path, {"dimension": 2}))
    assert cfg.dimension == 2
    assert cfg.truncation.nu_order == 2 and cfg.truncation.weyl_degree_cap == 6


def test_schema_error_has_pointer():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"dimension": 2, "truncation": {"nu_order": -1}})
    assert exc.value.pointer == "/truncation/nu_order"


def test_parse_error_has_position():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"dimension": 2, "gamma": {"1,1,1": "x1 + x3"}})
    assert exc.value.pointer == "/gamma/1,1,1"
    assert exc.value.position == 5


def test_odd_dimension_rejected():
    with pytest.raises(ConfigError, match="even"):
        config_from_dict({"dimension": 3})


def test_non_closed_omega_names_component():
    raw = {
        "dimension": 4,
        "omega": [["0", "x3", "0", "0"], ["-x3", "0", "0", "0"], ["0", "0", "0", "1"], ["0", "0", "-1", "0"]],
        "lambda": [["0", "-1", "0", "0"], ["1", "0", "0", "0"], ["0", "0", "0", "-1"], ["0", "0", "1", "0"]],
    }
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    assert "omega_closed" in exc.value.message and "d omega component" in exc.value.message


def test_closedness_reported_when_inverse_consistent():
    raw = {"dimension": 4, "Omega": [{"order": 1, "components": {"1,2": "x3"}}]}
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    assert "Omega_closed" in exc.value.message


def test_index_out_of_range():
    with pytest.raises(ConfigError, match="out of range"):
        config_from_dict({"dimension": 2, "gamma": {"1,1,3": "1"}})


def test_star_report():
    cfg = config_from_dict({"dimension": 2, "inputs": {"u": "x1", "v": "x2"}})
    rep = run_command(cfg, "star").to_json()
    assert rep["results"]["u*v"] == {"nu^0": "x1*x2", "nu^1": "-1/2", "nu^2": "0"}


def test_validate_exit_zero(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, {"dimension": 2})]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True


def test_moment_map_non_symplectic_exit_one(tmp_path, capsys):
    path = write(tmp_path, {"dimension": 2, "inputs": {"vector_field": ["x1", "0"], "tests": ["x1", "x2"]}})
    assert main(["moment-map", "--config", path]) == 1
    out = json.loads(capsys.readouterr().out)
    failed = [c["name"] for c in out["checks"] if not c["passed"]]
    assert "lie_omega_zero" in failed


def test_config_error_exit_two(tmp_path, capsys):
    assert main(["star", "--config", write(tmp_path, {"dimension": 2, "gamma": {"1,1,1": "x1 +"}})]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["pointer"] == "/gamma/1,1,1" and "position" in err


def test_invalid_json_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"dimension": 2,')
    assert main(["validate", "--config", str(p)]) == 2
    assert "position" in json.loads(capsys.readouterr().err)


def test_every_command_has_golden():
    for c in COMMANDS:
        assert (GOLDEN / f"{c}.json").exists() and (GOLDEN / f"{c}.report.json").exists()


@pytest.mark.parametrize("command", COMMANDS)
def test_golden_byte_identical(command, tmp_path):
    out = tmp_path / "report.json"
    code = main([command, "--config", str(GOLDEN / f"{command}.json"), "--out", str(out)])
    assert code == EXPECTED_EXIT[command]
    assert out.read_bytes() == (GOLDEN / f"{command}.report.json").read_bytes()


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "starprod.cli", "validate", "--config", str(GOLDEN / "validate.json")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert res.stdout == (GOLDEN / "validate.report.json").read_text()
