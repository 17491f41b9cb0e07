import json
import math

import pytest

from cutfem.config import ConfigError, load_config, parse_list, parse_number, validate
from cutfem.forms import Variant


def write(tmp_path, text, name="c.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_number_forms():
    assert parse_number("1/8") == 0.125
    assert parse_number("pi/7") == pytest.approx(math.pi / 7)
    assert parse_number("2pi/5") == pytest.approx(2 * math.pi / 5)
    assert parse_number("0.1/3") == pytest.approx(0.1 / 3)
    assert parse_number(3) == 3.0
    with pytest.raises(ConfigError):
        parse_number("abc")


def test_parse_list_forms():
    assert parse_list("1..5", int) == [1, 2, 3, 4, 5]
    assert parse_list("1/8,1/16") == [0.125, 0.0625]
    assert parse_list([1, "1/2"]) == [1.0, 0.5]
    assert parse_list(0.2) == [0.2]


def test_unknown_key_reports_line(tmp_path):
    p = write(tmp_path, '{\n  "command": "run-static",\n  "h": [0.1],\n\n  "frobnicate": true\n}\n')
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line == 5
    assert "frobnicate" in str(err.value)
    assert str(err.value).startswith(f"{p}:5:")


def test_bad_value_reports_line(tmp_path):
    p = write(tmp_path, '{\n  "command": "cond-table",\n  "p": [1, 2],\n  "delta": "tiny"\n}\n')
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line == 4


def test_malformed_json_reports_line(tmp_path):
    p = write(tmp_path, '{\n  "command": "run-eig",\n  "k": 6,\n  "h": [0.1\n}\n')
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line is not None and err.value.line >= 4


@pytest.mark.parametrize("raw", [
    {"h": [0.1]},
    {"command": "launch-rocket"},
    {"command": "run-static", "family": "hex"},
    {"command": "run-static", "p": [7]},
    {"command": "run-static", "h": [-0.1]},
    {"command": "run-static", "material": {"E": -1}},
    {"command": "run-static", "material": {"G": 1}},
    {"command": "run-eig", "k": 0},
    {"command": "two-grid", "mode": "first"},
    {"command": "run-static", "k": 6},  # option of another command
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        validate(raw)


def test_valid_config_and_echo(tmp_path):
    raw = {"command": "converge", "h": "1/8,1/16", "p": "1..2", "theta": ["0", "pi/7"],
           "material": {"E": 1e9, "nu": 0.25}, "stabilization": {"variant": "split", "scale": 2.0},
           "scenario": "manufactured"}
    p = write(tmp_path, json.dumps(raw, indent=2))
    cfg = load_config(p)
    assert cfg.h == [0.125, 0.0625] and cfg.p == [1, 2]
    assert cfg.theta[1] == pytest.approx(math.pi / 7)
    assert cfg.material_params.E == 1e9
    st = cfg.stab_params(2)
    assert st.variant is Variant.SPLIT
    assert st.beta == 4000.0
    echo = cfg.echo()
    assert echo["command"] == "converge"
    assert validate(echo).echo() == echo
