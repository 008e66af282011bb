import json
import math

import pytest

from logbouss import __version__
from logbouss.config import ConfigError, RunConfig, load_config
from logbouss.io import config_hash, format_cell, read_csv, write_csv, write_dict_rows, write_json


def write_toml(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------- io

@pytest.mark.parametrize("value, text", [
    (0.1, "0.1"), (1e-300, "1e-300"), (math.inf, "inf"), (True, "true"), (None, ""), (3, "3"), ("a,b", "a,b"),
])
def test_format_cell(value, text):
    assert format_cell(value) == text


def test_csv_is_crlf_and_tagged(tmp_path):
    path = write_csv(tmp_path / "sub" / "x.csv", ["a", "b"], [[1, 0.25], ["q,r", 2.0]], "h0")
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 3 and b"\n" not in raw.replace(b"\r\n", b"")
    rows = read_csv(path)
    assert rows[1]["a"] == "q,r"
    assert rows[0]["b"] == "0.25"
    assert all(r["config_hash"] == "h0" and r["tool_version"] == __version__ for r in rows)


def test_float_roundtrip(tmp_path):
    x = 0.1 + 0.2
    path = write_csv(tmp_path / "x.csv", ["x"], [[x]])
    assert float(read_csv(path)[0]["x"]) == x


def test_dict_rows_default_columns(tmp_path):
    path = write_dict_rows(tmp_path / "d.csv", [{"u": 1, "v": 2}, {"u": 3, "v": 4}], "h")
    assert path.read_text().splitlines()[0] == "u,v,config_hash,tool_version"


def test_json_is_sorted_and_tagged(tmp_path):
    path = write_json(tmp_path / "x.json", {"b": 1, "a": [math.inf]}, "h1")
    doc = json.loads(path.read_text())
    assert doc["config_hash"] == "h1" and doc["tool_version"] == __version__
    assert doc["a"] == ["inf"]
    assert list(doc) == sorted(doc)


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": (1, 2), "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


# ---------------------------------------------------------------- config

def test_defaults_are_the_acceptance_matrix():
    cfg = load_config("kernel")
    assert cfg.alphas == (0.0, 0.5, 1.0) and cfg.betas == (0.5, 1.0)
    assert cfg.dims == (1, 2, 3) and cfg.times == (0.5, 1.0, 2.0)
    assert cfg.lambdas == ()


def test_toml_layering(tmp_path):
    path = write_toml(tmp_path, "grid = 64\nseed = 3\n[verify]\ngrid = 128\nceiling = 5\n[kernel]\nseed = 9\n")
    cfg = load_config("verify", path, {"seed": 4})
    assert cfg.grid == 128 and cfg.seed == 4 and cfg.ceiling == 5.0
    assert load_config("kernel", path).seed == 9


def test_scalar_promoted_and_inf_parsed(tmp_path):
    path = write_toml(tmp_path, 'alphas = 0.5\np_list = [2, "inf"]\n')
    cfg = load_config("bernstein", path)
    assert cfg.alphas == (0.5,) and cfg.p_list == (2.0, math.inf)


@pytest.mark.parametrize("text, name", [
    ("alphas = []", "alphas"),
    ("dims = []", "dims"),
    ("betas = [2.5]", "betas"),
    ("dims = [4]", "dims"),
    ("grid = 100", "grid"),
    ("grid = 64.0", "grid"),
    ("plots = 1", "plots"),
    ("lambdas = [1.0]", "lambdas"),
    ("nonsense = 1", "nonsense"),
    ('alphas = ["x"]', "alphas"),
    ("ceiling = -1", "ceiling"),
])
def test_invalid_config_names_field(tmp_path, text, name):
    with pytest.raises(ConfigError) as info:
        load_config("kernel", write_toml(tmp_path, text))
    assert info.value.field == name


def test_empty_range_message(tmp_path):
    with pytest.raises(ConfigError, match="empty parameter range"):
        load_config("kernel", write_toml(tmp_path, "times = []"))


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config("kernel", str(tmp_path / "none.toml"))
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config("kernel", write_toml(tmp_path, "grid = = 3"))


def test_unknown_preset_lists_choices():
    with pytest.raises(ConfigError, match="available presets: .*euler-check"):
        load_config("simulate", overrides={"preset": "warp"})


def test_hash_ignores_output_keys():
    a = RunConfig("verify", out="x", plots=True)
    b = RunConfig("verify", out="y", json_only=True)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig("verify", seed=1).config_hash()
