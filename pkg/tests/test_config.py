import numpy as np
import pytest

from pwexpand.config import BUNDLED, ConfigError, load_bundled, load_config, parse_config
from pwexpand.expr import Expression, ExpressionError
from pwexpand.output import SCHEMA_VERSION, csv_text, fmt, json_text


def _raw(**over):
    raw = {"dim": 1, "ambient": {"boxes": [[0, 1]]},
           "branch": [{"interval": [0, 0.5], "matrix": 2, "offset": 0},
                      {"interval": [0.5, 1], "matrix": 2, "offset": -1}]}
    raw.update(over)
    return raw


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_load(name):
    cfg = load_bundled(name)
    assert cfg.name == name
    assert cfg.seed >= 0


def test_string_numbers():
    cfg = parse_config(_raw(branch=[{"interval": [0, "1/3"], "matrix": 3, "offset": 0},
                                    {"interval": ["1/3", "2/3"], "matrix": 3, "offset": -1},
                                    {"interval": ["2/3", 1], "matrix": 3, "offset": -2}]))
    assert cfg.map.domains[1].vertices[0, 0] == pytest.approx(1 / 3, abs=1e-16)


@pytest.mark.parametrize("bad,msg", [
    ({"dim": 0}, "dim"),
    ({"ambient": {}}, "ambient"),
    ({"branch": []}, "branch"),
    ({"weight": "other"}, "weight"),
    ({"caps": {"bogus": 1}}, "cap"),
    ({"seed": -1}, "seed"),
    ({"branch": [{"interval": [0, 1], "matrix": 2}]}, "offset"),
    ({"branch": [{"interval": [0, 1], "box": [[0], [1]], "matrix": 2, "offset": 0}]}, "exactly one"),
    ({"branch": [{"kind": "smooth1d", "interval": [0, 1], "forward": "2*x", "derivative": "import os"}]}, "branch 0"),
    ({"weight": "custom"}, "weight expression"),
])
def test_config_errors(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(_raw(**bad))


def test_load_errors(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('dim = "x')
    with pytest.raises(ConfigError):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.toml"))


def test_expression_language():
    f = Expression("2*x - floor(2*x)")
    np.testing.assert_allclose(f(np.array([0.25, 0.75])), [0.5, 0.5])
    assert f.scalar(0.75) == 0.5
    g = Expression("x*y + mod(z, 1)", 3)
    assert float(g(np.array([[2.0, 3.0, 1.5]]))[0]) == 6.5
    for src in ("__import__('os')", "x.real", "lambda: 1", "open('f')", "'a'"):
        with pytest.raises(ExpressionError):
            Expression(src)


def test_output_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(3) == "3"
    assert csv_text(["a", "b"], [[1, 0.5]]) == "a,b\n1,0.5\n"
    txt = json_text({"b": 1, "a": [1.5]})
    assert txt.index('"a"') < txt.index('"b"')
    assert f'"schema_version": "{SCHEMA_VERSION}"' in txt
