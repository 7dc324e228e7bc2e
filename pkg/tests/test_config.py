import math

import pytest

from heatblowup.config import ExperimentConfig, parse_config, parse_text
from heatblowup.errors import ConfigError


def test_minimal_file_fills_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# nothing but a comment\n\nn = 201\n")
    cfg = parse_config(path)
    assert cfg.n == 201
    assert cfg == ExperimentConfig(n=201)
    assert cfg.eps_hat1_value == pytest.approx(cfg.T1 / 16)


def test_effective_config_round_trip():
    cfg = parse_text("omega = 0.25, 0.75\nT = 0.2\nstability_sizes = 0, 0.01\ny0 = target\n")
    again = parse_text(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    assert again.digest() == cfg.digest()
    assert again.omega == (0.25, 0.75) and again.stability_sizes == (0.0, 0.01)


def test_aliases_and_T1():
    cfg = parse_text("omega_lo = 0.3\nT1 = 1e-4\n")
    assert cfg.omega == (0.3, 0.8)
    assert cfg.T1 == pytest.approx(1e-4)
    assert cfg.s0 == pytest.approx(-math.log(1e-4))


def test_T1_above_half_T_rejected():
    with pytest.raises(ConfigError, match=r"\(0, T/2\)"):
        parse_text("T = 0.1\nT1 = 0.06\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match=r":3: duplicate key 'a' \(first set on line 1\)"):
        parse_text("a = 0.5\nn = 101\na = 0.4\n")
    with pytest.raises(ConfigError, match="either T1 or s0"):
        parse_text("s0 = 9\nT1 = 1e-4\n")


@pytest.mark.parametrize("text,match", [
    ("colour = blue\n", "unknown key 'colour'"),
    ("n = 10.5\n", "integer"),
    ("n\n", "expected 'key = value'"),
    ("omega = 0.2\n", "two comma-separated"),
    ("a = 0.9\n", "inside omega"),
    ("epsilon = 0\n", "epsilon"),
    ("riccati_method = euler\n", "riccati_method"),
    ("y0 = file\n", "y0_file"),
    ("omega = 0.2, 0.8\nomega_lo = 0.3\n", "both as a pair"),
])
def test_invalid_files(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_text(text, "cfg")


def test_errors_name_the_line():
    with pytest.raises(ConfigError, match=r"cfg:2: p:"):
        parse_text("n = 101\np = two\n", "cfg")


def test_defaults_are_valid():
    cfg = ExperimentConfig().validate()
    assert 0 < cfg.T1 < cfg.T / 2
    assert 0 < cfg.eps_hat1_value < min(cfg.epsilon / 4, cfg.T1 / 4)


def test_digest_ignores_output_directory():
    a = parse_text("out = runs/a\n")
    b = parse_text("out = runs/b\n")
    assert a.digest() == b.digest()
    assert a.digest() != parse_text("n = 201\n").digest()
