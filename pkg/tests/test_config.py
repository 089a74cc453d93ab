import numpy as np
import pytest

from fracpseudo.config import (
    ConfigError,
    load_config,
    parse_config,
    read_sampled_source,
    resolve_coeffs,
)

BASE = """\
mode: direct
alpha: 0.6
spectrum:
  name: bilaplacian_pair
  N: 4
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg.alpha == 0.75 and cfg.T == 1.0 and cfg.regime == "auto"
    assert cfg.formats == ("csv", "json") and cfg.N == 8


def test_full_document():
    cfg = parse_config(BASE + "grid: {J: 16, grading: 0.5}\nquad: {panels: 256, tol: 1.0e-9}\n")
    assert (cfg.J, cfg.grading, cfg.panels, cfg.tol) == (16, 0.5, 256, 1e-9)
    assert cfg.line("spectrum", "N") == 5


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        (BASE + "gird: {J: 4}\n", 6, "unknown key 'gird'"),
        (BASE + "grid:\n  J: 4\n  step: 2\n", 8, "unknown key 'grid.step'"),
        ("alpha: 1.5\n", 1, "alpha must lie in (0, 1]"),
        ("alpha: fast\n", 1, "alpha must be a number"),
        ("alpha: 0.5\nalpha: 0.6\n", 2, "duplicate key"),
        ("mode: backwards\n", 1, "mode must be one of"),
        (BASE + "regime: case_III\n", 6, "regime must be"),
        (BASE + "data:\n  phi: [1, 2]\n", 7, "exactly N=4"),
        (BASE + "data:\n  phi: {power: 1, exp: 2}\n", 7, "data.phi.exp"),
        (BASE + "data:\n  source: {kind: wave}\n", 7, "data.source.kind"),
        (BASE + "data:\n  source:\n    kind: separable\n    coeffs: 1\n    profile: {d: 1}\n", 10,
         "data.source.profile.d"),
        (BASE + "verify: {levels: [8, 16]}\n", 6, "at least 3"),
        (BASE + "output: {formats: [xml]}\n", 6, "unknown output format"),
        ("alpha: [1\n", 2, "invalid YAML"),
    ],
)
def test_errors_are_line_anchored(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}: ")
    assert fragment in str(err.value)


def test_forced_case_I_needs_alpha_above_half():
    with pytest.raises(ConfigError, match=r"line 2: regime case_I requires 1/2 < alpha"):
        parse_config("alpha: 0.3\nregime: case_I\n")


def test_coefficient_specs(tmp_path):
    (tmp_path / "c.csv").write_text("mode_index,value\n2,0.5\n1,1.5\n3,-1\n4,0\n")
    cfg = parse_config(BASE, tmp_path)
    k = np.arange(1, 5.0)
    np.testing.assert_allclose(resolve_coeffs(cfg, {"power": -2, "scale": 3}, ()), 3 * k**-2)
    np.testing.assert_allclose(resolve_coeffs(cfg, 2.0, ()), 2.0)
    np.testing.assert_allclose(resolve_coeffs(cfg, {"file": "c.csv"}, ()), [1.5, 0.5, -1, 0])
    with pytest.raises(ConfigError, match="no coefficient for mode"):
        (tmp_path / "short.csv").write_text("1,1\n")
        resolve_coeffs(cfg, {"file": "short.csv"}, ())


def test_sampled_source_file(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("mode_index,time,value,derivative\n1,1,2,0\n1,0,1,0\n2,0,0,1\n2,1,1,1\n")
    (t1, v1, d1), (t2, v2, d2) = read_sampled_source(p, 2)
    assert t1.tolist() == [0, 1] and v1.tolist() == [1, 2] and d2.tolist() == [1, 1]
    p.write_text("1,0,1\n1,1,2\n")
    with pytest.raises(ConfigError, match="no samples for mode 2"):
        read_sampled_source(p, 2)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/exp.yaml")
