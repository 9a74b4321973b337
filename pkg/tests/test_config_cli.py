import json

import pytest

from lagfsi.cli import main
from lagfsi.config import ConfigError, format_config, load_reference, parse_config_text, reference_config_path

MINIMAL = """
# smallest accepted file
geometry.container_radius = 1.0
geometry.solids = 0 0 0.4
numerics.dt = 0.01
numerics.T = 0.05
"""


def test_minimal_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.numerics.eps == 1e-4
    assert cfg.numerics.n is None
    assert cfg.material.nu == 0.01
    assert cfg.numerics.integrator == "backward-euler"
    assert cfg.geometry.solids == ((0.0, 0.0, 0.4),)


def test_negative_nu_named():
    with pytest.raises(ConfigError, match="material.nu"):
        parse_config_text(MINIMAL + "material.nu = -1\n")


def test_dt_exceeds_T_named():
    with pytest.raises(ConfigError, match=r"numerics.dt must be smaller than numerics.T \(dt=0.1, T=0.05\)"):
        parse_config_text(MINIMAL.replace("numerics.dt = 0.01", "numerics.dt = 0.1"))


def test_unknown_and_missing_keys_all_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("foo.bar = 1\nnumerics.T = 1\n")
    msgs = exc.value.problems
    assert "unknown key foo.bar" in msgs
    assert "missing required key geometry.solids" in msgs
    assert "missing required key numerics.dt" in msgs


def test_format_round_trip():
    cfg = load_reference()
    again = parse_config_text(format_config(cfg))
    assert again == cfg and again.hash == cfg.hash


def test_hash_ignores_output_dir():
    a = parse_config_text(MINIMAL)
    b = parse_config_text(MINIMAL + "output.dir = elsewhere\n")
    c = parse_config_text(MINIMAL + "numerics.eps = 1e-3\n")
    assert a.hash == b.hash != c.hash


def test_cli_check_compat(capsys):
    assert main(["check-compat", str(reference_config_path())]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("# config_hash=") and out[1] == "residual,value,tolerance,ok"
    assert len(out) == 8


def test_cli_config_error(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("material.nu = -1\n")
    with pytest.raises(SystemExit) as exc:
        main(["run", str(p)])
    assert exc.value.code == 2
    assert "material.nu" in capsys.readouterr().err


def test_cli_geometry_error(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text(MINIMAL.replace("0 0 0.4", "0 0 1.1"))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    doc = json.loads((tmp_path / "o" / "fixed_point.json").read_text())
    assert "[geometry]" in doc["messages"][0]


def test_cli_sweep_values(capsys):
    assert main(["sweep", "--param", "eps", str(reference_config_path()), "--values", "1e-3,1e-4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "eps,div_residual,max_div_residual" and len(lines) == 4
