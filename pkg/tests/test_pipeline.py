import json

import numpy as np
import pytest

from lagfsi.config import load_reference, parse_config_text
from lagfsi.pipeline import EXIT_OK, loglog_slope, run_pipeline, time_grid

ZERO = """
geometry.container_radius = 1.0
geometry.solids = 0 0 0.4
geometry.h = 0.25
numerics.dt = 0.01
numerics.T = 0.05
"""


def test_time_grid():
    t = time_grid(0.05, 0.005)
    assert len(t) == 11 and t[-1] == 0.05


def test_loglog_slope():
    x = np.array([1e-2, 1e-3, 1e-4])
    assert loglog_slope(x, 3 * x**1.5) == pytest.approx(1.5)


def test_zero_data_run(tmp_path):
    res = run_pipeline(parse_config_text(ZERO), tmp_path)
    assert res.status == EXIT_OK
    lines = (tmp_path / "ledger.csv").read_text().splitlines()
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    cols = lines[1].split(",")
    for c in ("kinetic", "elastic", "viscous_dissipation", "penalty_dissipation", "offset_work",
              "external_work", "defect"):
        assert np.all(rows[:, cols.index(c)] == 0)


@pytest.mark.slow
def test_reference_run_outputs(tmp_path):
    cfg = load_reference()
    res = run_pipeline(cfg, tmp_path, emit_iterates=tmp_path / "it")
    assert res.status == EXIT_OK
    doc = json.loads((tmp_path / "fixed_point.json").read_text())
    assert doc["config_hash"] == cfg.hash
    assert doc["fixed_point"]["converged"]
    assert max(doc["fixed_point"]["contraction_ratios"]) < 1
    assert all(doc["guards"].values())
    # every output file carries the config hash
    for f in ("ledger.csv", "compat.csv", "snapshot_final.txt", "it/iterate_000.csv"):
        head = (tmp_path / f).read_text().splitlines()[:2]
        assert any(f"config_hash={cfg.hash}" in line for line in head), f
