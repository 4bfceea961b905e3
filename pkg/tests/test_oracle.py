import numpy as np
import pytest
from oracles import toy_all_trajectories

from mpm.cases import TOY_FORMULA, toy_model
from mpm.dynamics import BuildingTemperature
from mpm.formula import FormulaSpec, holds
from mpm.geometry import Box
from mpm.oracle import (
    GridMonitor,
    OracleTooLarge,
    axis_points,
    compare,
    format_report,
    grid_tables,
    input_grid,
    make_grid,
)
from mpm.precompute import compute_tables


def test_axis_points_and_snap():
    assert np.allclose(axis_points(0, 4, 1, "centers"), [0.5, 1.5, 2.5, 3.5])
    assert np.allclose(axis_points(0, 4, 2, "nodes"), [0, 2, 4])
    with pytest.raises(ValueError):
        axis_points(0, 4, 1.5, "centers")
    g = make_grid(toy_model(), 1.0)
    assert g.shape == (16, 16)
    pts = g.points()
    assert np.array_equal(g.snap(pts), np.arange(256))
    assert g.snap(np.array([[0.4, 0.6], [16.5, 3.0]])).tolist() == [0, -1]


def test_input_grid():
    u = input_grid(Box([-1, 0], [1, 2]), (3, 1))
    assert u.tolist() == [[-1, 1], [0, 1], [1, 1]]


def test_toy_grid_entry_matches_trajectory_enumeration():
    m, spec = toy_model(), FormulaSpec.from_text(TOY_FORMULA, dim=2)
    g = make_grid(m, 1.0)
    X0 = grid_tables(m, spec, g, 3, "feasible").get(0, spec.all_indices)
    Y0 = grid_tables(m, spec, g, 3, "satisfiable").get(0, spec.all_indices)
    trajs = toy_all_trajectories(16, (-1.0, 0.0, 1.0), spec.horizon_T)
    per_start = 3**spec.horizon_T
    rng = np.random.default_rng(5)
    for s in rng.choice(256, 40, replace=False):
        block = trajs[s * per_start:(s + 1) * per_start]
        ok = [not np.isnan(t).any() and holds(spec, t) for t in block]
        assert X0[s] == any(ok), s
        assert Y0[s] == all(ok), s


def test_grid_monitor_verdicts():
    m, spec = toy_model(), FormulaSpec.from_text(TOY_FORMULA, dim=2)
    g = make_grid(m, 1.0)
    X = grid_tables(m, spec, g, 3, "feasible")
    mon = GridMonitor(spec, X)
    # x0 stays at 10.5 and passes through the goal box at instants 2 to 4
    out = [mon.step([10.5, 9.5 + k]) for k in range(6)]
    assert out[0][0] == "FEASIBLE"
    assert out[-1][0] in ("FEASIBLE", "COMPLETED")
    mon = GridMonitor(spec, X)
    assert mon.step([8.5, 6.5])[0] == "VIOLATED"  # inside the forbidden box


def test_compare_reports_inner_table_as_subset():
    m, spec = toy_model(), FormulaSpec.from_text(TOY_FORMULA, dim=2)
    g = make_grid(m, 1.0)
    grid = grid_tables(m, spec, g, 3, "feasible")
    tab = compute_tables(m, spec, 1.0, input_levels=1)
    rows = compare(tab, grid)
    assert rows and sum(r.table_not_oracle for r in rows) == 0
    text = format_report(rows)
    assert text.splitlines()[-1] == "# total table-not-oracle points: 0"


def test_work_limit():
    m = BuildingTemperature()
    spec = FormulaSpec.from_text("G[0,3] box(20,25)", dim=1)
    with pytest.raises(OracleTooLarge):
        grid_tables(m, spec, make_grid(m, 0.01), 11, max_work=1000)
