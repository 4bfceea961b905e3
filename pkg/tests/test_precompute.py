import gzip
import json
import warnings

import numpy as np
import pytest
from oracles import temperature_tables

from mpm.dynamics import BuildingTemperature, DoubleIntegrator
from mpm.formula import EMPTY, G, FormulaSpec, IndexSet, potential_index_sets
from mpm.geometry import BoxUnion, CeilingError, hausdorff_1d
from mpm.precompute import DigestMismatch, compute_tables, load_table, save_table

S = IndexSet.of


def _iv(ivs):
    if not ivs:
        return BoxUnion.empty(1)
    return BoxUnion([[a] for a, _ in ivs], [[b] for _, b in ivs])


def test_table_keys_are_the_potential_sets(temp_tables, temp_spec):
    X, Y = temp_tables
    for k in range(temp_spec.horizon_T + 1):
        assert X.keys_at(k) == potential_index_sets(temp_spec, k)
        assert Y.keys_at(k) == X.keys_at(k)
    assert X.keys_at(16) == [EMPTY]


def test_temperature_entries_near_closed_form(temp_tables):
    X, Y = temp_tables
    for k in (15, 14, 13, 12):
        e = X.get(k, S([2]))
        assert e.is_subset(_iv([(20, 25)])) and hausdorff_1d(e, _iv([(20, 25)])) <= 0.02
    for mode, table in (("feasible", X), ("satisfiable", Y)):
        exact = temperature_tables(mode)
        for (k, I), e in table.entries.items():
            if k > 15:
                continue
            ref = _iv(exact[(k, frozenset(I))])
            # inner approximation of the exact set
            assert e.is_subset(ref), (mode, k, I)
            if not ref.is_empty() and ref.volume() > 0.5:
                assert hausdorff_1d(e, ref) <= 0.1, (mode, k, I)


def test_satisfiable_entries_inside_feasible(temp_tables):
    X, Y = temp_tables
    for key, y in Y.entries.items():
        assert y.is_subset(X.entries[key])


def test_thin_satisfiable_entry_at_13(temp_tables):
    _, Y = temp_tables
    y13 = Y.get(13, S([2]))
    assert not y13.is_empty() and y13.volume() < 0.11
    assert Y.get(12, S([2])).is_empty()


def test_roundtrip_plain_and_gzip(tmp_path, temp_tables):
    X, _ = temp_tables
    for name in ("t.json", "t.json.gz"):
        p = tmp_path / name
        save_table(X, p)
        back = load_table(p)
        assert back.equals(X)
    with gzip.open(tmp_path / "t.json.gz", "rt") as fh:
        assert json.load(fh)["format"] == "mpm-table/1"


def test_load_warns_on_digest_mismatch(tmp_path, temp_tables):
    X, _ = temp_tables
    p = tmp_path / "t.json"
    save_table(X, p)
    other = FormulaSpec.from_text("G[0,3] box(10,30)", dim=1)
    with pytest.warns(UserWarning):
        t = load_table(p, other)
    assert t.equals(X)
    with pytest.raises(DigestMismatch):
        t.check_against(other)


def test_truncated_file_is_a_parse_error(tmp_path, temp_tables):
    X, _ = temp_tables
    p = tmp_path / "t.json"
    save_table(X, p)
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(ValueError):
        load_table(p)


def test_deterministic_rebuild():
    m = BuildingTemperature()
    spec = FormulaSpec.from_text("F[0,4] box(20,25) && G[5,7] box(18,26)", dim=1)
    a = compute_tables(m, spec, 0.05)
    b = compute_tables(m, spec, 0.05)
    assert a.equals(b)


def test_g_containment_and_refinement_on_double_integrator():
    m = DoubleIntegrator()
    spec = FormulaSpec.from_text("G[0,3] box(1,9,-inf,inf,1,9,-inf,inf) && F[1,4] box(4,6,-inf,inf,4,6,-inf,inf)", dim=4)
    coarse = compute_tables(m, spec, (1.0, 0.5, 1.0, 0.5))
    fine = compute_tables(m, spec, (0.5, 0.25, 0.5, 0.25))
    for (k, I), e in fine.entries.items():
        assert coarse.entries[(k, I)].is_subset(e)
        for i in I:
            s = spec.sub(i)
            if s.op == G and s.a <= k <= s.b:
                pts = np.vstack([e.lo, e.hi]) if len(e) else np.empty((0, 4))
                assert s.left.contains_many(pts).all()


def test_ceiling_and_bad_arguments():
    m = BuildingTemperature()
    spec = FormulaSpec.from_text("F[0,3] box(20,25)", dim=1)
    with pytest.raises(CeilingError):
        compute_tables(m, spec, 1e-6, max_boxes=5)
    with pytest.raises(ValueError):
        compute_tables(m, spec, 0.1, mode="sometimes")
    with pytest.raises(ValueError):
        compute_tables(m, FormulaSpec.from_text("G[0,1] box(0,1,0,1)", dim=2), 0.1)


def test_first_instant_stops_early():
    m = BuildingTemperature()
    spec = FormulaSpec.from_text("F[0,8] box(20,25) && G[10,15] box(20,25)", dim=1)
    t = compute_tables(m, spec, 0.05, first_instant=10)
    assert min(k for k, _ in t.entries) == 10
    full = compute_tables(m, spec, 0.05)
    assert t.get(10, S([2])).equals(full.get(10, S([2])))


def test_infeasible_formula_warns(caplog):
    m = BuildingTemperature()
    spec = FormulaSpec.from_text("G[0,2] box(44,45)", dim=1)
    with warnings.catch_warnings():
        t = compute_tables(m, spec, 0.1)
    assert t.get(0, spec.all_indices).is_empty()
    assert "infeasible" in caplog.text
