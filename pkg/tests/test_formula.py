import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpm.formula import (
    EMPTY,
    G,
    TRUE,
    UNTIL,
    And,
    BoxRegion,
    FormulaError,
    FormulaSpec,
    IndexSet,
    Not,
    Or,
    Predicate,
    admissible_region,
    consistent_region,
    conjuncts,
    holds,
    is_potential,
    normalize,
    parse_formula,
    parse_index_set,
    potential_index_sets,
    region_from_dict,
    satisfaction_set,
    successor_sets,
)

S = IndexSet.of


# ---------------------------------------------------------------------------
# parsing


def test_parse_temperature_formula():
    spec = FormulaSpec.from_text("F[0,8] box(20,25) && G[10,15] box(20,25)", dim=1)
    assert spec.n_sub == 2
    s1, s2 = spec.subformulae
    assert (s1.op, s1.a, s1.b) == (UNTIL, 0, 8)
    assert s1.left is TRUE and s1.right == BoxRegion((20.0,), (25.0,))
    assert (s2.op, s2.a, s2.b) == (G, 10, 15)
    assert spec.horizon_T == 15 and spec.start_S == 0


def test_smallest_formula():
    spec = FormulaSpec.from_text("G[0,0](true)")
    assert spec.n_sub == 1
    assert spec.sub(1).window == (0, 0) and spec.sub(1).left is TRUE


def test_standard_until_splits_into_two():
    spec = FormulaSpec.from_text("(x0 >= 1) U[8,14] (x0 >= 3)", dim=1)
    ops = sorted((s.op, s.a, s.b) for s in spec.subformulae)
    assert ops == [(G, 0, 8), (UNTIL, 8, 14)]


def test_linear_predicates_and_bindings():
    ast = parse_formula("c = 2*x0 - x1 + 1 >= 0; G[0,3] c | !box(0,1,0,1)", dim=2)
    region = ast.conjuncts[0].left
    assert isinstance(region, Or)
    assert region.contains(np.array([0.0, 0.5])) is not None
    pts = np.array([[0.5, 0.5], [5.0, 20.0], [3.0, 3.0]])
    expect = [(2 * x - y + 1 >= 0) or not (0 <= x <= 1 and 0 <= y <= 1) for x, y in pts]
    assert region.contains_many(pts).tolist() == expect


def test_index_sorting_is_stable():
    spec = FormulaSpec.from_text("G[3,5] true && F[1,4] box(0,1) && G[1,2] box(0,2)", dim=1)
    assert [(s.op, s.a) for s in spec.subformulae] == [(UNTIL, 1), (G, 1), (G, 3)]


@pytest.mark.parametrize(
    "text",
    [
        "G[5,2] true",  # reversed window
        "G[-1,2] true",  # negative bound
        "G[0,2] x0*x1 >= 0",  # nonlinear
        "G[0,2] box(0,1",  # unbalanced
        "G[0,2] x0 >= 0 &&",  # trailing operator
        "H[0,2] true",  # unknown operator
    ],
)
def test_parse_errors(text):
    with pytest.raises(FormulaError):
        FormulaSpec.from_text(text, dim=2)


def test_parse_error_reports_position():
    with pytest.raises(FormulaError) as info:
        FormulaSpec.from_text("G[0,2] true &&\n  G[0,1] $", dim=1)
    assert info.value.line == 2


def test_dimension_mismatch():
    with pytest.raises(FormulaError):
        FormulaSpec.from_text("G[0,2] box(0,1,0,1)", dim=3)


def test_region_dict_roundtrip():
    r = And((Predicate((1.0, -2.0), 0.5), Not(BoxRegion((0.0, 0.0), (1.0, 2.0))), Or((TRUE, BoxRegion((1.0, 1.0), (2.0, 2.0))))))
    assert region_from_dict(r.to_dict()) == r


def test_digest_is_stable_and_sensitive():
    a = FormulaSpec.from_text("F[0,8] box(20,25) && G[10,15] box(20,25)", dim=1)
    b = FormulaSpec.from_text("F[0,8]   box(20,25)&&G[10,15] box(20,25)", dim=1)
    c = FormulaSpec.from_text("F[0,8] box(20,25) && G[10,15] box(20,24)", dim=1)
    assert a.digest() == b.digest() != c.digest()


def test_index_set_basics():
    I = S([2, 3, 5])
    assert list(I) == [2, 3, 5] and len(I) == 3 and 3 in I and 4 not in I
    assert str(I) == "{2,3,5}" and str(EMPTY) == "{}"
    assert parse_index_set("{2,3,5}") == I and parse_index_set("{}") == EMPTY
    assert (I - S([3])) == S([2, 5]) and S([2]).issubset(I)
    with pytest.raises(ValueError):
        IndexSet.of([0])


# ---------------------------------------------------------------------------
# combinatorics on the five-conjunct example


def test_example_has_five_conjuncts(example_spec):
    assert example_spec.n_sub == 5
    assert example_spec.all_indices == S([1, 2, 3, 4, 5])
    assert [s.op for s in example_spec.subformulae] == [G, G, UNTIL, G, UNTIL]


def test_example_index_sets(example_spec):
    assert potential_index_sets(example_spec, 8) == [S([4, 5]), S([3, 4, 5])]
    assert potential_index_sets(example_spec, 12) == [EMPTY, S([3]), S([5]), S([3, 5])]
    assert potential_index_sets(example_spec, 16) == [EMPTY]
    # index 3 (F[5,15]) is already active at 7, so it may have been discharged
    assert potential_index_sets(example_spec, 7) == [S([2, 4, 5]), S([2, 3, 4, 5])]


def test_example_successors_and_satisfaction(example_spec):
    I = S([3, 4, 5])
    succ = successor_sets(example_spec, I, 11)
    assert succ == [EMPTY, S([3]), S([5]), S([3, 5])]
    assert [satisfaction_set(I, J, example_spec) for J in succ] == [S([3, 5]), S([5]), S([3]), EMPTY]
    assert successor_sets(example_spec, S([3]), 15) == [EMPTY]
    assert successor_sets(example_spec, S([4, 5]), 11) == [EMPTY, S([5])]


def test_example_consistent_regions(example_spec):
    sp = example_spec
    HU1, HG, HF, HU2 = (sp.sub(5).left, sp.sub(4).left, sp.sub(3).right, sp.sub(5).right)
    I = S([3, 4, 5])
    want = {
        EMPTY: {HU1, HU2, HF, HG},
        S([3]): {HU1, HU2, Not(HF), HG},
        S([5]): {HF, HU1, Not(HU2), HG},
        S([3, 5]): {HU1, Not(HU2), Not(HF), HG},
    }
    for J, parts in want.items():
        assert conjuncts(consistent_region(sp, 11, I, J)) == frozenset(parts)


def test_successor_of_non_potential_set_rejected(example_spec):
    with pytest.raises(ValueError):
        successor_sets(example_spec, S([1]), 8)


def _example_like_specs():
    ops = st.sampled_from(["G", "F"])
    win = st.tuples(st.integers(0, 6), st.integers(0, 4)).map(lambda t: (t[0], t[0] + t[1]))
    return st.lists(st.tuples(ops, win), min_size=1, max_size=5).map(
        lambda items: FormulaSpec.from_text(
            " && ".join(f"{o}[{a},{b}] box({i},{i + 2})" for i, (o, (a, b)) in enumerate(items)), dim=1
        )
    )


@settings(max_examples=60, deadline=None)
@given(_example_like_specs())
def test_successors_are_potential_and_consistent_regions_partition(spec):
    T = spec.horizon_T
    pts = np.linspace(-1, 12, 131)[:, None]
    for k in range(T + 1):
        for I in potential_index_sets(spec, k):
            assert is_potential(spec, I, k)
            succ = successor_sets(spec, I, k)
            assert succ
            for J in succ:
                assert J in potential_index_sets(spec, k + 1) if k < T else J == EMPTY
            # consistent regions are disjoint and cover the admissible region
            masks = np.array([consistent_region(spec, k, I, J).contains_many(pts) for J in succ])
            adm = admissible_region(spec, k, I).contains_many(pts)
            assert np.array_equal(masks.any(axis=0), adm)
            assert np.all(masks.sum(axis=0) <= 1)


# ---------------------------------------------------------------------------
# normalization preserves meaning on finite traces


def test_normalization_matches_original_semantics():
    text = "G[1,3] box(0,2) && F[0,4] box(2,3) && (x0 <= 2) U[2,4] box(1,1.5)"
    ast = parse_formula(text, dim=1)
    spec = normalize(ast)
    values = [0.5, 1.2, 2.5]
    for trace in itertools.product(values, repeat=5):
        X = np.array(trace)[:, None]
        assert holds(ast, X) == holds(spec, X)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-1, 4), min_size=8, max_size=8),
    st.integers(0, 3), st.integers(0, 3), st.integers(0, 3),
)
def test_normalization_property(xs, a, w, a2):
    text = f"(x0 >= 0) U[{a},{a + w}] (x0 >= 2) && F[{a2},{a2 + 1}] box(1,3) && G[0,{w}] x0 <= 3.5"
    ast = parse_formula(text, dim=1)
    X = np.array(xs)[:, None]
    assert holds(ast, X) == holds(normalize(ast), X)
