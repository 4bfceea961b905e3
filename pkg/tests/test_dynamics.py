import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpm.dynamics import (
    AffineSystem,
    BuildingTemperature,
    DoubleIntegrator,
    InputError,
    Spacecraft,
    Trace,
    Unicycle,
    make_controller,
    model_from_dict,
)
from mpm.geometry import Box

MODELS = [BuildingTemperature(), DoubleIntegrator(), Unicycle(), Spacecraft()]


def test_temperature_step_closed_form():
    m = BuildingTemperature()
    assert m.step([15.0], [1.0])[0] == pytest.approx(0.86 * 15 + 4.4)
    assert m.step([15.0], [0.0])[0] == pytest.approx(0.94 * 15)
    tr = m.simulate([15.0], "constant:1", 3)
    np.testing.assert_allclose(tr.states[:, 0], [15, 17.3, 19.278, 20.97908])


def test_double_integrator_matrices():
    m = DoubleIntegrator()
    assert np.allclose(m.step([0, 0, 0, 0], [0, 0]), 0)
    x = np.array([1.0, 0.5, 2.0, -1.0])
    want = [1 + 0.25 + 0.125, 0.5 + 0.5, 2 - 0.5 - 0.125, -1 - 0.5]
    assert np.allclose(m.step(x, [1, -1]), want)


def test_unicycle_time_varying_inputs():
    m = Unicycle()
    assert m.input_domain(10).hi[0] == 10 and m.input_domain(11).hi[0] == 3
    with pytest.raises(InputError):
        m.step([50, 50, 0], [5, 0], k=11)
    x = m.step([50, 50, 0.0], [2.0, 0.1], k=0)
    assert np.allclose(x, [51.0, 50.0, 0.05])


def test_step_rejects_inputs_outside_domain():
    with pytest.raises(InputError):
        BuildingTemperature().step([20.0], [1.5])


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_enclosure_contains_sampled_images(model, rng):
    d = model.state_domain
    for _ in range(200):
        a, b = rng.uniform(d.lo, d.hi), rng.uniform(d.lo, d.hi)
        bx = Box(np.minimum(a, b), np.minimum(a, b) + 0.1 * np.abs(a - b))
        ub = model.input_domain(0)
        c, e = rng.uniform(ub.lo, ub.hi), rng.uniform(ub.lo, ub.hi)
        bu = Box(np.minimum(c, e), np.maximum(c, e))
        enc = model.image_enclosure(bx, bu)
        xs = rng.uniform(bx.lo, bx.hi, (64, model.n))
        us = rng.uniform(bu.lo, bu.hi, (64, model.m))
        img = model.f(xs, us)
        assert np.all(img >= enc.lo - 1e-9) and np.all(img <= enc.hi + 1e-9)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_point_enclosure_is_the_step(model, rng):
    d = model.state_domain
    x = rng.uniform(d.lo, d.hi)
    u = model.input_domain(0).center()
    enc = model.image_enclosure(Box(x, x), Box(u, u))
    np.testing.assert_allclose(enc.lo, model.step(x, u), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(enc.hi, model.step(x, u), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_enclosure_shrinks_under_refinement(model):
    d = model.state_domain
    c = 0.5 * (d.lo + d.hi)
    w = 0.2 * (d.hi - d.lo)
    ub = model.input_domain(0)
    prev = None
    for _ in range(6):
        enc = model.image_enclosure(Box(c - w, c + w), ub)
        width = enc.hi - enc.lo
        if prev is not None:
            assert np.all(width <= prev + 1e-9)
        prev = width
        w = w / 2


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_numba_and_numpy_enclosures_agree(model, rng):
    d = model.state_domain
    lo = rng.uniform(d.lo, d.hi, (100, model.n))
    hi = np.minimum(lo + 0.05 * (d.hi - d.lo), d.hi)
    ub = model.input_domain(0)
    ulo = np.broadcast_to(ub.lo, (100, model.m))
    uhi = np.broadcast_to(ub.hi, (100, model.m))
    ref_lo, ref_hi = model.enclose(lo, hi, ulo, uhi)
    olo, ohi = np.empty(model.n), np.empty(model.n)
    p = model.packed()
    for i in range(100):
        model.nb_enclose(lo[i], hi[i], ub.lo, ub.hi, p, olo, ohi)
        np.testing.assert_allclose(olo, ref_lo[i], rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(ohi, ref_hi[i], rtol=1e-12, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=4, max_size=4),
    st.lists(st.floats(-1, 1), min_size=2, max_size=2),
    st.floats(0, 3),
)
def test_affine_enclosure_is_tight_hull(A_flat, b, w):
    A = np.array(A_flat).reshape(2, 2)
    m = AffineSystem(A, np.array(b).reshape(2, 1), [0.5, -0.5], Box([-5, -5], [5, 5]), Box([-1], [1]))
    bx = Box([-w, 0], [w, 1])
    enc = m.image_enclosure(bx, Box([-1], [1]))
    corners = np.array([[x, y, u] for x in (-w, w) for y in (0, 1) for u in (-1, 1)])
    img = m.f(corners[:, :2], corners[:, 2:])
    np.testing.assert_allclose(enc.lo, img.min(axis=0), atol=1e-9)
    np.testing.assert_allclose(enc.hi, img.max(axis=0), atol=1e-9)


def test_image_bound_contains_domain_and_image():
    m = BuildingTemperature()
    b = m.image_bound()
    assert b.lo[0] <= 0 and b.hi[0] >= 45


def test_trace_csv_roundtrip_and_errors():
    tr = Trace(np.array([[1.0, 2.0], [3.0, 4.5]]), start=3)
    back = Trace.from_csv(tr.to_csv())
    assert back.start == 3 and np.array_equal(back.states, tr.states)
    assert tr.to_csv().splitlines()[0] == "k,x0,x1"
    with pytest.raises(ValueError):
        Trace.from_csv("k,x0\n0,1\n2,3\n")
    with pytest.raises(ValueError):
        Trace.from_csv("t,x0\n0,1\n")


def test_random_controller_is_deterministic():
    m = DoubleIntegrator()
    a = m.simulate([5, 0, 5, 0], "random:11", 20)
    b = m.simulate([5, 0, 5, 0], "random:11", 20)
    assert np.array_equal(a.states, b.states)
    assert len(m.simulate([5, 0, 5, 0], "random:11", 0)) == 1


def test_file_controller(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("k,u0\n0,1\n1,0\n")
    tr = BuildingTemperature().simulate([15.0], f"file:{p}", 2)
    assert tr.states[2, 0] == pytest.approx(0.94 * 17.3)
    with pytest.raises(ValueError):
        make_controller("bogus:1", BuildingTemperature())


def test_model_from_dict_and_digest():
    cfg = {
        "model": "affine",
        "affine": {"A": [[1, 0], [0, 1]], "B": [[1], [0]], "c": [0, 1]},
        "state_domain": {"lo": [0, 0], "hi": [16, 16]},
        "input_domain": {"lo": [-1], "hi": [1]},
    }
    m = model_from_dict(cfg)
    assert (m.n, m.m) == (2, 1)
    assert np.allclose(m.step([3, 4], [1]), [4, 5])
    again = model_from_dict(json.loads(json.dumps(m.to_dict())))
    assert again.digest() == m.digest()
    u = model_from_dict({"model": "unicycle", "input_domain": [{"until_k": 10, "box": {"lo": [-10, -0.3], "hi": [10, 0.3]}},
                                                              {"box": {"lo": [-3, -0.3], "hi": [3, 0.3]}}]})
    assert u.digest() == Unicycle().digest()
    assert model_from_dict({"model": "building_temperature", "params": {"alpha_h": 0.1}}).digest() != BuildingTemperature().digest()
    with pytest.raises(ValueError):
        model_from_dict({"model": "nope"})
    with pytest.raises(ValueError):
        model_from_dict({"model": "spacecraft", "params": {"mass": 3}})


def test_simulate_rejects_start_outside_domain():
    with pytest.raises(ValueError):
        BuildingTemperature().simulate([50.0], "constant:0", 2)
