import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierhomog import coeff
from hierhomog.coeff import (Constant, Laminate, Paper4, Tabulated, lipschitz_estimate,
                             model_from_dict)

unit = st.floats(0.0, 1.0, allow_nan=False)
ANALYTIC = [Paper4(a=1.0), Paper4(a=0.1), Constant(2.0, 2.0, 3.0), Laminate("cos_y1"),
            Laminate("cos_y2", q=2.0)]


def test_paper4_point_values():
    m = Paper4(a=1.0)
    y = np.array([0.25, 0.25])
    assert coeff.eval(m, "K1", (0.0,), y) == pytest.approx(3.0, abs=1e-15)
    assert coeff.eval(m, "Q", (1.0,), y) == pytest.approx(5.0, abs=1e-15)


def test_constant_value():
    m = Constant(k1=2.0, k2=2.0, q=3.0)
    assert coeff.eval(m, "K1", (0.3, 0.9), np.array([0.1, 0.7])) == 2.0
    assert coeff.eval(m, "Q", (0.3,), np.zeros((4, 5, 2))).shape == (4, 5)


@settings(max_examples=50, deadline=None)
@given(x=unit, y1=unit, y2=unit, a=st.floats(0.0, 1.0))
def test_paper4_formula(x, y1, y2, a):
    m = Paper4(a=a)
    y = np.array([y1, y2])
    s1, c1 = np.sin(2 * np.pi * y1), np.cos(2 * np.pi * y1)
    s2, c2 = np.sin(2 * np.pi * y2), np.cos(2 * np.pi * y2)
    assert m.evaluate("K1", x, y) == pytest.approx((2 - a * x) * c1 * s2 + 3, abs=1e-14)
    assert m.evaluate("K2", x, y) == pytest.approx((2 - a * x) * s1 * c2 + 3, abs=1e-14)
    assert m.evaluate("Q", x, y) == pytest.approx((1 + a * x) * s1 * s2 + 3, abs=1e-14)


@pytest.mark.parametrize("model", ANALYTIC, ids=repr)
def test_positivity_random_samples(model):
    rng = np.random.default_rng(1)
    xs = rng.uniform(0, 1, size=(100, 2))
    ys = rng.uniform(0, 1, size=(100, 100, 2))
    c = model.coercivity
    assert c > 0
    for name in ("K1", "K2", "Q"):
        vals = np.concatenate([model.evaluate(name, x, y) for x, y in zip(xs, ys)])
        assert vals.size == 10_000
        assert vals.min() >= c


@pytest.mark.parametrize("model", ANALYTIC, ids=repr)
@settings(max_examples=25, deadline=None)
@given(x=unit, t=unit)
def test_periodicity(model, x, t):
    for name in coeff.FIELDS:
        left = model.evaluate(name, (x,), np.array([0.0, t]))
        right = model.evaluate(name, (x,), np.array([1.0, t]))
        bottom = model.evaluate(name, (x,), np.array([t, 0.0]))
        top = model.evaluate(name, (x,), np.array([t, 1.0]))
        assert abs(left - right) <= 1e-14
        assert abs(bottom - top) <= 1e-14


def test_capacities_default_to_one():
    m = Paper4()
    assert np.all(m.evaluate("C11", 0.5, np.zeros((3, 2))) == 1.0)
    assert np.all(Paper4(c22=2.5).evaluate("C22", 0.5, np.zeros((3, 2))) == 2.5)


def test_unknown_field_rejected():
    with pytest.raises(ValueError):
        Paper4().evaluate("K3", 0.0, np.zeros(2))


def test_lipschitz_constant_model():
    assert lipschitz_estimate(Constant(2.0, 2.0, 3.0)) == 0.0


def test_lipschitz_paper4():
    est = lipschitz_estimate(Paper4(a=1.0))
    assert 1.0 <= est <= 2.0
    # the slope in x1 is a * max|cos sin| = a, attained on the sample lattice
    assert est == pytest.approx(1.0, rel=1e-12)


def test_lipschitz_linear_in_a():
    assert lipschitz_estimate(Paper4(a=0.1)) == pytest.approx(
        0.1 * lipschitz_estimate(Paper4(a=1.0)), rel=1e-12)


def _tabulated_from(model, nx=5, ny=8):
    xg = np.linspace(0, 1, nx)
    t = np.arange(ny) / ny
    y = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    values = {n: np.array([model.evaluate(n, (x,), y) for x in xg]) for n in ("K1", "K2", "Q")}
    return Tabulated(xg, values), values


def test_tabulated_reproduces_samples():
    tab, values = _tabulated_from(Paper4(a=1.0))
    y = np.array([[2 / 8, 3 / 8], [0.0, 7 / 8]])
    for name in ("K1", "Q"):
        got = tab.evaluate(name, (0.5,), y)
        np.testing.assert_allclose(got, [values[name][2, 2, 3], values[name][2, 0, 7]],
                                   rtol=1e-13)
    assert tab.coercivity == pytest.approx(min(v.min() for v in values.values()))


def test_tabulated_wraps_and_checks_range():
    tab, _ = _tabulated_from(Paper4(a=1.0))
    a = tab.evaluate("K2", (0.3,), np.array([0.0, 0.4]))
    b = tab.evaluate("K2", (0.3,), np.array([1.0, 0.4]))
    assert a == pytest.approx(b, abs=1e-14)
    with pytest.raises(ValueError):
        tab.evaluate("K1", (1.5,), np.zeros(2))


def test_tabulated_rejects_nonpositive():
    with pytest.raises(ValueError):
        Tabulated([0.0, 1.0], {n: np.zeros((2, 2, 2)) for n in ("K1", "K2", "Q")})


def test_model_from_dict():
    assert model_from_dict({"kind": "paper4", "a": 0.1}) == Paper4(a=0.1)
    assert model_from_dict({"kind": "constant", "k1": 2}).k1 == 2
    assert model_from_dict(Laminate("cos_y2").to_dict()) == Laminate("cos_y2")
    with pytest.raises(ValueError):
        model_from_dict({"kind": "nope"})
    with pytest.raises(ValueError):
        model_from_dict({"kind": "paper4", "b": 1})
