import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weylforge.chart import OrientedChart, diagonal_metric
from weylforge.forms import (TensorValue, exterior_d, hodge_star, musical_value, sd_asd_split,
                             two_form_inner, volume_tensor, wedge)
from weylforge.jets import Jet, contract, inverse

COEF = st.lists(st.floats(-2, 2), min_size=6, max_size=6)


def chart3():
    return OrientedChart("c3", ("x", "y", "z"), ((0.1, 1), (0.1, 1), (0.1, 1)),
                         diagonal_metric(["1", "1", "1"]))


def one_form(c):
    a, b, cc, d, e, f = c
    return ["%r*sin(y*z) + %r*x^2" % (a, b), "%r*exp(x - z)" % cc, "%r*x*y*z + %r*cos(x) + %r" % (d, e, f)]


@given(COEF)
def test_d_squared_vanishes_on_one_forms(c):
    p = np.array([[0.3, 0.5, 0.7], [0.9, 0.2, 0.4]])
    alpha = chart3().field_jet(one_form(c), p, 3)
    dd = exterior_d(exterior_d(alpha))
    assert np.max(np.abs(dd.value)) < 1e-10


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_d_squared_vanishes_on_functions(a, b):
    p = np.array([[0.3, 0.5, 0.7]])
    f = chart3().scalar_jet("%r*x*y^2*z + exp(%r*z)*sin(x)" % (a, b), p, 3)
    assert np.max(np.abs(exterior_d(exterior_d(f)).value)) < 1e-10


def test_d_of_xdy_is_dx_wedge_dy():
    p = np.array([[0.4, 0.6, 0.8]])
    a = chart3().field_jet(["0", "x", "0"], p, 1)
    da = exterior_d(a).value[0]
    assert da[0, 1] == pytest.approx(1.0) and da[1, 0] == pytest.approx(-1.0)


def random_metric(rng, n):
    m = rng.normal(size=(n, n))
    return m @ m.T + n * np.eye(n)


def random_form(rng, n, k):
    t = rng.normal(size=(n,) * k) if k else np.array(rng.normal())
    if k == 2:
        t = t - t.T
    if k == 3:
        from weylforge.forms import antisymmetrize
        t = antisymmetrize(Jet([t[None]], n)).value[0]
    return t


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_paper_star_is_signed_tilde_star(rng, n, k):
    if k > n:
        return
    g = random_metric(rng, n)
    a = Jet([random_form(rng, n, k)[None]], n)
    G = Jet([g[None]], n)
    tilde = hodge_star(a, G, 1, "tilde").value
    paper = hodge_star(a, G, 1, "paper").value
    assert np.array_equal(paper, tilde * (-1) ** (k * (k - 1) // 2))


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("k", [1, 2])
def test_tilde_star_defining_identity(rng, n, k):
    g = random_metric(rng, n)
    G = Jet([g[None]], n)
    a = Jet([random_form(rng, n, k)[None]], n)
    b = Jet([random_form(rng, n, k)[None]], n)
    lhs = wedge(a, hodge_star(b, G, 1, "tilde"))
    vol = volume_tensor(G, 1)
    gi = inverse(G)
    if k == 1:
        inner = contract("ij,i->j", gi, a)
        inner = contract("j,j->", inner, b)
    else:
        inner = two_form_inner(a, b, gi)
    assert np.allclose(lhs.value, (inner * vol).value, atol=1e-12)


@pytest.mark.parametrize("n,k", [(3, 1), (3, 2), (4, 1), (4, 2), (4, 3)])
def test_star_squared(rng, n, k):
    g = random_metric(rng, n)
    G = Jet([g[None]], n)
    a = Jet([random_form(rng, n, k)[None]], n)
    twice = hodge_star(hodge_star(a, G, 1, "tilde"), G, 1, "tilde")
    assert np.allclose(twice.value, (-1) ** (k * (n - k)) * a.value)


def test_orientation_flips_star(rng):
    g = Jet([random_metric(rng, 3)[None]], 3)
    a = Jet([random_form(rng, 3, 1)[None]], 3)
    assert np.allclose(hodge_star(a, g, -1).value, -hodge_star(a, g, 1).value)


def test_selfdual_split_in_four_dimensions(rng):
    g = Jet([random_metric(rng, 4)[None]], 4)
    a = Jet([random_form(rng, 4, 2)[None]], 4)
    for conv in ("paper", "tilde"):
        sd, asd = sd_asd_split(a, g, 1, conv)
        assert np.allclose((sd + asd).value, a.value)
        assert np.allclose(hodge_star(sd, g, 1, conv).value, sd.value)
        assert np.allclose(hodge_star(asd, g, 1, conv).value, -asd.value)
    # the two conventions swap the labels
    sd_p, _ = sd_asd_split(a, g, 1, "paper")
    _, asd_t = sd_asd_split(a, g, 1, "tilde")
    assert np.allclose(sd_p.value, asd_t.value)


def test_standard_selfdual_form():
    g = Jet([np.eye(4)[None]], 4)
    w = np.zeros((4, 4))
    w[0, 1], w[1, 0], w[2, 3], w[3, 2] = 1, -1, 1, -1  # dx0^dx1 + dx2^dx3
    s = hodge_star(Jet([w[None]], 4), g, 1, "paper").value[0]
    # e01 + e23 is selfdual for the tilde star and antiselfdual for the paper star
    t = hodge_star(Jet([w[None]], 4), g, 1, "tilde").value[0]
    assert np.allclose(t, w)
    assert np.allclose(s, -w)


def test_musical_weight_bookkeeping():
    g = np.diag([4.0, 1.0, 1.0])[None]
    tv = TensorValue(np.array([[1.0, 2.0, 3.0]]), ("down",), weight=0)
    up = musical_value(tv, g, 0, "raise")
    assert up.variance == ("up",) and up.weight == -2
    assert np.allclose(up.components, [[0.25, 2.0, 3.0]])
    with pytest.raises(ValueError):
        musical_value(up, g, 0, "raise")
