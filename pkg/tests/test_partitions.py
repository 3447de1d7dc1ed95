from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.interpolate import BSpline

from irframes.errors import ConstructionError, RPUHoleError
from irframes.gallery import bspline_window, spiral_matrix
from irframes.geometry import AnnulusSector, Box, Covering, SpiralSector, covering_index, symmetric
from irframes.partitions import (
    RPU,
    BSplineWindow,
    DilatedWindow,
    IndicatorWindow,
    SmoothBump,
    SpiralBump,
    Window,
    bspline_eval,
    bspline_fourier,
    build_dilation_rpu,
    level_set,
    normalize_rpu,
    rpu_bounds,
    rpu_sum_squares,
)


def cardinal_bspline(n):
    # independent reference: scipy basis element on integer knots
    return BSpline.basis_element(np.arange(n + 2), extrapolate=False)


def ref_beta(n, t):
    v = cardinal_bspline(n)(np.asarray(t, dtype=float))
    return np.nan_to_num(v)


def dyadic_indicator_rpu(j_range=(-6, 6)):
    Q = symmetric(Box([0.5], [1.0]))
    js = list(range(j_range[0], j_range[1] + 1))
    members = [DilatedWindow(IndicatorWindow(Q), [[2.0**-j]]) for j in js]
    return RPU(members, js, Covering([m.support for m in members], js))


def bspline_rpu(j_range=(-8, 8)):
    h = bspline_window(4)
    js = list(range(j_range[0], j_range[1] + 1))
    members = [DilatedWindow(h, [[2.0**-j]]) for j in js]
    return RPU(members, js, Covering([m.support for m in members], js))


# B-splines


def test_bspline_examples():
    assert bspline_eval(0, 0.5) == 1.0
    assert bspline_eval(1, 1.0) == pytest.approx(1.0)
    assert bspline_eval(1, 0.5) == pytest.approx(0.5)


def test_cubic_bspline_at_two_matches_convolution():
    # four-fold convolution of the unit indicator on a fine grid
    h = 1e-4
    box = np.ones(int(round(1 / h)))
    conv = box.copy()
    for _ in range(3):
        conv = np.convolve(conv, box) * h
    t = 2.0
    oracle = conv[int(round(t / h)) - 2]
    assert bspline_eval(3, t) == pytest.approx(2 / 3, abs=1e-12)
    assert oracle == pytest.approx(2 / 3, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.floats(-2.0, 9.0))
def test_bspline_matches_reference(n, t):
    assert bspline_eval(n, t) == pytest.approx(float(ref_beta(n, t)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(-50 * 2**20, 50 * 2**20))
def test_bspline_integer_shifts_sum_to_one(n, q):
    # dyadic t keeps every shift t - k exact
    t = q / 2**20
    ks = np.arange(math.floor(t) - n - 1, math.floor(t) + 2)
    assert float(np.sum(bspline_eval(n, t - ks))) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("y", [0.0, 0.3, 1.7])
def test_bspline_fourier_matches_quadrature(n, y):
    re = quad(lambda u: bspline_eval(n, u) * math.cos(2 * math.pi * y * u), 0, n + 1, points=range(n + 2))[0]
    im = quad(lambda u: bspline_eval(n, u) * math.sin(2 * math.pi * y * u), 0, n + 1, points=range(n + 2))[0]
    assert complex(bspline_fourier(n, y)) == pytest.approx(complex(re, im), abs=1e-10)


def test_window_vanishes_outside_support():
    w = BSplineWindow(3, 4.0, -1.0, 4.0)
    lo, hi = w.support.bounding_box()
    x = np.concatenate([np.linspace(lo[0] - 5, lo[0], 50), np.linspace(hi[0], hi[0] + 5, 50)])
    assert np.all(w(x[:, None]) == 0)


# sums of squares and bounds


def test_sum_squares_examples():
    tiles = RPU([IndicatorWindow(Box([j], [j + 1])) for j in range(-5, 6)])
    assert rpu_sum_squares(tiles, np.array([[0.3]]))[0] == 1.0
    assert rpu_sum_squares(dyadic_indicator_rpu(), np.array([[0.7]]))[0] == 1.0


def test_bspline_dilation_sum_matches_direct_summation():
    H = bspline_rpu((-8, 8))
    x = 0.9
    direct = sum(abs(4 * ref_beta(3, 4 * (2.0**-j * x - 0.25))) ** 2 for j in range(-8, 9))
    assert rpu_sum_squares(H, np.array([[x]]))[0] == pytest.approx(float(direct), abs=1e-12)


def test_dyadic_indicator_bounds_are_one():
    b = rpu_bounds(dyadic_indicator_rpu(), Box([1 / 8], [8]), 1e-3, mode="ae")
    assert (b.p_hat, b.P_hat) == (1.0, 1.0)
    assert b.violations == []


def test_bspline_rpu_bounds_regression():
    b = rpu_bounds(bspline_rpu(), Box([0.25], [4.0]), 1e-4)
    assert 0 < b.p_hat <= b.P_hat < math.inf
    # dense probe oracle with the reference spline
    x = np.linspace(0.25, 4.0, 37501)
    s = sum(np.abs(4 * ref_beta(3, 4 * (2.0**-j * x - 0.25))) ** 2 for j in range(-8, 9))
    assert b.p_hat == pytest.approx(s.min(), rel=1e-9)
    assert b.P_hat == pytest.approx(s.max(), rel=1e-9)
    # regression constants
    assert b.p_hat == pytest.approx(0.830790, abs=1e-6)
    assert set(b.to_dict()) >= {"p_hat", "P_hat", "probe_step", "violations"}


def test_rpu_bounds_report_holes():
    H = RPU([IndicatorWindow(Box([0], [1])), IndicatorWindow(Box([2], [3]))])
    b = rpu_bounds(H, Box([0], [3]), 0.1)
    assert b.p_hat == 0 and b.violations


def test_sum_squares_bounded_by_covering_index():
    H = bspline_rpu((-4, 4))
    supports = Covering([m.support for m in H.members])
    probe = Box([0.1], [8])
    rho = covering_index(supports, probe, 1e-3)
    x = np.linspace(0.1, 8, 5000)[:, None]
    top = max(float(np.max(np.abs(m(x)) ** 2)) for m in H.members)
    assert np.all(rpu_sum_squares(H, x) <= rho * top * (1 + 1e-12))


class _Phase(Window):
    def __init__(self, base, freq):
        self.base, self.freq, self.dim, self.support = base, freq, base.dim, base.support

    def __call__(self, x):
        return self.base(x) * np.exp(2j * np.pi * self.freq * np.asarray(x)[:, 0])


def test_conjugate_family_has_same_sum():
    H = bspline_rpu((-3, 3))
    C = RPU([_Phase(m, 0.37 * i) for i, m in enumerate(H.members)])
    Cbar = RPU([_Conj(m) for m in C.members])
    x = np.random.default_rng(0).uniform(0.1, 8, (1000, 1))
    assert np.max(np.abs(C.sum_squares(x) - Cbar.sum_squares(x))) <= 1e-12


class _Conj(Window):
    def __init__(self, base):
        self.base, self.dim, self.support = base, base.dim, base.support

    def __call__(self, x):
        return np.conj(self.base(x))


# normalisation


def test_normalized_rpu_is_regular():
    N = normalize_rpu(bspline_rpu())
    x = np.random.default_rng(1).uniform(0.5, 2, (1000, 1))
    assert np.max(np.abs(N.sum_squares(x) - 1)) <= 1e-10
    b = rpu_bounds(N, Box([0.5], [2]), 1e-3)
    assert abs(b.p_hat - 1) <= 1e-10 and abs(b.P_hat - 1) <= 1e-10


def test_normalize_keeps_regular_rpu():
    H = dyadic_indicator_rpu()
    N = normalize_rpu(H)
    x = np.random.default_rng(2).uniform(-8, 8, (500, 1))
    assert np.max(np.abs(N.values(x) - H.values(x))) <= 1e-12


def test_normalize_identical_indicators():
    w = IndicatorWindow(Box([0], [1]))
    N = normalize_rpu(RPU([w, w]))
    assert N.members[0](np.array([[0.5]]))[0] == pytest.approx(1 / math.sqrt(2))


def test_normalize_preserves_zeros():
    H = bspline_rpu((-3, 3))
    N = normalize_rpu(H)
    x = np.random.default_rng(3).uniform(0.05, 12, (2000, 1))
    for m, n in zip(H.members, N.members):
        z = m(x) == 0
        assert np.all(n(x)[z] == 0)


def test_normalize_reports_hole_with_point():
    H = RPU([IndicatorWindow(Box([0], [1])), IndicatorWindow(Box([2], [3]))],
            covering=Covering([Box([0], [3])]))
    N = normalize_rpu(H)
    with pytest.raises(RPUHoleError) as err:
        N.members[0](np.array([[0.5], [1.5]]))
    assert err.value.point == [1.5]


def test_level_set_membership():
    h = bspline_window(4)
    L = level_set(h, 1.0)
    x = np.linspace(-2, 2, 4001)[:, None]
    inside = L.contains(x)
    assert np.any(inside)
    assert np.all(np.abs(h(x[inside])) ** 2 > 1.0)


# dilation partitions


def test_dilation_rpu_indicator_tiling():
    Q = symmetric(Box([0.5], [1.0]))
    H = build_dilation_rpu(IndicatorWindow(Q), [[2.0]], Q, 0.0, 1.0, 1.0, (-4, 4))
    b = rpu_bounds(H, Box([1 / 8], [8]), 1e-3, mode="ae")
    assert (b.p_hat, b.P_hat) == (1.0, 1.0)


def test_dilation_rpu_predicted_upper_bound():
    Q = symmetric(Box([0.5], [1.0]))
    h = SmoothBump(Q, 0.25)
    H = build_dilation_rpu(h, [[2.0]], Q, 0.25, 0.25, 1.0, (-4, 4))
    assert H.meta["covering_index"] == 3
    assert H.meta["P_upper"] == 3.0
    b = rpu_bounds(H, Box([0.25], [8]), 1e-3)
    assert b.P_hat <= 3.0 and b.p_hat >= 0.25


@pytest.mark.parametrize("label,kwargs", [
    ("(i)", {"eps": 0.6}),
    ("(a)", {"c2": 0.5}),
    ("(b)", {"c1": 2.0}),
    ("(c)", {"eps": 0.1}),
])
def test_dilation_rpu_names_failed_hypothesis(label, kwargs):
    Q = symmetric(Box([0.5], [1.0]))
    h = SmoothBump(Q, 0.25)
    args = {"eps": 0.25, "c1": 0.25, "c2": 1.0}
    args.update(kwargs)
    with pytest.raises(ConstructionError) as err:
        build_dilation_rpu(h, [[2.0]], Q, args["eps"], args["c1"], args["c2"], (-2, 2))
    assert err.value.hypothesis == label


def test_spiral_rpu_lower_bound():
    a, m = 2.0, 4
    A = spiral_matrix(a, m)
    Q = SpiralSector(a, 1.0, a, 0.0, 1.0 / m)
    h = SpiralBump(Q, 0.25, 0.0625)
    # analytic minimum of |h|^2 on Q: both factors at two thirds of a knot
    edge = float(ref_beta(3, 2 / 3) / ref_beta(3, 2.0))
    c1 = edge**4
    js = range(0, 9)
    members = [DilatedWindow(h, np.linalg.matrix_power(np.linalg.inv(A), j)) for j in js]
    H = RPU(members, list(js))
    b = rpu_bounds(H, AnnulusSector(a ** ((0 + m) / m), a ** (9 / m)), 0.04)
    assert math.isfinite(b.P_hat)
    assert b.p_hat >= c1 * (1 - 1e-6)
