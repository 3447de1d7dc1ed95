from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import BSpline

from irframes.atoms import FrequencyGrid, LatticeRule, WaveletSpec, analysis, atom_eval_time, build_wavelet_frame
from irframes.errors import ConfigurationError, PreconditionError
from irframes.fourier_frames import ExponentialSystem, gram_matrix
from irframes.gallery import (
    ENTRIES,
    bspline_1d,
    decay_profile,
    directional_2d,
    get_entry,
    kadec_riesz_1d,
    radial_2d,
    recipe,
    shannon_1d,
    shannon_atom,
    spiral_2d,
    spiral_matrix,
)
from irframes.geometry import Box, dilation_ring, symmetric
from irframes.partitions import RPU, BSplineWindow, IndicatorWindow, rpu_bounds

SHANNON_Q = symmetric(Box([0.5], [1.0]))


# every entry


@pytest.mark.parametrize("name", sorted(ENTRIES))
def test_entry_passes_its_certificate(validated, name):
    entry, cert, data = validated(name)
    assert cert.passed, cert.failed()
    names = {c["name"] for c in cert.checks}
    assert {"covering_index", "rpu_bounds", "frame_ratio_sandwich", "reconstruction_error"} <= names
    assert data["report"].relative_error is not None
    assert max(data["report"].relative_error) < entry.tolerance


@pytest.mark.parametrize("name", ["shannon_1d", "radial_2d"])
def test_regular_shannon_entries_are_tight(validated, name):
    entry, cert, data = validated(name)
    r = data["ratios"]
    bound = entry.expected.get("bound") or [c for c in cert.checks if c["name"] == "tight"][0]["bound"]
    assert float(r.max() - r.min()) <= 1e-3 * bound


def test_unknown_entry():
    with pytest.raises(ConfigurationError):
        get_entry("morlet")


# one dimension


def test_shannon_closed_form_against_numerical_transform():
    x = np.linspace(-20, 20, 100)
    # inverse transform of the indicator of Q by adaptive quadrature
    num = np.array([2 * quad(lambda s: math.cos(2 * math.pi * v * s), 0.5, 1.0, epsabs=1e-13)[0] for v in x])
    assert np.max(np.abs(shannon_atom(x) - num)) <= 1e-6
    assert shannon_atom(0.0) == pytest.approx(1.0)


def test_shannon_atoms_match_closed_form_at_every_level():
    e = shannon_1d(j_range=(-2, 2))
    S = e.build()
    x = np.linspace(-30, 30, 200)
    for l in S.levels:
        k = int(np.argmin(np.abs(l.t[:, 0]))) + 2
        A = np.linalg.inv(l.L).T[0, 0]
        xk = l.t[k, 0] / A  # psi(A x - t) = psi(A (x - t / A))
        ref = shannon_atom(x, -int(round(math.log2(A))), xk)
        assert np.max(np.abs(atom_eval_time(S, l.index, k, x[:, None]) - ref)) <= 1e-6


def test_shannon_density_must_exceed_one():
    with pytest.raises(PreconditionError):
        shannon_1d(density_factor=1.0)
    with pytest.raises(PreconditionError):
        bspline_1d(density_factor=0.9)


def test_jittered_shannon_stays_in_its_estimate():
    e = shannon_1d(j_range=(-2, 2), jitter=0.125, ensemble_size=40)
    cert, data = e.validate()
    assert cert.passed, cert.failed()
    r = data["ratios"]
    assert data["predicted"].m * (1 - 1e-3) <= r.min() and r.max() <= data["predicted"].M * (1 + 1e-3)


def test_kadec_certificates():
    e = kadec_riesz_1d(L_fractions=0.2, R=16)
    for j, info in e.expected["kadec"].items():
        assert info["certified"] and not info["certified_on_Q"]
        t = e.spec.grids[j].points_.points
        assert np.linalg.eigvalsh(gram_matrix(ExponentialSystem(t, SHANNON_Q))).min() > 0
    e = kadec_riesz_1d(L_fractions=0.1, R=16)
    assert all(info["certified_on_Q"] for info in e.expected["kadec"].values())
    with pytest.raises(PreconditionError):
        kadec_riesz_1d(L_fractions=0.25)


def test_bspline_decay_profile():
    prof = decay_profile(4)
    assert prof["bounded"]
    # the constant is attained asymptotically, so allow rounding
    assert max(prof["sup"]) <= prof["bound"] * (1 + 1e-12)
    # a window with a jump does not reach the same order
    h = IndicatorWindow(SHANNON_Q)
    x = 2.0 ** np.arange(1, 11)
    v = np.abs(h.inverse_ft((x + 0.25)[:, None])) * (x + 0.25) ** 4
    assert v[-1] > 100 * v[0]


def test_gabor_partition_bounds_on_the_line():
    js = list(range(-14, 11))
    H = RPU([BSplineWindow(3, 1.0, -float(j)) for j in js], js)
    b = rpu_bounds(H, Box([-10], [10]), 1e-3)
    # dense oracle with the reference cubic spline
    ref = BSpline.basis_element(np.arange(5), extrapolate=False)
    t = np.linspace(-10, 10, 20001)
    s = sum(np.nan_to_num(ref(t - j)) ** 2 for j in js)
    assert b.p_hat == pytest.approx(s.min(), rel=1e-9) and b.P_hat == pytest.approx(s.max(), rel=1e-9)
    assert b.p_hat > 0


def test_single_gabor_level_is_a_shifted_exponential_system():
    from irframes.atoms import build_tf_atoms, synthesis
    from irframes.geometry import Covering

    S0 = Box([0], [4])
    x = np.arange(-40, 41) / 5
    grid = FrequencyGrid([0.0], 2.0**-9, [2048])
    h = BSplineWindow(3, 1.0, 0.0)
    S = build_tf_atoms(Covering([S0], [0]), RPU([h], [0]), {0: x[:, None]}, grid)
    G = synthesis(S, {0: np.eye(len(x))})
    E = ExponentialSystem(x, S0, normalized=True).evaluate(grid.points)
    assert np.max(np.abs(G - (h(grid.points)[:, None] * E).T)) <= 1e-12


# two dimensions


def test_radial_window_is_rotation_invariant():
    e = radial_2d(kind="bspline")
    h = e.spec.window
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.3, 1.3, (200, 2))
    for th in rng.uniform(0, 2 * np.pi, 100):
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert np.max(np.abs(h(x @ R.T) - h(x))) <= 1e-12


def test_radial_density_must_exceed_one():
    with pytest.raises(PreconditionError):
        radial_2d(density_factor=1.0)


def test_directional_packet_energy_follows_its_direction():
    e = directional_2d(j_range=(0, 0))
    S = e.build()
    pts = S.grid.points
    for j2 in range(4):
        # the tile of (0, j2) is Q rotated by -j2 pi / 4
        phi = -j2 * math.pi / 4
        centre = 0.75 * np.array([math.cos(phi), math.sin(phi)])
        F = np.exp(-np.sum((pts - centre) ** 2, axis=1) / (2 * 0.03**2))
        c = analysis(S, F)
        energy = {j: float(np.sum(np.abs(v) ** 2)) for j, v in c.items()}
        assert energy[(0, j2)] >= 0.9 * sum(energy.values())


def test_spiral_matrix_power():
    A = spiral_matrix(2.0, 4)
    assert np.linalg.norm(np.linalg.matrix_power(A, 4) - 2 * np.eye(2), 2) <= 1e-12


def test_spiral_certificate(validated):
    entry, cert, data = validated("spiral_2d")
    checks = {c["name"]: c for c in cert.checks}
    assert checks["spiral_power"]["passed"] and checks["covering_index"]["value"] == 1


def test_spiral_gap_is_enforced():
    with pytest.raises(PreconditionError):
        spiral_2d(spacing=1.0)


def test_recipe_rejects_gap_on_the_boundary():
    e = recipe()
    limit = e.spec.meta["gap_limit"]
    with pytest.raises(PreconditionError) as err:
        recipe(X=LatticeRule(limit * math.sqrt(2)))
    assert "gap" in str(err.value)


def test_recipe_rejects_window_with_zeros():
    Q = dilation_ring(2 * np.eye(2), Box([-1, -1], [1, 1]))
    h = IndicatorWindow(Box([-2, -2], [2, 0]))
    with pytest.raises(PreconditionError) as err:
        recipe(h=h)
    w = np.array([err.value.witness])
    assert Q.contains(w)[0] and h(w)[0] == 0


def test_recipe_rejects_non_expansive_matrix():
    with pytest.raises(PreconditionError, match="expansive"):
        recipe(A=[[1.0, 1.0], [0.0, 1.0]])


def test_three_dimensional_smoke():
    A = 2 * np.eye(3)
    Q = dilation_ring(A, Box([-1, -1, -1], [1, 1, 1]))
    spec = WaveletSpec(IndicatorWindow(Q), Q, {0: np.eye(3)}, LatticeRule(0.25))
    S = build_wavelet_frame(spec, FrequencyGrid.symmetric(2.0, 1 / 8, dim=3), truncation="nyquist")
    assert S.predicted.m == pytest.approx(64) and S.predicted.M == pytest.approx(64)
    rng = np.random.default_rng(0)
    F = rng.standard_normal(S.grid.size) * Q.contains(S.grid.points)
    c = analysis(S, F)
    assert np.sum(np.abs(c[0]) ** 2) == pytest.approx(64 * S.grid.norm2(F[None])[0], rel=1e-10)
