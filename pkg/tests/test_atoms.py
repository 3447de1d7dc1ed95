from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from irframes.atoms import (
    AtomSystem,
    ExplicitGrid,
    FrequencyGrid,
    LatticeRule,
    Level,
    SmoothEnsemble,
    WaveletSpec,
    analysis,
    atom_eval_time,
    build_tf_atoms,
    build_wavelet_frame,
    coefficients_from_csv,
    coefficients_to_csv,
    empirical_frame_bounds,
    frame_operator_apply,
    frame_ratios,
    glue_frames,
    predicted_bounds,
    synthesis,
)
from irframes.errors import ConstructionError, DomainError, ResolutionError
from irframes.fourier_frames import ExponentialSystem, FrameBounds, gram_matrix
from irframes.gallery import bspline_1d, level_lower_bounds, shannon_1d
from irframes.geometry import Box, Covering, PointSet, dilation_ring, symmetric
from irframes.partitions import RPU, IndicatorWindow, normalize_rpu

SHANNON_Q = symmetric(Box([0.5], [1.0]))


@pytest.fixture(scope="module")
def shannon():
    e = shannon_1d(j_range=(-2, 2), ensemble_size=50)
    return e, e.build()


@pytest.fixture(scope="module")
def bspline():
    e = bspline_1d(j_range=(-1, 1), ensemble_size=20)
    return e, e.build()


def unit_coefficients(system, j, k):
    c = {l.index: np.zeros(l.K, dtype=complex) for l in system.levels}
    c[j][k] = 1.0
    return c


# wavelet systems


def test_shannon_levels_are_tight_with_bound_four(shannon):
    e, S = shannon
    for l in S.levels:
        assert l.exp_bounds.kind == "lattice-exact"
        assert l.kappa * l.exp_bounds.m == pytest.approx(4.0, rel=1e-12)
    assert (S.rpu_bounds["p_hat"], S.rpu_bounds["P_hat"]) == (1.0, 1.0)
    assert S.predicted.m == pytest.approx(4.0) and S.predicted.M == pytest.approx(4.0)
    r = frame_ratios(S, e.signals(S))
    assert np.all(np.abs(r - 4) <= 1e-3)


def test_quarter_integer_exponentials_on_the_base_set():
    # Gram oracle: the truncated family {e_{k/4}} on Q has spectrum in [0, 4]
    # and its top eigenvalues approach 4 as the truncation grows
    tops = []
    for R in (4, 8, 16):
        k = np.arange(-4 * R, 4 * R + 1) / 4
        lam = np.linalg.eigvalsh(gram_matrix(ExponentialSystem(k, SHANNON_Q)))
        assert lam.max() <= 4 * (1 + 1e-9) and lam.min() >= -1e-9
        tops.append(lam.max())
    assert tops[-1] == pytest.approx(4.0, rel=1e-2)


def test_atoms_vanish_outside_their_tile(bspline):
    _, S = bspline
    x = np.abs(S.grid.points[:, 0])
    for l in S.levels:
        a = 2.0 ** l.index
        G = synthesis(S, unit_coefficients(S, l.index, l.K // 3))
        outside = (x < 0.25 * a) | (x > 1.25 * a)
        assert np.all(np.abs(G[outside]) < 1e-12)
        assert np.any(np.abs(G[~outside]) > 0)


@pytest.mark.parametrize("j", [0, 1])
def test_parseval_between_time_and_frequency(bspline, j):
    _, S = bspline
    k = S.level(j).K // 2 + 3
    G = synthesis(S, unit_coefficients(S, j, k))
    freq = float(S.grid.norm2(G[None])[0])
    x = np.linspace(-300, 300, 600001)
    g = atom_eval_time(S, j, k, x[:, None])
    time_norm = simpson(np.abs(g) ** 2, x=x)
    assert abs(freq - time_norm) <= 1e-6 * time_norm


def test_self_inner_product(bspline):
    _, S = bspline
    j, k = 0, 17
    G = synthesis(S, unit_coefficients(S, j, k))
    c = analysis(S, G)
    assert c[j][k] == pytest.approx(S.grid.norm2(G[None])[0], rel=1e-12)


def test_signal_in_one_tile_only_meets_that_level(shannon):
    _, S = shannon
    F = SmoothEnsemble(Box([0.55], [0.95]), size=5, rel_width=0.2).on_grid(S.grid)
    c = analysis(S, F)
    assert np.abs(c[0]).max() > 1e-3
    for j in S.indices:
        if j != 0:
            assert np.abs(c[j]).max() <= 1e-10


@pytest.mark.parametrize("j,shift", [(0, 3), (1, -5)])
def test_time_shift_permutes_coefficients(bspline, j, shift):
    e, S = bspline
    F = e.signals(S)
    l = S.level(j)
    y = shift * (l.t[1] - l.t[0])
    A = np.linalg.inv(l.L).T
    # f(x - A^{-1} y) in time is a modulation in frequency
    Fp = F * np.exp(-2j * np.pi * S.grid.points @ np.linalg.solve(A, y))[None]
    c, cp = analysis(S, F)[j], analysis(S, Fp)[j]
    assert np.max(np.abs(np.abs(np.roll(c, shift, axis=0)) - np.abs(cp))) <= 1e-8


def test_analysis_and_synthesis_are_adjoint(bspline):
    _, S = bspline
    rng = np.random.default_rng(0)
    F = rng.standard_normal(S.grid.size) + 1j * rng.standard_normal(S.grid.size)
    c = {l.index: rng.standard_normal(l.K) + 1j * rng.standard_normal(l.K) for l in S.levels}
    lhs = np.vdot(synthesis(S, c), F) * S.grid.cell
    a = analysis(S, F)
    rhs = sum(np.vdot(c[j], a[j]) for j in S.indices)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_frame_operator_quadratic_form(shannon):
    e, S = shannon
    F = e.signals(S)[:5]
    SF = frame_operator_apply(S, F)
    q = np.real(np.sum(SF * F.conj(), axis=1)) * S.grid.cell
    assert np.allclose(q / S.grid.norm2(F), frame_ratios(S, F), rtol=1e-10)


def test_shared_translations_give_same_frame(shannon):
    e, S = shannon
    R = 40.0
    k = np.arange(-4 * R, 4 * R + 1) / 4
    spec = WaveletSpec(IndicatorWindow(SHANNON_Q), SHANNON_Q, e.spec.matrices, ExplicitGrid(PointSet(k[:, None])))
    T = build_wavelet_frame(spec, FrequencyGrid.symmetric(4.0, 2.0**-12), truncation=R)
    for l in T.levels:
        assert np.array_equal(l.t, k[:, None])
    F = SmoothEnsemble(T.core, size=20).on_grid(T.grid)
    r = frame_ratios(T, F)
    lower = level_lower_bounds(T, F, analysis(T, F))
    pred = predicted_bounds(T, lower)
    assert np.all((r >= pred.m * (1 - 1e-3)) & (r <= pred.M * (1 + 1e-3)))
    # a truncated subfamily of a tight frame with bound 4 keeps the Bessel bound
    assert np.all(r <= 4 * (1 + 1e-9)) and np.mean(r) >= 3.9
    # the same translations from a shared lattice rule give the same atoms
    L = build_wavelet_frame(WaveletSpec(IndicatorWindow(SHANNON_Q), SHANNON_Q, e.spec.matrices, LatticeRule(0.25)),
                            T.grid, truncation=R)
    for a, b in zip(L.levels, T.levels):
        assert np.array_equal(a.t, b.t)


def test_two_dimensional_powers_of_two():
    A = 2 * np.eye(2)
    Q = dilation_ring(A, Box([-1, -1], [1, 1]))
    spec = WaveletSpec(IndicatorWindow(Q), Q, {j: np.linalg.matrix_power(A, j) for j in (-1, 0, 1)},
                       LatticeRule(0.25))
    S = build_wavelet_frame(spec, FrequencyGrid.symmetric(4.0, 1 / 32, dim=2), truncation="nyquist")
    assert S.predicted.m == pytest.approx(16) and S.predicted.M == pytest.approx(16)
    F = SmoothEnsemble(S.core, size=10).on_grid(S.grid)
    assert np.all(np.abs(frame_ratios(S, F) - 16) <= 16e-3)


def test_under_resolved_grid_is_rejected():
    spec = WaveletSpec(IndicatorWindow(SHANNON_Q), SHANNON_Q, {0: [[1.0]]}, LatticeRule(0.25))
    with pytest.raises(ResolutionError):
        build_wavelet_frame(spec, FrequencyGrid.symmetric(1.0, 1 / 16), truncation=32.0)


def test_signal_length_must_match_grid(bspline):
    _, S = bspline
    with pytest.raises(DomainError):
        analysis(S, np.zeros(S.grid.size + 1))


# gluing


def _stub_system(p, P, level_bounds):
    grid = FrequencyGrid.symmetric(1.0, 0.25)
    levels = [Level(j, np.eye(1), 1.0, IndicatorWindow(Box([0], [1])), Box([0], [1]), np.zeros((1, 1)),
                    exp_bounds=FrameBounds(m, M, "given")) for j, (m, M) in enumerate(level_bounds)]
    return AtomSystem(levels, grid, Box([0], [1]), rpu_bounds={"p_hat": p, "P_hat": P})


def test_predicted_bound_arithmetic():
    S = _stub_system(0.8, 1.3, [(1.9, 2.1)] * 3)
    b = predicted_bounds(S)
    assert (b.m, b.M) == pytest.approx((1.52, 2.73))
    b = predicted_bounds(S, mode="level-set", c=0.5)
    assert (b.m, b.M) == pytest.approx((0.95, 2.73))
    b = predicted_bounds(S, mode="covering", rho=3)
    assert (b.m, b.M) == pytest.approx((1.9, 6.3))


def _tiles(js):
    return [Box([j], [j + 1]) for j in js]


def test_glued_disjoint_tiling_with_tight_pieces():
    js = list(range(-3, 3))
    rpu = RPU([IndicatorWindow(b) for b in _tiles(js)], js)
    k = np.arange(-80, 81) / 2
    systems = {j: ExponentialSystem(k, b) for j, b in zip(js, _tiles(js))}
    bounds = {j: FrameBounds(2.0, 2.0, "lattice") for j in js}
    grid = FrequencyGrid.symmetric(4.0, 2.0**-9)
    S = glue_frames(rpu, systems, grid, bounds=bounds)
    assert (S.predicted.m, S.predicted.M) == (2.0, 2.0)
    # smooth inside one tile, so the indicator cut adds no discontinuity
    F = SmoothEnsemble(Box([1.05], [1.95]), size=20, radii=(1.2, 1.8), rel_width=0.3, shift=1.0).on_grid(grid)
    r = frame_ratios(S, F)
    assert np.all((r >= 2 * (1 - 1e-3)) & (r <= 2 * (1 + 1e-3)))


def test_glue_rejects_non_uniform_bounds():
    rpu = RPU([IndicatorWindow(Box([0], [1]))], [0])
    systems = {0: ExponentialSystem([0.0], Box([0], [1]))}
    with pytest.raises(ConstructionError) as err:
        glue_frames(rpu, systems, FrequencyGrid.symmetric(1.0, 0.01), bounds={0: FrameBounds(0.0, 1.0, "given")})
    assert err.value.witness == [0]


def test_single_piece_is_the_exponential_system():
    Q = Box([0], [1])
    x = np.sort(np.random.default_rng(4).uniform(-3, 3, 6))
    cov = Covering([Q], [0])
    grid = FrequencyGrid.symmetric(1.0, 2.0**-8)
    S = build_tf_atoms(cov, RPU([IndicatorWindow(Q)], [0]), {0: x[:, None]}, grid)
    g = synthesis(S, {0: np.eye(6)})
    E = ExponentialSystem(x, Q).evaluate(grid.points)
    assert np.max(np.abs(g - E.T)) <= 1e-12


def test_single_atom_frame_operator_is_rank_one():
    Q = Box([0], [1])
    grid = FrequencyGrid.symmetric(1.0, 2.0**-8)
    S = build_tf_atoms(Covering([Q], [0]), RPU([IndicatorWindow(Q)], [0]), {0: np.array([[0.7]])}, grid)
    g = synthesis(S, {0: np.array([1.0])})
    rng = np.random.default_rng(1)
    F = rng.standard_normal((4, grid.size)) + 1j * rng.standard_normal((4, grid.size))
    SF = frame_operator_apply(S, F)
    ip = (F @ g.conj()) * grid.cell
    assert np.allclose(SF, ip[:, None] * g[None], atol=1e-10)
    q = np.real(np.sum(SF * F.conj(), axis=1)) * grid.cell
    assert np.allclose(q, np.abs(ip) ** 2, rtol=1e-10)


def test_two_overlapping_pieces_with_normalized_partition():
    regions = [Box([-1], [0.5]), Box([-0.5], [1])]
    js = [0, 1]
    rpu = normalize_rpu(RPU([IndicatorWindow(r) for r in regions], js, Covering(regions, js)))
    k = np.arange(-60, 61) / 2
    grid = FrequencyGrid.symmetric(1.0, 2.0**-8)
    S = build_tf_atoms(Covering(regions, js), rpu, {j: k[:, None] for j in js}, grid)
    # each piece is {e_{k/2}} on an interval of length 3/2: bound 2/(3/2) after normalisation
    F = SmoothEnsemble(Box([-0.9], [0.9]), size=20, radii=(0.2, 0.6)).on_grid(grid)
    emp = empirical_frame_bounds(S, F)
    assert emp.m >= 4 / 3 * (1 - 1e-2) and emp.M <= 4 / 3 * (1 + 1e-2)


def test_support_violation_names_level_and_point():
    regions = [Box([0], [1]), Box([1], [2])]
    rpu = RPU([IndicatorWindow(Box([0], [1.5])), IndicatorWindow(Box([1], [2]))], [0, 1])
    with pytest.raises(ConstructionError) as err:
        build_tf_atoms(Covering(regions, [0, 1]), rpu, {0: [[0.0]], 1: [[0.0]]},
                       FrequencyGrid.symmetric(2.0, 2.0**-6))
    assert "0" in err.value.hypothesis
    assert 1 < err.value.witness[0] < 1.5


# coefficient files


def test_coefficients_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    c = {-1: rng.standard_normal(4) + 1j * rng.standard_normal(4), (0, 2): rng.standard_normal(3) + 0j}
    path = tmp_path / "c.csv"
    text = coefficients_to_csv(c, path)
    assert text.splitlines()[0] == "j,k,re,im"
    back = coefficients_from_csv(path)
    assert set(back) == {-1, (0, 2)}
    for j in c:
        assert np.array_equal(back[j], c[j])
