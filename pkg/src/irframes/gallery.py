"""Ready-made frame constructions with defaults and self-validation.

Each builder returns a :class:`GalleryEntry` holding the construction
data (usually a :class:`WaveletSpec`), a frequency grid, a test ensemble
recipe, a declared reconstruction tolerance and entry specific checks.
``entry.validate()`` builds the atom system and certifies

(a) covering index of the tiles on the probe region is at least one,
(b) ``0 < p_hat <= P_hat < inf`` for the partition on the grid,
(c) every ensemble frame ratio lies in the predicted interval
    (inflated by ``1e-3``),
(d) reconstruction error of the first ensemble members below tolerance.

Per-level lower bounds are exact for lattice levels computed by FFT and
otherwise Rayleigh-Ritz bounds over the span of the level pieces of the
ensemble (see :func:`irframes.atoms.level_span_bounds`).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .atoms import (
    ExplicitGrid,
    FrequencyGrid,
    LatticeRule,
    SmoothEnsemble,
    WaveletSpec,
    analysis,
    atom_eval_time,
    build_tf_atoms,
    build_wavelet_frame,
    frame_ratios,
    level_span_bounds,
    predicted_bounds,
)
from .errors import ConfigurationError, PreconditionError
from .fourier_frames import check_kadec, gram_matrix
from .geometry import (
    AnnulusSector,
    Box,
    Covering,
    Difference,
    PointSet,
    SpiralSector,
    covering_index,
    dilation_ring,
    gap,
    is_expansive,
    separation,
    symmetric,
)
from .partitions import (
    RPU,
    BSplineWindow,
    IndicatorWindow,
    PolarWindow,
    RadialBSplineWindow,
    SmoothBump,
    SpiralBump,
    _bump_1d,
    symmetrize,
)
from .reconstruct import level_duals, reconstruct_full

__all__ = [
    "GalleryEntry",
    "Certificate",
    "ENTRIES",
    "get_entry",
    "shannon_1d",
    "kadec_riesz_1d",
    "bspline_1d",
    "radial_2d",
    "directional_2d",
    "spiral_2d",
    "gabor_nonharmonic",
    "recipe",
    "rotation",
    "decay_profile",
    "export_plot_data",
]

INFLATE = 1e-3


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass
class Certificate:
    """Named pass/fail checks with their measured values."""

    entry: str
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add(self, name, passed, value=None, **detail):
        self.checks.append({"name": name, "passed": bool(passed), "value": value, **detail})

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def failed(self):
        return [c["name"] for c in self.checks if not c["passed"]]

    def to_dict(self):
        return {"entry": self.entry, "passed": self.passed, "checks": self.checks, "timings": self.timings}


@dataclass
class GalleryEntry:
    """A construction with everything needed to build and certify it.

    Attributes
    ----------
    name : str
    params : dict
        Builder arguments (after defaults).
    spec : WaveletSpec or None
        ``None`` for entries built directly from an RPU (see ``builder``).
    grid : FrequencyGrid
    truncation : float or "nyquist"
    tiles : Covering
        Sets whose covering index is certified on ``probe``.
    probe : Region
    probe_step : float
    tolerance : float
        Declared relative reconstruction error.
    ensemble : dict
        Keyword arguments of :class:`SmoothEnsemble` (``size``, ``seed``, ...).
    expected : dict
        Properties claimed for the construction (tightness, decay order...).
    checks : list
        Callables ``(entry, system, certificate) -> None`` adding
        entry specific checks.
    builder : callable, optional
        ``grid -> AtomSystem`` for entries without a wavelet spec.
    """

    name: str
    params: dict
    spec: WaveletSpec | None
    grid: FrequencyGrid
    truncation: object
    tiles: Covering
    probe: object
    probe_step: float
    tolerance: float
    ensemble: dict
    expected: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    builder: object = None
    n_reconstruct: int = 20

    def build(self):
        if self.builder is not None:
            return self.builder(self.grid)
        return build_wavelet_frame(self.spec, self.grid, self.truncation)

    def signals(self, system, size=None, seed=None):
        kw = dict(self.ensemble)
        if size is not None:
            kw["size"] = size
        if seed is not None:
            kw["seed"] = seed
        return SmoothEnsemble(system.core, **kw).on_grid(self.grid)

    def manifest(self, system=None):
        out = {"entry": self.name, "params": _jsonable(self.params), "grid": self.grid.to_dict(),
               "truncation": self.truncation, "tolerance": self.tolerance,
               "ensemble": _jsonable(self.ensemble), "expected": _jsonable(self.expected)}
        if system is not None:
            out["system"] = _jsonable(system.summary())
        return out

    def validate(self, size=None, seed=None, system=None, F=None):
        """Build (unless given) and certify; returns ``(certificate, data)``."""
        cert = Certificate(self.name)
        t0 = time.perf_counter()
        system = system or self.build()
        cert.timings["build"] = time.perf_counter() - t0
        # (a) covering
        idx = covering_index(self.tiles, self.probe, self.probe_step, mode="ae")
        cert.add("covering_index", idx >= 1, idx, threshold=">= 1", mode="ae")
        # (b) partition bounds on the grid
        p, P = system.rpu_bounds["p_hat"], system.rpu_bounds["P_hat"]
        cert.add("rpu_bounds", 0 < p <= P < math.inf, [p, P])
        # (c) sandwich
        t1 = time.perf_counter()
        F = self.signals(system, size, seed) if F is None else F
        cert.timings["ensemble"] = time.perf_counter() - t1
        t1 = time.perf_counter()
        coeffs = analysis(system, F)
        ratios = frame_ratios(system, F, coeffs)
        cert.timings["analysis"] = time.perf_counter() - t1
        lower = level_lower_bounds(system, F, coeffs)
        pred = predicted_bounds(system, lower, **self.expected.get("gluing", {}))
        lo, hi = pred.m * (1 - INFLATE), pred.M * (1 + INFLATE)
        cert.add("frame_ratio_sandwich", bool(np.all((ratios >= lo) & (ratios <= hi))),
                 [float(ratios.min()), float(ratios.max())], predicted=[pred.m, pred.M], inflate=INFLATE,
                 n_functions=int(len(ratios)))
        # (d) reconstruction
        t1 = time.perf_counter()
        n = min(self.n_reconstruct, len(F))
        sub = {j: np.asarray(c)[:, :n] for j, c in coeffs.items()}
        _, report = reconstruct_full(system, sub, level_duals(system), truth=F[:n])
        err = float(max(report.relative_error))
        cert.timings["reconstruct"] = time.perf_counter() - t1
        cert.add("reconstruction_error", err < self.tolerance, err, threshold=self.tolerance, n_signals=n)
        for check in self.checks:
            check(self, system, cert, ratios)
        cert.timings["total"] = time.perf_counter() - t0
        data = {"system": system, "F": F, "coeffs": coeffs, "ratios": ratios, "predicted": pred,
                "level_lower": lower, "report": report}
        return cert, data


def level_lower_bounds(system, F, coeffs):
    """Per-level lower bounds: exact for lattice levels, test-span otherwise."""
    out = {}
    span = None
    for l in system.levels:
        if l.exp_bounds.kind == "lattice-exact":
            out[l.index] = l.exp_bounds.m
        else:
            if span is None:
                span = level_span_bounds(system, F, coeffs)
            out[l.index] = span[l.index]["m_span"] if l.index in span else l.exp_bounds.M
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if obj is None or isinstance(obj, (str, int, float, bool)):
        return obj
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return repr(obj)


# ---------------------------------------------------------------------------
# shared checks


def _check_tight(bound):
    def check(entry, system, cert, ratios):
        spread = float(ratios.max() - ratios.min())
        cert.add("tight", spread <= 1e-3 * bound and abs(float(ratios.mean()) - bound) <= 1e-3 * bound,
                 [float(ratios.min()), float(ratios.max())], bound=bound)
    return check


def _dyadic_matrices(j_range, dim=1, sign=1):
    return {j: (2.0 ** (sign * j)) * np.eye(dim) for j in range(j_range[0], j_range[1] + 1)}


def _auto_truncation(truncation, jitter):
    if truncation == "auto":
        return "nyquist" if not jitter else 32.0
    return truncation


def _shell_1d(r0, r1):
    return symmetric(Box([r0], [r1]))


# ---------------------------------------------------------------------------
# one dimension

_SHANNON_Q = symmetric(Box([0.5], [1.0]))


def shannon_1d(j_range=(-4, 4), density_factor=2.0, jitter=0.0, seed=42, truncation="auto",
               grid_step=None, ensemble_size=200):
    """Shannon-type wavelets: ``h = 1_Q``, ``Q = [-1, -1/2] u [1/2, 1]``, ``A_j = 2^j``.

    Reference translations form ``s Z`` with ``s = 1 / (2 density_factor)``
    (so that ``X_j = 2^{-j} s Z`` has density ``density_factor * 2^{j+1}``),
    optionally jittered by ``jitter * s``.  Regular grids give a tight
    frame with bound ``1/s``.
    """
    if not density_factor > 1:
        raise PreconditionError(f"density_factor must exceed 1, got {density_factor}")
    if not 0 <= jitter <= 0.5:
        raise PreconditionError("jitter must lie in [0, 1/2] of the spacing")
    s = 1.0 / (2.0 * density_factor)
    truncation = _auto_truncation(truncation, jitter)
    j0, j1 = j_range
    step = grid_step or (2.0**-10 if truncation == "nyquist" else _fine_step(truncation, s, j0, 1.0))
    spec = WaveletSpec(IndicatorWindow(_SHANNON_Q), _SHANNON_Q, _dyadic_matrices(j_range),
                       LatticeRule(s, jitter=jitter, seed=seed), name="shannon_1d")
    grid = FrequencyGrid.symmetric(2.0**j1, step)
    tiles = Covering([Box([0.5 * 2.0**j], [2.0**j]) for j in range(j0, j1 + 1)], list(range(j0, j1 + 1)))
    checks = [_check_tight(1.0 / s)] if not jitter else []
    checks.append(_check_shannon_closed_form)
    return GalleryEntry(
        "shannon_1d", {"j_range": list(j_range), "density_factor": density_factor, "jitter": jitter, "seed": seed},
        spec, grid, truncation, tiles, Box([0.5 * 2.0**j0], [2.0**j1]), 2.0**j0 / 64,
        1e-6 if not jitter else 5e-3, {"size": ensemble_size},
        {"tight": not jitter, "bound": 1.0 / s, "decay_order": 1}, checks)


def _fine_step(R, s, j0, qmax):
    # 8 samples per period of the fastest truncated exponential
    fastest = (R + s) * 2.0 ** (-j0) * qmax
    return 2.0 ** math.floor(math.log2(1.0 / (8 * fastest)))


def shannon_atom(x, j=0, xk=0.0):
    """Closed form ``2^{-j/2} cos(2^{-j-1} 3 pi (x - xk)) sinc(2^{-j-1} pi (x - xk))``.

    Here ``sinc(u) = sin(u) / u``; this is the atom with ``A_j = 2^{-j}``.
    """
    u = np.asarray(x, dtype=float) - xk
    v = 2.0 ** (-j - 1) * np.pi * u
    return 2.0 ** (-j / 2) * np.cos(3 * v) * np.sinc(v / np.pi)


def _check_shannon_closed_form(entry, system, cert, ratios):
    # level 0 atom 0 against the closed form (A = 1: psi(x) = cos(3 pi x / 2) sinc(x / 2))
    x = np.linspace(-20, 20, 100)
    lvl = system.level(0) if 0 in system.indices else system.levels[0]
    k = int(np.argmin(np.abs(lvl.t[:, 0])))
    j = -int(round(math.log2(abs(np.linalg.inv(lvl.L)[0, 0]))))
    num = atom_eval_time(system, lvl.index, k, x[:, None])
    xk = float(np.linalg.inv(np.linalg.inv(lvl.L).T)[0, 0] * lvl.t[k, 0])
    ref = shannon_atom(x, j, xk)
    err = float(np.max(np.abs(num - ref)))
    cert.add("closed_form_atom", err < 1e-6, err, threshold=1e-6)


def kadec_riesz_1d(j_range=(-4, 4), L_fractions=0.1, seed=42, R=32.0, grid_step=None, ensemble_size=200):
    """Shannon window on perturbed integer grids ``x_{j,k} = 2^j (k + d_{j,k})``.

    Atoms are ``psi(2^{-j} x - t)`` with ``t = k + d``, ``|d| <= L_j / 2^j``.
    The bound ``L_j < 2^j / 4`` is enforced.  Kadec's theorem certifies the
    perturbed exponentials on intervals of length one; because ``Q``
    spans ``[-1, 1]`` the same argument on ``Q`` needs ``L_j < 2^j / 8``,
    which the per-level certificate reports separately.

    The reference translations sit at the critical density of ``Q``, so
    the level pieces are approximated by truncated exponential sums with
    an error decaying only like ``R^{-1/2}``; the declared reconstruction
    tolerance (0.25 at ``R = 32``) reflects that.
    """
    j0, j1 = j_range
    js = list(range(j0, j1 + 1))
    fr = L_fractions if isinstance(L_fractions, dict) else {j: float(L_fractions) for j in js}
    for j in js:
        if not 0 <= fr[j] < 0.25:
            raise PreconditionError(f"level {j}: L_j = {fr[j]} * 2^j is not below 2^j / 4")
    rng = np.random.default_rng(seed)
    k = np.arange(-int(R), int(R) + 1)
    grids, certs = {}, {}
    for j in js:
        t = k + rng.uniform(-fr[j], fr[j], len(k))
        grids[j] = ExplicitGrid(PointSet(t[:, None]))
        kd = check_kadec(t, 1.0)
        D2 = 1 - math.cos(2 * math.pi * kd["delta"]) + math.sin(2 * math.pi * kd["delta"])
        kd["certified_on_Q"] = bool(kd["delta"] < 0.125)
        kd["riesz_bounds_on_Q"] = [(1 - D2) ** 2, (1 + D2) ** 2] if kd["certified_on_Q"] else None
        certs[j] = kd
    step = grid_step or _fine_step(R, 0.25, -j1, 1.0)
    spec = WaveletSpec(IndicatorWindow(_SHANNON_Q), _SHANNON_Q, _dyadic_matrices(j_range, sign=-1), grids,
                       name="kadec_riesz_1d", meta={"riesz_basis": True})
    grid = FrequencyGrid.symmetric(2.0**-j0, step)
    tiles = Covering([Box([0.5 * 2.0**-j], [2.0**-j]) for j in js], js)

    def kadec_check(entry, system, c, ratios):
        for j in js:
            lam = np.linalg.eigvalsh(gram_matrix(system.level(j).reference_system()))
            info = certs[j]
            ok = info["certified"] and lam.min() > 0
            if info["certified_on_Q"]:
                lo, hi = info["riesz_bounds_on_Q"]
                ok = ok and lam.min() >= lo * (1 - 1e-9) and lam.max() <= hi * (1 + 1e-9)
            c.add(f"kadec_level_{j}", ok, [float(lam.min()), float(lam.max())],
                  delta=info["delta"], certified_on_Q=info["certified_on_Q"],
                  riesz_bounds_on_Q=info["riesz_bounds_on_Q"])

    return GalleryEntry(
        "kadec_riesz_1d", {"j_range": list(j_range), "L_fractions": fr, "seed": seed, "R": R},
        spec, grid, R, tiles, Box([0.5 * 2.0**-j1], [2.0**-j0]), 2.0**-j1 / 64, 0.25,
        {"size": ensemble_size}, {"riesz_basis": True, "kadec": certs}, [kadec_check])


def bspline_1d(n=4, j_range=(-4, 4), density_factor=2.0, jitter=0.0, seed=42, truncation="auto",
               grid_step=None, ensemble_size=200):
    """Smooth wavelets with ``h_+(xi) = n beta_{n-1}(n (xi - 1/4))`` and ``eps = 1/4``.

    ``h = h_+(xi) + h_+(-xi)`` is supported in ``Q_eps = [-5/4, -1/4] u
    [1/4, 5/4]``; reference translations have spacing
    ``1 / (2.5 density_factor)``.  The atoms decay like ``|x|^{-n}``.
    """
    if n < 2:
        raise PreconditionError("n must be at least 2")
    if not density_factor > 1:
        raise PreconditionError(f"density_factor must exceed 1, got {density_factor}")
    eps = 0.25
    s = 1.0 / (2.0 * (1 + eps) * density_factor)
    truncation = _auto_truncation(truncation, jitter)
    j0, j1 = j_range
    step = grid_step or (2.0**-10 if truncation == "nyquist" else _fine_step(truncation, s, j0, 1.25))
    window = bspline_window(n)
    Qe = symmetric(Box([0.25], [1.25]))
    spec = WaveletSpec(window, _SHANNON_Q, _dyadic_matrices(j_range), LatticeRule(s, jitter=jitter, seed=seed),
                       ref_region=Qe, name="bspline_1d")
    grid = FrequencyGrid.symmetric(1.25 * 2.0**j1, step)
    tiles = Covering([Box([0.5 * 2.0**j], [2.0**j]) for j in range(j0, j1 + 1)], list(range(j0, j1 + 1)))

    def decay_check(entry, system, cert, ratios):
        prof = decay_profile(n)
        cert.add("decay", prof["bounded"], prof["sup"], bound=prof["bound"], order=n)

    return GalleryEntry(
        "bspline_1d", {"n": n, "j_range": list(j_range), "density_factor": density_factor, "jitter": jitter,
                       "seed": seed},
        spec, grid, truncation, tiles, Box([0.5 * 2.0**j0], [2.0**j1]), 2.0**j0 / 64, 1e-4,
        {"size": ensemble_size}, {"decay_order": n}, [decay_check])


def bspline_window(n):
    """``h(xi) = h_+(xi) + h_+(-xi)`` with ``h_+(xi) = n beta_{n-1}(n (xi - 1/4))``."""
    return symmetrize(BSplineWindow(n - 1, n, -n / 4.0, n))


def decay_profile(n, kmax=10, per_shell=4000):
    """Shell suprema of ``|psi(x)| |x|^n`` over ``2^{k-1} < |x| <= 2^k``.

    ``psi`` is the inverse transform of :func:`bspline_window`; its modulus
    is at most ``2 (n / pi)^n |x|^{-n}``.  The check passes when every
    shell supremum stays below that constant and the suprema settle
    (the last increment is below ``1e-3`` of the bound).
    """
    h = bspline_window(n)
    sups = []
    for k in range(0, kmax + 1):
        x = np.linspace(2.0 ** (k - 1), 2.0**k, per_shell)
        v = np.abs(h.inverse_ft(x[:, None])) * x**n
        sups.append(float(v.max()))
    bound = 2 * (n / math.pi) ** n
    settle = abs(sups[-1] - sups[-2])
    ok = all(s <= bound * (1 + 1e-9) for s in sups) and settle <= 1e-3 * bound
    return {"sup": sups, "bound": bound, "bounded": bool(ok), "last_increment": settle}


# ---------------------------------------------------------------------------
# two dimensions


def _grid_2d(extent, step):
    return FrequencyGrid.symmetric(extent, step, dim=2)


def radial_2d(kind="shannon", n=4, j_range=(-2, 2), density_factor=2.0, grid_step=1 / 32, squared=False,
              ensemble_size=16):
    """Radial wavelets with ``A = 2 I`` on the tile ``{1/2 <= |xi| <= 1}``.

    ``kind="shannon"`` uses ``h = 1_Q``; ``kind="bspline"`` uses
    ``h = n beta_{n-1}(n (|xi| - 1/4))`` (or of ``|xi|^2`` with ``squared``).
    Translations form the square lattice ``s Z^2``, ``s = 1/(2 density_factor)``
    (1/(2.5 density_factor) for the B-spline support).
    """
    if not density_factor > 1:
        raise PreconditionError(f"density_factor must exceed 1, got {density_factor}")
    Q = AnnulusSector(0.5, 1.0)
    if kind == "shannon":
        window, ref, s, reach = IndicatorWindow(Q), Q, 1.0 / (2 * density_factor), 1.0
    elif kind == "bspline":
        window = RadialBSplineWindow(n - 1, n, -n / 4.0, n, dim=2, squared=squared)
        ref = window.support
        s, reach = 1.0 / (2.5 * density_factor), float(ref.r1)
    else:
        raise ConfigurationError(f"unknown radial kind {kind!r}")
    j0, j1 = j_range
    spec = WaveletSpec(window, Q, _dyadic_matrices(j_range, 2), LatticeRule(s), ref_region=ref,
                       name=f"radial_2d_{kind}")
    grid = _grid_2d(reach * 2.0**j1, grid_step)
    tiles = Covering([AnnulusSector(0.5 * 2.0**j, 2.0**j) for j in range(j0, j1 + 1)], list(range(j0, j1 + 1)))

    def radial_check(entry, system, cert, ratios):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1.3, 1.3, (200, 2))
        worst = 0.0
        for th in rng.uniform(0, 2 * np.pi, 100):
            worst = max(worst, float(np.max(np.abs(window(x @ rotation(th).T) - window(x)))))
        cert.add("radial_symmetry", worst <= 1e-12, worst, threshold=1e-12)

    checks = [radial_check]
    if kind == "shannon":
        checks.append(_check_tight(1.0 / s**2))
    return GalleryEntry(
        f"radial_2d_{kind}", {"kind": kind, "n": n, "j_range": list(j_range), "density_factor": density_factor,
                              "grid_step": grid_step, "squared": squared},
        spec, grid, "nyquist", tiles, AnnulusSector(0.5 * 2.0**j0, 2.0**j1), 2.0**j0 / 32,
        1e-6, {"size": ensemble_size}, {"tight": kind == "shannon"}, checks)


def directional_2d(n_dirs=4, j_range=(-1, 1), smooth=False, n=4, eps_angle=None, density_factor=2.0,
                   grid_step=1 / 32, ensemble_size=16):
    """Directional wavelets indexed by ``j = (j1, j2)``, ``A_j = 2^{j1} R^{j2}``.

    ``R`` rotates by ``pi / n_dirs`` and ``j2 = 0 .. n_dirs - 1``.  The tile
    is the double sector ``Q = Q1 u (-Q1)``, ``Q1 = {1/2 <= r <= 1,
    |theta| <= pi / (2 n_dirs)}``.  ``smooth`` replaces the indicator by a
    radial B-spline times an angular B-spline bump widened by
    ``eps_angle``.  The translations of each level form a square lattice
    rotated with the level so that the FFT path applies.
    """
    if n_dirs < 2:
        raise PreconditionError("n_dirs must be at least 2")
    half = math.pi / (2 * n_dirs)
    Q = symmetric(AnnulusSector(0.5, 1.0, -half, half))
    if smooth:
        eps_angle = half / 2 if eps_angle is None else eps_angle
        radial = BSplineWindow(n - 1, n, -n / 4.0, n)
        angular = _bump_1d(-half, half, eps_angle, 3)
        window = symmetrize(PolarWindow(radial, angular))
        ref = symmetric(AnnulusSector(0.25, 1.25, -half - eps_angle, half + eps_angle))
        s, reach = 1.0 / (2.5 * density_factor), 1.25
    else:
        window, ref, s, reach = IndicatorWindow(Q), Q, 1.0 / (2 * density_factor), 1.0
    R = rotation(math.pi / n_dirs)
    j0, j1 = j_range
    mats, tiles, idx = {}, [], []
    for j1_ in range(j0, j1 + 1):
        for j2 in range(n_dirs):
            A = 2.0**j1_ * np.linalg.matrix_power(R, j2)
            mats[(j1_, j2)] = A
            tiles.append(_affine(A.T, Q))
            idx.append((j1_, j2))
    spec = WaveletSpec(window, Q, mats, LatticeRule(s), ref_region=ref, name="directional_2d")
    grid = _grid_2d(reach * 2.0**j1, grid_step)
    return GalleryEntry(
        "directional_2d", {"n_dirs": n_dirs, "j_range": list(j_range), "smooth": smooth, "n": n,
                           "density_factor": density_factor, "grid_step": grid_step},
        spec, grid, "nyquist", Covering(tiles, idx), AnnulusSector(0.5 * 2.0**j0, 2.0**j1), 2.0**j0 / 32,
        1e-6, {"size": ensemble_size}, {"directions": n_dirs}, [])


def _affine(M, region):
    from .geometry import AffineImage

    return AffineImage(M, region)


def spiral_matrix(a=2.0, m=4):
    """``A = a^{1/m} R_{2 pi / m}``, so that ``A^m = a I``."""
    return a ** (1.0 / m) * rotation(2 * math.pi / m)


def spiral_2d(a=2.0, m=4, eps=0.25, j_range=(0, 8), spacing=None, grid_step=1 / 32, ensemble_size=16):
    """Spiral-sector wavelets with ``A = a^{1/m} R_{2 pi / m}``.

    ``Q = {lam Gamma(beta) : 1 <= lam <= a, 0 <= beta <= 1/m}`` with the
    logarithmic spiral ``Gamma(t) = a^t (cos 2 pi t, sin 2 pi t)``, so the
    tiles ``A^j Q`` are consecutive spiral sectors.  The window is a spiral
    B-spline bump widened by ``eps (a - 1)`` in ``lam`` and ``eps / m`` in
    ``beta``.  The level matrices are ``(A^j)^T`` so that the level tiles are
    exactly ``A^j Q``.  The square lattice spacing must give a gap below
    ``1 / (2 diam Q_eps)``.
    """
    if not a > 1 or int(m) != m or m < 2:
        raise PreconditionError("spiral needs a > 1 and an integer m >= 2")
    A = spiral_matrix(a, m)
    Q = SpiralSector(a, 1.0, a, 0.0, 1.0 / m)
    window = SpiralBump(Q, eps * (a - 1), eps / m)
    ref = window.support
    delta = ref.diameter()
    limit = 1.0 / (2 * delta)
    s = spacing if spacing is not None else 0.9 * limit * 2 / math.sqrt(2)
    rho = s * math.sqrt(2) / 2
    if not rho < limit:
        raise PreconditionError(f"lattice gap {rho:.6g} is not below 1/(2 diam Q_eps) = {limit:.6g}")
    j0, j1 = j_range
    mats = {j: np.linalg.matrix_power(A, j).T for j in range(j0, j1 + 1)}
    spec = WaveletSpec(window, Q, mats, LatticeRule(s), ref_region=ref, name="spiral_2d",
                       meta={"a": a, "m": m, "gap": rho, "gap_limit": limit})
    tiles = Covering([_affine(np.linalg.matrix_power(A, j), Q) for j in range(j0, j1 + 1)], list(range(j0, j1 + 1)))
    reach = a * a ** ((j1 + 1) / m) * (1 + eps)
    grid = _grid_2d(reach, grid_step)
    # an annulus covered by every angle: radii [a^{(j0+m)/m}, a^{(j1+1)/m}] when j1 - j0 >= 2m - 1
    r_in, r_out = a ** ((j0 + m) / m), a ** ((j1 + 1) / m)
    probe = AnnulusSector(r_in, max(r_out, r_in * (1 + 1e-9)))

    def spiral_check(entry, system, cert, ratios):
        err = float(np.linalg.norm(np.linalg.matrix_power(A, m) - a * np.eye(2), 2))
        cert.add("spiral_power", err <= 1e-12, err, threshold=1e-12)
        cert.add("spiral_gap", rho < limit, rho, limit=limit)

    return GalleryEntry(
        "spiral_2d", {"a": a, "m": m, "eps": eps, "j_range": list(j_range), "spacing": s, "grid_step": grid_step},
        spec, grid, "nyquist", tiles, probe, (r_out - r_in) / 64, 1e-6,
        {"size": ensemble_size, "rel_width": 0.5}, {"matrix": A.tolist()}, [spiral_check])


# ---------------------------------------------------------------------------
# coverings built directly


def gabor_nonharmonic(j_range=(0, 8), density_factor=1.25, jitter=0.0, seed=42, R=32.0, grid_step=2.0**-9,
                      ensemble_size=200):
    """Atoms ``beta_3(omega - j) |S_j|^{-1/2} e_{x_{j,k}}(omega)`` on ``S_j = [0, 4] + j``.

    ``S_j`` is the support of ``beta_3(. - j)``, which the construction
    needs; the translations have density ``4 * density_factor``.
    """
    if not density_factor > 1:
        raise PreconditionError(f"density_factor must exceed 1, got {density_factor}")
    s = 1.0 / (4.0 * density_factor)
    j0, j1 = j_range
    js = list(range(j0, j1 + 1))
    S = [Box([j], [j + 4.0]) for j in js]
    cov = Covering(S, js)
    members = [BSplineWindow(3, 1.0, -float(j)) for j in js]
    rpu = RPU(members, js, cov)
    rule = LatticeRule(s, jitter=jitter, seed=seed)
    grids = {j: PointSet(rule.points(R, 1, pos)) for pos, j in enumerate(js)}
    core = Box([j0 + 3.0], [j1 + 1.0])
    grid = FrequencyGrid(np.array([float(j0)]), grid_step, [int(round((j1 + 4 - j0) / grid_step))])

    def builder(g):
        return build_tf_atoms(cov, rpu, grids, g, core=core)

    return GalleryEntry(
        "gabor_nonharmonic", {"j_range": list(j_range), "density_factor": density_factor, "jitter": jitter,
                              "seed": seed, "R": R},
        None, grid, R, cov, core, 1 / 64, 1e-4,
        {"size": ensemble_size, "rel_width": 0.3, "radii": (3.0 + j0, 1.0 + j1)}, {"covering_index": 4}, [],
        builder=builder)


def recipe(V=None, A=None, h=None, X=None, eps=0.25, j_range=(-1, 1), grid_step=1 / 32, ensemble_size=16):
    """Single-matrix wavelets from a neighbourhood ``V`` of 0 and expansive ``A``.

    ``Q = closure(A^T V \\ V)``; ``h`` defaults to a smooth bump equal to one
    on ``Q`` and vanishing at distance ``eps``.  ``X`` is a
    :class:`LatticeRule` or a point set; its gap must be below
    ``1 / (2 delta)`` with ``delta = diam Q + 2 eps`` (the diameter of
    ``Q_eps``).  Each violated requirement raises a
    :class:`PreconditionError` naming it.
    """
    V = V or Box([-1.0, -1.0], [1.0, 1.0])
    d = V.dim
    A = np.asarray(2.0 * np.eye(d) if A is None else A, dtype=float).reshape(d, d)
    probe = 1e-9 * np.vstack([np.eye(d), -np.eye(d)])
    if not np.all(V.contains(np.vstack([np.zeros((1, d)), probe]))):
        raise PreconditionError("recipe: 0 is not an interior point of V")
    if not is_expansive(A):
        raise PreconditionError("recipe: A is not expansive")
    Q = dilation_ring(A.T, V)
    h = h or SmoothBump(Q, eps)
    lo, hi = Q.bounding_box()
    step = float(np.max(hi - lo)) / (400 if d == 1 else 120)
    from .geometry import probe_grid

    pts = probe_grid((lo, hi), step)
    inq = pts[Q.contains(pts)]
    hv = np.abs(h(inq))
    if hv.min() <= 1e-12:
        w = inq[int(np.argmin(hv))].tolist()
        raise PreconditionError(f"recipe: h vanishes on Q at {w}", witness=w)
    outer = probe_grid((lo - 2 * eps - step, hi + 2 * eps + step), step)
    nz = outer[np.abs(h(outer)) > 1e-12]
    if len(nz):
        dist = Q.distance(nz)
        if dist.max() > eps + step:
            w = nz[int(np.argmax(dist))].tolist()
            raise PreconditionError(f"recipe: supp h leaves Q_eps at {w}", witness=w)
    delta = Q.diameter() + 2 * eps
    limit = 1.0 / (2 * delta)
    X = X if X is not None else LatticeRule(0.9 * limit * 2 / math.sqrt(d))
    if isinstance(X, LatticeRule):
        if X.jitter:
            raise PreconditionError("recipe: use a point set for jittered grids")
        sv = X.spacing_vector(d)
        rho, sep = float(np.linalg.norm(sv) / 2), float(sv.min())
        rule = X
    else:
        X = X if isinstance(X, PointSet) else PointSet(np.asarray(X, dtype=float))
        sep = separation(X)
        plo, phi = X.points.min(axis=0), X.points.max(axis=0)
        m = 0.25 * (phi - plo)
        rho = gap(X, Box(plo + m, phi - m), limit / 20)
        rule = ExplicitGrid(X)
    if not sep > 0:
        raise PreconditionError("recipe: X is not separated")
    if not rho < limit * (1 - 1e-12):
        raise PreconditionError(f"recipe: gap {rho:.6g} is not below 1/(2 delta) = {limit:.6g}", witness=rho)
    j0, j1 = j_range
    mats = {j: np.linalg.matrix_power(A, j) if j >= 0 else np.linalg.matrix_power(np.linalg.inv(A), -j)
            for j in range(j0, j1 + 1)}
    ref = h.support
    spec = WaveletSpec(h, Q, mats, rule, ref_region=ref, name="recipe",
                       meta={"delta": delta, "gap": rho, "gap_limit": limit})
    tiles = Covering([_affine(mats[j].T, Q) for j in mats], list(mats))
    slo, shi = ref.bounding_box()
    reach = float(np.max(np.abs(np.concatenate([slo, shi])))) * float(np.linalg.norm(mats[j1], 2))
    grid = _grid_2d(reach, grid_step) if d == 2 else FrequencyGrid.symmetric(reach, grid_step, d)
    truncation = "nyquist" if isinstance(rule, LatticeRule) else 8.0
    # the tiles telescope: their union is (A^T)^{j1+1} V minus (A^T)^{j0} V
    probe_region = Difference(_affine(np.linalg.matrix_power(A.T, j1 + 1), V), _affine(mats[j0].T, V))
    return GalleryEntry(
        "recipe", {"A": A.tolist(), "eps": eps, "j_range": list(j_range), "grid_step": grid_step},
        spec, grid, truncation, tiles, probe_region, grid_step, 1e-6, {"size": ensemble_size},
        {"gap_limit": limit}, [])


# ---------------------------------------------------------------------------
# registry and exports

ENTRIES = {
    "shannon_1d": shannon_1d,
    "kadec_riesz_1d": kadec_riesz_1d,
    "bspline_1d": bspline_1d,
    "radial_2d": radial_2d,
    "radial_2d_bspline": lambda **kw: radial_2d(kind="bspline", **kw),
    "directional_2d": directional_2d,
    "spiral_2d": spiral_2d,
    "gabor_nonharmonic": gabor_nonharmonic,
    "recipe": recipe,
}


def get_entry(name, **overrides):
    if name not in ENTRIES:
        raise ConfigurationError(f"unknown gallery entry {name!r}; choose from {sorted(ENTRIES)}")
    return ENTRIES[name](**overrides)


def export_plot_data(entry, system, coeffs, outdir, n_profile=801):
    """Write plot-ready CSVs: atom profiles, frequency supports, coefficient energy.

    Returns the list of written paths.
    """
    import os

    os.makedirs(outdir, exist_ok=True)
    paths = []
    # atom profiles: the atom closest to the origin of each level along the first axis
    x = np.linspace(-8, 8, n_profile)
    pts = np.zeros((n_profile, system.dim))
    pts[:, 0] = x
    path = os.path.join(outdir, "atom_profiles.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "x", "re", "im"])
        for l in system.levels:
            k = int(np.argmin(np.linalg.norm(l.t, axis=1)))
            v = atom_eval_time(system, l.index, k, pts)
            for xi, z in zip(x, v):
                w.writerow([_jkey(l.index), f"{xi:.6g}", f"{z.real:.10g}", f"{z.imag:.10g}"])
    paths.append(path)
    # frequency supports: |h_j|^2 along the first axis
    grid = system.grid
    axis = grid.axes[0]
    probe = np.zeros((len(axis), system.dim))
    probe[:, 0] = axis
    if system.dim > 1:
        probe[:, 0] = axis * math.cos(0.1)
        probe[:, 1] = axis * math.sin(0.1)
    path = os.path.join(outdir, "frequency_supports.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "omega", "h2"])
        for l in system.levels:
            v = np.abs(l.window_values(probe)) ** 2
            for o, z in zip(axis, v):
                if z > 0:
                    w.writerow([_jkey(l.index), f"{o:.8g}", f"{z:.10g}"])
    paths.append(path)
    path = os.path.join(outdir, "coefficient_energy.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "n_atoms", "energy"])
        for l in system.levels:
            c = np.asarray(coeffs[l.index]).reshape(l.K, -1)
            w.writerow([_jkey(l.index), l.K, f"{float(np.sum(np.abs(c[:, 0]) ** 2)):.12g}"])
    paths.append(path)
    return paths


def _jkey(j):
    return ";".join(str(v) for v in j) if isinstance(j, tuple) else str(j)
