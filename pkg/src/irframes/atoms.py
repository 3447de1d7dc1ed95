"""Time-frequency atoms glued from an RPU and per-level exponential frames.

Every level ``j`` of an :class:`AtomSystem` holds atoms of the form

    g_{j,k}(omega) = a_j * h_j(L_j omega) * exp(-2 pi i t_{j,k} . L_j omega)

with a linear map ``L_j``, an amplitude ``a_j``, a reference window
``h_j`` and reference translations ``t_{j,k}``.  Wavelet systems use
``L_j = A_j^{-T}`` and ``a_j = |det L_j|^{1/2}``; atoms built directly on a
covering use ``L_j = I``.  Signals are sampled on a uniform cell-centred
:class:`FrequencyGrid` and inner products are Riemann sums on that grid.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix, as_points, check_positive
from .errors import ConfigurationError, ConstructionError, DomainError, PreconditionError, ResolutionError
from .fourier_frames import ExponentialSystem, FrameBounds, gram_matrix, ritz_bounds
from .geometry import AffineImage, PointSet, Region, Union, jitter_points, lattice_points
from .partitions import RPU, IndicatorWindow, Window, level_set

__all__ = [
    "FrequencyGrid",
    "Level",
    "AtomSystem",
    "LatticeRule",
    "ExplicitGrid",
    "WaveletSpec",
    "SmoothEnsemble",
    "glue_frames",
    "build_tf_atoms",
    "build_wavelet_frame",
    "atom_eval_time",
    "analysis",
    "synthesis",
    "frame_operator_apply",
    "frame_ratios",
    "empirical_frame_bounds",
    "level_span_bounds",
    "coefficients_to_csv",
    "coefficients_from_csv",
    "check_resolution",
    "predicted_bounds",
]

_CHUNK = 1 << 21  # complex entries per exponential block


# ---------------------------------------------------------------------------
# frequency grid


class FrequencyGrid:
    """Uniform cell-centred grid ``omega_n = lo + (n + 1/2) * step``.

    Points are stored row-major (last axis fastest).
    """

    def __init__(self, lo, step, shape):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.step = check_positive(step, "step")
        self.shape = tuple(int(n) for n in np.atleast_1d(shape))
        if len(self.shape) != len(self.lo):
            raise DomainError("grid shape and origin must match")
        self.dim = len(self.shape)
        self.axes = [self.lo[i] + (np.arange(self.shape[i]) + 0.5) * self.step for i in range(self.dim)]

    @classmethod
    def symmetric(cls, extent, step, dim=1):
        """Grid on ``[-E, E)^d`` with ``E`` rounded up to a multiple of ``step``."""
        n = int(math.ceil(extent / step))
        return cls(-n * step * np.ones(dim), step, (2 * n,) * dim)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell(self):
        return self.step**self.dim

    @property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def subbox(self, lo, hi):
        """Index ranges of grid points with coordinates in ``[lo, hi]``."""
        ranges = []
        for i in range(self.dim):
            a = int(math.ceil((lo[i] - self.lo[i]) / self.step - 0.5 - 1e-9))
            b = int(math.floor((hi[i] - self.lo[i]) / self.step - 0.5 + 1e-9))
            a, b = max(a, 0), min(b, self.shape[i] - 1)
            if b < a:
                return None
            ranges.append((a, b + 1))
        return ranges

    def flat_index(self, ranges):
        idx = np.ravel_multi_index(np.meshgrid(*[np.arange(a, b) for a, b in ranges], indexing="ij"), self.shape)
        return idx.ravel()

    def norm2(self, F):
        """Squared L2 norms of rows of ``F`` (Riemann sum)."""
        return self.cell * np.sum(np.abs(np.atleast_2d(F)) ** 2, axis=1)

    def to_dict(self):
        return {"lo": self.lo.tolist(), "step": self.step, "shape": list(self.shape)}


# ---------------------------------------------------------------------------
# levels


@dataclass
class Level:
    """One level of an atom system (see the module docstring).

    ``lattice`` is set when the translations form a full period of a
    lattice that is aligned with the grid, enabling the FFT path.
    """

    index: object
    L: np.ndarray
    amplitude: float
    window: Window
    ref_region: Region
    t: np.ndarray
    lattice: dict | None = None
    exp_bounds: FrameBounds | None = None

    @property
    def dim(self):
        return self.L.shape[0]

    @property
    def K(self):
        return len(self.t)

    @property
    def tau(self):
        # exp(-2 pi i t . L omega) = exp(-2 pi i (L^T t) . omega)
        return self.t @ self.L

    @property
    def kappa(self):
        """Ratio between level frame bounds and those of ``{e_t 1_Q}``."""
        return self.amplitude**2 / abs(np.linalg.det(self.L))

    def window_values(self, omega):
        """``h_j(L_j omega)`` (the partition member, without amplitude)."""
        return self.window(as_points(omega, dim=self.dim) @ self.L.T)

    def support_box(self):
        sup = AffineImage(np.linalg.inv(self.L), self.window.support)
        return sup.bounding_box()

    def reference_system(self):
        return ExponentialSystem(PointSet(self.t), self.ref_region)


def _level_grid(level, grid):
    lo, hi = level.support_box()
    ranges = grid.subbox(lo, hi)
    if ranges is None:
        return None
    axes = [grid.axes[i][a:b] for i, (a, b) in enumerate(ranges)]
    return ranges, axes, grid.flat_index(ranges)


def _mesh(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _exp_blocks(axes, tau, sign):
    """Yield ``(start, stop, P)`` with ``P[n, k] = exp(sign 2 pi i tau_k . omega_n)``.

    Exponentials are formed as products of per-axis tables; along the
    first axis a block of offsets is shared by all row blocks since the
    grid is uniform.
    """
    K = len(tau)
    rest = np.ones((1, K), dtype=complex)
    for i, ax in enumerate(axes[1:], start=1):
        T = np.exp(sign * 2j * np.pi * np.outer(ax, tau[:, i]))
        rest = (rest[:, None, :] * T[None, :, :]).reshape(-1, K)
    n_rest = rest.shape[0]
    rows = max(1, _CHUNK // max(1, n_rest * K))
    ax0 = axes[0]
    rows = min(rows, len(ax0))
    fine = np.exp(sign * 2j * np.pi * np.outer(ax0[:rows] - ax0[0], tau[:, 0]))
    for a in range(0, len(ax0), rows):
        b = min(len(ax0), a + rows)
        coarse = np.exp(sign * 2j * np.pi * ax0[a] * tau[:, 0])
        T0 = fine[: b - a] * coarse[None, :]
        if n_rest == 1:
            P = T0
        else:
            P = (T0[:, None, :] * rest[None, :, :]).reshape(-1, K)
        yield a * n_rest, b * n_rest, P


def _lattice_fold(V, shape_sub, N):
    # V: (n_sub, S) on a sub-box; fold each axis modulo N[a]
    S = V.shape[1]
    arr = V.reshape(tuple(shape_sub) + (S,))
    for a, n in enumerate(N):
        length = arr.shape[a]
        pad = (-length) % n
        if pad:
            widths = [(0, 0)] * arr.ndim
            widths[a] = (0, pad)
            arr = np.pad(arr, widths)
        new_shape = arr.shape[:a] + ((length + pad) // n, n) + arr.shape[a + 1:]
        arr = arr.reshape(new_shape).sum(axis=a)
    return arr


def _level_analysis(level, grid, F):
    """Coefficients ``<f, g_{j,k}>`` for rows of ``F``, shape ``(K, S)``."""
    lg = _level_grid(level, grid)
    S = F.shape[0]
    if lg is None:
        return np.zeros((level.K, S), dtype=complex)
    ranges, axes, idx = lg
    pts = _mesh(axes)
    w = np.conj(level.amplitude * level.window_values(pts))
    V = F[:, idx].T * w[:, None]
    if level.lattice is not None:
        lat = level.lattice
        N = lat["N"]
        sigma = np.asarray(lat["sigma"])
        folded = _lattice_fold(V, [len(a) for a in axes], N)
        axes_fft = tuple(range(len(N)))
        C = np.fft.ifftn(folded, axes=axes_fft) * float(np.prod(N))
        C = np.fft.fftshift(C, axes=axes_fft)
        m = [np.arange(-n // 2, n - n // 2) for n in N]
        phase = np.ones(1, dtype=complex)
        for a in range(len(N)):
            ph = np.exp(2j * np.pi * sigma[a] * m[a] * axes[a][0])
            phase = (phase[:, None] * ph[None, :]).ravel()
        return grid.cell * phase[:, None] * C.reshape(-1, S)
    Vt = np.ascontiguousarray(V.T)
    Ct = np.zeros((S, level.K), dtype=complex)
    for a, b, P in _exp_blocks(axes, level.tau, +1):
        Ct += Vt[:, a:b] @ P
    return grid.cell * Ct.T


def _level_synthesis(level, grid, A):
    """``sum_k A[k] g_{j,k}`` on the grid points of the level box.

    Returns ``(idx, values)`` with values of shape ``(n_sub, S)``.
    """
    lg = _level_grid(level, grid)
    S = A.shape[1]
    if lg is None:
        return np.zeros(0, dtype=int), np.zeros((0, S), dtype=complex)
    ranges, axes, idx = lg
    pts = _mesh(axes)
    w = level.amplitude * level.window_values(pts)
    if level.lattice is not None:
        lat = level.lattice
        N = lat["N"]
        sigma = np.asarray(lat["sigma"])
        m = [np.arange(-n // 2, n - n // 2) for n in N]
        phase = np.ones(1, dtype=complex)
        for a in range(len(N)):
            ph = np.exp(-2j * np.pi * sigma[a] * m[a] * axes[a][0])
            phase = (phase[:, None] * ph[None, :]).ravel()
        B = (phase[:, None] * A).reshape(tuple(N) + (S,))
        axes_fft = tuple(range(len(N)))
        B = np.fft.ifftshift(B, axes=axes_fft)
        B = np.fft.fftn(B, axes=axes_fft)
        # periodic extension over the sub-box
        take = [np.arange(len(ax)) % n for ax, n in zip(axes, N)]
        B = B[np.ix_(*take)] if len(N) > 1 else B[take[0]]
        U = B.reshape(-1, S)
        return idx, U * w[:, None]
    U = np.zeros((len(idx), S), dtype=complex)
    for a, b, P in _exp_blocks(axes, level.tau, -1):
        U[a:b] = P @ A
    return idx, U * w[:, None]


# ---------------------------------------------------------------------------
# atom systems


@dataclass
class AtomSystem:
    """Levels of atoms on a frequency grid with their predicted bounds.

    Attributes
    ----------
    levels : list of Level
    grid : FrequencyGrid
    core : Region
        Working region on which the partition lower bound holds.
    predicted : FrameBounds or None
    rpu_bounds : dict
        ``p_hat`` and ``P_hat`` measured on the grid.
    meta : dict
    """

    levels: list
    grid: FrequencyGrid
    core: Region
    predicted: FrameBounds | None = None
    rpu_bounds: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.grid.dim

    @property
    def n_atoms(self):
        return int(sum(l.K for l in self.levels))

    @property
    def indices(self):
        return [l.index for l in self.levels]

    def level(self, j):
        j = tuple(j) if isinstance(j, list) else j
        for l in self.levels:
            if l.index == j:
                return l
        raise DomainError(f"no level with index {j!r}")

    def rpu(self):
        members = [_LevelMember(l) for l in self.levels]
        return RPU(members, self.indices)

    def sum_squares_on_grid(self):
        """``sum_j |h_j(L_j omega)|^2`` at every grid point."""
        total = np.zeros(self.grid.size)
        for l in self.levels:
            lg = _level_grid(l, self.grid)
            if lg is None:
                continue
            _, axes, idx = lg
            total[idx] += np.abs(l.window_values(_mesh(axes))) ** 2
        return total

    def core_mask(self):
        return self.core.contains(self.grid.points)

    def summary(self):
        return {
            "levels": [str(l.index) for l in self.levels],
            "atoms_per_level": [l.K for l in self.levels],
            "n_atoms": self.n_atoms,
            "grid": self.grid.to_dict(),
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "rpu_bounds": self.rpu_bounds,
            "meta": self.meta,
        }


class _LevelMember(Window):
    def __init__(self, level):
        self.level = level
        self.dim = level.dim
        self.support = AffineImage(np.linalg.inv(level.L), level.window.support)

    def __call__(self, x):
        return self.level.window_values(x)


# ---------------------------------------------------------------------------
# grids of translations


@dataclass
class LatticeRule:
    """Reference translations ``spacing * Z^d + offset``, optionally jittered.

    ``jitter`` is a fraction of the spacing; each level draws its own
    perturbation from ``seed`` and the level position.
    """

    spacing: float | tuple
    offset: float = 0.0
    jitter: float = 0.0
    seed: int = 42

    def spacing_vector(self, dim):
        return np.broadcast_to(np.asarray(self.spacing, dtype=float), (dim,)).copy()

    def points(self, radius, dim, position=0):
        pts = lattice_points(self.spacing_vector(dim), radius, dim, self.offset)
        if self.jitter:
            amount = self.jitter * float(np.min(self.spacing_vector(dim)))
            pts = jitter_points(pts, amount, seed=self.seed + 1000 * position)
            p = pts.points
            return p[np.max(np.abs(p), axis=1) <= radius + 1e-12]
        return pts.points

    def to_dict(self):
        return {"type": "lattice", "spacing": np.atleast_1d(self.spacing).tolist(),
                "offset": self.offset, "jitter": self.jitter, "seed": self.seed}


@dataclass
class ExplicitGrid:
    """User supplied translations (already truncated)."""

    points_: PointSet

    def points(self, radius, dim, position=0):
        p = self.points_.points
        return p[np.max(np.abs(p), axis=1) <= radius + 1e-12]

    def to_dict(self):
        return {"type": "explicit", "points": self.points_.points.tolist()}


@dataclass
class WaveletSpec:
    """Data defining an irregular wavelet system.

    Parameters
    ----------
    window : Window
        Reference window ``h`` (frequency side).
    core : Region
        Tile ``Q`` on which ``|h|^2`` is bounded below.
    matrices : dict
        ``j -> A_j``.
    grids : LatticeRule, ExplicitGrid or dict of those
        Reference translations per level.
    ref_region : Region, optional
        Region containing the support of ``h``; defaults to that support.
    param : {"direct", "scaled"}
        ``"direct"`` uses the grid points as ``t`` in ``exp(-2 pi i t . L omega)``;
        ``"scaled"`` reads the grids as points ``x_{j,k}`` of the form
        ``psi(A_j (x - x_{j,k}))`` and converts them to ``t = A_j x``.
    """

    window: Window
    core: Region
    matrices: dict
    grids: object
    ref_region: Region | None = None
    param: str = "direct"
    name: str = "wavelet"
    meta: dict = field(default_factory=dict)

    def grid_for(self, j):
        if isinstance(self.grids, dict):
            return self.grids[j]
        return self.grids


# ---------------------------------------------------------------------------
# builders


def _level_bounds(level, cache):
    lat = level.lattice
    if lat is not None:
        # exact when the level region fits in one period of the lattice
        lo, hi = AffineImage(np.linalg.inv(level.L), level.ref_region).bounding_box()
        sigma = np.asarray(lat["sigma"])
        if np.all(hi - lo <= 1.0 / sigma + 1e-12):
            A0 = abs(np.linalg.det(level.L)) / float(np.prod(sigma))
            return FrameBounds(A0, A0, "lattice-exact", extra={"sigma": sigma.tolist()})
    key = (level.t.tobytes(), id(level.ref_region))
    if key not in cache:
        lam = np.linalg.eigvalsh(gram_matrix(level.reference_system()))
        cache[key] = float(lam.max())
    # the lower bound needs a test span; see level_span_bounds
    return FrameBounds(float("nan"), cache[key], "gram-estimate", extra={"K": level.K})


_MIN_SAMPLES = 8  # grid samples per period of the fastest truncated exponential


def check_resolution(levels, grid):
    """Raise :class:`ResolutionError` when a truncated level is under-sampled.

    Lattice levels computed by FFT are exact on the grid and exempt.
    """
    for l in levels:
        if l.lattice is not None or l.K == 0:
            continue
        fastest = float(np.max(np.abs(l.tau)))
        if fastest > 0 and 1.0 / (fastest * grid.step) < _MIN_SAMPLES * (1 - 1e-9):
            raise ResolutionError(
                f"level {l.index}: {1.0 / (fastest * grid.step):.2f} samples per period, "
                f"need {_MIN_SAMPLES}; refine the grid step below {1.0 / (_MIN_SAMPLES * fastest):.3g}")


def _finish(levels, grid, core, meta, mode="rpu-general", c=None, rho=None):
    check_resolution(levels, grid)
    system = AtomSystem(levels, grid, core, meta=meta)
    cache = {}
    for l in levels:
        if l.exp_bounds is None:
            l.exp_bounds = _level_bounds(l, cache)
    total = system.sum_squares_on_grid()
    mask = system.core_mask()
    if not np.any(mask):
        raise ResolutionError("no grid point lies in the working region")
    p_hat, P_hat = float(total[mask].min()), float(total.max())
    system.rpu_bounds = {"p_hat": p_hat, "P_hat": P_hat, "where": "grid points of the working region"}
    system.predicted = predicted_bounds(system, mode=mode, c=c, rho=rho)
    return system


def predicted_bounds(system, level_lower=None, mode="rpu-general", c=None, rho=None):
    """Predicted frame bounds from partition and per-level bounds.

    ``rpu-general`` gives ``(p m, P M)``, ``level-set`` gives ``(c m, P M)``
    and ``covering`` gives ``(m, rho M)`` with ``m = min_j kappa_j m_j`` and
    ``M = max_j kappa_j M_j``.  ``level_lower`` may override the per-level
    lower bounds (e.g. with test-span estimates).
    """
    ms, Ms = [], []
    for l in system.levels:
        lower = l.exp_bounds.m if level_lower is None else level_lower[l.index]
        ms.append(l.kappa * lower)
        Ms.append(l.kappa * l.exp_bounds.M)
    m, M = float(np.min(ms)), float(np.max(Ms))
    p, P = system.rpu_bounds["p_hat"], system.rpu_bounds["P_hat"]
    if mode == "rpu-general":
        lo, hi = p * m, P * M
    elif mode == "level-set":
        lo, hi = c * m, P * M
    elif mode == "covering":
        lo, hi = m, rho * M
    else:
        raise ConfigurationError(f"unknown gluing mode {mode!r}")
    kinds = {l.exp_bounds.kind for l in system.levels}
    return FrameBounds(lo, hi, "predicted",
                       extra={"mode": mode, "level_bounds": sorted(kinds), "m_levels": m, "M_levels": M})


def _truncation_points(rule, j, position, L, grid, truncation, dim):
    if truncation == "nyquist":
        return _aligned_lattice(rule, j, L, grid, dim)
    R = check_positive(truncation, "truncation_R")
    return rule.points(R, dim, position), None


def _aligned_lattice(rule, j, L, grid, dim):
    # translations t = (m * sigma) L^{-1}, so that tau = t L is the axis
    # lattice sigma Z^d; N = 1 / (sigma step) is rounded up to an even
    # integer, which can only make the reference lattice denser
    if not isinstance(rule, LatticeRule) or rule.jitter or np.any(np.asarray(rule.offset) != 0):
        raise ConfigurationError("nyquist truncation needs an unjittered lattice through 0")
    s = rule.spacing_vector(dim)
    target = s * np.linalg.norm(L, axis=0)
    N = 1.0 / (target * grid.step)
    Ni = 2 * np.ceil(N / 2 - 1e-9).astype(int)
    sigma = 1.0 / (Ni * grid.step)
    m = [np.arange(-n // 2, n - n // 2) for n in Ni]
    t = (_mesh(m) * sigma) @ np.linalg.inv(L)
    lat = {"N": Ni.tolist(), "sigma": sigma.tolist(), "spacing": s.tolist(),
           "rounded": bool(np.any(np.abs(N - Ni) > 1e-9 * N))}
    return t, lat


def build_wavelet_frame(spec, grid, truncation=32.0):
    """Atoms ``|det A_j|^{1/2} psi(A_j x - t_{j,k})`` from a :class:`WaveletSpec`.

    On the frequency side the level maps are ``L_j = A_j^{-T}``.
    ``truncation`` is either a radius ``R`` (sup norm) in reference
    translation units or ``"nyquist"``, which keeps one full period of an
    unjittered lattice so that discrete Parseval holds on the grid.
    """
    d = spec.window.dim
    ref = spec.ref_region or spec.window.support
    levels, tiles = [], []
    for pos, (j, A) in enumerate(spec.matrices.items()):
        A = as_matrix(A, d)
        L = np.linalg.inv(A).T
        t, lat = _truncation_points(spec.grid_for(j), j, pos, L, grid, truncation, d)
        if spec.param == "scaled":
            if lat is not None:
                raise ConfigurationError("scaled parameterisation is not used with nyquist truncation")
            t = t @ A.T
        elif spec.param != "direct":
            raise ConfigurationError(f"unknown grid parameterisation {spec.param!r}")
        amp = math.sqrt(abs(np.linalg.det(L)))
        levels.append(Level(j, L, amp, spec.window, ref, t, lat))
        tiles.append(AffineImage(A.T, spec.core))
    meta = {"builder": "wavelet", "name": spec.name, "param": spec.param,
            "truncation": truncation, "level_order": [str(l.index) for l in levels]}
    meta.update(spec.meta)
    return _finish(levels, grid, Union(tiles, disjoint=False), meta)


def glue_frames(rpu, systems, grid, mode="rpu-general", c=None, rho=None, core=None, bounds=None):
    """Atoms ``h_j * g_{j,k}`` from an RPU and exponential systems.

    Parameters
    ----------
    rpu : RPU
    systems : dict
        ``j -> ExponentialSystem`` on the region attached to level ``j``.
    bounds : dict, optional
        ``j -> FrameBounds`` known for ``systems[j]``; levels without an
        entry get Gram estimates.
    mode : {"rpu-general", "level-set", "covering"}
        ``level-set`` restricts each window to ``{|h_j|^2 > c}`` (the
        systems must live on those sets); ``covering`` expects indicator
        windows of a covering with index ``rho``.
    """
    if mode == "level-set" and c is None:
        raise ConfigurationError("level-set mode needs the threshold c")
    if mode == "covering" and rho is None:
        raise ConfigurationError("covering mode needs the covering index rho")
    if bounds is not None:
        bad = [j for j, b in bounds.items() if not (b.m > 0 and math.isfinite(b.M))]
        if bad:
            raise ConstructionError(f"per-level bounds not uniform at j = {bad}", hypothesis="uniform bounds",
                                    witness=bad)
    d = rpu.dim
    levels, tiles = [], []
    for h, j in zip(rpu.members, rpu.indices):
        sys = systems[j]
        if mode == "level-set":
            region = level_set(h, c)
            window = _RestrictedWindow(h, region)
            tiles.append(region)
        else:
            window = h
            tiles.append(sys.region)
        known = None
        if bounds is not None and j in bounds:
            # stored in units of the unscaled reference family
            b = bounds[j]
            known = FrameBounds(b.m / sys.scale**2, b.M / sys.scale**2, b.kind, extra={"given": True})
        levels.append(Level(j, np.eye(d), sys.scale, window, sys.region, sys.points.points, exp_bounds=known))
    meta = {"builder": "glue", "mode": mode, "level_order": [str(j) for j in rpu.indices]}
    return _finish(levels, grid, core or Union(tiles, disjoint=False), meta, mode, c, rho)


class _RestrictedWindow(Window):
    def __init__(self, base, region):
        self.base, self.region = base, region
        self.dim = base.dim
        self.support = base.support

    def __call__(self, x):
        return self.base(x) * self.region.contains(x)


def build_tf_atoms(covering, rpu, grids, grid, core=None):
    """Atoms ``h_j |S_j|^{-1/2} e_{x_{j,k}} 1_{S_j}`` on a covering.

    ``grids`` maps ``j`` to the translation points of level ``j``.

    Raises
    ------
    ConstructionError
        When a window is nonzero at a grid point outside its covering set.
    """
    for h, region, j in zip(rpu.members, covering.regions, covering.indices):
        ranges = grid.subbox(*h.support.bounding_box())
        if ranges is None:
            continue
        pts = _mesh([grid.axes[i][a:b] for i, (a, b) in enumerate(ranges)])
        out = (h(pts) != 0) & ~region.contains(pts)
        if np.any(out):
            w = pts[np.argmax(out)].tolist()
            raise ConstructionError(f"window {j} is nonzero outside its covering set at {w}",
                                    hypothesis=f"support of window {j}", witness=w)
    systems = {}
    for region, j in zip(covering.regions, covering.indices):
        pts = grids[j] if isinstance(grids[j], PointSet) else PointSet(as_points(grids[j], dim=covering.dim))
        systems[j] = ExponentialSystem(pts, region, normalized=True)
    return glue_frames(rpu, systems, grid, core=core)


# ---------------------------------------------------------------------------
# analysis, synthesis and bounds


def _as_rows(F, grid):
    F = np.asarray(F)
    single = F.ndim == 1
    F = np.atleast_2d(F).astype(complex)
    if F.shape[1] != grid.size:
        raise DomainError(f"signal has {F.shape[1]} samples, grid has {grid.size}")
    return F, single


def analysis(system, F):
    """Frame coefficients per level.

    Returns
    -------
    dict
        ``j -> array (K_j,)`` for a single signal, or ``(K_j, S)`` for a
        batch given as rows of ``F``.
    """
    F, single = _as_rows(F, system.grid)
    out = {}
    for l in system.levels:
        C = _level_analysis(l, system.grid, F)
        out[l.index] = C[:, 0] if single else C
    return out


def synthesis(system, coeffs):
    """``sum_{j,k} c_{j,k} g_{j,k}`` sampled on the grid."""
    single = None
    total = None
    for l in system.levels:
        A = np.asarray(coeffs[l.index])
        if single is None:
            single = A.ndim == 1
        A = A.reshape(l.K, -1)
        idx, U = _level_synthesis(l, system.grid, A)
        if total is None:
            total = np.zeros((A.shape[1], system.grid.size), dtype=complex)
        total[:, idx] += U.T
    return total[0] if single else total


def frame_operator_apply(system, F):
    """``S f = sum <f, g> g`` on the grid."""
    return synthesis(system, analysis(system, F))


def frame_ratios(system, F, coeffs=None):
    """``sum |<f, g>|^2 / |f|^2`` for each row of ``F``."""
    F, _ = _as_rows(F, system.grid)
    coeffs = coeffs or analysis(system, F)
    energy = 0.0
    for l in system.levels:
        energy = energy + np.sum(np.abs(np.asarray(coeffs[l.index]).reshape(l.K, -1)) ** 2, axis=0)
    return energy / system.grid.norm2(F)


def level_span_bounds(system, F, coeffs=None, rank_tol=1e-11):
    """Per-level bounds of ``{e_t 1_Q}`` on the span of the level pieces of ``F``.

    The piece of ``f`` at level ``j`` is ``conj(h_j) f`` pulled back to the
    reference region.  The lower bound is a Rayleigh-Ritz minimum over the
    span of the pieces; the upper bound is the largest Gram eigenvalue of
    the truncated reference system, valid for every function in ``K_Q``.
    """
    F, _ = _as_rows(F, system.grid)
    coeffs = coeffs or analysis(system, F)
    out = {}
    for l in system.levels:
        lg = _level_grid(l, system.grid)
        if lg is None:
            continue
        _, axes, idx = lg
        pts = _mesh(axes)
        w = np.abs(l.window_values(pts)) ** 2
        # <conj(h) f, conj(h) f'> on the grid, mapped to reference units by kappa
        V = F[:, idx].T
        N = system.grid.cell * (V.conj().T * w) @ V
        C = np.asarray(coeffs[l.index]).reshape(l.K, -1)
        m, M, rank = ritz_bounds(C, N * l.kappa, rank_tol)
        out[l.index] = {"m_span": m, "M_span": M, "M_gram": l.exp_bounds.M, "rank": rank,
                        "kappa": l.kappa}
    return out


def empirical_frame_bounds(system, F, coeffs=None, span=False):
    """Empirical frame bounds from the rows of ``F``.

    ``span=False`` returns the extremes of the ratios of the given
    functions; ``span=True`` optimises the quotient over their linear span.
    """
    F, _ = _as_rows(F, system.grid)
    coeffs = coeffs or analysis(system, F)
    if not span:
        r = frame_ratios(system, F, coeffs)
        return FrameBounds(float(r.min()), float(r.max()), "empirical", extra={"n_functions": int(len(r))})
    C = np.concatenate([np.asarray(coeffs[l.index]).reshape(l.K, -1) for l in system.levels])
    N = system.grid.cell * F.conj() @ F.T
    m, M, rank = ritz_bounds(C, N)
    return FrameBounds(m, M, "empirical-span", extra={"rank": rank})


def atom_eval_time(system, j, k, x):
    """Time-domain atom ``a_j |det L_j|^{-1} psi_j(L_j^{-T} x - t_{j,k})``.

    ``psi_j`` is the inverse Fourier transform of the level window, in
    closed form where the window provides one and by quadrature
    otherwise.
    """
    l = system.level(j)
    x = as_points(x, dim=l.dim)
    Linv = np.linalg.inv(l.L)
    det = abs(np.linalg.det(l.L))
    arg = x @ Linv - l.t[k]
    return l.amplitude / det * l.window.inverse_ft(arg)


# ---------------------------------------------------------------------------
# smooth test functions


class SmoothEnsemble:
    """Random smooth functions supported inside a working region.

    Each member is a sum of ``n_bumps`` tensor B-spline bumps (degree
    ``degree``) centred at log-uniform radii, with width ``rel_width``
    times the radius, a random complex amplitude and a time shift of at
    most ``shift / radius`` per axis.  Bumps whose box leaves the region
    (tested on a ``5^d`` sample) are redrawn.
    """

    def __init__(self, region, size=200, seed=42, n_bumps=3, rel_width=1.0, shift=4.0, degree=7,
                 radii=None):
        self.region = region
        self.dim = region.dim
        self.size, self.seed = int(size), int(seed)
        self.n_bumps, self.rel_width, self.shift, self.degree = int(n_bumps), float(rel_width), float(shift), int(degree)
        rng = np.random.default_rng(self.seed)
        lo, hi = region.bounding_box()
        rmax = float(np.max(np.maximum(np.abs(lo), np.abs(hi)))) * math.sqrt(self.dim)
        rmin = max(region.min_norm(), 1e-6 * rmax)
        if radii is not None:
            rmin, rmax = radii
        u = np.linspace(0, 1, 5)
        probe = _mesh([u] * self.dim) - 0.5
        bumps = []
        tries = 0
        while len(bumps) < self.size * self.n_bumps:
            tries += 1
            if tries > 200 * self.size * self.n_bumps:
                raise PreconditionError("could not place test bumps inside the working region")
            r = math.exp(rng.uniform(math.log(rmin), math.log(rmax)))
            direction = rng.standard_normal(self.dim)
            direction /= np.linalg.norm(direction)
            c = r * direction
            width = self.rel_width * r
            if not np.all(region.contains(c + width * probe)):
                continue
            amp = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
            tau = rng.uniform(-self.shift, self.shift, self.dim) / r
            bumps.append((c - width / 2, width, amp, tau))
        self.bumps = bumps

    def _bump(self, b, pts):
        lo, width, amp, tau = self.bumps[b]
        from .partitions import bspline_eval

        n = self.degree
        v = np.ones(len(pts))
        for i in range(self.dim):
            v = v * bspline_eval(n, (pts[:, i] - lo[i]) * (n + 1) / width)
        return amp * v * np.exp(-2j * np.pi * pts @ tau)

    def values(self, pts):
        pts = as_points(pts, dim=self.dim)
        out = np.zeros((len(pts), self.size), dtype=complex)
        for b in range(len(self.bumps)):
            out[:, b // self.n_bumps] += self._bump(b, pts)
        return out

    def on_grid(self, grid):
        """Members sampled on ``grid``, shape ``(size, grid.size)``."""
        F = np.zeros((self.size, grid.size), dtype=complex)
        for b in range(len(self.bumps)):
            lo, width, _, _ = self.bumps[b]
            ranges = grid.subbox(lo, lo + width)
            if ranges is None:
                continue
            idx = grid.flat_index(ranges)
            pts = _mesh([grid.axes[i][a:c] for i, (a, c) in enumerate(ranges)])
            F[b // self.n_bumps, idx] += self._bump(b, pts)
        return F


# ---------------------------------------------------------------------------
# coefficient files


def coefficients_to_csv(coeffs, path=None):
    """CSV with columns ``j, k, re, im`` (one signal)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["j", "k", "re", "im"])
    for j, c in coeffs.items():
        c = np.asarray(c).ravel()
        label = j if not isinstance(j, tuple) else ";".join(str(v) for v in j)
        for k, v in enumerate(c):
            writer.writerow([label, k, repr(float(v.real)), repr(float(v.imag))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def coefficients_from_csv(path):
    """Inverse of :func:`coefficients_to_csv`."""
    rows = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = row["j"]
            j = tuple(int(v) for v in key.split(";")) if ";" in key else int(key)
            rows.setdefault(j, []).append((int(row["k"]), float(row["re"]) + 1j * float(row["im"])))
    out = {}
    for j, items in rows.items():
        items.sort()
        out[j] = np.array([v for _, v in items])
    return out
