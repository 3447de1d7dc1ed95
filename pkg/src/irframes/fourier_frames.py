"""Exponential frames on bounded frequency regions.

An exponential system is the family ``g_x(xi) = c * exp(-2 pi i x . xi)``
restricted to a region ``Q``, indexed by a finite point set ``X``.  The
module provides sufficient-condition checks, Gram matrices, bound
estimates and the transport rules (translation, dilation, change of
variables, products) that move frames between regions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import as_matrix, as_points, check_positive
from .errors import DomainError, PreconditionError
from .geometry import AffineImage, Box, PointSet, ProductRegion, Region, Union, gap, lower_density, separation
from .partitions import bspline_eval, bspline_fourier, region_inverse_ft

__all__ = [
    "FrameBounds",
    "ExponentialSystem",
    "FunctionSystem",
    "BumpEnsemble",
    "SpanEnsemble",
    "check_beurling_1d",
    "check_beurling_ball",
    "check_kadec",
    "gram_matrix",
    "gram_to_csv",
    "frame_bounds_estimate",
    "ritz_bounds",
    "transport_translate",
    "transport_dilate",
    "transport_c1",
    "product_frame",
    "product_bounds",
]


@dataclass
class FrameBounds:
    """Lower and upper frame bound estimates with their provenance.

    ``kind`` is one of ``"predicted"``, ``"gram-estimate"``,
    ``"gram-restricted"``, ``"empirical"`` or ``"empirical-span"``.
    Lower bounds from Gram spectra are valid on the span of the atoms.
    """

    m: float
    M: float
    kind: str
    truncation_R: float | None = None
    ensemble_seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def contains(self, value, rtol=0.0):
        return self.m * (1 - rtol) <= value <= self.M * (1 + rtol)


# ---------------------------------------------------------------------------
# systems


class FunctionSystem:
    """Finite family of functions on a region given by an evaluator.

    Parameters
    ----------
    region : Region
    evaluate : callable
        Maps an ``(n, d)`` array of frequencies to an ``(n, K)`` array of
        atom values.
    size : int
        Number of atoms ``K``.
    """

    def __init__(self, region, evaluate, size, label="functions"):
        self.region = region
        self._evaluate = evaluate
        self.size = int(size)
        self.label = label

    @property
    def dim(self):
        return self.region.dim

    def __len__(self):
        return self.size

    def evaluate(self, xi):
        xi = as_points(xi, dim=self.dim)
        return self._evaluate(xi) * self.region.contains(xi)[:, None]


class ExponentialSystem(FunctionSystem):
    """Atoms ``scale * exp(-2 pi i x . xi)`` on ``region`` for ``x`` in ``points``.

    ``normalized=True`` sets ``scale = |Q|^{-1/2}``.
    """

    def __init__(self, points, region, scale=1.0, normalized=False):
        self.points = points if isinstance(points, PointSet) else PointSet(as_points(points, dim=region.dim))
        if self.points.dim != region.dim:
            raise DomainError("points and region must share a dimension")
        self.region = region
        self.normalized = bool(normalized)
        self.scale = float(scale) / (math.sqrt(region.measure()) if normalized else 1.0)
        self.size = len(self.points)
        self.label = "exponentials"

    def evaluate(self, xi):
        xi = as_points(xi, dim=self.dim)
        vals = self.scale * np.exp(-2j * np.pi * xi @ self.points.points.T)
        return vals * self.region.contains(xi)[:, None]

    def evaluate_unmasked(self, xi):
        """Atom values without the region mask (for quadrature nodes)."""
        xi = as_points(xi, dim=self.dim)
        return self.scale * np.exp(-2j * np.pi * xi @ self.points.points.T)


# ---------------------------------------------------------------------------
# sufficient conditions


def _interior(X, margin):
    lo, hi = X.points.min(axis=0) + margin, X.points.max(axis=0) - margin
    if np.any(hi <= lo):
        raise PreconditionError("point set too small for the requested margin")
    return Box(lo, hi)


def check_beurling_1d(X, a, r=None, step=None):
    """Sufficient condition ``a < D^-(X)`` for a frame on ``[-a/2, a/2]``.

    ``D^-`` is estimated with windows of half-width ``r`` (a quarter of the
    extent of ``X`` by default) kept inside the point set.

    Returns
    -------
    dict
        ``certified``, the density estimate, the separation and the
        interval on which the frame is predicted.
    """
    X = X if isinstance(X, PointSet) else PointSet(as_points(X, dim=1))
    if X.dim != 1:
        raise DomainError("Beurling 1-D check needs points on the line")
    a = check_positive(a, "a")
    sep = separation(X)
    if not sep > 0:
        raise PreconditionError("Beurling check needs a separated point set")
    extent = float(X.points.max() - X.points.min())
    r = r or extent / 4
    dm = lower_density(X, r, step)
    return {"certified": bool(sep > 0 and a < dm), "D_minus": dm, "a": a, "window_r": r,
            "separation": sep, "separated": bool(sep > 0), "interval": [-a / 2, a / 2]}


def check_beurling_ball(X, r, probe_step=None, margin=None):
    """Sufficient condition ``r * rho(X) < 1/4`` for a frame on ``B_r(0)``.

    The gap ``rho`` is measured on the bounding box of ``X`` shrunk by
    ``margin`` (one tenth of the extent by default) to avoid edge effects
    of the finite point set.
    """
    X = X if isinstance(X, PointSet) else PointSet(as_points(X))
    r = check_positive(r, "r")
    extent = float(np.max(X.points.max(axis=0) - X.points.min(axis=0)))
    margin = extent / 10 if margin is None else margin
    dom = _interior(X, margin)
    probe_step = probe_step or extent / 400
    rho = gap(X, dom, probe_step)
    sep = separation(X)
    return {"certified": bool(r * rho < 0.25), "gap": rho, "r": r, "product": r * rho,
            "probe_step": probe_step, "separation": sep, "separated": bool(sep > 0)}


def check_kadec(X, s, L=None):
    """Kadec perturbation test ``sup |x_k - k s| <= L < s / 4``.

    Each point is paired with the nearest multiple of ``s``; a pairing
    that is not one-to-one raises :class:`PreconditionError`.  Without
    ``L`` the measured perturbation is used.  When certified the
    exponentials form a Riesz basis of ``L^2`` on an interval of length
    ``1/s`` with bounds ``(1/s)(1 -+ D)^2``,
    ``D = 1 - cos(pi delta) + sin(pi delta)``, ``delta = L / s``.
    """
    X = X if isinstance(X, PointSet) else PointSet(as_points(X, dim=1))
    s = check_positive(s, "s")
    x = np.sort(X.points[:, 0])
    k = np.round(x / s).astype(int)
    if len(np.unique(k)) != len(k):
        raise PreconditionError("points cannot be paired one-to-one with multiples of the spacing")
    measured = float(np.max(np.abs(x - k * s)))
    L = measured if L is None else float(L)
    delta = L / s
    ok = measured <= L and delta < 0.25
    D = 1 - math.cos(math.pi * delta) + math.sin(math.pi * delta)
    bounds = [(1 - D) ** 2 / s, (1 + D) ** 2 / s] if ok else None
    return {"certified": bool(ok), "L": L, "measured": measured, "s": s, "delta": delta, "riesz_bounds": bounds,
            "interval_length": 1 / s}


# ---------------------------------------------------------------------------
# Gram matrices


def _closed_form(region):
    if isinstance(region, Box):
        return True
    if isinstance(region, Union):
        return region.disjoint and all(_closed_form(p) for p in region.parts)
    if isinstance(region, AffineImage):
        return _closed_form(region.base)
    return False


def exp_integral(region, delta, order=48, panels=8):
    """``int_Q exp(-2 pi i delta . xi) d xi`` for each row of ``delta``."""
    return region_inverse_ft(region, -as_points(delta, dim=region.dim), order, panels)


def gram_matrix(system, order=48, panels=8):
    """Matrix ``G[k, l] = <g_k, g_l> = int_Q g_k conj(g_l)`` (Hermitian, PSD).

    For exponentials this is ``int_Q exp(-2 pi i (x_k - x_l) . xi) d xi``.

    Entries are closed form for exponential systems on boxes, disjoint
    unions of boxes and their affine images.  Otherwise a Gauss rule on
    the region (polar or spiral coordinates for sectors) is used.
    """
    if isinstance(system, ExponentialSystem) and _closed_form(system.region):
        x = system.points.points
        K = len(x)
        iu = np.triu_indices(K)
        delta = x[iu[0]] - x[iu[1]]
        vals = exp_integral(system.region, delta, order, panels) * system.scale**2
        G = np.zeros((K, K), dtype=complex)
        G[iu] = vals
        G = G + np.conj(np.triu(G, 1)).T
        return G
    nodes, w = system.region.quadrature(order, panels)
    if isinstance(system, ExponentialSystem):
        E = system.evaluate_unmasked(nodes)
    else:
        E = system.evaluate(nodes)
    return (E.T * w) @ E.conj()


def gram_to_csv(G, path=None):
    """CSV with one row per matrix row and interleaved real/imaginary columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    K = G.shape[1]
    writer.writerow([f"{p}{l}" for l in range(K) for p in ("re", "im")])
    for row in G:
        out = np.empty(2 * K)
        out[0::2], out[1::2] = row.real, row.imag
        writer.writerow([repr(float(v)) for v in out])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# test ensembles


class BumpEnsemble:
    """Random smooth functions supported in boxes strictly inside ``Q``.

    Basis functions are tensor B-spline bumps of degree ``degree`` on each
    box, modulated by ``exp(2 pi i s . xi)`` with ``s`` on a small grid of
    ``2 * n_modes + 1`` values per axis spaced by one over the box width.
    Members are complex Gaussian combinations of the basis (seeded).

    Parameters
    ----------
    boxes : list of Box
    size : int
    seed : int
    degree : int
    n_modes : int
    """

    def __init__(self, boxes, size=200, seed=42, degree=7, n_modes=3):
        self.boxes = list(boxes)
        self.dim = self.boxes[0].dim
        self.size, self.seed, self.degree, self.n_modes = int(size), int(seed), int(degree), int(n_modes)
        basis = []
        for b, box in enumerate(self.boxes):
            w = box.hi - box.lo
            grids = np.meshgrid(*[np.arange(-n_modes, n_modes + 1) / w[i] for i in range(self.dim)], indexing="ij")
            for s in np.stack([g.ravel() for g in grids], axis=1):
                basis.append((b, s))
        self.basis = basis
        rng = np.random.default_rng(self.seed)
        n = len(basis)
        self.coef = (rng.standard_normal((self.size, n)) + 1j * rng.standard_normal((self.size, n))) / math.sqrt(2 * n)

    @classmethod
    def inside(cls, region, size=200, seed=42, margin=0.02, **kw):
        """Ensemble on the boxes of ``region`` shrunk by ``margin`` times the diameter."""
        parts = _box_parts(region)
        delta = margin * region.diameter()
        boxes = [Box(p.lo + delta, p.hi - delta) for p in parts]
        return cls(boxes, size, seed, **kw)

    def basis_values(self, xi):
        xi = as_points(xi, dim=self.dim)
        out = np.empty((len(xi), len(self.basis)), dtype=complex)
        n = self.degree
        cache = {}
        for q, (b, s) in enumerate(self.basis):
            if b not in cache:
                box = self.boxes[b]
                w = box.hi - box.lo
                v = np.ones(len(xi))
                for i in range(self.dim):
                    v = v * bspline_eval(n, (xi[:, i] - box.lo[i]) * (n + 1) / w[i])
                cache[b] = v
            out[:, q] = cache[b] * np.exp(2j * np.pi * xi @ s)
        return out

    def values(self, xi):
        """Member values, shape ``(n_points, size)``."""
        return self.basis_values(xi) @ self.coef.T

    def basis_inner_exponentials(self, points, scale=1.0):
        """Closed-form ``<phi_q, g_x>`` for exponential atoms, shape ``(K, n_basis)``."""
        x = as_points(points, dim=self.dim)
        n = self.degree
        out = np.empty((len(x), len(self.basis)), dtype=complex)
        for q, (b, s) in enumerate(self.basis):
            box = self.boxes[b]
            w = box.hi - box.lo
            v = np.full(len(x), complex(scale))
            for i in range(self.dim):
                y = x[:, i] + s[i]
                v *= (w[i] / (n + 1)) * np.exp(2j * np.pi * y * box.lo[i]) * bspline_fourier(n, y * w[i] / (n + 1))
            out[:, q] = v
        return out

    def basis_gram(self, order=24):
        """``<phi_q, phi_r>`` by Gauss rules aligned with the spline knots."""
        N = np.zeros((len(self.basis),) * 2, dtype=complex)
        for b, box in enumerate(self.boxes):
            idx = [q for q, (bb, _) in enumerate(self.basis) if bb == b]
            nodes, w = box.quadrature(order, self.degree + 1)
            V = self.basis_values(nodes)[:, idx]
            N[np.ix_(idx, idx)] = (V.conj().T * w) @ V
        return N


def _box_parts(region):
    if isinstance(region, Box):
        return [region]
    if isinstance(region, Union):
        return [b for p in region.parts for b in _box_parts(p)]
    if isinstance(region, AffineImage) and np.allclose(region.matrix, np.diag(np.diag(region.matrix))):
        out = []
        for p in _box_parts(region.base):
            c = np.array([p.lo, p.hi]) @ region.matrix.T + region.offset
            out.append(Box(c.min(axis=0), c.max(axis=0)))
        return out
    if isinstance(region, ProductRegion):
        return [Box(np.concatenate([a.lo, b.lo]), np.concatenate([a.hi, b.hi]))
                for a in _box_parts(region.first) for b in _box_parts(region.second)]
    raise PreconditionError("region is not a union of boxes; pass explicit boxes")


class SpanEnsemble:
    """Random combinations of the atoms of a system (the test span is the atom span)."""

    def __init__(self, system, size=None, seed=42):
        self.system = system
        self.dim = system.dim
        self.size = int(size or 2 * len(system))
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        K = len(system)
        self.coef = (rng.standard_normal((self.size, K)) + 1j * rng.standard_normal((self.size, K))) / math.sqrt(2 * K)

    def values(self, xi):
        return self.system.evaluate(xi) @ self.coef.T


# ---------------------------------------------------------------------------
# bound estimation


def ritz_bounds(C, N, rank_tol=1e-11):
    """Extreme Rayleigh quotients ``|C a|^2 / (a^* N a)`` over the span.

    ``C`` holds analysis coefficients of spanning functions (one column
    per function) and ``N`` their Gram matrix.  Directions with
    ``N``-eigenvalue below ``rank_tol`` times the largest are discarded.
    """
    lam, U = np.linalg.eigh(N)
    keep = lam > rank_tol * lam.max()
    T = U[:, keep] / np.sqrt(lam[keep])
    B = C @ T
    mu = np.linalg.eigvalsh(B.conj().T @ B)
    return float(mu.min()), float(mu.max()), int(keep.sum())


def _empirical(system, ensemble, order, panels):
    nodes, w = system.region.quadrature(order, panels)
    F = ensemble.values(nodes)
    if isinstance(system, ExponentialSystem):
        E = system.evaluate_unmasked(nodes)
    else:
        E = system.evaluate(nodes)
    C = (E.conj().T * w) @ F
    N = (F.conj().T * w) @ F
    return C, N


def frame_bounds_estimate(system, method="gram-eigs", ensemble=None, rank_tol=1e-10, order=24, panels=16,
                          truncation_R=None):
    """Estimate frame bounds of a finite system on ``K_Q``.

    Methods
    -------
    ``gram-eigs``
        Extreme nonzero eigenvalues of the Gram matrix (eigenvalues below
        ``rank_tol`` times the largest are treated as zero).
    ``empirical``
        Extremes of ``sum_k |<f, g_k>|^2 / |f|^2`` over ensemble members,
        with inner products by Gauss quadrature on the region.
    ``empirical-span``
        Extremes of the same quotient over the linear span of the ensemble
        (Rayleigh-Ritz with the quadrature data).
    ``gram-restricted``
        Frame operator compressed to the span of a :class:`BumpEnsemble`,
        computed from closed-form inner products.
    """
    if method == "gram-eigs":
        lam = np.linalg.eigvalsh(gram_matrix(system))
        top = lam.max()
        nz = lam[lam > rank_tol * top]
        return FrameBounds(float(nz.min()), float(top), "gram-estimate", truncation_R,
                           extra={"rank": int(len(nz)), "size": len(system)})
    if ensemble is None:
        raise PreconditionError(f"method {method!r} needs a test ensemble")
    seed = getattr(ensemble, "seed", None)
    if method in ("empirical", "empirical-span"):
        C, N = _empirical(system, ensemble, order, panels)
        if method == "empirical":
            ratios = (np.abs(C) ** 2).sum(axis=0) / np.real(np.diag(N))
            return FrameBounds(float(ratios.min()), float(ratios.max()), "empirical", truncation_R, seed,
                               extra={"n_functions": int(len(ratios))})
        m, M, rank = ritz_bounds(C, N)
        return FrameBounds(m, M, "empirical-span", truncation_R, seed, extra={"rank": rank})
    if method == "gram-restricted":
        if not (isinstance(system, ExponentialSystem) and isinstance(ensemble, BumpEnsemble)):
            raise PreconditionError("gram-restricted needs exponentials and a bump ensemble")
        Cb = ensemble.basis_inner_exponentials(system.points.points, system.scale)
        m, M, rank = ritz_bounds(Cb, ensemble.basis_gram())
        return FrameBounds(m, M, "gram-restricted", truncation_R, seed, extra={"rank": rank})
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# transport


def transport_translate(system, v):
    """Same atoms on ``Q + v``; the frame bounds are unchanged."""
    v = np.asarray(v, dtype=float).reshape(system.dim)
    region = AffineImage(np.eye(system.dim), system.region, v)
    if isinstance(system, ExponentialSystem):
        return ExponentialSystem(system.points, region, system.scale)
    return FunctionSystem(region, lambda xi: system.evaluate(xi - v), len(system), "translated")


def transport_dilate(system, matrix):
    """Atoms ``|det A|^{-1/2} g(A^{-1} .)`` on ``A Q``; the frame bounds are unchanged."""
    A = as_matrix(matrix, system.dim)
    Ainv = np.linalg.inv(A)
    det = abs(np.linalg.det(A))
    region = AffineImage(A, system.region)
    if isinstance(system, ExponentialSystem):
        # g_x(A^{-1} xi) = exp(-2 pi i (A^{-T} x) . xi)
        return ExponentialSystem(system.points.transformed(Ainv.T), region, system.scale / math.sqrt(det))
    return FunctionSystem(region, lambda xi: system.evaluate(xi @ Ainv.T) / math.sqrt(det), len(system), "dilated")


def transport_c1(system, T, jac_det, domain, probe_step=None):
    """Atoms ``g(T(y))`` on ``domain = T^{-1}(Q)`` for a C^1 diffeomorphism ``T``.

    The predicted bounds are ``(alpha m, beta M)`` with
    ``alpha = inf |det T'|^{-1}`` and ``beta = sup |det T'|^{-1}``, both
    measured on a probe grid of ``domain``.

    Returns
    -------
    system : FunctionSystem
    factors : tuple of float
        ``(alpha, beta)``.
    """
    lo, hi = domain.bounding_box()
    probe_step = probe_step or float(np.max(hi - lo)) / 200
    pts = domain.sample(probe_step)
    if len(pts) == 0:
        raise PreconditionError("domain has no probe points")
    mapped = np.asarray(T(pts))
    if not np.all(system.region.contains(mapped)):
        raise PreconditionError("T does not map the domain into the region of the system")
    J = np.abs(np.asarray(jac_det(pts), dtype=float))
    if np.any(J <= 0):
        raise PreconditionError("Jacobian determinant vanishes on the domain")
    alpha, beta = float((1 / J).min()), float((1 / J).max())
    sys = FunctionSystem(domain, lambda y: system.evaluate(np.asarray(T(y))), len(system), "transported")
    return sys, (alpha, beta)


def product_frame(first, second):
    """Atoms ``g_i(xi_1) h_j(xi_2)`` on ``Q_1 x Q_2`` (bounds multiply)."""
    region = ProductRegion(first.region, second.region)
    if isinstance(first, ExponentialSystem) and isinstance(second, ExponentialSystem):
        a, b = first.points.points, second.points.points
        i, j = np.meshgrid(np.arange(len(a)), np.arange(len(b)), indexing="ij")
        pts = np.concatenate([a[i.ravel()], b[j.ravel()]], axis=1)
        if isinstance(first.region, Box) and isinstance(second.region, Box):
            region = Box(np.concatenate([first.region.lo, second.region.lo]),
                         np.concatenate([first.region.hi, second.region.hi]))
        return ExponentialSystem(pts, region, first.scale * second.scale)
    d1 = first.dim

    def evaluate(xi):
        A = first.evaluate(xi[:, :d1])
        B = second.evaluate(xi[:, d1:])
        return (A[:, :, None] * B[:, None, :]).reshape(len(xi), -1)

    return FunctionSystem(region, evaluate, len(first) * len(second), "product")


def product_bounds(first, second):
    """Predicted bounds ``(m1 m2, M1 M2)`` of a product system."""
    return FrameBounds(first.m * second.m, first.M * second.M, "predicted", extra={"rule": "product"})
