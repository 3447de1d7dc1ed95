"""Frequency windows and Riesz partitions of unity.

A window is a vectorised function on R^d with a known support region.
An :class:`RPU` is an indexed family of windows whose squared moduli sum
to a function bounded above and below on the working region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from ._validation import as_matrix, as_points, check_positive
from .errors import ConstructionError, DomainError, PreconditionError, RPUHoleError
from .geometry import (
    AffineImage,
    AnnulusSector,
    Ball,
    Box,
    Covering,
    PredicateRegion,
    Region,
    SpiralSector,
    Union,
    covering_index,
    probe_grid,
)

__all__ = [
    "bspline_eval",
    "bspline_fourier",
    "Window",
    "IndicatorWindow",
    "BSplineWindow",
    "RadialBSplineWindow",
    "TensorWindow",
    "SmoothBump",
    "PolarWindow",
    "SpiralBump",
    "DilatedWindow",
    "SumWindow",
    "NormalizedWindow",
    "reflect",
    "symmetrize",
    "region_inverse_ft",
    "RPU",
    "RPUBounds",
    "rpu_sum_squares",
    "rpu_bounds",
    "normalize_rpu",
    "build_dilation_rpu",
    "level_set",
]


# ---------------------------------------------------------------------------
# B-splines


def bspline_eval(n, t):
    """Cardinal B-spline of degree ``n`` supported on ``[0, n + 1]``.

    Uses the recursion
    ``beta_k(t) = (t beta_{k-1}(t) + (k + 1 - t) beta_{k-1}(t - 1)) / k``
    starting from the indicator of ``[0, 1)``.
    """
    n = int(n)
    if n < 0:
        raise DomainError("B-spline degree must be nonnegative")
    t = np.asarray(t, dtype=float)
    # b[i] holds beta_k(t - i)
    b = [((t - i >= 0) & (t - i < 1)).astype(float) for i in range(n + 1)]
    for k in range(1, n + 1):
        b = [((t - i) * b[i] + (k + 1 - (t - i)) * b[i + 1]) / k for i in range(n + 1 - k)]
    return b[0]


def bspline_fourier(n, y):
    """``int beta_n(u) exp(2 pi i y u) du = (exp(i pi y) sinc(y))**(n + 1)``."""
    y = np.asarray(y, dtype=float)
    return (np.exp(1j * np.pi * y) * np.sinc(y)) ** (n + 1)


# ---------------------------------------------------------------------------
# windows


def region_inverse_ft(region, x, order=48, panels=8):
    """``int_Q exp(2 pi i x . xi) d xi`` evaluated at the rows of ``x``.

    Closed form for boxes, disjoint unions and affine images of those;
    Gauss quadrature on the region otherwise.
    """
    x = as_points(x, dim=region.dim)
    if isinstance(region, Box):
        out = np.ones(len(x), dtype=complex)
        for i in range(region.dim):
            a, b = region.lo[i], region.hi[i]
            out *= (b - a) * np.exp(1j * np.pi * x[:, i] * (a + b)) * np.sinc(x[:, i] * (b - a))
        return out
    if isinstance(region, Union) and region.disjoint:
        return sum(region_inverse_ft(p, x, order, panels) for p in region.parts)
    if isinstance(region, AffineImage):
        phase = np.exp(2j * np.pi * x @ region.offset)
        return region.det * phase * region_inverse_ft(region.base, x @ region.matrix, order, panels)
    nodes, w = region.quadrature(order, panels)
    out = np.empty(len(x), dtype=complex)
    for s in range(0, len(x), 256):
        out[s:s + 256] = np.exp(2j * np.pi * x[s:s + 256] @ nodes.T) @ w
    return out


class Window:
    """Vectorised window ``h`` on R^d with support contained in ``support``."""

    dim = 1
    support: Region

    def __call__(self, x):
        raise NotImplementedError

    def inverse_ft(self, x):
        """``psi(x) = int h(xi) exp(2 pi i x . xi) d xi``.

        Falls back to Gauss quadrature over the support region.
        """
        x = as_points(x, dim=self.dim)
        nodes, w = self.support.quadrature(64, 16 if self.dim == 1 else 6)
        hw = self(nodes) * w
        out = np.empty(len(x), dtype=complex)
        for s in range(0, len(x), 256):
            out[s:s + 256] = np.exp(2j * np.pi * x[s:s + 256] @ nodes.T) @ hw
        return out

    def to_dict(self):
        return {"type": type(self).__name__}


class IndicatorWindow(Window):
    """Indicator function of a region."""

    def __init__(self, region, value=1.0):
        self.support = region
        self.dim = region.dim
        self.value = value

    def __call__(self, x):
        return self.value * self.support.contains(x).astype(float)

    def inverse_ft(self, x):
        return self.value * region_inverse_ft(self.support, x)

    def to_dict(self):
        return {"type": "indicator", "region": self.support.to_dict(), "value": self.value}


class BSplineWindow(Window):
    """``amplitude * beta_n(scale * xi + shift)`` on the line."""

    dim = 1

    def __init__(self, degree, scale=1.0, shift=0.0, amplitude=1.0):
        self.degree = int(degree)
        self.scale = float(scale)
        if self.scale == 0:
            raise DomainError("scale must be nonzero")
        self.shift = float(shift)
        self.amplitude = float(amplitude)
        ends = sorted([(0 - self.shift) / self.scale, (self.degree + 1 - self.shift) / self.scale])
        self.support = Box([ends[0]], [ends[1]])

    def __call__(self, x):
        x = as_points(x, dim=1)[:, 0]
        return self.amplitude * bspline_eval(self.degree, self.scale * x + self.shift)

    def inverse_ft(self, x):
        x = as_points(x, dim=1)[:, 0]
        s, t = self.scale, self.shift
        return (self.amplitude / abs(s)) * np.exp(-2j * np.pi * x * t / s) * bspline_fourier(self.degree, x / s)

    def to_dict(self):
        return {"type": "bspline", "degree": self.degree, "scale": self.scale,
                "shift": self.shift, "amplitude": self.amplitude}


class RadialBSplineWindow(Window):
    """``amplitude * beta_n(scale * rho + shift)`` with ``rho = |xi|`` or ``|xi|^2``."""

    def __init__(self, degree, scale=1.0, shift=0.0, amplitude=1.0, dim=2, squared=False):
        self.degree = int(degree)
        self.scale, self.shift, self.amplitude = float(scale), float(shift), float(amplitude)
        self.dim = int(dim)
        self.squared = bool(squared)
        lo, hi = sorted([-self.shift / self.scale, (self.degree + 1 - self.shift) / self.scale])
        lo = max(lo, 0.0)
        if self.squared:
            lo, hi = math.sqrt(lo), math.sqrt(max(hi, 0.0))
        if self.dim == 2:
            self.support = AnnulusSector(lo, hi)
        else:
            outer, inner = Ball(np.zeros(self.dim), hi), lo
            self.support = PredicateRegion(
                lambda p: (np.linalg.norm(p, axis=1) >= inner - 1e-12) & outer.contains(p),
                -hi * np.ones(self.dim), hi * np.ones(self.dim), "radial shell")

    def __call__(self, x):
        x = as_points(x, dim=self.dim)
        rho = (x**2).sum(axis=1)
        if not self.squared:
            rho = np.sqrt(rho)
        return self.amplitude * bspline_eval(self.degree, self.scale * rho + self.shift)

    def to_dict(self):
        return {"type": "radial_bspline", "degree": self.degree, "scale": self.scale,
                "shift": self.shift, "amplitude": self.amplitude, "dim": self.dim,
                "squared": self.squared}


class TensorWindow(Window):
    """Product ``h_1(xi_1) ... h_d(xi_d)`` of one-dimensional windows."""

    def __init__(self, factors):
        self.factors = list(factors)
        self.dim = len(self.factors)
        boxes = [f.support.bounding_box() for f in self.factors]
        self.support = Box([b[0][0] for b in boxes], [b[1][0] for b in boxes])

    def __call__(self, x):
        x = as_points(x, dim=self.dim)
        out = np.ones(len(x), dtype=complex)
        for i, f in enumerate(self.factors):
            out = out * f(x[:, i:i + 1])
        return out.real if np.all(out.imag == 0) else out

    def inverse_ft(self, x):
        x = as_points(x, dim=self.dim)
        out = np.ones(len(x), dtype=complex)
        for i, f in enumerate(self.factors):
            out *= f.inverse_ft(x[:, i:i + 1])
        return out

    def to_dict(self):
        return {"type": "tensor", "factors": [f.to_dict() for f in self.factors]}


def _smoothstep(s, order):
    # C^order clamped polynomial from 0 (s <= 0) to 1 (s >= 1)
    return betainc(order + 1, order + 1, np.clip(s, 0.0, 1.0))


class SmoothBump(Window):
    """Equal to one on ``inner`` and vanishing at distance ``margin`` from it.

    The transition is the regularised incomplete beta function of order
    ``smoothness``, a clamped polynomial with that many continuous
    derivatives, applied to ``1 - d(x, inner) / margin``.
    """

    def __init__(self, inner, margin, smoothness=3):
        self.inner = inner
        self.dim = inner.dim
        self.margin = check_positive(margin, "margin")
        self.smoothness = int(smoothness)
        lo, hi = inner.bounding_box()
        self.support = PredicateRegion(
            lambda p: inner.distance(p) <= self.margin + 1e-12,
            lo - self.margin, hi + self.margin, "fattened")

    def __call__(self, x):
        d = self.inner.distance(x)
        return _smoothstep(1.0 - d / self.margin, self.smoothness)

    def to_dict(self):
        return {"type": "smooth_bump", "inner": self.inner.to_dict(), "margin": self.margin,
                "smoothness": self.smoothness}


class PolarWindow(Window):
    """``radial(|xi|) * angular(arg xi)`` in the plane.

    ``angular`` is a one-dimensional window evaluated at the angle wrapped
    to ``[-pi, pi)`` and is usually supported well inside that interval.
    """

    dim = 2

    def __init__(self, radial, angular):
        self.radial, self.angular = radial, angular
        r0, r1 = (float(v[0]) for v in radial.support.bounding_box())
        t0, t1 = (float(v[0]) for v in angular.support.bounding_box())
        self.support = AnnulusSector(max(r0, 0.0), r1, t0, t1)

    def __call__(self, x):
        x = as_points(x, dim=2)
        r = np.hypot(x[:, 0], x[:, 1])
        theta = np.mod(np.arctan2(x[:, 1], x[:, 0]) + np.pi, 2 * np.pi) - np.pi
        return self.radial(r[:, None]) * self.angular(theta[:, None])

    def to_dict(self):
        return {"type": "polar", "radial": self.radial.to_dict(), "angular": self.angular.to_dict()}


class SpiralBump(Window):
    """Product of B-spline bumps in the spiral coordinates ``(lam, beta)``.

    The bump is at least ``floor`` on ``sector`` and supported in the
    sector enlarged by ``eps_lam`` and ``eps_beta`` in parameter space.
    """

    dim = 2

    def __init__(self, sector, eps_lam, eps_beta, degree=3):
        self.sector = sector
        self.eps_lam, self.eps_beta = float(eps_lam), float(eps_beta)
        self.degree = int(degree)
        self.support = SpiralSector(sector.a, sector.lam0 - self.eps_lam, sector.lam1 + self.eps_lam,
                                    sector.beta0 - self.eps_beta, sector.beta1 + self.eps_beta,
                                    sector.omega)
        self._lam = _bump_1d(sector.lam0, sector.lam1, self.eps_lam, self.degree)
        self._beta = _bump_1d(sector.beta0, sector.beta1, self.eps_beta, self.degree)

    def __call__(self, x):
        lam, beta = self.support.coordinates(x)
        out = np.zeros(len(lam))
        ok = ~np.isnan(lam)
        out[ok] = self._lam(lam[ok][:, None]) * self._beta(beta[ok][:, None])
        return out

    def to_dict(self):
        return {"type": "spiral_bump", "sector": self.sector.to_dict(), "eps_lam": self.eps_lam,
                "eps_beta": self.eps_beta, "degree": self.degree}


def _bump_1d(a, b, eps, degree):
    # B-spline of the given degree stretched over [a - eps, b + eps]
    width = (b - a) + 2 * eps
    s = (degree + 1) / width
    peak = bspline_eval(degree, (degree + 1) / 2.0)
    return BSplineWindow(degree, s, -s * (a - eps), 1.0 / float(peak))


class DilatedWindow(Window):
    """``amplitude * base(M x)``; the support is ``M^{-1}`` times the base support."""

    def __init__(self, base, matrix, amplitude=1.0):
        self.base = base
        self.dim = base.dim
        self.matrix = as_matrix(matrix, self.dim)
        self.amplitude = amplitude
        self.support = AffineImage(np.linalg.inv(self.matrix), base.support)

    def __call__(self, x):
        x = as_points(x, dim=self.dim)
        return self.amplitude * self.base(x @ self.matrix.T)

    def inverse_ft(self, x):
        # int h(M xi) e(x xi) d xi = |det M|^{-1} psi(M^{-T} x)
        x = as_points(x, dim=self.dim)
        det = abs(np.linalg.det(self.matrix))
        return self.amplitude / det * self.base.inverse_ft(x @ np.linalg.inv(self.matrix))

    def to_dict(self):
        return {"type": "dilated", "matrix": self.matrix.tolist(), "amplitude": self.amplitude,
                "base": self.base.to_dict()}


class SumWindow(Window):
    """Pointwise sum of windows."""

    def __init__(self, parts, disjoint=True):
        self.parts = list(parts)
        self.dim = self.parts[0].dim
        self.support = Union([p.support for p in self.parts], disjoint=disjoint)

    def __call__(self, x):
        x = as_points(x, dim=self.dim)
        return sum(p(x) for p in self.parts)

    def inverse_ft(self, x):
        return sum(p.inverse_ft(x) for p in self.parts)

    def to_dict(self):
        return {"type": "sum", "parts": [p.to_dict() for p in self.parts]}


def reflect(window):
    """``xi -> window(-xi)``."""
    return DilatedWindow(window, -np.eye(window.dim))


def symmetrize(window):
    """``window(xi) + window(-xi)``, assuming the two supports are disjoint."""
    return SumWindow([window, reflect(window)], disjoint=True)


class NormalizedWindow(Window):
    """Member ``h_j`` divided by ``sqrt(sum_i |h_i|^2)``.

    Evaluating where the sum vanishes inside the declared covering of the
    partition raises :class:`RPUHoleError` with the offending point.
    """

    def __init__(self, rpu, position):
        self.rpu = rpu
        self.position = position
        self.member = rpu.members[position]
        self.dim = self.member.dim
        self.support = self.member.support

    def _inside_union(self, x):
        # interior of the declared union: every small axis shift stays covered
        cov = self.rpu.covering
        if cov is None:
            return np.zeros(len(x), dtype=bool)
        delta = 1e-9 * (1.0 + np.abs(x).max())
        inside = np.ones(len(x), dtype=bool)
        for i in range(x.shape[1]):
            for sgn in (-1.0, 1.0):
                y = x.copy()
                y[:, i] += sgn * delta
                inside &= cov.counts(y) > 0
        return inside

    def __call__(self, x):
        x = as_points(x, dim=self.dim)
        num = self.member(x)
        den = self.rpu.sum_squares(x)
        hole = (den <= 0) & (num != 0)
        if np.any(den <= 0):
            hole |= (den <= 0) & self._inside_union(x)
        if np.any(hole):
            raise RPUHoleError("sum of squares vanishes where a member does not",
                               point=x[np.argmax(hole)].tolist())
        out = np.zeros(len(x), dtype=np.result_type(num, float))
        ok = den > 0
        out[ok] = num[ok] / np.sqrt(den[ok])
        return out


def level_set(window, c):
    """The region ``{xi : |h(xi)|^2 > c}`` inside the support box of ``h``."""
    lo, hi = window.support.bounding_box()
    return PredicateRegion(lambda p: np.abs(window(p)) ** 2 > c, lo, hi, f"level set > {c}")


# ---------------------------------------------------------------------------
# partitions


@dataclass
class RPU:
    """Indexed family of windows ``{h_j}``.

    Attributes
    ----------
    members : list of Window
    indices : list
        Index ``j`` of each member.
    covering : Covering or None
        Associated family of supports, when known.
    meta : dict
        Construction details such as predicted bounds.
    """

    members: list
    indices: list = field(default_factory=list)
    covering: Covering | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise DomainError("an RPU needs at least one member")
        if not self.indices:
            self.indices = list(range(len(self.members)))

    @property
    def dim(self):
        return self.members[0].dim

    def values(self, x):
        x = as_points(x, dim=self.dim)
        return np.stack([m(x) for m in self.members])

    def sum_squares(self, x):
        x = as_points(x, dim=self.dim)
        total = np.zeros(len(x))
        for m in self.members:
            total += np.abs(m(x)) ** 2
        return total


def rpu_sum_squares(rpu, x):
    """``sum_j |h_j(x)|^2`` at the rows of ``x``."""
    return rpu.sum_squares(x)


@dataclass
class RPUBounds:
    """Probe-grid estimates of the partition constants ``p`` and ``P``."""

    p_hat: float
    P_hat: float
    probe_step: float
    violations: list
    n_probe: int
    argmin: list
    argmax: list

    @property
    def ok(self):
        return self.p_hat > 0 and not self.violations

    def to_dict(self):
        return {"p_hat": self.p_hat, "P_hat": self.P_hat, "probe_step": self.probe_step,
                "violations": self.violations, "n_probe": self.n_probe,
                "argmin": self.argmin, "argmax": self.argmax}


def rpu_bounds(rpu, region, probe_step, mode="closed", hole_tol=1e-14, max_violations=20):
    """Extremes of ``sum_j |h_j|^2`` over probe points of ``region``.

    Points where the sum does not exceed ``hole_tol`` are listed as
    violations (holes) instead of raising.
    """
    pts = probe_grid(region.bounding_box(), probe_step, mode)
    pts = pts[region.contains(pts)]
    if len(pts) == 0:
        raise PreconditionError("probe region contains no grid points")
    s = np.concatenate([rpu.sum_squares(pts[i:i + 200000]) for i in range(0, len(pts), 200000)])
    bad = np.nonzero(s <= hole_tol)[0][:max_violations]
    return RPUBounds(
        p_hat=float(s.min()), P_hat=float(s.max()), probe_step=float(probe_step),
        violations=[pts[i].tolist() for i in bad], n_probe=int(len(pts)),
        argmin=pts[int(np.argmin(s))].tolist(), argmax=pts[int(np.argmax(s))].tolist(),
    )


def normalize_rpu(rpu):
    """Family ``h_j / sqrt(sum_i |h_i|^2)`` whose squares sum to one."""
    members = [NormalizedWindow(rpu, i) for i in range(len(rpu.members))]
    meta = dict(rpu.meta, normalized=True)
    return RPU(members, list(rpu.indices), rpu.covering, meta)


def _shell(dim, r_in, r_out):
    if dim == 1:
        return Union([Box([r_in], [r_out]), Box([-r_out], [-r_in])])
    return PredicateRegion(
        lambda p: (np.linalg.norm(p, axis=1) >= r_in) & (np.linalg.norm(p, axis=1) <= r_out),
        -r_out * np.ones(dim), r_out * np.ones(dim), "shell")


def _max_norm(region):
    lo, hi = region.bounding_box()
    return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


def build_dilation_rpu(h, matrix, Q, eps, c1, c2, j_range, probe_step=None):
    """Partition ``h_j = h(A^{-j} .)`` from one window and an expansive matrix.

    The hypotheses are checked on probe grids and reported by label:
    (i) ``d(0, Q) > eps``; (ii) the sets ``A^j Q`` cover a shell around the
    origin; (a) ``|h|^2 <= c2``; (b) ``|h|^2 >= c1`` on ``Q``; (c) ``h``
    vanishes outside ``Q_eps``.

    Returns
    -------
    RPU
        Members indexed by ``j`` with ``meta`` holding the predicted bounds
        ``p >= c1`` and ``P <= rho * c2``, ``rho`` being the covering index
        of the supports.
    """
    A = as_matrix(matrix, Q.dim)
    d = Q.dim
    lo, hi = Q.bounding_box()
    if probe_step is None:
        probe_step = float(np.max(hi - lo)) / (2000 if d == 1 else 120)
    dist0 = Q.min_norm()
    if not dist0 > eps:
        raise ConstructionError(f"hypothesis (i) fails: d(0, Q) = {dist0:.6g} <= eps = {eps}",
                                hypothesis="(i)", witness=[0.0] * d)
    # (a) on the support box, (b) on Q, (c) on an enlarged box
    slo, shi = h.support.bounding_box()
    box = (np.minimum(slo, lo - 2 * eps) - probe_step, np.maximum(shi, hi + 2 * eps) + probe_step)
    pts = probe_grid(box, probe_step)
    hv = np.abs(h(pts)) ** 2
    if hv.max() > c2 * (1 + 1e-12):
        i = int(np.argmax(hv))
        raise ConstructionError(f"hypothesis (a) fails: |h|^2 = {hv[i]:.6g} > c2", "(a)", pts[i].tolist())
    inq = Q.contains(pts)
    if np.any(inq) and hv[inq].min() < c1 * (1 - 1e-12):
        i = np.nonzero(inq)[0][int(np.argmin(hv[inq]))]
        raise ConstructionError(f"hypothesis (b) fails: |h|^2 = {hv[i]:.6g} < c1 on Q", "(b)", pts[i].tolist())
    nz = hv > 1e-24
    if np.any(nz):
        dist = Q.distance(pts[nz])
        slack = eps + probe_step * math.sqrt(d) + 1e-12
        if dist.max() > slack:
            i = int(np.argmax(dist))
            raise ConstructionError(
                f"hypothesis (c) fails: h != 0 at distance {dist[i]:.6g} > eps from Q", "(c)",
                pts[nz][i].tolist())
    j0, j1 = j_range
    js = list(range(j0, j1 + 1))
    powers = {j: np.linalg.matrix_power(A, j) if j >= 0 else np.linalg.matrix_power(np.linalg.inv(A), -j) for j in js}
    cover_q = Covering([AffineImage(powers[j], Q) for j in js], js)
    r_in = _max_norm(cover_q.regions[0])
    r_out = cover_q.regions[-1].min_norm()
    rho = None
    if r_out > r_in:
        shell = _shell(d, r_in, r_out)
        step = (r_out - r_in) / (4000 if d == 1 else 150)
        from .geometry import covering_profile

        sp, counts = covering_profile(cover_q, shell, step, mode="ae")
        if counts.min() < 1:
            raise ConstructionError("hypothesis (ii) fails: the dilates of Q leave a gap", "(ii)",
                                    sp[int(np.argmin(counts))].tolist())
        supports = Covering([AffineImage(powers[j], h.support) for j in js], js)
        rho = covering_index(supports, shell, step, mode="ae")
    members = [DilatedWindow(h, np.linalg.inv(powers[j])) for j in js]
    covering = Covering([m.support for m in members], js)
    meta = {"c1": c1, "c2": c2, "eps": eps, "covering_index": rho,
            "p_lower": c1, "P_upper": None if rho is None else rho * c2,
            "working_shell": [r_in, r_out], "matrix": A.tolist()}
    return RPU(members, js, covering, meta)
