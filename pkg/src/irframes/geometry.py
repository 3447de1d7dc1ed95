"""Point sets, regions and coverings.

Densities, gaps and covering indices are estimated on explicit probe
grids.  All regions are closed unless built with :class:`Difference`,
which removes the (closed) inner set.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._validation import as_matrix, as_points, check_positive
from .errors import DomainError, PreconditionError

__all__ = [
    "PointSet",
    "Region",
    "Box",
    "Ball",
    "AnnulusSector",
    "SpiralSector",
    "AffineImage",
    "Union",
    "Difference",
    "PredicateRegion",
    "ProductRegion",
    "symmetric",
    "region_from_dict",
    "Covering",
    "separation",
    "lower_density",
    "upper_density",
    "gap",
    "covering_index",
    "covering_profile",
    "is_expansive",
    "dilation_ring",
    "lattice_points",
    "jitter_points",
    "probe_grid",
]

_TOL = 1e-12
# generic offset used to keep "ae" probe grids off lattice and dyadic points
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# point sets


@dataclass(frozen=True)
class PointSet:
    """Finite set of points in R^d stored as an ``(n, d)`` array."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))

    @classmethod
    def from_list(cls, values, dim=None):
        return cls(as_points(values, dim=dim))

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, matrix=None, offset=None):
        """Return ``{M x + b}`` for the stored points."""
        pts = self.points
        if matrix is not None:
            pts = pts @ as_matrix(matrix, self.dim).T
        if offset is not None:
            pts = pts + np.asarray(offset, dtype=float)
        return PointSet(pts)

    def to_dict(self):
        return {"type": "pointset", "dim": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data):
        if data.get("type", "pointset") != "pointset":
            raise DomainError("not a point set record")
        return cls(as_points(data["points"], dim=data.get("dim")))

    def to_csv(self, path=None):
        """Write one point per row with columns ``x1..xd``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(self.dim)])
        for row in self.points:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def read_csv(cls, path):
        """Read a CSV written by :meth:`to_csv` (a header row is optional)."""
        rows = []
        with open(path, encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if rows:
                        raise DomainError(f"malformed row {row!r}") from None
        if not rows:
            raise DomainError("empty point file")
        return cls(np.array(rows, dtype=float))


def lattice_points(spacing, radius, dim=1, offset=0.0):
    """Points ``offset + spacing * k`` with sup-norm at most ``radius``."""
    s = np.broadcast_to(np.asarray(spacing, dtype=float), (dim,))
    off = np.broadcast_to(np.asarray(offset, dtype=float), (dim,))
    axes = []
    for i in range(dim):
        kmin = math.ceil((-radius - off[i]) / s[i] - 1e-9)
        kmax = math.floor((radius - off[i]) / s[i] + 1e-9)
        axes.append(off[i] + s[i] * np.arange(kmin, kmax + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return PointSet(np.stack([m.ravel() for m in mesh], axis=1))


def jitter_points(points, amount, seed=42):
    """Perturb each coordinate uniformly in ``[-amount, amount]``."""
    pts = points.points if isinstance(points, PointSet) else as_points(points)
    rng = np.random.default_rng(seed)
    return PointSet(pts + rng.uniform(-amount, amount, size=pts.shape))


# ---------------------------------------------------------------------------
# regions


def _gauss(order, lo, hi, panels=1):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


class Region:
    """Closed subset of R^d with membership, bounding box and measure."""

    dim = 1

    def contains(self, x):
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def measure(self):
        return _grid_measure(self)

    def quadrature(self, order=32, panels=4):
        """Nodes and weights integrating smooth functions over the region."""
        return _masked_grid_quadrature(self, 256 if self.dim <= 2 else 48)

    def to_dict(self):
        raise NotImplementedError

    # helpers built on the primitives above

    def sample(self, step):
        """Grid points of spacing ``step`` inside the region."""
        pts = probe_grid(self.bounding_box(), step)
        return pts[self.contains(pts)]

    def distance(self, x, step=None):
        """Distance from ``x`` to the region.

        Exact for boxes; otherwise measured against a dense sample of the
        region, so the result is accurate to about ``step``.
        """
        x = as_points(x, dim=self.dim)
        if step is None:
            lo, hi = self.bounding_box()
            step = float(np.max(hi - lo)) / (2000 if self.dim == 1 else 300)
        pts = self.sample(step)
        if len(pts) == 0:
            return np.full(len(x), np.inf)
        d, _ = cKDTree(pts).query(x)
        d = np.maximum(d - 0.5 * step * math.sqrt(self.dim), 0.0)
        d[self.contains(x)] = 0.0
        return d

    def min_norm(self):
        """Distance from the origin to the region."""
        return float(self.distance(np.zeros((1, self.dim)))[0])

    def diameter(self):
        """Diameter, exact in 1-D and from a dense sample otherwise."""
        lo, hi = self.bounding_box()
        if self.dim == 1:
            pts = self.sample(float(hi[0] - lo[0]) / 4000)
            return float(pts.max() - pts.min()) if len(pts) else 0.0
        pts = self.sample(float(np.max(hi - lo)) / 200)
        if len(pts) < self.dim + 2:
            return float(np.linalg.norm(hi - lo))
        from scipy.spatial import ConvexHull

        hull = pts[ConvexHull(pts).vertices]
        diff = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def fattened_contains(self, x, eps):
        """Membership in ``{x : d(x, Q) <= eps}``."""
        return self.distance(x) <= eps + 1e-12

    def __neg__(self):
        return AffineImage(-np.eye(self.dim), self)


def _grid_measure(region, n=None):
    # deterministic midpoint-grid estimate used where no closed form exists
    lo, hi = region.bounding_box()
    n = n or (200000 if region.dim == 1 else (1024 if region.dim == 2 else 96))
    h = (hi - lo) / n
    axes = [lo[i] + (np.arange(n) + 0.5) * h[i] for i in range(region.dim)]
    total = 0
    if region.dim == 1:
        total = int(region.contains(axes[0][:, None]).sum())
    else:
        rest = np.meshgrid(*axes[1:], indexing="ij")
        rest = np.stack([r.ravel() for r in rest], axis=1)
        for a in axes[0]:
            pts = np.concatenate([np.full((len(rest), 1), a), rest], axis=1)
            total += int(region.contains(pts).sum())
    return float(total * np.prod(h))


def _masked_grid_quadrature(region, n):
    lo, hi = region.bounding_box()
    h = (hi - lo) / n
    axes = [lo[i] + (np.arange(n) + 0.5) * h[i] for i in range(region.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = region.contains(pts)
    pts = pts[keep]
    return pts, np.full(len(pts), float(np.prod(h)))


class Box(Region):
    """Axis-aligned box ``[lo, hi]``."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise DomainError("box needs lo <= hi with matching shapes")
        self.dim = len(self.lo)

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        tol = _TOL * (1.0 + np.abs(x))
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=1)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def measure(self):
        return float(np.prod(self.hi - self.lo))

    def quadrature(self, order=32, panels=4):
        rules = [_gauss(order, self.lo[i], self.hi[i], panels) for i in range(self.dim)]
        mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
        return nodes, weights

    def distance(self, x, step=None):
        x = as_points(x, dim=self.dim)
        d = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        return np.sqrt((d**2).sum(axis=1))

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Ball(Region):
    """Closed Euclidean ball."""

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = check_positive(radius, "radius")
        self.dim = len(self.center)

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        r = np.linalg.norm(x - self.center, axis=1)
        return r <= self.radius * (1 + _TOL) + _TOL

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def measure(self):
        d = self.dim
        return float(math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d)

    def distance(self, x, step=None):
        x = as_points(x, dim=self.dim)
        return np.maximum(np.linalg.norm(x - self.center, axis=1) - self.radius, 0.0)

    def diameter(self):
        return 2.0 * self.radius

    def quadrature(self, order=32, panels=4):
        if self.dim == 1:
            return Box(self.center - self.radius, self.center + self.radius).quadrature(order, panels)
        if self.dim == 2:
            nodes, w = AnnulusSector(0.0, self.radius, 0.0, 2 * math.pi).quadrature(order, panels)
            return nodes + self.center, w
        return super().quadrature(order, panels)

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class AnnulusSector(Region):
    """Planar set ``{r0 <= |x| <= r1, theta0 <= arg x <= theta1}``."""

    dim = 2

    def __init__(self, r0, r1, theta0=0.0, theta1=2 * math.pi):
        self.r0, self.r1 = float(r0), float(r1)
        self.theta0, self.theta1 = float(theta0), float(theta1)
        if not (0 <= self.r0 <= self.r1) or self.theta1 < self.theta0:
            raise DomainError("annulus sector needs 0 <= r0 <= r1 and theta0 <= theta1")
        self.full = self.theta1 - self.theta0 >= 2 * math.pi - 1e-12

    def _angle_ok(self, theta):
        if self.full:
            return np.ones_like(theta, dtype=bool)
        rel = np.mod(theta - self.theta0, 2 * math.pi)
        width = self.theta1 - self.theta0
        return (rel <= width + 1e-12) | (rel >= 2 * math.pi - 1e-12)

    def contains(self, x):
        x = as_points(x, dim=2)
        r = np.hypot(x[:, 0], x[:, 1])
        theta = np.arctan2(x[:, 1], x[:, 0])
        ok = (r >= self.r0 * (1 - _TOL) - _TOL) & (r <= self.r1 * (1 + _TOL) + _TOL)
        ok &= self._angle_ok(theta) | (r <= _TOL)
        if self.r0 > 0:
            ok &= r > 0
        return ok

    def bounding_box(self):
        angles = [self.theta0, self.theta1]
        k0 = math.ceil(self.theta0 / (math.pi / 2))
        k1 = math.floor(self.theta1 / (math.pi / 2))
        angles += [k * math.pi / 2 for k in range(k0, k1 + 1)]
        angles = np.array(angles)
        pts = [np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1) for r in (self.r0, self.r1)]
        pts = np.concatenate(pts)
        return pts.min(axis=0), pts.max(axis=0)

    def measure(self):
        return 0.5 * (self.r1**2 - self.r0**2) * min(self.theta1 - self.theta0, 2 * math.pi)

    def quadrature(self, order=32, panels=4):
        r, wr = _gauss(order, self.r0, self.r1, panels)
        t, wt = _gauss(order, self.theta0, min(self.theta1, self.theta0 + 2 * math.pi), 2 * panels)
        R, T = np.meshgrid(r, t, indexing="ij")
        W = np.outer(wr * r, wt)
        nodes = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
        return nodes, W.ravel()

    def min_norm(self):
        return self.r0

    def to_dict(self):
        return {"type": "annulus_sector", "r0": self.r0, "r1": self.r1,
                "theta0": self.theta0, "theta1": self.theta1}


class SpiralSector(Region):
    """Image of ``[lam0, lam1] x [beta0, beta1]`` under ``(l, b) -> l * Gamma(b)``.

    ``Gamma(t) = a**t * (cos(omega t), sin(omega t))`` is a logarithmic
    spiral; ``omega`` defaults to one full turn per unit of ``t``.
    """

    dim = 2

    def __init__(self, a, lam0, lam1, beta0, beta1, omega=2 * math.pi):
        self.a = check_positive(a, "a")
        self.lam0, self.lam1 = float(lam0), float(lam1)
        self.beta0, self.beta1 = float(beta0), float(beta1)
        self.omega = float(omega)
        if not (0 < self.lam0 <= self.lam1) or self.beta1 < self.beta0 or self.omega <= 0:
            raise DomainError("spiral sector needs 0 < lam0 <= lam1, beta0 <= beta1, omega > 0")

    def gamma(self, t):
        t = np.asarray(t, dtype=float)
        s = self.a**t
        return np.stack([s * np.cos(self.omega * t), s * np.sin(self.omega * t)], axis=-1)

    def param(self, lam, beta):
        return np.asarray(lam, dtype=float)[..., None] * self.gamma(beta)

    def coordinates(self, x):
        """Parameters ``(lam, beta)`` of points in the sector (NaN outside)."""
        x = as_points(x, dim=2)
        r = np.hypot(x[:, 0], x[:, 1])
        theta = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)
        lam = np.full(len(x), np.nan)
        beta = np.full(len(x), np.nan)
        period = 2 * math.pi / self.omega
        tol = 1e-12 * max(1.0, abs(self.beta1))
        n_lo = math.floor(self.beta0 / period) - 1
        n_hi = math.ceil(self.beta1 / period) + 1
        with np.errstate(divide="ignore", invalid="ignore"):
            for n in range(n_lo, n_hi + 1):
                b = theta / self.omega + n * period
                ok = (b >= self.beta0 - tol) & (b <= self.beta1 + tol) & (r > 0)
                b = np.clip(b, self.beta0, self.beta1)
                ll = r / self.a**b
                ok &= (ll >= self.lam0 * (1 - 1e-12)) & (ll <= self.lam1 * (1 + 1e-12))
                new = ok & np.isnan(lam)
                lam[new] = ll[new]
                beta[new] = b[new]
        return lam, beta

    def contains(self, x):
        lam, _ = self.coordinates(x)
        return ~np.isnan(lam)

    def _boundary(self, n=2000):
        ls = np.linspace(self.lam0, self.lam1, n)
        bs = np.linspace(self.beta0, self.beta1, n)
        return np.concatenate([
            self.param(ls, np.full(n, self.beta0)), self.param(ls, np.full(n, self.beta1)),
            self.param(np.full(n, self.lam0), bs), self.param(np.full(n, self.lam1), bs),
        ])

    def bounding_box(self):
        pts = self._boundary()
        return pts.min(axis=0), pts.max(axis=0)

    def jacobian(self, lam, beta):
        return np.asarray(lam) * self.a ** (2 * np.asarray(beta)) * self.omega

    def measure(self):
        la = 0.5 * (self.lam1**2 - self.lam0**2)
        if abs(self.a - 1) < 1e-15:
            bint = self.beta1 - self.beta0
        else:
            la2 = 2 * math.log(self.a)
            bint = (self.a ** (2 * self.beta1) - self.a ** (2 * self.beta0)) / la2
        return self.omega * la * bint

    def quadrature(self, order=32, panels=4):
        lam, wl = _gauss(order, self.lam0, self.lam1, panels)
        beta, wb = _gauss(order, self.beta0, self.beta1, panels)
        L, B = np.meshgrid(lam, beta, indexing="ij")
        W = np.outer(wl, wb) * self.jacobian(L, B)
        return self.param(L.ravel(), B.ravel()), W.ravel()

    def min_norm(self):
        return self.lam0 * min(self.a**self.beta0, self.a**self.beta1)

    def diameter(self):
        pts = self._boundary(4000)
        from scipy.spatial import ConvexHull

        hull = pts[ConvexHull(pts).vertices]
        diff = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def to_dict(self):
        return {"type": "spiral_sector", "a": self.a, "lam0": self.lam0, "lam1": self.lam1,
                "beta0": self.beta0, "beta1": self.beta1, "omega": self.omega}


class AffineImage(Region):
    """Image ``{M x + b : x in base}`` of a region under an invertible map."""

    def __init__(self, matrix, base, offset=None):
        self.base = base
        self.dim = base.dim
        self.matrix = as_matrix(matrix, self.dim)
        det = np.linalg.det(self.matrix)
        if abs(det) < 1e-300:
            raise DomainError("affine image needs an invertible matrix")
        self.inverse = np.linalg.inv(self.matrix)
        self.offset = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float)
        self.det = float(abs(det))

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        return self.base.contains((x - self.offset) @ self.inverse.T)

    def bounding_box(self):
        lo, hi = self.base.bounding_box()
        corners = np.array(np.meshgrid(*[[lo[i], hi[i]] for i in range(self.dim)], indexing="ij"))
        corners = corners.reshape(self.dim, -1).T @ self.matrix.T + self.offset
        return corners.min(axis=0), corners.max(axis=0)

    def measure(self):
        return self.det * self.base.measure()

    def quadrature(self, order=32, panels=4):
        nodes, w = self.base.quadrature(order, panels)
        return nodes @ self.matrix.T + self.offset, w * self.det

    def sample(self, step):
        # sample the base at a matching resolution to keep cost bounded
        scale = np.linalg.norm(self.inverse, 2)
        pts = self.base.sample(step * scale)
        return pts @ self.matrix.T + self.offset

    def to_dict(self):
        return {"type": "affine", "matrix": self.matrix.tolist(), "offset": self.offset.tolist(),
                "base": self.base.to_dict()}


class Union(Region):
    """Finite union of regions; ``disjoint`` enables additive measure and quadrature."""

    def __init__(self, parts, disjoint=True):
        self.parts = list(parts)
        if not self.parts:
            raise DomainError("union needs at least one part")
        self.dim = self.parts[0].dim
        if any(p.dim != self.dim for p in self.parts):
            raise DomainError("union parts must share a dimension")
        self.disjoint = bool(disjoint)

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        out = np.zeros(len(x), dtype=bool)
        for p in self.parts:
            out |= p.contains(x)
        return out

    def bounding_box(self):
        boxes = [p.bounding_box() for p in self.parts]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def measure(self):
        if self.disjoint:
            return float(sum(p.measure() for p in self.parts))
        return _grid_measure(self)

    def quadrature(self, order=32, panels=4):
        if not self.disjoint:
            return super().quadrature(order, panels)
        rules = [p.quadrature(order, panels) for p in self.parts]
        return np.concatenate([r[0] for r in rules]), np.concatenate([r[1] for r in rules])

    def sample(self, step):
        return np.concatenate([p.sample(step) for p in self.parts])

    def distance(self, x, step=None):
        return np.min([p.distance(x, step) for p in self.parts], axis=0)

    def min_norm(self):
        return min(p.min_norm() for p in self.parts)

    def to_dict(self):
        return {"type": "union", "disjoint": self.disjoint, "parts": [p.to_dict() for p in self.parts]}


def symmetric(base, disjoint=True):
    """The union ``base  U  (-base)``."""
    return Union([base, -base], disjoint=disjoint)


class Difference(Region):
    """Set difference ``outer \\ inner`` (the inner boundary is excluded)."""

    def __init__(self, outer, inner):
        if outer.dim != inner.dim:
            raise DomainError("difference parts must share a dimension")
        self.outer, self.inner = outer, inner
        self.dim = outer.dim

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        return self.outer.contains(x) & ~self.inner.contains(x)

    def bounding_box(self):
        return self.outer.bounding_box()

    def to_dict(self):
        return {"type": "difference", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


class PredicateRegion(Region):
    """Region given by a vectorised membership predicate and a bounding box."""

    def __init__(self, predicate, lo, hi, label="predicate"):
        self.predicate = predicate
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.dim = len(self.lo)
        self.label = label

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        return np.asarray(self.predicate(x), dtype=bool)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def to_dict(self):
        return {"type": "predicate", "label": self.label, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class ProductRegion(Region):
    """Cartesian product ``Q1 x Q2``."""

    def __init__(self, first, second):
        self.first, self.second = first, second
        self.dim = first.dim + second.dim

    def contains(self, x):
        x = as_points(x, dim=self.dim)
        d1 = self.first.dim
        return self.first.contains(x[:, :d1]) & self.second.contains(x[:, d1:])

    def bounding_box(self):
        (a, b), (c, d) = self.first.bounding_box(), self.second.bounding_box()
        return np.concatenate([a, c]), np.concatenate([b, d])

    def measure(self):
        return self.first.measure() * self.second.measure()

    def quadrature(self, order=32, panels=4):
        n1, w1 = self.first.quadrature(order, panels)
        n2, w2 = self.second.quadrature(order, panels)
        i, j = np.meshgrid(np.arange(len(w1)), np.arange(len(w2)), indexing="ij")
        i, j = i.ravel(), j.ravel()
        return np.concatenate([n1[i], n2[j]], axis=1), w1[i] * w2[j]

    def to_dict(self):
        return {"type": "product", "first": self.first.to_dict(), "second": self.second.to_dict()}


def region_from_dict(data):
    """Inverse of ``Region.to_dict`` for the serialisable region kinds."""
    kind = data.get("type")
    if kind == "box":
        return Box(data["lo"], data["hi"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "annulus_sector":
        return AnnulusSector(data["r0"], data["r1"], data["theta0"], data["theta1"])
    if kind == "spiral_sector":
        return SpiralSector(data["a"], data["lam0"], data["lam1"], data["beta0"], data["beta1"],
                            data.get("omega", 2 * math.pi))
    if kind == "affine":
        return AffineImage(data["matrix"], region_from_dict(data["base"]), data.get("offset"))
    if kind == "union":
        return Union([region_from_dict(p) for p in data["parts"]], data.get("disjoint", True))
    if kind == "product":
        return ProductRegion(region_from_dict(data["first"]), region_from_dict(data["second"]))
    if kind == "difference":
        return Difference(region_from_dict(data["outer"]), region_from_dict(data["inner"]))
    raise DomainError(f"cannot rebuild region of type {kind!r}")


# ---------------------------------------------------------------------------
# coverings


@dataclass
class Covering:
    """Indexed family of regions ``{S_j}``."""

    regions: list
    indices: list = field(default_factory=list)

    def __post_init__(self):
        if not self.indices:
            self.indices = list(range(len(self.regions)))
        if len(self.indices) != len(self.regions):
            raise DomainError("one index per region is required")

    @classmethod
    def from_dilations(cls, base, matrix, j_range):
        """The family ``{A^j Q : j in j_range}``."""
        A = as_matrix(matrix, base.dim)
        js = list(range(j_range[0], j_range[1] + 1))
        regions = [AffineImage(np.linalg.matrix_power(A, j), base) if j != 0 else base for j in js]
        return cls(regions, js)

    @property
    def dim(self):
        return self.regions[0].dim

    def counts(self, x):
        x = as_points(x, dim=self.dim)
        c = np.zeros(len(x), dtype=int)
        for r in self.regions:
            c += r.contains(x)
        return c


def probe_grid(box, step, mode="closed"):
    """Probe points covering ``box = (lo, hi)``.

    ``mode="closed"`` places nodes at ``lo + n * step`` including both ends;
    ``mode="ae"`` shifts them by a generic fraction of ``step`` so that
    measure-zero sets such as lattice or dyadic boundaries are avoided.
    """
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    step = check_positive(step, "probe_step")
    axes = []
    for a, b in zip(lo, hi):
        n = int(math.floor((b - a) / step + 1e-9))
        if mode == "closed":
            ax = a + step * np.arange(n + 1)
            if b - ax[-1] > 1e-9 * step:
                ax = np.append(ax, b)
        elif mode == "ae":
            ax = a + step * (np.arange(n + 1) + _GOLDEN)
            ax = ax[ax < b]
            if len(ax) == 0:
                ax = np.array([0.5 * (a + b)])
        else:
            raise DomainError(f"unknown probe mode {mode!r}")
        axes.append(ax)
    if np.prod([len(a) for a in axes]) > 5e7:
        raise PreconditionError("probe grid too large; increase probe_step")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def covering_profile(covering, probe, probe_step, mode="closed"):
    """Covering counts on the probe grid.

    Returns
    -------
    points : ndarray, shape (n, d)
    counts : ndarray of int, shape (n,)
    """
    pts = probe_grid(probe.bounding_box(), probe_step, mode)
    pts = pts[probe.contains(pts)]
    if len(pts) == 0:
        raise PreconditionError("probe region contains no grid points")
    return pts, covering.counts(pts)


def covering_index(covering, probe, probe_step, mode="closed"):
    """Maximal number of members containing a probe point.

    ``mode="closed"`` counts boundary points of closed members, so tiles
    sharing an endpoint give 2 there.  ``mode="ae"`` keeps probe points off
    measure-zero sets, which estimates the essential supremum instead.
    """
    if not covering.regions:
        return 0
    _, counts = covering_profile(covering, probe, probe_step, mode)
    return int(counts.max())


def is_expansive(matrix, tol=1e-10):
    """True when every eigenvalue has modulus above ``1 + tol``."""
    A = as_matrix(matrix)
    return bool(np.all(np.abs(np.linalg.eigvals(A)) > 1 + tol))


def dilation_ring(matrix, base):
    """The set ``A V \\ V`` for an expansive ``A`` and a neighbourhood ``V`` of 0."""
    A = as_matrix(matrix, base.dim)
    if not is_expansive(A):
        raise PreconditionError("dilation matrix is not expansive")
    probes = np.concatenate([np.zeros((1, base.dim)), 1e-9 * np.eye(base.dim), -1e-9 * np.eye(base.dim)])
    if not np.all(base.contains(probes)):
        raise PreconditionError("base set is not a neighbourhood of the origin")
    return Difference(AffineImage(A, base), base)


# ---------------------------------------------------------------------------
# point-set statistics


def _pts(X):
    pts = X.points if isinstance(X, PointSet) else as_points(X)
    if len(pts) == 0:
        raise DomainError("empty point set")
    return pts


def separation(X):
    """Minimal distance between distinct indices (at least two points required)."""
    pts = _pts(X)
    if len(pts) < 2:
        raise DomainError("separation needs at least two points")
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


def _window_counts(X, r, step):
    pts = _pts(X)
    r = check_positive(r, "r")
    lo, hi = pts.min(axis=0) + r, pts.max(axis=0) - r
    if np.any(hi < lo):
        raise PreconditionError("window radius exceeds half the extent of the point set")
    if step is None:
        sep = separation(pts) if len(pts) > 1 else 0.0
        step = sep / 4 if sep > 0 else r / 50
    d = pts.shape[1]
    # cap the number of window centres
    n_axis = np.floor((hi - lo) / step) + 1
    if np.prod(n_axis) > 2e5:
        step = float(np.max((hi - lo) / (2e5 ** (1 / d))))
    centres = probe_grid((lo, hi), step)
    counts = cKDTree(pts).query_ball_point(centres, r * (1 + 1e-12), p=np.inf, return_length=True)
    return np.asarray(counts), (2 * r) ** d


def lower_density(X, r, step=None):
    """Smallest window count over ``(2r)^d`` for cubes of half-width ``r``.

    Window centres range over the part of the bounding box of ``X`` where
    the whole cube stays inside it, on a grid of spacing ``step``
    (separation / 4 by default).
    """
    counts, vol = _window_counts(X, r, step)
    return float(counts.min() / vol)


def upper_density(X, r, step=None):
    """Largest window count over ``(2r)^d``; see :func:`lower_density`."""
    counts, vol = _window_counts(X, r, step)
    return float(counts.max() / vol)


def gap(X, domain, probe_step):
    """Largest distance from a probe point of ``domain`` to the point set."""
    pts = _pts(X)
    probes = probe_grid(domain.bounding_box(), probe_step)
    probes = probes[domain.contains(probes)]
    if len(probes) == 0:
        raise PreconditionError("domain contains no probe points")
    d, _ = cKDTree(pts).query(probes)
    return float(d.max())
