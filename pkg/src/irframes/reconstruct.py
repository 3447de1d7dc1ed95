"""Dual frames and reconstruction from atom coefficients.

For a wavelet level the analysis coefficients of ``f`` are those of the
pulled-back piece ``conj(h_j) f`` against ``{e_t 1_Q}``.  A dual of that
exponential family, computed once on the reference region, recovers the
piece; multiplying by ``h_j``, summing over ``j`` and dividing by
``sum_j |h_j|^2`` recovers ``f``.  In terms of the atoms themselves the
level contribution is ``sum_k b_k g_{j,k}`` with ``b = G^+ c / kappa_j``.

Binary grid files
-----------------
``write_grid_binary`` stores a sampled field as::

    8 bytes   magic b"IRFGRID1"
    uint32    number of axes d
    d times   uint64 samples n_i, float64 lower edge lo_i, float64 step
    data      row-major complex64 samples (last axis fastest)

All numbers are little-endian.  Sample ``i`` on axis ``a`` sits at
``lo_a + (i + 1/2) * step``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .atoms import FrequencyGrid, Level, _level_synthesis
from .errors import ConditioningError, ConfigurationError, DomainError, RPUHoleError
from .fourier_frames import ExponentialSystem, gram_matrix
from .partitions import IndicatorWindow

__all__ = [
    "DualSystem",
    "dual_exponential_frame",
    "level_duals",
    "reconstruct_level",
    "reconstruct_full",
    "ReconstructionReport",
    "relative_error",
    "write_grid_csv",
    "read_grid_csv",
    "write_grid_binary",
    "read_grid_binary",
]

_MAGIC = b"IRFGRID1"


@dataclass
class DualSystem:
    """Dual of an exponential family ``{g_k}`` on its region.

    ``apply(c)`` maps analysis coefficients ``c_k = <v, g_k>`` to
    coefficients ``b`` with ``sum_l b_l g_l`` the reconstruction of ``v``
    (exact for ``v`` in the closed span).  The dual atoms are
    ``phi_k = sum_l D[l, k] g_l``.
    """

    system: ExponentialSystem | None
    method: str
    D: np.ndarray | None = None
    G: np.ndarray | None = None
    bound: float | None = None
    rank: int | None = None
    tol: float = 1e-10
    info: dict = field(default_factory=dict)

    def apply(self, c):
        c = np.asarray(c, dtype=complex)
        if self.method == "tight":
            return c / self.bound
        if self.method == "canonical":
            return self.D @ c
        if self.method == "cg":
            return _cg_solve(self.G, c, self.tol)
        raise ConfigurationError(f"unknown dual method {self.method!r}")

    def dual_atoms(self, xi):
        """Values of ``phi_k`` at the rows of ``xi``, shape ``(n, K)``."""
        E = self.system.evaluate(xi)
        if self.method == "tight":
            return E / self.bound
        if self.D is None:
            raise ConfigurationError("dual atoms need the canonical method")
        return E @ self.D


def _cg_solve(G, c, tol, maxiter=200, accept=1e-3):
    single = c.ndim == 1
    C = c.reshape(len(c), -1)
    out = np.empty_like(C)
    op = LinearOperator(G.shape, matvec=lambda v: G @ v, dtype=complex)
    for s in range(C.shape[1]):
        rhs = C[:, s]
        if not np.any(rhs):
            out[:, s] = 0
            continue
        # singular Gram: the residual stalls at the consistency level of rhs
        with np.errstate(divide="ignore", invalid="ignore"):
            x, _ = cg(op, rhs, rtol=tol, atol=0.0, maxiter=maxiter)
        res = np.linalg.norm(G @ x - rhs) / np.linalg.norm(rhs)
        # breakdown (rhs orthogonal to the range) leaves NaNs
        if not np.isfinite(res) or res > accept:
            raise ConditioningError(f"conjugate gradients stalled at residual {res:.2e}")
        out[:, s] = x
    return out[:, 0] if single else out


def dual_exponential_frame(system, method="canonical", rcond=1e-8, tol=1e-10, bound=None, check=True, seed=0,
                           check_tol=1e-5):
    """Dual frame of a finite exponential system on ``K_Q``.

    Parameters
    ----------
    method : {"canonical", "cg", "tight"}
        ``canonical`` inverts the Gram matrix on the eigenvectors whose
        eigenvalue exceeds ``rcond`` times the largest; ``cg`` solves the
        Gram system by conjugate gradients to relative residual ``tol``;
        ``tight`` divides by ``bound``.  Coefficients computed by
        quadrature are slightly inconsistent with a rank-deficient Gram,
        so CG stops after 200 iterations and only fails when the residual
        exceeds ``1e-3`` (the part of ``c`` outside the range of the Gram
        cannot be matched).
    check : bool
        Measure the duality residual on random functions of the span and
        raise when it exceeds ``check_tol``.

    Raises
    ------
    ConditioningError
        When no eigenvalue survives the cut or the residual check fails.
    """
    if method == "tight":
        if bound is None or bound <= 0:
            raise ConfigurationError("tight duals need a positive frame bound")
        return DualSystem(system, "tight", bound=float(bound))
    # synthesis Gram: c = G a for f = sum_l a_l g_l
    G = gram_matrix(system).T
    lam, V = np.linalg.eigh(G)
    top = lam.max()
    if top <= 0:
        raise ConditioningError("Gram matrix vanishes", eigenvalues=lam)
    keep = lam > rcond * top
    if not np.any(keep):
        raise ConditioningError("no eigenvalue above the retention threshold", eigenvalues=lam)
    info = {"lambda_max": float(top), "lambda_min_retained": float(lam[keep].min()),
            "rank": int(keep.sum()), "size": len(lam), "rcond": rcond}
    if method == "canonical":
        D = (V[:, keep] / lam[keep]) @ V[:, keep].conj().T
        dual = DualSystem(system, "canonical", D=D, G=G, rank=int(keep.sum()), info=info)
    elif method == "cg":
        dual = DualSystem(system, "cg", G=G, rank=int(keep.sum()), tol=tol, info=info)
    else:
        raise ConfigurationError(f"unknown dual method {method!r}")
    if check:
        rng = np.random.default_rng(seed)
        # random members of the well-conditioned part of the span
        a = V[:, keep] @ (rng.standard_normal((int(keep.sum()), 8)) + 1j * rng.standard_normal((int(keep.sum()), 8)))
        c = G @ a
        b = dual.apply(c)
        err = np.real(np.einsum("ks,kl,ls->s", (b - a).conj(), G, b - a))
        ref = np.real(np.einsum("ks,kl,ls->s", a.conj(), G, a))
        res = float(np.sqrt(np.max(err / ref)))
        dual.info["duality_residual"] = res
        if res > check_tol:
            raise ConditioningError(f"duality residual {res:.2e} too large", eigenvalues=lam)
    return dual


def _auto_method(level, method):
    if method != "auto":
        return method
    return "tight" if level.exp_bounds is not None and level.exp_bounds.kind == "lattice-exact" else "canonical"


def level_duals(system, method="auto", rcond=1e-8, tol=1e-10):
    """Duals of the reference exponential family of every level (cached by grid)."""
    cache = {}
    out = {}
    for level in system.levels:
        m = _auto_method(level, method)
        key = (m, level.t.tobytes(), id(level.ref_region))
        if key not in cache:
            if m == "tight":
                if level.exp_bounds is None or level.exp_bounds.kind != "lattice-exact":
                    raise ConfigurationError(f"level {level.index} is not known to be tight")
                cache[key] = DualSystem(None, "tight", bound=level.exp_bounds.m)
            else:
                cache[key] = dual_exponential_frame(level.reference_system(), m, rcond, tol)
        out[level.index] = cache[key]
    return out


def _raw_level(level):
    # window replaced by the indicator of the reference region
    det = abs(np.linalg.det(level.L))
    return Level(level.index, level.L, det / level.amplitude, IndicatorWindow(level.ref_region),
                 level.ref_region, level.t, level.lattice, level.exp_bounds)


def reconstruct_level(system, j, coeffs, dual, pathway="smooth"):
    """Recover the level contribution from its coefficients.

    ``pathway="smooth"`` returns ``|h_j|^2 f`` (synthesis with the atoms);
    ``pathway="raw"`` returns ``conj(h_j) f`` on the level region.

    Returns
    -------
    idx : ndarray of int
        Flat grid indices of the level box.
    values : ndarray, shape (len(idx), S)
    """
    level = system.level(j)
    c = np.asarray(coeffs).reshape(level.K, -1)
    b = dual.apply(c)
    if pathway == "smooth":
        return _level_synthesis(level, system.grid, b / level.kappa)
    if pathway == "raw":
        return _level_synthesis(_raw_level(level), system.grid, b)
    raise ConfigurationError(f"unknown pathway {pathway!r}")


@dataclass
class ReconstructionReport:
    """Summary of a reconstruction run."""

    levels: list
    level_order: list
    relative_error: list | None
    max_abs_error: list | None
    floor: float
    pathway: str

    def to_dict(self):
        return asdict(self)


def relative_error(F_rec, F_true, grid):
    F_rec, F_true = np.atleast_2d(F_rec), np.atleast_2d(F_true)
    return np.sqrt(grid.norm2(F_rec - F_true) / grid.norm2(F_true))


def reconstruct_full(system, coeffs, duals=None, pathway="smooth", floor=1e-12, truth=None,
                     restrict=True):
    """Reconstruct sampled ``f`` from all level coefficients.

    Level contributions are summed and divided by ``sum_j |h_j|^2``.  Grid
    points where that sum is below ``floor`` are set to zero; if any of
    them lies in the working region :class:`RPUHoleError` is raised.  With
    ``restrict`` the output is also zeroed outside the working region,
    where the quotient only amplifies truncation noise.

    Returns
    -------
    F : ndarray
        Reconstruction on the grid (one row per signal).
    report : ReconstructionReport
    """
    duals = duals or level_duals(system)
    grid = system.grid
    first = np.asarray(coeffs[system.levels[0].index])
    single = first.ndim == 1
    S = 1 if single else first.shape[1]
    num = np.zeros((grid.size, S), dtype=complex)
    per_level = []
    for level in system.levels:
        idx, U = reconstruct_level(system, level.index, coeffs[level.index], duals[level.index], pathway)
        if pathway == "raw":
            U = U * level.window_values(grid.points[idx])[:, None]
        num[idx] += U
        d = duals[level.index]
        per_level.append({"j": str(level.index), "K": level.K, "dual": d.method,
                          "duality_residual": d.info.get("duality_residual")})
    den = system.sum_squares_on_grid()
    ok = den >= floor
    if not np.all(ok):
        bad = grid.points[~ok]
        core = system.core.contains(bad)
        if np.any(core):
            raise RPUHoleError("sum of squares below floor inside the working region",
                               point=bad[np.argmax(core)].tolist())
    if restrict:
        ok &= system.core_mask()
    F = np.zeros((S, grid.size), dtype=complex)
    F[:, ok] = (num[ok] / den[ok, None]).T
    rel = mx = None
    if truth is not None:
        T = np.atleast_2d(truth)
        rel = relative_error(F, T, grid).tolist()
        mx = np.abs(F - T).max(axis=1).tolist()
    report = ReconstructionReport(per_level, [str(l.index) for l in system.levels], rel, mx, floor, pathway)
    return (F[0] if single else F), report


# ---------------------------------------------------------------------------
# grid files


def write_grid_csv(grid, values, path=None):
    """CSV with columns ``omega_1..omega_d, re, im`` (one signal)."""
    v = np.asarray(values).ravel()
    if len(v) != grid.size:
        raise DomainError("values do not match the grid")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"omega_{i + 1}" for i in range(grid.dim)] + ["re", "im"])
    pts = grid.points
    for p, z in zip(pts, v):
        writer.writerow([repr(float(x)) for x in p] + [repr(float(z.real)), repr(float(z.imag))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_grid_csv(path, grid):
    """Read values written by :func:`write_grid_csv` and check them against ``grid``."""
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][-2:] != ["re", "im"]:
        raise DomainError("grid CSV needs a header ending in re, im")
    body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
    if len(body) != grid.size or body.shape[1] != grid.dim + 2:
        raise DomainError(f"grid CSV has {len(body)} rows of width {body.shape[1]}, "
                          f"expected {grid.size} rows of width {grid.dim + 2}")
    if not np.allclose(body[:, :grid.dim], grid.points, rtol=0, atol=1e-9 * max(1.0, grid.step)):
        raise DomainError("grid CSV sample positions do not match the grid")
    return body[:, -2] + 1j * body[:, -1]


def write_grid_binary(grid, values, path):
    """Write a sampled field in the binary format of the module docstring."""
    v = np.asarray(values).ravel()
    if len(v) != grid.size:
        raise DomainError("values do not match the grid")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", grid.dim))
        for i in range(grid.dim):
            fh.write(struct.pack("<Qdd", grid.shape[i], float(grid.lo[i]), grid.step))
        fh.write(v.astype("<c8").tobytes())


def read_grid_binary(path):
    """Read a file written by :func:`write_grid_binary`.

    Returns
    -------
    grid : FrequencyGrid
    values : ndarray of complex128
    """
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise DomainError("not a grid file")
        (d,) = struct.unpack("<I", fh.read(4))
        shape, lo, steps = [], [], []
        for _ in range(d):
            n, a, s = struct.unpack("<Qdd", fh.read(24))
            shape.append(n)
            lo.append(a)
            steps.append(s)
        if len(set(steps)) != 1:
            raise DomainError("grids with unequal steps are not supported")
        data = np.frombuffer(fh.read(), dtype="<c8")
    grid = FrequencyGrid(lo, steps[0], shape)
    if data.size != grid.size:
        raise DomainError("truncated grid file")
    return grid, data.astype(complex)
