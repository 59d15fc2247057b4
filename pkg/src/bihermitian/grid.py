"""Grids, scalar fields and the second-order split operators.

Three grid families are supported:

* ``torus4d``: a flat 4-torus with coordinates ``x1..x4`` and complex
  coordinates ``z = x1 + i x2``, ``w = x3 + i x4``. All axes are periodic and
  differentiated spectrally.
* ``hopf``: torus-invariant fields on a Hopf surface, described by the
  log-radial coordinate ``x`` (truncated to ``[-X, X]``) and the periodic
  coordinate ``s`` of period 2.
* ``inoue``: fields depending on one truncated coordinate ``y``.

Periodic axes use Fourier collocation. Truncated axes use fourth-order finite
differences in one of two flavours: ``"eval"`` closes the stencil with
one-sided sixth-point formulas (used when measuring residuals), ``"neumann"``
reflects the field evenly across the ends (used inside every solver, so that
constants span the kernel and the operators are self-consistent).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.sparse as sp
from numpy.lib.mixins import NDArrayOperatorsMixin

from .errors import GridMismatchError

TORUS = "torus4d"
HOPF = "hopf"
INOUE = "inoue"
KINDS = (TORUS, HOPF, INOUE)

EVAL = "eval"
NEUMANN = "neumann"

# points excluded at each truncated end when measuring sup norms
INTERIOR_MARGIN = 3


@dataclass(frozen=True)
class GridSpec:
    """Discretisation of one backend.

    Parameters
    ----------
    kind : {"torus4d", "hopf", "inoue"}
    sizes : tuple of int
        Points per axis.
    lo, hi : tuple of float
        Axis extents. Periodic axes cover ``[lo, hi)``, truncated ones
        ``[lo, hi]`` including both ends.
    periodic : tuple of bool
    alpha, beta : float
        Hopf moduli; ignored by the other kinds.
    """

    kind: str
    sizes: tuple
    lo: tuple
    hi: tuple
    periodic: tuple
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        n = len(self.sizes)
        if not (len(self.lo) == len(self.hi) == len(self.periodic) == n):
            raise ValueError("sizes, lo, hi and periodic must have equal length")
        for size, per, a, b in zip(self.sizes, self.periodic, self.lo, self.hi):
            if int(size) != size or size < (4 if per else 7):
                raise ValueError(f"axis size {size} too small")
            if not b > a:
                raise ValueError("axis extent must be positive")
        if self.kind == HOPF and not (self.alpha > 0 and self.beta > 0):
            raise ValueError("Hopf moduli must be positive")

    # constructors ---------------------------------------------------------

    @classmethod
    def torus(cls, sizes=12, periods=(1.0, 1.0, 1.0, 1.0)):
        """Flat 4-torus with rectangular period lattice."""
        if np.isscalar(sizes):
            sizes = (int(sizes),) * 4
        sizes = tuple(int(s) for s in sizes)
        periods = tuple(float(p) for p in periods)
        if len(sizes) != 4 or len(periods) != 4:
            raise ValueError("torus grids need four axes")
        return cls(TORUS, sizes, (0.0,) * 4, periods, (True,) * 4)

    @classmethod
    def hopf(cls, alpha, beta, nx=1024, ns=32, half_width=None):
        """Hopf surface grid in ``(x, s)``.

        The default half width ``10 / min(alpha, beta, 1)`` puts the ends
        where the SU profile is within ``exp(-10)`` of its limits.
        """
        alpha, beta = float(alpha), float(beta)
        if half_width is None:
            half_width = 10.0 / min(alpha, beta, 1.0)
        X = float(half_width)
        return cls(HOPF, (int(nx), int(ns)), (-X, 0.0), (X, 2.0),
                   (False, True), alpha, beta)

    @classmethod
    def inoue(cls, ny=65, y_range=(0.5, 2.0)):
        """Inoue strip grid in the single coordinate ``y > 0``."""
        lo, hi = float(y_range[0]), float(y_range[1])
        if not 0 < lo < hi:
            raise ValueError("Inoue strip needs 0 < y_lo < y_hi")
        return cls(INOUE, (int(ny),), (lo,), (hi,), (False,))

    # geometry -------------------------------------------------------------

    @property
    def shape(self):
        return tuple(int(s) for s in self.sizes)

    @property
    def ndim(self):
        return len(self.sizes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def half_width(self):
        """Truncation half width ``X`` of a Hopf grid."""
        return self.hi[0] if self.kind == HOPF else None

    def spacing(self, axis):
        n = self.sizes[axis]
        length = self.hi[axis] - self.lo[axis]
        return length / n if self.periodic[axis] else length / (n - 1)

    def axis(self, axis):
        return _axis_coords(self, axis)

    def mesh(self):
        """Broadcastable coordinate arrays, one per axis."""
        return np.meshgrid(*(self.axis(a) for a in range(self.ndim)),
                           indexing="ij", sparse=True)

    def weights(self):
        """Quadrature weights (trapezoid / rectangle rule) on the full grid."""
        return _weights(self)

    def interior(self, margin=INTERIOR_MARGIN):
        """Boolean mask dropping ``margin`` points at each truncated end."""
        return _interior(self, margin)

    def field(self, values):
        return ScalarField(self, values)

    def zeros(self):
        return ScalarField(self, np.zeros(self.shape))

    def ones(self):
        return ScalarField(self, np.ones(self.shape))

    def describe(self):
        return {"kind": self.kind, "sizes": list(self.shape),
                "lo": list(self.lo), "hi": list(self.hi),
                "alpha": self.alpha, "beta": self.beta}


@functools.lru_cache(maxsize=64)
def _axis_coords(spec, axis):
    n = spec.sizes[axis]
    if spec.periodic[axis]:
        pts = spec.lo[axis] + spec.spacing(axis) * np.arange(n)
    else:
        pts = np.linspace(spec.lo[axis], spec.hi[axis], n)
    pts.setflags(write=False)
    return pts


def _axis_weights(spec, axis):
    n = spec.sizes[axis]
    w = np.full(n, spec.spacing(axis))
    if not spec.periodic[axis]:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


@functools.lru_cache(maxsize=64)
def _weights(spec):
    w = np.ones(())
    for a in range(spec.ndim):
        w = np.multiply.outer(w, _axis_weights(spec, a))
    w = np.asarray(w, dtype=float).reshape(spec.shape)
    w.setflags(write=False)
    return w


@functools.lru_cache(maxsize=64)
def _interior(spec, margin):
    mask = np.ones(spec.shape, dtype=bool)
    for a in range(spec.ndim):
        if spec.periodic[a] or margin <= 0:
            continue
        idx = [slice(None)] * spec.ndim
        idx[a] = slice(0, margin)
        mask[tuple(idx)] = False
        idx[a] = slice(-margin, None)
        mask[tuple(idx)] = False
    mask.setflags(write=False)
    return mask


# ---------------------------------------------------------------------------
# scalar fields


class ScalarField(NDArrayOperatorsMixin):
    """Real values on every point of a grid.

    Arithmetic and numpy ufuncs act pointwise and return new fields; mixing
    fields from different grids raises :class:`GridMismatchError`.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            arr = np.broadcast_to(arr, grid.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError("scalar field values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        grid = self.grid
        raw = []
        for x in inputs:
            if isinstance(x, ScalarField):
                if x.grid != grid:
                    raise GridMismatchError("fields live on different grids")
                raw.append(x.values)
            else:
                raw.append(x)
        if "out" in kwargs:
            return NotImplemented
        result = getattr(ufunc, method)(*raw, **kwargs)
        if isinstance(result, np.ndarray) and result.shape == grid.shape \
                and result.dtype.kind == "f":
            return ScalarField(grid, result)
        return result

    def __repr__(self):
        return f"ScalarField({self.grid.kind}, shape={self.grid.shape})"

    @property
    def shape(self):
        return self.values.shape

    def sup(self, interior=True):
        return sup_norm(self, interior=interior)

    def mean(self):
        return float(np.sum(self.values * self.grid.weights())
                     / np.sum(self.grid.weights()))

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


def as_array(u, grid=None):
    """Raw values of a field or array, checking the grid when given."""
    if isinstance(u, ScalarField):
        if grid is not None and u.grid != grid:
            raise GridMismatchError("fields live on different grids")
        return u.values
    arr = np.asarray(u, dtype=float)
    if grid is not None and arr.shape != grid.shape:
        arr = np.broadcast_to(arr, grid.shape)
    return arr


def sup_norm(u, grid=None, interior=True):
    """Sup norm, restricted to interior points of truncated axes by default."""
    if isinstance(u, ScalarField):
        grid = u.grid
    arr = as_array(u)
    if interior and grid is not None:
        arr = arr[grid.interior()]
    return float(np.max(np.abs(arr))) if arr.size else 0.0


# ---------------------------------------------------------------------------
# one-dimensional differentiation


def _fd_weights(offsets, order):
    """Finite-difference weights at integer ``offsets`` for ``d^order/dx^order``."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    return np.linalg.solve(V, rhs)


_CENTRAL = {
    1: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
    2: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
}


@functools.lru_cache(maxsize=64)
def fd_matrix(n, h, order, boundary):
    """Fourth-order finite-difference matrix on ``n`` equispaced points.

    ``boundary="eval"`` uses one-sided six-point closures in the first and
    last two rows. ``boundary="neumann"`` folds the centred stencil across the
    ends (even reflection about the end points).
    """
    stencil = _CENTRAL[order]
    A = sp.lil_matrix((n, n))
    for i in range(n):
        if boundary == NEUMANN or 2 <= i <= n - 3:
            for k, c in zip(range(-2, 3), stencil):
                j = i + k
                if j < 0:
                    j = -j
                elif j > n - 1:
                    j = 2 * (n - 1) - j
                A[i, j] += c
        elif boundary == EVAL:
            start = 0 if i < 2 else n - 6
            offs = np.arange(start, start + 6) - i
            for k, c in zip(offs, _fd_weights(offs, order)):
                A[i, i + k] += c
        else:
            raise ValueError(f"unknown boundary mode {boundary!r}")
    A = A.tocsr() / h ** order
    A.sort_indices()
    return A


def _wavenumbers(n, length):
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def _spectral_along(arr, axis, length, order):
    n = arr.shape[axis]
    k = 2 * np.pi * np.fft.rfftfreq(n, d=length / n)
    if order % 2 == 1 and n % 2 == 0:
        k[-1] = 0.0
    mult = (1j * k) ** order
    shape = [1] * arr.ndim
    shape[axis] = -1
    spec = np.fft.rfft(arr, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


@functools.lru_cache(maxsize=64)
def spectral_matrix(n, length, order):
    """Dense Fourier differentiation matrix (Nyquist dropped for odd orders)."""
    D = _spectral_along(np.eye(n), 0, length, order)
    D.setflags(write=False)
    return D


def derivative(u, grid, axis, order=1, boundary=EVAL):
    """Derivative of ``u`` along one axis, returned as a raw array."""
    arr = as_array(u, grid)
    length = grid.hi[axis] - grid.lo[axis]
    if grid.periodic[axis]:
        return _spectral_along(arr, axis, length, order)
    D = fd_matrix(grid.sizes[axis], grid.spacing(axis), order, boundary)
    moved = np.moveaxis(arr, axis, 0)
    out = (D @ moved.reshape(moved.shape[0], -1)).reshape(moved.shape)
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# split operators on raw arrays


def plus_array(grid, arr, boundary=EVAL):
    """``d^2/dz dzbar`` type operator on the plus factor."""
    if grid.kind == TORUS:
        return 0.25 * (derivative(arr, grid, 0, 2) + derivative(arr, grid, 1, 2))
    if grid.kind == HOPF:
        # d_mu = d_x + d_s / 2
        dx1 = derivative(arr, grid, 0, 1, boundary)
        return (derivative(arr, grid, 0, 2, boundary) + derivative(dx1, grid, 1, 1)
                + 0.25 * derivative(arr, grid, 1, 2))
    return 0.25 * derivative(arr, grid, 0, 2, boundary)


def minus_array(grid, arr, boundary=EVAL):
    """``d^2/dw dwbar`` type operator on the minus factor."""
    if grid.kind == TORUS:
        return 0.25 * (derivative(arr, grid, 2, 2) + derivative(arr, grid, 3, 2))
    if grid.kind == HOPF:
        # d_nu = -d_x + d_s / 2
        dx1 = derivative(arr, grid, 0, 1, boundary)
        return (derivative(arr, grid, 0, 2, boundary) - derivative(dx1, grid, 1, 1)
                + 0.25 * derivative(arr, grid, 1, 2))
    return np.zeros_like(np.asarray(arr, dtype=float))


def mixed_array(grid, arr, boundary=EVAL):
    """Real and imaginary parts of the cross derivative ``d_z d_wbar``."""
    if grid.kind == TORUS:
        d1 = derivative(arr, grid, 0, 1)
        d2 = derivative(arr, grid, 1, 1)
        re = 0.25 * (derivative(d1, grid, 2, 1) + derivative(d2, grid, 3, 1))
        im = 0.25 * (derivative(d1, grid, 3, 1) - derivative(d2, grid, 2, 1))
        return re, im
    if grid.kind == HOPF:
        # d_mu d_nu = d_s^2 / 4 - d_x^2
        re = 0.25 * derivative(arr, grid, 1, 2) - derivative(arr, grid, 0, 2, boundary)
        return re, np.zeros_like(re)
    z = np.zeros_like(np.asarray(arr, dtype=float))
    return z, z.copy()


def second_plus(u, boundary=EVAL):
    """Plus-factor second derivative of a field, as a field."""
    return ScalarField(u.grid, plus_array(u.grid, u.values, boundary))


def second_minus(u, boundary=EVAL):
    """Minus-factor second derivative of a field, as a field."""
    return ScalarField(u.grid, minus_array(u.grid, u.values, boundary))


def mixed_cross(u, boundary=EVAL):
    """Cross derivative ``d_z d_wbar u`` as a pair (real, imaginary) of fields."""
    re, im = mixed_array(u.grid, u.values, boundary)
    return ScalarField(u.grid, re), ScalarField(u.grid, im)


def integrate(v, grid=None):
    """Integral against ``Theta_plus ^ Theta_minus``.

    The measure carries the backend normalisation: ``4 dVol`` on the flat
    torus (``dz ^ dzbar ^ dw ^ dwbar = 4 dVol``), ``4 pi^2 / (alpha beta)``
    times ``dx ds`` on a Hopf surface and plain ``dy`` on an Inoue strip.
    """
    if isinstance(v, ScalarField):
        grid = v.grid
    arr = as_array(v, grid)
    total = float(np.sum(arr * grid.weights()))
    if grid.kind == TORUS:
        return 4.0 * total
    if grid.kind == HOPF:
        return 4 * np.pi ** 2 / (grid.alpha * grid.beta) * total
    return total


# ---------------------------------------------------------------------------
# assembled operators for the solvers


@functools.lru_cache(maxsize=16)
def operator_matrices(grid, boundary=NEUMANN):
    """Sparse matrices ``(P, M)`` of the split operators on flattened fields.

    Only available for grids with a truncated axis; the torus solvers work
    matrix-free through :func:`fourier_symbols`.
    """
    if grid.kind == TORUS:
        raise ValueError("torus operators are applied matrix-free")
    if grid.kind == INOUE:
        n = grid.sizes[0]
        P = 0.25 * fd_matrix(n, grid.spacing(0), 2, boundary)
        return P.tocsr(), sp.csr_matrix((n, n))
    nx, ns = grid.shape
    Dx1 = fd_matrix(nx, grid.spacing(0), 1, boundary)
    Dx2 = fd_matrix(nx, grid.spacing(0), 2, boundary)
    Ds1 = sp.csr_matrix(spectral_matrix(ns, grid.hi[1] - grid.lo[1], 1))
    Ds2 = sp.csr_matrix(spectral_matrix(ns, grid.hi[1] - grid.lo[1], 2))
    Ix, Is = sp.identity(nx, format="csr"), sp.identity(ns, format="csr")
    base = sp.kron(Dx2, Is) + 0.25 * sp.kron(Ix, Ds2)
    cross = sp.kron(Dx1, Ds1)
    return (base + cross).tocsr(), (base - cross).tocsr()


@functools.lru_cache(maxsize=8)
def fourier_symbols(grid):
    """Symbols of ``P`` and ``M`` on the ``rfftn`` layout of a torus grid."""
    ks = []
    for a in range(4):
        n, length = grid.sizes[a], grid.hi[a] - grid.lo[a]
        k = (_wavenumbers(n, length) if a < 3
             else 2 * np.pi * np.fft.rfftfreq(n, d=length / n))
        shape = [1] * 4
        shape[a] = -1
        ks.append(k.reshape(shape))
    shape = tuple(grid.sizes[:3]) + (grid.sizes[3] // 2 + 1,)
    sym_p = np.broadcast_to(-0.25 * (ks[0] ** 2 + ks[1] ** 2), shape).copy()
    sym_m = np.broadcast_to(-0.25 * (ks[2] ** 2 + ks[3] ** 2), shape).copy()
    return sym_p, sym_m


# ---------------------------------------------------------------------------
# random test data


def random_smooth_field(grid, seed, amplitude=1.0, decay=1.0, max_mode=4, taper_width=None):
    """Smooth zero-mean field with geometrically decaying mode amplitudes.

    Periodic axes carry Fourier modes, truncated axes carry cosine modes
    multiplied by a Gaussian taper, so the field is flat (to ~1e-11) near the
    truncation ends. The result is scaled to have sup norm ``amplitude``.

    Parameters
    ----------
    grid : GridSpec
    seed : int
        Seed of the generator; equal seeds give identical fields.
    amplitude : float
    decay : float
        Mode ``m`` gets standard deviation ``exp(-decay * |m| / 2)`` where
        ``|m|`` is the total mode order.
    max_mode : int
        Highest mode per axis (capped below the Nyquist frequency).
    taper_width : float, optional
        Width of the Gaussian taper on truncated axes (default a tenth of
        the axis length).
    """
    rng = np.random.default_rng(seed)
    bases, orders = [], []
    for a in range(grid.ndim):
        x = grid.axis(a)
        lo, hi = grid.lo[a], grid.hi[a]
        length = hi - lo
        if grid.periodic[a]:
            K = max(1, min(max_mode, grid.sizes[a] // 2 - 1))
            cols, ords = [np.ones_like(x)], [0]
            for m in range(1, K + 1):
                th = 2 * np.pi * m * (x - lo) / length
                cols += [np.cos(th), np.sin(th)]
                ords += [m, m]
        else:
            centre = 0.5 * (lo + hi)
            width = length / 10.0 if taper_width is None else taper_width
            taper = np.exp(-(((x - centre) / width) ** 2))
            cols = [taper * np.cos(np.pi * m * (x - lo) / length)
                    for m in range(max_mode + 1)]
            ords = list(range(max_mode + 1))
        bases.append(np.array(cols))
        orders.append(np.array(ords))
    total_order = np.zeros(())
    for o in orders:
        total_order = np.add.outer(total_order, o)
    coeffs = rng.standard_normal(total_order.shape) * np.exp(-0.5 * decay * total_order)
    vals = coeffs
    for B in bases:
        # contract the leading coefficient axis, appending a grid axis
        vals = np.tensordot(vals, B, axes=([0], [0]))
    w = grid.weights()
    vals = vals - np.sum(vals * w) / np.sum(w)
    peak = np.max(np.abs(vals))
    if peak == 0:
        return grid.zeros()
    return ScalarField(grid, amplitude * vals / peak)
