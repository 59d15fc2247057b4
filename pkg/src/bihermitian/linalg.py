"""Bordered linear solves for the split operators.

Every elliptic problem in the package reduces to an operator of the form

    A x = cp * P(x) + cm * M(x)        (coefficients outside), or
    B x = P(cp * x) + M(cm * x)        (coefficients inside),

whose kernel (or cokernel) is one-dimensional, bordered by one extra
unknown and one gauge row. Truncated grids assemble the sparse matrix and
use a direct LU factorisation; torus grids are solved matrix-free by GMRES
preconditioned with the inverse of the constant-coefficient operator, which
is diagonal in Fourier space.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure
from .grid import NEUMANN, TORUS, fourier_symbols, operator_matrices


def split_parts(grid, x):
    """``(P x, M x)`` on flattened fields with the solver discretisation."""
    x = np.asarray(x, dtype=float).ravel()
    if grid.kind == TORUS:
        sym_p, sym_m = fourier_symbols(grid)
        xh = np.fft.rfftn(x.reshape(grid.shape), axes=range(4))
        p = np.fft.irfftn(sym_p * xh, s=grid.shape, axes=range(4)).ravel()
        m = np.fft.irfftn(sym_m * xh, s=grid.shape, axes=range(4)).ravel()
        return p, m
    P, M = operator_matrices(grid, NEUMANN)
    return P @ x, M @ x


class SplitOperator:
    """``cp P + cm M`` with the coefficients applied outside or inside.

    Parameters
    ----------
    grid : GridSpec
    cp, cm : ndarray
        Coefficient fields on the grid.
    inner : bool
        If true the operator is ``x -> P(cp x) + M(cm x)``.
    """

    def __init__(self, grid, cp, cm, inner=False):
        self.grid = grid
        self.cp = np.broadcast_to(np.asarray(cp, dtype=float), grid.shape).ravel()
        self.cm = np.broadcast_to(np.asarray(cm, dtype=float), grid.shape).ravel()
        self.inner = inner
        self.n = grid.size

    # matrix-free application (torus) ----------------------------------------

    def _pm(self, x):
        return split_parts(self.grid, x)

    def apply(self, x):
        if self.inner:
            p, _ = self._pm(self.cp * x)
            _, m = self._pm(self.cm * x)
            return p + m
        p, m = self._pm(x)
        return self.cp * p + self.cm * m

    def matrix(self):
        """Assembled sparse matrix (truncated grids only)."""
        P, M = operator_matrices(self.grid, NEUMANN)
        Dp, Dm = sp.diags(self.cp), sp.diags(self.cm)
        if self.inner:
            return (P @ Dp + M @ Dm).tocsr()
        return (Dp @ P + Dm @ M).tocsr()

    # preconditioner pieces (torus) ------------------------------------------

    def _mean_symbol(self):
        sym_p, sym_m = fourier_symbols(self.grid)
        sym = np.mean(self.cp) * sym_p + np.mean(self.cm) * sym_m
        sym = sym.copy()
        sym.flat[0] = 1.0
        return sym


def solve_bordered(op, col, row, rhs, rhs_border=0.0, tol=1e-13, maxiter=20):
    """Solve ``[[A, col], [row^T, 0]] [x; mu] = [rhs; rhs_border]``.

    Parameters
    ----------
    op : SplitOperator
    col, row : array_like
        Bordering column and gauge row, on the grid.
    rhs : array_like
    rhs_border : float
    tol : float
        Relative residual target of the Krylov path.

    Returns
    -------
    x : ndarray
        Solution on the grid shape.
    mu : float
        Value of the bordering unknown.
    info : dict
        ``method``, ``iterations`` and final ``residual``.
    """
    g = op.grid
    col = np.broadcast_to(np.asarray(col, dtype=float), g.shape).ravel()
    row = np.broadcast_to(np.asarray(row, dtype=float), g.shape).ravel()
    b = np.append(np.asarray(rhs, dtype=float).ravel(), rhs_border)
    n = op.n

    def full(z):
        return np.append(op.apply(z[:n]) + col * z[n], row @ z[:n])

    if g.kind == TORUS:
        z, info = _krylov(op, col, row, b, full, tol, maxiter)
    else:
        z, info = _direct(op, col, row, b, full)
    r = full(z) - b
    info["residual"] = float(np.max(np.abs(r)))
    return z[:n].reshape(g.shape), float(z[n]), info


def _direct(op, col, row, b, full):
    A = op.matrix()
    K = sp.bmat([[A, sp.csr_matrix(col[:, None])],
                 [sp.csr_matrix(row[None, :]), None]], format="csc")
    lu = spla.splu(K)
    z = lu.solve(b)
    # one step of iterative refinement
    z = z + lu.solve(b - full(z))
    return z, {"method": "sparse-lu", "iterations": 1}


def _krylov(op, col, row, b, full, tol, maxiter):
    g, n = op.grid, op.n
    sym = op._mean_symbol()
    col_mean = np.mean(col)
    row_sum = np.sum(row)

    def precond(z):
        r, rho = z[:n], z[n]
        mu = np.mean(r) / col_mean
        rr = (r - col * mu).reshape(g.shape)
        rh = np.fft.rfftn(rr, axes=range(4)) / sym
        rh.flat[0] = 0.0
        x = np.fft.irfftn(rh, s=g.shape, axes=range(4)).ravel()
        x = x + (rho - row @ x) / row_sum
        return np.append(x, mu)

    K = spla.LinearOperator((n + 1, n + 1), matvec=full, dtype=float)
    Minv = spla.LinearOperator((n + 1, n + 1), matvec=precond, dtype=float)
    counter = {"it": 0}

    def cb(_):
        counter["it"] += 1

    sym_p, sym_m = fourier_symbols(g)
    op_norm = (np.max(np.abs(sym_p)) * np.max(np.abs(op.cp))
               + np.max(np.abs(sym_m)) * np.max(np.abs(op.cm)))
    z = precond(b)
    for _ in range(4):
        # residual target relative to the size of the terms being balanced
        target = tol * max(np.linalg.norm(b), op_norm * np.max(np.abs(z[:n])), 1e-300)
        rnorm = np.linalg.norm(b - full(z))
        if rnorm <= target:
            break
        # gmres measures its tolerance against the norm of its own right side
        dz, _flag = spla.gmres(K, b - full(z), rtol=min(0.1, target / rnorm),
                               atol=0.0, restart=60, maxiter=maxiter, M=Minv,
                               callback=cb, callback_type="pr_norm")
        z = z + dz
    scale = max(np.linalg.norm(b), op_norm * np.max(np.abs(z[:n])), 1e-300)
    rel = np.linalg.norm(b - full(z)) / scale
    if rel > max(100 * tol, 1e-10):
        raise SolverFailure(f"GMRES stagnated at relative residual {rel:.3e}", [float(rel)])
    return z, {"method": "gmres-fft", "iterations": counter["it"]}
