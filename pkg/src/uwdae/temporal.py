"""Uniform time grids, hat bases and their exact Gram matrices.

The three (K+1) x (K+1) matrices hold the pairwise L2 products of the
piecewise-linear nodal basis and of its derivatives:

* ``Kt[k,l] = <sigma_k', sigma_l'>``   (stiffness)
* ``Lt[k,l] = <sigma_k,  sigma_l>``    (mass)
* ``Ot[k,l] = <sigma_k', sigma_l>``    (transport)

All entries are closed-form for uniform grids.  Each matrix carries the
2x2 block partition splitting off the last node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch

__all__ = [
    "TimeGrid",
    "GramTriplet",
    "build_grams",
    "sample_on_grid",
    "prolongation_matrix",
    "prolong_control",
    "cross_grams",
    "hat_values",
    "hat_derivative_values",
]

# 2-point Gauss rule on [0, 1]; exact for polynomials up to degree 3,
# which covers all products of piecewise linears appearing here.
_GAUSS2_X = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS2_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_K = T with dt = T/K."""

    T: float
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("need at least one time interval")
        if not self.T > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(T=self.T, K=self.K * int(factor))


@dataclass(frozen=True)
class GramTriplet:
    Kt: np.ndarray
    Lt: np.ndarray
    Ot: np.ndarray

    def blocks(self, name: str):
        """Return (M11, M12, M21, M22) splitting off the last node."""
        M = getattr(self, name)
        return M[:-1, :-1], M[:-1, -1:], M[-1:, :-1], M[-1:, -1:]


def build_grams(grid: TimeGrid) -> GramTriplet:
    K, dt = grid.K, grid.dt
    main = np.full(K + 1, 2 * dt / 3.0)
    main[0] = main[-1] = dt / 3.0
    Lt = _tridiag(main, dt / 6.0, dt / 6.0)

    main = np.full(K + 1, 2.0 / dt)
    main[0] = main[-1] = 1.0 / dt
    Kt = _tridiag(main, -1.0 / dt, -1.0 / dt)

    main = np.zeros(K + 1)
    main[0], main[-1] = -0.5, 0.5
    Ot = _tridiag(main, -0.5, 0.5)  # super-diagonal -1/2, sub-diagonal +1/2
    return GramTriplet(Kt=Kt, Lt=Lt, Ot=Ot)


def _tridiag(main, upper, lower) -> np.ndarray:
    n = len(main)
    M = np.diag(main)
    M += np.diag(np.full(n - 1, upper), k=1)
    M += np.diag(np.full(n - 1, lower), k=-1)
    return M


def sample_on_grid(fun, grid: TimeGrid) -> np.ndarray:
    """Nodal samples (f(t_0), ..., f(t_K)); shape (n, K+1) or (K+1,)."""
    return np.asarray(fun(grid.nodes), dtype=float)


def prolongation_matrix(coarse: TimeGrid, fine: TimeGrid) -> sp.csr_matrix:
    """Interpolation of the coarse hat expansion at the fine nodes.

    Shape (K_fine+1, K_coarse+1); exact on shared nodes.
    """
    if abs(coarse.T - fine.T) > 1e-12 * max(coarse.T, fine.T):
        raise GridMismatch(
            f"horizons differ: coarse T={coarse.T}, fine T={fine.T}"
        )
    rows, cols, vals = _hat_eval_coo(coarse, fine.nodes)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(fine.K + 1, coarse.K + 1)
    )


def prolong_control(samples: np.ndarray, coarse: TimeGrid, fine: TimeGrid) -> np.ndarray:
    """Map samples on the coarse grid to samples on the fine grid.

    Accepts shape (K_u+1,) or (m, K_u+1); returns matching fine-grid shape.
    """
    P = prolongation_matrix(coarse, fine)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        return P @ samples
    return (P @ samples.T).T


def hat_values(grid: TimeGrid, t: np.ndarray) -> sp.csr_matrix:
    """Sparse (len(t), K+1) matrix of hat-function values sigma_k(t)."""
    rows, cols, vals = _hat_eval_coo(grid, np.asarray(t, dtype=float))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(np.atleast_1d(t)), grid.K + 1))


def _hat_eval_coo(grid: TimeGrid, t: np.ndarray):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dt, K = grid.dt, grid.K
    cell = np.clip(np.floor(t / dt).astype(int), 0, K - 1)
    local = t / dt - cell
    idx = np.arange(len(t))
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([cell, cell + 1])
    vals = np.concatenate([1.0 - local, local])
    return rows, cols, vals


def hat_derivative_values(grid: TimeGrid, t: np.ndarray, node_average: bool = True) -> sp.csr_matrix:
    """Sparse (len(t), K+1) matrix of derivative values sigma_k'(t).

    Derivatives are piecewise constant; at interior grid nodes the average
    of the one-sided limits is returned when ``node_average`` is set.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dt, K = grid.dt, grid.K
    cell = np.clip(np.floor(t / dt).astype(int), 0, K - 1)
    idx = np.arange(len(t))
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([cell, cell + 1])
    vals = np.concatenate([np.full(len(t), -1.0 / dt), np.full(len(t), 1.0 / dt)])
    M = sp.csr_matrix((vals, (rows, cols)), shape=(len(t), K + 1))
    if node_average:
        on_node = np.isclose(t / dt, np.round(t / dt), atol=1e-12)
        interior = on_node & (t > dt * 0.5) & (t < grid.T - dt * 0.5)
        if np.any(interior):
            k = np.round(t[interior] / dt).astype(int)
            i = idx[interior]
            left = sp.csr_matrix(
                (
                    np.concatenate([np.full(len(k), -1.0 / dt), np.full(len(k), 1.0 / dt)]),
                    (np.concatenate([i, i]), np.concatenate([k - 1, k])),
                ),
                shape=M.shape,
            )
            right = sp.csr_matrix(
                (
                    np.concatenate([np.full(len(k), -1.0 / dt), np.full(len(k), 1.0 / dt)]),
                    (np.concatenate([i, i]), np.concatenate([k, k + 1])),
                ),
                shape=M.shape,
            )
            mask = sp.csr_matrix(
                (np.ones(len(k)), (i, np.zeros(len(k), dtype=int))), shape=(M.shape[0], 1)
            )
            # replace rows at interior nodes by the one-sided average
            keep = sp.diags(1.0 - np.asarray(mask.todense()).ravel())
            put = sp.diags(np.asarray(mask.todense()).ravel())
            M = keep @ M + put @ ((left + right) * 0.5)
    return M


def cross_grams(basis_grid: TimeGrid, test_grid: TimeGrid):
    """Exact cross Gram matrices between hat bases on two uniform grids.

    Returns (Kx, O1, O2, Lx), each (K_b+1) x (K_t+1), with
    Kx[k,l] = <sigma_k_b', sigma_l_t'>, O1[k,l] = <sigma_k_b', sigma_l_t>,
    O2[k,l] = <sigma_k_b, sigma_l_t'>, Lx[k,l] = <sigma_k_b, sigma_l_t>.

    Quadrature runs per cell of the union grid (2-point Gauss, exact for
    the piecewise-quadratic integrands).
    """
    if abs(basis_grid.T - test_grid.T) > 1e-12 * max(basis_grid.T, test_grid.T):
        raise GridMismatch("cross Grams require a shared horizon")
    cuts = np.union1d(basis_grid.nodes, test_grid.nodes)
    a, b = cuts[:-1], cuts[1:]
    h = b - a
    pts = (a[:, None] + np.outer(h, _GAUSS2_X)).ravel()
    wts = np.outer(h, _GAUSS2_W).ravel()
    W = sp.diags(wts)
    Vb = hat_values(basis_grid, pts)
    Vt = hat_values(test_grid, pts)
    Db = hat_derivative_values(basis_grid, pts, node_average=False)
    Dt = hat_derivative_values(test_grid, pts, node_average=False)
    Kx = (Db.T @ W @ Dt).toarray()
    O1 = (Db.T @ W @ Vt).toarray()
    O2 = (Vb.T @ W @ Dt).toarray()
    Lx = (Vb.T @ W @ Vt).toarray()
    return Kx, O1, O2, Lx
