"""Independent numerical oracles used by the test suite.

Everything here is written against the mathematical definitions only:
hat functions are evaluated from scratch and all integrals use composite
Gauss quadrature, so these routines share no code with the package
internals they are meant to check.
"""

import numpy as np
import scipy.sparse as sp


def gauss_on_cells(nodes: np.ndarray, order: int):
    """Composite Gauss points/weights over consecutive cells of a grid."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    pts = (a[:, None] + np.outer(h, x)).ravel()
    wts = np.outer(h, w).ravel()
    return pts, wts


def hat(k: int, K: int, dt: float, t: np.ndarray) -> np.ndarray:
    """Nodal hat function sigma_k on the uniform grid, evaluated pointwise."""
    return np.clip(1.0 - np.abs(t / dt - k), 0.0, None)


def hat_dot(k: int, K: int, dt: float, t: np.ndarray) -> np.ndarray:
    """Derivative of sigma_k away from the grid nodes (quadrature use only)."""
    out = np.zeros_like(t)
    left = (t > (k - 1) * dt) & (t < k * dt)
    right = (t > k * dt) & (t < (k + 1) * dt)
    out[left] = 1.0 / dt
    out[right] = -1.0 / dt
    return out


def trial_functions(sys, mu, grid, V, t: np.ndarray) -> np.ndarray:
    """Values of every implied trial function at the query times.

    Returns shape (dim, n, len(t)) with dim = n*K + d, index k*n + i for
    the hat at node k in component i, trailing d kernel functions at the
    last node.
    """
    n, K, dt = sys.n, grid.K, grid.dt
    E = sys.E.toarray()
    A = sys.A_at(mu).toarray()
    d = V.V.shape[1]
    out = np.zeros((n * K + d, n, len(t)))
    for k in range(K):
        s = hat(k, K, dt, t)
        sd = hat_dot(k, K, dt, t)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            out[k * n + i] = -np.outer(E.T @ e, sd) - np.outer(A.T @ e, s)
    s = hat(K, K, dt, t)
    sd = hat_dot(K, K, dt, t)
    for j in range(d):
        v = V.V[:, j]
        out[n * K + j] = -np.outer(E.T @ v, sd) - np.outer(A.T @ v, s)
    return out


def trial_gram(sys, mu, grid, V, order: int = 2) -> np.ndarray:
    """L2 Gram matrix of the implied trial basis by quadrature.

    Two Gauss points per cell are exact for the piecewise-quadratic
    integrands of piecewise-linear data.
    """
    pts, wts = gauss_on_cells(grid.nodes, order)
    xi = trial_functions(sys, mu, grid, V, pts)
    return np.einsum("ait,t,bit->ab", xi, wts, xi)


def moment_vector(sys, mu, grid, V, reference, order: int = 10) -> np.ndarray:
    """Quadrature of <x*, xi_j> for every trial function."""
    pts, wts = gauss_on_cells(grid.nodes, order)
    xi = trial_functions(sys, mu, grid, V, pts)
    ref = np.atleast_2d(np.asarray(reference(pts), dtype=float))
    return np.einsum("ait,t,it->a", xi, wts, ref)


def l2_error_oracle(sys, sol_eval, reference, grid, order: int = 8) -> float:
    """Composite-Gauss L2 distance between two time functions (n, t)."""
    pts, wts = gauss_on_cells(grid.nodes, order)
    diff = np.atleast_2d(sol_eval(pts)) - np.atleast_2d(reference(pts))
    return float(np.sqrt(np.sum(wts * np.sum(diff**2, axis=0))))


def random_sparse_system(rng, n: int, K: int, rank: int | None = None):
    """Random dense-ish DAE with E of prescribed rank; returns (sys, grid).

    Kept tiny (n <= 5, K <= 8) so the dense quadrature oracle stays fast.
    """
    from uwdae import AffineOperator, DaeSystem, TimeGrid
    from uwdae.system_model import theta_constant

    if rank is None:
        rank = int(rng.integers(0, n + 1))
    U = np.linalg.qr(rng.standard_normal((n, n)))[0]
    W = np.linalg.qr(rng.standard_normal((n, n)))[0]
    svals = np.zeros(n)
    svals[:rank] = 0.5 + rng.random(rank)
    E = sp.csr_matrix(U @ np.diag(svals) @ W.T)
    A = sp.csr_matrix(rng.standard_normal((n, n)))

    def rhs(t, _w=rng.standard_normal(n)):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.outer(_w, np.sin(t + 0.3))

    sys = DaeSystem(
        n=n,
        E=E,
        A=AffineOperator(terms=((theta_constant(1.0), A),)),
        rhs=AffineOperator(terms=((theta_constant(1.0), rhs),)),
        x0=None,
        T=1.0,
    )
    return sys, TimeGrid(T=1.0, K=K)
