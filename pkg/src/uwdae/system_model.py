"""Parameterized DAE systems with affine data decompositions.

A system is the tuple (E, A_mu, f_mu, x0_mu) with optional control/output
matrices.  Parameter dependence enters only through scalar coefficient
functions (theta expressions) multiplying fixed matrices, vectors or
time-sample sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    InconsistentExtension,
    IrregularPencil,
    ParameterDimensionMismatch,
)

__all__ = [
    "ThetaExpression",
    "theta_constant",
    "theta_component",
    "theta_monomial",
    "theta_callable",
    "theta_product",
    "theta_to_dict",
    "theta_from_dict",
    "theta_shift",
    "AffineOperator",
    "DaeSystem",
    "KernelBasis",
    "PencilDiagnostics",
    "validate_system",
    "kernel_basis",
    "pencil_probe",
    "homogenize",
    "affine_eval",
    "sample_rhs",
]

DEFAULT_RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# theta expressions


@dataclass(frozen=True)
class ThetaExpression:
    """Scalar coefficient function of the parameter vector.

    Closed grammar so that system manifests stay serializable:

    * ``constant``:  mu -> value
    * ``component``: mu -> mu[index]
    * ``monomial``:  mu -> coeff * prod_i mu[i]**exponents[i]
    * ``callable``:  arbitrary function, escape hatch, not serializable
    """

    kind: str
    value: float = 0.0
    index: int = 0
    coeff: float = 1.0
    exponents: tuple[int, ...] = ()
    func: Callable[[np.ndarray], float] | None = field(default=None, compare=False)

    def __call__(self, mu) -> float:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if self.kind == "constant":
            return self.value
        if self.kind == "component":
            if self.index >= mu.size:
                raise ParameterDimensionMismatch(
                    f"theta references component {self.index}, parameter has "
                    f"dimension {mu.size}"
                )
            return float(mu[self.index])
        if self.kind == "monomial":
            if len(self.exponents) > mu.size:
                raise ParameterDimensionMismatch(
                    f"monomial uses {len(self.exponents)} components, parameter "
                    f"has dimension {mu.size}"
                )
            out = self.coeff
            for i, e in enumerate(self.exponents):
                if e:
                    out *= float(mu[i]) ** e
            return out
        if self.kind == "callable":
            return float(self.func(mu))
        raise ValueError(f"unknown theta kind {self.kind!r}")

    @property
    def serializable(self) -> bool:
        return self.kind != "callable"

    def min_parameter_dim(self) -> int:
        if self.kind == "component":
            return self.index + 1
        if self.kind == "monomial":
            nz = [i + 1 for i, e in enumerate(self.exponents) if e]
            return max(nz) if nz else 0
        return 0


def theta_constant(c: float) -> ThetaExpression:
    return ThetaExpression(kind="constant", value=float(c))


def theta_component(j: int) -> ThetaExpression:
    if j < 0:
        raise ValueError("component index must be nonnegative")
    return ThetaExpression(kind="component", index=int(j))


def theta_monomial(coeff: float, exponents: Sequence[int]) -> ThetaExpression:
    return ThetaExpression(
        kind="monomial", coeff=float(coeff), exponents=tuple(int(e) for e in exponents)
    )


def theta_callable(func: Callable[[np.ndarray], float]) -> ThetaExpression:
    return ThetaExpression(kind="callable", func=func)


def theta_to_dict(t: ThetaExpression) -> dict:
    if t.kind == "constant":
        return {"type": "constant", "value": t.value}
    if t.kind == "component":
        return {"type": "component", "index": t.index}
    if t.kind == "monomial":
        return {"type": "monomial", "coeff": t.coeff, "exponents": list(t.exponents)}
    raise ValueError(f"theta kind {t.kind!r} is not serializable")


def theta_from_dict(d: dict) -> ThetaExpression:
    kind = d.get("type")
    if kind == "constant":
        return theta_constant(d["value"])
    if kind == "component":
        return theta_component(d["index"])
    if kind == "monomial":
        return theta_monomial(d["coeff"], d["exponents"])
    raise ValueError(f"unknown theta type {kind!r}")


def theta_shift(t: ThetaExpression, offset: int) -> ThetaExpression:
    """Re-index a theta to act on a parameter subvector starting at offset."""
    if offset == 0 or t.kind == "constant":
        return t
    if t.kind == "component":
        return theta_component(t.index + offset)
    if t.kind == "monomial":
        return theta_monomial(t.coeff, (0,) * offset + t.exponents)
    return theta_callable(lambda mu, _t=t: _t(np.asarray(mu)[offset:]))


def _as_monomial(t: ThetaExpression) -> ThetaExpression | None:
    if t.kind == "constant":
        return theta_monomial(t.value, ())
    if t.kind == "component":
        return theta_monomial(1.0, (0,) * t.index + (1,))
    if t.kind == "monomial":
        return t
    return None


def theta_product(a: ThetaExpression, b: ThetaExpression) -> ThetaExpression:
    """Pointwise product; stays in the serializable grammar when possible."""
    ma, mb = _as_monomial(a), _as_monomial(b)
    if ma is not None and mb is not None:
        n = max(len(ma.exponents), len(mb.exponents))
        ea = ma.exponents + (0,) * (n - len(ma.exponents))
        eb = mb.exponents + (0,) * (n - len(mb.exponents))
        return theta_monomial(ma.coeff * mb.coeff, tuple(x + y for x, y in zip(ea, eb)))
    return theta_callable(lambda mu, _a=a, _b=b: _a(mu) * _b(mu))


# ---------------------------------------------------------------------------
# affine operators

TimeSampler = Callable[[np.ndarray], np.ndarray]
"""Vectorized map from times (shape (k,)) to samples (shape (n, k))."""


@dataclass(frozen=True)
class AffineOperator:
    """Affine decomposition sum_q theta_q(mu) * M_q.

    Payloads are sparse/dense matrices, vectors, or (for right-hand sides)
    vectorized time samplers ``t -> values``.
    """

    terms: tuple[tuple[ThetaExpression, object], ...]

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("affine operator needs at least one term")

    @property
    def Q(self) -> int:
        return len(self.terms)

    @property
    def thetas(self) -> list[ThetaExpression]:
        return [t for t, _ in self.terms]

    @property
    def payloads(self) -> list[object]:
        return [m for _, m in self.terms]

    @staticmethod
    def constant(payload) -> "AffineOperator":
        return AffineOperator(terms=((theta_constant(1.0), payload),))

    def shape_of_terms(self):
        shapes = []
        for _, m in self.terms:
            shapes.append(m.shape if hasattr(m, "shape") else None)
        return shapes


def affine_eval(op: AffineOperator, mu) -> np.ndarray | sp.spmatrix:
    """Assemble sum_q theta_q(mu) * M_q for matrix/vector payloads."""
    out = None
    for theta, m in op.terms:
        c = theta(mu)
        contrib = m * c if sp.issparse(m) else c * np.asarray(m, dtype=float)
        out = contrib if out is None else out + contrib
    return out


def sample_rhs(op: AffineOperator, mu, times: np.ndarray) -> np.ndarray:
    """Evaluate a time-sampled affine right-hand side at the given nodes.

    Returns an (n, len(times)) array of sum_q theta_q(mu) f_q(t_k).
    """
    times = np.asarray(times, dtype=float)
    out = None
    for theta, f in op.terms:
        vals = np.asarray(f(times), dtype=float)
        if vals.ndim == 1:
            vals = vals[np.newaxis, :]
        contrib = theta(mu) * vals
        out = contrib if out is None else out + contrib
    return out


def constant_sampler(vec: np.ndarray) -> TimeSampler:
    vec = np.asarray(vec, dtype=float).ravel()
    return lambda t: np.repeat(vec[:, None], np.asarray(t).size, axis=1)


# ---------------------------------------------------------------------------
# the system tuple


@dataclass(frozen=True)
class DaeSystem:
    """Linear constant-coefficient DAE E x' - A_mu x = f_mu, x(0) = x0_mu."""

    n: int
    E: sp.spmatrix
    A: AffineOperator
    rhs: AffineOperator
    x0: AffineOperator | None
    T: float
    control_matrix: np.ndarray | None = None
    output_matrix: np.ndarray | None = None

    @property
    def m(self) -> int:
        return 0 if self.control_matrix is None else self.control_matrix.shape[1]

    @property
    def p(self) -> int:
        return 0 if self.output_matrix is None else self.output_matrix.shape[0]

    def A_at(self, mu) -> sp.spmatrix:
        M = affine_eval(self.A, mu)
        return sp.csr_matrix(M) if not sp.issparse(M) else M.tocsr()

    @property
    def parameter_independent_A(self) -> bool:
        return all(t.kind == "constant" for t in self.A.thetas)


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal basis of ker(E^T) as columns of V (n x d)."""

    V: np.ndarray
    d: int
    tol: float


@dataclass(frozen=True)
class PencilDiagnostics:
    regular: bool
    probe_lambdas: tuple[float, ...]
    index_estimate: int | str  # "unknown" when not estimable


# ---------------------------------------------------------------------------
# operations


def validate_system(sys: DaeSystem) -> list[str]:
    """Collect structural defects; an empty list means the system is valid."""
    diags: list[str] = []
    n = sys.n
    if sys.E.shape != (n, n):
        diags.append(f"E has shape {sys.E.shape}, expected ({n}, {n})")
    for q, (_, M) in enumerate(sys.A.terms):
        shape = getattr(M, "shape", None)
        if shape != (n, n):
            diags.append(f"A term {q} has shape {shape}, expected ({n}, {n})")
        elif not _allfinite(M):
            diags.append(f"A term {q} has nonfinite entries")
    if sys.A.Q < 1:
        diags.append("A has no affine terms")
    if sys.x0 is not None:
        for q, (_, v) in enumerate(sys.x0.terms):
            v = np.asarray(v)
            if v.shape not in ((n,), (n, 1)):
                diags.append(f"x0 term {q} has shape {v.shape}, expected ({n},)")
            elif not np.all(np.isfinite(v)):
                diags.append(f"x0 term {q} has nonfinite entries")
    if not (sys.T > 0):
        diags.append(f"horizon T = {sys.T} must be positive")
    if not _allfinite(sys.E):
        diags.append("E has nonfinite entries")
    if sys.control_matrix is not None and sys.control_matrix.shape[0] != n:
        diags.append(
            f"control matrix has {sys.control_matrix.shape[0]} rows, expected {n}"
        )
    if sys.output_matrix is not None and sys.output_matrix.shape[1] != n:
        diags.append(
            f"output matrix has {sys.output_matrix.shape[1]} columns, expected {n}"
        )
    diags.extend(_consistency_warning(sys))
    return diags


def _allfinite(M) -> bool:
    data = M.data if sp.issparse(M) else np.asarray(M)
    return bool(np.all(np.isfinite(data)))


def _consistency_warning(sys: DaeSystem) -> list[str]:
    # Heuristic only: the continuous theory assumes x0 consistent with f(0+).
    # Checked at mu = 0 to keep the diagnostic parameter-free.
    if sys.x0 is None:
        return []
    try:
        pdim = max(
            [t.min_parameter_dim() for t in sys.A.thetas]
            + [t.min_parameter_dim() for t in sys.x0.thetas]
            + [t.min_parameter_dim() for t in sys.rhs.thetas]
        )
        mu = np.zeros(max(pdim, 1))
        x0 = np.asarray(affine_eval(sys.x0, mu)).ravel()
        if x0.shape != (sys.n,) or not np.any(x0):
            return []
        A = sys.A_at(mu).toarray()
        f0 = sample_rhs(sys.rhs, mu, np.array([0.0]))[:, 0]
        E = sys.E.toarray()
        target = A @ x0 + f0
        sol, res, *_ = np.linalg.lstsq(E, target, rcond=None)
        residual = np.linalg.norm(E @ sol - target)
        scale = max(np.linalg.norm(target), 1.0)
        if residual > 1e-8 * scale:
            return [
                "warning: initial value appears inconsistent with f(0+) "
                f"(least-squares residual {residual:.2e})"
            ]
    except Exception:
        pass
    return []


def kernel_basis(E: sp.spmatrix, tol: float = DEFAULT_RANK_TOL) -> KernelBasis:
    """Orthonormal basis of ker(E^T) via SVD of E^T.

    Singular values below tol * sigma_max count as zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    Et = (E.T).toarray() if sp.issparse(E) else np.asarray(E, dtype=float).T
    n = Et.shape[0]
    _, s, Wt = np.linalg.svd(Et)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    d = n - rank
    V = Wt[rank:].T.copy() if d > 0 else np.zeros((n, 0))
    return KernelBasis(V=V, d=d, tol=tol)


def pencil_probe(
    sys: DaeSystem,
    mu,
    lambdas: Sequence[float],
    cond_cap: float = 1e12,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> PencilDiagnostics:
    """Probe regularity of the pencil {E, -A_mu} and estimate its index.

    The index estimate comes from rank stabilization of powers of
    (lambda0*E - A)^(-1) E at the first regular probe shift; it is a
    diagnostic, not a certified computation.
    """
    if not lambdas:
        raise ValueError("need at least one probe lambda")
    E = sys.E.toarray()
    A = sys.A_at(mu).toarray()
    n = sys.n
    witness = None
    for lam in lambdas:
        M = lam * E - A
        try:
            cond = np.linalg.cond(M)
        except np.linalg.LinAlgError:
            continue
        if np.isfinite(cond) and cond < cond_cap:
            witness = lam
            break
    if witness is None:
        raise IrregularPencil(
            f"all probe shifts {list(lambdas)} gave singular lambda*E - A"
        )
    Ehat = np.linalg.solve(witness * E - A, E)

    def _rank(M):
        s = np.linalg.svd(M, compute_uv=False)
        smax = s[0] if s.size else 0.0
        return int(np.sum(s > rank_tol * smax)) if smax > 0 else 0

    prev = n  # rank(Ehat^0) = rank(identity)
    index = "unknown"
    P = np.eye(n)
    for k in range(n + 1):
        P = P @ Ehat
        r = _rank(P)
        if r == prev:
            index = k
            break
        prev = r
    return PencilDiagnostics(
        regular=True, probe_lambdas=tuple(float(x) for x in lambdas), index_estimate=index
    )


Extension = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]
"""Pair (xbar, xbar_dot) of vectorized time functions, each t -> (n, k)."""


def homogenize(
    sys: DaeSystem, extensions: Sequence[Extension] | None = None
) -> DaeSystem:
    """Reduce to homogeneous initial conditions.

    Each initial-value term x0_q gets a C^1 extension xbar_q with
    xbar_q(0) = x0_q (default: constant in time).  The right-hand side is
    augmented by z_q = A xbar_q - E xbar_q', one affine term per product
    of an A-term and an x0-term, and x0 is dropped.
    """
    if sys.x0 is None:
        return sys
    x0_terms = [(t, np.asarray(v, dtype=float).ravel()) for t, v in sys.x0.terms]
    if all(not np.any(v) for _, v in x0_terms):
        return replace(sys, x0=None)
    constant_in_time = extensions is None
    if constant_in_time:
        extensions = [
            (constant_sampler(v), constant_sampler(np.zeros_like(v)))
            for _, v in x0_terms
        ]
    if len(extensions) != len(x0_terms):
        raise InconsistentExtension(
            f"{len(extensions)} extensions for {len(x0_terms)} initial-value terms"
        )
    new_terms = list(sys.rhs.terms)
    E = sys.E.tocsr()
    for (theta_x, v), (xbar, xbardot) in zip(x0_terms, extensions):
        probe = np.asarray(xbar(np.array([0.0])), dtype=float)
        if probe.shape[0] != sys.n:
            raise InconsistentExtension(
                f"extension has dimension {probe.shape[0]}, system has {sys.n}"
            )
        if not np.allclose(probe[:, 0], v, atol=1e-12 * max(1.0, np.abs(v).max())):
            raise InconsistentExtension("extension does not match x0 at t = 0")
        for theta_a, Aq in sys.A.terms:
            Aq = sp.csr_matrix(Aq)
            new_terms.append(
                (theta_product(theta_x, theta_a), _matmul_sampler(Aq, xbar))
            )
        if not constant_in_time:
            new_terms.append(
                (theta_product(theta_x, theta_constant(-1.0)), _matmul_sampler(E, xbardot))
            )
    return replace(sys, x0=None, rhs=AffineOperator(terms=tuple(new_terms)))


def _matmul_sampler(M: sp.spmatrix, f: TimeSampler) -> TimeSampler:
    return lambda t: M @ np.asarray(f(np.asarray(t)), dtype=float)
