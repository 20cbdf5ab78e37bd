"""Tests for parameterized system types, kernel bases and homogenization."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from uwdae import (
    AffineOperator,
    DaeSystem,
    TimeGrid,
    affine_eval,
    homogenize,
    kernel_basis,
    pencil_probe,
    validate_system,
)
from uwdae.errors import (
    InconsistentExtension,
    IrregularPencil,
    ParameterDimensionMismatch,
)
from uwdae.system_model import (
    constant_sampler,
    sample_rhs,
    theta_component,
    theta_constant,
    theta_from_dict,
    theta_monomial,
    theta_product,
    theta_shift,
    theta_to_dict,
)
from conftest import make_scalar_ode

from uwdae.bench import StokesLikeParams, make_rlc, make_stokes_like, RlcParams


# -- theta expressions -------------------------------------------------------


def test_theta_evaluation():
    mu = np.array([2.0, 3.0])
    assert theta_constant(5.0)(mu) == 5.0
    assert theta_component(1)(mu) == 3.0
    assert theta_monomial(2.0, (1, 2))(mu) == 2.0 * 2.0 * 9.0


def test_theta_component_out_of_range():
    with pytest.raises(ParameterDimensionMismatch):
        theta_component(3)(np.array([1.0]))


def test_theta_serialization_roundtrip():
    for t in (theta_constant(2.5), theta_component(4), theta_monomial(1.5, (0, 2))):
        assert theta_from_dict(theta_to_dict(t))(np.arange(1.0, 6.0)) == t(
            np.arange(1.0, 6.0)
        )


def test_theta_product_stays_serializable():
    p = theta_product(theta_component(0), theta_monomial(3.0, (1,)))
    assert p.serializable
    assert p(np.array([2.0])) == 2.0 * 3.0 * 2.0


def test_theta_shift_reindexes():
    mu = np.array([0.0, 0.0, 7.0])
    assert theta_shift(theta_component(0), 2)(mu) == 7.0
    assert theta_shift(theta_monomial(2.0, (1,)), 2)(mu) == 14.0
    assert theta_shift(theta_constant(4.0), 2)(mu) == 4.0


# -- affine operators --------------------------------------------------------


def test_affine_eval_single_constant_term():
    M = sp.csr_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    op = AffineOperator.constant(M)
    out = affine_eval(op, np.zeros(1))
    assert np.allclose(out.toarray(), M.toarray())


def test_affine_eval_linearity():
    M1 = sp.identity(2, format="csr")
    M2 = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    op = AffineOperator(
        terms=((theta_component(0), M1), (theta_constant(1.0), M2))
    )
    out = affine_eval(op, np.array([2.0])).toarray()
    assert np.allclose(out, 2.0 * M1.toarray() + M2.toarray())


@given(
    c1=st.floats(-5, 5, allow_nan=False),
    c2=st.floats(-5, 5, allow_nan=False),
    mu=st.floats(-3, 3, allow_nan=False),
)
@settings(max_examples=30, deadline=None)
def test_affine_eval_superposition(c1, c2, mu):
    M1 = np.array([[1.0, 0.5], [0.0, 2.0]])
    M2 = np.array([[0.0, 1.0], [1.0, -1.0]])
    op = AffineOperator(
        terms=(
            (theta_monomial(c1, (1,)), M1),
            (theta_constant(c2), M2),
        )
    )
    out = affine_eval(op, np.array([mu]))
    assert np.allclose(out, c1 * mu * M1 + c2 * M2, atol=1e-12)


def test_control_sample_rhs_matches_direct_product():
    # nodal control samples as parameter components reproduce B u(t_k)
    rng = np.random.default_rng(0)
    B = rng.standard_normal((3, 2))
    grid = TimeGrid(T=1.0, K=4)
    u = rng.standard_normal((2, grid.K + 1))
    terms = []
    for j in range(2):
        for k in range(grid.K + 1):
            def f(t, _col=B[:, j], _k=k, _grid=grid):
                t = np.atleast_1d(np.asarray(t, dtype=float))
                s = np.clip(1.0 - np.abs(t / _grid.dt - _k), 0.0, None)
                return np.outer(_col, s)
            terms.append((theta_component(j * (grid.K + 1) + k), f))
    op = AffineOperator(terms=tuple(terms))
    mu = u.ravel()
    got = sample_rhs(op, mu, grid.nodes)
    assert np.allclose(got, B @ u, atol=1e-12)


# -- validate_system ---------------------------------------------------------


def test_validate_rlc_clean():
    assert validate_system(make_rlc(RlcParams())) == []


def test_validate_dimension_mismatch():
    sys = make_scalar_ode()
    bad = DaeSystem(
        n=3,
        E=sys.E,
        A=AffineOperator.constant(sp.identity(4, format="csr")),
        rhs=sys.rhs,
        x0=None,
        T=1.0,
    )
    diags = validate_system(bad)
    assert any("shape" in d for d in diags)


def test_validate_bad_horizon():
    sys = make_scalar_ode()
    bad = DaeSystem(n=1, E=sys.E, A=sys.A, rhs=sys.rhs, x0=None, T=0.0)
    diags = validate_system(bad)
    assert any("horizon" in d for d in diags)


def test_validate_inconsistent_x0_warns():
    # E = 0 forces x = -f; x0 = 1 with f(0) = 0 is inconsistent
    sys = DaeSystem(
        n=1,
        E=sp.csr_matrix((1, 1)),
        A=AffineOperator.constant(sp.identity(1, format="csr")),
        rhs=AffineOperator(terms=((theta_constant(1.0), constant_sampler([0.0])),)),
        x0=AffineOperator(terms=((theta_constant(1.0), np.array([1.0])),)),
        T=1.0,
    )
    diags = validate_system(sys)
    assert any(d.startswith("warning") for d in diags)


# -- kernel_basis ------------------------------------------------------------


def test_kernel_basis_rlc():
    V = kernel_basis(sp.csr_matrix(np.diag([1.0, 1.0, 0.0, 0.0])))
    assert V.d == 2
    # spans e3, e4
    P = V.V @ V.V.T
    expected = np.diag([0.0, 0.0, 1.0, 1.0])
    assert np.allclose(P, expected, atol=1e-12)


def test_kernel_basis_identity():
    V = kernel_basis(sp.identity(3, format="csr"))
    assert V.d == 0
    assert V.V.shape == (3, 0)


def test_kernel_basis_zero_matrix():
    V = kernel_basis(sp.csr_matrix((1, 1)))
    assert V.d == 1
    assert abs(abs(V.V[0, 0]) - 1.0) < 1e-14


@given(seed=st.integers(0, 1000), n=st.integers(1, 5), rank=st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_kernel_basis_invariants(seed, n, rank):
    rank = min(rank, n)
    rng = np.random.default_rng(seed)
    U = np.linalg.qr(rng.standard_normal((n, n)))[0]
    W = np.linalg.qr(rng.standard_normal((n, n)))[0]
    s = np.zeros(n)
    s[:rank] = 0.5 + rng.random(rank)
    E = sp.csr_matrix(U @ np.diag(s) @ W.T)
    kb = kernel_basis(E)
    assert kb.d == n - rank
    scale = abs(E).max() if E.nnz else 1.0
    if kb.d > 0:
        assert np.abs(E.T @ kb.V).max() <= 1e-10 * max(scale, 1.0)
        assert np.abs(kb.V.T @ kb.V - np.eye(kb.d)).max() <= 1e-12


# -- pencil_probe ------------------------------------------------------------


def test_pencil_rlc_index_one():
    diag = pencil_probe(make_rlc(RlcParams()), None, [1.0])
    assert diag.regular and diag.index_estimate == 1


def test_pencil_ode_index_zero(scalar_ode):
    diag = pencil_probe(scalar_ode, None, [1.0])
    assert diag.regular and diag.index_estimate == 0


def test_pencil_canonical_index_one():
    sys = DaeSystem(
        n=2,
        E=sp.csr_matrix(np.diag([1.0, 0.0])),
        A=AffineOperator.constant(sp.csr_matrix(-np.eye(2))),
        rhs=AffineOperator(terms=((theta_constant(1.0), constant_sampler([0, 0])),)),
        x0=None,
        T=1.0,
    )
    assert pencil_probe(sys, None, [1.0]).index_estimate == 1


def test_pencil_stokes_index_two():
    sys = make_stokes_like(StokesLikeParams(m_g=3))
    diag = pencil_probe(sys, None, [1.0])
    assert diag.regular and diag.index_estimate == 2


def test_pencil_irregular_raises():
    # E = 0 and A singular: det(lambda E - A) == 0 identically
    sys = DaeSystem(
        n=2,
        E=sp.csr_matrix((2, 2)),
        A=AffineOperator.constant(sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))),
        rhs=AffineOperator(terms=((theta_constant(1.0), constant_sampler([0, 0])),)),
        x0=None,
        T=1.0,
    )
    with pytest.raises(IrregularPencil):
        pencil_probe(sys, None, [1.0, -1.0, 3.7])


# -- homogenize --------------------------------------------------------------


def _decay_ode():
    """x' + x = 0, x(0) = 1; exact solution exp(-t)."""
    return DaeSystem(
        n=1,
        E=sp.identity(1, format="csr"),
        A=AffineOperator.constant(sp.csr_matrix([[-1.0]])),
        rhs=AffineOperator(terms=((theta_constant(1.0), constant_sampler([0.0])),)),
        x0=AffineOperator(terms=((theta_constant(1.0), np.array([1.0])),)),
        T=1.0,
    )


def test_homogenize_constant_extension_rhs():
    hom = homogenize(_decay_ode())
    assert hom.x0 is None
    f = sample_rhs(hom.rhs, None, np.linspace(0, 1, 5))
    assert np.allclose(f, -1.0)  # A xbar = -1, E xbar' = 0


def test_homogenize_roundtrip_decay():
    from uwdae.detailed import evaluate_state, solve_detailed

    hom = homogenize(_decay_ode())
    sol = solve_detailed(hom, None, TimeGrid(T=1.0, K=256))
    t = np.linspace(0.01, 0.99, 37)
    recon = evaluate_state(sol, t)[0] + 1.0  # add the extension back
    assert np.abs(recon - np.exp(-t)).max() < 5e-3


def test_homogenize_zero_x0_unchanged():
    sys = _decay_ode()
    zero = DaeSystem(
        n=1,
        E=sys.E,
        A=sys.A,
        rhs=sys.rhs,
        x0=AffineOperator(terms=((theta_constant(1.0), np.zeros(1)),)),
        T=1.0,
    )
    hom = homogenize(zero)
    assert hom.x0 is None
    assert hom.rhs is zero.rhs


def test_homogenize_supplied_extension_keeps_derivative_term():
    # extension xbar(t) = (1 + t) e1: z = A xbar - E xbar' = -(1+t) - 1
    sys = _decay_ode()
    ext = [
        (
            lambda t: (1.0 + np.atleast_1d(t))[None, :],
            lambda t: np.ones((1, np.atleast_1d(t).size)),
        )
    ]
    hom = homogenize(sys, extensions=ext)
    f = sample_rhs(hom.rhs, None, np.array([0.0, 1.0]))
    assert np.allclose(f, [[-2.0, -3.0]])


def test_homogenize_dimension_mismatch():
    sys = _decay_ode()
    bad = [
        (
            lambda t: np.ones((2, np.atleast_1d(t).size)),
            lambda t: np.zeros((2, np.atleast_1d(t).size)),
        )
    ]
    with pytest.raises(InconsistentExtension):
        homogenize(sys, extensions=bad)
