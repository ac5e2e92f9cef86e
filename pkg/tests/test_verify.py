import numpy as np
import pytest

from opfree import BPolynomial, CovarianceMatrix, DerivTensor, FockModel, eta_derivative
from opfree.errors import ExactnessError
from opfree.report import FAIL, PASS, WARN
from opfree import verify


@pytest.fixture(scope="module")
def m2_small(m2_ctx, m2_eta):
    return FockModel(m2_ctx, m2_eta, 2)


def sparse_tensor(ctx, rng, terms=4):
    """Sum of random multiples of basis triples ``x_a e_0 y_b`` with words of length <= 1."""
    out = DerivTensor.zero(ctx)
    e = DerivTensor.generator(ctx, 0)
    for _ in range(terms):
        L, R = (0,) * rng.integers(2), (0,) * rng.integers(2)
        x = BPolynomial.basis_word(ctx, L, rng.integers(ctx.dim, size=len(L) + 1))
        y = BPolynomial.basis_word(ctx, R, rng.integers(ctx.dim, size=len(R) + 1))
        out = out + x * e * y * complex(rng.normal(), rng.normal())
    return out


def test_pairing_matches_brute_force(m2_small, rng):
    ctx = m2_small.ctx
    u, v = sparse_tensor(ctx, rng), sparse_tensor(ctx, rng)
    fast = verify.pair_tensors(m2_small, u, v)
    slow = verify.pair_direct(m2_small, u, v)
    assert np.isclose(fast, slow, atol=1e-11)


def test_pairing_of_generators_is_eta(m2_small, rng):
    ctx = m2_small.ctx
    b1, b2 = ctx.random_element(rng), ctx.random_element(rng)
    e = DerivTensor.generator(ctx, 0)
    u = BPolynomial.constant(ctx, b1) * e
    v = BPolynomial.constant(ctx, b2) * e
    expected = ctx.trace(m2_small.eta.entry(0, 0, b1.conj().T @ b2))
    assert np.isclose(verify.pair_tensors(m2_small, u, v), expected)


def test_m_valued_inner_product_traces_to_pairing(m2_model, rng):
    ctx = m2_model.ctx
    u = verify.random_tensor(ctx, 1, 1, rng)
    v = verify.random_tensor(ctx, 1, 1, rng)
    mi = verify.m_inner(m2_model, u, v)
    assert np.isclose(m2_model.trace(mi), verify.pair_tensors(m2_model, u, v), atol=1e-11)


def test_adjoint_star_is_adjoint(m2_model, rng):
    ctx = m2_model.ctx
    xi = verify.random_tensor(ctx, 1, 1, rng)
    star = verify.adjoint_star(m2_model, xi)
    u = verify.L2TensorVector.from_tensor(m2_model, xi)
    for r in (BPolynomial.letter(ctx, 0), verify.random_polynomial(ctx, 1, 2, rng)):
        lhs = np.vdot(m2_model.vector(star), m2_model.vector(r))
        rhs = verify.pair_l2(u, verify.L2TensorVector.from_tensor(m2_model, eta_derivative(r)))
        assert np.isclose(lhs, rhs, atol=1e-11)


def test_adjoint_of_generator_is_semicircular(diag_model):
    star = verify.adjoint_star(diag_model, DerivTensor.generator(diag_model.ctx, 1))
    assert star.allclose(BPolynomial.letter(diag_model.ctx, 1), 1e-12)


def test_integration_by_parts(diag_model):
    assert verify.check_integration_by_parts(diag_model, None, 5).passed
    ctx = diag_model.ctx
    bad = [BPolynomial.letter(ctx, 0), BPolynomial.letter(ctx, 1) * 2.0]
    rep = verify.check_integration_by_parts(diag_model, bad, 4)
    assert rep.environment["first_failure"] == 1


def test_adjoint_formula_and_shuffle(m2_model, rng):
    ctx = m2_model.ctx
    p = verify.random_polynomial(ctx, 1, 1, rng)
    q = verify.random_polynomial(ctx, 1, 1, rng)
    rep = verify.check_adjoint_formula(m2_model, p, q, DerivTensor.generator(ctx, 0), 1)
    assert rep.passed, rep.to_text()
    assert {r.label for r in rep.records} == {"product-rule", "closed-form"}
    assert verify.check_shuffle(m2_model, p, q, 0, 0).passed


def test_norm_bound_statuses(scalar_model):
    ctx = scalar_model.ctx
    one = verify.check_norm_bound(scalar_model, BPolynomial.constant(ctx), 0)
    assert one.status() == PASS and one.records[0].defect == 0.0
    s = verify.check_norm_bound(scalar_model, BPolynomial.letter(ctx, 0), 0)
    assert s.status() == PASS


def test_norm_bound_warns_on_small_excess(scalar_ctx):
    """A coarse truncation underestimates ||p||; a small excess is a warning."""
    model = FockModel(scalar_ctx, CovarianceMatrix.diagonal(scalar_ctx), 2)
    s = BPolynomial.letter(scalar_ctx, 0)
    rep = verify.check_norm_bound(model, s, 0, slack=1.5)
    rec = rep.records[0]
    assert rec.status in (PASS, WARN)
    strict = verify.check_norm_bound(model, s, 0, slack=1.0 + 1e-15)
    assert strict.records[0].status in (PASS, FAIL)
    assert (rec.status == WARN) == (strict.records[0].status == FAIL)


def test_exactness_guards(scalar_ctx):
    model = FockModel(scalar_ctx, CovarianceMatrix.diagonal(scalar_ctx), 1)
    with pytest.raises(ExactnessError):
        verify.check_integration_by_parts(model, None, 3)
    long = BPolynomial.letter(scalar_ctx, 0) ** 2 * DerivTensor.generator(scalar_ctx, 0)
    with pytest.raises(ExactnessError):
        verify.pair_tensors(model, long, long)


def test_j_isometry_and_gram(m2_model, rng):
    ctx = m2_model.ctx
    fam = [DerivTensor.generator(ctx, 0)] + [verify.random_tensor(ctx, 1, 1, rng) for _ in range(3)]
    assert verify.check_j_isometry(m2_model, fam).passed
    assert verify.check_pair_gram(m2_model, fam).passed


def test_psi_isometry(diag_ctx):
    rep = verify.check_psi_isometry(diag_ctx, CovarianceMatrix.diagonal(diag_ctx, 1), 3, 2)
    assert rep.passed and rep.worst() < 1e-12


def test_kernel_annihilation(diag_ctx):
    model = FockModel(diag_ctx, CovarianceMatrix.diagonal(diag_ctx), 3)
    b = diag_ctx.basis[0]
    P = BPolynomial.constant(diag_ctx, b) * BPolynomial.letter(diag_ctx, 0)
    rep = verify.check_kernel_annihilation(model, P)
    assert rep.passed and rep.environment["kernel_dim"] > 0
    vac = verify.check_kernel_annihilation(model, BPolynomial.letter(diag_ctx, 0) + 3.0)
    assert "vacuous" in vac.records[0].detail


def test_kernel_projection():
    A = np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 2.0]])
    P = verify.kernel_projection(A)
    assert np.allclose(P, np.diag([0, 1, 0]))
    assert np.allclose(verify.kernel_projection(np.zeros((2, 2))), np.eye(2))
