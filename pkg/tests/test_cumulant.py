import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opfree import (AlgebraContext, CovarianceMatrix, FockModel, FockMoments, MatrixMoments,
                    MomentCumulants, SemicircularCumulants, block_diagonal,
                    check_amalgamated_freeness, check_conjugate_cumulants, cumulants_to_moments,
                    moments_to_cumulants, semicircular_moment_oracle)
from opfree.bpoly import BPolynomial
from opfree.cumulant import ConvolvedCumulants, semicircular_moment_tensor
from opfree.errors import SizeLimitError, ValidationError


def test_matrix_moments_match_direct_products(diag_ctx, rng):
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    oracle = MatrixMoments(diag_ctx, {0: X})
    bs = [diag_ctx.random_element(rng) for _ in range(3)]
    direct = diag_ctx.conditional_expectation(bs[0] @ X @ bs[1] @ X @ bs[2])
    got = diag_ctx.from_coords(oracle.moment([0, 0], [diag_ctx.coords(b) for b in bs]))
    assert np.allclose(got, direct)


def test_scalar_cumulants_of_a_spectrum():
    """Free cumulants of a discrete law: mean, variance and the known third cumulant."""
    lam = np.array([0.0, 1.0, 3.0, 4.0])
    ctx = AlgebraContext.scalars(4)
    table = MomentCumulants(MatrixMoments(ctx, {0: np.diag(lam)}), 4)
    m = [np.mean(lam ** k) for k in range(5)]
    k1 = table.cumulant_tensor([0])
    k2 = table.cumulant_tensor([0, 0])
    k3 = table.cumulant_tensor([0, 0, 0])
    assert np.isclose(k1.item(), m[1])
    assert np.isclose(k2.item(), m[2] - m[1] ** 2)
    # third free cumulant equals the third classical one
    assert np.isclose(k3.item(), m[3] - 3 * m[2] * m[1] + 2 * m[1] ** 3)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_on_random_matrices(seed):
    ctx = AlgebraContext.from_blocks([2], [2])
    rng = np.random.default_rng(seed)
    mats = {k: rng.normal(size=(4, 4)) / 2 + 1j * rng.normal(size=(4, 4)) / 2 for k in range(2)}
    oracle = MatrixMoments(ctx, mats)
    table = moments_to_cumulants(oracle, 4)
    for d in range(1, 5):
        for letters in itertools.product(range(2), repeat=d):
            coeffs = [ctx.coords(ctx.random_element(rng)) for _ in range(d + 1)]
            assert np.allclose(cumulants_to_moments(table, letters, coeffs),
                               oracle.moment(letters, coeffs), atol=1e-10)


def test_semicircular_oracle_scalar_catalan():
    ctx = AlgebraContext.scalars(1)
    eta = CovarianceMatrix.diagonal(ctx)
    one = np.eye(1)
    assert np.isclose(semicircular_moment_oracle(eta, [0] * 6, [one] * 7)[0, 0], 5)
    assert np.isclose(semicircular_moment_oracle(eta, [0] * 5, [one] * 6)[0, 0], 0)
    with pytest.raises(ValidationError):
        semicircular_moment_oracle(eta, [0, 0], [one])


def test_semicircular_cumulants_from_fock(m2_model):
    table = MomentCumulants(FockMoments(m2_model), 5)
    expected = SemicircularCumulants(m2_model.eta, 5)
    for d in range(1, 6):
        got = table.cumulant_tensor((0,) * d)
        assert np.allclose(got, expected.cumulant_tensor((0,) * d), atol=1e-10)


def test_cumulants_to_moments_reproduces_oracle(m2_eta):
    ctx = m2_eta.ctx
    table = SemicircularCumulants(m2_eta, 6)
    rng = np.random.default_rng(3)
    coeffs = [ctx.random_element(rng) for _ in range(5)]
    got = cumulants_to_moments(table, [0] * 4, [ctx.coords(c) for c in coeffs])
    assert np.allclose(ctx.from_coords(got), semicircular_moment_oracle(m2_eta, [0] * 4, coeffs))
    assert np.allclose(semicircular_moment_tensor(m2_eta, [0]), 0)


def test_freeness_block_diagonal_and_coupled(diag_ctx, scalar_ctx):
    eta = block_diagonal(CovarianceMatrix.diagonal(diag_ctx), CovarianceMatrix.diagonal(diag_ctx))
    free = check_amalgamated_freeness(FockMoments(FockModel(diag_ctx, eta, 2)), {0: "a", 1: "b"}, 4)
    assert free.passed and free.worst() < 1e-10

    table = np.array([[1, 0.5], [0.5, 1]])
    coupled = CovarianceMatrix.from_table(scalar_ctx, np.einsum("ij,ab->ijab", table, np.eye(1)))
    rep = check_amalgamated_freeness(FockMoments(FockModel(scalar_ctx, coupled, 2)), {0: 0, 1: 1}, 4)
    assert not rep.passed
    first = rep.failures[0]
    assert first.label == "mixed-cumulants-degree-2" and "kappa_2(x1" in first.detail


def test_conjugate_cumulants_detect_perturbation(scalar_model, scalar_ctx):
    good = check_conjugate_cumulants(FockMoments(scalar_model), scalar_model.eta, 4, xi=lambda i: i)
    assert good.passed and good.environment["first_failure"] == "none"
    scalar_model.register_letter(("bad", 0), BPolynomial.letter(scalar_ctx, 0) + 0.1)
    bad = check_conjugate_cumulants(FockMoments(scalar_model), scalar_model.eta, 4,
                                    xi=lambda i: ("bad", i))
    assert bad.environment["first_failure"] == 0


def test_convolution_table(diag_ctx):
    eta = CovarianceMatrix.diagonal(diag_ctx)
    base = SemicircularCumulants(eta, 4)
    conv = ConvolvedCumulants(base, eta.scaled(0.5), 2.0)
    assert np.allclose(conv.cumulant_tensor([0, 0]), 2 * base.cumulant_tensor([0, 0]))
    assert np.allclose(conv.cumulant_tensor([0, 0, 0]), 0)
    with pytest.raises(ValidationError):
        ConvolvedCumulants(base, eta, -1.0)


def test_degree_caps(diag_ctx):
    with pytest.raises(SizeLimitError):
        moments_to_cumulants(MatrixMoments(diag_ctx, {0: np.eye(2)}), 20)
    table = SemicircularCumulants(CovarianceMatrix.diagonal(diag_ctx), 3)
    with pytest.raises(SizeLimitError):
        cumulants_to_moments(table, [0] * 4, [diag_ctx.unit] * 5)
