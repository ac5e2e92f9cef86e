import numpy as np
import pytest

from opfree.covmap import (CovarianceMatrix, block_diagonal, check_completely_positive,
                           check_tau_symmetric, choi_matrix, symmetrize, tau_symmetry_defects,
                           validate_covariance)
from opfree.errors import ValidationError
from opfree.matalg import AlgebraContext


def test_diagonal_is_valid(diag_ctx, m2_ctx):
    for ctx in (diag_ctx, m2_ctx):
        eta = CovarianceMatrix.diagonal(ctx, 2)
        assert validate_covariance(eta).ok
        b = ctx.random_element(np.random.default_rng(0))
        assert np.allclose(eta.entry(0, 0, b), b)
        assert np.allclose(eta.entry(0, 1, b), 0)


def test_kraus_entries_match_direct_formula(m2_ctx, rng):
    n, I = 2, 2
    kraus = [np.vstack([m2_ctx.random_element(rng) for _ in range(I)]) for _ in range(3)]
    eta = CovarianceMatrix.from_kraus(m2_ctx, kraus, I)
    b = m2_ctx.random_element(rng)
    for i in range(I):
        for j in range(I):
            direct = sum(K[i * n:(i + 1) * n] @ b @ K[j * n:(j + 1) * n].conj().T for K in kraus)
            assert np.allclose(eta.entry(i, j, b), direct)
    assert check_completely_positive(eta).ok


def test_kraus_leaving_B_raises(diag_ctx):
    flip = np.array([[0, 1], [1, 0]], dtype=complex)
    # b -> flip b flip stays diagonal, but flip + 1 does not
    CovarianceMatrix.from_kraus(diag_ctx, [flip], 1)
    with pytest.raises(ValidationError):
        CovarianceMatrix.from_kraus(diag_ctx, [flip + np.eye(2)], 1)


def test_transpose_is_not_completely_positive(m2_ctx):
    eta = CovarianceMatrix.from_maps(m2_ctx, [[lambda b: b.T]])
    rep = check_completely_positive(eta)
    assert not rep.ok
    assert rep.min_eigenvalue < -0.1


def test_choi_matrix_of_identity_is_rank_one(m2_ctx):
    C = choi_matrix(CovarianceMatrix.diagonal(m2_ctx, 1))
    w = np.linalg.eigvalsh(C)
    assert np.isclose(w[-1], 2.0) and np.allclose(w[:-1], 0)


def test_symmetrize_gives_tau_symmetric_cp(m2_ctx, rng):
    raw = CovarianceMatrix.random_kraus(m2_ctx, 2, 2, rng)
    assert not check_tau_symmetric(raw).ok
    eta, rep = symmetrize(raw)
    assert rep.ok
    assert np.abs(tau_symmetry_defects(eta)).max() < 1e-12
    # symmetrizing twice changes nothing
    again, _ = symmetrize(eta)
    assert np.allclose(again.coef, eta.coef)


def test_weighted_trace_symmetry():
    ctx = AlgebraContext.from_blocks([1, 1], weights=[0.2, 0.8])
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    eta = CovarianceMatrix.from_kraus(ctx, [swap], 1)
    # swapping blocks of unequal weight is CP but not tau-symmetric
    assert check_completely_positive(eta).ok
    assert not check_tau_symmetric(eta).ok
    sym, rep = symmetrize(eta)
    assert rep.ok


def test_block_diagonal_and_algebra(diag_ctx):
    a = CovarianceMatrix.diagonal(diag_ctx, 1)
    b = CovarianceMatrix.diagonal(diag_ctx, 2).scaled(2.0)
    c = block_diagonal(a, b)
    assert c.index_count == 3
    assert np.allclose(c.coef[1:, 1:], b.coef) and np.allclose(c.coef[0, 1:], 0)
    assert np.isclose((a + a).unit_norm(), 2.0)
    with pytest.raises(ValidationError):
        a.scaled(-1.0)
    with pytest.raises(ValidationError):
        a + b
