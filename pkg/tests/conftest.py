import numpy as np
import pytest

from opfree import AlgebraContext, CovarianceMatrix, FockModel, symmetrize


@pytest.fixture(scope="session")
def scalar_ctx():
    return AlgebraContext.scalars(1)


@pytest.fixture(scope="session")
def diag_ctx():
    return AlgebraContext.from_blocks([1, 1])


@pytest.fixture(scope="session")
def m2_ctx():
    return AlgebraContext.from_blocks([2])


@pytest.fixture(scope="session")
def m2_eta(m2_ctx):
    """A tau-symmetric random Kraus covariance on M_2 with one index."""
    eta, rep = symmetrize(CovarianceMatrix.random_kraus(m2_ctx, 1, 2, np.random.default_rng(7)))
    assert rep.ok
    return eta


@pytest.fixture(scope="session")
def scalar_model(scalar_ctx):
    return FockModel(scalar_ctx, CovarianceMatrix.diagonal(scalar_ctx, 1), 4)


@pytest.fixture(scope="session")
def diag_model(diag_ctx):
    return FockModel(diag_ctx, CovarianceMatrix.diagonal(diag_ctx, 2), 3)


@pytest.fixture(scope="session")
def m2_model(m2_ctx, m2_eta):
    return FockModel(m2_ctx, m2_eta, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results, key=lambda c: int(c[1:])):
        terminalreporter.write_line(results[cid])
