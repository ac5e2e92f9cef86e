"""Registered verification suites run by the command line tool.

Each suite takes a :class:`SuiteContext` (validated algebra, covariance,
lazily built Fock model, per-suite random generator) and returns a
:class:`~opfree.report.VerificationReport`.
"""
from __future__ import annotations

import itertools
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import verify
from .bpoly import BPolynomial, DerivTensor, linearize, schur_defect
from .config import RunConfig
from .covmap import CovarianceMatrix, block_diagonal
from .cumulant import (ConvolvedCumulants, FockMoments, MomentCumulants, SemicircularCumulants,
                       check_amalgamated_freeness, check_conjugate_cumulants,
                       cumulants_to_moments, semicircular_moment_tensor)
from .errors import ConfigError
from .fock import FockModel
from .matalg import AlgebraContext
from .report import FAIL, NOT_REPRODUCIBLE, PASS, VerificationReport, fingerprint

# candidates whose conjugate-system checks must agree on the first failing degree
PERTURBATION = 0.1


@dataclass
class SuiteContext:
    config: RunConfig
    ctx: AlgebraContext
    eta: CovarianceMatrix
    _models: dict = field(default_factory=dict)

    def model(self, depth: int | None = None) -> FockModel:
        depth = self.config.depth if depth is None else depth
        if depth not in self._models:
            self._models[depth] = FockModel(self.ctx, self.eta, depth)
        return self._models[depth]

    def rng(self, suite: str) -> np.random.Generator:
        """Generator seeded by the run seed and the suite name, so suites are
        reproducible independently of which other suites run."""
        return np.random.default_rng([self.config.seed, zlib.crc32(suite.encode())])

    @property
    def tol(self) -> float:
        return self.config.tolerance

    @property
    def index_count(self) -> int:
        return self.eta.index_count


@dataclass(frozen=True)
class Suite:
    name: str
    anchor: str
    runner: Callable[[SuiteContext], VerificationReport]
    default: bool = True


REGISTRY: dict[str, Suite] = {}


def register(name: str, anchor: str, default: bool = True):
    def wrap(fn):
        REGISTRY[name] = Suite(name, anchor, fn, default)
        return fn
    return wrap


def default_suites(config: RunConfig) -> list[str]:
    names = [s.name for s in REGISTRY.values() if s.default]
    if config.families is not None:
        names.append("freeness")
    return names


def run_suites(sc: SuiteContext, names) -> list[VerificationReport]:
    """Run the named suites; reports come back sorted by suite name."""
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise ConfigError(f"suites: unknown {unknown}; registered: {sorted(REGISTRY)}")
    reports = [REGISTRY[n].runner(sc) for n in sorted(set(names))]
    for rep, name in zip(reports, sorted(set(names))):
        rep.suite = name
    return reports


def _oracle_degree(sc: SuiteContext, cap: int = 6) -> int:
    return min(cap, sc.model().exact_degree)


# -- suites ------------------------------------------------------------------

@register("model", "validated algebra, covariance and Fock construction")
def suite_model(sc: SuiteContext) -> VerificationReport:
    from .covmap import check_completely_positive, tau_symmetry_defects
    from .matalg import validate_subalgebra
    rep = VerificationReport("model")
    for c in validate_subalgebra(sc.ctx).checks:
        rep.add(f"algebra-{c.name}", "conditional expectation onto a finite-dimensional subalgebra",
                c.defect, c.tolerance, status=PASS if c.ok or c.level == "warning" else FAIL)
    cp = check_completely_positive(sc.eta)
    rep.add("covariance-cp", "completely positive covariance", max(0.0, -cp.min_eigenvalue),
            cp.checks[-1].tolerance, detail=f"choi_min_eigenvalue={cp.min_eigenvalue:.3e}")
    rep.add("covariance-tau-symmetry", "tau-symmetric covariance",
            float(np.abs(tau_symmetry_defects(sc.eta)).max()), sc.ctx.tol.equality)
    m = sc.model()
    lows = [lo for lo, _ in m.summary()["gram_extremes"]]
    rep.add("fock-levels", "Fock space as a Gram quotient", 0.0, sc.tol,
            detail=f"levels={','.join(map(str, m.dims))} smallest_kept_gram={min(lows):.3e}")
    rep.environment.update(verify._environment(m))
    return rep


@register("semicircular-oracle", "semicircular moments as sums over non-crossing pairings")
def suite_semicircular_oracle(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    dmax = _oracle_degree(sc)
    rep = VerificationReport("semicircular-oracle", environment=verify._environment(m, max_degree=dmax))
    for d in range(dmax + 1):
        worst = 0.0
        for letters in itertools.product(range(sc.index_count), repeat=d):
            diff = m.basis_moments(letters) - semicircular_moment_tensor(sc.eta, letters)
            worst = max(worst, float(np.abs(diff).max()))
        rep.add(f"degree-{d}", "Fock moments against the pairing oracle", worst, sc.tol)
    return rep


@register("moment-cumulant", "moment-cumulant duality over non-crossing partitions")
def suite_moment_cumulant(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    dmax = min(5, m.exact_degree)
    rng = sc.rng("moment-cumulant")
    oracle = FockMoments(m)
    table = MomentCumulants(oracle, dmax)
    rep = VerificationReport("moment-cumulant", environment=verify._environment(m, max_degree=dmax))
    for d in range(1, dmax + 1):
        worst = 0.0
        for letters in itertools.product(range(sc.index_count), repeat=d):
            for _ in range(2):
                coeffs = [sc.ctx.coords(sc.ctx.random_element(rng)) for _ in range(d + 1)]
                back = cumulants_to_moments(table, letters, coeffs)
                worst = max(worst, float(np.abs(back - oracle.moment(letters, coeffs)).max()))
        rep.add(f"degree-{d}", "moments from cumulants reproduce the moments", worst, sc.tol)
    return rep


@register("integration-by-parts", "conjugate system: integration by parts against the eta-derivative")
def suite_ibp(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    return verify.check_integration_by_parts(m, None, min(sc.config.degree, m.exact_degree - 1), sc.tol)


def _candidate_reports(sc: SuiteContext, shift: float, key: str):
    m = sc.model()
    degree = min(sc.config.degree, m.exact_degree - 2)
    ctx = sc.ctx
    polys = [BPolynomial.letter(ctx, i) + shift for i in range(sc.index_count)]
    for i, p in enumerate(polys):
        m.register_letter((key, i), p)
    ibp = verify.check_integration_by_parts(m, polys, degree, sc.tol)
    cum = check_conjugate_cumulants(FockMoments(m), sc.eta, degree, sc.tol, xi=lambda i: (key, i))
    return ibp, cum


@register("conjugate-cumulants", "conjugate system: first cumulant zero, second eta, higher zero")
def suite_conjugate_cumulants(sc: SuiteContext) -> VerificationReport:
    return _candidate_reports(sc, 0.0, "xi")[1]


@register("conjugate-equivalence", "integration by parts and the cumulant characterization agree")
def suite_conjugate_equivalence(sc: SuiteContext) -> VerificationReport:
    rep = VerificationReport("conjugate-equivalence")
    for name, shift in (("s", 0.0), (f"s+{PERTURBATION}", PERTURBATION)):
        ibp, cum = _candidate_reports(sc, shift, f"xi[{name}]")
        a, b = ibp.environment["first_failure"], cum.environment["first_failure"]
        rep.add(f"candidate-{name}", "integration by parts and cumulants fail at the same degree",
                0.0 if a == b else 1.0, 0.0,
                detail=f"first_failure ibp={a} cumulants={b} max_degree={cum.environment['max_degree']}")
    rep.environment.update(verify._environment(sc.model()))
    return rep


def _random_pq(sc: SuiteContext, rng, degree: int = 2):
    return (verify.random_polynomial(sc.ctx, sc.index_count, degree, rng),
            verify.random_polynomial(sc.ctx, sc.index_count, degree, rng))


@register("adjoint-formula", "adjoint of the eta-derivative on p xi q (semicircular model)")
def suite_adjoint_formula(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    rng = sc.rng("adjoint-formula")
    deg = 1 if m.exact_degree < 6 else 2
    test_degree = min(3, m.exact_degree - (2 * deg + 1))
    rep = VerificationReport("adjoint-formula", environment=verify._environment(
        m, pq_degree=deg, test_degree=test_degree, scope=verify.SEMICIRCULAR_SCOPE))
    for i in range(sc.index_count):
        p, q = _random_pq(sc, rng, deg)
        sub = verify.check_adjoint_formula(m, p, q, DerivTensor.generator(sc.ctx, i), test_degree, sc.tol)
        for r in sub.records:
            r.label = f"e{i}-{r.label}"
        rep.extend(sub)
    return rep


@register("shuffle", "shuffle identities for the adjoint derivative (semicircular model)")
def suite_shuffle(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    rng = sc.rng("shuffle")
    deg = min(2, m.depth - 1)
    rep = VerificationReport("shuffle", environment=verify._environment(
        m, pq_degree=deg, scope=verify.SEMICIRCULAR_SCOPE))
    for i in range(sc.index_count):
        for j in range(sc.index_count):
            p, q = _random_pq(sc, rng, deg)
            sub = verify.check_shuffle(m, p, q, i, j, sc.tol)
            for r in sub.records:
                r.label = f"i{i}-j{j}-{r.label}"
            rep.extend(sub)
    return rep


@register("norm-bound", "norm bound for the adjoint derivative on p e_i")
def suite_norm_bound(sc: SuiteContext) -> VerificationReport:
    m = sc.model()
    rng = sc.rng("norm-bound")
    ctx = sc.ctx
    tests = {"one": BPolynomial.constant(ctx),
             "unitary": BPolynomial.constant(ctx, ctx.random_unitary(rng))}
    for j in range(sc.index_count):
        tests[f"s{j}"] = BPolynomial.letter(ctx, j)
    if m.depth >= 3:
        tests["random-degree-2"] = verify.random_polynomial(ctx, sc.index_count, 2, rng)
    rep = VerificationReport("norm-bound", environment=verify._environment(m, slack=sc.config.slack))
    for name, p in tests.items():
        for i in range(sc.index_count):
            sub = verify.check_norm_bound(m, p, i, sc.config.slack)
            for r in sub.records:
                r.label = f"{name}-{r.label}"
            rep.extend(sub)
    return rep


def _random_family(sc: SuiteContext, suite: str, size: int = 4):
    rng = sc.rng(suite)
    fam = [DerivTensor.generator(sc.ctx, i) for i in range(sc.index_count)]
    fam += [verify.random_tensor(sc.ctx, sc.index_count, 1, rng) for _ in range(size)]
    return fam


@register("j-isometry", "J is an antiunitary isometry of the pairing")
def suite_j_isometry(sc: SuiteContext) -> VerificationReport:
    return verify.check_j_isometry(sc.model(), _random_family(sc, "j-isometry"), sc.tol)


@register("pair-gram", "the pairing is positive semidefinite")
def suite_pair_gram(sc: SuiteContext) -> VerificationReport:
    return verify.check_pair_gram(sc.model(), _random_family(sc, "pair-gram"), sc.tol)


@register("psi-isometry", "a free copy of the semicircular family realizes the pairing")
def suite_psi_isometry(sc: SuiteContext) -> VerificationReport:
    return verify.check_psi_isometry(sc.ctx, sc.eta, sc.config.depth, 2, sc.tol)


def _minimal_projection(ctx: AlgebraContext) -> np.ndarray:
    """A rank-one-per-copy projection of B: the first diagonal matrix unit."""
    for b in ctx.basis:
        if np.allclose(b @ b, b) and np.allclose(b, b.conj().T) and np.trace(b).real > 0:
            return b
    return ctx.identity()


@register("kernel-annihilation", "kernel projections annihilate the derivative")
def suite_kernel(sc: SuiteContext) -> VerificationReport:
    # at even depth the truncated s_i have spurious kernel vectors
    depth = sc.config.depth if sc.config.depth % 2 else sc.config.depth - 1
    depth = max(depth, 1)
    m = sc.model(depth)
    ctx = sc.ctx
    b = _minimal_projection(ctx)
    tests = {"b-s0": BPolynomial.constant(ctx, b) * BPolynomial.letter(ctx, 0),
             "s0-plus-3": BPolynomial.letter(ctx, 0) + 3.0,
             "zero": BPolynomial.zero(ctx)}
    rep = VerificationReport("kernel-annihilation", environment=verify._environment(
        m, note="odd truncation depth"))
    for name, P in tests.items():
        sub = verify.check_kernel_annihilation(m, P, sc.tol)
        for r in sub.records:
            r.label = f"{name}-{r.label}"
            r.detail = f"{r.detail}; ker dims {sub.environment['kernel_dim']}/{sub.environment['cokernel_dim']}"
        rep.extend(sub)
    return rep


@register("freeness", "freeness with amalgamation: mixed cumulants vanish", default=False)
def suite_freeness(sc: SuiteContext) -> VerificationReport:
    if sc.config.families is None:
        raise ConfigError("families: required by the freeness suite")
    fam = {}
    for k, group in enumerate(sc.config.families):
        for i in group:
            if i >= sc.index_count:
                raise ConfigError(f"families[{k}]: index {i} outside 0..{sc.index_count - 1}")
            fam[i] = k
    m = sc.model()
    dmax = min(6, m.exact_degree)
    rep = check_amalgamated_freeness(FockMoments(m), fam, dmax, sc.tol)
    rep.environment.update(verify._environment(m, max_degree=dmax))
    return rep


@register("free-convolution", "cumulants of x + sqrt(t) s for a free semicircular s")
def suite_free_convolution(sc: SuiteContext) -> VerificationReport:
    ctx, eta = sc.ctx, sc.eta
    I = sc.index_count
    noise = CovarianceMatrix.diagonal(ctx, I)
    depth, dmax = 2, 4
    joint = FockModel(ctx, block_diagonal(eta, noise), depth)
    base = SemicircularCumulants(eta, dmax)
    rep = VerificationReport("free-convolution", environment={"depth": depth, "max_degree": dmax})
    for t in (0.0, 1.0, 2.5):
        key = f"x(t={t})"
        for i in range(I):
            joint.register_letter((key, i), BPolynomial.letter(ctx, i)
                                  + np.sqrt(t) * BPolynomial.letter(ctx, I + i))
        measured = MomentCumulants(FockMoments(joint), dmax)
        predicted = ConvolvedCumulants(base, noise, t)
        direct = FockModel(ctx, eta + noise.scaled(t), depth)
        w_cum = w_mom = 0.0
        for d in range(1, dmax + 1):
            for letters in itertools.product(range(I), repeat=d):
                keyed = tuple((key, i) for i in letters)
                w_cum = max(w_cum, float(np.abs(measured.cumulant_tensor(keyed)
                                                - predicted.cumulant_tensor(letters)).max()))
                w_mom = max(w_mom, float(np.abs(joint.basis_moments(keyed)
                                                - direct.basis_moments(letters)).max()))
        rep.add(f"t={t}-cumulants", "cumulant table of the free sum", w_cum, sc.tol)
        rep.add(f"t={t}-moments", "free sum against the Fock model of eta + t eta'", w_mom, sc.tol)
    return rep


@register("linearization", "self-adjoint linearization as a Schur complement")
def suite_linearization(sc: SuiteContext) -> VerificationReport:
    rng = sc.rng("linearization")
    scal = AlgebraContext.scalars(1)
    I = sc.index_count
    rep = VerificationReport("linearization")
    for k in range(5):
        p = verify.random_polynomial(scal, I, 4, rng, density=0.7)
        p = p + p.adjoint()
        pencil = linearize(p, self_adjoint=True, n_letters=I)
        worst = schur_defect(pencil, p, rng, trials=5, m=3)
        rep.add(f"poly-{k}", "Schur complement of the pencil reproduces p", worst, sc.tol,
                detail=f"pencil_size={pencil.k}", fingerprint=fingerprint(*p.terms.values()))
    return rep


@register("not-reproducible", "infinite-dimensional statements outside desk scale")
def suite_not_reproducible(sc: SuiteContext) -> VerificationReport:
    rep = VerificationReport("not-reproducible")
    rep.add("center-of-relative-commutant", "center of B v (B' cap M) equals the center of B",
            np.nan, 0.0, status=NOT_REPRODUCIBLE,
            detail="needs diffuse von Neumann algebras; ingredients checked in suites "
                   "integration-by-parts, conjugate-cumulants, adjoint-formula, shuffle")
    rep.add("no-atoms-in-B", "a variable with a conjugate system has no atoms in B",
            np.nan, 0.0, status=NOT_REPRODUCIBLE,
            detail="finite-dimensional models are atomic; ingredients checked in suites "
                   "norm-bound, kernel-annihilation, integration-by-parts")
    return rep
