"""Numerical checks of the derivative calculus in the semicircular Fock model.

Elements of ``L^2(M (x)_eta M)`` are represented by blocks
``sum_{a, b} T[a, b] x_a e_i y_b`` where the vectors ``x_a Omega`` and
``y_b Omega`` are stored.  The pairing

    <x1 e_i y1, x2 e_j y2> = tau(y1^* eta_ij(E_B(x1^* x2)) y2)

then only needs B-valued inner products of the left vectors and the left
action of B on the right vectors, so the same code handles polynomial factors
(exact up to the truncation bound) and arbitrary operators on the truncated
space (kernel projections).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bpoly import BPolynomial, DerivTensor, _merge, eta_derivative
from .covmap import CovarianceMatrix, block_diagonal
from .errors import ExactnessError, ValidationError
from .fock import FockModel
from .report import FAIL, PASS, WARN, VerificationReport, fingerprint

_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"

SEMICIRCULAR_SCOPE = "adjoint taken with d*(e_i) = s_i, valid in the semicircular model"


@dataclass
class _Block:
    index: int
    left: np.ndarray  # (NA, dim) vectors x_a Omega
    right: np.ndarray  # (NY, dim) vectors y_b Omega
    coef: np.ndarray  # (NA, NY)
    left_degree: int | None  # None: operator factors, no exactness bookkeeping
    right_degree: int | None


class L2TensorVector:
    """Element of ``L^2(M (x)_eta M)`` over a Fock model."""

    def __init__(self, model: FockModel, blocks: Sequence[_Block] = ()):
        self.model = model
        self.blocks = list(blocks)

    @classmethod
    def from_tensor(cls, model: FockModel, xi: DerivTensor) -> "L2TensorVector":
        """Terms with the same generator are merged into one block (the
        coefficient matrix becomes block diagonal); exactness is then guarded
        with the largest degrees of the block."""
        if xi.ctx is not model.ctx:
            raise ValidationError("tensor over a different context")
        dim = model.dim
        grouped: dict = {}
        for L, i, R, T in xi.split():
            if not 0 <= i < model.index_count:
                raise ValidationError(f"generator e_{i} outside the index set")
            grouped.setdefault(i, []).append((L, R, T))
        blocks = []
        for i, parts in sorted(grouped.items()):
            A = np.concatenate([model.basis_vectors(L).reshape(-1, dim) for L, _, _ in parts])
            Y = np.concatenate([model.basis_vectors(R).reshape(-1, dim) for _, R, _ in parts])
            coef = np.zeros((len(A), len(Y)), dtype=complex)
            r0 = c0 = 0
            for _, _, T in parts:
                coef[r0:r0 + T.shape[0], c0:c0 + T.shape[1]] = T
                r0, c0 = r0 + T.shape[0], c0 + T.shape[1]
            blocks.append(_Block(i, A, Y, coef, max(model.word_degree(L) for L, _, _ in parts),
                                 max(model.word_degree(R) for _, R, _ in parts)))
        return cls(model, blocks)

    @classmethod
    def from_factors(cls, model: FockModel, xi: DerivTensor, left_op: np.ndarray | None = None,
                     right_op: np.ndarray | None = None) -> "L2TensorVector":
        """``left_op . xi . right_op`` for operators on the truncated space."""
        dim = model.dim
        start = None if right_op is None else np.asarray(right_op) @ model.omega
        blocks = []
        for L, i, R, T in xi.split():
            A = model.basis_vectors(L).reshape(-1, dim)
            if left_op is not None:
                A = A @ np.asarray(left_op).T
            Y = model.basis_vectors(R, start=start).reshape(-1, dim)
            blocks.append(_Block(i, A, Y, T, None, None))
        return cls(model, blocks)

    def pair(self, other: "L2TensorVector") -> complex:
        return pair_l2(self, other)

    def norm(self) -> float:
        return float(np.sqrt(max(pair_l2(self, self).real, 0.0)))


def _guard_pair(model: FockModel, a: _Block, b: _Block) -> None:
    if a.left_degree is None or b.left_degree is None:
        return
    for what, deg in (("left factors", a.left_degree + b.left_degree),
                      ("right factors", a.right_degree + b.right_degree)):
        if deg > model.exact_degree:
            raise ExactnessError(f"pairing needs {what} of total degree {deg} > {model.exact_degree}")


def _pair_parts(model: FockModel, a: _Block, b: _Block):
    """``C[p, q, g]`` = coords of ``eta_ij(E_B(x_p^* x_q))`` and
    ``G[g, r, s] = <y_r Omega, b_g y_s Omega>``."""
    _guard_pair(model, a, b)
    F = model.inner_B(a.left, b.left)
    C = F @ model.eta.coef[a.index, b.index].T
    lamY = model.apply_lambda_all(b.right)
    G = np.einsum("rx,gsx->grs", a.right.conj(), lamY, optimize=True)
    return C, G


def pair_l2(u: L2TensorVector, v: L2TensorVector) -> complex:
    """``<u, v>``; conjugate-linear in ``u``."""
    if u.model is not v.model:
        raise ValidationError("vectors live over different models")
    total = 0j
    for a in u.blocks:
        for b in v.blocks:
            C, G = _pair_parts(u.model, a, b)
            total += np.einsum("pr,pqg,grs,qs->", a.coef.conj(), C, G, b.coef, optimize=True)
    return complex(total)


def pair_tensors(model: FockModel, u: DerivTensor, v: DerivTensor) -> complex:
    return pair_l2(L2TensorVector.from_tensor(model, u), L2TensorVector.from_tensor(model, v))


def pair_direct(model: FockModel, u: DerivTensor, v: DerivTensor) -> complex:
    """Same pairing evaluated term by term through polynomial moments.

    Expands every basis pair and computes ``tau(y1^* eta_ij(E_B(x1^* x2)) y2)``
    with :meth:`FockModel.expectation_coords`; slow, meant for cross-checks.
    """
    ctx, eta = model.ctx, model.eta
    d = ctx.dim
    total = 0j
    for L, i, R, T in u.split():
        for L2, j, R2, T2 in v.split():
            for p, q in zip(*np.nonzero(np.abs(T) > 0)):
                a_idx = np.unravel_index(p, (d,) * (len(L) + 1))
                b_idx = np.unravel_index(q, (d,) * (len(R) + 1))
                x1 = BPolynomial.basis_word(ctx, L, a_idx)
                y1 = BPolynomial.basis_word(ctx, R, b_idx)
                for p2, q2 in zip(*np.nonzero(np.abs(T2) > 0)):
                    x2 = BPolynomial.basis_word(ctx, L2, np.unravel_index(p2, (d,) * (len(L2) + 1)))
                    y2 = BPolynomial.basis_word(ctx, R2, np.unravel_index(q2, (d,) * (len(R2) + 1)))
                    e = model.expectation_coords(x1.adjoint() * x2)
                    c = eta.entry_coords(i, j, e)
                    mid = y1.adjoint() * BPolynomial.constant_coords(ctx, c) * y2
                    total += np.conj(T[p, q]) * T2[p2, q2] * model.trace(mid)
    return complex(total)


# -- M-valued inner product and the adjoint of the derivative -----------------

def _star_junction(ctx) -> np.ndarray:
    """``J4[b, g, b', c]``: coords of ``b^* b_g b'`` for basis elements."""
    return np.einsum("ba,age,efc->bgfc", ctx.star, ctx.structure, ctx.structure, optimize=True)


def _reverse_pair_tensor(ctx, H: np.ndarray, m: int, m2: int) -> np.ndarray:
    """Coefficient tensor of ``sum W_R(b)^* H[b, b', g] b_g W_R'(b')``.

    ``H`` has axes ``(b0..bm, b'0..b'm2, g)``; the result has ``m + m2 + 1``
    slots for the word ``reverse(R) + R'``.
    """
    B = _CHARS[:m + 1]
    Bp = _CHARS[m + 1:m + m2 + 2]
    g = _CHARS[m + m2 + 2]
    X = _CHARS[m + m2 + 3:2 * m + m2 + 3]  # X[k] is the slot fed by b_{m-k}
    y = _CHARS[2 * m + m2 + 3]
    operands = [H]
    subs = [B + Bp + g]
    for k in range(m):
        operands.append(ctx.star)
        subs.append(B[m - k] + X[k])
    operands.append(_star_junction(ctx))
    subs.append(B[0] + g + Bp[0] + y)
    out = X + y + Bp[1:]
    return np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)


def m_inner(model: FockModel, u: DerivTensor, v: DerivTensor) -> BPolynomial:
    """``<u | v>_M`` with ``<x e_j y | x' e_i y'>_M = y^* eta_ji(E_B(x^* x')) y'``.

    Conditional expectations come from B-valued inner products of Fock
    vectors; the result is a polynomial in the letters of the model.
    """
    ctx, eta = model.ctx, model.eta
    d, dim = ctx.dim, model.dim
    terms: dict = {}
    for L, j, R, T in u.split():
        X = T.T @ model.basis_vectors(L).reshape(-1, dim)
        for L2, i, R2, T2 in v.split():
            deg = model.word_degree(L) + model.word_degree(L2)
            if deg > model.exact_degree:
                raise ExactnessError(f"E_B of a word of degree {deg} > {model.exact_degree}")
            X2 = T2.T @ model.basis_vectors(L2).reshape(-1, dim)
            H = model.inner_B(X, X2) @ eta.coef[j, i].T
            H = H.reshape((d,) * (len(R) + 1) + (d,) * (len(R2) + 1) + (d,))
            _merge(terms, R[::-1] + R2, _reverse_pair_tensor(ctx, H, len(R), len(R2)))
    return BPolynomial(ctx, terms)


def _prefix_contract(model: FockModel, T: np.ndarray, letters, i: int, on_left: bool):
    """Closed forms of ``<J d(p) | e_i>_M`` (``on_left``) and ``<e_i | d(p)>_M``.

    ``T`` has a batch of leading axes followed by the ``len(letters) + 1``
    slots of ``p``.  For ``p = W`` a word with prefix ``P_k`` and suffix
    ``S_k`` around its k-th letter ``j_k``:

    * ``<J d(W) | e_i>_M = sum_k P_k eta_{j_k i}(E_B(S_k))``
    * ``<e_i | d(W)>_M = sum_k eta_{i j_k}(E_B(P_k)) S_k``

    Returns ``{letters: tensor}`` with the batch axes kept in front.
    """
    ctx, eta = model.ctx, model.eta
    mu = ctx.structure
    m = len(letters)
    nb = T.ndim - (m + 1)
    out: dict = {}
    for k in range(1, m + 1):
        jk = letters[k - 1]
        if on_left:
            M = model.basis_moments(letters[k:])  # slots k..m, then g
            X = np.tensordot(T, M, axes=(list(range(nb + k, nb + m + 1)), list(range(m - k + 1))))
            X = X @ eta.coef[jk, i].T  # (..., slots 0..k-1, e)
            X = np.tensordot(X, mu, axes=([X.ndim - 2, X.ndim - 1], [0, 1]))
            out.setdefault(letters[:k - 1], []).append(X)
        else:
            M = model.basis_moments(letters[:k - 1])  # slots 0..k-1, then g
            pre = list(range(nb, nb + k))
            X = np.tensordot(T, M, axes=(pre, list(range(k))))  # (batch, slots k..m, g)
            X = X @ eta.coef[i, jk].T  # (batch, slots k..m, e)
            X = np.tensordot(X, mu, axes=([X.ndim - 1, nb], [0, 1]))  # (batch, k+1..m, c)
            out.setdefault(letters[k:], []).append(np.moveaxis(X, -1, nb))
    return {key: sum(parts) for key, parts in out.items()}


def adjoint_star(model: FockModel, xi: DerivTensor) -> BPolynomial:
    """``d_eta^*(xi)`` in the semicircular model, where ``d_eta^*(e_i) = s_i``.

    Uses ``d*(x e_i y) = x s_i y - <J d(x) | e_i>_M y - x <e_i | d(y)>_M``
    termwise, with the M-valued inner products in closed form and batched
    over the basis words of the outer factor.
    """
    ctx = model.ctx
    d = ctx.dim
    mu = ctx.structure
    terms: dict = {}
    for L, i, R, T in xi.split():
        NA, NY = T.shape
        _merge(terms, L + (i,) + R, T.reshape((d,) * (len(L) + len(R) + 2)))
        # sum_a <J d(x_a) | e_i>_M y_a with y_a the right factor T[a, :]
        eye = np.eye(NA).reshape((NA,) + (d,) * (len(L) + 1))
        Tr = T.reshape(NA, d, -1)
        for K, S in _prefix_contract(model, eye, L, i, on_left=True).items():
            X = np.einsum("apy,yzc,azr->pcr", S.reshape(NA, -1, d), mu, Tr, optimize=True)
            _merge(terms, K + R, -X.reshape((d,) * (len(K) + len(R) + 1)))
        # sum_b x_b <e_i | d(y_b)>_M with x_b the left factor T[:, b]
        eye = np.eye(NY).reshape((NY,) + (d,) * (len(R) + 1))
        Tl = T.reshape(-1, d, NY)
        for K, S in _prefix_contract(model, eye, R, i, on_left=False).items():
            X = np.einsum("lxb,xyc,byk->lck", Tl, mu, S.reshape(NY, d, -1), optimize=True)
            _merge(terms, L + K, -X.reshape((d,) * (len(L) + len(K) + 1)))
    return BPolynomial(ctx, terms)


def pair_functional(u: L2TensorVector, L, i: int, R) -> np.ndarray:
    """``<u, x_a e_i y_b>`` for all basis words ``x_a`` over ``L`` and ``y_b`` over ``R``.

    Shape ``(dim B,) * (len(L) + len(R) + 2)``, which is also the index of
    the basis word ``L + (i,) + R``.
    """
    model = u.model
    d, dim = model.ctx.dim, model.dim
    basis = _Block(i, model.basis_vectors(L).reshape(-1, dim), model.basis_vectors(R).reshape(-1, dim),
                   None, model.word_degree(L), model.word_degree(R))
    out = np.zeros((len(basis.left), len(basis.right)), dtype=complex)
    for a in u.blocks:
        C, G = _pair_parts(model, a, basis)
        out += np.einsum("pr,pqg,grs->qs", a.coef.conj(), C, G, optimize=True)
    return out.reshape((d,) * (len(L) + len(R) + 2))


def letter_sequences(index_count: int, max_degree: int, min_degree: int = 0):
    for k in range(min_degree, max_degree + 1):
        yield from itertools.product(range(index_count), repeat=k)


def random_polynomial(ctx, index_count: int, degree: int, rng, density: float = 1.0) -> BPolynomial:
    """Random polynomial with Gaussian coefficient tensors of unit scale."""
    terms = {}
    for letters in letter_sequences(index_count, degree):
        if rng.random() > density and letters:
            continue
        shape = (ctx.dim,) * (len(letters) + 1)
        terms[letters] = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2 * np.prod(shape))
    return BPolynomial(ctx, terms)


def random_tensor(ctx, index_count: int, degree: int, rng) -> DerivTensor:
    """Random element ``sum_i p_i e_i q_i`` with ``deg p_i, deg q_i <= degree``."""
    out = DerivTensor.zero(ctx)
    for i in range(index_count):
        p = random_polynomial(ctx, index_count, degree, rng)
        q = random_polynomial(ctx, index_count, degree, rng)
        out = out + p * DerivTensor.generator(ctx, i) * q
    return out


# -- checks --------------------------------------------------------------------

def _environment(model: FockModel, **extra) -> dict:
    env = {"depth": model.depth, "levels": ",".join(str(x) for x in model.dims),
           "exact_degree": model.exact_degree}
    env.update(extra)
    return env


def check_integration_by_parts(model: FockModel, xi: Sequence[BPolynomial] | None = None,
                               degree: int = 5, tol: float = 1e-9) -> VerificationReport:
    """``<xi_i, p> = <e_i, d_eta(p)>`` on every basis monomial of degree <= ``degree``.

    The right side is evaluated from prefix and suffix moments,
    ``sum_k tau(eta_{i j_k}(E_B(b0 x_{j1} ... b_{k-1})) E_B(b_k ... b_d))``.
    ``xi`` defaults to the semicircular family itself.  Records one line per
    degree; ``environment['first_failure']`` holds the smallest failing one.
    """
    ctx, eta = model.ctx, model.eta
    I, d, dim = model.index_count, ctx.dim, model.dim
    if xi is None:
        xi = [BPolynomial.letter(ctx, i) for i in range(I)]
    if len(xi) != I:
        raise ValidationError(f"need {I} candidate vectors, got {len(xi)}")
    xi_deg = max(max(x.degree(), 0) for x in xi)
    model.guard(xi_deg + degree, "integration-by-parts pairing")
    xi_vecs = [model.vector(x) for x in xi]
    Q = ctx.pairing
    rep = VerificationReport("integration-by-parts",
                             environment=_environment(model, max_degree=degree))
    first = None
    for n in range(degree + 1):
        worst, witness = 0.0, ""
        for seq in letter_sequences(I, n, n):
            W = model.basis_vectors(seq).reshape(-1, dim)
            for i in range(I):
                lhs = W @ xi_vecs[i].conj()
                rhs = np.zeros(d ** (n + 1), dtype=complex)
                for k in range(1, n + 1):
                    pre = model.basis_moments(seq[:k - 1]).reshape(d ** k, d)
                    suf = model.basis_moments(seq[k:]).reshape(d ** (n - k + 1), d)
                    rhs += ((pre @ eta.coef[i, seq[k - 1]].T) @ Q @ suf.T).reshape(-1)
                diff = np.abs(lhs - rhs)
                if diff.max() > worst:
                    worst = float(diff.max())
                    witness = f"i={i} letters={seq}"
        rec = rep.add(f"degree-{n}", "integration by parts against the eta-derivative", worst, tol,
                      detail=f"witness {witness}" if worst > tol else "",
                      fingerprint=fingerprint(*xi_vecs))
        if rec.status == FAIL and first is None:
            first = n
    rep.environment["first_failure"] = "none" if first is None else first
    return rep


def adjoint_formula_rhs(model: FockModel, p: BPolynomial, q: BPolynomial, xi: DerivTensor) -> BPolynomial:
    """``p d*(xi) q - <J d(p) | xi>_M q - p <J xi | d(q)>_M``."""
    return (p * adjoint_star(model, xi) * q
            - m_inner(model, eta_derivative(p).J(), xi) * q
            - p * m_inner(model, xi.J(), eta_derivative(q)))


def check_adjoint_formula(model: FockModel, p: BPolynomial, q: BPolynomial, xi: DerivTensor,
                          degree: int = 3, tol: float = 1e-9) -> VerificationReport:
    """Product rule for the adjoint of the derivative, tested against the pairing.

    For every basis monomial ``r`` of degree <= ``degree`` compares
    ``<RHS, r>`` with ``<p xi q, d_eta(r)>``, where RHS is built from the
    M-valued inner products; the closed-form ``d*(p xi q)`` is tested the
    same way.  Scoped to the semicircular model.
    """
    I, dim = model.index_count, model.dim
    target = p * xi * q
    u = L2TensorVector.from_tensor(model, target)
    routes = {"product-rule": adjoint_formula_rhs(model, p, q, xi),
              "closed-form": adjoint_star(model, target)}
    rep = VerificationReport("adjoint-formula", environment=_environment(
        model, max_degree=degree, scope=SEMICIRCULAR_SCOPE))
    vecs = {}
    for name, poly in routes.items():
        model.guard(max(poly.degree(), 0) + degree, f"{name} pairing")
        vecs[name] = model.vector(poly)
    worst = {name: 0.0 for name in routes}
    for seq in letter_sequences(I, degree):
        W = model.basis_vectors(seq).reshape(-1, dim)
        ref = 0
        for k, j in enumerate(seq):
            ref = ref + pair_functional(u, seq[:k], j, seq[k + 1:]).reshape(-1)
        for name, v in vecs.items():
            worst[name] = max(worst[name], float(np.abs(W @ v.conj() - ref).max()))
    fp = fingerprint(*[T for T in target.terms.values()])
    for name in routes:
        rep.add(name, "adjoint of the eta-derivative on p xi q", worst[name], tol, fingerprint=fp)
    return rep


def check_shuffle(model: FockModel, p: BPolynomial, q: BPolynomial, i: int, j: int,
                  tol: float = 1e-9) -> VerificationReport:
    """Both shuffle identities for ``d*`` of elementary tensors.

    * ``<d*(p e_i), d*(q e_j)> = <d*(e_i), d*(p^* q e_j)>``
    * ``<d*(e_i p), d*(e_j q)> = <d*(e_i), d*(e_j q p^*)>``
    """
    ctx = model.ctx
    ei, ej = DerivTensor.generator(ctx, i), DerivTensor.generator(ctx, j)
    rep = VerificationReport("shuffle", environment=_environment(model, scope=SEMICIRCULAR_SCOPE))

    def inner(a: BPolynomial, b: BPolynomial) -> complex:
        model.guard(max(a.degree(), 0) + max(b.degree(), 0), "shuffle pairing")
        return complex(np.vdot(model.vector(a), model.vector(b)))

    s_i = adjoint_star(model, ei)
    forms = {
        "left-shuffle": (adjoint_star(model, p * ei), adjoint_star(model, q * ej),
                         adjoint_star(model, p.adjoint() * q * ej)),
        "right-shuffle": (adjoint_star(model, ei * p), adjoint_star(model, ej * q),
                          adjoint_star(model, ej * (q * p.adjoint()))),
    }
    fp = fingerprint(*p.terms.values(), *q.terms.values())
    for name, (a, b, c) in forms.items():
        lhs, rhs = inner(a, b), inner(s_i, c)
        scale = max(1.0, abs(lhs))
        rep.add(name, "shuffle identity for the adjoint derivative", abs(lhs - rhs), tol * scale,
                detail=f"lhs={lhs:.6g}", fingerprint=fp)
    return rep


def check_norm_bound(model: FockModel, p: BPolynomial, i: int, slack: float = 1.05) -> VerificationReport:
    """``||d*(p e_i)|| <= ||d*(e_i)|| ||p||`` with ``||p||`` from the truncated model.

    The truncated operator norm is a lower bound for the true norm, so a
    violation up to the factor ``slack`` is only a warning.
    """
    ctx = model.ctx
    rep = VerificationReport("norm-bound", environment=_environment(model, slack=slack))
    ei = DerivTensor.generator(ctx, i)
    deg = max(p.degree(), 0) + 1
    model.guard(2 * deg, "norm of d*(p e_i)")
    lhs = float(np.linalg.norm(model.vector(adjoint_star(model, p * ei))))
    base = float(np.linalg.norm(model.vector(adjoint_star(model, ei))))
    pnorm = model.operator_norm_estimate(p)
    rhs = base * pnorm
    if rhs > 0:
        excess = max(0.0, lhs / rhs - 1.0)
    else:
        excess = 0.0 if lhs <= ctx.tol.equality else np.inf
    status = PASS if excess <= 1e-12 else (WARN if excess <= slack - 1.0 else FAIL)
    rep.add(f"index-{i}", "norm bound for the adjoint derivative on p e_i", excess, slack - 1.0,
            status=status, detail=f"lhs={lhs:.6g} rhs={rhs:.6g} norm_estimate={pnorm:.6g}",
            fingerprint=fingerprint(*p.terms.values()))
    return rep


def check_psi_isometry(ctx, eta: CovarianceMatrix, depth: int, word_degree: int = 2,
                       tol: float = 1e-9) -> VerificationReport:
    """``<x1 s_i y1, x2 s_j y2> = <x1 e_i y1, x2 e_j y2>`` with ``x, y`` in a free copy.

    Builds the Fock model of ``eta (+) eta``: letters ``0..I-1`` form the
    family ``x`` and letters ``I..2I-1`` the family ``s``, free with
    amalgamation over B.  ``x, y`` range over all basis words of degree
    <= ``word_degree`` in the first family; pairs whose moments exceed the
    exact degree are skipped and counted.
    """
    I = eta.index_count
    model = FockModel(ctx, block_diagonal(eta, eta), depth)
    dim = model.dim
    words = list(letter_sequences(I, word_degree))
    vec = {w: model.basis_vectors(w).reshape(-1, dim) for w in words}
    lam = {w: model.apply_lambda_all(vec[w]) for w in words}
    left, right = {}, {}  # B-valued inner products and <y, b_g y'> per word pair
    worst, skipped, compared = 0.0, 0, 0
    combos = [(x, y, i) for x in words for y in words for i in range(I)]
    for x1, y1, i in combos:
        v1 = model.basis_vectors(x1 + (I + i,) + y1).reshape(-1, dim)
        for x2, y2, j in combos:
            if len(x1) + len(y1) + len(x2) + len(y2) + 2 > model.exact_degree:
                skipped += 1
                continue
            v2 = model.basis_vectors(x2 + (I + j,) + y2).reshape(-1, dim)
            lhs = v1.conj() @ v2.T
            if (x1, x2) not in left:
                left[x1, x2] = model.inner_B(vec[x1], vec[x2])
            if (y1, y2) not in right:
                right[y1, y2] = np.einsum("rx,gsx->grs", vec[y1].conj(), lam[y2], optimize=True)
            C = left[x1, x2] @ eta.coef[i, j].T
            rhs = np.einsum("pqg,grs->prqs", C, right[y1, y2], optimize=True).reshape(lhs.shape)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
            compared += 1
    rep = VerificationReport("psi-isometry", environment=_environment(
        model, word_degree=word_degree, skipped_pairs=skipped))
    rep.add("free-copy-pairing", "free copy of the semicircular family realizes the pairing",
            worst, tol, detail=f"{compared} word pairs", fingerprint=fingerprint(eta.coef))
    return rep


def check_j_isometry(model: FockModel, family: Sequence[DerivTensor], tol: float = 1e-9) -> VerificationReport:
    """``<J u, J v> = <v, u>`` and conjugate symmetry on a finite family."""
    vecs = [L2TensorVector.from_tensor(model, u) for u in family]
    jvecs = [L2TensorVector.from_tensor(model, u.J()) for u in family]
    n = len(vecs)
    G = np.array([[pair_l2(vecs[a], vecs[b]) for b in range(n)] for a in range(n)])
    GJ = np.array([[pair_l2(jvecs[a], jvecs[b]) for b in range(n)] for a in range(n)])
    scale = max(1.0, float(np.abs(G).max()))
    rep = VerificationReport("j-isometry", environment=_environment(model, family_size=n))
    fp = fingerprint(*[T for u in family for T in u.terms.values()])
    rep.add("J-isometry", "J is an antiunitary isometry of the pairing", float(np.abs(GJ - G.T).max()),
            tol * scale, fingerprint=fp)
    rep.add("conjugate-symmetry", "the pairing is conjugate symmetric",
            float(np.abs(G - G.conj().T).max()), tol * scale, fingerprint=fp)
    return rep


def check_pair_gram(model: FockModel, family: Sequence[DerivTensor], tol: float = 1e-9) -> VerificationReport:
    """The Gram matrix of the pairing on a finite family is positive semidefinite."""
    vecs = [L2TensorVector.from_tensor(model, u) for u in family]
    G = np.array([[pair_l2(a, b) for b in vecs] for a in vecs])
    H = 0.5 * (G + G.conj().T)
    low = float(np.linalg.eigvalsh(H).min()) if len(vecs) else 0.0
    rep = VerificationReport("pair-gram", environment=_environment(model, family_size=len(vecs)))
    rep.add("gram-psd", "the pairing is positive semidefinite", max(0.0, -low), tol,
            detail=f"min_eigenvalue={low:.3e}")
    return rep


def kernel_projection(A: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Orthogonal projection onto ``ker A`` (singular values <= cutoff * sigma_max)."""
    n = A.shape[1]
    U, s, Vh = np.linalg.svd(A)
    if s.size == 0 or s[0] == 0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > cutoff * s[0]))
    N = Vh[rank:].conj().T
    return N @ N.conj().T


def check_kernel_annihilation(model: FockModel, P: BPolynomial, tol: float = 1e-9,
                              cutoff: float = 1e-10) -> VerificationReport:
    """``v d(P) u = 0`` for the kernel projections ``u`` of ``P`` and ``v`` of ``P^*``.

    ``P`` is evaluated on the truncated space; the norm of ``v d(P) u`` is
    taken in the pairing with operator factors.
    """
    A = model.operator(P)
    u = kernel_projection(A, cutoff)
    v = kernel_projection(A.conj().T, cutoff)
    ku, kv = int(round(np.trace(u).real)), int(round(np.trace(v).real))
    rep = VerificationReport("kernel-annihilation", environment=_environment(
        model, kernel_dim=ku, cokernel_dim=kv))
    anchor = "kernel projections annihilate the derivative"
    fp = fingerprint(*P.terms.values())
    if ku == 0 or kv == 0:
        rep.add("v-dP-u", anchor, 0.0, tol, detail="vacuous: trivial kernel", fingerprint=fp)
        return rep
    w = L2TensorVector.from_factors(model, eta_derivative(P), left_op=v, right_op=u)
    rep.add("v-dP-u", anchor, w.norm(), tol, detail=f"ker P dim {ku}, ker P* dim {kv}", fingerprint=fp)
    return rep
