"""Formal polynomials ``b0 x_{i1} b1 ... x_{id} bd`` with coefficients in B.

The algebra B<x> is the algebraic free product of B with the free algebra
on the letters ``x_i``; as a vector space it is the direct sum over letter
sequences of ``B^{(x)(d+1)}``.  A polynomial is therefore stored as a map
from letter tuples to dense coefficient tensors of shape ``(dim B,) * (d+1)``
in the basis of B, which is a canonical normal form.

:class:`DerivTensor` holds elements of ``span{B<x> e_i B<x>}`` the same
way, keyed by ``(left letters, i, right letters)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .matalg import AlgebraContext


def _apply_each_axis(T: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Contract every axis of ``T`` with the first index of ``M``."""
    for ax in range(T.ndim):
        T = np.moveaxis(np.tensordot(T, M, axes=([ax], [0])), -1, ax)
    return T


def _junction(ctx: AlgebraContext, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Concatenate two coefficient tensors, multiplying the last slot of
    ``A`` into the first slot of ``B``."""
    T = np.tensordot(A, ctx.structure, axes=([A.ndim - 1], [0]))  # (..., y, c)
    T = np.tensordot(T, B, axes=([A.ndim - 1], [0]))  # (..., c, ...)
    return T


def _star_tensor(ctx: AlgebraContext, T: np.ndarray) -> np.ndarray:
    """Coefficient tensor of the adjoint word (axes reversed, entries starred)."""
    rev = np.conj(T.transpose(tuple(range(T.ndim))[::-1]))
    return _apply_each_axis(rev, ctx.star)


def _merge(dst: dict, key, T: np.ndarray) -> None:
    if key in dst:
        dst[key] = dst[key] + T
    else:
        dst[key] = np.array(T, dtype=complex)


class BPolynomial:
    """An element of B<x> in normal form.

    Parameters
    ----------
    ctx : AlgebraContext
    terms : mapping from letter tuples to coefficient tensors
    """

    __array_priority__ = 100  # keep numpy scalars from broadcasting over us

    def __init__(self, ctx: AlgebraContext, terms: Mapping | None = None):
        self.ctx = ctx
        self.terms: dict[tuple[int, ...], np.ndarray] = {}
        for letters, T in (terms or {}).items():
            letters = tuple(int(i) for i in letters)
            T = np.asarray(T, dtype=complex)
            if T.shape != (ctx.dim,) * (len(letters) + 1):
                raise ValidationError(
                    f"coefficient tensor for word {letters} has shape {T.shape}")
            _merge(self.terms, letters, T)
        self._prune()

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, ctx):
        return cls(ctx)

    @classmethod
    def constant_coords(cls, ctx, c):
        return cls(ctx, {(): np.asarray(c, dtype=complex)})

    @classmethod
    def constant(cls, ctx, b=None):
        """The element ``b`` of B (identity by default); scalars allowed."""
        if b is None:
            return cls.constant_coords(ctx, ctx.unit)
        if np.isscalar(b):
            return cls.constant_coords(ctx, complex(b) * ctx.unit)
        return cls.constant_coords(ctx, ctx.coords(ctx.check(b)))

    @classmethod
    def letter(cls, ctx, i: int):
        return cls.word(ctx, [i])

    @classmethod
    def word(cls, ctx, letters: Sequence[int], coeffs: Sequence | None = None):
        """``b0 x_{i1} b1 ... x_{id} bd``; ``coeffs`` entries may be ``None``
        (unit), scalars or matrices in B."""
        d = len(letters)
        if coeffs is None:
            coeffs = [None] * (d + 1)
        if len(coeffs) != d + 1:
            raise ValidationError("a word with d letters needs d+1 coefficients")
        vecs = []
        for b in coeffs:
            if b is None:
                vecs.append(ctx.unit)
            elif np.isscalar(b):
                vecs.append(complex(b) * ctx.unit)
            else:
                vecs.append(ctx.coords(ctx.check(b)))
        return cls.word_coords(ctx, letters, vecs)

    @classmethod
    def word_coords(cls, ctx, letters, vecs):
        T = np.asarray(vecs[0], dtype=complex)
        for v in vecs[1:]:
            T = np.multiply.outer(T, np.asarray(v, dtype=complex))
        return cls(ctx, {tuple(letters): T})

    @classmethod
    def basis_word(cls, ctx, letters, idx):
        """Word whose coefficients are the basis elements ``basis[idx[k]]``."""
        eye = np.eye(ctx.dim)
        return cls.word_coords(ctx, letters, [eye[a] for a in idx])

    # -- structure --------------------------------------------------------

    def _prune(self, tol: float | None = None):
        tol = self.ctx.tol.zero if tol is None else tol
        self.terms = {k: T for k, T in self.terms.items() if np.abs(T).max() > tol}

    def degree(self) -> int:
        """Largest word length (-1 for the zero polynomial)."""
        return max((len(k) for k in self.terms), default=-1)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.abs(T).max() <= tol for T in self.terms.values())

    def max_abs_difference(self, other: "BPolynomial") -> float:
        keys = set(self.terms) | set(other.terms)
        worst = 0.0
        for k in keys:
            a = self.terms.get(k)
            b = other.terms.get(k)
            if a is None:
                a = np.zeros_like(b)
            if b is None:
                b = np.zeros_like(a)
            worst = max(worst, float(np.abs(a - b).max()))
        return worst

    def allclose(self, other: "BPolynomial", tol: float | None = None) -> bool:
        tol = self.ctx.tol.equality if tol is None else tol
        return self.max_abs_difference(other) <= tol

    def __eq__(self, other) -> bool:  # exact comparison of normal forms
        if not isinstance(other, BPolynomial):
            return NotImplemented
        return self.max_abs_difference(other) == 0.0

    __hash__ = None

    def __iter__(self):
        return iter(sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0])))

    # -- arithmetic -------------------------------------------------------

    def _same_ctx(self, other):
        if other.ctx is not self.ctx:
            raise ValidationError("polynomials over different algebra contexts")

    def __add__(self, other):
        if np.isscalar(other):
            other = BPolynomial.constant(self.ctx, other)
        self._same_ctx(other)
        terms = {k: T.copy() for k, T in self.terms.items()}
        for k, T in other.terms.items():
            _merge(terms, k, T)
        return BPolynomial(self.ctx, terms)

    __radd__ = __add__

    def __neg__(self):
        return BPolynomial(self.ctx, {k: -T for k, T in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return BPolynomial(self.ctx, {k: other * T for k, T in self.terms.items()})
        if isinstance(other, DerivTensor):
            return other.__rmul__(self)
        self._same_ctx(other)
        terms: dict = {}
        for ka, A in self.terms.items():
            for kb, B in other.terms.items():
                _merge(terms, ka + kb, _junction(self.ctx, A, B))
        return BPolynomial(self.ctx, terms)

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def __pow__(self, k: int):
        out = BPolynomial.constant(self.ctx)
        for _ in range(k):
            out = out * self
        return out

    def lmul(self, b) -> "BPolynomial":
        """``b p`` for a matrix ``b`` in B."""
        return BPolynomial.constant(self.ctx, b) * self

    def rmul(self, b) -> "BPolynomial":
        return self * BPolynomial.constant(self.ctx, b)

    def adjoint(self) -> "BPolynomial":
        """Reverse every word and star every coefficient (letters are self-adjoint)."""
        return BPolynomial(self.ctx, {k[::-1]: _star_tensor(self.ctx, T)
                                      for k, T in self.terms.items()})

    def substitute(self, images: Mapping[int, "BPolynomial"]) -> "BPolynomial":
        """Replace letter ``i`` by ``images[i]`` (letters not listed stay)."""
        out = BPolynomial.zero(self.ctx)
        for letters, T in self.terms.items():
            parts = [images.get(i) or BPolynomial.letter(self.ctx, i) for i in letters]
            out = out + _substitute_word(self.ctx, T, parts)
        return out

    # -- evaluation -------------------------------------------------------

    def evaluate(self, xs: Sequence[np.ndarray], coeff_rep: Sequence[np.ndarray] | None = None):
        """Evaluate at matrices ``xs``; basis element ``a`` of B acts as
        ``coeff_rep[a]`` (default: scalar multiples of the identity when
        B is one-dimensional)."""
        xs = [np.asarray(x, dtype=complex) for x in xs]
        m = xs[0].shape[0] if xs else 1
        if coeff_rep is None:
            if self.ctx.dim != 1:
                raise ValidationError("coefficient representation needed for non-scalar B")
            coeff_rep = [self.ctx.basis[0][0, 0] * np.eye(m)]
        coeff_rep = np.asarray(coeff_rep, dtype=complex)
        total = np.zeros((m, m), dtype=complex)
        for letters, T in self.terms.items():
            # contract from the right; the last tensor axis is the slot being consumed
            state = np.einsum("...a,aij->...ij", T, coeff_rep)
            for pos in range(len(letters) - 1, -1, -1):
                state = np.einsum("ij,...jk->...ik", xs[letters[pos]], state)
                state = np.einsum("aij,...ajk->...ik", coeff_rep, state)
            total += state
        return total

    def is_scalar_coefficient(self, tol: float | None = None) -> bool:
        try:
            self.scalar_terms(tol)
        except ValidationError:
            return False
        return True

    def scalar_terms(self, tol: float | None = None) -> dict[tuple[int, ...], complex]:
        """Scalar coefficient of every word, if all coefficients are multiples of 1."""
        tol = self.ctx.tol.equality if tol is None else tol
        out = {}
        for letters, T in self.terms.items():
            U = self.ctx.unit
            for _ in letters:
                U = np.multiply.outer(U, self.ctx.unit)
            c = np.vdot(U, T) / np.vdot(U, U)
            if np.abs(T - c * U).max() > tol:
                raise ValidationError(f"word {letters} has a non-scalar coefficient")
            out[letters] = complex(c)
        return out

    # -- text form --------------------------------------------------------

    def to_text(self, names: Sequence[str] | None = None, digits: int = 17) -> str:
        """Serialize as ``c * b0 * x1 * b1 + ...`` (letters 1-based)."""
        names = list(names or self.ctx.names)
        tol = self.ctx.tol.zero
        unit_only = self.is_scalar_coefficient(tol=tol)
        pieces = []
        for letters, T in self:
            if unit_only:
                c = self.scalar_terms(tol=tol)[letters]
                factors = [f"x{i + 1}" for i in letters]
                pieces.append(_format_scalar(c, digits) + "".join(" * " + f for f in factors))
                continue
            for idx in zip(*np.nonzero(np.abs(T) > 0)):
                factors = [names[idx[0]]]
                for pos, i in enumerate(letters):
                    factors += [f"x{i + 1}", names[idx[pos + 1]]]
                pieces.append(_format_scalar(T[idx], digits) + "".join(" * " + f for f in factors))
        return " + ".join(pieces) if pieces else "0"

    @classmethod
    def parse(cls, ctx: AlgebraContext, text: str, coefficients: Mapping[str, np.ndarray] | None = None):
        """Parse the text form.  Names resolve to ``coefficients`` first, then
        to the basis names of ``ctx``; ``1`` and ``I`` are the unit."""
        table = {name: ctx.basis[k] for k, name in enumerate(ctx.names)}
        table.update({k: np.asarray(v, dtype=complex) for k, v in (coefficients or {}).items()})
        return _Parser(ctx, text, table).parse()

    def __repr__(self) -> str:
        return f"BPolynomial({self.to_text(digits=6)})"


def _substitute_word(ctx, T, images):
    """Expand the word with coefficient tensor ``T`` after substituting letters."""
    if not images:
        return BPolynomial.constant_coords(ctx, T)
    eye = np.eye(ctx.dim)
    out = BPolynomial.zero(ctx)
    for a in range(ctx.dim):
        if np.any(T[a]):
            head = BPolynomial.constant_coords(ctx, eye[a])
            out = out + head * images[0] * _substitute_word(ctx, T[a], images[1:])
    return out


def _format_scalar(c, digits=17) -> str:
    c = complex(c)
    fmt = f"{{:.{digits}g}}"
    if c.imag == 0:
        return fmt.format(c.real)
    return "(" + fmt.format(c.real) + ("+" if c.imag >= 0 else "-") + fmt.format(abs(c.imag)) + "j)"


_TOKEN = re.compile(r"\s*(?:(?P<num>\((?:[^()]*)\)|[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?j?)"
                    r"|(?P<letter>x[0-9]+\b)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*]))")


class _Parser:
    def __init__(self, ctx, text, table):
        self.ctx, self.text, self.table = ctx, text, table

    def tokens(self):
        pos, text = 0, self.text.strip()
        out = []
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ValidationError(f"cannot parse polynomial near {text[pos:pos + 12]!r}")
            pos = m.end()
            kind = m.lastgroup
            out.append((kind, m.group(kind)))
        return out

    def parse(self) -> BPolynomial:
        ctx = self.ctx
        toks = self.tokens()
        if toks == [("num", "0")]:
            return BPolynomial.zero(ctx)
        total = BPolynomial.zero(ctx)
        sign, term, expect_factor = 1.0, None, True
        for kind, val in toks + [("op", "+")]:
            if kind == "op" and val in "+-":
                if term is None and not expect_factor:
                    raise ValidationError("dangling operator")
                if term is not None:
                    total = total + sign * term
                    term = None
                elif val == "-":
                    sign = -sign
                    continue
                sign = 1.0 if val == "+" else -1.0
                expect_factor = True
                continue
            if kind == "op":  # '*'
                expect_factor = True
                continue
            if not expect_factor:
                raise ValidationError(f"missing operator before {val!r}")
            factor = self.factor(kind, val)
            term = factor if term is None else term * factor
            expect_factor = False
        return total

    def factor(self, kind, val) -> BPolynomial:
        ctx = self.ctx
        if kind == "num":
            try:
                c = complex(val.replace(" ", ""))
            except ValueError as exc:
                raise ValidationError(f"bad number {val!r}") from exc
            return BPolynomial.constant(ctx, c)
        if kind == "letter":
            k = int(val[1:])
            if k < 1:
                raise ValidationError("letters are numbered from x1")
            return BPolynomial.letter(ctx, k - 1)
        if val in ("I", "one"):
            return BPolynomial.constant(ctx)
        if val not in self.table:
            raise ValidationError(f"unknown coefficient name {val!r}")
        return BPolynomial.constant(ctx, self.table[val])


class DerivTensor:
    """Formal element of ``span{B<x> e_i B<x>}``.

    Terms are keyed by ``(left letters, i, right letters)``; the tensor has
    one axis per coefficient slot of the left word followed by one per slot
    of the right word.  The pairing is C-bilinear in the two sides, so
    ``(p b) e_i q`` and ``p e_i (b q)`` are different elements.
    """

    __array_priority__ = 100

    def __init__(self, ctx: AlgebraContext, terms: Mapping | None = None):
        self.ctx = ctx
        self.terms: dict = {}
        for (L, i, R), T in (terms or {}).items():
            key = (tuple(int(x) for x in L), int(i), tuple(int(x) for x in R))
            T = np.asarray(T, dtype=complex)
            if T.shape != (ctx.dim,) * (len(L) + len(R) + 2):
                raise ValidationError(f"tensor for {key} has shape {T.shape}")
            _merge(self.terms, key, T)
        self.terms = {k: T for k, T in self.terms.items() if np.abs(T).max() > ctx.tol.zero}

    @classmethod
    def zero(cls, ctx):
        return cls(ctx)

    @classmethod
    def from_triple(cls, p: BPolynomial, i: int, q: BPolynomial):
        """``p e_i q``."""
        terms: dict = {}
        for L, A in p.terms.items():
            for R, B in q.terms.items():
                _merge(terms, (L, i, R), np.multiply.outer(A, B))
        return cls(p.ctx, terms)

    @classmethod
    def generator(cls, ctx, i: int):
        """``e_i = 1 e_i 1``."""
        one = BPolynomial.constant(ctx)
        return cls.from_triple(one, i, one)

    def __add__(self, other):
        terms = {k: T.copy() for k, T in self.terms.items()}
        for k, T in other.terms.items():
            _merge(terms, k, T)
        return DerivTensor(self.ctx, terms)

    def __neg__(self):
        return DerivTensor(self.ctx, {k: -T for k, T in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        """Right action by a polynomial or a scalar."""
        if np.isscalar(other):
            return DerivTensor(self.ctx, {k: other * T for k, T in self.terms.items()})
        terms: dict = {}
        for (L, i, R), T in self.terms.items():
            for K, B in other.terms.items():
                _merge(terms, (L, i, R + K), _junction(self.ctx, T, B))
        return DerivTensor(self.ctx, terms)

    def __rmul__(self, other):
        """Left action by a polynomial or a scalar."""
        if np.isscalar(other):
            return self * other
        terms: dict = {}
        for K, A in other.terms.items():
            for (L, i, R), T in self.terms.items():
                _merge(terms, (K + L, i, R), _junction(self.ctx, A, T))
        return DerivTensor(self.ctx, terms)

    def J(self) -> "DerivTensor":
        """Conjugate-linear involution ``p e_i q -> q^* e_i p^*``."""
        return DerivTensor(self.ctx, {(R[::-1], i, L[::-1]): _star_tensor(self.ctx, T)
                                      for (L, i, R), T in self.terms.items()})

    def max_abs_difference(self, other: "DerivTensor") -> float:
        worst = 0.0
        for k in set(self.terms) | set(other.terms):
            a = self.terms.get(k, 0.0)
            b = other.terms.get(k, 0.0)
            worst = max(worst, float(np.abs(np.asarray(a) - np.asarray(b)).max()))
        return worst

    def allclose(self, other, tol: float | None = None) -> bool:
        tol = self.ctx.tol.equality if tol is None else tol
        return self.max_abs_difference(other) <= tol

    def __eq__(self, other):
        if not isinstance(other, DerivTensor):
            return NotImplemented
        return self.max_abs_difference(other) == 0.0

    __hash__ = None

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.abs(T).max() <= tol for T in self.terms.values())

    def split(self):
        """Iterate ``(L, i, R, T)`` with ``T`` reshaped to (left slots, right slots)."""
        d = self.ctx.dim
        for (L, i, R), T in sorted(self.terms.items()):
            yield L, i, R, T.reshape(d ** (len(L) + 1), d ** (len(R) + 1))

    def __repr__(self) -> str:
        return f"DerivTensor({len(self.terms)} terms)"


def multiply(p: BPolynomial, q: BPolynomial) -> BPolynomial:
    return p * q


def adjoint(p: BPolynomial) -> BPolynomial:
    return p.adjoint()


def eta_derivative(p: BPolynomial) -> DerivTensor:
    """``d(b0 x_{i1} ... x_{id} bd) = sum_k b0 x_{i1} ... b_{k-1} e_{ik} b_k ... bd``.

    The coefficient tensor of each summand is the word tensor itself, split
    after its k-th slot.
    """
    terms: dict = {}
    for letters, T in p.terms.items():
        for k, i in enumerate(letters):
            _merge(terms, (letters[:k], i, letters[k + 1:]), T)
    return DerivTensor(p.ctx, terms)


def conjugation_J(xi: DerivTensor) -> DerivTensor:
    return xi.J()


# -- linearization ---------------------------------------------------------

@dataclass
class LinearPencil:
    """Affine matrix pencil ``L(x) = a0 (x) 1 + sum_i a_i (x) x_i``.

    Row and column 0 form the corner; the Schur complement of the lower
    right block ``Q`` gives ``p = L11 - U Q^{-1} V``.
    """

    a0: np.ndarray
    a: list

    @property
    def k(self) -> int:
        return self.a0.shape[0]

    def evaluate(self, xs) -> np.ndarray:
        m = np.asarray(xs[0]).shape[0]
        out = np.kron(self.a0, np.eye(m))
        for ai, x in zip(self.a, xs):
            out = out + np.kron(ai, np.asarray(x, dtype=complex))
        return out

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return all(np.abs(c - c.conj().T).max() <= tol for c in [self.a0, *self.a])

    def schur_complement(self, xs) -> np.ndarray:
        m = np.asarray(xs[0]).shape[0]
        L = self.evaluate(xs)
        if self.k == 1:
            return L
        L11, U = L[:m, :m], L[:m, m:]
        V, Q = L[m:, :m], L[m:, m:]
        return L11 - U @ np.linalg.solve(Q, V)


def linearize(p: BPolynomial, self_adjoint: bool = True, n_letters: int | None = None) -> LinearPencil:
    """Linear pencil whose Schur complement is ``p``.

    Only scalar coefficients are supported.  Each word ``w = y1 ... yd`` of
    degree at least 2 contributes a block ``Q0 = -1 + N`` with ``y2..y_{d-1}``
    on the superdiagonal of ``N``, so that ``-u Q0^{-1} v = w`` for
    ``u = (y1, 0, ...)`` and ``v = (..., 0, yd)``.  With ``self_adjoint``
    the words are paired with their reverses and the blocks are doubled to
    ``[[0, Q0^*], [Q0, 0]]``, giving a self-adjoint pencil.

    Raises
    ------
    ValidationError
        For non-scalar coefficients, or for a non-self-adjoint ``p`` when
        ``self_adjoint`` is set.
    """
    coeffs = p.scalar_terms()
    if self_adjoint and not p.allclose(p.adjoint()):
        raise ValidationError("polynomial is not self-adjoint")
    if n_letters is None:
        n_letters = 1 + max((i for w in coeffs for i in w), default=0)

    # pencil entries as lists: (row, col, letter or None, value)
    entries: list[tuple[int, int, int | None, complex]] = []
    size = 1
    for w, c in coeffs.items():
        if len(w) == 0:
            entries.append((0, 0, None, c))
        elif len(w) == 1:
            entries.append((0, 0, w[0], c))

    def chain(base, w, transpose=False):
        # Q0 = -1 + N (or its adjoint) on indices base .. base+d-2
        d = len(w)
        for k in range(d - 1):
            r = base + k
            entries.append((r, r, None, -1.0))
        for k in range(d - 2):
            r, s = base + k, base + k + 1
            if transpose:
                r, s = s, r
            entries.append((r, s, w[k + 1], 1.0))

    done = set()
    for w in sorted(coeffs, key=lambda w: (len(w), w)):
        if len(w) < 2 or w in done:
            continue
        c = coeffs[w]
        d = len(w)
        if not self_adjoint:
            A = size
            entries.append((0, A, w[0], c))
            entries.append((A + d - 2, 0, w[-1], 1.0))
            chain(A, w)
            size += d - 1
            continue
        rev = w[::-1]
        done.add(w)
        done.add(rev)
        if rev == w:
            if d == 2:
                # c y^2 = -y (-1/c)^{-1} y with c real
                A = size
                entries += [(0, A, w[0], 1.0), (A, 0, w[0], 1.0), (A, A, None, -1.0 / c.real)]
                size += 1
                continue
            c = c.real / 2  # c w = (c/2)(w + w^*)
        A, B = size, size + d - 1
        entries += [(0, A, w[0], c), (A, 0, w[0], np.conj(c)),
                    (0, B + d - 2, w[-1], 1.0), (B + d - 2, 0, w[-1], 1.0)]
        # lower-right block [[0, Q0^*], [Q0, 0]]
        for k in range(d - 1):
            entries += [(A + k, B + k, None, -1.0), (B + k, A + k, None, -1.0)]
        for k in range(d - 2):
            entries += [(B + k, A + k + 1, w[k + 1], 1.0), (A + k + 1, B + k, w[k + 1], 1.0)]
        size += 2 * (d - 1)

    a0 = np.zeros((size, size), dtype=complex)
    a = [np.zeros((size, size), dtype=complex) for _ in range(n_letters)]
    for r, s, letter, val in entries:
        if letter is None:
            a0[r, s] += val
        else:
            a[letter][r, s] += val
    return LinearPencil(a0, a)


def random_hermitian(rng, m: int) -> np.ndarray:
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return (g + g.conj().T) / 2


def schur_defect(pencil: LinearPencil, p: BPolynomial, rng, trials: int = 10, m: int = 4,
                 n_letters: int | None = None) -> float:
    """Worst relative defect of the Schur complement against ``p`` at random
    self-adjoint matrix tuples."""
    n_letters = n_letters or len(pencil.a)
    worst = 0.0
    for _ in range(trials):
        xs = [random_hermitian(rng, m) for _ in range(n_letters)]
        direct = p.evaluate(xs)
        schur = pencil.schur_complement(xs)
        scale = max(np.linalg.norm(direct, 2), 1e-300)
        worst = max(worst, float(np.linalg.norm(schur - direct, 2) / scale))
    return worst
