"""B-valued moments and cumulants over non-crossing partitions.

Arguments of moments and cumulants are words ``b0 y1 b1 ... yd bd`` in
abstract letters ``y`` supplied by a moment oracle.  An oracle exposes

``ctx``
    the algebra context of B;
``moment_tensor(letters)``
    coordinates of ``E_B(b_{a0} y1 b_{a1} ... yd b_{ad})`` for all basis
    indices, shape ``(dim B,) * (d + 1) + (dim B,)``.

Cumulants are stored the same way: ``cumulant_tensor(letters)`` holds the
coordinates of ``kappa_d(y1 b_{a1} (x) y2 b_{a2} (x) ... (x) yd)`` for all
interior basis indices ``a1 .. a_{d-1}``; the outer coefficients are pulled
out by bimodularity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .covmap import CovarianceMatrix
from .errors import SizeLimitError, ValidationError
from .matalg import AlgebraContext
from .ncpart import MAX_ENUMERATION_DEGREE, NCPartition, enumerate_nc, nc_pairings, split_interval_block
from .report import FAIL, VerificationReport

_SUBSCRIPTS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def contract_slots(ctx: AlgebraContext, T: np.ndarray, coeffs: Sequence) -> np.ndarray:
    """Contract the leading coefficient axes of ``T`` with coordinate vectors."""
    out = T
    for c in coeffs:
        out = np.tensordot(np.asarray(c), out, axes=([0], [0]))
    return out


# -- moment oracles ----------------------------------------------------------

class MatrixMoments:
    """Moments of fixed ambient matrices: letter ``k`` stands for ``matrices[k]``."""

    def __init__(self, ctx: AlgebraContext, matrices: Mapping[Hashable, np.ndarray]):
        self.ctx = ctx
        self.matrices = {k: ctx.check(m) for k, m in matrices.items()}
        self._cache: dict = {}

    def moment_tensor(self, letters: Sequence) -> np.ndarray:
        letters = tuple(letters)
        if letters not in self._cache:
            ctx = self.ctx
            state = ctx.basis  # (a_d, n, n) read from the right
            for k in reversed(letters):
                state = np.einsum("ij,...jk->...ik", self.matrices[k], state)
                state = np.einsum("aij,...jk->a...ik", ctx.basis, state)
            self._cache[letters] = ctx.coords(state)
        return self._cache[letters]

    def moment(self, letters: Sequence, coeffs: Sequence) -> np.ndarray:
        """Coordinates of ``E_B(b0 a_{l1} b1 ... bd)`` for coordinate vectors ``b``."""
        ctx = self.ctx
        prod = ctx.from_coords(coeffs[0])
        for k, c in zip(letters, coeffs[1:]):
            prod = prod @ self.matrices[k] @ ctx.from_coords(c)
        return ctx.coords(prod)


class FockMoments:
    """Moment oracle backed by a :class:`~opfree.fock.FockModel`."""

    def __init__(self, model):
        self.model = model
        self.ctx = model.ctx
        self._cache: dict = {}

    def moment_tensor(self, letters: Sequence) -> np.ndarray:
        letters = tuple(letters)
        if letters not in self._cache:
            self._cache[letters] = self.model.basis_moments(letters)
        return self._cache[letters]

    def moment(self, letters, coeffs):
        return contract_slots(self.ctx, self.moment_tensor(letters), coeffs)


# -- multiplicative functions -------------------------------------------------

@dataclass(frozen=True)
class Arg:
    """Operand ``left * y_letter * right`` with ``left``, ``right`` in B (coordinates)."""

    letter: Hashable
    left: np.ndarray
    right: np.ndarray


def word_args(ctx: AlgebraContext, letters: Sequence, coeffs: Sequence) -> list[Arg]:
    """Split ``b0 y1 b1 ... yd bd`` into operands ``b0 y1 b1, y2 b2, ..., yd bd``."""
    if len(coeffs) != len(letters) + 1:
        raise ValidationError("a word with d letters needs d+1 coefficients")
    args = []
    for k, letter in enumerate(letters):
        left = np.asarray(coeffs[0]) if k == 0 else ctx.unit
        args.append(Arg(letter, left, np.asarray(coeffs[k + 1])))
    return args


class MultiplicativeFunction:
    """Family of B-bimodule kernels ``f^(d)`` on operand lists."""

    def __init__(self, ctx: AlgebraContext):
        self.ctx = ctx

    def kernel(self, args: Sequence[Arg]) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


def _normalize(ctx, args: Sequence[Arg]):
    """Letters, outer coefficients and balanced interior coefficients."""
    mul = ctx.mul_coords
    letters = tuple(a.letter for a in args)
    interior = [mul(args[k].right, args[k + 1].left) for k in range(len(args) - 1)]
    return letters, args[0].left, interior, args[-1].right


class ExpectationFunction(MultiplicativeFunction):
    """``f^(d)(a1 (x) ... (x) ad) = E_B(a1 ... ad)`` from a moment oracle."""

    def __init__(self, oracle):
        super().__init__(oracle.ctx)
        self.oracle = oracle

    def kernel(self, args):
        letters, left, interior, right = _normalize(self.ctx, args)
        coeffs = [left, *interior, right]
        if hasattr(self.oracle, "moment"):
            return self.oracle.moment(letters, coeffs)
        return contract_slots(self.ctx, self.oracle.moment_tensor(letters), coeffs)


def eval_multiplicative(f: MultiplicativeFunction, pi: NCPartition, args: Sequence[Arg]) -> np.ndarray:
    """``f^(pi)[a1 (x) ... (x) ad]`` by peeling interval blocks.

    The innermost interval block (smallest start) is collapsed by the kernel
    of its size and the value is multiplied into the right coefficient of
    the operand to its left, or into the left coefficient of the next
    operand when the block starts at 1.
    """
    if len(args) != pi.d:
        raise ValidationError(f"partition of {pi.d} points applied to {len(args)} operands")
    ctx = f.ctx
    args = list(args)
    while True:
        (k, l), rest = split_interval_block(pi)
        value = f.kernel(args[k - 1:l])
        remaining = args[:k - 1] + args[l:]
        if not remaining:
            return value
        if k > 1:
            a = remaining[k - 2]
            remaining[k - 2] = Arg(a.letter, a.left, ctx.mul_coords(a.right, value))
        else:
            a = remaining[0]
            remaining[0] = Arg(a.letter, ctx.mul_coords(value, a.left), a.right)
        args, pi = remaining, rest


# -- cumulant tables -------------------------------------------------------------

class CumulantTable(MultiplicativeFunction):
    """Lazily memoized cumulant tensors keyed by letter sequence."""

    def __init__(self, ctx: AlgebraContext, degree_cap: int = MAX_ENUMERATION_DEGREE):
        super().__init__(ctx)
        if degree_cap > MAX_ENUMERATION_DEGREE:
            raise SizeLimitError(f"degree cap {degree_cap} above {MAX_ENUMERATION_DEGREE}")
        self.degree_cap = degree_cap
        self.entries: dict[tuple, np.ndarray] = {}

    def cumulant_tensor(self, letters: Sequence) -> np.ndarray:
        letters = tuple(letters)
        if not 1 <= len(letters) <= self.degree_cap:
            raise SizeLimitError(
                f"cumulant of degree {len(letters)} outside 1..{self.degree_cap}")
        if letters not in self.entries:
            self.entries[letters] = self._compute(letters)
        return self.entries[letters]

    def _compute(self, letters):  # pragma: no cover - interface
        raise NotImplementedError

    def cumulant(self, letters: Sequence, coeffs: Sequence) -> np.ndarray:
        """``kappa_d(b0 y1 b1 (x) y2 b2 (x) ... (x) yd bd)`` in coordinates."""
        K = self.cumulant_tensor(letters)
        mid = contract_slots(self.ctx, K, list(coeffs[1:-1]))
        mul = self.ctx.mul_coords
        return mul(mul(np.asarray(coeffs[0]), mid), np.asarray(coeffs[-1]))

    def kernel(self, args):
        letters, left, interior, right = _normalize(self.ctx, args)
        return self.cumulant(letters, [left, *interior, right])


class MomentCumulants(CumulantTable):
    """Cumulants of a moment oracle via the first-block recursion.

    Grouping the non-crossing partitions by the block ``V`` containing 1,

        E(b0 y1 b1 ... yd bd) = sum_V b0 kappa_s(y_{v1} M_1 (x) ... (x) y_{vs}) M_s,

    where ``M_k`` is the moment of the segment strictly between ``v_k`` and
    ``v_{k+1}`` (including its boundary coefficients).  The term with
    ``V = {1..d}`` is the unknown top cumulant.
    """

    def __init__(self, oracle, degree_cap: int = 6):
        super().__init__(oracle.ctx, degree_cap)
        self.oracle = oracle

    def _segment(self, letters, lo, hi):
        """Tensor over slots ``lo..hi`` of the segment moment (letters lo+1..hi)."""
        if hi == lo:
            return np.eye(self.ctx.dim)
        return self.oracle.moment_tensor(letters[lo:hi])

    def _compute(self, letters):
        ctx = self.ctx
        d = len(letters)
        unit = ctx.unit
        full = self.oracle.moment_tensor(letters)
        # outer slots set to 1: interior axes 1..d-1 remain, then output
        total = np.tensordot(unit, full, axes=([0], [0]))
        total = np.tensordot(total, unit, axes=([d - 1], [0]))
        if d == 1:
            return total
        mu = ctx.structure
        sub = _SUBSCRIPTS
        slot = {k: sub[k] for k in range(1, d)}  # interior slot labels
        for mask in range(1 << (d - 1)):
            V = [1] + [k + 2 for k in range(d - 1) if mask >> k & 1]
            if len(V) == d:
                continue  # the unknown term
            s = len(V)
            K = self.cumulant_tensor([letters[v - 1] for v in V])
            operands, specs = [K], []
            m_labels = [sub[26 + k] for k in range(s - 1)]  # summed m_k indices
            k_spec = "".join(m_labels) + "Z"
            specs.append(k_spec)
            for k in range(s - 1):
                lo, hi = V[k], V[k + 1] - 1
                operands.append(self._segment(letters, lo, hi))
                specs.append("".join(slot[j] for j in range(lo, hi + 1)) + m_labels[k])
            # tail: slots V[-1]..d with slot d fixed to the unit
            lo = V[-1]
            if lo == d:
                tail = unit
                tail_spec = "Y"
            else:
                tail = np.tensordot(self.oracle.moment_tensor(letters[lo:]), unit,
                                    axes=([d - lo], [0]))
                tail_spec = "".join(slot[j] for j in range(lo, d)) + "Y"
            operands += [tail, mu]
            specs += [tail_spec, "ZYX"]
            out_spec = "".join(slot[j] for j in range(1, d)) + "X"
            term = np.einsum(",".join(specs) + "->" + out_spec, *operands, optimize=True)
            total = total - term
        return total


class SemicircularCumulants(CumulantTable):
    """``kappa_2(s_i b (x) s_j) = eta_ij(b)``; every other cumulant vanishes."""

    def __init__(self, eta: CovarianceMatrix, degree_cap: int = MAX_ENUMERATION_DEGREE):
        super().__init__(eta.ctx, degree_cap)
        self.eta = eta

    def _compute(self, letters):
        d = len(letters)
        shape = (self.ctx.dim,) * d
        if d != 2:
            return np.zeros(shape, dtype=complex)
        i, j = letters
        return self.eta.coef[i, j].T.copy()


class ConvolvedCumulants(CumulantTable):
    """Cumulants of ``x_i + sqrt(t) s_i`` with ``s`` semicircular and free from ``x``.

    Mixed cumulants vanish, so the table is ``kappa(x) + t kappa_2(s)``.
    """

    def __init__(self, base: CumulantTable, eta: CovarianceMatrix, t: float):
        super().__init__(base.ctx, base.degree_cap)
        if t < 0:
            raise ValidationError("convolution time must be non-negative")
        self.base, self.eta, self.t = base, eta, float(t)
        self._semi = SemicircularCumulants(eta, base.degree_cap)

    def _compute(self, letters):
        out = np.array(self.base.cumulant_tensor(letters), dtype=complex)
        if len(letters) == 2 and self.t:
            out = out + self.t * self._semi.cumulant_tensor(letters)
        return out


def moments_to_cumulants(oracle, d_max: int = 6) -> MomentCumulants:
    """Cumulant table of ``oracle`` for words up to degree ``d_max`` (lazy)."""
    if d_max > MAX_ENUMERATION_DEGREE:
        raise SizeLimitError(f"degree {d_max} above {MAX_ENUMERATION_DEGREE}")
    return MomentCumulants(oracle, d_max)


def cumulants_to_moments(table: CumulantTable, letters: Sequence, coeffs: Sequence) -> np.ndarray:
    """``E_B(b0 y1 ... yd bd) = sum over NC(d) of kappa_pi`` in coordinates."""
    d = len(letters)
    if d == 0:
        return np.asarray(coeffs[0], dtype=complex)
    if d > table.degree_cap:
        raise SizeLimitError(f"table covers degree <= {table.degree_cap}, asked {d}")
    args = word_args(table.ctx, letters, coeffs)
    return sum(eval_multiplicative(table, pi, args) for pi in enumerate_nc(d))


def free_convolve_semicircular(x_cumulants: CumulantTable, eta: CovarianceMatrix, t: float,
                               d_max: int | None = None) -> ConvolvedCumulants:
    return ConvolvedCumulants(x_cumulants, eta, t)


# -- direct semicircular oracle -------------------------------------------------

def semicircular_moment_oracle(eta: CovarianceMatrix, letters: Sequence[int], coeffs: Sequence) -> np.ndarray:
    """``E_B(b0 s_{i1} b1 ... s_{id} bd)`` as a sum over non-crossing pairings.

    Each pairing is evaluated by repeatedly collapsing an adjacent pair:
    ``c s_i b s_j c'`` becomes ``c eta_ij(b) c'``.  Coefficients are ``n x n``
    matrices in B; odd degrees give 0.
    """
    ctx = eta.ctx
    d = len(letters)
    coeffs = [ctx.check(c) for c in coeffs]
    if len(coeffs) != d + 1:
        raise ValidationError("a word with d letters needs d+1 coefficients")
    total = np.zeros((ctx.ambient_dim,) * 2, dtype=complex)
    if d % 2:
        return total
    for pi in nc_pairings(d):
        cs, ls = list(coeffs), list(letters)
        while pi.d:
            (k, l), pi = split_interval_block(pi)
            inner = eta.entry(ls[k - 1], ls[l - 1], cs[k])
            merged = cs[k - 1] @ inner @ cs[l]
            cs = cs[:k - 1] + [merged] + cs[l + 1:]
            ls = ls[:k - 1] + ls[l:]
        total += cs[0]
    return total


def semicircular_moment_tensor(eta: CovarianceMatrix, letters: Sequence[int]) -> np.ndarray:
    """:func:`semicircular_moment_oracle` on every basis coefficient tuple."""
    ctx = eta.ctx
    d = len(letters)
    out = np.zeros((ctx.dim,) * (d + 1) + (ctx.dim,), dtype=complex)
    if d % 2:
        return out
    for idx in itertools.product(range(ctx.dim), repeat=d + 1):
        out[idx] = ctx.coords(semicircular_moment_oracle(eta, letters, [ctx.basis[a] for a in idx]))
    return out


# -- checks ------------------------------------------------------------------

def _basis_label(ctx, letters, idx, names=None) -> str:
    names = names or {}
    parts = []
    for pos, letter in enumerate(letters):
        name = names.get(letter, f"x{letter + 1}" if isinstance(letter, (int, np.integer)) else str(letter))
        coeff = f" {ctx.names[idx[pos]]}" if pos < len(idx) else ""
        parts.append(name + coeff)
    return "kappa_%d(%s)" % (len(letters), " (x) ".join(parts))


def check_amalgamated_freeness(oracle_or_table, families: Mapping[Hashable, Hashable], d_max: int = 6,
                               tol: float = 1e-10, names=None) -> VerificationReport:
    """All mixed cumulants (letters from at least two families) up to ``d_max``."""
    table = oracle_or_table if isinstance(oracle_or_table, CumulantTable) \
        else MomentCumulants(oracle_or_table, d_max)
    ctx = table.ctx
    rep = VerificationReport("freeness")
    labels = sorted(families, key=str)
    if len(set(families.values())) < 2:
        rep.add("mixed-cumulants", "freeness with amalgamation: mixed cumulants vanish", 0.0, tol,
                detail="single family; vacuous")
        return rep
    for d in range(2, d_max + 1):
        worst, witness = 0.0, ""
        for letters in itertools.product(labels, repeat=d):
            if len({families[k] for k in letters}) < 2:
                continue
            K = table.cumulant_tensor(letters)
            norms = np.linalg.norm(K.reshape(-1, ctx.dim), axis=1)
            pos = int(np.argmax(norms))
            if norms[pos] > worst:
                worst = float(norms[pos])
                idx = np.unravel_index(pos, (ctx.dim,) * (d - 1)) if d > 1 else ()
                witness = _basis_label(ctx, letters, idx, names)
        rep.add(f"mixed-cumulants-degree-{d}", "freeness with amalgamation: mixed cumulants vanish",
                worst, tol, detail=f"witness {witness}" if worst > tol else "")
    return rep


def xi_letter(i: int):
    return ("xi", i)


def check_conjugate_cumulants(oracle, eta: CovarianceMatrix, d_max: int = 5, tol: float = 1e-9,
                              xi=xi_letter) -> VerificationReport:
    """Cumulant characterization of a conjugate system.

    With ``xi(i)`` the letter of the candidate ``xi_i`` and integer letters
    the variables ``x_j``, checks

    * degree 0: ``kappa_1(xi_i b) = 0``;
    * degree 1: ``kappa_2(xi_i (x) b x_j) = eta_ij(b)``;
    * degree d >= 2: ``kappa_{d+1}(xi_i (x) b1 x_{j1} (x) ... (x) bd x_{jd}) = 0``.

    ``environment['first_failure']`` holds the smallest failing degree.
    """
    ctx = eta.ctx
    I = eta.index_count
    table = MomentCumulants(oracle, d_max + 1)
    rep = VerificationReport("conjugate-cumulants")
    first = None
    anchor = "conjugate system via cumulants"
    for d in range(0, d_max + 1):
        worst = 0.0
        for i in range(I):
            for js in itertools.product(range(I), repeat=d):
                letters = (xi(i),) + js
                K = table.cumulant_tensor(letters)
                if d == 0:
                    # kappa_1(xi_i b) = kappa_1(xi_i) b for every basis element b
                    vals = np.einsum("x,xby->by", K, ctx.structure)
                elif d == 1:
                    vals = K - eta.coef[i, js[0]].T
                else:
                    vals = K
                worst = max(worst, float(np.abs(vals).max()))
        family = {0: "kappa_1(xi_i b) = 0", 1: "kappa_2(xi_i, b x_j) = eta_ij(b)"}.get(
            d, f"kappa_{d + 1}(xi_i, b1 x_j1, ...) = 0")
        rec = rep.add(f"degree-{d}", anchor, worst, tol, detail=family)
        if rec.status == FAIL and first is None:
            first = d
    rep.environment["first_failure"] = "none" if first is None else first
    rep.environment["max_degree"] = d_max
    return rep
