"""Finite-dimensional *-algebras: a subalgebra B inside M_n(C).

B is presented by an explicit matrix basis.  The trace on the ambient
algebra is ``tau(a) = tr(D a)`` for a positive density ``D`` commuting
with B; the conditional expectation onto B is the tau-orthogonal
projection, computed through the cached inverse Gram matrix.

Elements of B and of the ambient algebra are plain ``numpy`` arrays of
shape ``(n, n)``.  Coordinates of an element of B are taken with respect
to ``basis``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by a context and everything built on it."""

    equality: float = 1e-10
    positivity: float = 1e-12
    null_relative: float = 1e-10  # relative eigenvalue cutoff for Gram quotients
    zero: float = 1e-14  # coefficients below this are pruned from normal forms
    conditioning: float = 1e12


@dataclass
class Check:
    name: str
    defect: float
    tolerance: float
    ok: bool
    level: str = "error"  # "error" or "warning"

    def __str__(self) -> str:
        flag = "ok" if self.ok else ("WARN" if self.level == "warning" else "FAIL")
        return f"{self.name}: defect={self.defect:.3e} tol={self.tolerance:.1e} [{flag}]"


@dataclass
class ValidationReport:
    """Outcome of a structural validation; never raised, only returned."""

    subject: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name, defect, tolerance, level="error", ok=None):
        defect = float(defect)
        if ok is None:
            ok = defect <= tolerance
        self.checks.append(Check(name, defect, tolerance, bool(ok), level))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks if c.level == "error")

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok and c.level == "error"]

    @property
    def warnings(self) -> list[Check]:
        return [c for c in self.checks if not c.ok and c.level == "warning"]

    def worst(self, name: str) -> float:
        return max((c.defect for c in self.checks if c.name == name), default=0.0)

    def __str__(self) -> str:
        lines = [f"{self.subject}: {'ok' if self.ok else 'FAILED'}"]
        lines += ["  " + str(c) for c in self.checks]
        return "\n".join(lines)


def _as_matrix(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.shape != (n, n):
        raise ValidationError(f"expected a {n}x{n} matrix, got shape {a.shape}")
    return a


class AlgebraContext:
    """A unital *-subalgebra ``B`` of ``M_n(C)`` with a faithful trace.

    Parameters
    ----------
    basis : sequence of (n, n) arrays
        Linear basis of B.
    density : (n, n) array, optional
        Positive definite matrix with unit trace; ``tau(a) = tr(density @ a)``.
        Defaults to ``I / n`` (normalized trace).
    tol : Tolerances, optional
    names : sequence of str, optional
        Display names for the basis elements.

    Notes
    -----
    The context is treated as immutable once built.  Structural properties
    are not enforced here; call :func:`validate_subalgebra` for a report.
    """

    def __init__(self, basis, density=None, tol: Tolerances | None = None,
                 names: Sequence[str] | None = None, trace_weights=None):
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2] or len(basis) == 0:
            raise ValidationError("basis must be a non-empty stack of square matrices")
        self.basis = basis
        self.ambient_dim = n = basis.shape[1]
        self.dim = len(basis)
        self.tol = tol or Tolerances()
        if density is None:
            density = np.eye(n) / n
        self.density = _as_matrix(density, n)
        self.trace_weights = None if trace_weights is None else tuple(trace_weights)
        self.names = list(names) if names is not None else [f"b{k}" for k in range(self.dim)]

        # sesquilinear Gram <b_a, b_c> = tau(b_a^* b_c)
        self.gram = np.einsum("xy,ayz,czx->ac", self.density,
                              basis.conj().transpose(0, 2, 1), basis)
        try:
            self.gram_inverse = np.linalg.inv(self.gram)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("Gram matrix of the basis is singular") from exc
        # coordinate functional: coords(a) = G^{-1} [tau(b_a^* a)]_a
        self._dual = np.einsum("ac,cxy->axy", self.gram_inverse,
                               np.einsum("xy,cyz->cxz", self.density,
                                         basis.conj().transpose(0, 2, 1)))
        self.unit = self.coords(np.eye(n))
        self.structure = self.coords(np.einsum("aij,bjk->abik", basis, basis))
        self.star = self.coords(basis.conj().transpose(0, 2, 1))
        # bilinear pairing Q[a, c] = tau(b_a b_c)
        self.pairing = np.einsum("xy,ayz,czx->ac", self.density, basis, basis)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_blocks(cls, block_sizes: Sequence[int], multiplicities=None,
                    weights=None, tol: Tolerances | None = None):
        """Multi-matrix algebra ``B = (+)_r M_{k_r} (x) 1_{m_r}`` inside ``M_n``.

        ``weights`` are the traces of the block units (default proportional
        to ``k_r * m_r``, i.e. the normalized matrix trace).
        """
        sizes = [int(k) for k in block_sizes]
        mult = [1] * len(sizes) if multiplicities is None else [int(m) for m in multiplicities]
        if len(mult) != len(sizes) or min(sizes + mult) < 1:
            raise ValidationError("block sizes and multiplicities must be positive and aligned")
        n = sum(k * m for k, m in zip(sizes, mult))
        if weights is None:
            weights = [k * m / n for k, m in zip(sizes, mult)]
        weights = np.asarray(weights, dtype=float)
        if len(weights) != len(sizes) or np.any(weights <= 0):
            raise ValidationError("trace weights must be positive, one per block")
        weights = weights / weights.sum()

        basis, names, dens = [], [], np.zeros(n)
        offset = 0
        for r, (k, m) in enumerate(zip(sizes, mult)):
            dens[offset:offset + k * m] = weights[r] / (k * m)
            for p in range(k):
                for q in range(k):
                    unit = np.zeros((k, k))
                    unit[p, q] = 1.0
                    full = np.zeros((n, n), dtype=complex)
                    full[offset:offset + k * m, offset:offset + k * m] = np.kron(unit, np.eye(m))
                    basis.append(full)
                    names.append(f"E{r}_{p}{q}" if len(sizes) > 1 or k > 1 else "1")
            offset += k * m
        ctx = cls(np.array(basis), np.diag(dens), tol=tol, names=names,
                  trace_weights=weights)
        ctx.block_sizes = tuple(sizes)
        ctx.multiplicities = tuple(mult)
        return ctx

    @classmethod
    def scalars(cls, n: int = 1, tol: Tolerances | None = None):
        """``B = C 1`` inside ``M_n`` with the normalized trace."""
        return cls.from_blocks([1], [n], tol=tol)

    # -- basic operations -------------------------------------------------

    def check(self, a) -> np.ndarray:
        return _as_matrix(a, self.ambient_dim)

    def trace(self, a) -> complex:
        """``tau(a)``."""
        a = self.check(a)
        return complex(np.einsum("ij,ji->", self.density, a))

    def inner(self, a, b) -> complex:
        """``<a, b> = tau(a^* b)``."""
        return self.trace(self.check(a).conj().T @ self.check(b))

    def norm2(self, a) -> float:
        return float(np.sqrt(max(self.inner(a, a).real, 0.0)))

    def coords(self, a) -> np.ndarray:
        """Coordinates of ``E_B(a)``; accepts stacks ``(..., n, n)``."""
        a = np.asarray(a, dtype=complex)
        return np.einsum("axy,...yx->...a", self._dual, a)

    def from_coords(self, c) -> np.ndarray:
        return np.einsum("...a,aij->...ij", np.asarray(c), self.basis)

    def conditional_expectation(self, a) -> np.ndarray:
        """tau-orthogonal projection of ``a`` onto B."""
        return self.from_coords(self.coords(self.check(a)))

    def membership_defect(self, a) -> float:
        """Operator-norm distance from ``a`` to its projection onto B."""
        a = np.asarray(a, dtype=complex)
        return float(np.linalg.norm(a - self.conditional_expectation(a), 2))

    def identity(self) -> np.ndarray:
        return np.eye(self.ambient_dim, dtype=complex)

    def mul_coords(self, x, y) -> np.ndarray:
        """Coordinates of the product of two elements given in coordinates."""
        return np.einsum("a,b,abc->c", x, y, self.structure)

    def random_element(self, rng, hermitian=False) -> np.ndarray:
        c = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        b = self.from_coords(c)
        if hermitian:
            b = (b + b.conj().T) / 2
        return b

    def random_unitary(self, rng) -> np.ndarray:
        """Unitary of B: exponential of i times a random Hermitian element."""
        h = self.random_element(rng, hermitian=True)
        w, v = np.linalg.eigh(h)
        return (v * np.exp(1j * w)) @ v.conj().T

    def __repr__(self) -> str:
        return f"AlgebraContext(dim B={self.dim}, ambient M_{self.ambient_dim})"


def trace(ctx: AlgebraContext, a) -> complex:
    return ctx.trace(a)


def conditional_expectation(ctx: AlgebraContext, a) -> np.ndarray:
    return ctx.conditional_expectation(a)


def validate_subalgebra(ctx: AlgebraContext) -> ValidationReport:
    """Check *-closure, product closure, unit membership, Gram conditioning,
    and the trace axioms restricted to B.  Never raises."""
    rep = ValidationReport("subalgebra")
    tol = ctx.tol.equality
    basis = ctx.basis
    star = basis.conj().transpose(0, 2, 1)
    rep.add("star-closure", max(ctx.membership_defect(s) for s in star), tol)
    prods = np.einsum("aij,bjk->abik", basis, basis).reshape(-1, ctx.ambient_dim, ctx.ambient_dim)
    rep.add("product-closure", max(ctx.membership_defect(p) for p in prods), tol)
    rep.add("unit-membership", ctx.membership_defect(ctx.identity()), tol)

    w = np.linalg.eigvalsh((ctx.gram + ctx.gram.conj().T) / 2)
    rep.add("gram-positive", max(0.0, -w.min()), 0.0, ok=w.min() > 0)
    cond = w.max() / w.min() if w.min() > 0 else np.inf
    rep.add("gram-conditioning", cond, ctx.tol.conditioning, level="warning")

    rep.add("trace-normalized", abs(ctx.trace(ctx.identity()) - 1), tol)
    dens = ctx.density
    rep.add("density-hermitian", np.linalg.norm(dens - dens.conj().T), tol)
    rep.add("density-positive", max(0.0, -np.linalg.eigvalsh((dens + dens.conj().T) / 2).min()),
            0.0, ok=np.linalg.eigvalsh((dens + dens.conj().T) / 2).min() > 0)
    # traciality on B and bimodularity of E_B both need D to commute with B
    comm = max(np.linalg.norm(dens @ b - b @ dens) for b in basis)
    rep.add("density-commutes-with-B", comm, tol)
    tr_ab = np.einsum("xy,ayz,bzx->ab", dens, basis, basis)
    rep.add("tracial-on-B", np.abs(tr_ab - tr_ab.T).max(), tol)
    return rep
