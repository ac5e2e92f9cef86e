"""Covariance matrices ``eta = (eta_ij)``: completely positive maps
``B -> B (x) M_I(C)``.

Every covariance is stored canonically by its action on the basis of B::

    eta_ij(basis[g]) = sum_a coef[i, j, a, g] * basis[a]

and is always precomposed with ``E_B`` when fed an ambient element.  Kraus
operators, when known, are kept for reference.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError
from .matalg import AlgebraContext, ValidationReport


class CovarianceMatrix:
    """A linear map ``eta: B -> B (x) M_I(C)`` with entries ``eta_ij``.

    Parameters
    ----------
    ctx : AlgebraContext
    coef : ndarray, shape (I, I, dim B, dim B)
        Coordinate matrices of the entries, ``coef[i, j] @ coords(b)`` being
        the coordinates of ``eta_ij(b)``.
    kraus : list of ndarray, optional
        Kraus operators of shape ``(n * I, n)`` that produced ``coef``.
    """

    def __init__(self, ctx: AlgebraContext, coef, kraus=None, label: str = ""):
        coef = np.asarray(coef, dtype=complex)
        I = coef.shape[0]
        if coef.shape != (I, I, ctx.dim, ctx.dim) or I < 1:
            raise ValidationError(
                f"coefficient array must have shape (I, I, {ctx.dim}, {ctx.dim}), got {coef.shape}")
        self.ctx = ctx
        self.coef = coef
        self.index_count = I
        self.kraus = None if kraus is None else [np.asarray(k, dtype=complex) for k in kraus]
        self.label = label

    # -- constructors -----------------------------------------------------

    @classmethod
    def diagonal(cls, ctx: AlgebraContext, index_count: int = 1):
        """``eta_ij = delta_ij E_B``; Kraus operators ``e_i (x) 1_n``."""
        coef = np.zeros((index_count, index_count, ctx.dim, ctx.dim), dtype=complex)
        for i in range(index_count):
            coef[i, i] = np.eye(ctx.dim)
        n = ctx.ambient_dim
        kraus = []
        for i in range(index_count):
            e = np.zeros((index_count, 1))
            e[i, 0] = 1.0
            kraus.append(np.kron(e, np.eye(n)))
        return cls(ctx, coef, kraus, label="diagonal")

    @classmethod
    def zero(cls, ctx: AlgebraContext, index_count: int = 1):
        return cls(ctx, np.zeros((index_count, index_count, ctx.dim, ctx.dim)), [], label="zero")

    @classmethod
    def from_kraus(cls, ctx: AlgebraContext, kraus: Sequence, index_count: int):
        """``eta_ij(b) = sum_m K_{m,i} b K_{m,j}^*`` with ``K_{m,i}`` the i-th
        ``n x n`` block row of ``K_m``.

        Raises
        ------
        ValidationError
            If some image leaves B by more than the equality tolerance.
        """
        n, I = ctx.ambient_dim, int(index_count)
        ks = [np.asarray(k, dtype=complex) for k in kraus]
        for k in ks:
            if k.shape != (n * I, n):
                raise ValidationError(f"Kraus operator must be {(n * I, n)}, got {k.shape}")
        blocks = np.array([k.reshape(I, n, n) for k in ks]).reshape(len(ks), I, n, n)
        images = np.einsum("miab,gbc,mjdc->ijgad", blocks, ctx.basis, blocks.conj())
        defect = max((ctx.membership_defect(im) for im in images.reshape(-1, n, n)), default=0.0)
        if defect > ctx.tol.equality:
            raise ValidationError(
                f"Kraus images leave B (projection defect {defect:.3e})")
        coef = ctx.coords(images).transpose(0, 1, 3, 2)
        return cls(ctx, coef, ks, label="kraus")

    @classmethod
    def from_table(cls, ctx: AlgebraContext, table):
        """Entrywise constructor: ``table[i][j]`` is the ``dim B x dim B``
        coordinate matrix of ``eta_ij``.  Complete positivity is not
        guaranteed; run :func:`check_completely_positive`."""
        return cls(ctx, np.asarray(table, dtype=complex), label="table")

    @classmethod
    def from_maps(cls, ctx: AlgebraContext, maps):
        """``maps[i][j]`` is a callable ``B -> B`` on ``n x n`` matrices."""
        I = len(maps)
        coef = np.zeros((I, I, ctx.dim, ctx.dim), dtype=complex)
        for i in range(I):
            for j in range(I):
                for g, b in enumerate(ctx.basis):
                    coef[i, j, :, g] = ctx.coords(maps[i][j](b))
        return cls(ctx, coef, label="maps")

    @classmethod
    def random_kraus(cls, ctx: AlgebraContext, index_count: int, n_ops: int, rng,
                     scale: float = 1.0):
        """Random CP covariance with Kraus blocks drawn from B, so images stay in B."""
        I = index_count
        kraus = []
        for _ in range(n_ops):
            blocks = [ctx.random_element(rng) * np.sqrt(scale / n_ops) for _ in range(I)]
            kraus.append(np.vstack(blocks))
        return cls.from_kraus(ctx, kraus, I)

    # -- evaluation -------------------------------------------------------

    def entry_coords(self, i: int, j: int, c) -> np.ndarray:
        """Coordinates of ``eta_ij(b)`` from the coordinates of ``b``."""
        self._check_index(i, j)
        return self.coef[i, j] @ np.asarray(c)

    def entry(self, i: int, j: int, b) -> np.ndarray:
        """``eta_ij(E_B(b))`` as an ``n x n`` matrix."""
        self._check_index(i, j)
        return self.ctx.from_coords(self.coef[i, j] @ self.ctx.coords(self.ctx.check(b)))

    def matrix(self, b) -> np.ndarray:
        """Block matrix ``(eta_ij(b))_{ij}`` of size ``n I``."""
        I, n = self.index_count, self.ctx.ambient_dim
        out = np.zeros((I * n, I * n), dtype=complex)
        for i in range(I):
            for j in range(I):
                out[i * n:(i + 1) * n, j * n:(j + 1) * n] = self.entry(i, j, b)
        return out

    def unit_norm(self) -> float:
        """Operator norm of ``(eta_ij(1))``."""
        return float(np.linalg.norm(self.matrix(self.ctx.identity()), 2))

    def _check_index(self, i, j):
        if not (0 <= i < self.index_count and 0 <= j < self.index_count):
            raise IndexError(f"index ({i}, {j}) outside 0..{self.index_count - 1}")

    # -- algebra of covariances --------------------------------------------

    def __add__(self, other: "CovarianceMatrix") -> "CovarianceMatrix":
        if other.ctx is not self.ctx or other.index_count != self.index_count:
            raise ValidationError("covariances live over different algebras or index sets")
        kraus = None
        if self.kraus is not None and other.kraus is not None:
            kraus = self.kraus + other.kraus
        return CovarianceMatrix(self.ctx, self.coef + other.coef, kraus, label="sum")

    def scaled(self, t: float) -> "CovarianceMatrix":
        """``t * eta`` for ``t >= 0`` (keeps a Kraus form)."""
        if t < 0:
            raise ValidationError("covariances can only be scaled by non-negative numbers")
        kraus = None if self.kraus is None else [np.sqrt(t) * k for k in self.kraus]
        return CovarianceMatrix(self.ctx, t * self.coef, kraus, label=f"{t}*{self.label}")

    def __repr__(self) -> str:
        return f"CovarianceMatrix(|I|={self.index_count}, {self.label or 'custom'})"


def block_diagonal(*etas: CovarianceMatrix) -> CovarianceMatrix:
    """Covariance on the disjoint union of the index sets, zero off the blocks."""
    ctx = etas[0].ctx
    if any(e.ctx is not ctx for e in etas):
        raise ValidationError("block_diagonal needs covariances over the same algebra")
    I = sum(e.index_count for e in etas)
    coef = np.zeros((I, I, ctx.dim, ctx.dim), dtype=complex)
    off = 0
    for e in etas:
        k = e.index_count
        coef[off:off + k, off:off + k] = e.coef
        off += k
    return CovarianceMatrix(ctx, coef, label="block-diagonal")


def eta_entry(eta: CovarianceMatrix, i: int, j: int, b) -> np.ndarray:
    return eta.entry(i, j, b)


def tau_symmetry_defects(eta: CovarianceMatrix) -> np.ndarray:
    """``D[i, j, a, g] = tau(eta_ij(b_a) b_g) - tau(b_a eta_ji(b_g))``."""
    Q = eta.ctx.pairing
    return (np.einsum("ijca,cg->ijag", eta.coef, Q)
            - np.einsum("ac,jicg->ijag", Q, eta.coef))


def check_tau_symmetric(eta: CovarianceMatrix, tol: float | None = None) -> ValidationReport:
    tol = eta.ctx.tol.equality if tol is None else tol
    rep = ValidationReport("tau-symmetry")
    rep.add("tau-symmetry", np.abs(tau_symmetry_defects(eta)).max(), tol)
    return rep


def choi_matrix(eta: CovarianceMatrix) -> np.ndarray:
    """Choi matrix ``sum_pq E_pq (x) eta(E_B(E_pq))`` of size ``n * n I``."""
    ctx = eta.ctx
    n, I = ctx.ambient_dim, eta.index_count
    units = np.zeros((n, n, n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            units[p, q, p, q] = 1.0
    # images[p, q, i, j] are the coordinates of eta_ij(E_B(E_pq))
    img = np.einsum("ijag,pqg->pqija", eta.coef, ctx.coords(units))
    mats = np.einsum("pqija,axy->pqixjy", img, ctx.basis).reshape(n, n, I * n, I * n)
    return mats.transpose(0, 2, 1, 3).reshape(n * I * n, n * I * n)


def check_completely_positive(eta: CovarianceMatrix, slack: float | None = None) -> ValidationReport:
    """Minimum eigenvalue of the Choi matrix of ``eta o E_B``."""
    ctx = eta.ctx
    slack = ctx.tol.positivity if slack is None else slack
    C = choi_matrix(eta)
    rep = ValidationReport("complete-positivity")
    herm = np.abs(C - C.conj().T).max() if C.size else 0.0
    rep.add("choi-hermitian", herm, ctx.tol.equality)
    w = np.linalg.eigvalsh((C + C.conj().T) / 2) if C.size else np.zeros(1)
    scale = max(1.0, float(np.abs(w).max()))
    rep.add("choi-min-eigenvalue", max(0.0, -w.min()), slack * scale)
    rep.min_eigenvalue = float(w.min())
    return rep


def check_image_in_B(eta: CovarianceMatrix) -> ValidationReport:
    """Images of Kraus-built covariances must lie in B (hard constraint at
    construction; reported here for completeness)."""
    rep = ValidationReport("image-in-B")
    ctx = eta.ctx
    worst = 0.0
    if eta.kraus:
        n, I = ctx.ambient_dim, eta.index_count
        blocks = np.array([k.reshape(I, n, n) for k in eta.kraus])
        images = np.einsum("miab,gbc,mjdc->ijgad", blocks, ctx.basis, blocks.conj())
        worst = max(ctx.membership_defect(im) for im in images.reshape(-1, n, n))
    rep.add("image-in-B", worst, ctx.tol.equality)
    return rep


def symmetrize(eta: CovarianceMatrix) -> tuple[CovarianceMatrix, ValidationReport]:
    """Average each entry with the tau-transpose of the mirrored entry.

    ``eta~_ij = (eta_ij + T(eta_ji)) / 2`` where ``T(phi)`` is the map with
    ``tau(phi(a) b) = tau(a T(phi)(b))``.  The result is tau-symmetric by
    construction; complete positivity is re-checked and reported.
    """
    ctx = eta.ctx
    Q = ctx.pairing
    Qinv = np.linalg.inv(Q)
    # coordinate form of T(phi) is Q^{-1} A^T Q
    mirrored = np.einsum("ac,jidc,dg->ijag", Qinv, eta.coef, Q)
    out = CovarianceMatrix(ctx, (eta.coef + mirrored) / 2, label=f"sym({eta.label})")
    out.kraus = _symmetrized_kraus(eta, out)
    rep = ValidationReport("symmetrize")
    for sub in (check_tau_symmetric(out), check_completely_positive(out)):
        rep.checks.extend(sub.checks)
    return out, rep


def _symmetrized_kraus(eta, target):
    """Kraus form of the symmetrization when every Kraus block lies in B.

    Then the mirrored map has Kraus blocks ``K_{m,i}^*`` and the average
    keeps a Kraus form; it is returned only if it reproduces ``target``.
    """
    if not eta.kraus:
        return None
    ctx = eta.ctx
    n, I = ctx.ambient_dim, eta.index_count
    blocks = [k.reshape(I, n, n) for k in eta.kraus]
    if max(ctx.membership_defect(b) for bl in blocks for b in bl) > ctx.tol.equality:
        return None
    kraus = [np.sqrt(0.5) * k for k in eta.kraus]
    kraus += [np.sqrt(0.5) * np.vstack([b.conj().T for b in bl]) for bl in blocks]
    try:
        cand = CovarianceMatrix.from_kraus(ctx, kraus, I)
    except ValidationError:
        return None
    if np.abs(cand.coef - target.coef).max() > ctx.tol.equality:
        return None
    return kraus


def validate_covariance(eta: CovarianceMatrix) -> ValidationReport:
    """Complete positivity, tau-symmetry and image-in-B in one report."""
    rep = ValidationReport(f"covariance {eta.label}")
    for sub in (check_completely_positive(eta), check_tau_symmetric(eta), check_image_in_B(eta)):
        rep.checks.extend(sub.checks)
    return rep
