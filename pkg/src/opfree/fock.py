"""Truncated full Fock space over the bimodule ``B (x)_eta B``.

Level 0 is B with ``<a, b> = tau(a^* b)``.  Level n is spanned by formal
generators ``b_a e_i (x) f_u`` with ``b_a`` a basis element of B, ``i`` an
index and ``f_u`` an orthonormal basis vector of level n-1; the balanced
tensor relation over B is absorbed into ``f_u``.  Generator Gram entries are

    <b_a e_i (x) f_u, b_c e_j (x) f_v> = <f_u, eta_ij(b_a^* b_c) f_v>,

so each level is a Gram quotient: eigenvalues below ``null_relative`` times
the largest one are discarded and the rest give an orthonormal basis.
Every operator is stored in these orthonormal coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .bpoly import BPolynomial
from .covmap import CovarianceMatrix
from .errors import ExactnessError, SizeLimitError, ValidationError
from .matalg import AlgebraContext

#: Default cap on the number of generators summed over all levels.
DEFAULT_DIMENSION_CAP = 20000


@dataclass
class GramQuotient:
    """Orthonormal coordinates for the quotient of a PSD Gram matrix.

    ``R`` maps generator coordinates to orthonormal coordinates and ``P``
    is its right inverse on the non-null part.
    """

    eigenvalues: np.ndarray  # all eigenvalues, ascending
    R: np.ndarray
    P: np.ndarray

    @property
    def dim(self) -> int:
        return self.R.shape[0]


def gram_quotient(G: np.ndarray, null_relative: float, neg_tol: float) -> GramQuotient:
    G = (G + G.conj().T) / 2
    n = G.shape[0]
    if n == 0:
        return GramQuotient(np.zeros(0), np.zeros((0, 0), complex), np.zeros((0, 0), complex))
    w, V = np.linalg.eigh(G)
    top = max(float(w[-1]), 0.0)
    if w[0] < -neg_tol * max(top, 1.0):
        raise ValidationError(
            f"Gram matrix has eigenvalue {w[0]:.3e}; the covariance is not completely positive")
    keep = w > null_relative * top if top > 0 else np.zeros(n, bool)
    lam, Vk = w[keep], V[:, keep]
    R = (np.sqrt(lam)[:, None] * Vk.conj().T)
    P = Vk / np.sqrt(lam)[None, :]
    return GramQuotient(w, R, P)


@dataclass
class Bimodule:
    """Gram quotient of the generators ``b_a e_i b_c`` of ``B (x)_eta B``."""

    ctx: AlgebraContext
    eta: CovarianceMatrix
    generators: list  # (a, i, c) triples
    gram: np.ndarray
    quotient: GramQuotient

    @property
    def dim(self) -> int:
        return self.quotient.dim


def _eta_of_products(ctx: AlgebraContext, eta: CovarianceMatrix) -> np.ndarray:
    """``EP[i, j, a, c]`` = coordinates of ``eta_ij(b_a^* b_c)``."""
    star = ctx.basis.conj().transpose(0, 2, 1)
    prod = ctx.coords(np.einsum("aij,cjk->acik", star, ctx.basis))
    return np.einsum("ijxy,acy->ijacx", eta.coef, prod)


def build_bimodule(ctx: AlgebraContext, eta: CovarianceMatrix) -> Bimodule:
    """Gram matrix ``tau(b_b^* eta_ij(b_a^* b_c) b_d)`` over all generators."""
    I, d = eta.index_count, ctx.dim
    EP = ctx.from_coords(_eta_of_products(ctx, eta))  # (I, I, d, d, n, n)
    star = ctx.basis.conj().transpose(0, 2, 1)
    gram = np.einsum("xy,byz,ijaczw,dwx->aibcjd", ctx.density, star, EP, ctx.basis)
    gram = gram.reshape(d * I * d, d * I * d)
    gens = [(a, i, b) for a in range(d) for i in range(I) for b in range(d)]
    q = gram_quotient(gram, ctx.tol.null_relative, ctx.tol.equality)
    return Bimodule(ctx, eta, gens, gram, q)


class FockModel:
    """Semicircular family ``s_i = L(e_i) + L(e_i)^*`` on the truncated Fock space.

    Parameters
    ----------
    ctx, eta :
        Algebra and covariance.
    depth : int
        Highest level kept.  Moments of degree ``d <= 2 * depth`` are exact.
    cap : int
        Limit on the total number of generators over all levels.
    letters : mapping, optional
        Extra letters given as polynomials in the ``s_i`` (for example a
        perturbed candidate ``s_i + 0.1``); integer letters are the ``s_i``.
    """

    def __init__(self, ctx: AlgebraContext, eta: CovarianceMatrix, depth: int,
                 cap: int = DEFAULT_DIMENSION_CAP):
        if depth < 1:
            raise ValidationError("depth must be at least 1")
        if eta.ctx is not ctx:
            raise ValidationError("covariance belongs to a different context")
        self.ctx, self.eta, self.depth, self.cap = ctx, eta, int(depth), int(cap)
        self.index_count = I = eta.index_count
        d = ctx.dim
        tol = ctx.tol
        mu = ctx.structure
        left = mu.transpose(0, 2, 1)  # left[delta] maps generator a to b_delta b_a
        right = mu.transpose(1, 2, 0)  # right[delta] maps a to b_a b_delta

        q0 = gram_quotient(ctx.gram, tol.null_relative, tol.equality)
        if q0.dim != d:
            raise ValidationError("level 0 must be all of B (degenerate basis)")
        self.quotients = [q0]
        self.lam = [np.einsum("mx,dxy,yn->dmn", q0.R, left, q0.P)]
        self.rho = [np.einsum("mx,dxy,yn->dmn", q0.R, right, q0.P)]
        self.create: list[list[np.ndarray]] = [[]]
        EP = _eta_of_products(ctx, eta)
        generators = d
        for n in range(1, self.depth + 1):
            r = self.quotients[-1].dim
            g = d * I * r
            generators += g
            if generators > self.cap:
                raise SizeLimitError(
                    f"level {n} needs {g} generators (total {generators} > cap {self.cap})")
            G = np.tensordot(EP, self.lam[-1], axes=([4], [0])).transpose(2, 0, 4, 3, 1, 5).reshape(g, g)
            q = gram_quotient(G, tol.null_relative, tol.equality)
            Rr = q.R.reshape(q.dim, d, I, r)
            m = q.dim
            Y = np.tensordot(left, q.P.reshape(d, I * r, m), axes=([2], [0]))
            self.lam.append(q.R @ Y.reshape(d, g, m))
            Y = self.rho[-1][:, None] @ q.P.reshape(1, d * I, r, m)
            self.rho.append(q.R @ Y.reshape(d, g, m))
            self.create.append([np.einsum("mau,a->mu", Rr[:, :, i, :], ctx.unit)
                                for i in range(I)])
            self.quotients.append(q)
        self.dims = [q.dim for q in self.quotients]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        self.dim = int(self.offsets[-1])
        self.omega = np.zeros(self.dim, dtype=complex)
        self.omega[:self.dims[0]] = q0.R @ ctx.unit
        self.letter_polys: dict[Hashable, BPolynomial] = {}
        self._vectors: dict = {}

    # -- bookkeeping --------------------------------------------------------

    @property
    def exact_degree(self) -> int:
        return 2 * self.depth

    def _slice(self, n: int) -> slice:
        return slice(self.offsets[n], self.offsets[n + 1])

    def _width(self, top: int) -> int:
        return int(self.offsets[top + 1])

    def summary(self) -> dict:
        spectra = []
        for q in self.quotients:
            kept = q.eigenvalues[q.eigenvalues > 0][-q.dim:] if q.dim else np.zeros(0)
            spectra.append((float(kept.min()) if q.dim else 0.0,
                            float(q.eigenvalues.max()) if q.eigenvalues.size else 0.0))
        return {"levels": list(self.dims), "total": self.dim,
                "exact_degree": self.exact_degree, "gram_extremes": spectra}

    def register_letter(self, key: Hashable, poly: BPolynomial) -> None:
        """Make ``poly`` (a polynomial in the ``s_i``) available as a letter."""
        if isinstance(key, (int, np.integer)):
            raise ValidationError("integer letters are reserved for the s_i")
        if poly.ctx is not self.ctx:
            raise ValidationError("letter polynomial over a different context")
        self.letter_polys[key] = poly
        self._vectors.clear()

    def letter_degree(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            return 1
        return max(self.letter_polys[key].degree(), 0)

    def _check_letter(self, key):
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.index_count:
                raise ValidationError(f"letter {key} outside 0..{self.index_count - 1}")
        elif key not in self.letter_polys:
            raise ValidationError(f"unknown letter {key!r}")

    def guard(self, degree: int, what: str = "word") -> None:
        if degree > self.exact_degree:
            raise ExactnessError(
                f"{what} of degree {degree} exceeds the exact range 2*depth = {self.exact_degree}")

    # -- vector level operations -------------------------------------------

    def _pad(self, V: np.ndarray, top: int) -> np.ndarray:
        w = self._width(top)
        if V.shape[-1] >= w:
            return V[..., :w]
        out = np.zeros(V.shape[:-1] + (w,), dtype=complex)
        out[..., :V.shape[-1]] = V
        return out

    def _top_of(self, V: np.ndarray) -> int:
        return int(np.searchsorted(self.offsets, V.shape[-1]) - 1)

    def apply_s(self, i: int, V: np.ndarray, top_out: int | None = None) -> np.ndarray:
        """``s_i`` on the last axis of ``V`` (levels ``0..top`` stored)."""
        top_in = self._top_of(V)
        if top_out is None:
            top_out = min(self.depth, top_in + 1)
        out = np.zeros(V.shape[:-1] + (self._width(top_out),), dtype=complex)
        for n in range(1, self.depth + 1):
            C = self.create[n][i]
            if n <= top_out and n - 1 <= top_in:
                out[..., self._slice(n)] += V[..., self._slice(n - 1)] @ C.T
            if n - 1 <= top_out and n <= top_in:
                out[..., self._slice(n - 1)] += V[..., self._slice(n)] @ C.conj()
        return out

    def apply_lambda_all(self, V: np.ndarray) -> np.ndarray:
        """``lambda(b_a) V`` for every basis element; new leading axis ``a``."""
        top = self._top_of(V)
        out = np.zeros((self.ctx.dim,) + V.shape, dtype=complex)
        for n in range(top + 1):
            sl = self._slice(n)
            out[..., sl] = np.moveaxis(np.tensordot(V[..., sl], self.lam[n], axes=([-1], [2])), -2, 0)
        return out

    def apply_lambda(self, c, V: np.ndarray) -> np.ndarray:
        """``lambda(b) V`` for ``b`` given by coordinates ``c``."""
        return np.tensordot(np.asarray(c), self.apply_lambda_all(V), axes=([0], [0]))

    def apply_rho(self, c, V: np.ndarray) -> np.ndarray:
        """Right action of ``b`` (coordinates ``c``)."""
        top = self._top_of(V)
        out = np.zeros(V.shape, dtype=complex)
        c = np.asarray(c)
        for n in range(top + 1):
            sl = self._slice(n)
            M = np.tensordot(c, self.rho[n], axes=([0], [0]))
            out[..., sl] = V[..., sl] @ M.T
        return out

    def apply_poly(self, poly: BPolynomial, V: np.ndarray) -> np.ndarray:
        """Apply a polynomial in the ``s_i`` to the last axis of ``V``."""
        if poly.ctx is not self.ctx:
            raise ValidationError("polynomial over a different context")
        top_in = self._top_of(V)
        top_out = min(self.depth, top_in + max(poly.degree(), 0))
        total = np.zeros(V.shape[:-1] + (self._width(top_out),), dtype=complex)
        for letters, T in poly.terms.items():
            d = len(letters)
            state = np.tensordot(T, self.apply_lambda_all(V), axes=([d], [0]))
            # state axes: remaining coefficient slots, batch..., vector
            for pos in range(d - 1, -1, -1):
                state = self.apply_letter(letters[pos], state)
                lam = self.apply_lambda_all(state)  # (a, a0..a_pos, batch, w)
                state = _contract_diag(lam, pos)
            total += self._pad(state, top_out)
        return total

    def apply_letter(self, key, V: np.ndarray) -> np.ndarray:
        self._check_letter(key)
        if isinstance(key, (int, np.integer)):
            return self.apply_s(int(key), V)
        return self.apply_poly(self.letter_polys[key], V)

    def vacuum(self) -> np.ndarray:
        return self.omega.copy()

    def vector(self, poly: BPolynomial) -> np.ndarray:
        """``p Omega`` (exact when ``deg p <= depth``)."""
        return self._pad(self.apply_poly(poly, self.omega[:self._width(0)]), self.depth)

    def read_B(self, V: np.ndarray) -> np.ndarray:
        """Coordinates in B of the level-0 component of ``V``."""
        return V[..., :self.dims[0]] @ self.quotients[0].P.T

    def inner_B(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """B-valued inner products ``<x, y>_B`` of all pairs of rows.

        Uses ``tau(<x, y>_B b) = <x, y b>`` with the right action of B.
        """
        X = self._pad(np.atleast_2d(X), self.depth)
        Y = self._pad(np.atleast_2d(Y), self.depth)
        w = np.stack([X.conj() @ self.apply_rho(np.eye(self.ctx.dim)[g], Y).T
                      for g in range(self.ctx.dim)], axis=-1)
        return w @ np.linalg.inv(self.ctx.pairing).T

    # -- moments --------------------------------------------------------------

    def word_degree(self, letters: Sequence) -> int:
        return sum(self.letter_degree(k) for k in letters)

    def basis_moments(self, letters: Sequence) -> np.ndarray:
        """``E_B(b_{a0} y1 b_{a1} ... yd b_{ad})`` for all basis indices.

        Returns coordinates, shape ``(dim B,) * (d + 1) + (dim B,)``.
        """
        letters = list(letters)
        for k in letters:
            self._check_letter(k)
        degs = [self.letter_degree(k) for k in letters]
        self.guard(sum(degs))
        state = self.apply_lambda_all(self.omega[:self._width(0)])
        for pos in range(len(letters) - 1, -1, -1):
            state = self.apply_letter(letters[pos], state)
            # components above the remaining degree can never return to level 0
            state = self._pad(state, min(self._top_of(state), sum(degs[:pos])))
            state = self.apply_lambda_all(state)
        return self.read_B(state)

    def basis_vectors(self, letters: Sequence, start: np.ndarray | None = None) -> np.ndarray:
        """``b_{a0} y1 b_{a1} ... yd b_{ad} v`` for all basis indices.

        ``v`` is ``start`` (default the vacuum).  Shape
        ``(dim B,) * (d + 1) + (dim,)``.  Vectors of words longer than the
        depth are truncated; inner products of two of them stay exact as long
        as the degrees add up to at most ``2 * depth``.
        """
        letters = tuple(letters)
        if start is None and letters in self._vectors:
            return self._vectors[letters]
        v = self.omega[:self._width(0)] if start is None else np.asarray(start, dtype=complex)
        state = self.apply_lambda_all(v)
        for key in reversed(letters):
            state = self.apply_lambda_all(self.apply_letter(key, state))
        state = self._pad(state, self.depth)
        if start is None:
            self._vectors[letters] = state
        return state

    def expectation_coords(self, poly: BPolynomial) -> np.ndarray:
        self.guard(poly.degree(), "polynomial")
        return self.read_B(self.apply_poly(poly, self.omega[:self._width(0)]))

    def expectation(self, poly: BPolynomial) -> np.ndarray:
        """``E_B(p)`` as a matrix in B."""
        return self.ctx.from_coords(self.expectation_coords(poly))

    def trace(self, poly: BPolynomial) -> complex:
        return complex(self.expectation_coords(poly) @ self._tau_coords)

    @property
    def _tau_coords(self) -> np.ndarray:
        return np.einsum("xy,ayx->a", self.ctx.density, self.ctx.basis)

    def tau_of_coords(self, c) -> np.ndarray:
        return np.asarray(c) @ self._tau_coords

    # -- dense operators -----------------------------------------------------

    def s_matrix(self, i: int) -> np.ndarray:
        return self.apply_s(i, np.eye(self.dim, dtype=complex)).T

    def lambda_matrix(self, c) -> np.ndarray:
        return self.apply_lambda(c, np.eye(self.dim, dtype=complex)).T

    def operator(self, poly: BPolynomial) -> np.ndarray:
        """Dense matrix of ``p`` on the truncated space."""
        return self.apply_poly(poly, np.eye(self.dim, dtype=complex)).T

    def operator_norm_estimate(self, poly: BPolynomial) -> float:
        """Spectral norm on the truncated space; a lower bound for the true
        norm, nondecreasing in the depth."""
        if poly.is_zero():
            return 0.0
        return float(np.linalg.norm(self.operator(poly), 2))

    def __repr__(self) -> str:
        return f"FockModel(depth={self.depth}, levels={self.dims})"


def _contract_diag(lam: np.ndarray, pos: int) -> np.ndarray:
    """Sum over ``a`` of ``lam[a, ..., a (at axis 1+pos), ...]``."""
    moved = np.moveaxis(lam, 1 + pos, 1)
    return np.einsum("aa...->...", moved)


def build_fock(bimodule: Bimodule, depth: int, cap: int = DEFAULT_DIMENSION_CAP) -> FockModel:
    return FockModel(bimodule.ctx, bimodule.eta, depth, cap)


def fock_expectation(model: FockModel, word: BPolynomial) -> np.ndarray:
    return model.expectation(word)


def operator_norm_estimate(model: FockModel, word: BPolynomial) -> float:
    return model.operator_norm_estimate(word)
