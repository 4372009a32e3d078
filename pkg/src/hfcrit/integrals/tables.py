"""Integral tables of the discretized N-particle Hamiltonian."""

from __future__ import annotations

import dataclasses
import functools
import logging

import numpy as np

from ..errors import ConfigurationError

log = logging.getLogger(__name__)

DEFAULT_PRUNE_THRESHOLD = 1e-8


def symmetrize_eri(eri):
    """Return a copy of `eri` with exact 8-fold permutation symmetry.

    Every element is gathered from its canonical slot (i >= j, k >= l,
    ij >= kl), so permutation partners are bit-identical.
    """
    eri = np.asarray(eri, dtype=float)
    M = eri.shape[0]
    i, j, k, l = np.indices((M, M, M, M), sparse=False)
    p, q = np.maximum(i, j), np.minimum(i, j)
    r, s = np.maximum(k, l), np.minimum(k, l)
    swap = (p * M + q) < (r * M + s)
    a = np.where(swap, r, p)
    b = np.where(swap, s, q)
    c = np.where(swap, p, r)
    d = np.where(swap, q, s)
    return eri[a, b, c, d]


def symmetrize_matrix(mat):
    mat = np.asarray(mat, dtype=float)
    return np.triu(mat) + np.triu(mat, 1).T


def orthonormalizer(S, threshold=DEFAULT_PRUNE_THRESHOLD):
    """Canonical orthogonalization of an overlap matrix.

    Returns X with shape (M, M') such that X.T @ S @ X is the identity;
    eigendirections of S with eigenvalue below `threshold` are dropped.
    Columns are ordered by the index of their dominant component and
    signed so that component is positive, so S = I gives X = I and a
    diagonal S gives a diagonal X.
    """
    S = np.asarray(S, dtype=float)
    s, U = np.linalg.eigh(S)
    keep = s >= threshold
    if not np.any(keep):
        raise ConfigurationError(
            f"overlap matrix is numerically singular: largest eigenvalue {s.max():.3e} "
            f"below pruning threshold {threshold:.1e}"
        )
    X = U[:, keep] / np.sqrt(s[keep])
    dominant = np.argmax(np.abs(X), axis=0)
    order = np.argsort(dominant, kind="stable")
    X = X[:, order]
    signs = np.sign(X[dominant[order], np.arange(X.shape[1])])
    return X * signs


@dataclasses.dataclass(frozen=True, eq=False)
class IntegralTables:
    """One- and two-electron matrix elements in an M-function basis.

    ``eri[i, j, k, l]`` is ``(ij|kl)`` in chemists' notation, stored densely
    with exact permutation symmetry. ``hcore`` already contains the kinetic
    factor. ``energy_offset`` is a constant added to every N-particle energy
    (zero unless nuclear repulsion or a file offset is requested).
    """

    S: np.ndarray
    hcore: np.ndarray
    eri: np.ndarray
    energy_offset: float = 0.0
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    labels: tuple | None = None

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        hcore = np.array(self.hcore, dtype=float)
        eri = np.array(self.eri, dtype=float)
        M = S.shape[0]
        if S.shape != (M, M) or hcore.shape != (M, M) or eri.shape != (M,) * 4:
            raise ConfigurationError(
                f"inconsistent table shapes S{S.shape} hcore{hcore.shape} eri{eri.shape}"
            )
        for arr in (S, hcore, eri):
            arr.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "hcore", hcore)
        object.__setattr__(self, "eri", eri)
        object.__setattr__(self, "energy_offset", float(self.energy_offset))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def M(self):
        return self.S.shape[0]

    @functools.cached_property
    def is_orthonormal(self):
        return bool(np.array_equal(self.S, np.eye(self.M)))

    @functools.cached_property
    def X(self):
        """Orthonormalizing transform (see `orthonormalizer`)."""
        if self.is_orthonormal:
            X = np.eye(self.M)
        else:
            X = orthonormalizer(self.S, self.prune_threshold)
        X.setflags(write=False)
        return X

    @property
    def n_pruned(self):
        return self.M - self.X.shape[1]

    @functools.cached_property
    def orthonormal(self):
        """The same tables expressed in the orthonormalized basis."""
        if self.is_orthonormal:
            return self
        return transform_tables(self, self.X)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def without_offset(self):
        if self.energy_offset == 0.0:
            return self
        return self.replace(energy_offset=0.0)

    def symmetry_violations(self):
        """Largest deviation from each storage symmetry (0 for valid tables)."""
        S, h, g = self.S, self.hcore, self.eri
        return {
            "overlap_symmetry": float(np.max(np.abs(S - S.T))),
            "hcore_symmetry": float(np.max(np.abs(h - h.T))),
            "eri_permutation_symmetry": float(
                max(
                    np.max(np.abs(g - g.transpose(1, 0, 2, 3))),
                    np.max(np.abs(g - g.transpose(0, 1, 3, 2))),
                    np.max(np.abs(g - g.transpose(2, 3, 0, 1))),
                )
            ),
        }

    def function_coefficients(self, indices):
        """Coefficient columns selecting basis functions `indices`."""
        C = np.zeros((self.M, len(indices)))
        C[list(indices), np.arange(len(indices))] = 1.0
        return C


def transform_tables(tables, X):
    """Express `tables` in the basis spanned by the columns of X."""
    h = symmetrize_matrix(X.T @ tables.hcore @ X)
    g = np.einsum("pqrs,pi->iqrs", tables.eri, X, optimize=True)
    g = np.einsum("iqrs,qj->ijrs", g, X, optimize=True)
    g = np.einsum("ijrs,rk->ijks", g, X, optimize=True)
    g = np.einsum("ijks,sl->ijkl", g, X, optimize=True)
    S = X.T @ tables.S @ X
    if np.max(np.abs(S - np.eye(S.shape[0]))) < 1e-10:
        S = np.eye(S.shape[0])
    else:
        S = symmetrize_matrix(S)
    return IntegralTables(
        S=S,
        hcore=h,
        eri=symmetrize_eri(g),
        energy_offset=tables.energy_offset,
        prune_threshold=tables.prune_threshold,
    )


def random_tables(M, seed=0, *, interacting=True, orthonormal=True, scale=1.0, offset=0.0):
    """Random symmetric tables for oracle testing.

    The repulsion tensor is a sum of outer products of symmetric matrices,
    so it is positive semidefinite like a genuine repulsive interaction.
    """
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(M, M))
    h = symmetrize_matrix(0.5 * (A + A.T) - 1.0 * np.eye(M))
    if interacting:
        L = rng.normal(size=(M, M, M))
        L = 0.5 * (L + L.transpose(0, 2, 1))
        g = scale * np.einsum("Pij,Pkl->ijkl", L, L) / M
        g = symmetrize_eri(g)
    else:
        g = np.zeros((M,) * 4)
    if orthonormal:
        S = np.eye(M)
    else:
        B = np.eye(M) + 0.3 * rng.normal(size=(M, M)) / np.sqrt(M)
        S = B @ B.T
        d = 1.0 / np.sqrt(np.diag(S))
        S = symmetrize_matrix(d[:, None] * S * d[None, :])
    return IntegralTables(S=S, hcore=h, eri=g, energy_offset=offset)
