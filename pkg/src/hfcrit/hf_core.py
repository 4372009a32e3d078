"""Hartree-Fock energy, mean-field operator and second-order information.

Orbitals are real and spinless. An orbital set is an M x N coefficient
matrix C whose columns are orthonormal in the overlap metric S; the
corresponding Slater determinant has density matrix D = C C^T.
"""

from __future__ import annotations

import dataclasses
import itertools
import warnings

import numpy as np
import scipy.linalg

from .errors import ContractViolation, NonStationaryWarning

ORTHONORMALITY_TOL = 1e-10
STATIONARITY_WARN = 1e-4


@dataclasses.dataclass(frozen=True, eq=False)
class OrbitalSet:
    """N orbitals, orthonormal in the metric of ``tables.S``."""

    C: np.ndarray
    tables: object

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        object.__setattr__(self, "C", C)
        M, N = C.shape
        if M != self.tables.M:
            raise ContractViolation(f"coefficient matrix has {M} rows, basis has {self.tables.M} functions")
        if N > M:
            raise ContractViolation(f"{N} orbitals do not fit in a {M}-dimensional basis")
        dev = np.max(np.abs(C.T @ self.tables.S @ C - np.eye(N))) if N else 0.0
        if dev > ORTHONORMALITY_TOL:
            raise ContractViolation(f"orbitals are not orthonormal (max deviation {dev:.2e})")

    @property
    def N(self):
        return self.C.shape[1]

    @property
    def density(self):
        return self.C @ self.C.T


@dataclasses.dataclass(frozen=True, eq=False)
class OrthogonalFamily:
    """Mutually orthogonal orbitals with L2 norms in [0, 1]."""

    C: np.ndarray
    tables: object

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        object.__setattr__(self, "C", C)
        G = C.T @ self.tables.S @ C
        off = G - np.diag(np.diag(G))
        if off.size and np.max(np.abs(off)) > ORTHONORMALITY_TOL:
            raise ContractViolation(f"family is not orthogonal (max overlap {np.max(np.abs(off)):.2e})")
        if np.any(np.diag(G) > 1.0 + 1e-12):
            raise ContractViolation(f"orbital norms exceed 1: {np.sqrt(np.diag(G))}")

    @property
    def N(self):
        return self.C.shape[1]

    @property
    def norms_sq(self):
        return np.clip(np.einsum("pj,pq,qj->j", self.C, self.tables.S, self.C), 0.0, None)

    @property
    def norms(self):
        return np.sqrt(self.norms_sq)

    @property
    def is_degenerate(self):
        """True when some orbital vanishes, so the determinant is zero."""
        return bool(np.any(self.norms_sq == 0.0))

    @classmethod
    def from_orbitals(cls, orbitals, norms):
        return cls(orbitals.C * np.asarray(norms, dtype=float)[None, :], orbitals.tables)


# ------------------------------------------------------------------ energy


def coulomb_exchange(tables, D):
    J = np.einsum("pqrs,rs->pq", tables.eri, D, optimize=True)
    K = np.einsum("prqs,rs->pq", tables.eri, D, optimize=True)
    return J, K


def _pair_terms(C, tables):
    """W[j, k] = (jj|kk) - (jk|jk): the antisymmetrized pair repulsion."""
    half = np.einsum("pqrs,pj,qk->jkrs", tables.eri, C, C, optimize=True)
    direct = np.einsum("jjrs,rk,sk->jk", half, C, C, optimize=True)
    exchange = np.einsum("jkrs,rj,sk->jk", half, C, C, optimize=True)
    return direct - exchange


def hf_energy(orbitals):
    """Energy of the Slater determinant of `orbitals` (plus the table offset)."""
    tables = orbitals.tables
    D = orbitals.density
    J, K = coulomb_exchange(tables, D)
    return float(np.sum(D * tables.hcore) + 0.5 * np.sum(D * (J - K)) + tables.energy_offset)


def fock_build(orbitals):
    """Mean-field operator h_Psi = hcore + J(D) - K(D) as an M x M matrix."""
    J, K = coulomb_exchange(orbitals.tables, orbitals.density)
    F = orbitals.tables.hcore + J - K
    return 0.5 * (F + F.T)


def projected_gradient(orbitals, F=None):
    """Residual of the stationarity condition and the multiplier matrix.

    Returns ``(R, mu)`` with ``R = (I - S C C^T) F C`` (the part of each
    F phi_j outside span(phi)) and ``mu = C^T F C``.
    """
    if F is None:
        F = fock_build(orbitals)
    C, S = orbitals.C, orbitals.tables.S
    FC = F @ C
    mu = C.T @ FC
    mu = 0.5 * (mu + mu.T)
    R = FC - S @ C @ mu
    return R, mu


def residual_norm(orbitals, F=None):
    R, _ = projected_gradient(orbitals, F)
    return float(np.linalg.norm(R))


def energy_unnormalized(family):
    """N-particle energy of the (unnormalized) wedge of an orthogonal family.

    Each one-body term carries the product of the other squared norms and
    each pair term the product of the remaining ones; a vanishing orbital
    gives 0 (check ``family.is_degenerate``).
    """
    tables = family.tables
    C = family.C
    n2 = family.norms_sq
    N = family.N
    h = np.einsum("pj,pq,qj->j", C, tables.hcore, C)
    W = _pair_terms(C, tables)
    total = 0.0
    for j in range(N):
        total += np.prod(np.delete(n2, j)) * h[j]
    for j, k in itertools.combinations(range(N), 2):
        total += np.prod(np.delete(n2, [j, k])) * W[j, k]
    return float(total + tables.energy_offset * np.prod(n2))


def weak_limit_rhs(family):
    """One-body plus pair energies of the family without any norm weights."""
    C = family.C
    h = np.einsum("pj,pq,qj->j", C, family.tables.hcore, C)
    W = _pair_terms(C, family.tables)
    return float(h.sum() + np.sum(np.triu(W, 1)))


@dataclasses.dataclass
class GeometricDecomposition:
    G0: float
    layers: dict  # n -> list of (weight, subset) for the normalized n-determinants
    psi_norm_sq: float
    layer_energies: dict  # n -> Tr(H(n) G_n)
    psi_energy: float
    rhs: float

    @property
    def layer_traces(self):
        return {n: float(sum(w for w, _ in items)) for n, items in self.layers.items()}

    @property
    def trace_residual(self):
        return abs(self.G0 + sum(self.layer_traces.values()) + self.psi_norm_sq - 1.0)

    @property
    def energy_residual(self):
        return abs(sum(self.layer_energies.values()) + self.psi_energy - self.rhs)


def geometric_decomposition(family, verify_energy=True):
    """Split 1 = G0 + sum_n Tr G_n + |Psi|^2 for an orthogonal family.

    G_n is the mixture of the n-orbital sub-determinants, the subset I
    weighted by prod_{l not in I} (1 - n_l^2) and by prod_{l in I} n_l^2 (the
    squared norm of the unnormalized sub-determinant). With `verify_energy`
    the layer energies Tr(H(n) G_n) and E(Psi) are evaluated with the full-CI
    oracle on offset-free tables.
    """
    from . import nbody

    n2 = family.norms_sq
    if np.any(n2 > 1.0 + 1e-12):
        raise ContractViolation("orbital norms exceed 1")
    n2 = np.minimum(n2, 1.0)
    N = family.N
    comp = 1.0 - n2
    tables = family.tables.without_offset()
    G0 = float(np.prod(comp))
    layers, layer_energies = {}, {}
    for n in range(1, N):
        items = []
        energy = 0.0
        for I in itertools.combinations(range(N), n):
            rest = [l for l in range(N) if l not in I]
            w_out = float(np.prod(comp[rest]))
            items.append((w_out * float(np.prod(n2[list(I)])), I))
            if verify_energy and w_out != 0.0:
                vec = nbody.slater_to_vector(family.C[:, list(I)], tables)
                energy += w_out * nbody.expectation(vec, tables, n)
        layers[n] = items
        layer_energies[n] = energy if verify_energy else float("nan")
    psi_norm_sq = float(np.prod(n2))
    if verify_energy:
        vec = nbody.slater_to_vector(family.C, tables)
        psi_energy = nbody.expectation(vec, tables, N)
    else:
        psi_energy = float("nan")
    unweighted = OrthogonalFamily(family.C, tables)
    return GeometricDecomposition(
        G0=G0,
        layers=layers,
        psi_norm_sq=psi_norm_sq,
        layer_energies=layer_energies,
        psi_energy=psi_energy,
        rhs=weak_limit_rhs(unweighted),
    )


# ------------------------------------------------------- tangent space


def virtual_space(orbitals):
    """S-orthonormal basis of the complement of span(C) (columns)."""
    tables = orbitals.tables
    X = tables.X
    Ct = X.T @ tables.S @ orbitals.C
    Vt = scipy.linalg.null_space(Ct.T)
    if Vt.shape[1] != X.shape[1] - orbitals.N:
        # C has components outside the retained basis span; take the
        # complement within span(X) anyway
        Q, _ = np.linalg.qr(np.hstack([Ct, np.eye(X.shape[1])]))
        Vt = Q[:, orbitals.N : X.shape[1]]
    return X @ Vt


def tangent_gradient(orbitals, F=None, V=None):
    """dE/d(kappa) at kappa = 0 for C(kappa) = [C V] expm(A(kappa))[:, :N].

    Returned with shape (n_virtual, N).
    """
    if F is None:
        F = fock_build(orbitals)
    if V is None:
        V = virtual_space(orbitals)
    return 2.0 * V.T @ F @ orbitals.C


def rotate(orbitals, kappa, V=None):
    """Curvilinear retraction along occupied-virtual rotations kappa."""
    if V is None:
        V = virtual_space(orbitals)
    kappa = np.asarray(kappa, dtype=float).reshape(V.shape[1], orbitals.N)
    N = orbitals.N
    n = N + V.shape[1]
    A = np.zeros((n, n))
    A[N:, :N] = kappa
    A[:N, N:] = -kappa.T
    U = scipy.linalg.expm(A)
    C = np.hstack([orbitals.C, V]) @ U[:, :N]
    return OrbitalSet(C, orbitals.tables)


def orbital_hessian(orbitals, F=None, V=None, stationarity_threshold=STATIONARITY_WARN):
    """Second derivative of the energy in occupied-virtual rotation coordinates.

    The matrix is indexed by ``a * N + i`` (virtual a, occupied i) and is
    the exact Hessian of ``kappa -> E(rotate(orbitals, kappa))`` at 0. Its
    negative eigenvalues count the Morse index, which is only meaningful at
    a critical point; a NonStationaryWarning is issued otherwise.
    """
    if F is None:
        F = fock_build(orbitals)
    if V is None:
        V = virtual_space(orbitals)
    C = orbitals.C
    res = residual_norm(orbitals, F)
    if res > stationarity_threshold:
        warnings.warn(
            f"orbital Hessian requested at a non-stationary point (residual {res:.2e}); "
            "the Morse index is not defined there",
            NonStationaryWarning,
            stacklevel=2,
        )
    N, nv = C.shape[1], V.shape[1]
    g = orbitals.tables.eri
    ovov = np.einsum("pqrs,pa,qi,rb,sj->aibj", g, V, C, V, C, optimize=True)
    vvoo = np.einsum("pqrs,pa,qb,ri,sj->abij", g, V, V, C, C, optimize=True)
    Fvv = V.T @ F @ V
    Foo = C.T @ F @ C
    H = 2.0 * (
        np.einsum("ab,ij->aibj", Fvv, np.eye(N))
        - np.einsum("ab,ij->aibj", np.eye(nv), Foo)
        + 2.0 * ovov
        - vvoo.transpose(0, 2, 1, 3)
        - ovov.transpose(0, 3, 2, 1)
    )
    H = H.reshape(nv * N, nv * N)
    return 0.5 * (H + H.T)


def morse_index(hessian, tol=1e-8):
    if hessian.size == 0:
        return 0
    return int(np.sum(np.linalg.eigvalsh(hessian) < -tol))


def canonicalize(orbitals, F=None):
    """Rotate within span(C) so that mu = C^T F C is diagonal, ascending.

    Each orbital's first significant coefficient is made positive.
    """
    if F is None:
        F = fock_build(orbitals)
    C = orbitals.C
    mu = C.T @ F @ C
    eps, U = np.linalg.eigh(0.5 * (mu + mu.T))
    C = C @ U
    C = fix_phase(C)
    return OrbitalSet(C, orbitals.tables), eps


def fix_phase(C):
    C = C.copy()
    for j in range(C.shape[1]):
        col = C[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-10 * max(np.max(np.abs(col)), 1e-300))
        if big.size and col[big[0]] < 0:
            C[:, j] = -col
    return C


def orthonormalize_columns(C, S):
    """Cholesky re-orthonormalization in the S metric (keeps span and order)."""
    L = np.linalg.cholesky(C.T @ S @ C)
    return np.linalg.solve(L, C.T).T


def principal_angles(a, b):
    """Principal angles between span(a.C) and span(b.C) in the S metric."""
    sv = np.linalg.svd(a.C.T @ a.tables.S @ b.C, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))
