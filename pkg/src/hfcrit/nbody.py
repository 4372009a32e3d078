"""Exact N-particle linear algebra in a finite one-particle basis.

Determinants are wedge products of orthonormalized basis functions,
indexed by strictly increasing N-subsets in lexicographic order. The
Hamiltonian is assembled with the Slater-Condon rules on the
orthonormalized tables, so for a non-orthogonal basis every vector lives
in the determinant space of ``tables.X``.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import logging
import math
import warnings

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ContractViolation, ResourceLimitError, SpectrumClippedWarning

log = logging.getLogger(__name__)

DIMENSION_CAP = 200_000
DENSE_LIMIT = 5000


class RankDeficientWarning(UserWarning):
    """Orbital columns are linearly dependent; the determinant vanishes."""


@dataclasses.dataclass(frozen=True, eq=False)
class DeterminantBasis:
    M: int
    N: int

    @functools.cached_property
    def subsets(self):
        return tuple(itertools.combinations(range(self.M), self.N))

    @functools.cached_property
    def masks(self):
        return tuple(sum(1 << i for i in s) for s in self.subsets)

    @functools.cached_property
    def index(self):
        return {m: n for n, m in enumerate(self.masks)}

    @property
    def size(self):
        return math.comb(self.M, self.N)

    def __len__(self):
        return self.size


def _check_dimension(M, N, cap):
    if N < 0 or N > M:
        raise ContractViolation(f"N = {N} particles do not fit in M = {M} orbitals")
    dim = math.comb(M, N)
    if dim > cap:
        raise ResourceLimitError(
            f"determinant space of dimension C({M},{N}) = {dim} exceeds the cap {cap}", size=dim
        )
    return dim


def _parity_between(mask, i, a):
    """(-1) to the number of occupied orbitals strictly between i and a."""
    lo, hi = min(i, a), max(i, a)
    between = mask & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1.0 if bin(between).count("1") % 2 else 1.0


def _assemble(tables, N):
    """Slater-Condon assembly; returns (rows, cols, vals) of the upper triangle."""
    M = tables.M
    h, g = tables.hcore, tables.eri
    basis = DeterminantBasis(M, N)
    index = basis.index
    J = np.einsum("iijj->ij", g)
    K = np.einsum("ijji->ij", g)
    rows, cols, vals = [], [], []
    for n, (occ, mask) in enumerate(zip(basis.subsets, basis.masks)):
        occ_arr = np.array(occ, dtype=int)
        virt = [a for a in range(M) if not mask >> a & 1]
        diag = h[occ_arr, occ_arr].sum()
        if N > 1:
            diag += 0.5 * (J[np.ix_(occ_arr, occ_arr)].sum() - K[np.ix_(occ_arr, occ_arr)].sum())
        rows.append(n)
        cols.append(n)
        vals.append(diag + tables.energy_offset)
        for i in occ:
            others = occ_arr[occ_arr != i]
            for a in virt:
                m1 = mask ^ (1 << i) ^ (1 << a)
                t = index[m1]
                if t <= n:
                    continue
                val = h[i, a]
                if others.size:
                    val += g[i, a, others, others].sum() - g[i, others, others, a].sum()
                if val != 0.0:
                    rows.append(n)
                    cols.append(t)
                    vals.append(_parity_between(mask, i, a) * val)
        for i, j in itertools.combinations(occ, 2):
            for a, b in itertools.combinations(virt, 2):
                m1 = mask ^ (1 << i) ^ (1 << a)
                m2 = m1 ^ (1 << j) ^ (1 << b)
                t = index[m2]
                if t <= n:
                    continue
                val = g[i, a, j, b] - g[i, b, j, a]
                if val != 0.0:
                    sign = _parity_between(mask, i, a) * _parity_between(m1, j, b)
                    rows.append(n)
                    cols.append(t)
                    vals.append(sign * val)
    return basis.size, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)


@functools.lru_cache(maxsize=32)
def _hamiltonian_cached(tables, N, dense):
    ortho = tables.orthonormal
    dim, rows, cols, vals = _assemble(ortho, N)
    if dense:
        H = np.zeros((dim, dim))
        H[rows, cols] = vals
        H = np.triu(H) + np.triu(H, 1).T
        H.setflags(write=False)
        return H
    upper = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    strict = scipy.sparse.triu(upper, k=1)
    return (upper + strict.T).tocsr()


def build_hamiltonian(tables, N, cap=DIMENSION_CAP, dense=None):
    """N-particle Hamiltonian over `DeterminantBasis(M', N)`.

    M' is the number of retained orthonormalized functions. The matrix is
    dense (read-only ndarray) up to 5000 determinants and CSR beyond, unless
    `dense` forces a format. Results are cached per tables object.
    """
    M = tables.X.shape[1]
    dim = _check_dimension(M, N, cap)
    if dense is None:
        dense = dim <= DENSE_LIMIT
    return _hamiltonian_cached(tables, int(N), bool(dense))


@dataclasses.dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    dimension: int
    N: int
    eigenvectors: np.ndarray | None = None


def fci_spectrum(tables, N, K=1, method="auto", return_vectors=False, cap=DIMENSION_CAP):
    """K lowest eigenvalues of the N-particle Hamiltonian, ascending.

    `method` is "dense" (full symmetric eigendecomposition), "sparse"
    (Lanczos) or "auto" (dense up to 5000 determinants). Asking for more
    levels than the space holds returns all of them with a warning.
    """
    M = tables.X.shape[1]
    dim = _check_dimension(M, N, cap)
    if K > dim:
        warnings.warn(f"requested {K} levels, space has only {dim}", SpectrumClippedWarning, stacklevel=2)
        K = dim
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "sparse"
    if method == "sparse" and K >= dim - 1:
        method = "dense"
    if method == "dense":
        H = build_hamiltonian(tables, N, cap, dense=True)
        if return_vectors:
            w, v = np.linalg.eigh(H)
            return SpectrumResult(w[:K], dim, N, v[:, :K])
        w = np.linalg.eigvalsh(H)
        return SpectrumResult(w[:K], dim, N)
    if method != "sparse":
        raise ValueError(f"unknown eigensolver method {method!r}")
    H = build_hamiltonian(tables, N, cap, dense=False)
    if not scipy.sparse.issparse(H):
        H = scipy.sparse.csr_matrix(H)
    v0 = np.ones(dim) / math.sqrt(dim)
    w, v = scipy.sparse.linalg.eigsh(H, k=K, which="SA", v0=v0, tol=1e-14)
    order = np.argsort(w)
    return SpectrumResult(w[order], dim, N, v[:, order] if return_vectors else None)


def expectation(psi, tables, N, hamiltonian=None):
    """Quadratic form <psi, H psi> without normalization."""
    psi = np.asarray(psi, dtype=float)
    norm = float(np.linalg.norm(psi))
    if norm > 1.0 + 1e-12:
        raise ContractViolation(f"vector norm {norm!r} exceeds 1")
    H = build_hamiltonian(tables, N) if hamiltonian is None else hamiltonian
    return float(psi @ (H @ psi))


def slater_to_vector(C, tables=None):
    """Determinant coefficients of the wedge of the columns of C.

    Accepts an OrbitalSet / OrthogonalFamily, or a coefficient matrix plus
    its tables. The coefficient on subset I is the minor of the
    orthonormalized coefficients on rows I; a rank-deficient C returns the
    zero vector and issues a RankDeficientWarning.
    """
    if tables is None:
        C, tables = C.C, C.tables
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    X = tables.X
    Ct = X.T @ tables.S @ C
    M, N = Ct.shape
    basis = DeterminantBasis(M, N)
    if N == 0:
        return np.ones(1)
    sv = np.linalg.svd(Ct, compute_uv=False)
    if sv[-1] <= 1e-14 * max(sv[0], 1e-300):
        warnings.warn("orbital columns are linearly dependent", RankDeficientWarning, stacklevel=2)
        return np.zeros(basis.size)
    idx = np.array(basis.subsets, dtype=int)
    return np.linalg.det(Ct[idx])


@dataclasses.dataclass
class ThresholdReport:
    N: int
    energies: list  # lowest full-CI energy for n = 0..N electrons
    free_energies: list  # free-space energies of k electrons, k = 0..N
    threshold: float
    argmin_k: int

    @property
    def reduces_to_single_removal(self):
        return abs(self.threshold - self.energies[self.N - 1]) <= 1e-10 if self.N >= 1 else True

    @property
    def binding(self):
        return self.N >= 1 and self.energies[self.N] < self.energies[self.N - 1]

    def to_dict(self):
        return {
            "N": self.N,
            "energies": list(map(float, self.energies)),
            "free_energies": list(map(float, self.free_energies)),
            "threshold": float(self.threshold),
            "argmin_k": self.argmin_k,
            "reduces_to_single_removal": bool(self.reduces_to_single_removal),
            "binding": bool(self.binding),
        }


def threshold_compare(tables, N, free_energies=None):
    """Full-CI ground energies E(n), n = 0..N, and min over k of E(N-k) + E_free(k).

    Without `free_energies` every E_free(k) is taken to be 0, the value for a
    repulsive interaction in free space. A finite matrix has no essential
    spectrum, so this is a diagnostic comparison only.
    """
    tables = tables.without_offset()
    energies = [fci_spectrum(tables, n, 1).eigenvalues[0] if n else 0.0 for n in range(N + 1)]
    energies = [float(e) for e in energies]
    free = [0.0] * (N + 1) if free_energies is None else [float(e) for e in free_energies]
    if len(free) != N + 1:
        raise ContractViolation(f"need {N + 1} free energies, got {len(free)}")
    if N == 0:
        return ThresholdReport(0, energies, free, 0.0, 0)
    cands = [energies[N - k] + free[k] for k in range(1, N + 1)]
    k = int(np.argmin(cands)) + 1
    return ThresholdReport(N, energies, free, float(cands[k - 1]), k)
