"""Reference implementations that share no code with the package."""

import itertools
import math

import numpy as np


def _antisymmetrized(occ, M):
    N = len(occ)
    T = np.zeros((M,) * N)
    for perm in itertools.permutations(range(N)):
        sign = np.linalg.det(np.eye(N)[list(perm)])
        T[tuple(occ[i] for i in perm)] += sign
    return T / math.sqrt(math.factorial(N))


def _apply_hamiltonian(T, h, g):
    # g in chemists' order (ij|kl); particle a at i/j, particle b at k/l
    N = T.ndim
    out = np.zeros_like(T)
    for a in range(N):
        out += np.moveaxis(np.tensordot(h, T, axes=([1], [a])), 0, a)
    phys = np.einsum("ijkl->ikjl", g)  # phys[i, k, j, l] = (ij|kl)
    for a, b in itertools.combinations(range(N), 2):
        out += np.moveaxis(np.tensordot(phys, T, axes=([2, 3], [a, b])), [0, 1], [a, b])
    return out


def brute_force_hamiltonian(h, g, N):
    """Determinant matrix elements by explicit N!-term antisymmetrization."""
    M = h.shape[0]
    dets = [_antisymmetrized(occ, M) for occ in itertools.combinations(range(M), N)]
    return np.array([[np.sum(a * _apply_hamiltonian(b, h, g)) for b in dets] for a in dets])


def random_orthonormal(tables, N, rng):
    """Random S-orthonormal columns via Cholesky of the Gram matrix."""
    A = rng.normal(size=(tables.M, N))
    L = np.linalg.cholesky(A.T @ tables.S @ A)
    return np.linalg.solve(L, A.T).T
