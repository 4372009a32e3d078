"""Cartesian Gaussian integrals (l <= 1) by the McMurchie-Davidson scheme.

The kinetic operator is ``kinetic_factor * (-Laplacian)``; with the default
factor 1 a hydrogen-like ion has levels ``-Z**2 / (4 n**2)``. Use 0.5 to
reproduce the usual atomic-unit values. Nuclear repulsion is not part of
the Hamiltonian and only enters through ``energy_offset`` on request.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math

import numpy as np
from scipy import special

from ..errors import ConfigurationError, UnsupportedFeatureError
from .tables import (
    DEFAULT_PRUNE_THRESHOLD,
    IntegralTables,
    symmetrize_eri,
    symmetrize_matrix,
)

log = logging.getLogger(__name__)

MAX_L = 1
_CARTESIAN = {0: ((0, 0, 0),), 1: ((1, 0, 0), (0, 1, 0), (0, 0, 1))}
_SUFFIX = {(0, 0, 0): "s", (1, 0, 0): "px", (0, 1, 0): "py", (0, 0, 1): "pz"}


@dataclasses.dataclass(frozen=True)
class Nucleus:
    charge: float
    position: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        if len(self.position) != 3:
            raise ConfigurationError("nucleus position must have 3 components")
        if not self.charge > 0:
            raise ConfigurationError(f"nuclear charge must be positive, got {self.charge}")


@dataclasses.dataclass(frozen=True)
class MolecularSystem:
    nuclei: tuple
    n_electrons: int
    kinetic_factor: float = 1.0

    def __post_init__(self):
        nuclei = tuple(
            n if isinstance(n, Nucleus) else Nucleus(n[0], n[1]) for n in self.nuclei
        )
        object.__setattr__(self, "nuclei", nuclei)
        if int(self.n_electrons) != self.n_electrons or self.n_electrons < 1:
            raise ConfigurationError(f"electron count must be a positive integer, got {self.n_electrons}")
        object.__setattr__(self, "n_electrons", int(self.n_electrons))
        if not self.kinetic_factor > 0:
            raise ConfigurationError("kinetic_factor must be positive")

    @property
    def total_charge(self):
        return float(sum(n.charge for n in self.nuclei))

    @property
    def charge_barycenter(self):
        z = np.array([n.charge for n in self.nuclei])
        R = np.array([n.position for n in self.nuclei])
        return z @ R / z.sum()

    def nuclear_repulsion(self):
        e = 0.0
        for a, b in itertools.combinations(self.nuclei, 2):
            e += a.charge * b.charge / math.dist(a.position, b.position)
        return e

    def with_electrons(self, n):
        return dataclasses.replace(self, n_electrons=n)


@dataclasses.dataclass(frozen=True)
class Shell:
    center: tuple
    l: int
    exponents: tuple
    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.center) != 3:
            raise ConfigurationError("shell center must have 3 components")
        if not self.exponents:
            raise ConfigurationError("a contracted shell needs at least one primitive")
        if len(self.exponents) != len(self.coefficients):
            raise ConfigurationError("exponent and coefficient lists differ in length")
        if any(not a > 0 for a in self.exponents):
            raise ConfigurationError("Gaussian exponents must be positive")
        if self.l < 0:
            raise ConfigurationError("angular momentum must be non-negative")

    @property
    def size(self):
        return (self.l + 1) * (self.l + 2) // 2

    def scaled(self, exponent_factor=1.0, center_factor=1.0, shift=(0.0, 0.0, 0.0)):
        center = tuple(center_factor * c + s for c, s in zip(self.center, shift))
        return Shell(center, self.l, tuple(a * exponent_factor for a in self.exponents), self.coefficients)


@dataclasses.dataclass(frozen=True)
class BasisSet:
    shells: tuple

    def __post_init__(self):
        object.__setattr__(self, "shells", tuple(self.shells))

    @property
    def n_functions(self):
        return sum(sh.size for sh in self.shells)

    def __add__(self, other):
        return BasisSet(self.shells + other.shells)

    def labels(self):
        out = []
        for i, sh in enumerate(self.shells):
            for cart in _CARTESIAN.get(sh.l, ()):
                out.append(f"{i}:{_SUFFIX[cart]}")
        return out


def even_tempered(center, n, alpha_min, ratio, l=0):
    """Uncontracted shells with exponents alpha_min * ratio**k, k < n."""
    return BasisSet(tuple(Shell(center, l, (alpha_min * ratio**k,), (1.0,)) for k in range(n)))


# ---------------------------------------------------------------- Boys function


def boys(n_max, T):
    """Boys functions F_0..F_{n_max} at T; trailing axis indexes the order.

    F_{n_max} comes from the regularized incomplete gamma function (or a
    Taylor series for T < 1) and lower orders from the stable downward
    recurrence F_{n-1} = (2 T F_n + exp(-T)) / (2n - 1).
    """
    T = np.asarray(T, dtype=float)
    scalar = T.ndim == 0
    T = np.atleast_1d(T)
    out = np.empty(T.shape + (n_max + 1,))
    small = T < 1.0
    if np.any(small):
        Ts = T[small]
        k = np.arange(40)
        terms = (-Ts[:, None]) ** k / special.factorial(k)
        for n in range(n_max + 1):
            out[small, n] = terms @ (1.0 / (2 * n + 2 * k + 1))
    big = ~small
    if np.any(big):
        Tb = T[big]
        a = n_max + 0.5
        Fn = special.gamma(a) * special.gammainc(a, Tb) / (2.0 * Tb**a)
        out[big, n_max] = Fn
        e = np.exp(-Tb)
        for n in range(n_max, 0, -1):
            Fn = (2.0 * Tb * Fn + e) / (2 * n - 1)
            out[big, n - 1] = Fn
    return out[0] if scalar else out


# ------------------------------------------------------ Hermite expansions


def _hermite_1d(imax, jmax, a, b, xab):
    """E^{ij}_t coefficients for one Cartesian direction."""
    p = a + b
    mu = a * b / p
    xpa = -b / p * xab
    xpb = a / p * xab
    E = np.zeros((imax + 1, jmax + 1, imax + jmax + 2))
    E[0, 0, 0] = math.exp(-mu * xab * xab)
    for i in range(imax + 1):
        for j in range(jmax + 1):
            if i == 0 and j == 0:
                continue
            if i > 0:
                prev, x = E[i - 1, j], xpa
            else:
                prev, x = E[i, j - 1], xpb
            for t in range(i + j + 1):
                val = x * prev[t] + (t + 1) * prev[t + 1]
                if t > 0:
                    val += prev[t - 1] / (2 * p)
                E[i, j, t] = val
    return E


def _hermite_R(L, alpha, pc, F):
    """R_{tuv}(alpha, PC) for t + u + v <= L given Boys values F[0..L]."""
    R = np.zeros((L + 1, L + 1, L + 1, L + 1))
    for n in range(L + 1):
        R[n, 0, 0, 0] = (-2.0 * alpha) ** n * F[n]
    x, y, z = pc
    for order in range(1, L + 1):
        for t in range(order + 1):
            for u in range(order - t + 1):
                v = order - t - u
                for n in range(L - order + 1):
                    if t > 0:
                        val = x * R[n + 1, t - 1, u, v]
                        if t > 1:
                            val += (t - 1) * R[n + 1, t - 2, u, v]
                    elif u > 0:
                        val = y * R[n + 1, t, u - 1, v]
                        if u > 1:
                            val += (u - 1) * R[n + 1, t, u - 2, v]
                    else:
                        val = z * R[n + 1, t, u, v - 1]
                        if v > 1:
                            val += (v - 1) * R[n + 1, t, u, v - 2]
                    R[n, t, u, v] = val
    return R[0]


def _tuv_list(L):
    return [(t, u, v) for t in range(L + 1) for u in range(L + 1 - t) for v in range(L + 1 - t - u)]


def _primitive_norm(alpha, l):
    # (2l - 1)!! = 1 for l <= 1
    return (2.0 * alpha / math.pi) ** 0.75 * (4.0 * alpha) ** (l / 2.0)


def _contraction_norm(shell):
    a = np.array(shell.exponents)
    c = np.array(shell.coefficients)
    ov = (2.0 * np.sqrt(np.outer(a, a)) / np.add.outer(a, a)) ** (shell.l + 1.5)
    return 1.0 / math.sqrt(c @ ov @ c)


class _Engine:
    """Shell-pair bookkeeping shared by the one- and two-electron routines."""

    def __init__(self, basis):
        for sh in basis.shells:
            if sh.l > MAX_L:
                raise UnsupportedFeatureError(
                    f"angular momentum l={sh.l} is not supported by the built-in integral "
                    f"engine (l <= {MAX_L}); supply integrals through an FCIDUMP file instead"
                )
        self.shells = basis.shells
        self.offsets = np.cumsum([0] + [sh.size for sh in self.shells])
        self.M = int(self.offsets[-1])
        self.norms = [
            [_contraction_norm(sh) * c * _primitive_norm(a, sh.l) for a, c in zip(sh.exponents, sh.coefficients)]
            for sh in self.shells
        ]

    def slices(self, i):
        return slice(self.offsets[i], self.offsets[i + 1])

    def primitive_pairs(self, i, j, extra_j=0):
        """Yield (a, b, weight, Ex, Ey, Ez, p, P) for shells i, j."""
        A = np.array(self.shells[i].center)
        B = np.array(self.shells[j].center)
        la, lb = self.shells[i].l, self.shells[j].l
        AB = A - B
        for a, na in zip(self.shells[i].exponents, self.norms[i]):
            for b, nb in zip(self.shells[j].exponents, self.norms[j]):
                p = a + b
                Es = [_hermite_1d(la, lb + extra_j, a, b, AB[d]) for d in range(3)]
                P = (a * A + b * B) / p
                yield a, b, na * nb, Es, p, P

    # ---- one-electron

    def one_electron(self, kinetic=True, charges=(), positions=()):
        M = self.M
        S = np.zeros((M, M))
        T = np.zeros((M, M))
        V = np.zeros((M, M))
        for i in range(len(self.shells)):
            for j in range(i + 1):
                si, sj = self.slices(i), self.slices(j)
                s_blk, t_blk, v_blk = self._one_electron_block(i, j, charges, positions)
                S[si, sj] = s_blk
                T[si, sj] = t_blk
                V[si, sj] = v_blk
        S = np.tril(S) + np.tril(S, -1).T
        T = np.tril(T) + np.tril(T, -1).T
        V = np.tril(V) + np.tril(V, -1).T
        return S, T, V

    def _one_electron_block(self, i, j, charges, positions):
        ci = _CARTESIAN[self.shells[i].l]
        cj = _CARTESIAN[self.shells[j].l]
        L = self.shells[i].l + self.shells[j].l
        tuv = _tuv_list(L)
        S = np.zeros((len(ci), len(cj)))
        T = np.zeros_like(S)
        V = np.zeros_like(S)
        for a, b, w, Es, p, P in self.primitive_pairs(i, j, extra_j=2):
            s1 = [E[:, :, 0] * math.sqrt(math.pi / p) for E in Es]
            t1 = []
            for s in s1:
                t = np.zeros((s.shape[0], s.shape[1] - 2))
                for jj in range(t.shape[1]):
                    t[:, jj] = 2.0 * b * (2 * jj + 1) * s[:, jj] - 4.0 * b * b * s[:, jj + 2]
                    if jj >= 2:
                        t[:, jj] -= jj * (jj - 1) * s[:, jj - 2]
                t1.append(t)
            Rs = []
            for Zc, Cpos in zip(charges, positions):
                pc = P - Cpos
                F = boys(L, p * (pc @ pc))
                Rs.append((Zc, _hermite_R(L, p, pc, F)))
            for x, (ax, ay, az) in enumerate(ci):
                for y, (bx, by, bz) in enumerate(cj):
                    sx, sy, sz = s1[0][ax, bx], s1[1][ay, by], s1[2][az, bz]
                    S[x, y] += w * sx * sy * sz
                    T[x, y] += w * (t1[0][ax, bx] * sy * sz + sx * t1[1][ay, by] * sz + sx * sy * t1[2][az, bz])
                    if Rs:
                        acc = 0.0
                        for Zc, R in Rs:
                            part = 0.0
                            for t, u, v in tuv:
                                if t > ax + bx or u > ay + by or v > az + bz:
                                    continue
                                part += Es[0][ax, bx, t] * Es[1][ay, by, u] * Es[2][az, bz, v] * R[t, u, v]
                            acc -= Zc * part
                        V[x, y] += w * 2.0 * math.pi / p * acc
        return S, T, V

    # ---- two-electron

    def _pair_data(self, i, j):
        """Hermite expansion of every primitive pair of shells (i, j)."""
        ci = _CARTESIAN[self.shells[i].l]
        cj = _CARTESIAN[self.shells[j].l]
        L = self.shells[i].l + self.shells[j].l
        tuv = _tuv_list(L)
        out = []
        for a, b, w, Es, p, P in self.primitive_pairs(i, j):
            Eflat = np.zeros((len(ci) * len(cj), len(tuv)))
            for x, (ax, ay, az) in enumerate(ci):
                for y, (bx, by, bz) in enumerate(cj):
                    row = x * len(cj) + y
                    for k, (t, u, v) in enumerate(tuv):
                        Eflat[row, k] = Es[0][ax, bx, t] * Es[1][ay, by, u] * Es[2][az, bz, v]
            out.append((p, P, w * Eflat))
        return L, np.array(tuv, dtype=int), out

    def repulsion(self):
        M = self.M
        eri = np.zeros((M, M, M, M))
        n = len(self.shells)
        pairs = [(i, j) for i in range(n) for j in range(i + 1)]
        s_shells = [i for i, sh in enumerate(self.shells) if sh.l == 0]
        if s_shells:
            self._repulsion_s(eri, s_shells)
        data = {}
        for ij in pairs:
            data[ij] = self._pair_data(*ij)
        for x, (i, j) in enumerate(pairs):
            for k, l in pairs[: x + 1]:
                if self.shells[i].l + self.shells[j].l + self.shells[k].l + self.shells[l].l == 0:
                    continue
                blk = self._repulsion_block(data[(i, j)], data[(k, l)])
                shape = tuple(self.shells[s].size for s in (i, j, k, l))
                blk = blk.reshape(shape)
                I, J, K, L = (self.slices(s) for s in (i, j, k, l))
                eri[I, J, K, L] = blk
                eri[J, I, K, L] = blk.transpose(1, 0, 2, 3)
                eri[I, J, L, K] = blk.transpose(0, 1, 3, 2)
                eri[J, I, L, K] = blk.transpose(1, 0, 3, 2)
                eri[K, L, I, J] = blk.transpose(2, 3, 0, 1)
                eri[L, K, I, J] = blk.transpose(3, 2, 0, 1)
                eri[K, L, J, I] = blk.transpose(2, 3, 1, 0)
                eri[L, K, J, I] = blk.transpose(3, 2, 1, 0)
        return symmetrize_eri(eri)

    def _repulsion_block(self, bra, ket):
        Lab, tuv_ab, prims_ab = bra
        Lcd, tuv_cd, prims_cd = ket
        L = Lab + Lcd
        sign = (-1.0) ** tuv_cd.sum(axis=1)
        idx = tuv_ab[:, None, :] + tuv_cd[None, :, :]
        out = 0.0
        for p, P, Eab in prims_ab:
            for q, Q, Ecd in prims_cd:
                alpha = p * q / (p + q)
                pq = P - Q
                F = boys(L, alpha * (pq @ pq))
                R = _hermite_R(L, alpha, pq, F)
                Rmat = R[idx[..., 0], idx[..., 1], idx[..., 2]] * sign[None, :]
                pref = 2.0 * math.pi**2.5 / (p * q * math.sqrt(p + q))
                out = out + pref * (Eab @ Rmat @ Ecd.T)
        return out

    def _repulsion_s(self, eri, s_shells):
        """All-s quartets, vectorized over primitive pairs."""
        rows = []
        for x, i in enumerate(s_shells):
            for j in s_shells[: x + 1]:
                for a, b, w, Es, p, P in self.primitive_pairs(i, j):
                    K = w * Es[0][0, 0, 0] * Es[1][0, 0, 0] * Es[2][0, 0, 0]
                    rows.append((self.offsets[i], self.offsets[j], p, P[0], P[1], P[2], K))
        if not rows:
            return
        arr = np.array(rows)
        fi = arr[:, 0].astype(int)
        fj = arr[:, 1].astype(int)
        p = arr[:, 2]
        P = arr[:, 3:6]
        K = arr[:, 6]
        q = p[None, :]
        pp = p[:, None]
        alpha = pp * q / (pp + q)
        d2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
        F0 = boys(0, alpha * d2)[..., 0]
        vals = 2.0 * math.pi**2.5 / (pp * q * np.sqrt(pp + q)) * F0 * np.outer(K, K)
        M = self.M
        acc = np.zeros((M, M, M, M))
        I = np.broadcast_to(fi[:, None], vals.shape)
        J = np.broadcast_to(fj[:, None], vals.shape)
        Kk = np.broadcast_to(fi[None, :], vals.shape)
        Ll = np.broadcast_to(fj[None, :], vals.shape)
        np.add.at(acc, (I, J, Kk, Ll), vals)
        mask = acc != 0.0
        eri[mask] = acc[mask]


# ------------------------------------------------------------- public API


def overlap_kinetic_attraction(system, basis):
    """Overlap, (-Laplacian) and nuclear attraction matrices (AO basis)."""
    eng = _Engine(basis)
    charges = [n.charge for n in system.nuclei]
    positions = [np.array(n.position) for n in system.nuclei]
    return eng.one_electron(charges=charges, positions=positions)


def point_charge_matrix(basis, center):
    """Matrix of the operator 1/|x - center| (positive definite)."""
    eng = _Engine(basis)
    _, _, V = eng.one_electron(charges=[1.0], positions=[np.asarray(center, dtype=float)])
    return -V


def build_gaussian_integrals(system, basis, prune_threshold=DEFAULT_PRUNE_THRESHOLD, include_nuclear_repulsion=False):
    """Integral tables for nuclear attraction and Coulomb repulsion in a Gaussian basis."""
    if basis.n_functions < 1:
        raise ConfigurationError("basis set is empty")
    if basis.n_functions < system.n_electrons:
        raise ConfigurationError(
            f"basis dimension {basis.n_functions} is smaller than the electron count {system.n_electrons}"
        )
    eng = _Engine(basis)
    charges = [n.charge for n in system.nuclei]
    positions = [np.array(n.position) for n in system.nuclei]
    S, T, V = eng.one_electron(charges=charges, positions=positions)
    eri = eng.repulsion()
    offset = system.nuclear_repulsion() if include_nuclear_repulsion else 0.0
    tables = IntegralTables(
        S=symmetrize_matrix(S),
        hcore=symmetrize_matrix(system.kinetic_factor * T + V),
        eri=eri,
        energy_offset=offset,
        prune_threshold=prune_threshold,
        labels=tuple(basis.labels()),
    )
    if tables.n_pruned:
        log.warning(
            "linear dependence: %d of %d basis directions pruned (overlap eigenvalue < %.1e)",
            tables.n_pruned,
            tables.M,
            prune_threshold,
        )
    return tables
