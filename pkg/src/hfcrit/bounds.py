"""Upper bounds on excited critical levels from one-electron attachment.

An (N-1)-electron determinant Phi is extended by one orbital psi taken
from a k-dimensional subspace orthogonal to Phi. The energy of the
extended determinant is exactly

    E(Phi ^ psi) = E(Phi) + <psi, F_Phi psi>

so the largest energy over the unit sphere of the subspace is
E(Phi) + lambda_max(Q) with Q the Fock matrix of Phi on the subspace.
"""

from __future__ import annotations

import csv
import dataclasses
import logging

import numpy as np

from . import hf_core as hc
from . import solvers
from .errors import ContractViolation, DegenerateConstructionError
from .integrals import BasisSet, Shell, build_gaussian_integrals, point_charge_matrix

log = logging.getLogger(__name__)

PROJECTION_FLOOR = 1e-6
DEFAULT_GHOST_EXPONENTS = (4.0, 8.0, 16.0, 32.0)


@dataclasses.dataclass
class TrialSphereBound:
    k: int
    base_energy: float
    form_matrix: np.ndarray
    bound: float
    subspace: str  # "optimal" or "far"
    orbitals: np.ndarray  # M x k, orthonormal and orthogonal to the core
    core: hc.OrbitalSet | None
    tables: object
    R: float | None = None
    projection_norms: np.ndarray | None = None

    @property
    def lambda_max(self):
        return float(np.linalg.eigvalsh(self.form_matrix)[-1])

    @property
    def lambda_min(self):
        return float(np.linalg.eigvalsh(self.form_matrix)[0])

    @property
    def below_threshold(self):
        """True when the bound lies strictly below the (N-1)-electron energy."""
        return self.bound < self.base_energy

    def to_dict(self):
        return {
            "k": self.k,
            "subspace": self.subspace,
            "R": self.R,
            "base_energy": float(self.base_energy),
            "lambda_max": self.lambda_max,
            "bound": float(self.bound),
            "below_threshold": bool(self.below_threshold),
            "form_matrix": np.asarray(self.form_matrix).tolist(),
        }


def sphere_energy(tb, omega):
    """Hartree-Fock energy of the core extended by psi(omega), |omega| = 1."""
    omega = np.asarray(omega, dtype=float)
    psi = tb.orbitals @ (omega / np.linalg.norm(omega))
    C = psi[:, None] if tb.core is None else np.hstack([tb.core.C, psi[:, None]])
    return hc.hf_energy(hc.OrbitalSet(C, tb.tables))


def _core(tables, N, core, opts):
    """Core orbitals, their energy and Fock matrix for the (N-1)-problem."""
    if N < 1:
        raise ContractViolation("need at least one electron")
    if N == 1:
        return None, float(tables.energy_offset), tables.hcore
    if core is None:
        cp = solvers.scf_ground(tables, N - 1, opts)
        if not cp.converged:
            log.warning("(N-1)-electron SCF did not converge; bound uses its best iterate")
        core = cp.orbitals
    elif isinstance(core, solvers.CriticalPoint):
        core = core.orbitals
    if core.N != N - 1:
        raise ContractViolation(f"core has {core.N} orbitals, expected {N - 1}")
    return core, hc.hf_energy(core), hc.fock_build(core)


def _virtuals(tables, core):
    return tables.X if core is None else hc.virtual_space(core)


def trial_bound_optimal(tables, N, k, core=None, opts=None):
    """Bound from the k lowest virtual levels of the (N-1)-electron Fock operator.

    Among all k-dimensional subspaces orthogonal to the core this choice
    minimizes lambda_max(Q), which then equals the k-th virtual level.
    """
    core, base, F = _core(tables, N, core, opts)
    V = _virtuals(tables, core)
    if k < 1 or k > V.shape[1]:
        raise ContractViolation(f"level k = {k} needs k virtual orbitals; only {V.shape[1]} available")
    eps, U = np.linalg.eigh(V.T @ F @ V)
    psi = hc.orthonormalize_columns(hc.fix_phase(V @ U[:, :k]), tables.S)
    Q = psi.T @ F @ psi
    Q = 0.5 * (Q + Q.T)
    return TrialSphereBound(
        k=k,
        base_energy=base,
        form_matrix=Q,
        bound=base + float(np.linalg.eigvalsh(Q)[-1]),
        subspace="optimal",
        orbitals=psi,
        core=core,
        tables=tables,
    )


def ghost_shells(center, R, k, exponents=DEFAULT_GHOST_EXPONENTS):
    """k s-shells at `center` with exponents alpha_j / R**2.

    Scaling the exponents with 1/R**2 dilates a fixed trial space by R,
    so kinetic energy falls off as 1/R**2 while the far-field Coulomb
    terms fall off as 1/R.
    """
    if k > len(exponents):
        raise ContractViolation(f"{len(exponents)} ghost exponents given, {k} needed")
    return BasisSet(tuple(Shell(tuple(center), 0, (a / R**2,), (1.0,)) for a in exponents[:k]))


def far_center(system, R, direction=(0.0, 0.0, 1.0)):
    nu = np.asarray(direction, dtype=float)
    nu = nu / np.linalg.norm(nu)
    return system.charge_barycenter + 2.0 * R * nu


def far_setup(system, basis, k, R, direction=(0.0, 0.0, 1.0), exponents=DEFAULT_GHOST_EXPONENTS):
    """Integral tables of `basis` extended by k ghost functions at distance 2R.

    Returns ``(tables, ghost_indices)``.
    """
    ghosts = ghost_shells(far_center(system, R, direction), R, k, exponents)
    tables = build_gaussian_integrals(system, basis + ghosts)
    M0 = basis.n_functions
    return tables, list(range(M0, M0 + k))


def trial_bound_far(tables, N, k, ghost_indices, R=None, core=None, opts=None):
    """Bound from the ghost functions after projection against the core.

    The ghost columns are projected onto the orthogonal complement of the
    core orbitals and orthonormalized; a ghost function that loses all but
    1e-6 of its norm in the projection makes the construction degenerate.
    """
    if len(ghost_indices) != k:
        raise ContractViolation(f"{len(ghost_indices)} ghost functions for level k = {k}")
    core, base, F = _core(tables, N, core, opts)
    S = tables.S
    G = tables.function_coefficients(ghost_indices)
    G = G / np.sqrt(np.einsum("pj,pq,qj->j", G, S, G))
    if core is not None:
        G = G - core.C @ (core.C.T @ S @ G)
    norms = np.sqrt(np.clip(np.einsum("pj,pq,qj->j", G, S, G), 0.0, None))
    if np.any(norms < PROJECTION_FLOOR):
        raise DegenerateConstructionError(
            f"ghost functions lie inside the occupied span (projected norms {norms})"
        )
    gram = G.T @ S @ G
    w = np.linalg.eigvalsh(gram)
    if w[0] < PROJECTION_FLOOR**2:
        raise DegenerateConstructionError(f"projected ghost functions are linearly dependent (Gram eigenvalue {w[0]:.2e})")
    psi = hc.orthonormalize_columns(G, S)
    Q = psi.T @ F @ psi
    Q = 0.5 * (Q + Q.T)
    return TrialSphereBound(
        k=k,
        base_energy=base,
        form_matrix=Q,
        bound=base + float(np.linalg.eigvalsh(Q)[-1]),
        subspace="far",
        orbitals=psi,
        core=core,
        tables=tables,
        R=None if R is None else float(R),
        projection_norms=norms,
    )


def far_q_min(tb, system, basis):
    """R times the smallest eigenvalue of 1/|x - barycenter| on the trial space."""
    P = point_charge_matrix(basis, system.charge_barycenter)
    return float(tb.R * np.linalg.eigvalsh(tb.orbitals.T @ P @ tb.orbitals)[0])


@dataclasses.dataclass
class FarCurve:
    points: list  # TrialSphereBound per R
    q_min: list  # per R

    @property
    def R(self):
        return np.array([p.R for p in self.points])

    @property
    def excess(self):
        return np.array([p.bound - p.base_energy for p in self.points])


def far_bound_curve(system, basis, k, Rs, direction=(0.0, 0.0, 1.0), exponents=DEFAULT_GHOST_EXPONENTS, opts=None):
    """Far-placed trial bounds of the N-electron system for each R in `Rs`."""
    N = system.n_electrons
    points, qs = [], []
    for R in Rs:
        tables, ghosts = far_setup(system, basis, k, R, direction, exponents)
        tb = trial_bound_far(tables, N, k, ghosts, R=R, opts=opts)
        points.append(tb)
        full = basis + ghost_shells(far_center(system, R, direction), R, k, exponents)
        qs.append(far_q_min(tb, system, full))
    return FarCurve(points, qs)


@dataclasses.dataclass
class AsymptoticFit:
    a: float
    b: float
    se_a: float
    se_b: float
    residual_rms: float
    unreliable: bool
    predicted_a: float | None = None

    @property
    def relative_deviation(self):
        if self.predicted_a is None or self.predicted_a == 0.0:
            return None
        return abs(self.a - self.predicted_a) / abs(self.predicted_a)

    @property
    def consistent_with_zero(self):
        return abs(self.a) <= 3.0 * self.se_a

    def to_dict(self):
        out = {k: (None if v is None else float(v)) for k, v in dataclasses.asdict(self).items()}
        out["unreliable"] = bool(self.unreliable)
        out["relative_deviation"] = self.relative_deviation
        out["consistent_with_zero"] = bool(self.consistent_with_zero)
        return out


def asymptotic_fit(R, excess, N=None, Z=None, q_min=None):
    """Least-squares fit of excess(R) = a/R + b/R**2 with standard errors.

    With N, Z and q_min the leading coefficient predicted by the far-field
    charge balance, (N - 1 - Z) * q_min, is attached for comparison. The
    fit is flagged unreliable when the excess is not monotone over the three
    largest R, or when the two-term model leaves residuals above 1e-6 of
    the largest excess.
    """
    R = np.asarray(R, dtype=float)
    y = np.asarray(excess, dtype=float)
    if R.size < 5:
        raise ContractViolation("the asymptotic fit needs at least 5 points")
    if R.max() < 10.0 * R.min():
        raise ContractViolation("R values must span at least a decade")
    order = np.argsort(R)
    R, y = R[order], y[order]
    A = np.column_stack([1.0 / R, 1.0 / R**2])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = R.size - 2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    steps = np.diff(y[-3:])
    unreliable = bool(not (np.all(steps >= 0) or np.all(steps <= 0)))
    unreliable |= bool(np.max(np.abs(resid)) > 1e-6 * np.max(np.abs(y)))
    predicted = None
    if N is not None and Z is not None and q_min is not None:
        predicted = float((N - 1 - Z) * q_min)
    return AsymptoticFit(
        a=float(coef[0]),
        b=float(coef[1]),
        se_a=float(np.sqrt(cov[0, 0])),
        se_b=float(np.sqrt(cov[1, 1])),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        unreliable=unreliable,
        predicted_a=predicted,
    )


def write_bound_curve(path, points):
    """CSV with columns R, base_energy, lambda_max, bound (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["R", "base_energy", "lambda_max", "bound"])
        for p in points:
            w.writerow([f"{v:.17g}" for v in (p.R, p.base_energy, p.lambda_max, p.bound)])
