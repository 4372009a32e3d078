"""Searches for Hartree-Fock critical points and their diagnostics.

Ground states come from a self-consistent field iteration with aufbau
occupation. Excited critical points come either from the same iteration
with overlap-maximizing occupation, or from Levenberg-Marquardt
minimization of the squared tangent gradient.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from collections import deque

import numpy as np

from . import hf_core as hc
from .errors import ContractViolation, NonStationaryWarning

log = logging.getLogger(__name__)

DEGENERACY_GAP = 1e-9
DIIS_CONDITION_LIMIT = 1e12
DUPLICATE_TOL = 1e-6


@dataclasses.dataclass
class SolverOptions:
    max_iterations: int = 300
    tol: float = 1e-8
    diis_depth: int = 8
    level_shift: float = 0.0
    shift_ladder: tuple = (0.1, 0.5, 2.0)
    occupation: object = "aufbau"  # "aufbau", "mom" or a list of 0-based indices
    seed: int = 0
    n_starts: int = 1
    compute_morse: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ContractViolation(f"tolerance must be positive, got {self.tol}")
        if self.max_iterations < 1:
            raise ContractViolation("max_iterations must be at least 1")
        if self.level_shift < 0:
            raise ContractViolation("level shift must be non-negative")
        if self.diis_depth < 0:
            raise ContractViolation("diis_depth must be non-negative")


@dataclasses.dataclass
class CriticalPoint:
    orbitals: hc.OrbitalSet
    energy: float
    multipliers: np.ndarray
    fock_spectrum: np.ndarray
    residual_norm: float
    converged: bool
    morse_index: int | None = None
    iterations: int = 0
    level_shift: float = 0.0
    trace: list = dataclasses.field(default_factory=list)
    notes: list = dataclasses.field(default_factory=list)
    duplicate_of: int | None = None

    @property
    def N(self):
        return self.orbitals.N

    def to_dict(self, include_orbitals=False):
        out = {
            "energy": float(self.energy),
            "multipliers": [float(x) for x in self.multipliers],
            "fock_spectrum": [float(x) for x in self.fock_spectrum],
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "morse_index": self.morse_index,
            "iterations": int(self.iterations),
            "level_shift": float(self.level_shift),
            "notes": list(self.notes),
            "duplicate_of": self.duplicate_of,
            "trace": self.trace,
        }
        if include_orbitals:
            out["orbitals"] = self.orbitals.C.tolist()
        return out


def _generalized_eigh(F, X):
    eps, U = np.linalg.eigh(X.T @ F @ X)
    return eps, X @ U


def hcore_guess(tables, N, occupation=None):
    """Orbitals from generalized eigenvectors of (hcore, S)."""
    eps, C = _generalized_eigh(tables.hcore, tables.X)
    occ = list(range(N)) if occupation is None else list(occupation)
    if len(occ) != N or len(set(occ)) != N or max(occ) >= C.shape[1] or min(occ) < 0:
        raise ContractViolation(f"occupation {occ} is not {N} distinct indices below {C.shape[1]}")
    return hc.OrbitalSet(C[:, occ], tables)


def random_guess(tables, N, seed):
    """Seeded random orthonormal frame in the retained basis."""
    rng = np.random.default_rng(seed)
    X = tables.X
    Q, _ = np.linalg.qr(rng.normal(size=(X.shape[1], N)))
    return hc.OrbitalSet(X @ Q, tables)


class _DIIS:
    def __init__(self, depth):
        self.depth = depth
        self.focks = deque(maxlen=max(depth, 1))
        self.errors = deque(maxlen=max(depth, 1))

    def reset(self):
        self.focks.clear()
        self.errors.clear()

    def extrapolate(self, F, err):
        if self.depth == 0:
            return F
        self.focks.append(F)
        self.errors.append(err)
        n = len(self.focks)
        if n < 2:
            return F
        B = np.empty((n + 1, n + 1))
        B[-1, :] = B[:, -1] = -1.0
        B[-1, -1] = 0.0
        for i in range(n):
            for j in range(i + 1):
                B[i, j] = B[j, i] = np.sum(self.errors[i] * self.errors[j])
        scale = np.max(np.abs(np.diag(B)[:n]))
        if scale > 0:
            B[:n, :n] /= scale
        if np.linalg.cond(B) > DIIS_CONDITION_LIMIT:
            self.reset()
            self.focks.append(F)
            self.errors.append(err)
            return F
        rhs = np.zeros(n + 1)
        rhs[-1] = -1.0
        c = np.linalg.solve(B, rhs)[:n]
        return sum(ci * Fi for ci, Fi in zip(c, self.focks))


def _select(eps, C_new, C_prev, S, N, rule):
    if isinstance(rule, str) and rule == "aufbau":
        return list(range(N))
    if isinstance(rule, str) and rule == "mom":
        overlap = np.sum((C_prev.T @ S @ C_new) ** 2, axis=0)
        return sorted(np.argsort(-overlap, kind="stable")[:N].tolist())
    return list(rule)


def _stalled(residuals, window=12):
    """No new smallest residual within the last `window` cycles."""
    if len(residuals) <= window:
        return False
    return min(residuals[-window:]) >= min(residuals[:-window])


def _finish(orbitals, converged, iterations, shift, trace, notes, compute_morse):
    F = hc.fock_build(orbitals)
    orbitals, mu = hc.canonicalize(orbitals, F)
    F = hc.fock_build(orbitals)
    eps, _ = _generalized_eigh(F, orbitals.tables.X)
    res = hc.residual_norm(orbitals, F)
    morse = None
    if compute_morse and converged:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonStationaryWarning)
            morse = hc.morse_index(hc.orbital_hessian(orbitals, F))
    N = orbitals.N
    if converged and N < eps.size and eps[N] - eps[N - 1] < DEGENERACY_GAP and np.all(mu <= eps[N - 1] + 1e-8):
        notes.append(f"degenerate Fock levels at the occupation edge (gap {eps[N] - eps[N - 1]:.2e})")
    return CriticalPoint(
        orbitals=orbitals,
        energy=hc.hf_energy(orbitals),
        multipliers=mu,
        fock_spectrum=eps,
        residual_norm=res,
        converged=converged,
        morse_index=morse,
        iterations=iterations,
        level_shift=shift,
        trace=trace,
        notes=notes,
    )


def scf(tables, guess, opts=None):
    """Self-consistent field iteration from `guess` (an OrbitalSet).

    Each cycle diagonalizes the extrapolated, level-shifted Fock matrix and
    keeps the orbitals chosen by ``opts.occupation``. When the residual
    stalls, the iteration restarts from the best iterate with the next level
    shift of the ladder; once the ladder is exhausted, extrapolation is
    switched off.
    Returns the last iterate if converged, otherwise the iterate with the
    smallest residual, flagged unconverged.
    """
    opts = opts or SolverOptions()
    S, X = tables.S, tables.X
    N = guess.N
    orbitals = guess
    shift = opts.level_shift
    ladder = [s for s in opts.shift_ladder if s > shift]
    diis = _DIIS(opts.diis_depth)
    trace, notes, residuals = [], [], []
    best = (np.inf, orbitals, 0)
    for it in range(1, opts.max_iterations + 1):
        F = hc.fock_build(orbitals)
        res = hc.residual_norm(orbitals, F)
        energy = hc.hf_energy(orbitals)
        residuals.append(res)
        trace.append({"iteration": it, "energy": energy, "residual": res, "shift": shift})
        if res < best[0]:
            best = (res, orbitals, it)
        if res <= opts.tol:
            return _finish(orbitals, True, it, shift, trace, notes, opts.compute_morse)
        if _stalled(residuals):
            if ladder:
                shift = ladder.pop(0)
                notes.append(f"stalled at iteration {it}: restart with level shift {shift}")
            elif diis.depth:
                diis = _DIIS(0)
                notes.append(f"stalled at iteration {it}: restart without extrapolation")
            diis.reset()
            residuals.clear()
            orbitals = best[1]
            F = hc.fock_build(orbitals)
        D = orbitals.density
        FDS = F @ D @ S
        err = X.T @ (FDS - FDS.T) @ X
        Fx = diis.extrapolate(F, err)
        if shift:
            Fx = Fx + shift * (S - S @ D @ S)
        eps, Cn = _generalized_eigh(Fx, X)
        occ = _select(eps, Cn, orbitals.C, S, N, opts.occupation)
        if opts.occupation == "aufbau" and N < eps.size and eps[N] - eps[N - 1] < DEGENERACY_GAP:
            note = "degenerate aufbau edge; lowest index kept"
            if note not in notes:
                notes.append(note)
        orbitals = hc.OrbitalSet(hc.orthonormalize_columns(Cn[:, occ], S), tables)
    notes.append(f"no convergence in {opts.max_iterations} iterations")
    return _finish(best[1], False, opts.max_iterations, shift, trace, notes, opts.compute_morse)


def scf_ground(tables, N, opts=None):
    """Lowest Hartree-Fock energy found over the configured starts.

    Start 0 is the hcore guess; further starts use seeded random frames.
    Converged points are preferred over unconverged ones.
    """
    opts = opts or SolverOptions()
    if N < 1 or N > tables.X.shape[1]:
        raise ContractViolation(f"cannot place N = {N} electrons in {tables.X.shape[1]} functions")
    run_opts = dataclasses.replace(opts, occupation="aufbau")
    best = None
    for start in range(max(opts.n_starts, 1)):
        guess = hcore_guess(tables, N) if start == 0 else random_guess(tables, N, opts.seed + start)
        cp = scf(tables, guess, run_opts)
        key = (not cp.converged, cp.energy)
        if best is None or key < (not best.converged, best.energy):
            best = cp
    return best


@dataclasses.dataclass
class IonizationChain:
    energies: list  # J(n), n = 0..N
    points: list  # CriticalPoint for n = 1..N (None at n = 0)

    @property
    def margins(self):
        return [self.energies[n - 1] - self.energies[n] for n in range(1, len(self.energies))]

    @property
    def binding(self):
        return [m > 0 for m in self.margins]

    @property
    def converged(self):
        return all(p.converged for p in self.points if p is not None)

    def to_dict(self):
        return {
            "energies": [float(e) for e in self.energies],
            "margins": [float(m) for m in self.margins],
            "binding": [bool(b) for b in self.binding],
            "converged": self.converged,
            "points": [None if p is None else p.to_dict() for p in self.points],
        }


def ionization_chain(tables, N, opts=None):
    """Ground energies J(n) for n = 0..N; J(0) is the table offset."""
    energies = [float(tables.energy_offset)]
    points = [None]
    for n in range(1, N + 1):
        cp = scf_ground(tables, n, opts)
        energies.append(cp.energy)
        points.append(cp)
    return IonizationChain(energies, points)


def _residual_minimization(tables, guess, opts):
    """Levenberg-Marquardt on half the squared tangent gradient.

    In the rotation chart around the current point the gradient g has
    Jacobian equal to the orbital Hessian H, giving the damped Gauss-Newton
    step (H^2 + lam I) d = -H g followed by the exponential retraction.
    """
    orbitals = guess
    lam = 1e-3
    trace, notes = [], []
    best = (np.inf, orbitals)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonStationaryWarning)
        V = hc.virtual_space(orbitals)
        F = hc.fock_build(orbitals)
        g = hc.tangent_gradient(orbitals, F, V).ravel()
        for it in range(1, opts.max_iterations + 1):
            res = hc.residual_norm(orbitals, F)
            trace.append({"iteration": it, "energy": hc.hf_energy(orbitals), "residual": res, "shift": lam})
            if res < best[0]:
                best = (res, orbitals)
            if res <= opts.tol:
                return _finish(orbitals, True, it, 0.0, trace, notes, opts.compute_morse)
            H = hc.orbital_hessian(orbitals, F, V)
            rhs = -H @ g
            H2 = H @ H
            accepted = False
            for _ in range(30):
                step = np.linalg.solve(H2 + lam * np.eye(H.shape[0]), rhs)
                trial = hc.rotate(orbitals, step, V)
                Vt = hc.virtual_space(trial)
                Ft = hc.fock_build(trial)
                gt = hc.tangent_gradient(trial, Ft, Vt).ravel()
                if gt @ gt < g @ g:
                    orbitals, V, F, g = trial, Vt, Ft, gt
                    lam = max(lam / 3.0, 1e-12)
                    accepted = True
                    break
                lam *= 4.0
            if not accepted:
                notes.append(f"stalled at iteration {it}: no descent step for the squared gradient")
                break
    if not notes:
        notes.append(f"no convergence in {opts.max_iterations} iterations")
    return _finish(best[1], False, len(trace), 0.0, trace, notes, opts.compute_morse)


def excited_search(tables, N, opts=None, strategy="mom", guess=None, known=()):
    """Search for a (generally non-minimal) critical point near `guess`.

    `guess` is an OrbitalSet or a list of 0-based indices into the hcore
    spectrum. Strategy "mom" runs the SCF iteration keeping, each cycle, the
    orbitals of largest overlap with the previous ones; "residual" minimizes
    the squared stationarity residual directly. A converged result matching
    one of `known` in energy and orbital span is marked as a duplicate.
    """
    opts = opts or SolverOptions()
    if guess is None:
        raise ContractViolation("excited_search needs an OrbitalSet or an occupation pattern")
    if not isinstance(guess, hc.OrbitalSet):
        guess = hcore_guess(tables, N, guess)
    if guess.N != N:
        raise ContractViolation(f"guess has {guess.N} orbitals, expected {N}")
    if strategy == "mom":
        cp = scf(tables, guess, dataclasses.replace(opts, occupation="mom"))
    elif strategy == "residual":
        cp = _residual_minimization(tables, guess, opts)
    else:
        raise ContractViolation(f"unknown strategy {strategy!r}; use 'mom' or 'residual'")
    for n, other in enumerate(known):
        if is_duplicate(cp, other):
            cp.duplicate_of = n
            cp.notes.append(f"duplicate of known critical point {n}")
            break
    return cp


def is_duplicate(a, b, tol=DUPLICATE_TOL):
    """Same energy and the same occupied span (largest principal angle)."""
    if a.N != b.N or abs(a.energy - b.energy) > tol:
        return False
    return float(np.max(hc.principal_angles(a.orbitals, b.orbitals), initial=0.0)) <= tol


@dataclasses.dataclass
class DiagnosticsReport:
    k: int
    multipliers_nonpositive: bool
    max_multiplier: float
    below_level: bool | None
    level_margin: float | None  # eps_{N+k-1} - max mu
    morse_index: int | None
    morse_ok: bool | None
    aufbau_gap_ok: bool | None
    aufbau_gap: float | None  # eps_{N+1} - mu_N
    below_threshold: bool | None
    threshold_margin: float | None  # J(N-1) - energy

    def passed(self):
        checks = [self.multipliers_nonpositive, self.below_level, self.morse_ok, self.aufbau_gap_ok]
        return all(c for c in checks if c is not None)

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in dataclasses.asdict(self).items()}


def diagnostics(cp, k=None, threshold=None, ground=False, tol=1e-8, gap_tol=1e-10):
    """Check a converged critical point against the excited-state criteria.

    k is the claimed level (default: Morse index + 1). Checks: every
    multiplier is at most 0; every multiplier is at most the (N+k-1)-th Fock
    level; the Morse index is at most k-1; for a ground state, the highest
    multiplier lies strictly below the next Fock level. With `threshold`
    (the (N-1)-electron ground energy) the report also says whether the
    energy lies below it.
    """
    if not cp.converged:
        raise ContractViolation("diagnostics need a converged critical point")
    if k is None:
        if cp.morse_index is None:
            raise ContractViolation("no Morse index available to infer the level k")
        k = cp.morse_index + 1
    N = cp.N
    mu = np.asarray(cp.multipliers)
    eps = np.asarray(cp.fock_spectrum)
    mu_max = float(mu.max())
    level = N + k - 2
    below, margin = (None, None)
    if level < eps.size:
        margin = float(eps[level] - mu_max)
        below = bool(margin >= -tol)
    morse_ok = None if cp.morse_index is None else bool(cp.morse_index <= k - 1)
    gap_ok = gap = None
    if ground and N < eps.size:
        gap = float(eps[N] - mu_max)
        gap_ok = bool(gap > gap_tol)
    thr_ok = thr_margin = None
    if threshold is not None:
        thr_margin = float(threshold - cp.energy)
        thr_ok = bool(thr_margin > 0)
    return DiagnosticsReport(
        k=int(k),
        multipliers_nonpositive=bool(mu_max <= tol),
        max_multiplier=mu_max,
        below_level=below,
        level_margin=margin,
        morse_index=cp.morse_index,
        morse_ok=morse_ok,
        aufbau_gap_ok=gap_ok,
        aufbau_gap=gap,
        below_threshold=thr_ok,
        threshold_margin=thr_margin,
    )
