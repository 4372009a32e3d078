"""Command-line front end: ``hfcrit <task> [config] [flags]``.

Every run writes ``<out>/<task>.json``, a result record validated against
RESULT_SCHEMA. Exit status is 0 on success, 2 when the task finished with
warnings (unconverged solves, unreliable fits, failed soft checks) and 1
on errors.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
import traceback
from pathlib import Path

SCHEMA_VERSION = "1.0"
TOOL_VERSION = "0.1.0"
EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "tool", "tool_version", "task", "status", "config", "results", "warnings", "timestamps"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "tool": {"const": "hfcrit"},
        "tool_version": {"type": "string"},
        "task": {"enum": ["integrals", "ground", "chain", "excited", "fci", "bounds", "check"]},
        "status": {"enum": ["ok", "warning", "error"]},
        "config": {"type": "object"},
        "results": {"type": "object"},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "error": {"type": ["string", "null"]},
        "threads": {"type": ["integer", "null"]},
        "timestamps": {
            "type": "object",
            "required": ["started", "finished"],
            "properties": {"started": {"type": "string"}, "finished": {"type": "string"}},
        },
    },
}

log = logging.getLogger("hfcrit")


def _threads():
    value = os.environ.get("HFCRIT_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    return n


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _jsonable(value):
    import numpy as np

    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


# ----------------------------------------------------------- tasks


def _tables(job):
    from .integrals import build_gaussian_integrals, load_fcidump

    if job.fcidump is not None:
        tables, nelec = load_fcidump(job.fcidump)
        if job.n_electrons is None:
            if nelec is None:
                from .errors import ConfigurationError

                raise ConfigurationError("FCIDUMP header has no NELEC; set n_electrons", "n_electrons")
            job.n_electrons = nelec
        return tables
    return build_gaussian_integrals(job.system, job.basis)


def _opts(job, **extra):
    from .solvers import SolverOptions

    p = job.params
    kw = dict(tol=job.tol, seed=job.seed, n_starts=int(p.get("n_starts", 1)))
    for key in ("max_iterations", "diis_depth"):
        if key in p:
            kw[key] = int(p[key])
    if "level_shift" in p:
        kw["level_shift"] = float(p["level_shift"])
    kw.update(extra)
    return SolverOptions(**kw)


def _threshold_energy(tables, N, opts):
    from . import solvers

    if N <= 1:
        return float(tables.energy_offset), True
    cp = solvers.scf_ground(tables, N - 1, opts)
    return cp.energy, cp.converged


def task_integrals(job, tables, warnings_):
    from .integrals import save_fcidump

    path = Path(job.out) / "integrals.fcidump"
    ortho = tables.orthonormal
    save_fcidump(ortho, path, n_electrons=job.n_electrons or 0)
    if tables.n_pruned:
        warnings_.append(f"{tables.n_pruned} near-dependent basis directions pruned")
    return {
        "n_functions": tables.M,
        "n_retained": ortho.M,
        "n_pruned": tables.n_pruned,
        "energy_offset": tables.energy_offset,
        "symmetry_violations": tables.symmetry_violations(),
        "fcidump": str(path),
        "labels": list(tables.labels) if tables.labels else None,
    }


def task_ground(job, tables, warnings_):
    from . import solvers

    N = job.n_electrons
    opts = _opts(job)
    cp = solvers.scf_ground(tables, N, opts)
    thr, thr_ok = _threshold_energy(tables, N, opts)
    out = {"point": cp.to_dict(include_orbitals=True), "threshold_energy": thr}
    if cp.converged:
        out["diagnostics"] = solvers.diagnostics(cp, k=1, threshold=thr, ground=True).to_dict()
    else:
        warnings_.append("ground-state SCF did not converge")
    if not thr_ok:
        warnings_.append("(N-1)-electron SCF did not converge")
    return out


def task_chain(job, tables, warnings_):
    from . import solvers

    chain = solvers.ionization_chain(tables, job.n_electrons, _opts(job))
    if not chain.converged:
        warnings_.append("a member of the ionization chain did not converge")
    return {"chain": chain.to_dict()}


def task_excited(job, tables, warnings_):
    from . import solvers

    N = job.n_electrons
    opts = _opts(job)
    ground = solvers.scf_ground(tables, N, opts)
    strategy = job.params.get("strategy", "mom")
    cp = solvers.excited_search(
        tables, N, opts, strategy=strategy, guess=[int(i) for i in job.params["guess"]], known=[ground] if ground.converged else []
    )
    thr, _ = _threshold_energy(tables, N, opts)
    out = {"strategy": strategy, "ground_energy": ground.energy, "threshold_energy": thr, "point": cp.to_dict(include_orbitals=True)}
    if cp.converged:
        k = job.params.get("k")
        out["diagnostics"] = solvers.diagnostics(cp, k=None if k is None else int(k), threshold=thr).to_dict()
        if cp.duplicate_of is not None:
            warnings_.append("excited search collapsed onto the ground state")
    else:
        warnings_.append("excited search did not converge")
    return out


def task_fci(job, tables, warnings_):
    import warnings

    from . import nbody

    N = job.n_electrons
    K = int(job.params.get("K", 1))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = nbody.fci_spectrum(tables, N, K)
    warnings_.extend(str(w.message) for w in caught)
    out = {"N": N, "dimension": result.dimension, "eigenvalues": result.eigenvalues.tolist()}
    if job.params.get("threshold", False):
        out["threshold"] = nbody.threshold_compare(tables, N).to_dict()
    return out


def task_bounds(job, tables, warnings_):
    from . import bounds, nbody, solvers

    N = job.n_electrons
    kmax = int(job.params["k"])
    opts = _opts(job)
    core_cp = solvers.scf_ground(tables, N - 1, opts) if N > 1 else None
    if core_cp is not None and not core_cp.converged:
        warnings_.append("(N-1)-electron SCF did not converge")
    core = core_cp.orbitals if core_cp is not None else None
    optimal = [bounds.trial_bound_optimal(tables, N, k, core=core) for k in range(1, kmax + 1)]
    out = {"optimal": [tb.to_dict() for tb in optimal]}
    try:
        lam = nbody.fci_spectrum(tables, N, kmax).eigenvalues
        out["fci_levels"] = lam.tolist()
        out["fci_below_bound"] = [bool(lam[i] <= optimal[i].bound + 1e-10) for i in range(min(kmax, lam.size))]
    except Exception as exc:  # oracle is optional here (dimension cap)
        warnings_.append(f"FCI comparison skipped: {exc}")
    Rs = job.params.get("R")
    if Rs:
        k_far = int(job.params.get("k_far", 1))
        kw = {}
        if "direction" in job.params:
            kw["direction"] = tuple(float(x) for x in job.params["direction"])
        if "ghost_exponents" in job.params:
            kw["exponents"] = tuple(float(x) for x in job.params["ghost_exponents"])
        curve = bounds.far_bound_curve(job.system, job.basis, k_far, [float(R) for R in Rs], opts=opts, **kw)
        csv_path = Path(job.out) / "bounds_curve.csv"
        bounds.write_bound_curve(csv_path, curve.points)
        far = {"k": k_far, "csv": str(csv_path), "points": [tb.to_dict() for tb in curve.points], "q_min": curve.q_min}
        if len(Rs) >= 5 and max(Rs) >= 10 * min(Rs):
            fit = bounds.asymptotic_fit(curve.R, curve.excess, N, job.system.total_charge, curve.q_min[-1])
            far["fit"] = fit.to_dict()
            if fit.unreliable:
                warnings_.append("asymptotic fit flagged unreliable")
        else:
            warnings_.append("R sweep too short for the asymptotic fit (need 5 points over a decade)")
        out["far"] = far
    return out


def task_check(job, tables, warnings_):
    from . import checks

    n_random = int(job.params.get("n_random", 20))
    results = checks.run_invariant_suite(tables, job.n_electrons, seed=job.seed, n_random=n_random, opts=_opts(job, n_starts=3))
    soft = checks.failing(results, hard_only=False)
    hard = checks.failing(results)
    for name in soft:
        if name not in hard:
            warnings_.append(f"soft check failed: {name}")
    return {"invariants": [r.to_dict() for r in results], "failing": hard}


TASKS = {
    "integrals": task_integrals,
    "ground": task_ground,
    "chain": task_chain,
    "excited": task_excited,
    "fci": task_fci,
    "bounds": task_bounds,
    "check": task_check,
}


# ----------------------------------------------------------- driver


def build_parser():
    parser = argparse.ArgumentParser(prog="hfcrit", description="Hartree-Fock critical points, bounds and full-CI checks")
    sub = parser.add_subparsers(dest="task", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="YAML or JSON job configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--out", help="output directory")
        p.add_argument("--fcidump", help="integral source instead of system + basis")
        p.add_argument("--N", dest="n_electrons", type=int, help="electron count")
        p.add_argument("--k", type=int)
        p.add_argument("--K", type=int)
        p.add_argument("--R", type=float, nargs="+")
        p.add_argument("--strategy", choices=["mom", "residual"])
        p.add_argument("--guess", type=int, nargs="+", help="0-based occupied hcore levels")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def write_record(record, out_dir):
    import jsonschema

    jsonschema.validate(record, RESULT_SCHEMA)
    path = Path(out_dir) / f"{record['task']}.json"
    path.write_text(json.dumps(record, indent=1, allow_nan=True))
    return path


def run(argv=None):
    """Run one task; returns ``(exit_code, record)``."""
    threads = _threads()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .config import build_job, read_config_file
    from .errors import HFCritError

    started = _now()
    overrides = {
        "task": args.task, "seed": args.seed, "tol": args.tol, "out": args.out, "fcidump": args.fcidump,
        "n_electrons": args.n_electrons, "k": args.k, "K": args.K, "R": args.R,
        "strategy": args.strategy, "guess": args.guess,
    }
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool": "hfcrit",
        "tool_version": TOOL_VERSION,
        "task": args.task,
        "status": "error",
        "config": {},
        "results": {},
        "warnings": [],
        "error": None,
        "threads": threads,
        "timestamps": {"started": started, "finished": started},
    }
    out_dir = args.out or "hfcrit-out"
    try:
        data = read_config_file(args.config) if args.config else {}
        job = build_job(data, overrides)
        out_dir = job.out
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        record["config"] = _jsonable(job.raw)
        tables = _tables(job)
        if job.n_electrons is None:
            raise HFCritError("electron count is not set")
        warnings_ = []
        record["results"] = _jsonable(TASKS[job.task](job, tables, warnings_))
        record["warnings"] = warnings_
        failing = record["results"].get("failing") if job.task == "check" else None
        if failing:
            record["status"] = "error"
            record["error"] = "invariants failed: " + ", ".join(failing)
            code = EXIT_ERROR
        else:
            record["status"] = "warning" if warnings_ else "ok"
            code = EXIT_WARN if warnings_ else EXIT_OK
    except (HFCritError, OSError, ValueError) as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
        log.debug("%s", traceback.format_exc())
        code = EXIT_ERROR
    record["timestamps"]["finished"] = _now()
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = write_record(record, out_dir)
        print(f"{record['status']}: {path}")
    except OSError as exc:
        print(f"cannot write result record: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    if record["error"]:
        print(record["error"], file=sys.stderr)
    return code, record


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
