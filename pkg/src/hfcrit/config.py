"""Job configuration: YAML/JSON files plus command-line overrides.

A configuration names exactly one integral source: either ``system`` with
``basis`` (Gaussian integrals) or ``fcidump`` (a file path).

    task: bounds
    system:
      nuclei: [{z: 2, xyz: [0, 0, 0]}]
      n_electrons: 2
    basis: {builtin: he_like_diffuse_s14, atom: 0}
    params: {k: 3, R: [10, 20, 40, 80, 160]}
    seed: 0
    tol: 1.0e-8
    out: results
"""

from __future__ import annotations

import dataclasses
import json
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .integrals import BasisSet, MolecularSystem, Shell, even_tempered

TASKS = ("integrals", "ground", "chain", "excited", "fci", "bounds", "check")
_TOP_KEYS = {"task", "system", "basis", "fcidump", "n_electrons", "params", "seed", "tol", "out"}
_PARAM_KEYS = {
    "k", "K", "R", "strategy", "guess", "n_starts", "direction", "ghost_exponents",
    "k_far", "max_iterations", "level_shift", "diis_depth", "n_random", "threshold",
}


@dataclasses.dataclass
class JobConfig:
    task: str
    n_electrons: int | None
    system: MolecularSystem | None = None
    basis: BasisSet | None = None
    fcidump: str | None = None
    params: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    tol: float = 1e-8
    out: str = "hfcrit-out"
    raw: dict = dataclasses.field(default_factory=dict)


def builtin_basis_names():
    return sorted(p.name[:-5] for p in resources.files("hfcrit").joinpath("data").iterdir() if p.name.endswith(".json"))


def load_builtin_basis(name, center):
    try:
        text = resources.files("hfcrit").joinpath("data", f"{name}.json").read_text()
    except FileNotFoundError:
        raise ConfigurationError(
            f"unknown built-in basis {name!r}; available: {', '.join(builtin_basis_names())}", "basis.builtin"
        ) from None
    data = json.loads(text)
    return BasisSet(tuple(Shell(center, sh["l"], sh["exponents"], sh["coefficients"]) for sh in data["shells"]))


def read_config_file(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse configuration: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a mapping")
    return data


def _require(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigurationError("missing required key", f"{path}.{key}" if path else key)
    return mapping[key]


def _vec3(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigurationError("expected a list of 3 numbers", path)
    try:
        return tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigurationError("expected a list of 3 numbers", path) from None


def parse_system(data, n_electrons):
    nuclei = _require(data, "nuclei", "system")
    if not isinstance(nuclei, list) or not nuclei:
        raise ConfigurationError("expected a non-empty list", "system.nuclei")
    parsed = []
    for i, nuc in enumerate(nuclei):
        path = f"system.nuclei[{i}]"
        z = _require(nuc, "z", path)
        parsed.append((z, _vec3(_require(nuc, "xyz", path), f"{path}.xyz")))
    n = n_electrons if n_electrons is not None else data.get("n_electrons")
    if n is None:
        raise ConfigurationError("missing required key", "system.n_electrons")
    try:
        return MolecularSystem(tuple(parsed), n, float(data.get("kinetic_factor", 1.0)))
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), "system") from None


def _center(entry, system, path):
    if "center" in entry:
        return _vec3(entry["center"], f"{path}.center")
    atom = entry.get("atom", 0)
    if not isinstance(atom, int) or not 0 <= atom < len(system.nuclei):
        raise ConfigurationError(f"atom index must be in 0..{len(system.nuclei) - 1}", f"{path}.atom")
    return system.nuclei[atom].position


def parse_basis(data, system):
    """Basis from a built-in name, a list of shells, or even-tempered blocks."""
    entries = data if isinstance(data, list) else [data]
    shells = []
    for i, entry in enumerate(entries):
        path = f"basis[{i}]" if isinstance(data, list) else "basis"
        if not isinstance(entry, dict):
            raise ConfigurationError("expected a mapping", path)
        center = _center(entry, system, path)
        if "builtin" in entry:
            shells.extend(load_builtin_basis(entry["builtin"], center).shells)
        elif "even_tempered" in entry:
            et = entry["even_tempered"]
            try:
                block = even_tempered(center, int(et["n"]), float(et["alpha_min"]), float(et["ratio"]), int(et.get("l", 0)))
            except KeyError as exc:
                raise ConfigurationError("missing required key", f"{path}.even_tempered.{exc.args[0]}") from None
            shells.extend(block.shells)
        else:
            prims = _require(entry, "primitives", path)
            try:
                shells.append(
                    Shell(center, int(entry.get("l", 0)), [p["alpha"] for p in prims], [p.get("coeff", 1.0) for p in prims])
                )
            except (KeyError, TypeError):
                raise ConfigurationError("each primitive needs 'alpha' (and optional 'coeff')", f"{path}.primitives") from None
            except ConfigurationError as exc:
                raise ConfigurationError(str(exc), path) from None
    if not shells:
        raise ConfigurationError("basis is empty", "basis")
    return BasisSet(tuple(shells))


def build_job(data, overrides=None):
    """Validate a configuration mapping (after applying flag overrides)."""
    data = dict(data)
    params = dict(data.get("params") or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in _TOP_KEYS:
            data[key] = value
        else:
            params[key] = value
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown keys {sorted(unknown)}", "")
    bad_params = set(params) - _PARAM_KEYS
    if bad_params:
        raise ConfigurationError(f"unknown parameters {sorted(bad_params)}", "params")
    task = _require(data, "task", "")
    if task not in TASKS:
        raise ConfigurationError(f"unknown task {task!r}; choose from {', '.join(TASKS)}", "task")

    has_gaussian = "system" in data or "basis" in data
    has_dump = data.get("fcidump") is not None
    if has_gaussian == has_dump:
        raise ConfigurationError("give exactly one integral source: system + basis, or fcidump", "")
    n_electrons = data.get("n_electrons")
    system = basis = None
    if has_gaussian:
        system = parse_system(_require(data, "system", ""), n_electrons)
        basis = parse_basis(_require(data, "basis", ""), system)
        n_electrons = system.n_electrons
    if n_electrons is not None:
        if isinstance(n_electrons, bool) or int(n_electrons) != n_electrons or n_electrons < 0:
            raise ConfigurationError("electron count must be a non-negative integer", "n_electrons")
        n_electrons = int(n_electrons)
    try:
        tol = float(data.get("tol", 1e-8))
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigurationError("tol must be a number and seed an integer", "") from None
    if not tol > 0:
        raise ConfigurationError("must be positive", "tol")

    if task == "excited" and "guess" not in params:
        raise ConfigurationError("task 'excited' needs an occupation guess", "params.guess")
    if task == "bounds" and "k" not in params:
        raise ConfigurationError("task 'bounds' needs the level count k", "params.k")
    if task == "bounds" and params.get("R") and system is None:
        raise ConfigurationError("a far-bound R sweep needs a Gaussian system, not an FCIDUMP", "params.R")
    return JobConfig(
        task=task,
        n_electrons=n_electrons,
        system=system,
        basis=basis,
        fcidump=data.get("fcidump"),
        params=params,
        seed=seed,
        tol=tol,
        out=str(data.get("out", "hfcrit-out")),
        raw=data,
    )
