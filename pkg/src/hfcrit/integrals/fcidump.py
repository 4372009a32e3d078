"""FCIDUMP reader and writer.

Orbitals are spinless and assumed orthonormal: the loaded overlap is the
identity. Values are written with 17 significant digits so a save/load
round trip reproduces every double exactly.
"""

from __future__ import annotations

import re

import numpy as np

from ..errors import ContractViolation, DataIntegrityError, FCIDumpParseError
from .tables import IntegralTables, symmetrize_eri, symmetrize_matrix

DUPLICATE_TOLERANCE = 1e-10
_VALUE_FORMAT = "{:24.16e}"

_HEADER_END = re.compile(r"&END|^\s*/\s*$", re.IGNORECASE)
_KEY = re.compile(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=,?\s*[A-Za-z0-9_]+\s*=|$)")


def _parse_header(text):
    body = re.sub(r"&FCI", "", text, flags=re.IGNORECASE)
    body = re.sub(r"&END|/", "", body, flags=re.IGNORECASE)
    fields = {}
    for key, val in _KEY.findall(body.replace("\n", " ")):
        fields[key.upper()] = val.strip().rstrip(",")
    return fields


def load_fcidump(path):
    """Read an FCIDUMP file.

    Returns ``(tables, n_electrons)``; the electron count is ``None`` when the
    header has no NELEC entry.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()

    header_lines = []
    body_start = None
    for n, line in enumerate(lines):
        header_lines.append(line)
        if _HEADER_END.search(line):
            body_start = n + 1
            break
    if body_start is None:
        raise FCIDumpParseError("header is not terminated by &END or '/'", len(lines))
    header = _parse_header("\n".join(header_lines))
    if "NORB" not in header:
        raise FCIDumpParseError("header lacks NORB", 1)
    try:
        M = int(header["NORB"])
    except ValueError:
        raise FCIDumpParseError(f"bad NORB value {header['NORB']!r}", 1) from None
    nelec = None
    if "NELEC" in header:
        try:
            nelec = int(header["NELEC"])
        except ValueError:
            raise FCIDumpParseError(f"bad NELEC value {header['NELEC']!r}", 1) from None

    entries = {}
    for n, line in enumerate(lines[body_start:], start=body_start + 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise FCIDumpParseError(f"expected 'value i j k l', got {line.strip()!r}", n)
        try:
            value = float(tokens[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise FCIDumpParseError(f"cannot parse {line.strip()!r}", n) from None
        if not all(0 <= x <= M for x in (i, j, k, l)):
            raise FCIDumpParseError(f"orbital index out of range 0..{M}", n)
        if k == 0 and l == 0 and j == 0 and i > 0:
            continue  # orbital energy line, not part of the Hamiltonian
        if i == j == k == l == 0:
            key = ("offset",)
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FCIDumpParseError("one-electron entry needs two nonzero indices", n)
            key = ("h", max(i, j), min(i, j))
        else:
            if 0 in (i, j, k, l):
                raise FCIDumpParseError("two-electron entry needs four nonzero indices", n)
            p, q = max(i, j), min(i, j)
            r, s = max(k, l), min(k, l)
            if (p, q) < (r, s):
                p, q, r, s = r, s, p, q
            key = ("g", p, q, r, s)
        if key in entries and abs(entries[key][0] - value) > DUPLICATE_TOLERANCE:
            raise DataIntegrityError(
                f"line {n}: conflicting duplicate entry {key[1:]} "
                f"({entries[key][0]!r} on line {entries[key][1]} vs {value!r})"
            )
        entries.setdefault(key, (value, n))

    h = np.zeros((M, M))
    g = np.zeros((M, M, M, M))
    offset = 0.0
    for key, (value, _) in entries.items():
        if key[0] == "offset":
            offset = value
        elif key[0] == "h":
            h[key[1] - 1, key[2] - 1] = value
        else:
            _, p, q, r, s = key
            g[p - 1, q - 1, r - 1, s - 1] = value
    tables = IntegralTables(
        S=np.eye(M),
        hcore=np.tril(h) + np.tril(h, -1).T,
        eri=symmetrize_eri(g),
        energy_offset=offset,
    )
    return tables, nelec


def save_fcidump(tables, path, n_electrons=0, tol=0.0):
    """Write `tables` in FCIDUMP format.

    Only canonical index quadruples with ``abs(value) > tol`` are listed;
    the scalar offset is always written. The tables must be expressed in an
    orthonormal basis (use ``tables.orthonormal`` otherwise).
    """
    if not tables.is_orthonormal:
        raise ContractViolation(
            "FCIDUMP stores integrals over orthonormal orbitals; pass tables.orthonormal"
        )
    M = tables.M
    h = symmetrize_matrix(tables.hcore)
    g = tables.eri
    fmt = _VALUE_FORMAT + " {:4d} {:4d} {:4d} {:4d}\n"
    with open(path, "w") as fh:
        fh.write(f" &FCI NORB={M:d},NELEC={int(n_electrons):d},MS2=0,\n")
        fh.write("  ORBSYM=" + "1," * M + "\n")
        fh.write("  ISYM=1,\n")
        fh.write(" &END\n")
        for p in range(M):
            for q in range(p + 1):
                for r in range(p + 1):
                    for s in range(r + 1):
                        if (p, q) < (r, s):
                            continue
                        v = g[p, q, r, s]
                        if v != 0.0 and abs(v) > tol:
                            fh.write(fmt.format(v, p + 1, q + 1, r + 1, s + 1))
        for p in range(M):
            for q in range(p + 1):
                v = h[p, q]
                if v != 0.0 and abs(v) > tol:
                    fh.write(fmt.format(v, p + 1, q + 1, 0, 0))
        fh.write(fmt.format(tables.energy_offset, 0, 0, 0, 0))
