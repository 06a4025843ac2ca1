"""File formats: grid-field CSV/JSON, deterministic reports, atomic writes.

Grid fields serialize as CSV with header ``k,i1[,i2[,i3]],value`` in
natural-ordering row order (k is the 1-based rank), or as the JSON object
``{"d": ..., "n": ..., "values": [...]}``.  Report files are written with
sorted keys and shortest round-trip float formatting, so identical inputs
produce identical bytes; everything lands on disk via write-then-rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from respde.lattice import DomainError, GridField, GridSpec, unrank


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def gridfield_to_csv(field: GridField) -> str:
    spec = field.spec
    cols = ["k"] + [f"i{j+1}" for j in range(spec.d)] + ["value"]
    lines = [",".join(cols)]
    for k in range(1, spec.interior_count + 1):
        idx = unrank(k, spec)
        lines.append(
            ",".join([str(k)] + [str(c) for c in idx] + [repr(float(field.values[k - 1]))])
        )
    return "\n".join(lines) + "\n"


def write_gridfield_csv(field: GridField, path: str | Path) -> None:
    atomic_write_text(path, gridfield_to_csv(field))


def gridfield_from_csv(text: str) -> GridField:
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if header[0] != "k" or header[-1] != "value":
        raise DomainError(f"unrecognized grid-field header {header}")
    d = len(header) - 2
    rows = [ln.split(",") for ln in lines[1:]]
    count = len(rows)
    m = round(count ** (1.0 / d))
    if m**d != count:
        raise DomainError(f"row count {count} is not a perfect d={d} power")
    spec = GridSpec(d, m + 1)
    values = np.empty(count)
    for row in rows:
        k = int(row[0])
        idx = tuple(int(c) for c in row[1 : 1 + d])
        if unrank(k, spec) != idx:
            raise DomainError(f"row {k} indices {idx} break the natural ordering")
        values[k - 1] = float(row[-1])
    return GridField(spec, values)


def read_gridfield_csv(path: str | Path) -> GridField:
    return gridfield_from_csv(Path(path).read_text())


def gridfield_to_json(field: GridField) -> dict:
    return {
        "d": field.spec.d,
        "n": field.spec.n,
        "values": [float(v) for v in field.values],
    }


def gridfield_from_json(obj: dict) -> GridField:
    spec = GridSpec(int(obj["d"]), int(obj["n"]))
    return GridField(spec, np.asarray(obj["values"], dtype=np.float64))


def errors_csv(rows: list[tuple[int, int, float]]) -> str:
    """The per-replicate error table: level_n, replicate, sup_error."""
    lines = ["level_n,replicate,sup_error"]
    for level_n, replicate, err in rows:
        lines.append(f"{level_n},{replicate},{repr(float(err))}")
    return "\n".join(lines) + "\n"
