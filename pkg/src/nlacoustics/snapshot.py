"""Field snapshot IO.

Wire format ``AC1``: a single ASCII header line

    AC1 name,n,dx,flag;name,n,dx,flag;...

(one ``name,n,dx,periodic-flag`` entry per field axis, flag 1/0) followed
by the raw values as little-endian 64-bit floats in row-major axis order.
"""

from __future__ import annotations

import os
import csv
import numpy as np

from .core import Axis, Field, Grid
from .errors import ParseError

_MAGIC = "AC1"


def save_field(path: str | os.PathLike, f: Field) -> None:
    axes = f.grid.field_axes
    spec = ";".join(
        f"{a.name},{a.n},{a.dx!r},{1 if a.periodic else 0}" for a in axes
    )
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC} {spec}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: str | os.PathLike, origins: dict[str, float] | None = None) -> Field:
    """Load an AC1 snapshot.  Origins are not part of the wire format and
    default to zero; pass ``origins`` to place axes explicitly."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").rstrip("\n")
        raw = fh.read()
    if not header.startswith(_MAGIC + " "):
        raise ParseError(f"{path}: not an {_MAGIC} snapshot")
    axes = []
    for entry in header[len(_MAGIC) + 1 :].split(";"):
        parts = entry.split(",")
        if len(parts) != 4:
            raise ParseError(f"{path}: malformed axis entry {entry!r}")
        name, n_s, dx_s, flag_s = parts
        try:
            n, dx, flag = int(n_s), float(dx_s), int(flag_s)
        except ValueError as exc:
            raise ParseError(f"{path}: malformed axis entry {entry!r}") from exc
        origin = (origins or {}).get(name, 0.0)
        axes.append(Axis(name, n, dx, periodic=bool(flag), origin=origin))
    grid = Grid(tuple(axes))
    values = np.frombuffer(raw, dtype="<f8")
    expected = int(np.prod(grid.shape))
    if values.size != expected:
        raise ParseError(f"{path}: payload has {values.size} values, expected {expected}")
    return Field(grid, values.reshape(grid.shape).astype(np.float64))


def write_csv(path: str | os.PathLike, header: list[str], rows: list[list]) -> None:
    """Deterministic CSV writer: floats via repr, unix newlines."""

    def fmt(x):
        if isinstance(x, float):
            return repr(x)
        return str(x)

    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty CSV")
    return rows[0], rows[1:]
