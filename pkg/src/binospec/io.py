"""
File formats: dataset CSV (``x,N,n``), JSON reports and CSV side tables.

Floats are written with ``repr`` (shortest string that parses back to the
same double). Every write goes through a temp file and ``os.replace`` so a
reader never sees a partial file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .likelihood import Dataset, InvalidDataError

DATASET_HEADER = ("x", "N", "n")


class ParseError(ValueError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def table_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write_text(path, table_text(header, rows))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def dataset_text(dataset: Dataset) -> str:
    return table_text(DATASET_HEADER, zip(dataset.x, dataset.N, dataset.n))


def write_dataset(path, dataset: Dataset) -> Path:
    return atomic_write_text(path, dataset_text(dataset))


def read_dataset(path) -> Dataset:
    """Parse a dataset CSV; errors name the offending line."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file (expected header x,N,n)", path, 1)
        if tuple(h.strip() for h in header) != DATASET_HEADER:
            raise ParseError(f"expected header x,N,n, got {','.join(header)}", path, 1)
        x, N, n = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", path, line)
            try:
                xi = float(row[0])
                Ni = _parse_int(row[1])
                ni = _parse_int(row[2])
            except ValueError as exc:
                raise ParseError(str(exc), path, line) from None
            if not 0 <= ni <= Ni or Ni < 1:
                raise ParseError(f"need 0 <= n <= N and N >= 1, got N={Ni}, n={ni}", path, line)
            x.append(xi)
            N.append(Ni)
            n.append(ni)
    if not x:
        raise ParseError("dataset has no records", path)
    try:
        return Dataset(np.array(x), np.array(N, dtype=np.int64), np.array(n, dtype=np.int64))
    except InvalidDataError as exc:
        raise ParseError(str(exc), path) from None


def _parse_int(s: str) -> int:
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        v = float(s)
        if not v.is_integer():
            raise ValueError(f"expected an integer count, got {s!r}") from None
        return int(v)


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json_text(obj))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, exc.lineno) from None
