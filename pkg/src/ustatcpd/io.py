"""CSV stream reading and JSON report serialization."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DataError


class CSVRowError(DataError):
    def __init__(self, row: int, column: int | None, message: str):
        self.row = row
        self.column = column
        where = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(f"{where}: {message}")


def _is_header(fields: list[str]) -> bool:
    for f in fields:
        try:
            float(f)
        except ValueError:
            return True
    return False


def iter_csv_rows(path: str | Path) -> Iterator[np.ndarray]:
    """Yield one float vector per data row, streaming.

    A first row that does not parse as numbers is taken as a header. Row
    numbers in errors are 1-based physical line numbers.
    """
    p = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if lineno == 1 and _is_header(fields):
                continue
            if p is None:
                p = len(fields)
            elif len(fields) != p:
                raise CSVRowError(lineno, None, f"expected {p} fields, found {len(fields)}")
            row = np.empty(p)
            for col, f in enumerate(fields, start=1):
                try:
                    v = float(f)
                except ValueError:
                    raise CSVRowError(lineno, col, f"cannot parse {f.strip()!r} as a number") from None
                if not math.isfinite(v):
                    raise CSVRowError(lineno, col, f"non-finite value {f.strip()!r}")
                row[col - 1] = v
            yield row


def read_prefix(rows: Iterator[np.ndarray], n: int) -> np.ndarray:
    out = []
    for _ in range(n):
        try:
            out.append(next(rows))
        except StopIteration:
            raise DataError(f"stream has only {len(out)} rows, need at least {n}") from None
    return np.array(out)


def write_csv(path: str | Path, data: np.ndarray, header: bool = False) -> None:
    data = np.asarray(data, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j + 1}" for j in range(data.shape[1])])
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_report(report: dict) -> str:
    # json writes floats with repr, i.e. shortest round-tripping form (17 sig. digits max)
    return json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=True)


def write_report(report: dict, path: str | Path | None) -> str:
    text = dumps_report(report)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
