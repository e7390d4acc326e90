"""Binary grid files and tidy CSV tables.

Grid file layout: magic ``b"BCW1"``, ``u32`` little-endian rank, ``rank``
``u64`` little-endian dimensions, then the float64 little-endian row-major
payload.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"BCW1"


class GridFormatError(ValueError):
    pass


def write_grid(path: str | Path, array: np.ndarray) -> None:
    arr = np.require(array, dtype="<f8", requirements="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_grid(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise GridFormatError(f"{path}: bad magic {data[:4]!r}")
    (rank,) = struct.unpack_from("<I", data, 4)
    dims = struct.unpack_from(f"<{rank}Q", data, 8)
    offset = 8 + 8 * rank
    count = int(np.prod(dims)) if rank else 1
    if len(data) - offset != 8 * count:
        raise GridFormatError(f"{path}: payload has {len(data) - offset} bytes, expected {8 * count}")
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(dims).copy()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_series(path: str | Path, t: np.ndarray, values: np.ndarray) -> None:
    """Time series as CSV with header ``t,value``."""
    write_csv(path, ("t", "value"), zip(t, values))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
