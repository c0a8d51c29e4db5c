"""CSV helpers shared by every exporter.

Values are written with 17 significant digits so a read-back reproduces the
in-memory doubles exactly. Files are written to a temporary sibling and
renamed, so a failed run never leaves a partial file behind.
"""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_UMASK = os.umask(0)
os.umask(_UMASK)


@contextlib.contextmanager
def atomic_open(path, mode: str = "w"):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({"newline": "\n"} if "b" not in mode else {})) as fh:
            yield fh
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write equal-length numeric columns under a one-line header."""
    data = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    with atomic_open(path) as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write ragged rows (already formatted or numeric) as CSV."""
    with atomic_open(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else format(v, ".17g") for v in row) + "\n")


def read_csv(path, header: Sequence[str] | None = None) -> list[np.ndarray]:
    """Read a numeric CSV; check the header if given. Returns one array per column."""
    with open(path) as fh:
        first = fh.readline().strip().split(",")
        if header is not None and first != list(header):
            raise ValueError(f"{path}: expected header {list(header)}, found {first}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        return [np.empty(0) for _ in first]
    return [data[:, k].copy() for k in range(data.shape[1])]
