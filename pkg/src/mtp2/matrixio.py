"""Text formats used by the CLI.

dense-csv (matrix): first line ``p``, then p comma-separated rows of p
decimal literals (scientific notation accepted).

dense-csv (data matrix): header line ``n p``, then n rows of p entries.

Writers emit shortest round-trip float literals, so a written file read back
reproduces the array bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from .matcore import as_symmetric


def _format_row(row) -> str:
    return ",".join(repr(float(v)) for v in row)


def write_matrix_csv(path, m) -> None:
    a = as_symmetric(m)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(_format_row(row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            p = int(header)
        except ValueError as exc:
            raise ValueError(f"bad dense-csv header {header!r}: expected a dimension") from exc
        rows = []
        for i in range(p):
            line = fh.readline()
            if not line:
                raise ValueError(f"dense-csv truncated: expected {p} rows, got {i}")
            values = [float(v) for v in line.strip().split(",")]
            if len(values) != p:
                raise ValueError(f"row {i} has {len(values)} entries, expected {p}")
            rows.append(values)
    return as_symmetric(np.array(rows, dtype=float))


def write_data_csv(path, x) -> None:
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"data matrix must be 2-d, got shape {a.shape}")
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(_format_row(row) + "\n")


def read_data_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("data-csv header must be 'n p'")
        n, p = int(header[0]), int(header[1])
        rows = []
        for i in range(n):
            line = fh.readline()
            if not line:
                raise ValueError(f"data-csv truncated: expected {n} rows, got {i}")
            values = [float(v) for v in line.strip().split(",")]
            if len(values) != p:
                raise ValueError(f"row {i} has {len(values)} entries, expected {p}")
            rows.append(values)
    return np.array(rows, dtype=float).reshape(n, p)
