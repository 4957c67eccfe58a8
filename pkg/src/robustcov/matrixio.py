"""CSV matrix files: rows are variables, columns are samples.

Complex entries are rendered ``a+bi``; 17 significant digits round-trip
float64 exactly.  Parse errors carry the offending 1-based line number.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["MatrixParseError", "write_matrix", "read_matrix"]


class MatrixParseError(ValueError):
    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


def _format_entry(z) -> str:
    if np.iscomplexobj(z):
        re, im = float(z.real), float(z.imag)
        sign = "+" if im >= 0 or math.isnan(im) else "-"
        return f"{re:.17g}{sign}{abs(im):.17g}i"
    return f"{float(z):.17g}"


def write_matrix(matrix, path) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in matrix:
            fh.write(",".join(_format_entry(z) for z in row) + "\n")


def _parse_entry(token: str, line_number: int):
    token = token.strip()
    if not token:
        raise MatrixParseError(f"empty entry on line {line_number}", line_number)
    try:
        if "i" in token or "j" in token:
            return complex(token.replace("i", "j"))
        return float(token)
    except ValueError as exc:
        raise MatrixParseError(
            f"cannot parse entry {token!r} on line {line_number}", line_number
        ) from exc


def read_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            entries = [_parse_entry(tok, line_number) for tok in line.split(",")]
            if width is None:
                width = len(entries)
            elif len(entries) != width:
                raise MatrixParseError(
                    f"line {line_number} has {len(entries)} entries, expected {width}",
                    line_number,
                )
            rows.append(entries)
    if not rows:
        raise MatrixParseError("file contains no matrix rows")
    return np.asarray(rows)
