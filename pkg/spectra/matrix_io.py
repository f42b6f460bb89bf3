"""
Matrix files - plain-text dense complex matrices.

Layout:
    rows cols
    re im re im ...      (one line per matrix row)

Values are written with 17 significant digits, enough for a bit-exact
round-trip of IEEE doubles.
"""

import logging
from typing import List

import numpy as np

from .errors import FormatError

logger = logging.getLogger(__name__)


def write_matrix(path: str, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    rows, cols = matrix.shape
    lines = [f"{rows} {cols}"]
    for row in matrix:
        lines.append(' '.join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    with open(path, 'w') as handle:
        handle.write('\n'.join(lines) + '\n')
    logger.debug(f"Wrote {rows}x{cols} matrix to {path}")


def _parse_header(line: str) -> List[int]:
    parts = line.split()
    if len(parts) != 2:
        raise FormatError(1, "header must be 'rows cols'")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(1, f"non-integer dimensions {line.strip()!r}")
    if rows <= 0 or cols <= 0:
        raise FormatError(1, f"dimensions must be positive, got {rows}x{cols}")
    return [rows, cols]


def read_matrix(path: str) -> np.ndarray:
    """
    Read a matrix written by write_matrix.

    Raises:
        FormatError: with the 1-based line number of the first problem
    """
    with open(path) as handle:
        lines = [line for line in handle.read().splitlines()]
    if not lines:
        raise FormatError(1, "empty file")

    rows, cols = _parse_header(lines[0])
    body = lines[1:]
    # tolerate trailing blank lines only
    while body and not body[-1].strip():
        body.pop()
    if len(body) < rows:
        raise FormatError(len(lines) + 1, f"expected {rows} rows, file ends after {len(body)}")
    if len(body) > rows:
        raise FormatError(rows + 2, f"unexpected content after {rows} rows")

    matrix = np.empty((rows, cols), dtype=complex)
    for i, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != 2 * cols:
            raise FormatError(i + 2, f"expected {2 * cols} numbers, found {len(tokens)}")
        try:
            numbers = np.array([float(t) for t in tokens])
        except ValueError as e:
            raise FormatError(i + 2, str(e))
        matrix[i, :] = numbers[0::2] + 1j * numbers[1::2]
    return matrix
