"""On-disk formats for measurement matrices and sensitivity stacks.

Matrix CSV: a '# n=<N>' line, then N rows of N comma-separated doubles
with 17 significant digits.

Sensitivity binary: magic b'SMST', u32 M, u32 N (little-endian), then
M*N*N little-endian float64 values, block-major by pixel, row-major
within a block.
"""

import io
import struct
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from helmkit_inversion.errors import DataFormatError

FLOAT_FORMAT = "%.17g"
STACK_MAGIC = b"SMST"
_STACK_HEADER = struct.Struct("<4sII")

PathLike = Union[str, Path]


def write_matrix_csv(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as f:
        f.write(f"# n={matrix.shape[0]}\n")
        pd.DataFrame(matrix).to_csv(
            f, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """Read a square matrix written by write_matrix_csv.

    Raises:
        FileNotFoundError: If the file doesn't exist
        DataFormatError: If the header or the shape is wrong
    """
    try:
        with open(path, "r") as f:
            header = f.readline().strip()
            body = f.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"Matrix file not found: {path}")

    if not header.startswith("# n="):
        raise DataFormatError(f"{path}: expected '# n=<N>' header, got '{header}'")
    try:
        n = int(header[len("# n="):])
        df = pd.read_csv(io.StringIO(body), header=None, float_precision="round_trip")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"{path}: {e}")
    if df.shape != (n, n):
        raise DataFormatError(f"{path}: header says n={n}, body is {df.shape}")
    return df.to_numpy(dtype=float)


def write_stack_binary(path: PathLike, matrices: np.ndarray) -> None:
    matrices = np.asarray(matrices, dtype="<f8")
    m, n, _ = matrices.shape
    with open(path, "wb") as f:
        f.write(_STACK_HEADER.pack(STACK_MAGIC, m, n))
        f.write(np.ascontiguousarray(matrices).tobytes())


def read_stack_binary(path: PathLike) -> np.ndarray:
    """Read an (M, N, N) stack.

    Raises:
        FileNotFoundError: If the file doesn't exist
        DataFormatError: On a bad magic, a truncated header or a size mismatch
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"Sensitivity file not found: {path}")

    if len(raw) < _STACK_HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, m, n = _STACK_HEADER.unpack_from(raw)
    if magic != STACK_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, expected {STACK_MAGIC!r}")
    expected = _STACK_HEADER.size + 8 * m * n * n
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for M={m}, N={n}, found {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=_STACK_HEADER.size)
    return values.reshape(m, n, n).astype(float)
