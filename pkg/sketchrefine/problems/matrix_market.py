"""MatrixMarket array-format reader/writer (real general, dense).

Values are written with 17 significant digits, so a write/read cycle
reproduces every float64 bit for bit. Coordinate-format files are rejected.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Union

import numpy as np
import scipy.io

from sketchrefine.common.exceptions import InputFileNotFoundError, MatrixMarketParseError
from sketchrefine.la_core.schemas import DenseMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_BANNER = "%%MatrixMarket"


def save_matrix_market(M: Any, path: PathLike) -> None:
    """Write a matrix (or an m-vector as m×1) in array format."""
    data = np.asarray(M, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # scipy appends .mtx to bare names; pass an open handle to keep the path as given
    with path.open("wb") as fh:
        scipy.io.mmwrite(fh, data, field="real", precision=17, symmetry="general")
    logger.debug("wrote %dx%d matrix to %s", data.shape[0], data.shape[1], path)


def load_matrix_market(path: PathLike) -> DenseMatrix:
    """Read an array-format, real general file into a Fortran-ordered matrix."""
    path = Path(path)
    if not path.is_file():
        raise InputFileNotFoundError(str(path))

    name = str(path)
    with path.open("r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()

    if not lines or not lines[0].startswith(_BANNER):
        raise MatrixMarketParseError(name, f"missing '{_BANNER}' banner", line=1)
    header = lines[0].split()
    if len(header) != 5:
        raise MatrixMarketParseError(name, "banner needs object, format, field and symmetry", line=1)
    obj, fmt, field, symmetry = (tok.lower() for tok in header[1:])
    if obj != "matrix":
        raise MatrixMarketParseError(name, f"unsupported object '{obj}'", line=1)
    if fmt != "array":
        raise MatrixMarketParseError(name, f"only array format is supported, got '{fmt}'", line=1)
    if field not in ("real", "double", "integer"):
        raise MatrixMarketParseError(name, f"unsupported field '{field}'", line=1)
    if symmetry != "general":
        raise MatrixMarketParseError(name, f"only general symmetry is supported, got '{symmetry}'", line=1)

    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx == len(lines):
        raise MatrixMarketParseError(name, "missing size line", line=idx + 1)

    dims = lines[idx].split()
    if len(dims) != 2:
        raise MatrixMarketParseError(name, f"size line needs 2 integers, got {len(dims)}", line=idx + 1)
    try:
        rows, cols = int(dims[0]), int(dims[1])
    except ValueError:
        raise MatrixMarketParseError(name, f"non-integer size line '{lines[idx].strip()}'", line=idx + 1)
    if rows < 1 or cols < 1:
        raise MatrixMarketParseError(name, f"invalid dimensions {rows}x{cols}", line=idx + 1)

    values: list[float] = []
    for lineno in range(idx + 2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        for token in text.split():
            try:
                value = float(token)
            except ValueError:
                raise MatrixMarketParseError(name, f"bad value '{token}'", line=lineno)
            if not math.isfinite(value):
                raise MatrixMarketParseError(name, f"non-finite value '{token}'", line=lineno)
            values.append(value)
            if len(values) > rows * cols:
                raise MatrixMarketParseError(name, f"more than {rows * cols} values", line=lineno)
    if len(values) != rows * cols:
        raise MatrixMarketParseError(name, f"expected {rows * cols} values, found {len(values)}", line=len(lines))

    # array format stores columns contiguously
    return np.asfortranarray(np.array(values, dtype=np.float64).reshape((rows, cols), order="F"))


def load_vector(path: PathLike) -> np.ndarray:
    """Read an m×1 (or 1×m) array file as a 1-D vector."""
    data = load_matrix_market(path)
    if 1 not in data.shape:
        raise MatrixMarketParseError(str(path), f"expected a vector, got {data.shape[0]}x{data.shape[1]}")
    return np.ascontiguousarray(data.ravel(order="F"))
