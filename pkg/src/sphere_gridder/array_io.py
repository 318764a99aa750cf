"""
ArrayFile: a minimal binary container for float64 and complex128 arrays.

Layout (little-endian):
    0   magic  b"HVX1"
    4   u8     dtype code (0 = float64, 1 = complex128)
    5   u8     ndim (>= 1)
    6   u64    dims[ndim]
    ..  payload, row-major
"""

import logging
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"HVX1"
DTYPE_CODES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}
HEADER_BYTES = len(MAGIC) + 2


def _dtype_code(array: np.ndarray) -> int:
    if np.issubdtype(array.dtype, np.complexfloating):
        return 1
    if np.issubdtype(array.dtype, np.floating) or np.issubdtype(array.dtype, np.integer):
        return 0
    raise FormatError(f"Cannot store arrays of dtype {array.dtype}", 4)


def write_array(path, array) -> None:
    array = np.asarray(array)
    if array.ndim == 0:
        raise FormatError("ArrayFile payloads need at least one dimension", 5)
    if array.ndim > 255:
        raise FormatError(f"Too many dimensions ({array.ndim})", 5)
    code = _dtype_code(array)
    payload = np.ascontiguousarray(array, dtype=DTYPE_CODES[code])
    header = MAGIC + bytes([code, array.ndim]) + np.asarray(array.shape, dtype="<u8").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())
    logging.debug(f"Wrote {array.shape} {DTYPE_CODES[code]} array to {path}")


def read_array(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER_BYTES:
        raise FormatError(f"Truncated header: {len(data)} bytes", len(data))
    magic = data[: len(MAGIC)]
    if magic == MAGIC[::-1]:
        raise FormatError("Big-endian ArrayFile is not supported", 0)
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r}", 0)
    code, ndim = data[4], data[5]
    if code not in DTYPE_CODES:
        raise FormatError(f"Unknown dtype code {code}", 4)
    if ndim == 0:
        raise FormatError("Zero-dimensional payload", 5)
    dims_end = HEADER_BYTES + 8 * ndim
    if len(data) < dims_end:
        raise FormatError(f"Truncated dimensions: need {8 * ndim} bytes", len(data))
    shape = tuple(int(d) for d in np.frombuffer(data, dtype="<u8", count=ndim, offset=HEADER_BYTES))
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.float64)) * dtype.itemsize
    actual = len(data) - dims_end
    if actual != expected:
        raise FormatError(
            f"Payload holds {actual} bytes, expected {expected} for shape {shape}", dims_end
        )
    if expected == 0:
        return np.zeros(shape, dtype=dtype.newbyteorder("="))
    return np.frombuffer(data, dtype=dtype, offset=dims_end).reshape(shape).astype(dtype.newbyteorder("="))
