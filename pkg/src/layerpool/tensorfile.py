"""Bit-exact tensor interchange: the version 1.0, C-order, little-endian
float32 subset of the common scientific array file format.

Layout: 6-byte magic ``\\x93NUMPY``, version bytes (1, 0), a little-endian
uint16 header length, then a Python-literal header dict with keys ``descr``
(must be ``'<f4'``), ``fortran_order`` (must be False) and ``shape``, padded
with spaces to a 64-byte boundary and terminated by a newline.  The payload
is exactly prod(shape) * 4 bytes of raw little-endian float32, row-major.

Readers reject anything outside this subset with one of the error classes
below; writers always produce it, so write-then-read is the identity on
payload bits.
"""

from __future__ import annotations

import ast
from pathlib import Path

import numpy as np

MAGIC = b"\x93NUMPY"


class TensorFormatError(ValueError):
    """Base class for interchange format violations."""


class BadMagicError(TensorFormatError):
    """File does not start with the format's magic string."""


class UnsupportedHeaderError(TensorFormatError):
    """Version, dtype, order or shape outside the supported subset."""


class TruncatedPayloadError(TensorFormatError):
    """Payload shorter (or longer) than the header's shape promises."""


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    """Write an array as little-endian float32, C order, format version 1.0."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header_dict = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % _shape_repr(arr.shape)
    # Pad so that magic + version + length field + header is a multiple of 64.
    base = len(MAGIC) + 2 + 2
    pad = (-(base + len(header_dict) + 1)) % 64
    header = (header_dict + " " * pad + "\n").encode("latin1")
    if len(header) > 0xFFFF:
        raise UnsupportedHeaderError("header too large for version 1.0")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def _shape_repr(shape: tuple[int, ...]) -> str:
    if len(shape) == 1:
        return "(%d,)" % shape
    return "(" + ", ".join(str(d) for d in shape) + ")"


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor` (or any writer of the
    same format subset).  Returns a float32 array of the declared shape."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 2 or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: not a tensor file (bad magic)")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise UnsupportedHeaderError(f"{path}: unsupported format version {major}.{minor}")
    if len(data) < 10:
        raise TruncatedPayloadError(f"{path}: truncated before header length")
    header_len = int.from_bytes(data[8:10], "little")
    header_end = 10 + header_len
    if len(data) < header_end:
        raise TruncatedPayloadError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise UnsupportedHeaderError(f"{path}: unparseable header ({exc})") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise UnsupportedHeaderError(f"{path}: header keys must be descr/fortran_order/shape")
    if header["descr"] != "<f4":
        raise UnsupportedHeaderError(f"{path}: unsupported dtype {header['descr']!r} (only '<f4')")
    if header["fortran_order"] is not False:
        raise UnsupportedHeaderError(f"{path}: only C-order payloads are supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise UnsupportedHeaderError(f"{path}: bad shape {shape!r}")
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = data[header_end:]
    if len(payload) != count * 4:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, shape {shape} needs {count * 4}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
