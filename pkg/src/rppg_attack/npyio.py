"""Strict NPY v1.0 reader/writer: little-endian float32, C order, 1 to 4 dims."""
from __future__ import annotations

import os

import numpy as np
from numpy.lib import format as npformat

from .core import FormatError

_DTYPE = np.dtype("<f4")


def _check_ndim(ndim: int) -> None:
    if not 1 <= ndim <= 4:
        raise FormatError(f"only 1-4 dimensional arrays are supported, got {ndim}")


def write_npy(path: str | os.PathLike, array) -> None:
    a = np.asarray(array)
    _check_ndim(a.ndim)
    if not np.issubdtype(a.dtype, np.number) or np.iscomplexobj(a):
        raise FormatError(f"cannot store dtype {a.dtype} as float32")
    a = np.ascontiguousarray(a, dtype=_DTYPE)
    with open(path, "wb") as fh:
        npformat.write_array(fh, a, version=(1, 0), allow_pickle=False)


def read_npy(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            version = npformat.read_magic(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: not an NPY file") from exc
        if version != (1, 0):
            raise FormatError(f"{path}: NPY version {version} unsupported, need 1.0")
        try:
            shape, fortran_order, dtype = npformat.read_array_header_1_0(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: malformed header") from exc
        if fortran_order:
            raise FormatError(f"{path}: Fortran-ordered arrays are not supported")
        if dtype != _DTYPE:
            raise FormatError(f"{path}: dtype {dtype.str} unsupported, need <f4")
        _check_ndim(len(shape))
        count = int(np.prod(shape))
        data = np.frombuffer(fh.read(count * _DTYPE.itemsize), dtype=_DTYPE)
    if data.size != count:
        raise FormatError(f"{path}: truncated data ({data.size} of {count} values)")
    return data.reshape(shape).copy()
