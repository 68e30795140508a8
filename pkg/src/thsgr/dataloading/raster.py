"""
THSG raster files: a 21-byte little-endian header (magic 'THSG', u32 version,
u32 H, u32 W, u32 C, u8 dtype tag) followed by H*W*C values, row-major and
band-interleaved. Label rasters use C = 1 and the u16 tag.
"""

import os
import numpy as onp

from thsgr.utils.constants import (
    DTYPE_F32,
    DTYPE_F64,
    DTYPE_U16,
    RASTER_MAGIC,
    RASTER_VERSION,
)
from thsgr.utils.errors import RasterFormatError
from thsgr.utils.typing import IntHxW

HEADER = onp.dtype(
    [
        ('magic', 'S4'),
        ('version', '<u4'),
        ('height', '<u4'),
        ('width', '<u4'),
        ('channels', '<u4'),
        ('dtype', 'u1'),
    ]
)

DTYPES = {
    DTYPE_F32: onp.dtype('<f4'),
    DTYPE_F64: onp.dtype('<f8'),
    DTYPE_U16: onp.dtype('<u2'),
}


def _tag_for(array: onp.ndarray) -> int:
    for tag, dtype in DTYPES.items():
        if array.dtype == dtype.newbyteorder('='):
            return tag
    raise RasterFormatError('<array>', 'dtype', f'unsupported dtype {array.dtype}')


def write_raster(path: str, array: onp.ndarray, dtype_tag: int | None = None) -> None:
    """
    Writes an H x W x C (or H x W) array. Without a tag the array's own dtype
    decides, which must be float32, float64 or uint16.
    """
    if array.ndim == 2:
        array = array[..., None]
    if array.ndim != 3:
        raise RasterFormatError(path, 'shape', f'expected H x W x C, got {array.shape}')
    tag = _tag_for(array) if dtype_tag is None else dtype_tag
    if tag not in DTYPES:
        raise RasterFormatError(path, 'dtype', f'unknown dtype tag {tag}')
    header = onp.array(
        [(RASTER_MAGIC, RASTER_VERSION, *array.shape, tag)], dtype=HEADER
    )
    body = onp.ascontiguousarray(array, dtype=DTYPES[tag])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(header.tobytes())
        f.write(body.tobytes())


def read_raster(path: str) -> onp.ndarray:
    """
    Returns the H x W x C body in the stored dtype.
    """
    if not os.path.exists(path):
        raise RasterFormatError(path, 'file', 'does not exist')
    with open(path, 'rb') as f:
        raw = f.read()
    if len(raw) < HEADER.itemsize:
        raise RasterFormatError(path, 'header', f'truncated ({len(raw)} bytes)')
    header = onp.frombuffer(raw[: HEADER.itemsize], dtype=HEADER)[0]
    if header['magic'] != RASTER_MAGIC:
        raise RasterFormatError(path, 'magic', f'expected {RASTER_MAGIC!r}, got {header["magic"]!r}')
    if header['version'] != RASTER_VERSION:
        raise RasterFormatError(path, 'version', f'unsupported version {header["version"]}')
    tag = int(header['dtype'])
    if tag not in DTYPES:
        raise RasterFormatError(path, 'dtype', f'unknown dtype tag {tag}')
    shape = (int(header['height']), int(header['width']), int(header['channels']))
    if min(shape) == 0:
        raise RasterFormatError(path, 'shape', f'empty raster {shape}')
    dtype = DTYPES[tag]
    expected = HEADER.itemsize + dtype.itemsize * shape[0] * shape[1] * shape[2]
    if len(raw) != expected:
        raise RasterFormatError(path, 'body', f'expected {expected} bytes, got {len(raw)}')
    body = onp.frombuffer(raw, dtype=dtype, offset=HEADER.itemsize)
    return body.reshape(shape).astype(dtype.newbyteorder('='))


def write_labels(path: str, labels: IntHxW) -> None:
    write_raster(path, labels.astype(onp.uint16), DTYPE_U16)


def read_labels(path: str) -> IntHxW:
    data = read_raster(path)
    if data.shape[2] != 1 or data.dtype != onp.uint16:
        raise RasterFormatError(path, 'channels', 'label rasters hold one u16 channel')
    return data[..., 0]
