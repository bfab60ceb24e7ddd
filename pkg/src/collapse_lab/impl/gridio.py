"""
DPGRID01 files: a 64-byte little-endian header followed by the voxel
densities as float64, x index fastest.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from ..entities.densities import DensityGrid
from ..exceptions import GridFormatError

logger = logging.getLogger(__name__)

MAGIC = b"DPGRID01"
UNIT_TAG = b"SI"
HEADER = struct.Struct("<8s3i3dd8s4x")


def encode_grid(grid: DensityGrid) -> bytes:
    header = HEADER.pack(MAGIC, *grid.dims, *grid.origin, grid.voxel_edge, UNIT_TAG)
    return header + np.asarray(grid.values, dtype="<f8").ravel(order="F").tobytes()


def decode_grid(data: bytes) -> DensityGrid:
    if len(data) < HEADER.size:
        raise GridFormatError(f"file has {len(data)} bytes, shorter than the {HEADER.size}-byte header")
    magic, nx, ny, nz, ox, oy, oz, edge, unit = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFormatError(f"bad magic {magic!r}")
    tag = unit.rstrip(b"\0")
    if tag != UNIT_TAG:
        raise GridFormatError(f"unsupported unit tag {tag!r}")
    dims = (nx, ny, nz)
    if any(n <= 0 for n in dims):
        raise GridFormatError(f"invalid dims {dims}")
    expected = HEADER.size + 8 * nx * ny * nz
    if len(data) != expected:
        raise GridFormatError(f"expected {expected} bytes for dims {dims}, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(dims, order="F")
    try:
        return DensityGrid(origin=(ox, oy, oz), voxel_edge=edge, dims=dims, values=values.astype(float))
    except ValueError as exc:
        raise GridFormatError(f"invalid grid contents: {exc}") from exc


def write_grid(grid: DensityGrid, path: Path) -> None:
    Path(path).write_bytes(encode_grid(grid))
    logger.debug("wrote %s grid to %s", grid.dims, path)


def read_grid(path: Path) -> DensityGrid:
    try:
        data = Path(path).expanduser().read_bytes()
    except OSError as exc:
        raise GridFormatError(f"cannot read grid file {path}: {exc}") from exc
    return decode_grid(data)
