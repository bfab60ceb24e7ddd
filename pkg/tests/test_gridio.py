import struct

import numpy as np
import pytest

from collapse_lab.entities.densities import DensityGrid
from collapse_lab.exceptions import GridFormatError
from collapse_lab.impl.gridio import HEADER, MAGIC, decode_grid, encode_grid, read_grid, write_grid


@pytest.fixture
def grid() -> DensityGrid:
    values = np.arange(24, dtype=float).reshape((2, 3, 4))
    return DensityGrid(origin=(-1.0, 0.5, 2.0), voxel_edge=0.25, dims=(2, 3, 4), values=values)


def test_header_layout():
    assert HEADER.size == 64


def test_file_round_trip(tmp_path, grid):
    path = tmp_path / "body.dpgrid"
    write_grid(grid, path)
    loaded = read_grid(path)
    assert loaded.dims == grid.dims
    assert loaded.origin == grid.origin
    assert loaded.voxel_edge == grid.voxel_edge
    assert np.array_equal(loaded.values, grid.values)


def test_x_index_runs_fastest(grid):
    data = encode_grid(grid)
    first = struct.unpack_from("<3d", data, HEADER.size)
    assert first == (grid.values[0, 0, 0], grid.values[1, 0, 0], grid.values[0, 1, 0])


def test_bad_magic(grid):
    data = b"NOTAGRID" + encode_grid(grid)[len(MAGIC) :]
    with pytest.raises(GridFormatError, match="magic"):
        decode_grid(data)


def test_truncated_payload(grid):
    with pytest.raises(GridFormatError, match="expected"):
        decode_grid(encode_grid(grid)[:-8])


def test_short_header():
    with pytest.raises(GridFormatError):
        decode_grid(b"DPGRID01")


def test_bad_unit_tag(grid):
    data = bytearray(encode_grid(grid))
    data[52:60] = b"CGS\0\0\0\0\0"
    with pytest.raises(GridFormatError, match="unit"):
        decode_grid(bytes(data))


def test_negative_density(grid):
    data = bytearray(encode_grid(grid))
    struct.pack_into("<d", data, HEADER.size, -1.0)
    with pytest.raises(GridFormatError, match="invalid grid"):
        decode_grid(bytes(data))


def test_missing_file(tmp_path):
    with pytest.raises(GridFormatError, match="cannot read"):
        read_grid(tmp_path / "missing.dpgrid")
