"""Hyperspectral cube container, flattening to the pixels-by-bands matrix
view used by the decomposition, and band removal."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import DataError

NDArrayF = npt.NDArray[np.floating]


@dataclass(frozen=True)
class HsiCube:
    """Reflectance cube stored band-sequential: data[j] is band j's
    height x width plane, row-major."""
    height: int
    width: int
    bands: int
    data: NDArrayF            # shape [bands, height, width], float64, finite

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.bands < 1:
            raise ValueError("HsiCube dimensions must be positive")
        if self.data.shape != (self.bands, self.height, self.width):
            raise ValueError(
                "HsiCube.data shape %s does not match (bands, height, width) = %s"
                % (self.data.shape, (self.bands, self.height, self.width)))
        if self.data.dtype != np.float64:
            raise ValueError("HsiCube.data must be float64")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("HsiCube.data must be finite")
        # freeze the payload so cubes can be shared read-only
        arr = np.ascontiguousarray(self.data)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data: NDArrayF) -> "HsiCube":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError("expected a 3-D [bands, height, width] array")
        p, h, w = data.shape
        return cls(height=h, width=w, bands=p, data=data)

    def spectrum(self, row: int, col: int) -> NDArrayF:
        return self.data[:, row, col]


@dataclass(frozen=True)
class BandMask:
    """Bands to drop, as 1-based indices (band 1 is the first band)."""
    removed: Tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.removed)
        if len(set(idx)) != len(idx):
            raise ValueError("BandMask indices must be unique")
        if any(i < 1 for i in idx):
            raise ValueError("BandMask indices are 1-based and must be >= 1")
        object.__setattr__(self, "removed", tuple(sorted(idx)))

    @classmethod
    def from_ranges(cls, ranges: Sequence[Tuple[int, int]]) -> "BandMask":
        """Build from inclusive (first, last) 1-based ranges."""
        idx = []
        for lo, hi in ranges:
            if lo > hi:
                raise ValueError("range (%d, %d) is reversed" % (lo, hi))
            idx.extend(range(lo, hi + 1))
        return cls(removed=tuple(idx))


def flatten(cube: HsiCube) -> NDArrayF:
    """Cube -> e x p matrix D with e = height*width; pixel (r, c) maps to
    row r*width + c and column j is band j."""
    e = cube.height * cube.width
    return cube.data.reshape(cube.bands, e).T.copy()


def unflatten(m: NDArrayF, height: int, width: int) -> HsiCube:
    """Inverse of flatten; rejects a row count that is not height*width."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DataError("expected a 2-D pixels-by-bands matrix")
    if height < 1 or width < 1:
        raise DataError("height and width must be positive")
    if m.shape[0] != height * width:
        raise DataError(
            "matrix has %d rows but height*width = %d*%d = %d"
            % (m.shape[0], height, width, height * width))
    data = np.ascontiguousarray(m.T.reshape(m.shape[1], height, width))
    return HsiCube(height=height, width=width, bands=m.shape[1], data=data)


def remove_bands(cube: HsiCube, mask: BandMask) -> HsiCube:
    """Drop the masked bands, preserving the order of the survivors."""
    bad = [i for i in mask.removed if i > cube.bands]
    if bad:
        raise DataError(
            "band indices %s out of range for a %d-band cube" % (bad, cube.bands))
    drop = {i - 1 for i in mask.removed}
    keep = [j for j in range(cube.bands) if j not in drop]
    if not keep:
        raise DataError("cannot remove every band")
    return HsiCube(height=cube.height, width=cube.width, bands=len(keep),
                   data=cube.data[keep].copy())
