"""Shared volumetric data types and atlas/mask derivations.

Conventions: in-memory arrays are C-contiguous and indexed exactly as
written in the docs, ``data[x, y, z]`` for 3D fields, ``data[c, x, y, z]``
for multi-channel volumes and ``data[x, y, z, t]`` for time series. All
objects are immutable after construction (arrays are marked read-only)
and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import precision
from .errors import EmptyRoi, GridMismatch, InvalidRoiCount, NonFiniteError, ShapeError


def _as_float_field(data, shape, what):
    arr = np.ascontiguousarray(data, dtype=precision.dtype())
    if arr.shape != shape:
        raise ShapeError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{what}: non-finite values present")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridMeta:
    """Voxel grid geometry; ``tr_s`` is set only on time-series grids."""

    dims: tuple
    voxel_size_mm: tuple
    tr_s: float | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        vox = tuple(float(v) for v in self.voxel_size_mm)
        if len(dims) != 3 or len(vox) != 3:
            raise ShapeError("GridMeta needs 3 dims and 3 voxel sizes")
        if any(d < 1 for d in dims):
            raise ShapeError(f"all dims must be >= 1, got {dims}")
        if any(v <= 0 for v in vox):
            raise ShapeError(f"all voxel sizes must be > 0, got {vox}")
        if self.tr_s is not None and not float(self.tr_s) > 0:
            raise ShapeError(f"tr_s must be > 0, got {self.tr_s}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "voxel_size_mm", vox)
        if self.tr_s is not None:
            object.__setattr__(self, "tr_s", float(self.tr_s))

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def drop_tr(self) -> "GridMeta":
        """Same geometry without a repetition time (for 3D products)."""
        return GridMeta(self.dims, self.voxel_size_mm)

    def with_tr(self, tr_s: float) -> "GridMeta":
        return GridMeta(self.dims, self.voxel_size_mm, tr_s)


@dataclass(frozen=True)
class Volume3D:
    """Scalar field over a grid, indexed ``data[x, y, z]``."""

    meta: GridMeta
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_float_field(self.data, self.meta.dims, "Volume3D"))


@dataclass(frozen=True)
class TimeSeriesVolume:
    """4D field ``data[x, y, z, t]``; meta carries the repetition time."""

    meta: GridMeta
    data: np.ndarray

    def __post_init__(self):
        if self.meta.tr_s is None:
            raise ShapeError("TimeSeriesVolume requires a grid with tr_s")
        arr = np.ascontiguousarray(self.data, dtype=precision.dtype())
        if arr.ndim != 4 or arr.shape[:3] != self.meta.dims:
            raise ShapeError(
                f"TimeSeriesVolume: expected shape {self.meta.dims + ('T',)}, got {arr.shape}"
            )
        if arr.shape[3] < 1:
            raise ShapeError("TimeSeriesVolume needs at least one frame")
        if not np.isfinite(arr).all():
            raise NonFiniteError("TimeSeriesVolume: non-finite values present")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True)
class MultiChannelVolume:
    """Channel-stacked scalar fields, indexed ``data[c, x, y, z]``."""

    meta: GridMeta
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=precision.dtype())
        if arr.ndim != 4 or arr.shape[1:] != self.meta.dims:
            raise ShapeError(
                f"MultiChannelVolume: expected shape ('C',) + {self.meta.dims}, got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise ShapeError("MultiChannelVolume needs at least one channel")
        if not np.isfinite(arr).all():
            raise NonFiniteError("MultiChannelVolume: non-finite values present")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Atlas:
    """Integer label field: 0 = background, 1..R = ROI ids, all present."""

    meta: GridMeta
    labels: np.ndarray
    roi_count: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.labels, dtype=np.int32)
        if arr.shape != self.meta.dims:
            raise ShapeError(f"Atlas: expected shape {self.meta.dims}, got {arr.shape}")
        r = int(self.roi_count)
        if r < 2:
            raise InvalidRoiCount(f"atlas needs R >= 2 ROIs, got {r}")
        if arr.min() < 0 or arr.max() > r:
            raise ShapeError(f"atlas labels must lie in [0, {r}]")
        present = np.bincount(arr.ravel(), minlength=r + 1)[1:]
        if (present == 0).any():
            missing = [int(i) + 1 for i in np.flatnonzero(present == 0)]
            raise EmptyRoi(f"ROI ids with zero voxels: {missing}")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)
        object.__setattr__(self, "roi_count", r)


@dataclass(frozen=True)
class Mask:
    """Boolean include field over a grid."""

    meta: GridMeta
    included: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.included, dtype=bool)
        if arr.shape != self.meta.dims:
            raise ShapeError(f"Mask: expected shape {self.meta.dims}, got {arr.shape}")
        if not arr.any():
            raise ShapeError("Mask must include at least one voxel")
        arr.flags.writeable = False
        object.__setattr__(self, "included", arr)

    @property
    def n_included(self) -> int:
        return int(self.included.sum())


def atlas_to_mask(atlas: Atlas) -> Mask:
    """Gray-matter mask of an atlas: a voxel is included iff its label is nonzero."""
    return Mask(atlas.meta.drop_tr(), atlas.labels > 0)


def check_grid_compat(a: GridMeta, b: GridMeta, context: str = "") -> None:
    """Raise GridMismatch unless dims and voxel sizes agree component-wise."""
    if a.dims != b.dims or a.voxel_size_mm != b.voxel_size_mm:
        raise GridMismatch(a, b, context)


def roi_voxel_counts(atlas: Atlas) -> np.ndarray:
    """Voxel count per ROI id; ``counts[r]`` is the size of ROI r+1."""
    counts = np.bincount(atlas.labels.ravel(), minlength=atlas.roi_count + 1)
    return counts[1:].astype(np.int64)
