"""Regular 2D grid geometry shared by the simulator and imaging code.

Fields live on cell centers of an (nz, nx) array. Row 0 is the shallowest
row, depth increases with the row index, and z is positive downward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_WIDTH_M = 3200.0
DEFAULT_DEPTH_M = 2131.0


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangular grid: nx lateral cells, nz depth cells."""

    nx: int
    nz: int
    dx: float
    dz: float

    def __post_init__(self):
        if self.nx < 8 or self.nz < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.nx}x{self.nz}")
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("cell sizes must be positive")

    @classmethod
    def from_extent(cls, nx: int, nz: int,
                    width_m: float = DEFAULT_WIDTH_M,
                    depth_m: float = DEFAULT_DEPTH_M) -> "Grid2D":
        """Grid with the default physical footprint scaled to (nx, nz) cells."""
        return cls(nx=nx, nz=nz, dx=width_m / nx, dz=depth_m / nz)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def cell_area(self) -> float:
        """Cell cross-section in the plane, per meter of out-of-plane thickness."""
        return self.dx * self.dz

    def cell_depths(self) -> np.ndarray:
        """Depth of each cell center below the top boundary, shape (nz,)."""
        return (np.arange(self.nz) + 0.5) * self.dz


def area_average(field: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Downsample by averaging integer-factor blocks (conserves means).

    Accepts (nz, nx) or (c, nz, nx) arrays; the leading channel axis is kept.
    """
    if field.ndim == 3:
        return np.stack([area_average(plane, out_shape) for plane in field])
    nz, nx = field.shape
    oz, ox = out_shape
    if nz == oz and nx == ox:
        return field.copy()
    if nz % oz or nx % ox:
        raise ValueError(f"cannot area-average {field.shape} to {out_shape}: "
                         "factors must be integers")
    fz, fx = nz // oz, nx // ox
    return field.reshape(oz, fz, ox, fx).mean(axis=(1, 3))
