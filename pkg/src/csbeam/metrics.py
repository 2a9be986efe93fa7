"""Map normalization and figures of merit.

Dynamic range is reported against the smallest nonzero map value, with the
number of exactly-zero cells counted separately, because sparse recovery
produces exact zeros and flooring them would hide the true range.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beamform import PowerMap
from .exceptions import AllZeroMapError
from .geometry import ImagingGrid

#: Mainlobe edge level relative to the peak, in dB.
MAINLOBE_EDGE_DB = -3.0

#: Stand-in for minus infinity when interpolating across exact-zero cells.
_NEG_INF_DB = -400.0


@dataclass(frozen=True)
class MapMetrics:
    """Quantitative summary of one power map.

    Attributes:
        peak_index: linear grid index of the map maximum (ties break toward
            the lowest index).
        peak_position: 3-D position of the peak grid point.
        dynamic_range_db: peak level minus the smallest nonzero level.
        mainlobe_width_m: -3 dB full width along x through the peak, at
            least one grid spacing.
        max_sidelobe_db: largest level outside the contiguous -3 dB region
            around the peak, relative to the peak (<= 0; floor when there is
            no sidelobe).
        localization_error_m: distance from the peak to the ground truth
            position, when one was given.
        count_zero: number of exactly-zero cells.
        width_truncated: the -3 dB contour ran off the grid edge, so the
            width is a lower bound.
    """

    peak_index: int
    peak_position: tuple[float, float, float]
    dynamic_range_db: float
    mainlobe_width_m: float
    max_sidelobe_db: float
    localization_error_m: float | None
    count_zero: int
    width_truncated: bool

    def to_dict(self) -> dict:
        return {
            "peak_index": self.peak_index,
            "peak_position": list(self.peak_position),
            "dynamic_range_db": self.dynamic_range_db,
            "mainlobe_width_m": self.mainlobe_width_m,
            "max_sidelobe_db": self.max_sidelobe_db,
            "localization_error_m": self.localization_error_m,
            "count_zero": self.count_zero,
            "width_truncated": self.width_truncated,
        }


def normalize_db(pmap: PowerMap | np.ndarray, floor_db: float = -100.0) -> np.ndarray:
    """Normalized dB map: 0 dB at the peak, exact zeros cut off at the floor.

    Raises:
        AllZeroMapError: when the map has no strictly positive value.
    """
    values = pmap.values if isinstance(pmap, PowerMap) else np.asarray(pmap, dtype=float)
    if floor_db >= 0.0:
        raise ValueError("floor_db must be negative")
    vmax = values.max() if values.size else 0.0
    if vmax <= 0.0:
        raise AllZeroMapError("cannot normalize a map with no positive value")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(values / vmax)
    return np.maximum(db, floor_db)


def _unfloored_db(values: np.ndarray) -> np.ndarray:
    """Normalized dB with exact zeros mapped to a large negative stand-in."""
    vmax = values.max()
    if vmax <= 0.0:
        raise AllZeroMapError("cannot normalize a map with no positive value")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(values / vmax)
    return np.where(np.isneginf(db), _NEG_INF_DB, db)


def _mainlobe_mask(db_grid: np.ndarray, peak_row: int, peak_col: int) -> np.ndarray:
    """4-connected component of cells within 3 dB of the peak."""
    ny, nx = db_grid.shape
    mask = np.zeros((ny, nx), dtype=bool)
    queue = deque([(peak_row, peak_col)])
    mask[peak_row, peak_col] = True
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            if 0 <= ii < ny and 0 <= jj < nx and not mask[ii, jj] \
                    and db_grid[ii, jj] >= MAINLOBE_EDGE_DB:
                mask[ii, jj] = True
                queue.append((ii, jj))
    return mask


def _crossing(x: np.ndarray, db: np.ndarray, start: int, step: int) -> tuple[float, bool]:
    """Walk from `start` in direction `step` to the -3 dB crossing.

    Returns (coordinate, truncated); truncated means the contour never
    dropped below the edge level before the grid boundary.
    """
    j = start
    while True:
        jn = j + step
        if jn < 0 or jn >= len(db):
            return float(x[j]), True
        if db[jn] < MAINLOBE_EDGE_DB:
            frac = (MAINLOBE_EDGE_DB - db[j]) / (db[jn] - db[j])
            return float(x[j] + frac * (x[jn] - x[j])), False
        j = jn


def compute_metrics(pmap: PowerMap, grid: ImagingGrid, truth=None) -> MapMetrics:
    """Extract the figures of merit of a map.

    Emits a UserWarning when the peak sits so close to the grid boundary
    that the -3 dB width is truncated.
    """
    if pmap.num_points != grid.num_points:
        raise ValueError("power map size does not match the grid")
    values = pmap.values
    peak_index = int(np.argmax(values))
    peak_position = tuple(float(c) for c in grid.points[peak_index])

    nonzero = values[values > 0.0]
    vmax = float(values[peak_index])
    if vmax <= 0.0:
        raise AllZeroMapError("cannot compute metrics for an all-zero map")
    dynamic_range_db = float(10.0 * np.log10(vmax / nonzero.min()))
    count_zero = int(np.sum(values == 0.0))

    db = _unfloored_db(values)
    db_grid = db.reshape(grid.ny, grid.nx)
    peak_row, peak_col = grid.lattice_index(peak_index)

    x_coords = np.linspace(grid.extent[0], grid.extent[1], grid.nx)
    row_db = db_grid[peak_row]
    x_right, trunc_right = _crossing(x_coords, row_db, peak_col, +1)
    x_left, trunc_left = _crossing(x_coords, row_db, peak_col, -1)
    width_truncated = trunc_left or trunc_right
    if width_truncated:
        warnings.warn(
            "map peak is at or near the grid boundary; mainlobe width is truncated",
            UserWarning,
            stacklevel=2,
        )
    mainlobe_width = max(float(x_right - x_left), grid.dx)

    mask = _mainlobe_mask(db_grid, peak_row, peak_col)
    outside = db_grid[~mask]
    if outside.size and outside.max() > _NEG_INF_DB:
        max_sidelobe_db = float(outside.max())
    else:
        max_sidelobe_db = _NEG_INF_DB

    localization_error = None
    if truth is not None:
        truth = np.asarray(truth, dtype=float).reshape(3)
        localization_error = float(np.linalg.norm(np.asarray(peak_position) - truth))

    return MapMetrics(
        peak_index=peak_index,
        peak_position=peak_position,
        dynamic_range_db=dynamic_range_db,
        mainlobe_width_m=mainlobe_width,
        max_sidelobe_db=max_sidelobe_db,
        localization_error_m=localization_error,
        count_zero=count_zero,
        width_truncated=width_truncated,
    )


def axial_slice(
    pmap: PowerMap,
    grid: ImagingGrid,
    axis: str = "x",
    through="peak",
    floor_db: float = -100.0,
) -> list[tuple[float, float]]:
    """Normalized dB values along one grid line, ordered by coordinate.

    Args:
        axis: "x" (a row of constant y) or "y" (a column of constant x).
        through: "peak" to pass through the map maximum, or a linear grid
            index the line must contain.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if pmap.num_points != grid.num_points:
        raise ValueError("power map size does not match the grid")
    if through == "peak":
        anchor = int(np.argmax(pmap.values))
    else:
        anchor = int(through)
        if not (0 <= anchor < grid.num_points):
            raise IndexError(f"grid index {anchor} out of range")
    row, col = grid.lattice_index(anchor)

    db = normalize_db(pmap, floor_db=floor_db).reshape(grid.ny, grid.nx)
    if axis == "x":
        coords = np.linspace(grid.extent[0], grid.extent[1], grid.nx)
        line = db[row, :]
    else:
        coords = np.linspace(grid.extent[2], grid.extent[3], grid.ny)
        line = db[:, col]
    return [(float(c), float(v)) for c, v in zip(coords, line)]


def save_metrics_json(metrics: MapMetrics, path) -> None:
    Path(path).write_text(
        json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
