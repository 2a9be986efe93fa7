"""Sensor array layouts and the planar imaging grid.

Coordinates are Cartesian meters.  Arrays live in the z=0 plane with their
centroid at the origin; the imaging grid is a plane parallel to the array at
a positive z offset.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .validation import check_positions, check_positive

#: Angle in radians swept by each spiral arm from its innermost to its
#: outermost sensor.
ARM_SWEEP = np.pi

#: Ratio between the outermost and innermost radius of a spiral arm.
SPIRAL_RADIUS_RATIO = 10.0


@dataclass(frozen=True)
class ArrayGeometry:
    """An ordered set of sensor positions.

    Attributes:
        positions: (M, 3) array of sensor coordinates in meters.  Sensor i is
            row i; indices are dense 0..M-1.
        parent_indices: When this geometry was produced by subsampling a
            larger array, the index each sensor had in the parent; None for
            geometries built directly.
    """

    positions: np.ndarray
    parent_indices: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pos = check_positions(self.positions, "sensor positions").copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.num_sensors >= 2:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 0.0:
                raise ValueError("sensor positions must be pairwise distinct")
        if self.parent_indices is not None:
            idx = np.asarray(self.parent_indices, dtype=np.int64).copy()
            if idx.shape != (self.num_sensors,):
                raise ValueError("parent_indices length must match sensor count")
            idx.setflags(write=False)
            object.__setattr__(self, "parent_indices", idx)

    @property
    def num_sensors(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ImagingGrid:
    """Row-major planar lattice of candidate source positions.

    Point (i, j) of the lattice (row i along y, column j along x) sits at
    linear index ``i * nx + j``.

    Attributes:
        points: (N, 3) array of grid point coordinates, N = nx * ny.
        nx, ny: lattice dimensions along x and y.
        extent: (x_min, x_max, y_min, y_max) in meters, endpoints included.
        plane_offset: z distance of the grid plane from the array plane.
    """

    points: np.ndarray
    nx: int
    ny: int
    extent: tuple[float, float, float, float]
    plane_offset: float

    def __post_init__(self):
        pts = check_positions(self.points, "grid points").copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")
        if pts.shape[0] != self.nx * self.ny:
            raise ValueError(
                f"points length {pts.shape[0]} does not equal nx*ny = {self.nx * self.ny}"
            )

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def dx(self) -> float:
        """Grid spacing along x (0 for a single-column grid)."""
        x_min, x_max, _, _ = self.extent
        return (x_max - x_min) / (self.nx - 1) if self.nx > 1 else 0.0

    @property
    def dy(self) -> float:
        """Grid spacing along y (0 for a single-row grid)."""
        _, _, y_min, y_max = self.extent
        return (y_max - y_min) / (self.ny - 1) if self.ny > 1 else 0.0

    def linear_index(self, i: int, j: int) -> int:
        """Linear index of lattice point (row i, column j)."""
        if not (0 <= i < self.ny and 0 <= j < self.nx):
            raise IndexError(f"lattice index ({i}, {j}) out of range")
        return i * self.nx + j

    def lattice_index(self, k: int) -> tuple[int, int]:
        """Inverse of :meth:`linear_index`: (row, column) of linear index k."""
        if not (0 <= k < self.num_points):
            raise IndexError(f"linear index {k} out of range")
        return divmod(k, self.nx)


def spiral_array(num_sensors: int, num_arms: int, max_radius: float) -> ArrayGeometry:
    """Build a multi-arm logarithmic spiral array in the z=0 plane.

    Sensors are distributed over the arms as evenly as possible.  Each arm
    follows r(t) = r0 * exp(b*t) for t in (0, 1], with r0 = max_radius / 10
    and b chosen so the outermost sensor of every arm sits exactly at
    max_radius; arm k is rotated by 2*pi*k / num_arms.  Fully deterministic.

    Args:
        num_sensors: total number of sensors, >= num_arms.
        num_arms: number of spiral arms, >= 1.
        max_radius: radius of the outermost sensors in meters.

    Returns:
        ArrayGeometry with num_sensors pairwise-distinct positions and all
        radii <= max_radius.
    """
    num_sensors = int(num_sensors)
    num_arms = int(num_arms)
    if num_arms < 1:
        raise ValueError("num_arms must be >= 1")
    if num_sensors < num_arms:
        raise ValueError("num_sensors must be >= num_arms")
    check_positive(max_radius, "max_radius")

    r0 = max_radius / SPIRAL_RADIUS_RATIO
    b = np.log(SPIRAL_RADIUS_RATIO)

    base, extra = divmod(num_sensors, num_arms)
    positions = []
    for arm in range(num_arms):
        count = base + (1 if arm < extra else 0)
        rotation = 2.0 * np.pi * arm / num_arms
        # t = 1 corresponds to the outermost sensor; radii grow strictly
        # along the arm.
        t = (np.arange(count) + 1.0) / count
        radii = r0 * np.exp(b * t)
        angles = ARM_SWEEP * t + rotation
        arm_pts = np.column_stack(
            [radii * np.cos(angles), radii * np.sin(angles), np.zeros(count)]
        )
        positions.append(arm_pts)
    return ArrayGeometry(np.vstack(positions))


def make_grid(
    extent: tuple[float, float, float, float],
    nx: int,
    ny: int,
    plane_offset: float,
) -> ImagingGrid:
    """Build a row-major planar imaging grid with endpoints included.

    Args:
        extent: (x_min, x_max, y_min, y_max) in meters.
        nx: number of columns (points along x).
        ny: number of rows (points along y).
        plane_offset: z distance of the grid plane from the array plane, > 0.
    """
    x_min, x_max, y_min, y_max = (float(v) for v in extent)
    nx = int(nx)
    ny = int(ny)
    if not (x_min < x_max and y_min < y_max):
        raise ValueError("extent must satisfy x_min < x_max and y_min < y_max")
    if nx < 1 or ny < 1 or nx * ny < 1:
        raise ValueError("nx and ny must be positive")
    check_positive(plane_offset, "plane_offset")

    x = np.linspace(x_min, x_max, nx)
    y = np.linspace(y_min, y_max, ny)
    xx, yy = np.meshgrid(x, y)  # row i varies y, column j varies x
    points = np.column_stack(
        [xx.reshape(-1), yy.reshape(-1), np.full(nx * ny, plane_offset)]
    )
    return ImagingGrid(points, nx=nx, ny=ny, extent=(x_min, x_max, y_min, y_max),
                       plane_offset=float(plane_offset))


def subsample_sensors(geometry: ArrayGeometry, count: int, seed: int) -> ArrayGeometry:
    """Draw `count` sensors uniformly without replacement.

    Deterministic for a fixed seed.  Selected sensors keep their relative
    order; the original indices are recorded in ``parent_indices``.
    """
    count = int(count)
    m = geometry.num_sensors
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > m:
        raise ValueError(f"cannot subsample {count} sensors from {m}")
    rng = np.random.default_rng(int(seed))
    chosen = np.sort(rng.choice(m, size=count, replace=False))
    return ArrayGeometry(geometry.positions[chosen].copy(), parent_indices=chosen)


def save_geometry_csv(geometry: ArrayGeometry, path) -> None:
    """Write sensor positions as CSV with header index,x,y,z (meters, LF)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "x", "y", "z"])
    for i, (x, y, z) in enumerate(geometry.positions):
        writer.writerow([i, repr(float(x)), repr(float(y)), repr(float(z))])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def load_geometry_csv(path) -> ArrayGeometry:
    """Read a geometry CSV written by :func:`save_geometry_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "x", "y", "z"]:
            raise ValueError(f"{path}: expected header 'index,x,y,z'")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no sensor rows")
    indices = [int(row[0]) for row in rows]
    if indices != list(range(len(rows))):
        raise ValueError(f"{path}: sensor indices must be dense 0..M-1")
    positions = np.array([[float(row[1]), float(row[2]), float(row[3])] for row in rows])
    return ArrayGeometry(positions)
