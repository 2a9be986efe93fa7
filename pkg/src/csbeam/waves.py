"""Free-field propagation model: steering vectors and their lifted form.

A monopole at distance r produces the transfer exp(-j*w*r/C) / (4*pi*r) at
angular frequency w and propagation speed C.  The steering matrix collects
this transfer for every (sensor, grid point) pair; its lifted form maps
per-point source powers to the vectorized cross-spectral matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateGeometryError
from .geometry import ArrayGeometry, ImagingGrid
from .validation import check_point, check_positive

#: Default propagation speed in m/s (air at 20 degrees C).
DEFAULT_SPEED = 343.0

#: Distances below this are treated as a Green's-function singularity.
MIN_DISTANCE = 1e-9


@dataclass(frozen=True)
class SteeringMatrix:
    """Complex M x N propagation matrix from grid points to sensors.

    Column k is the steering vector of grid point k; entry (i, k) has
    magnitude 1 / (4*pi*r_ik).
    """

    entries: np.ndarray
    frequency: float
    speed: float
    geometry: ArrayGeometry
    grid: ImagingGrid

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128).copy()
        if ent.ndim != 2:
            raise ValueError("steering matrix must be 2-D")
        if not np.all(np.isfinite(ent)) or np.any(ent == 0):
            raise ValueError("steering matrix entries must be finite and nonzero")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def num_sensors(self) -> int:
        return self.entries.shape[0]

    @property
    def num_points(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class LiftedMatrix:
    """M^2 x N matrix whose column k is vec(g_k g_k^H).

    Row (i, l) maps to index i*M + l and corresponds to the expectation
    E[Y_i Y_l^*]; rows with i == l are real and strictly positive.
    """

    entries: np.ndarray
    num_sensors: int

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128).copy()
        m = int(self.num_sensors)
        if ent.ndim != 2 or ent.shape[0] != m * m:
            raise ValueError("lifted matrix must have M^2 rows")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def num_points(self) -> int:
        return self.entries.shape[1]


def _distances(sensor_positions: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pairwise sensor-to-point distances, shape (M, N)."""
    diff = sensor_positions[:, None, :] - points[None, :, :]
    return np.linalg.norm(diff, axis=2)


def steering_vector(
    geometry: ArrayGeometry,
    source,
    frequency: float,
    speed: float = DEFAULT_SPEED,
) -> np.ndarray:
    """Steering vector of a monopole at `source`.

    Element i equals exp(-j*w*r_i/C) / (4*pi*r_i) with w = 2*pi*frequency
    and r_i the Euclidean distance from sensor i to the source.

    Raises:
        DegenerateGeometryError: if the source (nearly) touches a sensor.
    """
    source = check_point(source, "source")
    check_positive(frequency, "frequency")
    check_positive(speed, "speed")
    r = np.linalg.norm(geometry.positions - source[None, :], axis=1)
    bad = np.nonzero(r < MIN_DISTANCE)[0]
    if bad.size:
        raise DegenerateGeometryError(
            f"source {tuple(source)} coincides with sensor {bad[0]} (r < {MIN_DISTANCE} m)"
        )
    omega = 2.0 * np.pi * frequency
    return np.exp(-1j * omega * r / speed) / (4.0 * np.pi * r)


def steering_matrix(
    geometry: ArrayGeometry,
    grid: ImagingGrid,
    frequency: float,
    speed: float = DEFAULT_SPEED,
) -> SteeringMatrix:
    """Steering matrix for every grid point: column k = steering vector at k.

    Raises:
        DegenerateGeometryError: naming the offending (sensor, gridpoint)
            pair if any grid point (nearly) touches a sensor.
    """
    check_positive(frequency, "frequency")
    check_positive(speed, "speed")
    r = _distances(geometry.positions, grid.points)
    if (r < MIN_DISTANCE).any():
        i, k = np.argwhere(r < MIN_DISTANCE)[0]
        raise DegenerateGeometryError(
            f"grid point {k} coincides with sensor {i} (r < {MIN_DISTANCE} m)"
        )
    omega = 2.0 * np.pi * frequency
    entries = np.exp(-1j * omega * r / speed) / (4.0 * np.pi * r)
    return SteeringMatrix(entries, frequency=float(frequency), speed=float(speed),
                          geometry=geometry, grid=grid)


def lift_steering_matrix(matrix: SteeringMatrix) -> LiftedMatrix:
    """Lift an M x N steering matrix to the M^2 x N outer-product form.

    Column k of the result is the row-major vectorization of g_k g_k^H, so
    row i*M + l holds G_ik * conj(G_lk).  This is the same vectorization
    convention used for the cross-spectral matrix.
    """
    g = matrix.entries
    m, n = g.shape
    lifted = (g[:, None, :] * g.conj()[None, :, :]).reshape(m * m, n)
    return LiftedMatrix(lifted, num_sensors=m)
