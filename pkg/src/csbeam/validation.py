"""Input validation helpers shared by the functional core and the estimators.

These mirror the role of ``sklearn.utils.validation``: coerce array-likes to
well-formed ndarrays and fail early with a clear message.
"""

from __future__ import annotations

import numpy as np


def check_positions(positions, name: str = "positions") -> np.ndarray:
    """Coerce to an (n, 3) float64 array of finite Cartesian positions."""
    arr = np.asarray(positions, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one point")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_point(point, name: str = "point") -> np.ndarray:
    """Coerce to a (3,) float64 position vector."""
    arr = np.asarray(point, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-D position, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = float(value)
    if np.isnan(value) or value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value


def check_snapshot_blocks(blocks, n_sensors: int | None = None) -> np.ndarray:
    """Coerce to a (K, M) complex128 array of frequency-domain snapshots."""
    arr = np.asarray(blocks, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"snapshots must have shape (K, M), got {arr.shape}")
    if n_sensors is not None and arr.shape[1] != n_sensors:
        raise ValueError(
            f"snapshot width {arr.shape[1]} does not match sensor count {n_sensors}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("snapshots contain non-finite values")
    return arr


def check_csm_entries(entries, hermitian_rtol: float = 1e-12) -> np.ndarray:
    """Coerce to an (M, M) complex128 Hermitian matrix."""
    arr = np.asarray(entries, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"cross-spectral matrix must be square, got {arr.shape}")
    scale = np.abs(arr).max()
    if scale > 0 and np.abs(arr - arr.conj().T).max() > max(hermitian_rtol * scale, 1e-300):
        raise ValueError("cross-spectral matrix is not Hermitian within tolerance")
    return arr
