"""The three imaging algorithms: CB, CSB-I, and CSB-II.

All three map observations plus a steering model to a nonnegative per-grid-
point power map.  CB scans the cross-spectral matrix with a self-normalized
steering weight; CSB-I runs sparse recovery directly on one frequency-domain
snapshot; CSB-II runs nonnegative sparse recovery on the vectorized
cross-spectral matrix through the lifted steering matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InfeasibleNonnegError
from .geometry import ImagingGrid
from .simulate import CrossSpectralMatrix, SnapshotSet, vectorize_csm
from .solver import BpdnProblem, solve_bpdn
from .validation import check_nonnegative, check_snapshot_blocks
from .waves import LiftedMatrix, SteeringMatrix

ALGORITHMS = ("CB", "CSB-I", "CSB-II")


@dataclass(frozen=True)
class PowerMap:
    """Nonnegative per-grid-point source power.

    Attributes:
        values: (N,) nonnegative powers aligned with the imaging grid.
        frequency: analysis frequency in Hz.
        algorithm: one of "CB", "CSB-I", "CSB-II".
        delta: residual ball radius used (None for CB).
        converged: solver convergence flag (None for CB).
        iterations: solver iterations (None for CB).
        averaged_blocks: number of snapshot blocks averaged by the CSB-I
            multi-block extension (None for single-shot and CB/CSB-II).
        block_count: snapshot blocks behind the cross-spectral matrix
            (CSB-II and CB), None otherwise.
    """

    values: np.ndarray
    frequency: float
    algorithm: str
    delta: float | None = None
    converged: bool | None = None
    iterations: int | None = None
    averaged_blocks: int | None = None
    block_count: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1).copy()
        if vals.size < 1:
            raise ValueError("power map must have at least one value")
        if not np.all(np.isfinite(vals)):
            raise ValueError("power map values must be finite")
        if vals.min() < 0.0:
            raise ValueError("power map values must be nonnegative")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm tag {self.algorithm!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def num_points(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DeltaPolicy:
    """How to pick the residual ball radius.

    mode "explicit" returns ``explicit_value`` as-is; mode
    "from-noise-power" derives the radius from the per-snapshot noise
    variance ``noise_power`` (scalar or per-channel, Pa^2 per bin), a
    multiplicative ``safety`` factor, and for the covariance domain the
    snapshot block count.
    """

    mode: str = "from-noise-power"
    explicit_value: float = 0.0
    noise_power: float | np.ndarray = 0.0
    safety: float = 1.0
    block_count: int = 1

    def __post_init__(self):
        if self.mode not in ("explicit", "from-noise-power"):
            raise ValueError(f"unknown delta policy mode {self.mode!r}")
        check_nonnegative(self.explicit_value, "explicit_value")
        noise = np.asarray(self.noise_power, dtype=np.float64)
        if np.any(noise < 0.0):
            raise ValueError("noise_power must be nonnegative")
        if self.safety < 1.0:
            raise ValueError("safety factor must be >= 1")

    @property
    def mean_noise_power(self) -> float:
        return float(np.mean(self.noise_power))


def resolve_delta_csb1(policy: DeltaPolicy, m: int) -> float:
    """Ball radius for snapshot-domain recovery.

    from-noise-power returns safety * sqrt(M * sigma^2): the root of the
    expected squared norm of an M-channel complex noise vector with
    per-channel variance sigma^2.
    """
    if policy.mode == "explicit":
        return float(policy.explicit_value)
    if m < 1:
        raise ValueError("sensor count must be >= 1")
    sigma2 = policy.mean_noise_power
    if sigma2 == 0.0:
        return 0.0
    return float(policy.safety * np.sqrt(m * sigma2))


def resolve_delta_csb2(policy: DeltaPolicy, m: int) -> float:
    """Ball radius for covariance-domain recovery.

    from-noise-power returns safety * sigma^2 * (sqrt(M) + M / sqrt(K)):
    sqrt(M) bounds the norm of the expected diagonal noise term sigma^2*I in
    the vectorized cross-spectral matrix; M/sqrt(K) bounds its sampling
    error over K blocks.
    """
    if policy.mode == "explicit":
        return float(policy.explicit_value)
    if m < 1:
        raise ValueError("sensor count must be >= 1")
    if policy.block_count < 1:
        raise ValueError("block_count must be >= 1 for the covariance-domain policy")
    sigma2 = policy.mean_noise_power
    if sigma2 == 0.0:
        return 0.0
    k = policy.block_count
    return float(policy.safety * sigma2 * (np.sqrt(m) + m / np.sqrt(k)))


def csb1(
    snapshot: np.ndarray,
    matrix: SteeringMatrix,
    delta: float,
    *,
    primal_tol: float = 1e-6,
    dual_tol: float = 1e-6,
    max_iters: int = 5000,
    trace=None,
) -> PowerMap:
    """Sparse recovery on one frequency-domain snapshot.

    Solves min ||s||_1 subject to ||Y - G s||_2 <= delta over complex s and
    reports |s_k|^2 per grid point.  Non-convergence is recorded in the map
    diagnostics; the map is still returned.
    """
    snapshot = np.asarray(snapshot, dtype=np.complex128).reshape(-1)
    if snapshot.shape[0] != matrix.num_sensors:
        raise ValueError(
            f"snapshot length {snapshot.shape[0]} does not match sensor count "
            f"{matrix.num_sensors}"
        )
    problem = BpdnProblem(matrix.entries, snapshot, delta, nonneg=False,
                          primal_tol=primal_tol, dual_tol=dual_tol, max_iters=max_iters)
    solution = solve_bpdn(problem, trace=trace)
    return PowerMap(
        np.abs(solution.x) ** 2,
        frequency=matrix.frequency,
        algorithm="CSB-I",
        delta=float(delta),
        converged=solution.converged,
        iterations=solution.iterations,
    )


def csb1_multi(
    snapshots: SnapshotSet | np.ndarray,
    matrix: SteeringMatrix,
    delta: float,
    **solver_kwargs,
) -> PowerMap:
    """Average the CSB-I power maps of all snapshot blocks.

    An extension of the single-snapshot algorithm for stability on noisy
    data; outputs are labeled through ``averaged_blocks``.  Accepts a
    :class:`~csbeam.simulate.SnapshotSet` or a raw (K, M) block array.
    """
    blocks = snapshots.blocks if isinstance(snapshots, SnapshotSet) else \
        check_snapshot_blocks(snapshots, matrix.num_sensors)
    maps = [csb1(block, matrix, delta, **solver_kwargs) for block in blocks]
    values = np.mean([p.values for p in maps], axis=0)
    return PowerMap(
        values,
        frequency=matrix.frequency,
        algorithm="CSB-I",
        delta=float(delta),
        converged=all(p.converged for p in maps),
        iterations=max(p.iterations for p in maps),
        averaged_blocks=blocks.shape[0],
    )


def csb2(
    csm: CrossSpectralMatrix,
    lifted: LiftedMatrix,
    delta: float,
    *,
    remove_diagonal: bool = False,
    primal_tol: float = 1e-6,
    dual_tol: float = 1e-6,
    max_iters: int = 5000,
    trace=None,
) -> PowerMap:
    """Nonnegative sparse recovery on the vectorized cross-spectral matrix.

    Solves min ||p||_1 subject to p >= 0, ||vec(R) - L p||_2 <= delta; the
    map value at grid point k is p_k directly.

    Args:
        remove_diagonal: drop the (i, i) rows of both vec(R) and the lifted
            matrix, discarding the autospectra that carry the additive noise
            floor.  Off by default.

    Raises:
        InfeasibleNonnegError: when no nonnegative vector satisfies the ball
            constraint; retry with a larger delta.
    """
    if csm.num_channels != lifted.num_sensors:
        raise ValueError(
            f"cross-spectral matrix has {csm.num_channels} channels but the "
            f"lifted matrix expects {lifted.num_sensors}"
        )
    y = vectorize_csm(csm)
    a = lifted.entries
    if remove_diagonal:
        m = lifted.num_sensors
        if m < 2:
            raise ValueError("diagonal removal needs at least 2 sensors")
        keep = np.ones(m * m, dtype=bool)
        keep[np.arange(m) * m + np.arange(m)] = False
        y = y[keep]
        a = a[keep]
    problem = BpdnProblem(a, y, delta, nonneg=True,
                          primal_tol=primal_tol, dual_tol=dual_tol, max_iters=max_iters)
    solution = solve_bpdn(problem, trace=trace)
    if solution.infeasible:
        raise InfeasibleNonnegError(
            f"no nonnegative solution reaches the delta = {delta} ball "
            f"(best residual {solution.residual_norm:.3e}); increase delta"
        )
    return PowerMap(
        solution.x,
        frequency=csm.frequency,
        algorithm="CSB-II",
        delta=float(delta),
        converged=solution.converged,
        iterations=solution.iterations,
        block_count=csm.block_count,
    )


def cb(csm: CrossSpectralMatrix, matrix: SteeringMatrix) -> PowerMap:
    """Conventional beamformer: scan w^H R w with w = g / (g^H g)."""
    if csm.num_channels != matrix.num_sensors:
        raise ValueError(
            f"cross-spectral matrix has {csm.num_channels} channels but the "
            f"steering matrix has {matrix.num_sensors} sensors"
        )
    g = matrix.entries
    quad = np.einsum("ik,il,lk->k", g.conj(), csm.entries, g, optimize=True).real
    col_power = np.sum(np.abs(g) ** 2, axis=0)
    values = np.maximum(quad / col_power**2, 0.0)
    return PowerMap(
        values,
        frequency=matrix.frequency,
        algorithm="CB",
        block_count=csm.block_count,
    )


def save_power_map(pmap: PowerMap, grid: ImagingGrid, path) -> None:
    """Write a map as CSV rows index,x,y,value plus a JSON sidecar."""
    if pmap.num_points != grid.num_points:
        raise ValueError("power map size does not match the grid")
    path = Path(path)
    lines = ["index,x,y,value"]
    for k, (p, v) in enumerate(zip(grid.points, pmap.values)):
        lines.append(f"{k},{p[0]!r},{p[1]!r},{v!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "algorithm": pmap.algorithm,
        "frequency": pmap.frequency,
        "delta": pmap.delta,
        "converged": pmap.converged,
        "iterations": pmap.iterations,
        "averaged_blocks": pmap.averaged_blocks,
        "block_count": pmap.block_count,
    }
    path.with_suffix(".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_power_map_values(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a map CSV; returns (positions (N, 2), values (N,)) in file order."""
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not rows or rows[0] != "index,x,y,value":
        raise ValueError(f"{path}: expected header 'index,x,y,value'")
    xy = []
    values = []
    for row in rows[1:]:
        _, x, y, v = row.split(",")
        xy.append((float(x), float(y)))
        values.append(float(v))
    return np.asarray(xy), np.asarray(values)
