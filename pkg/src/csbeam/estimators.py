"""Scikit-learn style wrappers around the functional core.

Each estimator follows the sklearn contract: constructor arguments are
stored verbatim, all validation and computation happen in ``fit``, fitted
results live in trailing-underscore attributes, and ``get_params`` /
``set_params`` come from :class:`sklearn.base.BaseEstimator` so the classes
compose with pipelines, cloning, and grid search.

``fit`` takes frequency-domain snapshots shaped (n_blocks, n_sensors) —
either a plain complex array or a :class:`~csbeam.simulate.SnapshotSet`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .beamform import DeltaPolicy, cb, csb1, csb1_multi, csb2, resolve_delta_csb1, \
    resolve_delta_csb2
from .simulate import SnapshotSet, csm_from_blocks
from .solver import BpdnProblem, solve_bpdn
from .validation import check_snapshot_blocks
from .waves import DEFAULT_SPEED, lift_steering_matrix, steering_matrix


def _as_blocks(X, n_sensors: int) -> np.ndarray:
    if isinstance(X, SnapshotSet):
        X = X.blocks
    return check_snapshot_blocks(X, n_sensors)


class _GridBeamformer(BaseEstimator):
    """Shared plumbing: steering model construction and fit bookkeeping."""

    def __init__(self, geometry, grid, frequency, speed=DEFAULT_SPEED):
        self.geometry = geometry
        self.grid = grid
        self.frequency = frequency
        self.speed = speed

    def _steering(self):
        return steering_matrix(self.geometry, self.grid, self.frequency, self.speed)

    def _check_fitted(self):
        if not hasattr(self, "map_"):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet; call 'fit' first."
            )

    @property
    def power_(self) -> np.ndarray:
        self._check_fitted()
        return self.map_.values


class ConventionalBeamformer(_GridBeamformer):
    """Grid scan of w^H R w with the self-normalized steering weight.

    Attributes after fit:
        map_: the resulting :class:`~csbeam.beamform.PowerMap`.
        csm_: the estimated cross-spectral matrix.
    """

    def fit(self, X, y=None):
        blocks = _as_blocks(X, self.geometry.num_sensors)
        self.csm_ = csm_from_blocks(blocks, float(self.frequency))
        self.map_ = cb(self.csm_, self._steering())
        return self


class CompressiveBeamformerI(_GridBeamformer):
    """Snapshot-domain sparse recovery (complex L1 with a residual ball).

    Args:
        delta: ball radius, or a :class:`~csbeam.beamform.DeltaPolicy`.
        average_blocks: solve every block and average the power maps instead
            of using only the first block.
        max_iter, primal_tol, dual_tol: solver controls.
    """

    def __init__(self, geometry, grid, frequency, speed=DEFAULT_SPEED, delta=0.0,
                 average_blocks=False, max_iter=5000, primal_tol=1e-6, dual_tol=1e-6):
        super().__init__(geometry, grid, frequency, speed)
        self.delta = delta
        self.average_blocks = average_blocks
        self.max_iter = max_iter
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol

    def fit(self, X, y=None):
        blocks = _as_blocks(X, self.geometry.num_sensors)
        delta = self.delta
        if isinstance(delta, DeltaPolicy):
            delta = resolve_delta_csb1(delta, self.geometry.num_sensors)
        matrix = self._steering()
        opts = dict(primal_tol=self.primal_tol, dual_tol=self.dual_tol,
                    max_iters=self.max_iter)
        if self.average_blocks and blocks.shape[0] > 1:
            self.map_ = csb1_multi(blocks, matrix, delta, **opts)
        else:
            self.map_ = csb1(blocks[0], matrix, delta, **opts)
        return self


class CompressiveBeamformerII(_GridBeamformer):
    """Covariance-domain nonnegative sparse recovery via the lifted model.

    Args:
        delta: ball radius, or a :class:`~csbeam.beamform.DeltaPolicy` whose
            block count is taken from the number of fitted blocks.
        remove_diagonal: drop autospectrum rows before solving.
    """

    def __init__(self, geometry, grid, frequency, speed=DEFAULT_SPEED, delta=0.0,
                 remove_diagonal=False, max_iter=5000, primal_tol=1e-6, dual_tol=1e-6):
        super().__init__(geometry, grid, frequency, speed)
        self.delta = delta
        self.remove_diagonal = remove_diagonal
        self.max_iter = max_iter
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol

    def fit(self, X, y=None):
        blocks = _as_blocks(X, self.geometry.num_sensors)
        self.csm_ = csm_from_blocks(blocks, float(self.frequency))
        delta = self.delta
        if isinstance(delta, DeltaPolicy):
            policy = DeltaPolicy(mode=delta.mode, explicit_value=delta.explicit_value,
                                 noise_power=delta.noise_power, safety=delta.safety,
                                 block_count=blocks.shape[0])
            delta = resolve_delta_csb2(policy, self.geometry.num_sensors)
        matrix = self._steering()
        self.map_ = csb2(self.csm_, lift_steering_matrix(matrix), delta,
                         remove_diagonal=self.remove_diagonal,
                         primal_tol=self.primal_tol, dual_tol=self.dual_tol,
                         max_iters=self.max_iter)
        return self


class BasisPursuitDenoising(BaseEstimator):
    """Sparse coding in the sklearn linear-model idiom.

    ``fit(X, y)`` treats X as the (n_measurements, n_atoms) dictionary and y
    as the observation, and finds the minimum-L1 coefficient vector whose
    residual lies inside the delta ball.

    Attributes after fit:
        coef_: the coefficient vector.
        n_iter_: solver iterations.
        converged_: whether tolerances and feasibility were reached.
        residual_norm_: ||y - X coef_||_2.
    """

    def __init__(self, delta=0.0, nonneg=False, max_iter=5000,
                 primal_tol=1e-6, dual_tol=1e-6):
        self.delta = delta
        self.nonneg = nonneg
        self.max_iter = max_iter
        self.primal_tol = primal_tol
        self.dual_tol = dual_tol

    def fit(self, X, y):
        problem = BpdnProblem(np.asarray(X), np.asarray(y), float(self.delta),
                              nonneg=self.nonneg, primal_tol=self.primal_tol,
                              dual_tol=self.dual_tol, max_iters=self.max_iter)
        solution = solve_bpdn(problem)
        self.coef_ = solution.x
        self.n_iter_ = solution.iterations
        self.converged_ = solution.converged
        self.residual_norm_ = solution.residual_norm
        return self

    def predict(self, X):
        """Reconstruct observations for a dictionary X: X @ coef_."""
        if not hasattr(self, "coef_"):
            raise NotFittedError(
                "This BasisPursuitDenoising instance is not fitted yet; call 'fit' first."
            )
        return np.asarray(X) @ self.coef_
