"""Error-constrained L1 minimization (basis pursuit denoising).

Solves  min ||x||_1  subject to  ||y - A x||_2 <= delta  for complex x, or
for real nonnegative x, via an alternating-direction splitting:

    min ||z||_1 + indicator(||w||_2 <= delta)
    s.t.  x = z,   A x + w = y

The x-update solves (I + A^H A) x = rhs through a Cholesky factorization
computed once (in the K x K dual form when K < N); the z-update is
soft-thresholding (magnitude shrinkage for complex x, shrink-and-clamp for
nonnegative x); the w-update projects onto the delta-ball.  Both penalty
terms share one rho, so rho adaptation never requires refactorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import nnls

#: Relative slack allowed on the ball constraint at convergence.
FEASIBILITY_SLACK = 1e-6

#: delta = 0 is solved as a tiny-ball problem with this radius relative to ||y||.
ZERO_DELTA_SUBSTITUTE = 1e-10

_RHO_FACTOR = 2.0
_RHO_RATIO = 10.0
_RHO_EVERY = 10
_RHO_MIN = 1e-6
_RHO_MAX = 1e6


@dataclass(frozen=True)
class BpdnProblem:
    """One basis-pursuit-denoising instance.

    Attributes:
        a: K x N matrix (complex or real).
        y: K-vector of observations.
        delta: residual ball radius, >= 0 (same units as y).
        nonneg: restrict the solution to real nonnegative entries.
        primal_tol, dual_tol: ADMM stopping tolerances.
        max_iters: iteration cap; exceeding it returns the best iterate with
            converged=False.
    """

    a: np.ndarray
    y: np.ndarray
    delta: float
    nonneg: bool = False
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    max_iters: int = 5000

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128).reshape(-1)
        if a.ndim != 2:
            raise ValueError("a must be a 2-D matrix")
        if a.shape[0] != y.shape[0]:
            raise ValueError(f"a has {a.shape[0]} rows but y has {y.shape[0]} entries")
        if np.any(np.abs(a).sum(axis=0) == 0.0):
            raise ValueError("a must not contain an all-zero column")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise ValueError("a and y must be finite")
        if not (float(self.delta) >= 0.0):
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class BpdnSolution:
    """Solver output.

    ``residual_norm`` is ||y - A x||_2 recomputed at exit.  ``converged``
    means the ADMM tolerances were met and the ball constraint holds within
    slack; ``infeasible`` flags nonnegative problems whose constraint cannot
    be met by any x >= 0.
    """

    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    objective: float
    infeasible: bool = False


def _shrink_complex(t: np.ndarray, kappa: float) -> np.ndarray:
    mag = np.abs(t)
    return t * np.maximum(1.0 - kappa / np.maximum(mag, 1e-300), 0.0)


def _shrink_nonneg(t: np.ndarray, kappa: float) -> np.ndarray:
    return np.maximum(t - kappa, 0.0)


def _make_solver(a: np.ndarray):
    """Factor (I + A^H A) once; return a solve closure."""
    k, n = a.shape
    ah = a.conj().T
    if k < n:
        gram = a @ ah
        gram[np.diag_indices(k)] += 1.0
        cho = sla.cho_factor(gram, lower=True)

        def solve(b):
            return b - ah @ sla.cho_solve(cho, a @ b)
    else:
        gram = ah @ a
        gram[np.diag_indices(n)] += 1.0
        cho = sla.cho_factor(gram, lower=True)

        def solve(b):
            return sla.cho_solve(cho, b)

    return solve


def _admm(a, y, delta, shrink, primal_tol, dual_tol, max_iters, trace_rows):
    """Core iteration; returns (x, iterations, tolerances_met)."""
    k, n = a.shape
    ah = a.conj().T
    solve = _make_solver(a)
    ynorm = float(np.linalg.norm(y))

    x = np.zeros(n, dtype=a.dtype)
    z = np.zeros(n, dtype=a.dtype)
    w = np.zeros(k, dtype=a.dtype)
    u = np.zeros(n, dtype=a.dtype)
    v = np.zeros(k, dtype=a.dtype)
    rho = 1.0
    x_avg = np.zeros(n, dtype=a.dtype)

    dim_pri = math.sqrt(n + k)
    dim_dual = math.sqrt(n)

    for it in range(1, max_iters + 1):
        x = solve((z - u) + ah @ (y - w + v))
        ax = a @ x

        z_old = z
        w_old = w
        z = shrink(x + u, 1.0 / rho)
        s = y - ax + v
        snorm = np.linalg.norm(s)
        w = s if snorm <= delta else s * (delta / snorm)

        u = u + (x - z)
        v = v + (y - ax - w)

        r_pri = math.hypot(np.linalg.norm(x - z), np.linalg.norm(y - ax - w))
        s_dual = rho * np.linalg.norm(ah @ (w - w_old) - (z - z_old))

        scale_pri = max(
            math.hypot(np.linalg.norm(x), np.linalg.norm(ax)),
            math.hypot(np.linalg.norm(z), np.linalg.norm(w)),
            ynorm,
        )
        scale_dual = rho * np.linalg.norm(u + ah @ v)
        eps_pri = primal_tol * dim_pri + primal_tol * scale_pri
        eps_dual = dual_tol * dim_dual + dual_tol * scale_dual

        if trace_rows is not None:
            x_avg = x_avg + (x - x_avg) / it
            trace_rows.append((it, float(np.abs(x_avg).sum()), float(r_pri), float(s_dual)))

        if r_pri <= eps_pri and s_dual <= eps_dual:
            return z, it, True

        # Residual balancing every few iterations; per-iteration adaptation
        # limit-cycles on coherent dictionaries.
        if it % _RHO_EVERY == 0:
            if r_pri > _RHO_RATIO * s_dual and rho < _RHO_MAX:
                rho *= _RHO_FACTOR
                u = u / _RHO_FACTOR
                v = v / _RHO_FACTOR
            elif s_dual > _RHO_RATIO * r_pri and rho > _RHO_MIN:
                rho /= _RHO_FACTOR
                u = u * _RHO_FACTOR
                v = v * _RHO_FACTOR

    return z, max_iters, False


def solve_bpdn(problem: BpdnProblem, trace=None) -> BpdnSolution:
    """Solve a BPDN instance.

    Deterministic: a cold start at x = 0 and a fixed update order make the
    result a pure function of the problem.  delta = 0 is handled by a
    least-squares feasibility check followed by an internal tiny-ball solve.

    Args:
        problem: the instance to solve.
        trace: optional file-like or path; when given, a CSV of
            ``iter,objective,primal_res,dual_res`` is written (objective is
            the L1 norm of the running-average iterate).

    Returns:
        BpdnSolution; ``converged`` is False when max_iters ran out or the
        returned point misses the ball by more than the feasibility slack.
    """
    a, y, delta = problem.a, problem.y, problem.delta
    k, n = a.shape
    ynorm = float(np.linalg.norm(y))
    # The ball can only be met to the accuracy the stopping rule delivers.
    feas_abs = problem.primal_tol * (math.sqrt(n + k) + 1.0) * max(1.0, ynorm)

    def finish(x, iterations, tol_met, infeasible=False):
        x = np.asarray(x)
        if problem.nonneg:
            x = np.maximum(x.real, 0.0)
        residual = float(np.linalg.norm(y - a @ x))
        feasible = residual <= delta * (1.0 + FEASIBILITY_SLACK) + feas_abs
        return BpdnSolution(
            x=x,
            residual_norm=residual,
            iterations=iterations,
            converged=bool(tol_met and feasible and not infeasible),
            objective=float(np.abs(x).sum()),
            infeasible=bool(infeasible),
        )

    if ynorm == 0.0 or delta >= ynorm:
        # x = 0 is feasible and has minimal L1 norm.
        zero = np.zeros(n, dtype=np.float64 if problem.nonneg else np.complex128)
        return finish(zero, 0, True)

    # Normalize the observation to unit norm and the matrix to unit mean
    # column norm.  Both are uniform scalings, so the minimizer is preserved
    # exactly, while iterate magnitudes and rho start out well matched.
    y_scale = ynorm
    col_scale = float(np.mean(np.linalg.norm(a, axis=0)))
    y_s = y / y_scale
    a_s = a / col_scale
    delta_s = delta / y_scale if delta > 0.0 else ZERO_DELTA_SUBSTITUTE
    x_unscale = y_scale / col_scale

    if problem.nonneg:
        a_work = np.vstack([a_s.real, a_s.imag])
        y_work = np.concatenate([y_s.real, y_s.imag])
        shrink = _shrink_nonneg
    else:
        a_work = a_s
        y_work = y_s
        shrink = _shrink_complex

    trace_rows = [] if trace is not None else None
    x_s, iterations, tol_met = _admm(
        a_work, y_work, delta_s, shrink,
        problem.primal_tol, problem.dual_tol, problem.max_iters, trace_rows,
    )

    if trace is not None:
        _write_trace(trace, trace_rows)

    infeasible = False
    if problem.nonneg and not tol_met:
        residual = float(np.linalg.norm(y - a @ np.maximum(x_s.real, 0.0) * x_unscale))
        if residual > delta * (1.0 + FEASIBILITY_SLACK) + feas_abs:
            infeasible = _nonneg_infeasible(a, y, delta, feas_abs)

    return finish(x_s * x_unscale, iterations, tol_met, infeasible=infeasible)


def _nonneg_infeasible(a, y, delta, feas_abs) -> bool:
    """True when even the nonnegative least-squares point misses the ball."""
    a_r = np.vstack([a.real, a.imag])
    y_r = np.concatenate([y.real, y.imag])
    x_nnls, _ = nnls(a_r, y_r)
    best = float(np.linalg.norm(y - a @ x_nnls))
    return best > delta * (1.0 + FEASIBILITY_SLACK) + feas_abs


def _write_trace(trace, rows) -> None:
    lines = ["iter,objective,primal_res,dual_res"]
    lines += [f"{it},{obj!r},{rp!r},{rd!r}" for it, obj, rp, rd in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(trace, "write"):
        trace.write(text)
    else:
        with open(trace, "w", encoding="utf-8") as fh:
            fh.write(text)


def delta_zero_feasibility(a, y) -> bool:
    """True iff y lies in the column space of a (least-squares residual test)."""
    a = np.asarray(a, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    ynorm = np.linalg.norm(y)
    if ynorm == 0.0:
        return True
    x_ls, *_ = np.linalg.lstsq(a, y, rcond=None)
    residual = np.linalg.norm(y - a @ x_ls)
    return bool(residual <= 1e-9 * ynorm)


def min_measurements(sparsity: int, n: int, c_k: float) -> int:
    """Advisory lower bound on the measurement count: ceil(c_k*s*ln(n/s))."""
    sparsity = int(sparsity)
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    if not (sparsity < n):
        raise ValueError(f"sparsity {sparsity} must be smaller than n = {n}")
    if c_k <= 0:
        raise ValueError("c_k must be positive")
    value = c_k * sparsity * math.log(n / sparsity)
    return max(1, math.ceil(value - 1e-12))
