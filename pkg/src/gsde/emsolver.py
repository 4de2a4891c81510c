"""Euler-Maruyama scheme for G-SDEs.

On each step of the ``1/q`` grid the coefficients are frozen at the left
endpoint ``(t_n, Z_n)`` and the state moves by

    g(t_n, Z_n) dt + h(t_n, Z_n) d<W> + w(t_n, Z_n) dW.

States are only recorded at grid points.  Sup-norm statistics are taken over
those points, which can only underestimate the sup over the whole interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gshock import (
    GPath,
    PathBatch,
    ScenarioPolicy,
    TimeGrid,
    generate_paths,
    make_grid,
    nested_indices,
    refine_couple,
)
from .problem import SdeProblem


class SolverFailure(ArithmeticError):
    """A coefficient produced a non-finite value."""

    def __init__(self, step: int, n_failed: int = 1, path_indices=()):
        self.step = step
        self.n_failed = n_failed
        self.path_indices = tuple(int(i) for i in path_indices)
        super().__init__(
            f"non-finite state at step {step} on {n_failed} path(s)"
        )


@dataclass(frozen=True, eq=False)
class EmSolution:
    """Grid values of the scheme.

    ``Z`` has shape ``(n_points, n)`` for a single path or
    ``(n_paths, n_points, n)`` for a batch.  ``frozen`` holds the state each
    step's coefficients were evaluated at, which is the left grid value.
    ``failed_step`` is -1 for finite paths and the first step that produced a
    non-finite state otherwise (batch solves only).
    """

    grid: TimeGrid
    Z: np.ndarray
    q: int
    failed_step: np.ndarray | int = -1

    @property
    def frozen(self) -> np.ndarray:
        return self.Z[..., :-1, :]

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(np.asarray(self.failed_step) >= 0))


def em_step(z, t_left: float, dt: float, dqv, dw, problem: SdeProblem, *, step: int = 0):
    """One step from ``z``; raises ``SolverFailure`` tagged with ``step`` on overflow."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if np.any(np.asarray(dqv) < 0):
        raise ValueError("quadratic-variation increment must be nonnegative")
    out = _advance(z, t_left, dt, dqv, dw, problem)
    bad = ~np.all(np.isfinite(out), axis=-1)
    if np.any(bad):
        raise SolverFailure(step, int(np.count_nonzero(bad)))
    return out


def _advance(z, t_left, dt, dqv, dw, problem):
    # dqv and dw may carry one entry per row of z
    z = np.asarray(z, dtype=np.float64)
    dqv = np.asarray(dqv, dtype=np.float64)
    dw = np.asarray(dw, dtype=np.float64)
    if dqv.ndim:
        dqv = dqv[..., None]
    if dw.ndim:
        dw = dw[..., None]
    with np.errstate(over="ignore", invalid="ignore"):
        return (
            z
            + problem.g(t_left, z) * dt
            + problem.h(t_left, z) * dqv
            + problem.w(t_left, z) * dw
        )


def _check_grid(problem: SdeProblem, q: int, grid: TimeGrid):
    expected = make_grid(problem.t0, problem.T, q)
    if grid != expected:
        raise ValueError(
            f"path grid does not match the q={q} grid on [{problem.t0}, {problem.T}]"
        )


def _solve_arrays(problem: SdeProblem, times: np.ndarray, W: np.ndarray, QV: np.ndarray):
    # W, QV: (P, N+1).  Paths that go non-finite are frozen at NaN and flagged.
    P, npts = W.shape
    Z = np.empty((P, npts, problem.n))
    Z[:, 0, :] = problem.Z0
    dts = np.diff(times)
    dW = np.diff(W, axis=1)
    dQV = np.diff(QV, axis=1)
    failed = np.full(P, -1, dtype=np.int64)
    for k in range(npts - 1):
        z = Z[:, k, :]
        nxt = _advance(z, times[k], dts[k], dQV[:, k], dW[:, k], problem)
        bad = ~np.all(np.isfinite(nxt), axis=1) & (failed < 0)
        if bad.any():
            failed[bad] = k
            nxt[bad] = np.nan
        Z[:, k + 1, :] = nxt
    return Z, failed


def em_solve(problem: SdeProblem, q: int, path: GPath | PathBatch) -> EmSolution:
    """Run the scheme along ``path`` (a single path or a batch).

    A single path raises ``SolverFailure`` on a non-finite state.  A batch
    records the failing step per path instead so the caller can count
    explosions; no path is dropped.
    """
    _check_grid(problem, q, path.grid)
    times = path.grid.times
    if isinstance(path, PathBatch):
        Z, failed = _solve_arrays(problem, times, path.W, path.QV)
        return EmSolution(path.grid, Z, int(q), failed)
    Z, failed = _solve_arrays(problem, times, path.W[None, :], path.QV[None, :])
    if failed[0] >= 0:
        raise SolverFailure(int(failed[0]), 1, [path.path_index])
    return EmSolution(path.grid, Z[0], int(q))


def coupled_solve_batch(
    problem: SdeProblem,
    q_coarse: int,
    q_fine: int,
    seed: int,
    path_indices,
    policy: ScenarioPolicy,
) -> tuple[EmSolution, EmSolution]:
    if q_fine % q_coarse:
        raise ValueError(f"q_fine={q_fine} is not a multiple of q_coarse={q_coarse}")
    fine_grid = make_grid(problem.t0, problem.T, q_fine)
    coarse_grid = make_grid(problem.t0, problem.T, q_coarse)
    fine_path = generate_paths(fine_grid, problem.band, policy, seed, path_indices)
    fine = em_solve(problem, q_fine, fine_path)
    if q_coarse == q_fine:
        return fine, fine
    coarse = em_solve(problem, q_coarse, refine_couple(fine_path, coarse_grid))
    return coarse, fine


def coupled_solve(
    problem: SdeProblem,
    q_coarse: int,
    q_fine: int,
    seed: int,
    path_index: int,
    policy: ScenarioPolicy,
) -> tuple[EmSolution, EmSolution]:
    """Coarse and fine solutions driven by the same fine noise path."""
    coarse, fine = coupled_solve_batch(problem, q_coarse, q_fine, seed, [path_index], policy)
    for sol in (coarse, fine):
        if sol.n_failed:
            raise SolverFailure(int(sol.failed_step[0]), 1, [path_index])
    return (
        EmSolution(coarse.grid, coarse.Z[0], coarse.q),
        EmSolution(fine.grid, fine.Z[0], fine.q),
    )


def sup_square_norm(sol: EmSolution):
    """Largest squared Euclidean norm over the grid (one value per path)."""
    with np.errstate(over="ignore"):
        sq = np.sum(sol.Z * sol.Z, axis=-1)
    out = np.max(sq, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def sup_square_diff(a: EmSolution, b: EmSolution):
    """Largest squared distance between ``a`` and ``b`` over ``a``'s grid."""
    idx = nested_indices(b.grid, a.grid)
    with np.errstate(over="ignore", invalid="ignore"):
        diff = a.Z - b.Z[..., idx, :]
        out = np.max(np.sum(diff * diff, axis=-1), axis=-1)
    return float(out) if np.ndim(out) == 0 else out
