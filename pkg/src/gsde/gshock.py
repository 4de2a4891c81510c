"""G-Brownian motion paths under explicit volatility scenarios.

A G-Brownian motion is simulated scenario by scenario: a scenario policy fixes
an adapted, piecewise-constant volatility inside ``[sigma_lo, sigma_hi]``, and
under that choice the increments are centered Gaussians with variance
``sigma_n**2 * dt_n``.  The sublinear expectation is then estimated as the
largest Monte-Carlo mean over a finite scenario family.

The finite family only reaches part of the uncertainty set, so the estimate is
a lower bound on the true sublinear expectation.  Every "empirical <= upper
bound" comparison made with it therefore remains valid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng

# relative slack used when matching grid points of two resolutions
_GRID_RTOL = 1e-12


@dataclass(frozen=True)
class VolatilityBand:
    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        lo, hi = float(self.sigma_lo), float(self.sigma_hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("volatility band must be finite")
        if not 0.0 <= lo <= hi:
            raise ValueError(f"need 0 <= sigma_lo <= sigma_hi, got [{lo}, {hi}]")
        object.__setattr__(self, "sigma_lo", lo)
        object.__setattr__(self, "sigma_hi", hi)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    t0: float
    T: float
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time grid needs at least two points")
        if not np.all(np.diff(times) > 0):
            raise ValueError("grid times must be strictly increasing")
        if times[0] != self.t0 or times[-1] != self.T:
            raise ValueError("grid must start at t0 and end at T")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.T == other.T
            and np.array_equal(self.times, other.times)
        )

    __hash__ = None

    def index_of(self, t: float) -> int:
        """Index of grid point ``t``; raises if ``t`` is not on the grid."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j < self.times.size and _close(self.times[j], t, self):
                return j
        raise ValueError(f"t={t!r} is not a grid point")


def _scale(t0: float, T: float) -> float:
    return max(abs(t0), abs(T), T - t0)


def _close(a: float, b: float, grid: TimeGrid) -> bool:
    return abs(a - b) <= _GRID_RTOL * _scale(grid.t0, grid.T)


def make_grid(t0: float, T: float, q: int) -> TimeGrid:
    """Uniform ``1/q`` grid on ``[t0, T]``; the last step is capped at ``T``."""
    t0, T = float(t0), float(T)
    if not t0 < T:
        raise ValueError(f"need t0 < T, got t0={t0}, T={T}")
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q!r}")
    q = int(q)
    n_full = math.floor((T - t0) * q)
    times = t0 + np.arange(n_full + 1, dtype=np.float64) / q
    times = times[times < T]
    # a point within rounding of T collapses onto T instead of leaving a sliver step
    if times.size > 1 and T - times[-1] <= _GRID_RTOL * _scale(t0, T):
        times = times[:-1]
    return TimeGrid(t0, T, np.append(times, T))


class ScenarioPolicy(enum.IntEnum):
    """Volatility selection rules.  The integer value is the scenario id."""

    ConstantLo = 0
    ConstantHi = 1
    ConstantMid = 2
    PerStepUniform = 3
    PerStepBangBang = 4

    @classmethod
    def parse(cls, name: str | "ScenarioPolicy") -> "ScenarioPolicy":
        if isinstance(name, cls):
            return name
        try:
            return cls[name]
        except KeyError:
            known = ", ".join(p.name for p in cls)
            raise ValueError(f"unknown scenario {name!r}; known: {known}") from None

    def sigmas(self, band: VolatilityBand, u: np.ndarray) -> np.ndarray:
        """Per-step volatilities from per-step uniforms ``u``."""
        lo, hi = band.sigma_lo, band.sigma_hi
        if self is ScenarioPolicy.ConstantLo:
            return np.full(u.shape, lo)
        if self is ScenarioPolicy.ConstantHi:
            return np.full(u.shape, hi)
        if self is ScenarioPolicy.ConstantMid:
            return np.full(u.shape, min(hi, max(lo, 0.5 * (lo + hi))))
        if self is ScenarioPolicy.PerStepUniform:
            return np.clip(lo + (hi - lo) * u, lo, hi)
        return np.where(u < 0.5, lo, hi)


ALL_POLICIES = tuple(ScenarioPolicy)


@dataclass(frozen=True, eq=False)
class GPath:
    """One sampled trajectory of ``(W, <W>)`` under one scenario."""

    grid: TimeGrid
    scenario_id: int
    sigma: np.ndarray
    W: np.ndarray
    QV: np.ndarray
    path_index: int = 0


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Many paths on a common grid and scenario; arrays are ``(n_paths, ...)``."""

    grid: TimeGrid
    scenario_id: int
    path_indices: np.ndarray
    sigma: np.ndarray
    W: np.ndarray
    QV: np.ndarray

    def __len__(self):
        return self.W.shape[0]

    def path(self, i: int) -> GPath:
        return GPath(
            self.grid,
            self.scenario_id,
            self.sigma[i],
            self.W[i],
            self.QV[i],
            int(self.path_indices[i]),
        )


def generate_paths(
    grid: TimeGrid,
    band: VolatilityBand,
    policy: ScenarioPolicy,
    seed: int,
    path_indices: Sequence[int] | np.ndarray,
) -> PathBatch:
    """Vectorised path generation.

    Row ``i`` depends only on ``(seed, policy, path_indices[i], grid)``, so any
    split of the index set into batches reproduces the same rows bit for bit.
    """
    policy = ScenarioPolicy.parse(policy)
    idx = np.asarray(path_indices, dtype=np.int64).reshape(-1)
    if np.any(idx < 0):
        raise ValueError("path indices must be nonnegative")
    keys = rng.path_keys(seed, int(policy), idx)
    n = grid.n_steps
    dt = grid.dt
    sigma = policy.sigmas(band, rng.uniforms(keys, n, rng.STREAM_POLICY))
    dW = sigma * np.sqrt(dt) * rng.normals(keys, n)
    dQV = sigma * sigma * dt

    zeros = np.zeros((idx.size, 1))
    W = np.concatenate([zeros, np.cumsum(dW, axis=1)], axis=1)
    QV = np.concatenate([zeros, np.cumsum(dQV, axis=1)], axis=1)
    return PathBatch(grid, int(policy), idx, sigma, W, QV)


def generate_path(
    grid: TimeGrid,
    band: VolatilityBand,
    policy: ScenarioPolicy,
    seed: int,
    path_index: int,
) -> GPath:
    return generate_paths(grid, band, policy, seed, [path_index]).path(0)


def nested_indices(fine: TimeGrid, coarse: TimeGrid) -> np.ndarray:
    """Positions of the coarse grid points inside the fine grid."""
    if fine.t0 != coarse.t0 or fine.T != coarse.T:
        raise ValueError("grids cover different intervals")
    pos = np.searchsorted(fine.times, coarse.times)
    out = np.empty(coarse.times.size, dtype=np.int64)
    for k, (i, t) in enumerate(zip(pos, coarse.times)):
        for j in (i - 1, i):
            if 0 <= j < fine.times.size and _close(fine.times[j], t, fine):
                out[k] = j
                break
        else:
            raise ValueError(f"coarse grid point {t!r} is not on the fine grid")
    return out


def refine_couple(fine: GPath | PathBatch, coarse_grid: TimeGrid) -> GPath | PathBatch:
    """Restrict a fine path (or batch) to a nested coarse grid.

    ``W`` and ``<W>`` are read off at the coarse points; the coarse volatility
    is the one that reproduces the quadratic-variation increment over each
    coarse step.
    """
    idx = nested_indices(fine.grid, coarse_grid)
    if np.array_equal(idx, np.arange(fine.grid.times.size)):
        if isinstance(fine, PathBatch):
            return PathBatch(coarse_grid, fine.scenario_id, fine.path_indices,
                             fine.sigma, fine.W, fine.QV)
        return GPath(coarse_grid, fine.scenario_id, fine.sigma, fine.W, fine.QV,
                     fine.path_index)
    W = fine.W[..., idx]
    QV = fine.QV[..., idx]
    sigma = np.sqrt(np.maximum(np.diff(QV, axis=-1), 0.0) / coarse_grid.dt)
    if isinstance(fine, PathBatch):
        return PathBatch(coarse_grid, fine.scenario_id, fine.path_indices, sigma, W, QV)
    return GPath(coarse_grid, fine.scenario_id, sigma, W, QV, fine.path_index)


def ito_sum(integrand_values, path: GPath | PathBatch):
    """Left-endpoint sum ``sum_n f(t_n) * (W(t_{n+1}) - W(t_n))``.

    For a ``PathBatch`` the integrand has the batch's shape and one sum per
    path is returned.
    """
    f = np.asarray(integrand_values, dtype=np.float64)
    if f.shape != path.W.shape:
        raise ValueError(
            f"integrand has shape {f.shape}, path values have shape {path.W.shape}"
        )
    total = np.sum(f[..., :-1] * np.diff(path.W, axis=-1), axis=-1)
    return float(total) if np.ndim(total) == 0 else total


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Mean with a fixed, order-exact reduction, plus its standard error.

    The sum is taken as an exactly rounded ``fsum`` of deviations from the
    first sample, so constant samples give back their constant exactly.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    base = x[0]
    dev = x - base
    mean = float(base + math.fsum(dev) / n)
    if n < 2:
        return mean, math.nan
    var = math.fsum((dev - (mean - base)) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class ScenarioMean:
    scenario_id: int
    mean: float
    stderr: float


@dataclass(frozen=True)
class SublinearEstimate:
    value: float
    per_scenario_means: tuple[ScenarioMean, ...]
    argmax_scenario: int
    n_paths: int

    @property
    def stderr(self) -> float:
        for s in self.per_scenario_means:
            if s.scenario_id == self.argmax_scenario:
                return s.stderr
        return math.nan

    def scenario(self, scenario_id: int) -> ScenarioMean:
        for s in self.per_scenario_means:
            if s.scenario_id == int(scenario_id):
                return s
        raise KeyError(scenario_id)


def max_of_means(per_scenario: Sequence[ScenarioMean], n_paths: int) -> SublinearEstimate:
    if not per_scenario:
        raise ValueError("empty scenario family")
    best = per_scenario[0]
    for s in per_scenario[1:]:
        if s.mean > best.mean:
            best = s
    return SublinearEstimate(best.mean, tuple(per_scenario), best.scenario_id, n_paths)


def sublinear_expect(
    functional: Callable,
    band: VolatilityBand,
    grid: TimeGrid,
    scenario_family: Sequence[ScenarioPolicy | str],
    n_paths: int,
    seed: int,
    *,
    vectorized: bool = False,
) -> SublinearEstimate:
    """Estimate the sublinear expectation of ``functional`` over a scenario family.

    Scenario ``s`` always sees the paths keyed by ``(seed, s, 0..n_paths-1)``,
    so different functionals evaluated with the same seed share samples.  With
    ``vectorized=True`` the functional receives a whole ``PathBatch`` and must
    return one value per path.
    """
    if not scenario_family:
        raise ValueError("empty scenario family")
    if n_paths < 2:
        raise ValueError(f"n_paths must be at least 2, got {n_paths}")
    policies = [ScenarioPolicy.parse(p) for p in scenario_family]
    means = []
    for policy in dict.fromkeys(policies):
        batch = generate_paths(grid, band, policy, seed, np.arange(n_paths))
        if vectorized:
            values = np.asarray(functional(batch), dtype=np.float64)
        else:
            values = np.array([functional(batch.path(i)) for i in range(n_paths)],
                              dtype=np.float64)
        m, se = mean_and_stderr(values)
        means.append(ScenarioMean(int(policy), m, se))
    return max_of_means(means, n_paths)
