"""Closed-form moment, increment and error constants of the EM scheme.

With ``m0 = E|Z0|^2`` and the problem constants ``C, D, M``:

    G1 = 4 m0 + 16 T (T + 2) (M + C)
    G2 = 16 D (T + 2)
    K  = G1 exp(G2 T)                      moment bound
    H1 = 12 (T + 2) (M + C + K D)          increment bound, per unit time
    B(q) = 6 T (T + 2) (C + 2 D H1 / q) exp(12 (T + 2) D (T - t0))

The BDG-type constants are taken equal to one.  Nothing here is tightened.

``exp(G2 T)`` overflows double precision quickly, so every quantity is also
carried as a natural logarithm.  Values past ``LOOSE_THRESHOLD`` are flagged
as astronomically loose; values past the float range come back as ``inf``
with a finite log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import SdeProblem

LOOSE_THRESHOLD = 1e300
_LOG_LOOSE = math.log(LOOSE_THRESHOLD)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _exp(log_x: float) -> float:
    if log_x == -math.inf:
        return 0.0
    try:
        return math.exp(log_x)
    except OverflowError:
        return math.inf


def _logaddexp(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


@dataclass(frozen=True)
class BoundSet:
    G1: float
    G2: float
    K: float
    H1: float
    log_K: float
    log_H1: float

    @property
    def loose(self) -> bool:
        return self.log_K > _LOG_LOOSE or self.log_H1 > _LOG_LOOSE


def moment_constants(problem: SdeProblem) -> tuple[float, float, float]:
    """``(G1, G2, K)`` of the moment bound ``E sup |Z^q|^2 <= K``."""
    G1, G2, log_K = _moment(problem)
    return G1, G2, _K(G1, G2, problem.T, log_K)


def _K(G1, G2, T, log_K):
    try:
        return G1 * math.exp(G2 * T)
    except OverflowError:
        return _exp(log_K)


def _moment(p: SdeProblem):
    T = p.T
    G1 = 4.0 * p.z0_second_moment + 16.0 * T * (T + 2.0) * (p.M + p.C)
    G2 = 16.0 * p.D * (T + 2.0)
    log_K = _log(G1) + G2 * T
    return G1, G2, log_K


def _log_H1(p: SdeProblem, log_K: float) -> float:
    log_pref = math.log(12.0 * (p.T + 2.0))
    return log_pref + _logaddexp(_log(p.M + p.C), log_K + _log(p.D))


def increment_constant(problem: SdeProblem, K: float) -> float:
    """Increment constant: ``E|Z^q(t) - Z^q(r)|^2 <= H1 (t - r)``."""
    if not K >= 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    p = problem
    if math.isinf(K):
        return math.inf if p.D > 0 else 12.0 * (p.T + 2.0) * (p.M + p.C)
    return 12.0 * (p.T + 2.0) * (p.M + p.C + K * p.D)


def bound_set(problem: SdeProblem) -> BoundSet:
    G1, G2, log_K = _moment(problem)
    K = _K(G1, G2, problem.T, log_K)
    log_H1 = _log_H1(problem, log_K)
    H1 = increment_constant(problem, K) if math.isfinite(K) else _exp(log_H1)
    return BoundSet(G1, G2, K, H1, log_K, log_H1)


def log_strong_error_bound(problem: SdeProblem, q: int) -> float:
    """Natural log of the strong-error bound at ``t = T``."""
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    p = problem
    _, _, log_K = _moment(p)
    log_H1 = _log_H1(p, log_K)
    inner = _logaddexp(_log(p.C), math.log(2.0 / q) + _log(p.D) + log_H1)
    return (
        math.log(6.0 * p.T * (p.T + 2.0)) if p.T > 0 else -math.inf
    ) + inner + 12.0 * (p.T + 2.0) * p.D * (p.T - p.t0)


def strong_error_bound(problem: SdeProblem, q: int) -> float:
    """``6T(T+2)(C + 2 D H1 / q) exp(12 (T+2) D (T - t0))``."""
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    p = problem
    b = bound_set(p)
    if math.isfinite(b.H1):
        val = (
            6.0 * p.T * (p.T + 2.0)
            * (p.C + 2.0 * p.D * b.H1 / q)
            * _exp(12.0 * (p.T + 2.0) * p.D * (p.T - p.t0))
        )
        if math.isfinite(val):
            return val
    return _exp(log_strong_error_bound(p, q))


def strong_error_limit(problem: SdeProblem) -> float:
    """The ``q -> infinity`` value of the bound; nonzero whenever ``C > 0``."""
    p = problem
    return 6.0 * p.T * (p.T + 2.0) * p.C * _exp(12.0 * (p.T + 2.0) * p.D * (p.T - p.t0))


def bound_table(problem: SdeProblem, q_list) -> list[tuple[int, float]]:
    q_list = list(q_list)
    if not q_list:
        raise ValueError("empty q list")
    return [(int(q), strong_error_bound(problem, int(q))) for q in q_list]
