"""G-SDE problem instances and sampled checks of the standing assumptions.

A problem is

    dZ = g(t, Z) dt + h(t, Z) d<W> + w(t, Z) dW,   Z(t0) = Z0,  t in [t0, T]

together with the constants the error analysis runs on: ``C`` and ``D`` from
the linear majorant ``C + D r`` of the Lipschitz modulus, and ``M`` bounding
the squared coefficient sizes at the origin.

Coefficient functions take ``(t, z)`` with ``z`` of shape ``(..., n)`` and
return an array of the same shape.  They must broadcast over leading axes
because the solver advances many paths at once, and they must be pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gshock import VolatilityBand

Coefficient = Callable[[float, np.ndarray], np.ndarray]

DEFAULT_BAND = VolatilityBand(0.5, 1.0)


def _zero(t, z):
    return np.zeros_like(z, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SdeProblem:
    g: Coefficient
    h: Coefficient
    w: Coefficient
    Z0: np.ndarray
    t0: float = 0.0
    T: float = 1.0
    C: float = 0.0
    D: float = 0.0
    M: float = 0.0
    band: VolatilityBand = DEFAULT_BAND
    z0_second_moment: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        z0 = np.atleast_1d(np.asarray(self.Z0, dtype=np.float64)).copy()
        if z0.ndim != 1:
            raise ValueError("Z0 must be a vector")
        if not np.all(np.isfinite(z0)):
            raise ValueError("Z0 must be finite")
        z0.setflags(write=False)
        object.__setattr__(self, "Z0", z0)
        if not float(self.t0) < float(self.T):
            raise ValueError(f"need t0 < T, got t0={self.t0}, T={self.T}")
        for name in ("C", "D", "M"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        if self.z0_second_moment is None:
            object.__setattr__(self, "z0_second_moment", float(z0 @ z0))
        elif not float(self.z0_second_moment) >= 0:
            raise ValueError("z0_second_moment must be nonnegative")
        else:
            object.__setattr__(self, "z0_second_moment", float(self.z0_second_moment))

    @property
    def n(self) -> int:
        return self.Z0.size


@dataclass(frozen=True)
class ValidationReport:
    """Worst sampled violations of the Lipschitz-modulus and growth conditions.

    Sampling can only ever find counterexamples; ``pass_`` means none was
    found among ``samples_used`` draws, not that the conditions hold.
    """

    lipschitz_worst_ratio: float
    growth_worst: float
    pass_: bool
    samples_used: int
    tolerance: float


def _sq(x: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(x, dtype=np.float64) ** 2, axis=-1)


def _ball(gen: np.random.Generator, n_samples: int, dim: int, radius: float) -> np.ndarray:
    direction = gen.standard_normal((n_samples, dim))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * gen.random((n_samples, 1)) ** (1.0 / dim)
    return direction / norms * r


def validate(
    problem: SdeProblem,
    n_samples: int = 1000,
    sample_radius: float = 1.0,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> ValidationReport:
    """Probe conditions on ``n_samples`` random times and state pairs."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not sample_radius > 0:
        raise ValueError("sample_radius must be positive")
    gen = np.random.default_rng(seed)
    dim = problem.n
    ts = problem.t0 + (problem.T - problem.t0) * gen.random(n_samples)
    us = _ball(gen, n_samples, dim, sample_radius)
    vs = _ball(gen, n_samples, dim, sample_radius)
    origin = np.zeros(dim)

    worst_ratio = 0.0
    worst_growth = 0.0
    for t, u, v in zip(ts, us, vs):
        lhs = sum(float(_sq(f(t, u) - f(t, v))) for f in (problem.g, problem.h, problem.w))
        rhs = problem.C + problem.D * float(_sq(u - v))
        if rhs > 0:
            ratio = lhs / rhs
        else:
            ratio = 0.0 if lhs == 0 else math.inf
        worst_ratio = max(worst_ratio, ratio)
        growth = sum(float(_sq(f(t, origin))) for f in (problem.g, problem.h, problem.w))
        worst_growth = max(worst_growth, growth)

    ok = worst_ratio <= 1 + tolerance and worst_growth <= problem.M + tolerance
    return ValidationReport(worst_ratio, worst_growth, ok, n_samples, tolerance)


def _const(a: float) -> Coefficient:
    def f(t, z):
        return np.full_like(z, a, dtype=np.float64)
    return f


def _linear(a: float) -> Coefficient:
    def f(t, z):
        return a * z
    return f


def _quadratic(a: float) -> Coefficient:
    def f(t, z):
        return a * z * z
    return f


# builtin name -> (parameter defaults, factory returning (g, h, w, C, D, M))
def _zero_problem(p):
    return _zero, _zero, _zero, 0.0, 0.0, 0.0


def _pure_drift(p):
    a = p["a"]
    return _const(a), _zero, _zero, 0.0, 0.0, p["dim"] * a * a


def _linear_lipschitz(p):
    a, b, c = p["a"], p["b"], p["c"]
    return _linear(a), _linear(b), _linear(c), 0.0, 3.0 * max(a * a, b * b, c * c), 0.0


def _gbm_like(p):
    c = p["c"]
    return _zero, _zero, _linear(c), 0.0, 3.0 * c * c, 0.0


def _quadratic_drift(p):
    # deliberately outside the theory: the declared constants are wrong for |z| > 1/2
    return _quadratic(p["a"]), _zero, _zero, 0.0, 1.0, 0.0


BUILTINS = {
    "zero": ({}, _zero_problem),
    "pure-drift": ({"a": 1.0}, _pure_drift),
    "linear-lipschitz": ({"a": 0.1, "b": 0.1, "c": 0.1}, _linear_lipschitz),
    "gbm-like": ({"c": 0.2}, _gbm_like),
    "quadratic-drift": ({"a": 1.0}, _quadratic_drift),
}

COMMON_KEYS = ("Z0", "t0", "T", "C", "D", "M", "z0_second_moment")


def builtin(
    name: str,
    *,
    Z0=1.0,
    t0: float = 0.0,
    T: float = 1.0,
    band: VolatilityBand = DEFAULT_BAND,
    C: float | None = None,
    D: float | None = None,
    M: float | None = None,
    z0_second_moment: float | None = None,
    **params,
) -> SdeProblem:
    """Catalogue problem ``name`` with its exact constants.

    ``C``, ``D`` and ``M`` default to the values that are exact for the chosen
    coefficients; passing them declares different constants instead.  The
    coefficients act componentwise, so a vector ``Z0`` gives a decoupled
    system of the same equation.
    """
    try:
        defaults, factory = BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown builtin problem {name!r}; known: {', '.join(BUILTINS)}"
        ) from None
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameters for {name!r}: {sorted(unknown)}")
    p = {k: float(params.get(k, v)) for k, v in defaults.items()}
    g, h, w, C0, D0, M0 = factory({**p, "dim": np.atleast_1d(Z0).size})
    return SdeProblem(
        g, h, w, Z0, t0=t0, T=T,
        C=C0 if C is None else C,
        D=D0 if D is None else D,
        M=M0 if M is None else M,
        band=band,
        z0_second_moment=z0_second_moment,
        name=name,
        params=p,
    )
