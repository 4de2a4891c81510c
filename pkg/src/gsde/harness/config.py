"""JSON experiment configuration.

Example::

    {
      "problem": {"name": "gbm-like", "c": 0.2, "Z0": 1.0, "T": 1.0},
      "band": {"lo": 0.5, "hi": 1.0},
      "scenarios": ["ConstantLo", "ConstantHi", "PerStepBangBang"],
      "q_list": [4, 8, 16, 32, 64],
      "q_ref": 1024,
      "n_paths": 10000,
      "seed": 7,
      "out": {"csv": "converge.csv", "json": "converge.json"}
    }

``problem`` takes a builtin name, that builtin's parameters, and optionally
``Z0``, ``t0``, ``T``, ``z0_second_moment`` and declared ``C``, ``D``, ``M``.
``q`` is the resolution for the moment, increment and path experiments;
``q_list`` and ``q_ref`` drive the convergence study.  ``pairs`` (a list of
``[r, t]``) or ``n_pairs`` choose the increment-experiment time pairs.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..gshock import ALL_POLICIES, ScenarioPolicy, VolatilityBand
from ..problem import BUILTINS, COMMON_KEYS, SdeProblem, builtin


class ConfigError(ValueError):
    pass


TOP_KEYS = {
    "problem", "band", "scenarios", "q", "q_list", "q_ref", "n_paths", "seed",
    "out", "pairs", "n_pairs",
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    problem: SdeProblem
    problem_spec: dict
    scenarios: tuple[ScenarioPolicy, ...] = ALL_POLICIES
    q: int | None = None
    q_list: tuple[int, ...] = ()
    q_ref: int | None = None
    n_paths: int = 1000
    seed: int = 0
    pairs: tuple[tuple[float, float], ...] | None = None
    n_pairs: int = 10
    out_csv: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        if self.n_paths < 2:
            raise ConfigError(f"n_paths must be at least 2, got {self.n_paths}")
        if not self.scenarios:
            raise ConfigError("scenario family is empty")
        for q in ([self.q] if self.q is not None else []) + list(self.q_list):
            if q < 1:
                raise ConfigError(f"resolutions must be positive, got {q}")
        if self.q_ref is not None:
            if self.q_ref < 1:
                raise ConfigError(f"q_ref must be positive, got {self.q_ref}")
            bad = [q for q in self.q_list if self.q_ref % q]
            if bad:
                raise ConfigError(f"q_ref={self.q_ref} is not a multiple of {bad}")

    @property
    def band(self) -> VolatilityBand:
        return self.problem.band

    def describe(self) -> dict:
        """Plain-data echo of the configuration for reports."""
        return {
            "problem": self.problem_spec,
            "band": {"lo": self.band.sigma_lo, "hi": self.band.sigma_hi},
            "scenarios": [p.name for p in self.scenarios],
            "q": self.q,
            "q_list": list(self.q_list),
            "q_ref": self.q_ref,
            "n_paths": self.n_paths,
            "seed": self.seed,
        }


def _int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return int(value)


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _problem(spec, band: VolatilityBand) -> tuple[SdeProblem, dict]:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("problem must be an object with a 'name'")
    name = spec["name"]
    if name not in BUILTINS:
        raise ConfigError(f"unknown problem {name!r}; known: {', '.join(BUILTINS)}")
    allowed = {"name", *COMMON_KEYS, *BUILTINS[name][0]}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in problem: {sorted(unknown)}")
    kwargs = {}
    for k, v in spec.items():
        if k == "name":
            continue
        if k == "Z0":
            vals = v if isinstance(v, list) else [v]
            if not vals:
                raise ConfigError("Z0 must not be empty")
            kwargs[k] = [_number(x, "Z0") for x in vals]
        else:
            kwargs[k] = _number(v, f"problem.{k}")
    try:
        p = builtin(name, band=band, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    echo = {"name": name, **p.params, "Z0": p.Z0.tolist(), "t0": p.t0, "T": p.T,
            "C": p.C, "D": p.D, "M": p.M, "z0_second_moment": p.z0_second_moment}
    return p, echo


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "problem" not in doc:
        raise ConfigError("config needs a 'problem'")

    band_spec = doc.get("band", {"lo": 0.5, "hi": 1.0})
    if not isinstance(band_spec, dict) or set(band_spec) - {"lo", "hi"}:
        raise ConfigError("band must be an object with keys 'lo' and 'hi'")
    try:
        band = VolatilityBand(
            _number(band_spec.get("lo", 0.5), "band.lo"),
            _number(band_spec.get("hi", 1.0), "band.hi"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    problem, echo = _problem(doc["problem"], band)

    scen = doc.get("scenarios", [p.name for p in ALL_POLICIES])
    if not isinstance(scen, list):
        raise ConfigError("scenarios must be a list of names")
    try:
        scenarios = tuple(dict.fromkeys(ScenarioPolicy.parse(s) for s in scen))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    q_list = doc.get("q_list", [])
    if not isinstance(q_list, list):
        raise ConfigError("q_list must be a list")
    pairs = doc.get("pairs")
    if pairs is not None:
        if not isinstance(pairs, list) or not all(
            isinstance(p, list) and len(p) == 2 for p in pairs
        ):
            raise ConfigError("pairs must be a list of [r, t] pairs")
        pairs = tuple((_number(r, "pairs"), _number(t, "pairs")) for r, t in pairs)

    out = doc.get("out", {})
    if not isinstance(out, dict) or set(out) - {"csv", "json"}:
        raise ConfigError("out must be an object with keys 'csv' and/or 'json'")

    return ExperimentConfig(
        problem=problem,
        problem_spec=echo,
        scenarios=scenarios,
        q=_int(doc["q"], "q") if "q" in doc else None,
        q_list=tuple(_int(q, "q_list") for q in q_list),
        q_ref=_int(doc["q_ref"], "q_ref") if "q_ref" in doc else None,
        n_paths=_int(doc.get("n_paths", 1000), "n_paths"),
        seed=_int(doc.get("seed", 0), "seed"),
        pairs=pairs,
        n_pairs=_int(doc.get("n_pairs", 10), "n_pairs"),
        out_csv=out.get("csv"),
        out_json=out.get("json"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc)
