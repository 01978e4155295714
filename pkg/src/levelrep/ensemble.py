"""Experiment description and deterministic sampling of the parametric ensemble.

Every member of an ensemble is a copy of the model system with its own value
of the shape parameter (aspect parameter ``alpha`` for the rectangle, potential
strength ``beta`` for the modified Kepler problem).  Member ``i`` draws its
parameter from a Philox stream keyed by the run seed and positioned by ``i``,
so any slice of the ensemble can be generated independently of the rest.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import ConfigurationError, check_int, check_positive

SYSTEMS = ("rect", "kepler")
WIDTH_KINDS = ("std", "hwhm")
ASPECT_CONVENTIONS = ("period", "side")

#: Rejection draws allowed per member before the cuts are declared pathological.
MAX_REJECTIONS = 1000

_HWHM_PER_STD = math.sqrt(2.0 * math.log(2.0))
_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class ParamLaw:
    """Normal law rejection-truncated to ``[lower_cut, upper_cut]``.

    ``spread`` is the standard deviation when ``width_kind == "std"`` and the
    half-width at half-maximum when ``width_kind == "hwhm"``.
    """

    mean: float
    spread: float
    lower_cut: float
    upper_cut: float
    width_kind: str = "std"

    def __post_init__(self):
        for name in ("mean", "lower_cut", "upper_cut"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v!r}")
        check_positive(self.spread, "spread", strict=False, error=ConfigurationError)
        if not self.lower_cut < self.mean < self.upper_cut:
            raise ConfigurationError(
                f"need lower_cut < mean < upper_cut, got "
                f"{self.lower_cut} < {self.mean} < {self.upper_cut}"
            )
        if self.width_kind not in WIDTH_KINDS:
            raise ConfigurationError(f"width_kind must be one of {WIDTH_KINDS}")

    @property
    def sigma(self) -> float:
        """Standard deviation of the untruncated normal law."""
        if self.width_kind == "hwhm":
            return self.spread / _HWHM_PER_STD
        return self.spread


def default_law(system: str) -> ParamLaw:
    if system == "rect":
        return ParamLaw(mean=1.0, spread=0.2, lower_cut=0.5, upper_cut=2.0)
    if system == "kepler":
        return ParamLaw(mean=5.0, spread=0.5, lower_cut=3.0, upper_cut=8.0)
    raise ConfigurationError(f"unknown system {system!r}; expected one of {SYSTEMS}")


@dataclass(frozen=True)
class EnsembleConfig:
    """Full description of one numerical experiment.

    Energies are in units of the mean level spacing.  ``aspect`` only matters
    for the rectangle: with ``"period"`` the sampled value is the aspect
    parameter that enters the orbit periods as ``alpha**0.5`` (side ratio
    ``sqrt(alpha)``); with ``"side"`` the sampled value is the side ratio
    itself and ``alpha`` is its square.
    """

    system: str = "rect"
    energy: float = 1.0e4
    window_width: float = 100.0
    member_count: int = 300_000
    seed: int = 0
    param_law: ParamLaw | None = None
    aspect: str = "period"

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigurationError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        check_positive(self.energy, "energy", error=ConfigurationError)
        check_positive(self.window_width, "window_width", error=ConfigurationError)
        if self.window_width > self.energy / 10:
            raise ConfigurationError(
                f"window_width={self.window_width} exceeds energy/10={self.energy / 10}; "
                "statistics would not be stationary across the window"
            )
        check_int(self.member_count, "member_count", minimum=1, error=ConfigurationError)
        check_int(self.seed, "seed", minimum=0, error=ConfigurationError)
        if self.seed >= _SEED_LIMIT:
            raise ConfigurationError("seed must fit in 64 bits")
        if self.aspect not in ASPECT_CONVENTIONS:
            raise ConfigurationError(f"aspect must be one of {ASPECT_CONVENTIONS}")
        if self.param_law is None:
            object.__setattr__(self, "param_law", default_law(self.system))
        law = self.param_law
        if self.system == "kepler" and law.lower_cut <= 0:
            raise ConfigurationError("beta must stay positive: lower_cut must be > 0")
        if self.system == "rect" and law.lower_cut <= 0:
            raise ConfigurationError("alpha must stay positive: lower_cut must be > 0")

    def replace(self, **changes) -> "EnsembleConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleConfig":
        data = dict(data)
        law = data.pop("param_law", None)
        if isinstance(law, dict):
            law = ParamLaw(**law)
        return cls(param_law=law, **data)


def _member_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, index, 0]))


def sample_parameter(seed: int, index: int, law: ParamLaw) -> float:
    """Parameter of member ``index``; depends only on ``(seed, index, law)``."""
    if law.spread == 0:
        return float(law.mean)
    rng = _member_stream(seed, index)
    sigma = law.sigma
    for _ in range(MAX_REJECTIONS):
        v = law.mean + sigma * rng.standard_normal()
        if law.lower_cut <= v <= law.upper_cut:
            return float(v)
    raise ConfigurationError(
        f"member {index}: no draw inside [{law.lower_cut}, {law.upper_cut}] after "
        f"{MAX_REJECTIONS} attempts; the cuts exclude almost all of the law"
    )


def sample_parameters(config: EnsembleConfig, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Parameters of members ``start..stop-1`` (default: the whole ensemble)."""
    if stop is None:
        stop = config.member_count
    if not 0 <= start <= stop <= config.member_count:
        raise ValueError(f"index range [{start}, {stop}) outside [0, {config.member_count})")
    law = config.param_law
    if law.spread == 0:
        return np.full(stop - start, float(law.mean))
    return np.array([sample_parameter(config.seed, i, law) for i in range(start, stop)])


def to_alpha(values: np.ndarray, aspect: str) -> np.ndarray:
    """Map sampled rectangle parameters to the period-convention ``alpha``."""
    values = np.asarray(values, dtype=float)
    if aspect == "period":
        return values
    if aspect == "side":
        return values * values
    raise ConfigurationError(f"aspect must be one of {ASPECT_CONVENTIONS}")


# -- plain-text configuration files ---------------------------------------

_KEY_ALIASES = {
    "members": "member_count",
    "window": "window_width",
    "alpha_mean": "mean",
    "beta_mean": "mean",
    "alpha_spread": "spread",
    "beta_spread": "spread",
    "alpha_lower": "lower_cut",
    "beta_lower": "lower_cut",
    "alpha_upper": "upper_cut",
    "beta_upper": "upper_cut",
    "param_mean": "mean",
    "param_spread": "spread",
    "param_lower": "lower_cut",
    "param_upper": "upper_cut",
}
_LAW_KEYS = {"mean", "spread", "lower_cut", "upper_cut", "width_kind"}
_INT_KEYS = {"member_count", "seed"}
_STR_KEYS = {"system", "aspect", "width_kind"}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a normalized dict (``#`` starts a comment)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        key = _KEY_ALIASES.get(key, key)
        if key in _STR_KEYS:
            out[key] = value
        elif key in _INT_KEYS:
            out[key] = int(float(value)) if "e" in value.lower() else int(value)
        elif key in _LAW_KEYS or key in {"energy", "window_width"}:
            out[key] = float(value)
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
    return out


def config_from_mapping(values: dict, base: EnsembleConfig | None = None) -> EnsembleConfig:
    """Build a config from normalized keys, starting from ``base`` defaults."""
    values = dict(values)
    system = values.pop("system", base.system if base else "rect")
    law_fields = {k: values.pop(k) for k in list(values) if k in _LAW_KEYS}
    if base is not None and base.system == system:
        law = dataclasses.replace(base.param_law, **law_fields)
    else:
        law = dataclasses.replace(default_law(system), **law_fields)
    kwargs = base.to_dict() if base is not None else {}
    kwargs.pop("param_law", None)
    kwargs.update(values)
    kwargs["system"] = system
    return EnsembleConfig(param_law=law, **kwargs)


def load_config(path: str | Path) -> EnsembleConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")))
