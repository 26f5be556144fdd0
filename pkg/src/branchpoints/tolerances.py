"""Default numerical tolerances and their overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError

ENV_SCALE = "BP_TOLERANCE_SCALE"


@dataclass(frozen=True)
class Tolerances:
    defect: float = 1e-6  # |(x, x)| / <x|x> below this: defective state
    root: float = 1e-12  # relative Muller step at convergence
    dedup: float = 1e-6  # branch points closer than this are merged
    clearance: float = 1e-6  # minimum distance of a monodromy loop from a zero
    tie: float = 1e-9  # assignment confidence below this is a tie

    def scaled(self, factor: float) -> "Tolerances":
        if not factor > 0:
            raise ConfigError(f"tolerance scale must be positive, got {factor}")
        return Tolerances(**{k: v * factor for k, v in asdict(self).items()})

    def with_overrides(self, overrides: dict[str, float]) -> "Tolerances":
        names = {f.name for f in fields(self)}
        for key in overrides:
            if key not in names:
                raise ConfigError(f"unknown tolerance {key!r}; expected one of {sorted(names)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def from_environment(base: Tolerances | None = None) -> tuple[Tolerances, float]:
    """Apply ``BP_TOLERANCE_SCALE`` (a positive real multiplier) if set."""
    base = base or Tolerances()
    raw = os.environ.get(ENV_SCALE)
    if raw is None or raw.strip() == "":
        return base, 1.0
    try:
        factor = float(raw)
    except ValueError:
        raise ConfigError(f"{ENV_SCALE}={raw!r} is not a number") from None
    return base.scaled(factor), factor
