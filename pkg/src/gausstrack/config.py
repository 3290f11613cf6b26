"""Pipeline configuration: every numeric threshold in one place.

Config files are flat ``key = value`` text; blank lines and ``#`` comments
are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import InvalidConfig


@dataclass
class Config:
    alpha_cutoff: float = 1.0 / 255.0
    det_floor: float = 1e-12
    min_pixels: int = 3
    min_weight: float = 1e-3
    min_views: int = 2
    min_total_weight: float = 1e-3
    min_total_pixels: int = 3
    static_threshold_px: float = 1.0
    min_hit_pixels: int = 9
    static_fraction: float = 0.9
    knn_k: int = 8
    eig_floor: float = 1e-12
    propagation_average: str = "mean"

    def __post_init__(self):
        if not (0.0 < self.alpha_cutoff < 1.0):
            raise InvalidConfig(f"alpha_cutoff out of (0,1): {self.alpha_cutoff}")
        if self.propagation_average not in ("mean", "median"):
            raise InvalidConfig(
                f"propagation_average must be mean|median, got "
                f"{self.propagation_average!r}")
        for name in ("min_pixels", "min_views", "min_total_pixels",
                     "min_hit_pixels", "knn_k"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be non-negative")


def load_config(path) -> Config:
    """Parse a flat key = value config file."""
    types = {f.name: f.type for f in fields(Config)}
    casts = {"float": float, "int": int, "str": str}
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in types:
                raise InvalidConfig(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = casts[types[key]](raw)
            except ValueError as e:
                raise InvalidConfig(f"{path}:{lineno}: bad value for {key}: {e}")
    return Config(**values)
