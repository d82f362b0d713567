"""Engine configuration.

Flat dataclass; file/CLI form uses dotted keys (``trajectory.halflife_s``,
``feature.weights``, ...) in a JSON object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .springs import halflife_to_damping


@dataclass(frozen=True)
class EngineConfig:
    fps: float = 30.0
    # trajectory.*
    halflife_s: float = 0.2
    horizons_s: tuple[float, ...] = (0.33, 0.67, 1.0)
    # feature.*
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # (trajectory, feet, root velocity)
    std_floor: float = 1e-6
    # blend.*
    blend_halflife_s: float = 0.15
    # search.*
    search_period_s: float = 0.2  # re-search cadence while in locomotion
    velocity_retrigger: float = 0.2  # m/s command change forcing a search
    heading_retrigger_deg: float = 15.0
    rejection_threshold: float | None = None  # entry distance^2 warning level
    leaf_size: int = 16
    # engine.*
    max_speed: float = 4.0
    start_clip: str | None = None  # defaults to the first locomotion clip

    _KEYS = {
        "engine.fps": ("fps", float),
        "trajectory.halflife_s": ("halflife_s", float),
        "trajectory.horizons_s": ("horizons_s", lambda v: tuple(float(x) for x in v)),
        "feature.weights": ("weights", lambda v: tuple(float(x) for x in v)),
        "feature.std_floor": ("std_floor", float),
        "blend.halflife_s": ("blend_halflife_s", float),
        "search.period_s": ("search_period_s", float),
        "search.velocity_retrigger": ("velocity_retrigger", float),
        "search.heading_retrigger_deg": ("heading_retrigger_deg", float),
        "search.rejection_threshold": (
            "rejection_threshold",
            lambda v: None if v is None else float(v),
        ),
        "search.leaf_size": ("leaf_size", int),
        "engine.max_speed": ("max_speed", float),
        "engine.start_clip": ("start_clip", lambda v: None if v is None else str(v)),
    }

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    @property
    def trajectory_damping(self) -> float:
        return halflife_to_damping(self.halflife_s)

    @property
    def blend_damping(self) -> float:
        return halflife_to_damping(self.blend_halflife_s)

    @property
    def search_period_frames(self) -> int:
        return max(1, round_half_up(self.search_period_s * self.fps))

    @property
    def heading_retrigger(self) -> float:
        return math.radians(self.heading_retrigger_deg)

    def horizon_frames(self, fps: float | None = None) -> list[int]:
        fps = self.fps if fps is None else fps
        return [round_half_up(h * fps) for h in self.horizons_s]

    def validate(self) -> None:
        if self.fps <= 0:
            raise ValueError("fps must be > 0")
        if any(w <= 0 for w in self.weights) or len(self.weights) != 3:
            raise ValueError("feature.weights must be 3 positive numbers")
        if self.std_floor <= 0:
            raise ValueError("feature.std_floor must be > 0")
        hs = self.horizons_s
        if len(hs) != 3 or any(h <= 0 for h in hs) or list(hs) != sorted(hs):
            raise ValueError("trajectory.horizons_s must be 3 ascending positive values")

    def with_updates(self, **kwargs) -> "EngineConfig":
        cfg = replace(self, **kwargs)
        cfg.validate()
        return cfg

    def set_key(self, key: str, value) -> "EngineConfig":
        """Apply one dotted config key; raises KeyError for unknown keys."""
        if key not in self._KEYS:
            raise KeyError(key)
        attr, conv = self._KEYS[key]
        return self.with_updates(**{attr: conv(value)})

    def to_dict(self) -> dict:
        out = {}
        for key, (attr, _) in self._KEYS.items():
            v = getattr(self, attr)
            out[key] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        cfg = cls()
        for key, value in doc.items():
            cfg = cfg.set_key(key, value)
        return cfg

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def round_half_up(x: float) -> int:
    """Deterministic frame rounding: .5 always rounds up."""
    return int(math.floor(x + 0.5))
