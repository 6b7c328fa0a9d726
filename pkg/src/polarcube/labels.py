"""Scene labels and label-based filtering."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from .errors import LabelSchemaError

__all__ = ["ENVIRONMENTS", "ILLUMINATIONS", "SCENE_TYPES", "LabelFilter", "LabelSet"]

ENVIRONMENTS = frozenset({"indoor", "outdoor"})
ILLUMINATIONS = frozenset({"sunlight", "cloudy", "white", "incandescent"})
SCENE_TYPES = frozenset({"object", "scene"})


@dataclass(frozen=True)
class LabelSet:
    """The four per-scene annotations (closed enumerations + ISO-8601 time)."""

    environment: str
    illumination: str
    capture_time: str
    scene_type: str

    def __post_init__(self):
        if self.environment not in ENVIRONMENTS:
            raise LabelSchemaError(f"environment must be one of {sorted(ENVIRONMENTS)}, "
                                   f"got {self.environment!r}")
        if self.illumination not in ILLUMINATIONS:
            raise LabelSchemaError(f"illumination must be one of {sorted(ILLUMINATIONS)}, "
                                   f"got {self.illumination!r}")
        if self.scene_type not in SCENE_TYPES:
            raise LabelSchemaError(f"scene_type must be one of {sorted(SCENE_TYPES)}, "
                                   f"got {self.scene_type!r}")
        try:
            datetime.fromisoformat(self.capture_time)
        except (TypeError, ValueError):
            raise LabelSchemaError(f"capture_time must be ISO-8601 text, "
                                   f"got {self.capture_time!r}") from None


@dataclass(frozen=True)
class LabelFilter:
    """Set intersection filter; None fields match everything."""

    environments: frozenset | None = None
    illuminations: frozenset | None = None
    scene_types: frozenset | None = None

    def matches(self, labels: LabelSet | None) -> bool:
        if labels is None:
            return True
        if self.environments is not None and labels.environment not in self.environments:
            return False
        if self.illuminations is not None and labels.illumination not in self.illuminations:
            return False
        if self.scene_types is not None and labels.scene_type not in self.scene_types:
            return False
        return True
