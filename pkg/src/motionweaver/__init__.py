"""motionweaver: motion-matching composition of clips into long trajectories."""

from .config import EngineConfig
from .composer import Engine, TerrainInstance
from .kernels import BACKEND
from .matcher import (
    LOCOMOTION_WINDOW,
    MotionDatabase,
    SearchWindow,
    build_database,
    entry_window,
    search,
    search_bruteforce,
)
from .skeleton import Frame, MotionClip, Skeleton, SkillAnnotation

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Engine",
    "EngineConfig",
    "Frame",
    "LOCOMOTION_WINDOW",
    "MotionClip",
    "MotionDatabase",
    "SearchWindow",
    "Skeleton",
    "SkillAnnotation",
    "TerrainInstance",
    "build_database",
    "entry_window",
    "search",
    "search_bruteforce",
    "__version__",
]
