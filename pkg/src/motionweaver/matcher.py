"""Motion database compilation and windowed exact nearest-neighbor retrieval.

`build_database` mirrors every clip, extracts and standardizes features,
compiles skill annotations to global row indexing, and builds one kd-tree
per search window (the locomotion window plus one entry window per skill).
`search` uses the accelerated index; `search_bruteforce` is the linear-scan
reference. Both return identical (index, distance^2) for every query; the
property tests enforce this exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import EngineConfig
from .features import FeatureStats, compute_stats, extract_clip_features
from .geometry import quat_yaw, wrap_angle
from .kdtree import build_kdtree
from . import kernels
from .skeleton import (
    LOCOMOTION,
    Box3,
    MotionClip,
    Skeleton,
    SkillAnnotation,
    ValidationError,
    mirror_clip,
)


@dataclass(frozen=True)
class SearchWindow:
    """Candidate set: all searchable locomotion rows, or a skill's entry rows."""

    kind: str  # "locomotion" | "entry"
    skill: str | None = None

    def __post_init__(self):
        if self.kind not in ("locomotion", "entry"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if (self.kind == "entry") != (self.skill is not None):
            raise ValueError("entry windows need a skill; locomotion takes none")

    def __str__(self):
        return self.kind if self.skill is None else f"entry({self.skill})"


LOCOMOTION_WINDOW = SearchWindow("locomotion")


def entry_window(skill: str) -> SearchWindow:
    return SearchWindow("entry", skill)


@dataclass(frozen=True)
class CompiledClip:
    id: str
    tag: str
    row_start: int
    n_frames: int
    terrain: Box3 | None
    mirrored: bool
    source_id: str

    @property
    def row_end(self) -> int:
        return self.row_start + self.n_frames


@dataclass(frozen=True)
class CompiledAnnotation:
    skill: str
    clip_index: int
    start: int  # clip-local skill start
    end: int
    entry_len: int
    row_start: int  # owning clip's first global row

    @property
    def entry_lo(self) -> int:
        return self.row_start + self.start - self.entry_len

    @property
    def entry_hi(self) -> int:
        return self.row_start + self.start

    @property
    def start_row(self) -> int:
        return self.row_start + self.start

    @property
    def end_row(self) -> int:
        return self.row_start + self.end


@dataclass
class MatchResult:
    index: int
    distance2: float


@dataclass
class MotionDatabase:
    skeleton: Skeleton
    fps: float
    config: EngineConfig
    clips: list[CompiledClip]
    root_pos: np.ndarray  # (N, 3)
    root_quat: np.ndarray  # (N, 4)
    joint_angles: np.ndarray  # (N, ndof)
    features_raw: np.ndarray  # (N, 27)
    stats: FeatureStats
    searchable: np.ndarray  # (N,) bool
    row_clip: np.ndarray  # (N,) int32
    annotations: list[CompiledAnnotation]
    features_std: np.ndarray = field(init=False)
    headings: np.ndarray = field(init=False)  # (N,) root yaw per row
    _windows: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.features_std = np.ascontiguousarray(
            self.stats.standardize(self.features_raw)
        )
        self.headings = quat_yaw(self.root_quat)
        self._windows = {}
        self._build_windows()
        # The database is immutable after build and shared across sessions.
        for arr in (
            self.root_pos, self.root_quat, self.joint_angles,
            self.features_raw, self.features_std, self.searchable,
            self.row_clip, self.headings,
        ):
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.root_pos.shape[0]

    @property
    def n_joints(self) -> int:
        return self.joint_angles.shape[1]

    @property
    def skills(self) -> list[str]:
        seen = []
        for a in self.annotations:
            if a.skill not in seen:
                seen.append(a.skill)
        return seen

    def clip_of_row(self, row: int) -> CompiledClip:
        return self.clips[self.row_clip[row]]

    def local_index(self, row: int) -> int:
        return row - self.clip_of_row(row).row_start

    def annotations_for(self, skill: str) -> list[CompiledAnnotation]:
        return [a for a in self.annotations if a.skill == skill]

    def annotation_of_row(self, row: int, skill: str) -> CompiledAnnotation:
        for a in self.annotations_for(skill):
            if a.entry_lo <= row <= a.end_row:
                return a
        raise ValidationError(f"row {row} is not inside any {skill!r} annotation")

    # -- windows ----------------------------------------------------------

    def _build_windows(self) -> None:
        loco = np.flatnonzero(
            self.searchable
            & np.isin(
                self.row_clip,
                [i for i, c in enumerate(self.clips) if c.tag == LOCOMOTION],
            )
        ).astype(np.int64)
        self._register_window(LOCOMOTION_WINDOW, loco)
        for skill in self.skills:
            rows = []
            for a in self.annotations_for(skill):
                span = np.arange(a.entry_lo, a.entry_hi + 1, dtype=np.int64)
                rows.append(span[self.searchable[span]])
            rows = np.unique(np.concatenate(rows))
            self._register_window(entry_window(skill), rows)

    def _register_window(self, window: SearchWindow, rows: np.ndarray) -> None:
        if rows.size == 0:
            raise ValidationError(f"search window {window} is empty")
        Xw = np.ascontiguousarray(self.features_std[rows])
        tree = build_kdtree(Xw, self.config.leaf_size)
        self._windows[window] = (rows, Xw, tree)

    def window_rows(self, window: SearchWindow) -> np.ndarray:
        return self._window(window)[0]

    def _window(self, window: SearchWindow):
        try:
            return self._windows[window]
        except KeyError:
            raise ValidationError(f"database has no window {window}") from None


# ---------------------------------------------------------------------------
# Build


def build_database(
    skeleton: Skeleton,
    clips: list[MotionClip],
    annotations: list[SkillAnnotation],
    config: EngineConfig | None = None,
) -> MotionDatabase:
    """Compile clips + annotations into a searchable database.

    Every clip is augmented with its mirrored copy (annotations and terrain
    assets mirror along); features are extracted per frame, standardized by
    stats over the searchable rows, and indexed per window. Deterministic
    for identical inputs and config.
    """
    config = config or EngineConfig()
    config.validate()
    skeleton.validate()
    if not clips:
        raise ValidationError("no clips given")
    if not any(c.tag == LOCOMOTION for c in clips):
        raise ValidationError("database needs at least one locomotion clip")
    fps = clips[0].fps
    by_id: dict[str, MotionClip] = {}
    for clip in clips:
        clip.validate(skeleton)
        if clip.fps != fps:
            raise ValidationError(
                f"clip {clip.id}: fps {clip.fps} != {fps}; clips must share one rate"
            )
        if clip.id in by_id:
            raise ValidationError(f"duplicate clip id {clip.id}")
        by_id[clip.id] = clip
    ann_by_clip: dict[str, list[SkillAnnotation]] = {}
    for ann in annotations:
        if ann.clip_id not in by_id:
            raise ValidationError(f"annotation references unknown clip {ann.clip_id}")
        ann.validate(by_id[ann.clip_id])
        ann_by_clip.setdefault(ann.clip_id, []).append(ann)

    compiled_clips: list[CompiledClip] = []
    compiled_anns: list[CompiledAnnotation] = []
    feats, masks, rows_clip = [], [], []
    pos_parts, quat_parts, angle_parts = [], [], []
    row_cursor = 0
    for clip in clips:
        for mirrored in (False, True):
            variant = mirror_clip(skeleton, clip) if mirrored else clip
            index = len(compiled_clips)
            compiled_clips.append(
                CompiledClip(
                    id=variant.id,
                    tag=variant.tag,
                    row_start=row_cursor,
                    n_frames=variant.n_frames,
                    terrain=variant.terrain,
                    mirrored=mirrored,
                    source_id=clip.id,
                )
            )
            for ann in ann_by_clip.get(clip.id, ()):
                compiled_anns.append(
                    CompiledAnnotation(
                        skill=ann.skill,
                        clip_index=index,
                        start=ann.start,
                        end=ann.end,
                        entry_len=ann.entry_len,
                        row_start=row_cursor,
                    )
                )
            f, m = extract_clip_features(skeleton, variant, config)
            feats.append(f)
            masks.append(m)
            rows_clip.append(np.full(variant.n_frames, index, dtype=np.int32))
            pos_parts.append(variant.root_pos)
            quat_parts.append(variant.root_quat)
            angle_parts.append(variant.joint_angles)
            row_cursor += variant.n_frames

    features = np.ascontiguousarray(np.concatenate(feats, axis=0))
    searchable = np.concatenate(masks)
    if searchable.sum() < 2:
        raise ValidationError("fewer than 2 searchable frames in the database")
    stats = compute_stats(
        features[searchable], weights=config.weights, std_floor=config.std_floor
    )
    return MotionDatabase(
        skeleton=skeleton,
        fps=fps,
        config=config,
        clips=compiled_clips,
        root_pos=np.ascontiguousarray(np.concatenate(pos_parts, axis=0)),
        root_quat=np.ascontiguousarray(np.concatenate(quat_parts, axis=0)),
        joint_angles=np.ascontiguousarray(np.concatenate(angle_parts, axis=0)),
        features_raw=features,
        stats=stats,
        searchable=searchable,
        row_clip=np.concatenate(rows_clip),
        annotations=compiled_anns,
    )


# ---------------------------------------------------------------------------
# Search


def _resolve_exclude(rows: np.ndarray, exclude: int | None) -> int:
    if exclude is None:
        return -1
    pos = int(np.searchsorted(rows, exclude))
    if pos < rows.size and rows[pos] == exclude:
        return pos
    return -1


def search(
    db: MotionDatabase,
    query_raw: np.ndarray,
    window: SearchWindow,
    exclude: int | None = None,
) -> MatchResult:
    """Exact nearest searchable row via the accelerated index.

    The raw query is standardized once; distances are group-weighted squared
    L2 in standardized space; ties break to the lowest global index.
    `exclude` removes one global row from the candidates.
    """
    rows, _, tree = db._window(window)
    q = np.ascontiguousarray(db.stats.standardize(np.asarray(query_raw, dtype=np.float64)))
    local, d2 = kernels.kd_query(
        tree.points,
        tree.perm,
        tree.left,
        tree.right,
        tree.start,
        tree.end,
        tree.lo,
        tree.hi,
        db.stats.dim_weights(),
        q,
        _resolve_exclude(rows, exclude),
    )
    if local < 0:
        raise ValidationError(f"window {window} has no candidates")
    return MatchResult(index=int(rows[local]), distance2=float(d2))


def search_bruteforce(
    db: MotionDatabase,
    query_raw: np.ndarray,
    window: SearchWindow,
    exclude: int | None = None,
) -> MatchResult:
    """Reference linear scan; contract identical to `search`."""
    rows, Xw, _ = db._window(window)
    q = np.ascontiguousarray(db.stats.standardize(np.asarray(query_raw, dtype=np.float64)))
    local, d2 = kernels.brute_query(
        Xw, db.stats.dim_weights(), q, _resolve_exclude(rows, exclude)
    )
    if local < 0:
        raise ValidationError(f"window {window} has no candidates")
    return MatchResult(index=int(rows[local]), distance2=float(d2))


def should_search(
    frames_since_search: int,
    u_cmd: np.ndarray,
    u_last: np.ndarray,
    heading_target: float,
    heading_target_last: float,
    config: EngineConfig,
) -> bool:
    """Search when the cadence elapses or the command moved significantly."""
    if frames_since_search >= config.search_period_frames:
        return True
    if float(np.linalg.norm(np.asarray(u_cmd) - np.asarray(u_last))) > config.velocity_retrigger:
        return True
    if abs(float(wrap_angle(heading_target - heading_target_last))) > config.heading_retrigger:
        return True
    return False
