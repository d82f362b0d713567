"""The composition engine: locomotion playback, skill replay, transitions.

One `Engine` advances one session at a fixed step (the database frame rate).
Each tick it either plays the next database row or, when a search is due,
retrieves the best-matching row and jumps there. Jumps re-anchor the new
segment's planar root pose onto the character's current planar pose exactly
(no positional discontinuity) and inertialize root height, heading, and
joint angles. A pending skill request restricts the next due search to the
skill's entry window; the skill clip then replays verbatim (no searches)
until its annotated end frame, placing the paired terrain at the switch by
carrying the clip's terrain-to-root offset onto the character's root pose.

Many sessions may share one immutable database; the engine holds all
mutable state and never writes to the database.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .blending import (
    HEADING,
    HEIGHT,
    JOINTS,
    InertializationState,
    apply_inertialization,
    begin_inertialization,
    blended_now,
    pack_channels,
)
from .config import EngineConfig
from .features import F_SLICE, build_query
from .geometry import PlanarTransform, quat_from_axis_angle, quat_mul, rotate_planar, wrap_angle
from .matcher import (
    LOCOMOTION_WINDOW,
    CompiledAnnotation,
    MotionDatabase,
    entry_window,
    search,
    should_search,
)
from .skeleton import LOCOMOTION, Frame
from .springs import command_heading

Z_AXIS = np.array([0.0, 0.0, 1.0])


class EngineError(RuntimeError):
    pass


class UnknownSkillError(EngineError):
    pass


@dataclass(frozen=True)
class TerrainInstance:
    size: tuple[float, float, float]
    x: float
    y: float
    z: float
    yaw: float

    def to_dict(self) -> dict:
        return {
            "size": list(self.size),
            "x": self.x,
            "y": self.y,
            "z": self.z,
            "yaw": self.yaw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TerrainInstance":
        return cls(tuple(d["size"]), d["x"], d["y"], d["z"], d["yaw"])


# -- events -----------------------------------------------------------------


@dataclass
class Event:
    time: float = field(default=0.0, kw_only=True)
    frame: int = field(default=0, kw_only=True)

    name = "event"

    def to_dict(self) -> dict:
        out = {"event": self.name, "time": self.time, "frame": self.frame}
        for f in fields(self):
            if f.name in ("time", "frame"):
                continue
            v = getattr(self, f.name)
            out[f.name] = v.to_dict() if hasattr(v, "to_dict") else v
        return out


@dataclass
class Searched(Event):
    window: str
    index: int
    distance2: float
    name = "searched"


@dataclass
class Transitioned(Event):
    from_index: int
    to_index: int
    distance2: float
    name = "transitioned"


@dataclass
class SkillStarted(Event):
    skill: str
    entry_index: int
    entry_lo: int
    entry_hi: int
    end_index: int
    name = "skill_started"


@dataclass
class SkillEnded(Event):
    skill: str
    name = "skill_ended"


@dataclass
class TerrainPlaced(Event):
    terrain: TerrainInstance
    root_x: float
    root_y: float
    root_yaw: float
    name = "terrain_placed"


@dataclass
class EntryDistanceExceeded(Event):
    distance2: float
    threshold: float
    name = "entry_distance_exceeded"


# -- state ------------------------------------------------------------------


@dataclass
class CompositionState:
    mode: str  # "locomotion" | "skill"
    cursor: int  # global row emitted last
    anchor: PlanarTransform  # clip-local planar root pose -> world
    vel_spring: np.ndarray  # (2,) velocity-spring value: the command integrator
    accel: np.ndarray  # (2,) velocity-spring rate state
    heading_rate: float  # heading-spring rate state
    blend: InertializationState
    terrain: list[TerrainInstance]
    pending_skill: str | None
    active_skill: str | None
    replay_end: int | None  # global row of the annotated skill end
    frames_since_search: int
    u_last: np.ndarray  # command at the last search
    heading_target: float
    heading_target_last: float
    force_search: bool
    time: float
    frame_count: int
    seed: int


class Engine:
    """Single-session composer over a shared read-only MotionDatabase."""

    def __init__(self, db: MotionDatabase, config: EngineConfig | None = None, seed: int = 0):
        self.db = db
        self.dt = 1.0 / db.fps
        self.reconfigure(config or db.config)
        self.state: CompositionState
        self.reset(seed)

    def reconfigure(self, config: EngineConfig) -> None:
        """Swap the runtime config; the step rate is pinned to the database.

        Queries sample the future at frame-quantized times, exactly where
        clip features do, so the horizon cache is derived here.
        """
        self.config = config.with_updates(fps=self.db.fps)
        offsets = self.config.horizon_frames(self.db.fps)
        self.query_horizons = np.asarray(offsets, dtype=np.float64) / self.db.fps

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: int = 0) -> None:
        db = self.db
        start_clip = None
        if self.config.start_clip is not None:
            for c in db.clips:
                if c.id == self.config.start_clip:
                    start_clip = c
                    break
            if start_clip is None:
                raise EngineError(f"start clip {self.config.start_clip!r} not in database")
        else:
            start_clip = next(c for c in db.clips if c.tag == LOCOMOTION)
        row = start_clip.row_start
        # Anchor so the session starts at the origin facing +x.
        psi = float(db.headings[row])
        inv_yaw = wrap_angle(-psi)
        anchor = PlanarTransform(
            inv_yaw, -rotate_planar(inv_yaw, db.root_pos[row, :2])
        )
        self.state = CompositionState(
            mode="locomotion",
            cursor=row,
            anchor=anchor,
            vel_spring=np.zeros(2),
            accel=np.zeros(2),
            heading_rate=0.0,
            blend=InertializationState.zero(db.n_joints, self.config.blend_damping),
            terrain=[],
            pending_skill=None,
            active_skill=None,
            replay_end=None,
            frames_since_search=0,
            u_last=np.zeros(2),
            heading_target=0.0,
            heading_target_last=0.0,
            force_search=False,
            time=0.0,
            frame_count=0,
            seed=seed,
        )

    def request_skill(self, skill: str) -> None:
        if skill not in self.db.skills:
            raise UnknownSkillError(f"database has no skill {skill!r}")
        if self.state.mode != "locomotion":
            raise EngineError("cannot request a skill during skill replay")
        self.state.pending_skill = skill

    # -- per-tick ----------------------------------------------------------

    def step(self, u_cmd) -> tuple[Frame, list[Event]]:
        """Advance one fixed step under the given planar velocity command."""
        st = self.state
        events: list[Event] = []
        u = np.asarray(u_cmd, dtype=np.float64).copy()
        speed = float(np.hypot(u[0], u[1]))
        if speed > self.config.max_speed:
            u *= self.config.max_speed / speed

        if st.mode == "skill":
            st.cursor += 1
            if st.cursor >= st.replay_end:
                events.append(SkillEnded(skill=st.active_skill))
                st.mode = "locomotion"
                st.active_skill = None
                st.replay_end = None
                st.force_search = True
        else:
            st.heading_target = command_heading(u, st.heading_target)
            st.frames_since_search += 1
            clip = self.db.clip_of_row(st.cursor)
            end_of_clip = st.cursor + 1 >= clip.row_end
            due = (
                st.force_search
                or end_of_clip
                or should_search(
                    st.frames_since_search,
                    u,
                    st.u_last,
                    st.heading_target,
                    st.heading_target_last,
                    self.config,
                )
            )
            if due:
                events.extend(self._run_search(u, end_of_clip))
            else:
                st.cursor += 1

        frame = self._emit()
        self._update_springs(u if st.mode == "locomotion" else st.u_last)
        st.time += self.dt
        st.frame_count += 1
        for e in events:
            e.time = st.time
            e.frame = st.frame_count
        return frame, events

    # -- search & transition -------------------------------------------------

    def _run_search(self, u: np.ndarray, end_of_clip: bool) -> list[Event]:
        st = self.state
        events: list[Event] = []
        window = (
            entry_window(st.pending_skill)
            if st.pending_skill is not None
            else LOCOMOTION_WINDOW
        )
        # Early command-triggered searches exclude the playing row so a
        # refreshed command cannot produce a no-op transition.
        early = (
            st.frames_since_search < self.config.search_period_frames
            and not st.force_search
            and not end_of_clip
        )
        query = self._build_query(u)
        result = search(self.db, query, window, exclude=st.cursor if early else None)
        events.append(
            Searched(window=str(window), index=result.index, distance2=result.distance2)
        )
        st.frames_since_search = 0
        st.u_last = u.copy()
        st.heading_target_last = st.heading_target
        st.force_search = False

        if window.kind == "entry":
            skill = st.pending_skill
            ann = self._annotation_for_entry(result.index, skill)
            threshold = self.config.rejection_threshold
            if threshold is not None and result.distance2 > threshold:
                events.append(
                    EntryDistanceExceeded(distance2=result.distance2, threshold=threshold)
                )
            events.append(Transitioned(
                from_index=st.cursor, to_index=result.index, distance2=result.distance2
            ))
            root_world = self._current_root_planar()
            self._transition_to(result.index)
            st.pending_skill = None
            st.mode = "skill"
            st.active_skill = skill
            st.replay_end = ann.end_row
            events.append(
                SkillStarted(
                    skill=skill,
                    entry_index=result.index,
                    entry_lo=ann.entry_lo,
                    entry_hi=ann.entry_hi,
                    end_index=ann.end_row,
                )
            )
            clip = self.db.clips[ann.clip_index]
            if clip.terrain is not None:
                instance = place_terrain(self.db, ann, result.index, root_world)
                st.terrain.append(instance)
                events.append(
                    TerrainPlaced(
                        terrain=instance,
                        root_x=float(root_world.t[0]),
                        root_y=float(root_world.t[1]),
                        root_yaw=float(root_world.yaw),
                    )
                )
            # The matched entry frame is aligned with the present; playback
            # resumes one frame after it so the tick advances time.
            if st.cursor < st.replay_end:
                st.cursor += 1
            if st.cursor >= st.replay_end:
                events.append(SkillEnded(skill=st.active_skill))
                st.mode = "locomotion"
                st.active_skill = None
                st.replay_end = None
                st.force_search = True
        else:
            if result.index != st.cursor:
                events.append(Transitioned(
                    from_index=st.cursor, to_index=result.index, distance2=result.distance2
                ))
                self._transition_to(result.index)
            st.cursor += 1
        return events

    def _annotation_for_entry(self, row: int, skill: str) -> CompiledAnnotation:
        for a in self.db.annotations_for(skill):
            if a.entry_lo <= row <= a.entry_hi:
                return a
        raise EngineError(f"matched row {row} is outside every {skill!r} entry window")

    def _transition_to(self, row: int) -> None:
        """Jump playback to `row`: re-anchor planar pose, inertialize the rest."""
        st = self.state
        db = self.db
        if not (0 <= row < db.n_rows):
            raise EngineError(f"transition target {row} out of range")

        prev_raw = self._raw_channels(st.cursor)
        prev_rate = self._channel_rates(st.cursor) + st.blend.offset_rate
        prev_pose = blended_now(st.blend, prev_raw)

        cur_pos = st.anchor.apply(db.root_pos[st.cursor, :2])
        cur_yaw = st.anchor.apply_yaw(db.headings[st.cursor])
        new_yaw = float(wrap_angle(cur_yaw - db.headings[row]))
        st.anchor = PlanarTransform(
            new_yaw, cur_pos - rotate_planar(new_yaw, db.root_pos[row, :2])
        )
        st.cursor = row

        new_raw = self._raw_channels(row)
        new_rate = self._channel_rates(row)
        st.blend = begin_inertialization(
            prev_pose, prev_rate, new_raw, new_rate, self.config.blend_damping
        )

    # -- output ------------------------------------------------------------

    def _raw_channels(self, row: int) -> np.ndarray:
        db = self.db
        return pack_channels(
            float(db.root_pos[row, 2]),
            float(wrap_angle(self.state.anchor.yaw + db.headings[row])),
            db.joint_angles[row],
        )

    def _channel_rates(self, row: int) -> np.ndarray:
        """Finite-difference channel rates at a row, clamped to its clip."""
        db = self.db
        clip = db.clip_of_row(row)
        a = max(row - 1, clip.row_start)
        b = min(row + 1, clip.row_end - 1)
        scale = db.fps / max(b - a, 1)
        return pack_channels(
            (db.root_pos[b, 2] - db.root_pos[a, 2]) * scale,
            float(wrap_angle(db.headings[b] - db.headings[a])) * scale,
            (db.joint_angles[b] - db.joint_angles[a]) * scale,
        )

    def _emit(self) -> Frame:
        st = self.state
        db = self.db
        row = st.cursor
        raw = self._raw_channels(row)
        blended, _ = apply_inertialization(st.blend, self.dt, raw)
        planar = st.anchor.apply(db.root_pos[row, :2])
        spin = st.anchor.yaw + st.blend.offset[HEADING]
        quat = quat_mul(quat_from_axis_angle(Z_AXIS, spin), db.root_quat[row])
        return Frame(
            root_pos=np.array([planar[0], planar[1], blended[HEIGHT]]),
            root_quat=quat,
            joint_angles=blended[JOINTS].copy(),
        )

    def _current_root_planar(self) -> PlanarTransform:
        st = self.state
        return PlanarTransform(
            float(st.anchor.apply_yaw(self.db.headings[st.cursor])),
            st.anchor.apply(self.db.root_pos[st.cursor, :2]),
        )

    def _build_query(self, u: np.ndarray) -> np.ndarray:
        st = self.state
        db = self.db
        raw = db.features_raw[st.cursor]
        yaw = float(wrap_angle(st.anchor.yaw + db.headings[st.cursor]))
        pos = st.anchor.apply(db.root_pos[st.cursor, :2])
        # Predict from the command integrator (tracked velocity-spring state):
        # it converges to the command whether or not the animation has, so a
        # standing character still queries for a moving future.
        v_world = np.array([st.vel_spring[0], st.vel_spring[1], 0.0])
        return build_query(
            pos,
            yaw,
            v_world,
            st.accel,
            st.heading_rate,
            raw[F_SLICE],
            u,
            st.heading_target,
            self.config,
            horizons_s=self.query_horizons,
        )

    def _update_springs(self, u: np.ndarray) -> None:
        """Advance the command springs one step toward the live command."""
        st = self.state
        db = self.db
        y = self.config.trajectory_damping
        dt = self.dt
        decay = float(np.exp(-y * dt))
        j0 = st.vel_spring - u
        j1 = st.accel + y * j0
        st.vel_spring = decay * (j0 + dt * j1) + u
        st.accel = decay * (st.accel - y * dt * j1)
        yaw = float(wrap_angle(st.anchor.yaw + db.headings[st.cursor]))
        delta = float(wrap_angle(st.heading_target - yaw))
        j1h = st.heading_rate + y * (-delta)
        st.heading_rate = decay * (st.heading_rate - y * dt * j1h)


# -- terrain ------------------------------------------------------------------


def place_terrain(
    db: MotionDatabase,
    ann: CompiledAnnotation,
    entry_row: int,
    root_world: PlanarTransform,
) -> TerrainInstance:
    """Instance the clip's terrain by carrying its terrain-to-root offset at
    the matched entry frame onto the character's current root pose."""
    clip = db.clips[ann.clip_index]
    if clip.terrain is None:
        raise EngineError(f"clip {clip.id} has no terrain asset")
    asset = clip.terrain
    ref_root = PlanarTransform(
        float(db.headings[entry_row]), db.root_pos[entry_row, :2]
    )
    asset_pose = PlanarTransform(asset.yaw, (asset.x, asset.y))
    world = root_world.compose(ref_root.inverse()).compose(asset_pose)
    return TerrainInstance(
        size=tuple(float(v) for v in asset.size),
        x=float(world.t[0]),
        y=float(world.t[1]),
        z=float(asset.z),
        yaw=float(world.yaw),
    )
