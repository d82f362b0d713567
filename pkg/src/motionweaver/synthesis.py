"""Batch long-horizon trajectory synthesis with seeded randomization.

Each episode: start standing, walk under sampled 2D velocity commands (two
speed levels, five turning directions, randomized approach duration), enter
the requested skill through its entry window, replay it to the annotated
end, then continue straight for two more seconds. The primary obstacle is
re-instanced with randomized width / dimension perturbations / yaw around
the placed pose, and distractor boxes are scattered near (never on) the
realized root path. Every draw is determined by (dataset seed, episode
index), so generation is order- and worker-count-independent.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .composer import Engine, TerrainInstance
from .config import EngineConfig, round_half_up
from .matcher import MotionDatabase
from .skeleton import ValidationError

SPEED_LEVELS = (1.0, 2.0)
TURN_CHOICES_DEG = (-90.0, -45.0, 0.0, 45.0, 90.0)
DURATION_LO = 0.1
DURATION_HI = 3.0
DURATION_GRID_STEP = 0.3
POST_SKILL_S = 2.0
TERRAIN_WIDTH_MAX = 1.5
TERRAIN_DIM_JITTER = 0.05
TERRAIN_YAW_MAX = math.pi / 4.0
DISTRACTOR_MAX_COUNT = 4
DISTRACTOR_SIZE = (0.1, 0.6)
DISTRACTOR_RANGE = 3.0
DISTRACTOR_CLEARANCE = 0.4

DATASET_MAGIC = b"MWDS"
DATASET_VERSION = 1


def duration_grid() -> np.ndarray:
    n = int(round((DURATION_HI - DURATION_LO - DURATION_GRID_STEP) / DURATION_GRID_STEP)) + 1
    return DURATION_LO + DURATION_GRID_STEP * np.arange(n)


@dataclass(frozen=True)
class DistractorDraw:
    size: tuple[float, float, float]
    path_frac: float
    side: int  # -1 left of path, +1 right
    lateral: float
    yaw: float


@dataclass(frozen=True)
class EpisodeSpec:
    dataset_seed: int
    episode_index: int
    skill: str
    speed: float
    pre_skill_s: float
    turns_deg: tuple[float, ...]
    terrain_width: float
    terrain_depth_delta: float
    terrain_height_delta: float
    terrain_yaw: float
    distractors: tuple[DistractorDraw, ...]
    segment_s: float = 1.0
    post_skill_s: float = POST_SKILL_S

    def to_dict(self) -> dict:
        return {
            "dataset_seed": self.dataset_seed,
            "episode_index": self.episode_index,
            "skill": self.skill,
            "speed": self.speed,
            "pre_skill_s": self.pre_skill_s,
            "turns_deg": list(self.turns_deg),
            "terrain_width": self.terrain_width,
            "terrain_depth_delta": self.terrain_depth_delta,
            "terrain_height_delta": self.terrain_height_delta,
            "terrain_yaw": self.terrain_yaw,
            "distractors": [
                {
                    "size": list(d.size),
                    "path_frac": d.path_frac,
                    "side": d.side,
                    "lateral": d.lateral,
                    "yaw": d.yaw,
                }
                for d in self.distractors
            ],
            "segment_s": self.segment_s,
            "post_skill_s": self.post_skill_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeSpec":
        return cls(
            dataset_seed=d["dataset_seed"],
            episode_index=d["episode_index"],
            skill=d["skill"],
            speed=d["speed"],
            pre_skill_s=d["pre_skill_s"],
            turns_deg=tuple(d["turns_deg"]),
            terrain_width=d["terrain_width"],
            terrain_depth_delta=d["terrain_depth_delta"],
            terrain_height_delta=d["terrain_height_delta"],
            terrain_yaw=d["terrain_yaw"],
            distractors=tuple(
                DistractorDraw(
                    size=tuple(x["size"]),
                    path_frac=x["path_frac"],
                    side=x["side"],
                    lateral=x["lateral"],
                    yaw=x["yaw"],
                )
                for x in d["distractors"]
            ),
            segment_s=d["segment_s"],
            post_skill_s=d["post_skill_s"],
        )


def episode_rng(dataset_seed: int, episode_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([dataset_seed, episode_index]))
    )


def sample_episode_spec(
    rng: np.random.Generator,
    db: MotionDatabase,
    skills: list[str],
    dataset_seed: int = 0,
    episode_index: int = 0,
    duration_mode: str = "grid",
    segment_s: float = 1.0,
) -> EpisodeSpec:
    """Draw one episode's randomization, fully determined by the rng state."""
    for skill in skills:
        if skill not in db.skills:
            raise ValidationError(f"database has no skill {skill!r}")
    skill = skills[int(rng.integers(len(skills)))]
    speed = SPEED_LEVELS[int(rng.integers(len(SPEED_LEVELS)))]
    if duration_mode == "grid":
        grid = duration_grid()
        pre = float(grid[int(rng.integers(grid.size))])
    elif duration_mode == "uniform":
        pre = float(rng.uniform(DURATION_LO, DURATION_HI))
    else:
        raise ValueError(f"unknown duration mode {duration_mode!r}")
    n_segments = max(1, math.ceil(pre / segment_s - 1e-9))
    turns = tuple(
        TURN_CHOICES_DEG[int(k)] for k in rng.integers(len(TURN_CHOICES_DEG), size=n_segments)
    )

    ann = db.annotations_for(skill)[0]
    asset = db.clips[ann.clip_index].terrain
    width_min = float(asset.size[1]) if asset is not None else 0.5
    terrain_width = float(rng.uniform(width_min, TERRAIN_WIDTH_MAX))
    depth_delta = float(rng.uniform(-TERRAIN_DIM_JITTER, TERRAIN_DIM_JITTER))
    height_delta = float(rng.uniform(-TERRAIN_DIM_JITTER, TERRAIN_DIM_JITTER))
    terrain_yaw = float(rng.uniform(-TERRAIN_YAW_MAX, TERRAIN_YAW_MAX))

    n_distractors = int(rng.integers(DISTRACTOR_MAX_COUNT + 1))
    distractors = tuple(
        DistractorDraw(
            size=tuple(rng.uniform(DISTRACTOR_SIZE[0], DISTRACTOR_SIZE[1], 3).tolist()),
            path_frac=float(rng.uniform()),
            side=int(rng.integers(2)) * 2 - 1,
            lateral=float(rng.uniform(DISTRACTOR_CLEARANCE, DISTRACTOR_RANGE)),
            yaw=float(rng.uniform(-math.pi, math.pi)),
        )
        for _ in range(n_distractors)
    )
    return EpisodeSpec(
        dataset_seed=dataset_seed,
        episode_index=episode_index,
        skill=skill,
        speed=speed,
        pre_skill_s=pre,
        turns_deg=turns,
        terrain_width=terrain_width,
        terrain_depth_delta=depth_delta,
        terrain_height_delta=height_delta,
        terrain_yaw=terrain_yaw,
        distractors=distractors,
        segment_s=segment_s,
    )


# ---------------------------------------------------------------------------
# Rollout


@dataclass
class TrajectoryRecord:
    spec: EpisodeSpec
    times: np.ndarray  # (T,)
    commands: np.ndarray  # (T, 2)
    root_pos: np.ndarray  # (T, 3)
    root_quat: np.ndarray  # (T, 4)
    joint_angles: np.ndarray  # (T, n)
    events: list[dict]
    terrain: list[dict]  # randomized primary obstacle instance(s)
    distractors: list[dict]
    entry_index: int
    entry_lo: int
    entry_hi: int

    @property
    def n_steps(self) -> int:
        return self.times.shape[0]

    @property
    def duration_s(self) -> float:
        return float(self.n_steps) * float(self.times[1] - self.times[0]) if self.n_steps > 1 else 0.0


def synthesize_trajectory(
    db: MotionDatabase, spec: EpisodeSpec, config: EngineConfig | None = None
) -> TrajectoryRecord:
    """Roll one episode through the composer with the scripted command trace."""
    engine = Engine(db, config, seed=spec.episode_index)
    fps = db.fps
    dt = 1.0 / fps
    pre_frames = round_half_up(spec.pre_skill_s * fps)
    seg_frames = max(1, round_half_up(spec.segment_s * fps))
    post_frames = round_half_up(spec.post_skill_s * fps)

    heading = 0.0
    commands, frames, events = [], [], []
    entry = None
    skill_end_frame = None
    requested = False
    tick = 0
    # Generous cap: approach + search latency + longest clip + tail.
    max_ticks = (
        pre_frames
        + engine.config.search_period_frames
        + max(c.n_frames for c in db.clips)
        + post_frames
        + 8
    )
    while True:
        if tick == pre_frames and not requested:
            engine.request_skill(spec.skill)
            requested = True
        if not requested:
            seg = min(tick // seg_frames, len(spec.turns_deg) - 1)
            heading = sum(math.radians(t) for t in spec.turns_deg[: seg + 1])
        u = np.array([
            spec.speed * math.cos(heading),
            spec.speed * math.sin(heading),
        ])
        frame, evs = engine.step(u)
        commands.append(u)
        frames.append(frame)
        for e in evs:
            d = e.to_dict()
            events.append(d)
            if d["event"] == "skill_started":
                entry = d
            elif d["event"] == "skill_ended":
                skill_end_frame = tick
        tick += 1
        if skill_end_frame is not None and tick >= skill_end_frame + post_frames:
            break
        if tick >= max_ticks:
            raise ValidationError(
                f"episode {spec.episode_index}: skill {spec.skill!r} never completed"
            )

    T = len(frames)
    root_pos = np.stack([f.root_pos for f in frames])
    record = TrajectoryRecord(
        spec=spec,
        times=np.arange(T) * dt + dt,
        commands=np.stack(commands),
        root_pos=root_pos,
        root_quat=np.stack([f.root_quat for f in frames]),
        joint_angles=np.stack([f.joint_angles for f in frames]),
        events=events,
        terrain=[],
        distractors=[],
        entry_index=entry["entry_index"],
        entry_lo=entry["entry_lo"],
        entry_hi=entry["entry_hi"],
    )
    placed = [e for e in events if e["event"] == "terrain_placed"]
    if placed:
        record.terrain = [
            _randomize_terrain(TerrainInstance.from_dict(placed[0]["terrain"]), spec).to_dict()
        ]
    record.distractors = _place_distractors(root_pos[:, :2], spec)
    return record


def _randomize_terrain(base: TerrainInstance, spec: EpisodeSpec) -> TerrainInstance:
    sx, _, sz = base.size
    return TerrainInstance(
        size=(sx + spec.terrain_depth_delta, spec.terrain_width, sz + spec.terrain_height_delta),
        x=base.x,
        y=base.y,
        z=base.z,
        yaw=base.yaw + spec.terrain_yaw,
    )


def _place_distractors(path_xy: np.ndarray, spec: EpisodeSpec) -> list[dict]:
    """Boxes near the path, never closer than the clearance to any path point."""
    out = []
    seg = np.diff(path_xy, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(arc[-1])
    for d in spec.distractors:
        i = int(np.searchsorted(arc, d.path_frac * total, side="right") - 1)
        i = min(max(i, 0), len(seg) - 1)
        tangent = seg[i] / seg_len[i] if seg_len[i] > 1e-12 else np.array([1.0, 0.0])
        normal = np.array([-tangent[1], tangent[0]])
        half_diag = 0.5 * math.hypot(d.size[0], d.size[1])
        lateral = max(d.lateral, DISTRACTOR_CLEARANCE + half_diag)
        center = None
        while lateral <= DISTRACTOR_RANGE + 1e-9:
            c = path_xy[i] + d.side * lateral * normal
            dist = float(np.min(np.hypot(path_xy[:, 0] - c[0], path_xy[:, 1] - c[1])))
            if dist >= DISTRACTOR_CLEARANCE + half_diag:
                center = c
                break
            lateral += 0.2
        if center is None:
            continue  # no room beside a curving path; drop the draw
        out.append(
            {
                "size": list(d.size),
                "x": float(center[0]),
                "y": float(center[1]),
                "z": 0.0,
                "yaw": d.yaw,
            }
        )
    return out


# ---------------------------------------------------------------------------
# Dataset generation

_WORKER_DB: MotionDatabase | None = None
_WORKER_ARGS: dict = {}


def _episode_job(index: int) -> TrajectoryRecord:
    a = _WORKER_ARGS
    rng = episode_rng(a["seed"], index)
    spec = sample_episode_spec(
        rng,
        _WORKER_DB,
        a["skills"],
        dataset_seed=a["seed"],
        episode_index=index,
        duration_mode=a["duration_mode"],
    )
    return synthesize_trajectory(_WORKER_DB, spec)


def synthesize_dataset(
    db: MotionDatabase,
    skills: list[str],
    episodes: int,
    seed: int,
    duration_mode: str = "grid",
    workers: int = 1,
) -> list[TrajectoryRecord]:
    """Episodes 0..n-1, independent per-episode rng streams; the result is
    identical for any worker count."""
    global _WORKER_DB, _WORKER_ARGS
    _WORKER_DB = db
    _WORKER_ARGS = {"seed": seed, "skills": skills, "duration_mode": duration_mode}
    indices = range(episodes)
    if workers <= 1:
        return [_episode_job(i) for i in indices]
    import multiprocessing

    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers) as pool:
        return list(pool.map(_episode_job, indices, chunksize=8))


# ---------------------------------------------------------------------------
# Dataset archive


def _record_to_blobs(rec: TrajectoryRecord) -> tuple[bytes, bytes]:
    arrays = [
        ("times", rec.times),
        ("commands", rec.commands),
        ("root_pos", rec.root_pos),
        ("root_quat", rec.root_quat),
        ("joint_angles", rec.joint_angles),
    ]
    blob = b"".join(np.ascontiguousarray(a).tobytes() for _, a in arrays)
    header = {
        "spec": rec.spec.to_dict(),
        "events": rec.events,
        "terrain": rec.terrain,
        "distractors": rec.distractors,
        "entry_index": rec.entry_index,
        "entry_lo": rec.entry_lo,
        "entry_hi": rec.entry_hi,
        "arrays": [
            {"name": n, "dtype": str(a.dtype), "shape": list(a.shape)} for n, a in arrays
        ],
    }
    return json.dumps(header).encode("utf-8"), blob


def _record_from_blobs(header_bytes: bytes, blob: bytes) -> TrajectoryRecord:
    header = json.loads(header_bytes.decode("utf-8"))
    arrays = {}
    off = 0
    for meta in header["arrays"]:
        dtype = np.dtype(meta["dtype"])
        shape = tuple(meta["shape"])
        n = dtype.itemsize * int(np.prod(shape))
        arrays[meta["name"]] = (
            np.frombuffer(blob[off : off + n], dtype=dtype).reshape(shape).copy()
        )
        off += n
    return TrajectoryRecord(
        spec=EpisodeSpec.from_dict(header["spec"]),
        times=arrays["times"],
        commands=arrays["commands"],
        root_pos=arrays["root_pos"],
        root_quat=arrays["root_quat"],
        joint_angles=arrays["joint_angles"],
        events=header["events"],
        terrain=header["terrain"],
        distractors=header["distractors"],
        entry_index=header["entry_index"],
        entry_lo=header["entry_lo"],
        entry_hi=header["entry_hi"],
    )


def write_dataset(records: list[TrajectoryRecord], out_dir, shard_size: int = 64) -> None:
    """Sharded archive + manifest + one human-readable summary line per episode."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shards = []
    for s in range(0, max(len(records), 1), shard_size):
        chunk = records[s : s + shard_size]
        name = f"shard_{s // shard_size:05d}.mwds"
        with open(out / name, "wb") as f:
            f.write(DATASET_MAGIC)
            f.write(struct.pack("<IQ", DATASET_VERSION, len(chunk)))
            for rec in chunk:
                hb, blob = _record_to_blobs(rec)
                crc = zlib.crc32(hb) ^ zlib.crc32(blob)
                f.write(struct.pack("<QQI", len(hb), len(blob), crc))
                f.write(hb)
                f.write(blob)
        shards.append({"file": name, "n_records": len(chunk)})
        if not records:
            break
    manifest = {"version": DATASET_VERSION, "n_records": len(records), "shards": shards}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    with open(out / "summary.txt", "w") as f:
        for rec in records:
            s = rec.spec
            f.write(
                f"episode {s.episode_index}: skill={s.skill} speed={s.speed} "
                f"approach={s.pre_skill_s:.1f}s turns={list(s.turns_deg)} "
                f"entry={rec.entry_index} steps={rec.n_steps}\n"
            )


def read_dataset(path) -> list[TrajectoryRecord]:
    out_dir = Path(path)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    if manifest["version"] != DATASET_VERSION:
        raise ValidationError(f"unsupported dataset version {manifest['version']}")
    records: list[TrajectoryRecord] = []
    for shard in manifest["shards"]:
        with open(out_dir / shard["file"], "rb") as f:
            magic = f.read(4)
            if magic != DATASET_MAGIC:
                raise ValidationError(f"{shard['file']}: bad magic")
            version, count = struct.unpack("<IQ", f.read(12))
            if version != DATASET_VERSION:
                raise ValidationError(f"{shard['file']}: unsupported version {version}")
            for k in range(count):
                hlen, blen, crc = struct.unpack("<QQI", f.read(20))
                hb = f.read(hlen)
                blob = f.read(blen)
                if zlib.crc32(hb) ^ zlib.crc32(blob) != crc:
                    raise ValidationError(
                        f"{shard['file']}: record {k} checksum mismatch"
                    )
                records.append(_record_from_blobs(hb, blob))
    if len(records) != manifest["n_records"]:
        raise ValidationError("dataset truncated: record count disagrees with manifest")
    return records


def validate_dataset(path) -> list[str]:
    """Dataset-level invariants; returns problems (empty = ok)."""
    try:
        records = read_dataset(path)
    except (OSError, ValidationError, KeyError, json.JSONDecodeError) as e:
        return [f"unreadable dataset: {e}"]
    problems = []
    for rec in records:
        s = rec.spec
        tag = f"episode {s.episode_index}"
        if not (rec.entry_lo <= rec.entry_index <= rec.entry_hi):
            problems.append(f"{tag}: entry index outside the entry window")
        if not (DURATION_LO - 1e-9 <= s.pre_skill_s <= DURATION_HI + 1e-9):
            problems.append(f"{tag}: approach duration out of range")
        if s.speed not in SPEED_LEVELS:
            problems.append(f"{tag}: unknown speed level {s.speed}")
        if any(t not in TURN_CHOICES_DEG for t in s.turns_deg):
            problems.append(f"{tag}: unknown turn direction")
        if abs(s.terrain_yaw) > TERRAIN_YAW_MAX + 1e-9:
            problems.append(f"{tag}: terrain yaw out of range")
        if rec.n_steps != rec.commands.shape[0]:
            problems.append(f"{tag}: commands not recorded every step")
    return problems


def dataset_stats(records: list[TrajectoryRecord]) -> dict:
    counts: dict[str, dict] = {"skill": {}, "speed": {}, "direction": {}}
    durations = []
    for rec in records:
        s = rec.spec
        counts["skill"][s.skill] = counts["skill"].get(s.skill, 0) + 1
        counts["speed"][str(s.speed)] = counts["speed"].get(str(s.speed), 0) + 1
        for t in s.turns_deg:
            counts["direction"][str(t)] = counts["direction"].get(str(t), 0) + 1
        durations.append(s.pre_skill_s)
    return {
        "episodes": len(records),
        "counts": counts,
        "approach_duration": {
            "min": min(durations) if durations else None,
            "max": max(durations) if durations else None,
            "mean": float(np.mean(durations)) if durations else None,
        },
    }
