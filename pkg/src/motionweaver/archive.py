"""Database archive file: bit-exact round trip of a compiled MotionDatabase.

Layout (little-endian):

    magic b"MWDB" | u32 version | u64 header_len | header JSON (UTF-8)
    | binary sections, back to back

The header records, per section, dtype/shape and a CRC-32 so `validate_file`
can name exactly which section is damaged. Floats inside the JSON header
(stats, terrain poses) round-trip exactly through repr; all bulk numeric
data lives in the raw float64 sections. The standardized feature matrix and
the search trees are rebuilt deterministically on load, so only raw
features are stored.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .config import EngineConfig
from .features import FeatureStats
from .matcher import CompiledAnnotation, CompiledClip, MotionDatabase
from .skeleton import Box3, ValidationError, parse_skeleton, serialize_skeleton

MAGIC = b"MWDB"
VERSION = 1

_SECTIONS = ("root_pos", "root_quat", "joint_angles", "features_raw", "row_clip", "searchable_bits")


def save_database(db: MotionDatabase, path) -> None:
    arrays = {
        "root_pos": db.root_pos,
        "root_quat": db.root_quat,
        "joint_angles": db.joint_angles,
        "features_raw": db.features_raw,
        "row_clip": db.row_clip,
        "searchable_bits": np.packbits(db.searchable),
    }
    sections = []
    blobs = []
    for name in _SECTIONS:
        arr = np.ascontiguousarray(arrays[name])
        blob = arr.tobytes()
        sections.append(
            {
                "name": name,
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "crc32": zlib.crc32(blob),
            }
        )
        blobs.append(blob)

    header = {
        "version": VERSION,
        "n_rows": db.n_rows,
        "dims": db.features_raw.shape[1],
        "fps": db.fps,
        "config": db.config.to_dict(),
        "skeleton": json.loads(serialize_skeleton(db.skeleton)),
        "clips": [
            {
                "id": c.id,
                "tag": c.tag,
                "row_start": c.row_start,
                "n_frames": c.n_frames,
                "terrain": c.terrain.to_dict() if c.terrain else None,
                "mirrored": c.mirrored,
                "source_id": c.source_id,
            }
            for c in db.clips
        ],
        "annotations": [
            {
                "skill": a.skill,
                "clip_index": a.clip_index,
                "s": a.start,
                "e": a.end,
                "entry_len": a.entry_len,
            }
            for a in db.annotations
        ],
        "stats": {
            "mean": [float(v) for v in db.stats.mean],
            "std": [float(v) for v in db.stats.std],
            "weights": list(db.stats.weights),
        },
        "sections": sections,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def _read_header(f):
    magic = f.read(4)
    if magic != MAGIC:
        raise ValidationError("not a motionweaver database (bad magic)")
    version, header_len = struct.unpack("<IQ", f.read(12))
    if version != VERSION:
        raise ValidationError(f"unsupported database version {version}")
    try:
        header = json.loads(f.read(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValidationError(f"database header is corrupt: {e}") from e
    return header


def load_database(path) -> MotionDatabase:
    with open(path, "rb") as f:
        header = _read_header(f)
        arrays = {}
        for sec in header["sections"]:
            arr, ok = _read_section(f, sec)
            if not ok:
                raise ValidationError(f"section {sec['name']}: checksum mismatch")
            arrays[sec["name"]] = arr

    searchable = np.unpackbits(
        arrays["searchable_bits"], count=header["n_rows"]
    ).astype(bool)
    db = MotionDatabase(
        skeleton=parse_skeleton(json.dumps(header["skeleton"])),
        fps=float(header["fps"]),
        config=EngineConfig.from_dict(header["config"]),
        clips=[
            CompiledClip(
                id=c["id"],
                tag=c["tag"],
                row_start=c["row_start"],
                n_frames=c["n_frames"],
                terrain=Box3.from_dict(c["terrain"]) if c["terrain"] else None,
                mirrored=c["mirrored"],
                source_id=c["source_id"],
            )
            for c in header["clips"]
        ],
        root_pos=arrays["root_pos"],
        root_quat=arrays["root_quat"],
        joint_angles=arrays["joint_angles"],
        features_raw=arrays["features_raw"],
        stats=FeatureStats(
            mean=np.asarray(header["stats"]["mean"]),
            std=np.asarray(header["stats"]["std"]),
            weights=tuple(header["stats"]["weights"]),
        ),
        searchable=searchable,
        row_clip=arrays["row_clip"],
        annotations=[
            CompiledAnnotation(
                skill=a["skill"],
                clip_index=a["clip_index"],
                start=a["s"],
                end=a["e"],
                entry_len=a["entry_len"],
                row_start=header["clips"][a["clip_index"]]["row_start"],
            )
            for a in header["annotations"]
        ],
    )
    return db


def _read_section(f, sec):
    dtype = np.dtype(sec["dtype"])
    shape = tuple(sec["shape"])
    nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
    blob = f.read(nbytes)
    ok = len(blob) == nbytes and zlib.crc32(blob) == sec["crc32"]
    arr = (
        np.frombuffer(blob, dtype=dtype).reshape(shape).copy()
        if len(blob) == nbytes
        else np.zeros(shape, dtype=dtype)
    )
    return arr, ok


def validate_file(path) -> list[str]:
    """File-level invariant checks; returns a list of problems (empty = ok)."""
    problems: list[str] = []
    try:
        with open(path, "rb") as f:
            header = _read_header(f)
            for sec in header["sections"]:
                _, ok = _read_section(f, sec)
                if not ok:
                    problems.append(f"section {sec['name']}: checksum mismatch or truncation")
    except (OSError, ValidationError, KeyError) as e:
        return [f"unreadable database: {e}"]
    if problems:
        return problems

    try:
        db = load_database(path)
    except ValidationError as e:
        return [f"database does not load: {e}"]

    n = db.n_rows
    if sum(c.n_frames for c in db.clips) != n:
        problems.append("clip table rows do not sum to n_rows")
    if np.any(db.stats.std <= 0):
        problems.append("stats: non-positive std")
    for a in db.annotations:
        clip = db.clips[a.clip_index]
        if a.start - a.entry_len < 0:
            problems.append(f"annotation {a.skill}: entry window escapes the clip start")
        if not (a.start <= a.end < clip.n_frames):
            problems.append(f"annotation {a.skill}: segment outside the clip")
    if db.searchable.any():
        feats = db.features_raw[db.searchable]
        if not np.all(np.isfinite(feats)):
            problems.append("non-finite feature rows flagged searchable")
    norms = np.linalg.norm(db.root_quat, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        problems.append("non-unit root quaternions")
    try:
        db._build_windows()
    except ValidationError as e:
        problems.append(str(e))
    return problems
