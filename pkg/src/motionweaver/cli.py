"""Command-line entry points.

Subcommands: ``synthetic``, ``db build``, ``synthesize``, ``validate``,
``stats``, ``serve``. The MOTIONWEAVER_DB environment variable supplies the
default database path where one is expected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import archive, synthesis
from .config import EngineConfig
from .matcher import build_database
from .skeleton import (
    ValidationError,
    parse_annotations,
    parse_clip,
    parse_skeleton,
    serialize_annotations,
    serialize_clip,
    serialize_skeleton,
)


def _db_path(args) -> str:
    path = args.db or os.environ.get("MOTIONWEAVER_DB")
    if not path:
        raise SystemExit("no database given: pass --db or set MOTIONWEAVER_DB")
    return path


def cmd_synthetic(args) -> int:
    from . import synthetic

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    skel, clips, anns = synthetic.bundle()
    (out / "skeleton.json").write_text(serialize_skeleton(skel))
    for clip in clips:
        (out / f"{clip.id}.clip.json").write_text(serialize_clip(clip))
    (out / "annotations.json").write_text(serialize_annotations(anns))
    print(f"wrote {len(clips)} clips + skeleton + annotations to {out}")
    return 0


def cmd_db_build(args) -> int:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    if args.bundled:
        from . import synthetic

        skel, clips, anns = synthetic.bundle()
    else:
        if not args.skeleton or not args.clips:
            print("db build needs --skeleton and --clips (or --bundled)", file=sys.stderr)
            return 2
        skel = parse_skeleton(Path(args.skeleton).read_text())
        clips = [parse_clip(Path(p).read_text(), skel) for p in args.clips]
        anns = (
            parse_annotations(Path(args.annotations).read_text())
            if args.annotations
            else []
        )
    db = build_database(skel, clips, anns, config)
    archive.save_database(db, args.out)
    digest = hashlib.sha256(Path(args.out).read_bytes()).hexdigest()
    print(
        f"built {args.out}: {db.n_rows} rows ({int(db.searchable.sum())} searchable), "
        f"skills {db.skills}, sha256 {digest[:16]}"
    )
    return 0


def cmd_synthesize(args) -> int:
    db = archive.load_database(_db_path(args))
    skills = args.skills.split(",") if args.skills else db.skills
    records = synthesis.synthesize_dataset(
        db,
        skills,
        episodes=args.episodes,
        seed=args.seed,
        duration_mode=args.duration_mode,
        workers=args.workers,
    )
    synthesis.write_dataset(records, args.out)
    print(f"wrote {len(records)} episodes to {args.out}")
    return 0


def cmd_validate(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        problems = synthesis.validate_dataset(path)
        kind = "dataset"
    else:
        problems = archive.validate_file(path)
        kind = "database"
    if problems:
        for p in problems:
            print(f"INVALID ({kind}): {p}", file=sys.stderr)
        return 1
    print(f"{kind} ok: {path}")
    return 0


def cmd_stats(args) -> int:
    records = synthesis.read_dataset(args.dataset)
    print(json.dumps(synthesis.dataset_stats(records), indent=1))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    db = archive.load_database(_db_path(args))
    ui_dir = None
    if args.ui:
        ui_dir = args.ui_dir or str(Path(__file__).resolve().parents[2] / "frontend")
    serve(db, host=args.host, port=args.port, ui_dir=ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motionweaver", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synthetic", help="export the bundled synthetic clips")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_synthetic)

    dbp = sub.add_parser("db", help="database operations")
    dbsub = dbp.add_subparsers(dest="db_command", required=True)
    bp = dbsub.add_parser("build", help="compile clips into a database archive")
    bp.add_argument("--skeleton")
    bp.add_argument("--clips", nargs="*")
    bp.add_argument("--annotations")
    bp.add_argument("--bundled", action="store_true", help="use the bundled synthetic clips")
    bp.add_argument("--config", help="JSON config file with dotted keys")
    bp.add_argument("--out", required=True)
    bp.set_defaults(fn=cmd_db_build)

    syp = sub.add_parser("synthesize", help="generate a trajectory dataset")
    syp.add_argument("--db")
    syp.add_argument("--skills", help="comma-separated skill ids (default: all)")
    syp.add_argument("--episodes", type=int, required=True)
    syp.add_argument("--seed", type=int, default=0)
    syp.add_argument("--out", required=True)
    syp.add_argument("--duration-mode", choices=("grid", "uniform"), default="grid")
    syp.add_argument("--workers", type=int, default=1)
    syp.set_defaults(fn=cmd_synthesize)

    vp = sub.add_parser("validate", help="check a database file or dataset directory")
    vp.add_argument("path")
    vp.set_defaults(fn=cmd_validate)

    st = sub.add_parser("stats", help="distribution report for a dataset")
    st.add_argument("--dataset", required=True)
    st.set_defaults(fn=cmd_stats)

    sv = sub.add_parser("serve", help="run the interactive session service")
    sv.add_argument("--db")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8080)
    sv.add_argument("--ui", action="store_true", help="also serve the viewer bundle")
    sv.add_argument("--ui-dir")
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
