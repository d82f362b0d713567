import numpy as np
import pytest

from motionweaver import synthetic
from motionweaver.archive import load_database, save_database, validate_file
from motionweaver.config import EngineConfig
from motionweaver.features import DIM
from motionweaver.kdtree import build_kdtree
from motionweaver.kernels import get_backend
from motionweaver.matcher import (
    LOCOMOTION_WINDOW,
    build_database,
    entry_window,
    search,
    search_bruteforce,
    should_search,
)
from motionweaver.skeleton import ValidationError


def kernels_for(backend):
    try:
        return get_backend(backend)
    except ImportError:  # pragma: no cover
        pytest.skip("native backend unavailable")


def run_kd(impl, tree, w, q, exclude=-1):
    return impl.kd_query(
        tree.points, tree.perm, tree.left, tree.right, tree.start, tree.end,
        tree.lo, tree.hi, w, q, exclude,
    )


class TestKernelExactness:
    @pytest.mark.parametrize("n,leaf", [(100, 1), (2000, 2), (2000, 16), (10000, 7)])
    def test_kd_equals_brute_random(self, n, leaf, rng):
        X = np.ascontiguousarray(rng.normal(size=(n, DIM)))
        w = np.ones(DIM)
        tree = build_kdtree(X, leaf_size=leaf)
        native = kernels_for("native")
        fallback = kernels_for("fallback")
        for _ in range(60):
            q = np.ascontiguousarray(rng.normal(size=DIM))
            ib, db_ = native.brute_query(X, w, q)
            ik, dk = run_kd(native, tree, w, q)
            assert (ib, db_) == (ik, dk)
            ibf, dbf = fallback.brute_query(X, w, q)
            ikf, dkf = run_kd(fallback, tree, w, q)
            assert (ibf, dbf) == (ib, db_)
            assert (ikf, dkf) == (ik, dk)

    def test_weighted_distances(self, rng):
        X = np.ascontiguousarray(rng.normal(size=(500, DIM)))
        w = np.ones(DIM)
        w[:12] = 2.5
        w[24:] = 0.3
        tree = build_kdtree(X)
        native = kernels_for("native")
        for _ in range(40):
            q = np.ascontiguousarray(rng.normal(size=DIM))
            ib, db_ = native.brute_query(X, w, q)
            ik, dk = run_kd(native, tree, w, q)
            assert (ib, db_) == (ik, dk)
            # independent oracle: numpy argmin over exact weighted distances
            ref = np.argmin(((X - q) ** 2 * w).sum(axis=1))
            assert ib == ref

    def test_tie_break_lowest_index(self, rng):
        X = np.ascontiguousarray(rng.normal(size=(64, DIM)))
        X[41] = X[7]  # duplicate row: both optimal for q = X[7]
        w = np.ones(DIM)
        q = np.ascontiguousarray(X[7].copy())
        tree = build_kdtree(X, leaf_size=4)
        for backend in ("native", "fallback"):
            impl = kernels_for(backend)
            ib, db_ = impl.brute_query(X, w, q)
            ik, dk = run_kd(impl, tree, w, q)
            assert ib == 7 and ik == 7
            assert db_ == 0.0 and dk == 0.0

    def test_exclude(self, rng):
        X = np.ascontiguousarray(rng.normal(size=(64, DIM)))
        w = np.ones(DIM)
        q = np.ascontiguousarray(X[20].copy())
        tree = build_kdtree(X, leaf_size=4)
        for backend in ("native", "fallback"):
            impl = kernels_for(backend)
            ib, _ = impl.brute_query(X, w, q, 20)
            ik, _ = run_kd(impl, tree, w, q, 20)
            assert ib != 20 and ik == ib

    def test_single_point_window(self):
        X = np.ascontiguousarray(np.ones((1, DIM)))
        tree = build_kdtree(X)
        for backend in ("native", "fallback"):
            impl = kernels_for(backend)
            i, d = run_kd(impl, tree, np.ones(DIM), np.ascontiguousarray(np.zeros(DIM)))
            assert i == 0 and abs(d - DIM) < 1e-12

    def test_duplicate_heavy_data(self, rng):
        # Many identical points stress the zero-extent leaf rule.
        X = np.repeat(rng.normal(size=(5, DIM)), 40, axis=0)
        X = np.ascontiguousarray(X)
        tree = build_kdtree(X, leaf_size=8)
        native = kernels_for("native")
        for _ in range(20):
            q = np.ascontiguousarray(rng.normal(size=DIM))
            ib, db_ = native.brute_query(X, np.ones(DIM), q)
            ik, dk = run_kd(native, tree, np.ones(DIM), q)
            assert (ib, db_) == (ik, dk)


class TestBuildDatabase:
    def test_mirror_doubles_rows(self, skel):
        clip = synthetic.locomotion_clip("w", 1.0, 100 / 30.0)  # 100 frames
        assert clip.n_frames == 100
        db = build_database(skel, [clip], [])
        assert db.n_rows == 200
        # per copy, the last 30 frames (1 s at 30 fps) are unsearchable
        assert db.searchable.sum() == 140
        for c in db.clips:
            seg = db.searchable[c.row_start : c.row_end]
            assert seg[:70].all() and not seg[70:].any()

    def test_entry_window_rows(self, db):
        ann = db.annotations_for("vault")[0]
        assert ann.entry_hi - ann.entry_lo == 30  # 31 candidate rows per copy
        rows = db.window_rows(entry_window("vault"))
        assert rows.size == 62  # both mirror copies
        assert np.all(np.diff(rows) > 0)

    def test_deterministic_rebuild(self, bundle):
        skel, clips, anns = bundle
        db1 = build_database(skel, clips, anns)
        db2 = build_database(skel, clips, anns)
        np.testing.assert_array_equal(db1.features_raw, db2.features_raw)
        np.testing.assert_array_equal(db1.features_std, db2.features_std)

    def test_requires_locomotion(self, skel):
        vclip, ann = synthetic.vault_clip()
        with pytest.raises(ValidationError, match="locomotion"):
            build_database(skel, [vclip], [ann])

    def test_unknown_annotation_clip(self, skel):
        clip = synthetic.standing_clip()
        from motionweaver.skeleton import SkillAnnotation

        with pytest.raises(ValidationError, match="unknown clip"):
            build_database(skel, [clip], [SkillAnnotation("nope", 5, 10, 2)])

    def test_mixed_fps_rejected(self, skel):
        a = synthetic.standing_clip()
        b = synthetic.locomotion_clip("w", 1.0, 2.0)
        b.fps = 60.0
        with pytest.raises(ValidationError, match="fps"):
            build_database(skel, [a, b], [])


class TestSearch:
    def test_self_query_returns_row(self, db, rng):
        rows = db.window_rows(LOCOMOTION_WINDOW)
        for r in rng.choice(rows, 25, replace=False):
            res = search(db, db.features_raw[r], LOCOMOTION_WINDOW)
            ref = search_bruteforce(db, db.features_raw[r], LOCOMOTION_WINDOW)
            assert res.index == ref.index and res.distance2 == ref.distance2
            assert res.distance2 == 0.0

    def test_accel_equals_brute_on_database(self, db, rng):
        for window in (LOCOMOTION_WINDOW, entry_window("vault")):
            for _ in range(100):
                q = rng.normal(0.0, 1.0, DIM) * db.stats.std + db.stats.mean
                a = search(db, q, window)
                b = search_bruteforce(db, q, window)
                assert a.index == b.index and a.distance2 == b.distance2

    def test_result_invariant_to_unsearchable_rows(self, bundle, rng):
        # Appending a clip whose rows are unsearchable cannot change results.
        skel, clips, anns = bundle
        db1 = build_database(skel, clips, anns)
        q = rng.normal(size=DIM) * db1.stats.std + db1.stats.mean
        r1 = search_bruteforce(db1, q, LOCOMOTION_WINDOW)
        # A clip shorter than the 1 s horizon: zero searchable rows.
        short = synthetic.locomotion_clip("short", 1.0, 0.6)
        db2 = build_database(skel, clips + [short], anns)
        assert db2.n_rows > db1.n_rows
        r2 = search_bruteforce(db2, q, LOCOMOTION_WINDOW)
        assert (
            db1.window_rows(LOCOMOTION_WINDOW).size
            == db2.window_rows(LOCOMOTION_WINDOW).size
        )
        assert r2.index == r1.index and r2.distance2 == r1.distance2

    def test_empty_window_rejected(self, db):
        with pytest.raises(ValidationError, match="no window"):
            search(db, np.zeros(DIM), entry_window("backflip"))


class TestShouldSearch:
    CFG = EngineConfig()

    def test_period_elapsed(self):
        M = self.CFG.search_period_frames
        assert should_search(M, np.zeros(2), np.zeros(2), 0.0, 0.0, self.CFG)
        assert not should_search(M - 1, np.zeros(2), np.zeros(2), 0.0, 0.0, self.CFG)

    def test_command_step(self):
        u0 = np.array([1.0, 0.0])
        u1 = np.array([0.0, 1.0])
        assert should_search(1, u1, u0, np.pi / 2, 0.0, self.CFG)

    def test_small_jitter_ignored(self):
        u0 = np.array([1.0, 0.0])
        u1 = np.array([1.01, 0.0])
        assert not should_search(1, u1, u0, 0.0, 0.0, self.CFG)

    def test_heading_change_triggers(self):
        u0 = np.array([1.0, 0.0])
        u1 = np.array([np.cos(0.5), np.sin(0.5)])  # same speed, 28 degrees
        assert should_search(1, u1, u0, 0.5, 0.0, self.CFG.with_updates(velocity_retrigger=10.0))


class TestArchive:
    def test_round_trip_bit_exact(self, db, tmp_path):
        path = tmp_path / "db.mwdb"
        save_database(db, path)
        back = load_database(path)
        np.testing.assert_array_equal(back.features_raw, db.features_raw)
        np.testing.assert_array_equal(back.features_std, db.features_std)
        np.testing.assert_array_equal(back.root_pos, db.root_pos)
        np.testing.assert_array_equal(back.root_quat, db.root_quat)
        np.testing.assert_array_equal(back.joint_angles, db.joint_angles)
        np.testing.assert_array_equal(back.searchable, db.searchable)
        np.testing.assert_array_equal(back.stats.mean, db.stats.mean)
        np.testing.assert_array_equal(back.stats.std, db.stats.std)
        assert [c.id for c in back.clips] == [c.id for c in db.clips]
        assert back.config == db.config
        assert validate_file(path) == []
        # identical bytes when saved again
        path2 = tmp_path / "db2.mwdb"
        save_database(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_corruption_detected(self, db, tmp_path):
        path = tmp_path / "db.mwdb"
        save_database(db, path)
        blob = bytearray(path.read_bytes())
        blob[-100] ^= 0xFF  # flip a bit inside the last section
        path.write_bytes(bytes(blob))
        problems = validate_file(path)
        assert problems and any("checksum" in p for p in problems)
        with pytest.raises(ValidationError, match="checksum"):
            load_database(path)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.mwdb"
        p.write_bytes(b"NOPE" + b"\0" * 32)
        assert any("magic" in w for w in validate_file(p))

    def test_search_identical_after_reload(self, db, tmp_path, rng):
        path = tmp_path / "db.mwdb"
        save_database(db, path)
        back = load_database(path)
        for _ in range(25):
            q = rng.normal(size=DIM) * db.stats.std + db.stats.mean
            a = search(db, q, LOCOMOTION_WINDOW)
            b = search(back, q, LOCOMOTION_WINDOW)
            assert a.index == b.index and a.distance2 == b.distance2
