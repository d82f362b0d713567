import math

import numpy as np
import pytest

from motionweaver.composer import Engine, EngineError, UnknownSkillError, place_terrain
from motionweaver.geometry import PlanarTransform, quat_yaw, rotate_planar, wrap_angle

def run(engine, u, n, on_events=None):
    frames = []
    for _ in range(n):
        f, evs = engine.step(u)
        frames.append(f)
        if on_events:
            for e in evs:
                on_events(e)
    return frames


class TestLocomotion:
    def test_zero_command_stays_put(self, db):
        engine = Engine(db)
        frames = run(engine, np.zeros(2), 150)  # 5 s
        start = frames[0].root_pos[:2]
        for f in frames:
            assert np.linalg.norm(f.root_pos[:2] - start) < 0.05

    @pytest.mark.parametrize("speed", [1.0, 2.0])
    def test_speed_converges_to_command(self, db, speed):
        engine = Engine(db)
        u = np.array([speed, 0.0])
        run(engine, u, 60)  # warm-up
        frames = run(engine, u, 150)  # measure over 5 s
        p0 = frames[0].root_pos[:2]
        p1 = frames[-1].root_pos[:2]
        mean_speed = np.linalg.norm(p1 - p0) / (len(frames) / 30.0)
        assert abs(mean_speed - speed) < 0.1 * speed

    def test_turning_follows_heading(self, db):
        engine = Engine(db)
        run(engine, np.array([1.0, 0.0]), 90)
        u = rotate_planar(math.radians(90), np.array([1.0, 0.0]))
        frames = run(engine, u, 150)
        yaw = quat_yaw(frames[-1].root_quat)
        assert abs(wrap_angle(yaw - math.radians(90))) < math.radians(30)

    def test_event_stream_and_determinism(self, db):
        def trace(seed):
            engine = Engine(db, seed=seed)
            out = []
            events = []
            for k in range(240):
                u = np.array([1.0, 0.0]) if k < 120 else np.array([0.0, 2.0])
                f, evs = engine.step(u)
                out.append(np.concatenate([f.root_pos, f.root_quat, f.joint_angles]))
                events.extend(e.to_dict() for e in evs)
            return np.stack(out), events

        a, ea = trace(0)
        b, eb = trace(0)
        np.testing.assert_array_equal(a, b)
        assert ea == eb
        assert any(e["event"] == "searched" for e in ea)


class TestTransitions:
    def test_continuity_over_random_transitions(self, db, rng):
        engine = Engine(db)
        run(engine, np.array([1.0, 0.0]), 30)
        breaks = 0
        for trial in range(100):
            # random command changes force frequent transitions
            angle = rng.uniform(-math.pi, math.pi)
            speed = rng.choice([1.0, 2.0])
            u = speed * np.array([math.cos(angle), math.sin(angle)])
            pre = engine._current_root_planar()  # raw planar pose pre-step
            f, evs = engine.step(u)
            transitions = [e for e in evs if e.name == "transitioned"]
            if not transitions:
                continue
            breaks += 1
            # planar pose continuity: the new anchor maps the matched row
            # onto the pre-step planar pose exactly
            st = engine.state
            to_row = transitions[0].to_index
            anchored = st.anchor.apply(engine.db.root_pos[to_row, :2])
            assert np.max(np.abs(anchored - pre.t)) < 1e-12
            anchored_yaw = st.anchor.apply_yaw(engine.db.headings[to_row])
            assert abs(wrap_angle(anchored_yaw - pre.yaw)) < 1e-12
            # heading continuity is C0 through the blend offset
            raw_yaw = st.anchor.apply_yaw(engine.db.headings[st.cursor])
            blended_yaw = quat_yaw(f.root_quat)
            expect = wrap_angle(raw_yaw + st.blend.offset[1])
            assert abs(wrap_angle(blended_yaw - expect)) < 1e-9
        assert breaks >= 50

    def test_transition_to_same_row_is_identity(self, db):
        engine = Engine(db)
        run(engine, np.zeros(2), 40)  # settle; offsets snap to zero
        st = engine.state
        anchor_before = PlanarTransform(st.anchor.yaw, st.anchor.t.copy())
        cursor = st.cursor
        engine._transition_to(cursor)
        assert st.cursor == cursor
        assert st.blend.is_zero
        assert abs(wrap_angle(st.anchor.yaw - anchor_before.yaw)) < 1e-12
        assert np.max(np.abs(st.anchor.t - anchor_before.t)) < 1e-12

    def test_identity_local_pose_anchor(self, db):
        # When the clip-local planar pose at the target is the identity, the
        # new anchor equals the character's current world pose.
        engine = Engine(db)
        run(engine, np.array([1.0, 0.0]), 45)
        st = engine.state
        cur = engine._current_root_planar()
        target = None
        for c in engine.db.clips:
            rows = np.arange(c.row_start, c.row_end)
            local = engine.db.root_pos[rows, :2]
            yaws = engine.db.headings[rows]
            near = (np.abs(local) < 1e-9).all(axis=1) & (np.abs(yaws) < 1e-9)
            if near.any():
                target = int(rows[near.argmax()])
                break
        assert target is not None
        engine._transition_to(target)
        assert abs(wrap_angle(st.anchor.yaw - cur.yaw)) < 1e-9
        assert np.max(np.abs(st.anchor.t - cur.t)) < 1e-9

    def test_blend_decays_after_transition(self, db):
        engine = Engine(db, db.config.with_updates(blend_halflife_s=0.15))
        run(engine, np.array([2.0, 0.0]), 6)  # force an early jump from standing
        st = engine.state
        initial = float(np.max(np.abs(st.blend.offset)))
        run(engine, np.array([2.0, 0.0]), int(round(10 * 0.15 * 30)))
        assert float(np.max(np.abs(st.blend.offset))) < max(1e-3 * initial, 1e-6)


class TestSkillReplay:
    def request_and_capture(self, db, u=np.array([1.0, 0.0]), warm=75, config=None):
        engine = Engine(db, config)
        run(engine, u, warm)
        engine.request_skill("vault")
        log = []
        frames = []
        for _ in range(400):
            f, evs = engine.step(u)
            frames.append(f)
            log.extend(evs)
            if any(e.name == "skill_ended" for e in evs):
                break
        return engine, frames, log

    def test_full_cycle_events(self, db):
        engine, frames, log = self.request_and_capture(db)
        names = [e.name for e in log]
        assert "searched" in names
        assert "skill_started" in names
        assert "terrain_placed" in names
        assert "skill_ended" in names
        started = next(e for e in log if e.name == "skill_started")
        assert started.entry_lo <= started.entry_index <= started.entry_hi

    def test_entry_window_restriction(self, db):
        engine, frames, log = self.request_and_capture(db)
        searched = [e for e in log if e.name == "searched"]
        entry_searches = [e for e in searched if e.window == "entry(vault)"]
        assert len(entry_searches) == 1
        ann = db.annotations_for("vault")[0]
        idx = entry_searches[0].index
        anns = db.annotations_for("vault")
        assert any(a.entry_lo <= idx <= a.entry_hi for a in anns)

    def test_no_search_during_replay(self, db):
        engine, frames, log = self.request_and_capture(db)
        started_at = next(i for i, e in enumerate(log) if e.name == "skill_started")
        ended_at = next(i for i, e in enumerate(log) if e.name == "skill_ended")
        for e in log[started_at + 1 : ended_at]:
            assert e.name != "searched"

    def test_replay_verbatim_and_rigidly_anchored(self, db):
        engine, frames, log = self.request_and_capture(db)
        started = next(e for e in log if e.name == "skill_started")
        entry = started.entry_index
        end = started.end_index
        # Replay ticks emit rows entry+1 .. end (the matched entry frame is
        # aligned with the present and playback resumes after it).
        replay_len = end - entry
        replay_frames = frames[-replay_len:]
        # joint angles equal the clip verbatim once the blend has snapped to zero
        clip_rows = np.arange(entry + 1, end + 1)
        snapped = None
        for k, f in enumerate(replay_frames):
            row = clip_rows[k]
            if np.array_equal(f.joint_angles, engine.db.joint_angles[row]):
                snapped = k
                break
        assert snapped is not None and snapped < len(replay_frames) - 15
        for k in range(snapped, len(replay_frames)):
            row = clip_rows[k]
            np.testing.assert_array_equal(
                replay_frames[k].joint_angles, engine.db.joint_angles[row]
            )
            assert replay_frames[k].root_pos[2] == engine.db.root_pos[row, 2]
        # root path equals the clip path under one fixed planar transform
        anchor = engine.state.anchor
        for k, f in enumerate(replay_frames):
            row = clip_rows[k]
            expect = anchor.apply(engine.db.root_pos[row, :2])
            assert np.max(np.abs(f.root_pos[:2] - expect)) < 1e-9

    def test_terrain_relative_transform(self, db, rng):
        for trial in range(10):
            warm = 40 + int(rng.integers(0, 60))
            angle = rng.uniform(-math.pi, math.pi)
            u = rotate_planar(angle, np.array([1.0, 0.0]))
            engine, frames, log = self.request_and_capture(db, u=u, warm=warm)
            placed = next(e for e in log if e.name == "terrain_placed")
            started = next(e for e in log if e.name == "skill_started")
            row = started.entry_index
            ann = next(
                a
                for a in db.annotations_for("vault")
                if a.entry_lo <= row <= a.entry_hi
            )
            asset = db.clips[ann.clip_index].terrain
            # reference terrain-to-root relative SE(2) at the entry frame
            ref_root = PlanarTransform(float(db.headings[row]), db.root_pos[row, :2])
            rel_ref = ref_root.inverse().compose(
                PlanarTransform(asset.yaw, (asset.x, asset.y))
            )
            root = PlanarTransform(placed.root_yaw, (placed.root_x, placed.root_y))
            world = PlanarTransform(placed.terrain.yaw, (placed.terrain.x, placed.terrain.y))
            rel = root.inverse().compose(world)
            assert abs(wrap_angle(rel.yaw - rel_ref.yaw)) < 1e-12
            assert np.max(np.abs(rel.t - rel_ref.t)) < 1e-12
            assert placed.terrain.z == asset.z
            assert tuple(placed.terrain.size) == tuple(asset.size)

    def test_mode_sequence_grammar(self, db):
        engine = Engine(db)
        u = np.array([1.0, 0.0])
        modes = []
        run(engine, u, 60, on_events=None)
        engine.request_skill("vault")
        for _ in range(400):
            engine.step(u)
            modes.append(engine.state.mode)
        # locomotion* skill+ locomotion*
        joined = "".join("S" if m == "skill" else "L" for m in modes)
        assert "SL" in joined or joined.endswith("S") is False
        first_s = joined.index("S")
        last_s = joined.rindex("S")
        assert "L" not in joined[first_s : last_s + 1]

    def test_post_skill_forced_search(self, db):
        engine, frames, log = self.request_and_capture(db)
        u = np.array([1.0, 0.0])
        f, evs = engine.step(u)
        assert any(e.name == "searched" and e.window == "locomotion" for e in evs)

    def test_unknown_skill_rejected(self, db):
        engine = Engine(db)
        with pytest.raises(UnknownSkillError):
            engine.request_skill("backflip")

    def test_start_clip_config(self, db):
        clip_id = "walk_straight"
        engine = Engine(db, db.config.with_updates(start_clip=clip_id))
        assert engine.db.clip_of_row(engine.state.cursor).id == clip_id
        # session begins at the origin facing +x regardless of clip coords
        pose = engine._current_root_planar()
        assert np.max(np.abs(pose.t)) < 1e-12
        assert abs(pose.yaw) < 1e-12
        with pytest.raises(EngineError, match="start clip"):
            Engine(db, db.config.with_updates(start_clip="missing"))

    def test_reconfigure_mid_session(self, db):
        engine = Engine(db)
        run(engine, np.array([1.0, 0.0]), 30)
        engine.reconfigure(engine.config.set_key("blend.halflife_s", 0.1))
        assert engine.config.blend_halflife_s == 0.1
        # fps stays pinned to the database even if the config tries to move it
        engine.reconfigure(engine.config.set_key("engine.fps", 60.0))
        assert engine.config.fps == db.fps
        run(engine, np.array([1.0, 0.0]), 30)  # still steps cleanly

    def test_request_during_replay_rejected(self, db):
        engine, frames, log = self.request_and_capture(db)
        # rewind into a fresh replay to test the guard
        engine2 = Engine(db)
        run(engine2, np.array([1.0, 0.0]), 75)
        engine2.request_skill("vault")
        for _ in range(400):
            engine2.step(np.array([1.0, 0.0]))
            if engine2.state.mode == "skill":
                break
        assert engine2.state.mode == "skill"
        with pytest.raises(EngineError):
            engine2.request_skill("vault")

    def test_commands_ignored_mid_skill(self, db):
        engine, frames, log = self.request_and_capture(db)
        engine2 = Engine(db)
        run(engine2, np.array([1.0, 0.0]), 75)
        engine2.request_skill("vault")
        traces = []
        for variant in (np.array([1.0, 0.0]), np.array([-2.0, 1.0])):
            e = Engine(db)
            run(e, np.array([1.0, 0.0]), 75)
            e.request_skill("vault")
            out = []
            in_skill = False
            for _ in range(200):
                u = variant if in_skill else np.array([1.0, 0.0])
                f, evs = e.step(u)
                if any(ev.name == "skill_started" for ev in evs):
                    in_skill = True
                if in_skill:
                    out.append(f.root_pos.copy())
                if any(ev.name == "skill_ended" for ev in evs):
                    break
            traces.append(np.array(out))
        n = min(len(traces[0]), len(traces[1]))
        assert n > 10
        np.testing.assert_array_equal(traces[0][:n], traces[1][:n])


class TestPlaceTerrain:
    def test_identity_when_root_matches_reference(self, db):
        ann = db.annotations_for("vault")[0]
        asset = db.clips[ann.clip_index].terrain
        entry = ann.start_row
        root = PlanarTransform(float(db.headings[entry]), db.root_pos[entry, :2])
        inst = place_terrain(db, ann, entry, root)
        assert abs(inst.x - asset.x) < 1e-12
        assert abs(inst.y - asset.y) < 1e-12
        assert abs(wrap_angle(inst.yaw - asset.yaw)) < 1e-12

    def test_rotated_root_rotates_terrain(self, db):
        ann = db.annotations_for("vault")[0]
        entry = ann.start_row
        ref_root = PlanarTransform(float(db.headings[entry]), db.root_pos[entry, :2])
        spin = PlanarTransform(math.pi / 2, (0.0, 0.0))
        inst0 = place_terrain(db, ann, entry, ref_root)
        inst1 = place_terrain(db, ann, entry, spin.compose(ref_root))
        assert abs(wrap_angle(inst1.yaw - inst0.yaw - math.pi / 2)) < 1e-12
        rotated = rotate_planar(math.pi / 2, np.array([inst0.x, inst0.y]))
        assert np.max(np.abs(rotated - np.array([inst1.x, inst1.y]))) < 1e-12

    def test_missing_asset(self, db):
        from motionweaver.matcher import CompiledAnnotation

        loco_idx = next(i for i, c in enumerate(db.clips) if c.terrain is None)
        fake = CompiledAnnotation(
            skill="x", clip_index=loco_idx, start=5, end=10, entry_len=2,
            row_start=db.clips[loco_idx].row_start,
        )
        with pytest.raises(EngineError, match="terrain"):
            place_terrain(db, fake, fake.start_row, PlanarTransform())
