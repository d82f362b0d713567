import hashlib
import json
import subprocess
import sys
import time
import urllib.request

import pytest

from motionweaver.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestDbBuild:
    def test_bundled_build_deterministic_checksum(self, tmp_path, capsys):
        db1 = tmp_path / "a.mwdb"
        db2 = tmp_path / "b.mwdb"
        assert run_cli("db", "build", "--bundled", "--out", str(db1)) == 0
        assert run_cli("db", "build", "--bundled", "--out", str(db2)) == 0
        assert (
            hashlib.sha256(db1.read_bytes()).digest()
            == hashlib.sha256(db2.read_bytes()).digest()
        )

    def test_build_from_exported_files(self, tmp_path):
        src = tmp_path / "clips"
        assert run_cli("synthetic", "--out", str(src)) == 0
        clips = sorted(str(p) for p in src.glob("*.clip.json"))
        out = tmp_path / "db.mwdb"
        code = run_cli(
            "db",
            "build",
            "--skeleton",
            str(src / "skeleton.json"),
            "--clips",
            *clips,
            "--annotations",
            str(src / "annotations.json"),
            "--out",
            str(out),
        )
        assert code == 0 and out.exists()
        assert run_cli("validate", str(out)) == 0

    def test_validate_corrupted_archive(self, tmp_path, capsys):
        db = tmp_path / "db.mwdb"
        assert run_cli("db", "build", "--bundled", "--out", str(db)) == 0
        blob = bytearray(db.read_bytes())
        blob[-64] ^= 0xFF
        db.write_bytes(bytes(blob))
        assert run_cli("validate", str(db)) == 1
        err = capsys.readouterr().err
        assert "checksum" in err


class TestSynthesizePipeline:
    def test_synthesize_stats_validate(self, tmp_path, capsys):
        db = tmp_path / "db.mwdb"
        assert run_cli("db", "build", "--bundled", "--out", str(db)) == 0
        ds = tmp_path / "ds"
        code = run_cli(
            "synthesize",
            "--db",
            str(db),
            "--skills",
            "vault",
            "--episodes",
            "4",
            "--seed",
            "1",
            "--out",
            str(ds),
        )
        assert code == 0
        assert run_cli("validate", str(ds)) == 0
        capsys.readouterr()
        assert run_cli("stats", "--dataset", str(ds)) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["episodes"] == 4

    def test_missing_db_message(self, monkeypatch):
        monkeypatch.delenv("MOTIONWEAVER_DB", raising=False)
        with pytest.raises(SystemExit, match="MOTIONWEAVER_DB"):
            run_cli("synthesize", "--episodes", "1", "--out", "/tmp/x")

    def test_env_var_default(self, tmp_path, monkeypatch):
        db = tmp_path / "db.mwdb"
        assert run_cli("db", "build", "--bundled", "--out", str(db)) == 0
        monkeypatch.setenv("MOTIONWEAVER_DB", str(db))
        ds = tmp_path / "ds"
        assert run_cli("synthesize", "--episodes", "1", "--out", str(ds)) == 0


class TestServe:
    def test_ephemeral_port_printed_and_serves(self, tmp_path):
        db = tmp_path / "db.mwdb"
        assert run_cli("db", "build", "--bundled", "--out", str(db)) == 0
        proc = subprocess.Popen(
            [sys.executable, "-m", "motionweaver.cli", "serve", "--db", str(db), "--port", "0"],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        try:
            line = proc.stdout.readline()
            assert "serving on" in line
            port = int(line.strip().rsplit(":", 1)[1])
            deadline = time.time() + 10
            info = None
            while time.time() < deadline:
                try:
                    with urllib.request.urlopen(
                        f"http://127.0.0.1:{port}/info", timeout=1
                    ) as r:
                        info = json.load(r)
                    break
                except OSError:
                    time.sleep(0.2)
            assert info is not None and info["skills"] == ["vault"]
        finally:
            proc.terminate()
            proc.wait(timeout=10)
