import json
import os
import time

import pytest

from rigidrecover.cli import main
from rigidrecover.scene_io import load_scene


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def report_without_timing(path):
    raw = json.loads(open(path).read())
    raw.pop("timing")
    return raw


class TestFeasibilityCommand:
    def test_reference_table_rows(self, capsys):
        t0 = time.perf_counter()
        code, out, _ = run(capsys, "feasibility", "--paper-table")
        assert time.perf_counter() - t0 < 1.0
        assert code == 0
        rows = [l.split() for l in out.strip().splitlines()[1:]]
        assert len(rows) == 7
        parsed = [(int(r[0]), int(r[1]), int(r[2]), r[3], int(r[4]), int(r[5]), r[7])
                  for r in rows]
        assert parsed == [
            (4, 0, 2, "perspective", 17, 16, "infeasible"),
            (4, 0, 3, "perspective", 23, 24, "overdetermined"),
            (5, 0, 2, "perspective", 20, 20, "critical"),
            (3, 1, 3, "perspective", 24, 24, "critical"),
            (0, 6, 3, "perspective", 35, 36, "overdetermined"),
            (3, 0, 3, "orthogonal", 18, 18, "critical"),
            (4, 0, 2, "orthogonal", 16, 16, "critical"),
        ]

    def test_single_instance_json(self, capsys):
        code, out, _ = run(
            capsys, "feasibility", "--points", "5", "--frames", "2",
            "--projection", "perspective", "--json",
        )
        assert code == 0
        row = json.loads(out)["rows"][0]
        assert (row["dof"], row["info"], row["verdict"]) == (20, 20, "critical")

    def test_invalid_instance_exits_2(self, capsys):
        code, _, err = run(capsys, "feasibility", "--points", "0", "--frames", "2")
        assert code == 2
        assert "feature" in err

    def test_unknown_flag_exits_2_with_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["feasibility", "--no-such-flag"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err


class TestSynthCommand:
    def test_writes_loadable_scene(self, tmp_path, capsys):
        out = tmp_path / "scene.json"
        code, _, _ = run(
            capsys, "synth", "--n-points", "4", "--n-frames", "2",
            "--projection", "orthogonal", "--seed", "3", "--out", str(out),
        )
        assert code == 0
        scene = load_scene(out)
        assert len(scene.body.labels) == 4
        assert len(scene.observations) == 2

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
        run(capsys, "synth", "--n-points", "3", "--n-frames", "2",
            "--projection", "orthogonal", "--seed", "1", "--out", str(a))
        monkeypatch.setenv("RIGID_RECOVER_SEED", "2")
        run(capsys, "synth", "--n-points", "3", "--n-frames", "2",
            "--projection", "orthogonal", "--seed", "1", "--out", str(b))
        monkeypatch.delenv("RIGID_RECOVER_SEED")
        run(capsys, "synth", "--n-points", "3", "--n-frames", "2",
            "--projection", "orthogonal", "--seed", "2", "--out", str(c))
        assert a.read_bytes() != b.read_bytes()
        assert b.read_bytes() == c.read_bytes()


class TestRecoverOrtho:
    def synth(self, capsys, tmp_path, n_points, n_frames, seed=7):
        path = tmp_path / "scene.json"
        run(capsys, "synth", "--n-points", str(n_points), "--n-frames",
            str(n_frames), "--projection", "orthogonal", "--seed", str(seed),
            "--out", str(path))
        return path

    def test_end_to_end_round_trip(self, tmp_path, capsys):
        scene = self.synth(capsys, tmp_path, 4, 3)
        report_path = tmp_path / "report.json"
        code, out, _ = run(capsys, "recover-ortho", "--config", "p4f3",
                           "--scene", str(scene), "--out", str(report_path))
        assert code == 0
        report = json.loads(report_path.read_text())
        sols = report["results"]["solutions"]
        assert sols and all(s["residual"] < 1e-8 for s in sols)
        assert "p4f3" in out

    def test_two_frame_five_point_conditioning_reported(self, tmp_path, capsys):
        # two orthogonal frames underdetermine the squared-length system;
        # the command reports the conditioning failure and exits 1
        scene = self.synth(capsys, tmp_path, 5, 2)
        report_path = tmp_path / "report.json"
        code, _, err = run(capsys, "recover-ortho", "--config", "p5f2",
                           "--scene", str(scene), "--out", str(report_path))
        assert code == 1
        report = json.loads(report_path.read_text())
        assert report["results"]["error"]["type"] == "IllConditioned"
        assert "IllConditioned" in err

    def test_reports_are_deterministic(self, tmp_path, capsys):
        from rigidrecover.scene_io import dumps_canonical

        scene = self.synth(capsys, tmp_path, 3, 3)
        out = tmp_path / "report.json"
        argv = ["recover-ortho", "--config", "p3f3", "--scene", str(scene),
                "--out", str(out)]
        run(capsys, *argv)
        first = report_without_timing(out)
        run(capsys, *argv)
        second = report_without_timing(out)
        assert dumps_canonical(first) == dumps_canonical(second)

    def test_missing_scene_exits_2(self, capsys):
        code, _, err = run(capsys, "recover-ortho", "--config", "p3f3",
                           "--scene", "/nonexistent.json")
        assert code == 2

    def test_wrong_shape_exits_2(self, tmp_path, capsys):
        scene = self.synth(capsys, tmp_path, 4, 3)
        code, _, _ = run(capsys, "recover-ortho", "--config", "p3f3",
                         "--scene", str(scene))
        assert code == 2


class TestRecoverPersp:
    def test_end_to_end(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        run(capsys, "synth", "--n-points", "5", "--n-frames", "2",
            "--projection", "perspective", "--seed", "1", "--out", str(scene))
        report_path = tmp_path / "report.json"
        code, out, _ = run(capsys, "recover-persp", "--scene", str(scene),
                           "--out", str(report_path))
        assert code == 0
        report = json.loads(report_path.read_text())
        sols = report["results"]["solutions"]
        assert sols and all(s["residual"] < 1e-9 for s in sols)

    def test_wrong_projection_exits_2(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        run(capsys, "synth", "--n-points", "5", "--n-frames", "2",
            "--projection", "orthogonal", "--seed", "1", "--out", str(scene))
        code, _, _ = run(capsys, "recover-persp", "--scene", str(scene))
        assert code == 2


class TestAmbiguity:
    def test_end_to_end_default_center(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        run(capsys, "synth", "--n-points", "4", "--n-frames", "2",
            "--projection", "perspective", "--seed", "1", "--out", str(scene))
        report_path = tmp_path / "report.json"
        code, out, _ = run(capsys, "ambiguity", "--scene", str(scene),
                           "--theta-span", "0.05", "--grid-points", "11",
                           "--out", str(report_path))
        assert code == 0
        report = json.loads(report_path.read_text())
        samples = report["results"]["samples"]
        assert len(samples) >= 5
        assert all(s["residual"] < 1e-8 for s in samples)
        assert report["results"]["max_pairwise_shape_distance"] > 1e-3

    def test_out_of_arc_center_exits_1(self, tmp_path, capsys):
        scene = tmp_path / "scene.json"
        run(capsys, "synth", "--n-points", "4", "--n-frames", "2",
            "--projection", "perspective", "--seed", "1", "--out", str(scene))
        code, _, _ = run(capsys, "ambiguity", "--scene", str(scene),
                         "--theta-center", "3.1", "--theta-span", "0.01",
                         "--grid-points", "3")
        assert code == 1
