import json

import numpy as np
import pytest

from boundarymap.core import InvalidInputError
from boundarymap.formats import read_replay, read_scene, write_replay, write_scene
from boundarymap.runner import METRICS_HEADER
from boundarymap.simgen import corridor_scene, dynamic_scene, replay_records


def small_records():
    rng = np.random.default_rng(0)
    out = []
    for tick in (0, 2, 5):
        pose = rng.uniform(-1, 1, 3)
        points = rng.uniform(-2, 2, size=(rng.integers(0, 6), 3))
        out.append((tick, pose, points))
    return out


class TestReplayRoundTrip:
    @pytest.mark.parametrize("encoding", ["text", "npz"])
    def test_round_trip(self, tmp_path, encoding):
        records = small_records()
        n = write_replay(iter(records), tmp_path / "rp", encoding=encoding)
        assert n == 3
        back = list(read_replay(tmp_path / "rp"))
        assert [r.tick for r in back] == [0, 2, 5]
        for (tick, pose, points), rec in zip(records, back):
            assert np.array_equal(rec.pose, pose)
            assert np.array_equal(rec.points, points.reshape(-1, 3))

    def test_scene_replay_round_trip(self, tmp_path):
        scene = corridor_scene(length=10.0, n_scans=5)
        write_replay(replay_records(scene), tmp_path / "rp")
        back = list(read_replay(tmp_path / "rp"))
        for rec, (tick, pose, points) in zip(back, replay_records(scene)):
            assert rec.tick == tick
            assert np.array_equal(rec.points, points)

    def test_sensor_frame_normalized(self, tmp_path):
        write_replay(iter(small_records()), tmp_path / "rp")
        header = json.loads((tmp_path / "rp" / "header.json").read_text())
        header["frame"] = "sensor"
        (tmp_path / "rp" / "header.json").write_text(json.dumps(header))
        shifted = list(read_replay(tmp_path / "rp"))
        plain = small_records()
        for rec, (_, pose, points) in zip(shifted, plain):
            if len(points):
                assert np.allclose(rec.points, points + pose)


class TestReplayValidation:
    def test_missing_header(self, tmp_path):
        with pytest.raises(InvalidInputError):
            list(read_replay(tmp_path))

    def test_count_mismatch(self, tmp_path):
        write_replay(iter(small_records()), tmp_path / "rp")
        header_path = tmp_path / "rp" / "header.json"
        header = json.loads(header_path.read_text())
        header["scan_count"] = 7
        header_path.write_text(json.dumps(header))
        with pytest.raises(InvalidInputError):
            list(read_replay(tmp_path / "rp"))

    def test_nonmonotonic_ticks(self, tmp_path):
        write_replay(iter(small_records()), tmp_path / "rp")
        scan0 = tmp_path / "rp" / "scans" / "000000.txt"
        scan0.write_text(scan0.read_text().replace("tick 0", "tick 9"))
        with pytest.raises(InvalidInputError):
            list(read_replay(tmp_path / "rp"))

    def test_malformed_scan_file(self, tmp_path):
        write_replay(iter(small_records()), tmp_path / "rp")
        (tmp_path / "rp" / "scans" / "000000.txt").write_text("garbage\n")
        with pytest.raises(InvalidInputError):
            list(read_replay(tmp_path / "rp"))


class TestSceneFiles:
    @pytest.mark.parametrize("factory", [corridor_scene, dynamic_scene])
    def test_round_trip(self, tmp_path, factory):
        scene = factory()
        path = tmp_path / "scene.txt"
        write_scene(scene, path)
        back = read_scene(path)
        assert back.name == scene.name
        assert back.extent == scene.extent
        assert back.boxes == scene.boxes
        assert back.sensor == scene.sensor
        assert back.poses == [tuple(p) for p in scene.poses]
        assert back.moving == scene.moving
        assert back.seed == scene.seed

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "scene.txt"
        path.write_text(
            "# a scene\nscene v1\nname t\n\n"
            "extent 0 0 0 4 4 4\n"
            "sensor 2.0 4 2 -0.5 0.5 0.0 0\n"
            "pose 1 1 1  # trailing comment\n"
        )
        scene = read_scene(path)
        assert scene.name == "t"
        assert scene.poses == [(1.0, 1.0, 1.0)]

    def test_missing_sensor_rejected(self, tmp_path):
        path = tmp_path / "scene.txt"
        path.write_text("scene v1\nextent 0 0 0 1 1 1\n")
        with pytest.raises(InvalidInputError):
            read_scene(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "scene.txt"
        path.write_text("scene v1\nextent 0 0 zero 1 1 1\nsensor 2 4 2 0 0 0 0\n")
        with pytest.raises(InvalidInputError):
            read_scene(path)


class TestGoldenHeaders:
    def test_metrics_header_pinned(self):
        assert METRICS_HEADER == (
            "tick,raycast_ms,boundary_update_ms,localgrid_update_ms,slid,"
            "skipped_points,boundary_voxels,columns,estimated_bytes"
        )

    def test_replay_header_schema(self, tmp_path):
        write_replay(iter(small_records()), tmp_path / "rp")
        header = json.loads((tmp_path / "rp" / "header.json").read_text())
        assert header == {
            "version": 1,
            "scan_count": 3,
            "frame": "world",
            "encoding": "text",
        }
