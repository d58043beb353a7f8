import json

import pytest

from boundarymap.cli import main
from boundarymap.config import RunConfig
from boundarymap.core import InvalidInputError
from boundarymap.runner import METRICS_HEADER


def run_cli(*args):
    return main([str(a) for a in args])


def small_corridor_args(tmp_path):
    cfg = {
        "resolution": 0.2,
        "scene": "corridor",
        "scans": 30,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    return cfg_path


class TestConfig:
    def test_defaults_validate(self):
        params = RunConfig(scene="corridor").prob_params()
        assert params.l_hit > 0 > params.l_miss

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"resolutionn": 0.2}')
        with pytest.raises(InvalidInputError):
            RunConfig.from_file(p)

    def test_invalid_json_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(InvalidInputError):
            RunConfig.from_file(p)

    def test_local_dims_from_meters(self):
        cfg = RunConfig(resolution=0.2, local_size=(8.0, 8.0, 4.0))
        assert cfg.local_dims() == (40, 40, 20)


class TestReplayCommand:
    def test_metrics_and_exports(self, tmp_path, capsys):
        cfg = small_corridor_args(tmp_path)
        metrics = tmp_path / "metrics.csv"
        map_csv = tmp_path / "map.csv"
        map_ply = tmp_path / "map.ply"
        rc = run_cli("replay", "--config", cfg, "--metrics", metrics,
                     "--map-csv", map_csv, "--map-ply", map_ply)
        assert rc == 0
        lines = metrics.read_text().splitlines()
        assert lines[0] == METRICS_HEADER
        assert len(lines) == 31  # header + one row per scan
        assert map_csv.exists() and map_ply.exists()
        out = capsys.readouterr().out
        assert "replayed 30 scans" in out

    def test_boundary_count_monotone_until_steady(self, tmp_path):
        cfg = small_corridor_args(tmp_path)
        metrics = tmp_path / "metrics.csv"
        assert run_cli("replay", "--config", cfg, "--metrics", metrics) == 0
        counts = [
            int(line.split(",")[6])
            for line in metrics.read_text().splitlines()[1:]
        ]
        peak = max(counts)
        rising = counts[: counts.index(peak) + 1]
        assert rising == sorted(rising)

    def test_deterministic_except_timing(self, tmp_path):
        cfg = small_corridor_args(tmp_path)
        m1, m2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
        assert run_cli("replay", "--config", cfg, "--metrics", m1) == 0
        assert run_cli("replay", "--config", cfg, "--metrics", m2) == 0
        timing_cols = {1, 2, 3}

        def strip(path):
            rows = []
            for line in path.read_text().splitlines()[1:]:
                cells = line.split(",")
                rows.append([c for i, c in enumerate(cells) if i not in timing_cols])
            return rows

        assert strip(m1) == strip(m2)

    def test_zero_scan_replay(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"scene": "corridor", "scans": 0}))
        metrics = tmp_path / "metrics.csv"
        map_csv = tmp_path / "map.csv"
        rc = run_cli("replay", "--config", cfg_path, "--metrics", metrics,
                     "--map-csv", map_csv)
        assert rc == 0
        assert metrics.read_text().splitlines() == [METRICS_HEADER]
        loaded = [
            ln for ln in map_csv.read_text().splitlines()
            if ln and not ln.startswith("#") and ln != "u,v,w,type"
        ]
        assert loaded == []

    def test_bad_scene_errors(self, tmp_path):
        assert run_cli("replay", "--scene", "nowhere") == 2


class TestMakeReplayCommand:
    @pytest.mark.parametrize("encoding", ["text", "npz"])
    def test_replay_dir_reproduces_map(self, tmp_path, encoding):
        cfg = small_corridor_args(tmp_path)
        direct_csv = tmp_path / "direct.csv"
        assert run_cli("replay", "--config", cfg, "--map-csv", direct_csv) == 0

        replay_dir = tmp_path / "rp"
        assert run_cli("make-replay", "--config", cfg, "--out", replay_dir,
                       "--encoding", encoding) == 0
        from_dir_csv = tmp_path / "from_dir.csv"
        assert run_cli("replay", "--replay", replay_dir, "--resolution", "0.2",
                       "--sensor-range", "1.7", "--map-csv", from_dir_csv) == 0
        assert direct_csv.read_text() == from_dir_csv.read_text()


class TestVerifyCommand:
    def test_corridor_passes(self, tmp_path, capsys):
        cfg = small_corridor_args(tmp_path)
        rc = run_cli("verify", "--config", cfg)
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "[PASS] exact_agreement" in out

    def test_requires_builtin_scene(self):
        assert run_cli("verify", "--resolution", "0.2") == 2


class TestQueryCommand:
    @pytest.fixture
    def exported_map(self, tmp_path):
        cfg = small_corridor_args(tmp_path)
        map_csv = tmp_path / "map.csv"
        assert run_cli("replay", "--config", cfg, "--map-csv", map_csv) == 0
        return map_csv

    def test_states_for_known_points(self, tmp_path, exported_map, capsys):
        pts = tmp_path / "pts.txt"
        # corridor interior near the trajectory, a wall face, and far away
        pts.write_text("2.4 0.0 0.0\n2.0 -1.6 0.0\n200.0 0.0 0.0\n")
        out_file = tmp_path / "states.txt"
        rc = run_cli("query", exported_map, pts, "--out", out_file)
        assert rc == 0
        states = out_file.read_text().splitlines()
        assert states[0] == "FREE"
        assert states[1] == "OCCUPIED"
        assert states[2] == "UNKNOWN"
        assert "mean boundary voxels per query" in capsys.readouterr().out

    def test_empty_points(self, tmp_path, exported_map):
        pts = tmp_path / "pts.txt"
        pts.write_text("")
        out_file = tmp_path / "states.txt"
        assert run_cli("query", exported_map, pts, "--out", out_file) == 0
        assert out_file.read_text() == ""

    def test_malformed_points(self, tmp_path, exported_map):
        pts = tmp_path / "pts.txt"
        pts.write_text("1.0 2.0\n")
        assert run_cli("query", exported_map, pts, "--out", tmp_path / "s.txt") == 2


class TestExportCommand:
    def test_csv_to_ply(self, tmp_path):
        cfg = small_corridor_args(tmp_path)
        map_csv = tmp_path / "map.csv"
        assert run_cli("replay", "--config", cfg, "--map-csv", map_csv) == 0
        ply = tmp_path / "map.ply"
        assert run_cli("export", map_csv, "--ply", ply) == 0
        header = ply.read_text().splitlines()[:8]
        assert header[0] == "ply"
        assert any(line.startswith("element vertex ") for line in header)


class TestBenchCommand:
    def test_runs(self, capsys):
        rc = run_cli("bench", "--reps", "1", "--rays", "200", "--replay-scans", "4")
        assert rc == 0
        out = capsys.readouterr().out
        assert "active backend:" in out
        assert "kernel" in out and "replay" in out
