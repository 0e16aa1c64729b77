import json
import math

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from freespace import cli
from freespace.config import ScenarioConfig, Trajectory, config_from_dict, config_to_dict, dump_config, load_config
from freespace.errors import ConfigError, ContractViolation, FrameError
from freespace.imageio import read_pfm, read_pgm
from freespace.pipeline import LOG_COLUMNS, FrameLog, read_log, report, run_scenario, write_log
from freespace.scene import Plane, Pose, Scene, Sphere, ValueNoise
from freespace.window import PixelRect, centroid_depth, DepthMap

SMALL = {
    "rig": {"focal_px": 150.0, "baseline_m": 0.12, "width": 160, "height": 120},
    "match": {"max_disparity": 24},
    "scene": {"primitives": [{"type": "plane", "normal": [0, 0, -1], "offset": -4.0,
                              "texture": {"type": "value_noise", "scale": 0.2, "amplitude": 90.0, "octaves": 3}}]},
    "trajectory": {"velocity_mps": 0.0, "frame_count": 4},
    "seed": 3,
}


def small(**overrides):
    data = yaml.safe_load(yaml.safe_dump(SMALL))
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(data.get(k), dict):
            data[k].update(v)
        else:
            data[k] = v
    return config_from_dict(data)


def record(i, **kw):
    base = dict(frame=i, t=round(i * 0.1, 6), d_truth=4.0, d_stereo=4.0, d_lidar=4.0, d_fused=4.0, p00=0.0005,
                blocked_fraction=0.0, verdict="Free")
    base.update(kw)
    return FrameLog(**base)


class TestConfig:
    def test_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.fusion.stereo_variance == 0.0254800198
        assert cfg.fusion.lidar_variance == 0.0005798584
        assert (cfg.window.uav_width_m, cfg.window.uav_height_m, cfg.window.d_min_m) == (1.2, 0.4, 4.0)
        assert (cfg.rig.width, cfg.rig.height) == (640, 480)
        assert (cfg.lidar.min_range_m, cfg.lidar.max_range_m, cfg.lidar.resolution_m) == (0.2, 100.0, 0.01)
        assert cfg.trajectory.frame_rate_hz == 10.0

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="noise_std"):
            config_from_dict({"noise": {"noise_std": 2.0}})
        with pytest.raises(ConfigError, match="unknown top-level"):
            config_from_dict({"noize": {}})
        with pytest.raises(ConfigError, match="texture"):
            config_from_dict({"scene": {"primitives": [
                {"type": "sphere", "center": [0, 0, 3], "radius": 1, "texture": {"type": "marble"}}]}})

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"trajectory": {"frame_rate_hz": 0}})
        with pytest.raises(ConfigError):
            config_from_dict({"trajectory": {"frame_count": 0}})
        with pytest.raises(ConfigError):
            config_from_dict({"match": {"max_disparity": 400}})
        with pytest.raises(ConfigError):
            config_from_dict({"scene": {"primitives": [{"center": [0, 0, 1]}]}})

    def test_round_trip(self, tmp_path):
        cfg = small(scene={"primitives": [
            {"type": "sphere", "center": [0.0, 0.0, 3.0], "radius": 0.5, "texture": {"type": "checker"}},
            {"type": "box", "lo": [-1, -1, 5], "hi": [1, 1, 6]},
        ]})
        dump_config(cfg, tmp_path / "c.yaml")
        again = load_config(tmp_path / "c.yaml")
        assert config_to_dict(again) == config_to_dict(cfg)
        assert isinstance(again.scene.primitives[0], Sphere)

    def test_malformed_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("rig: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_shipped_configs_load(self):
        from pathlib import Path

        for p in sorted((Path(__file__).parent.parent / "configs").glob("*.yaml")):
            cfg = load_config(p)
            assert cfg.trajectory.frame_count >= 1

    def test_trajectory_poses(self):
        traj = Trajectory(start=Pose((0, 0, 1.0)), velocity_mps=2.0, frame_rate_hz=10.0, frame_count=5)
        assert traj.pose(3).position[2] == pytest.approx(1.6)


class TestLog:
    def test_round_trip(self, tmp_path):
        logs = [record(0), record(1, d_lidar=None, verdict="Blocked", blocked_fraction=0.25)]
        write_log(logs, tmp_path / "f.csv")
        assert read_log(tmp_path / "f.csv") == logs

    def test_empty_log_is_header_only(self, tmp_path):
        write_log([], tmp_path / "f.csv")
        assert (tmp_path / "f.csv").read_text() == ",".join(LOG_COLUMNS) + "\n"

    def test_line_count(self, tmp_path):
        write_log([record(i) for i in range(150)], tmp_path / "f.csv")
        assert len((tmp_path / "f.csv").read_text().splitlines()) == 151

    def test_format(self, tmp_path):
        write_log([record(0, d_lidar=None, d_stereo=1 / 3)], tmp_path / "f.csv")
        row = (tmp_path / "f.csv").read_text().splitlines()[1].split(",")
        assert row[3] == "0.333333" and row[4] == "" and row[-1] == "Free"

    @given(st.lists(st.tuples(st.floats(0.2, 100), st.one_of(st.none(), st.floats(0.2, 100))), max_size=20))
    def test_round_trip_property(self, tmp_path_factory, values):
        logs = [record(i, d_stereo=round(s, 6), d_lidar=None if l is None else round(l, 6))
                for i, (s, l) in enumerate(values)]
        path = tmp_path_factory.mktemp("log") / "f.csv"
        write_log(logs, path)
        assert read_log(path) == logs

    def test_io_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="nope"):
            write_log([], tmp_path / "nope" / "f.csv")


class TestReport:
    def test_perfect(self):
        s = report([record(i) for i in range(5)])
        assert s.mae_stereo == s.mae_lidar == s.mae_fused == 0.0
        assert s.transitions == [] and s.max_fused_error == 0.0

    def test_hand_errors(self):
        s = report([record(0, d_fused=4.1), record(1, d_fused=3.9)])
        assert s.mae_fused == pytest.approx(0.1) and s.max_fused_error == pytest.approx(0.1)

    def test_transitions(self):
        verdicts = ["Free", "Free", "Blocked", "Blocked", "Free"]
        s = report([record(i, verdict=v) for i, v in enumerate(verdicts)])
        assert s.transitions == [2, 4]

    def test_missing_lidar_and_infinite_truth(self):
        s = report([record(0, d_lidar=None), record(1, d_truth=math.inf), record(2, d_lidar=4.3)])
        assert s.mae_lidar == pytest.approx(0.3) and s.mae_fused == 0.0

    def test_empty(self):
        with pytest.raises(ContractViolation):
            report([])


class TestRun:
    def test_static_wall_outputs(self, tmp_path):
        logs = run_scenario(small(), emit_images="all", out_dir=tmp_path)
        assert [r.frame for r in logs] == [0, 1, 2, 3]
        assert all(b.t > a.t for a, b in zip(logs, logs[1:]))
        assert read_log(tmp_path / "frames.csv") == [
            FrameLog(**{**r.__dict__, **{k: round(getattr(r, k), 6) for k in
                                         ("t", "d_truth", "d_stereo", "d_lidar", "d_fused", "p00", "blocked_fraction")}})
            for r in logs
        ]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["frames"] == 4
        assert load_config(tmp_path / "config.yaml").seed == 3
        for suffix in ("decision.pgm", "left.pgm", "right.pgm", "disparity.pfm", "disparity.mask.pgm",
                       "smoothed.pfm", "depth.pfm", "truth_depth.pfm"):
            assert (tmp_path / "frames" / f"frame_0000_{suffix}").exists()

    def test_stereo_reading_rederivable_from_artifacts(self, tmp_path):
        cfg = small()
        logs = run_scenario(cfg, emit_images="all", out_dir=tmp_path)
        from freespace.window import project_window

        rect = project_window(cfg.rig, cfg.window)
        for r in logs:
            depth = read_pfm(tmp_path / "frames" / f"frame_{r.frame:04d}_depth.pfm").astype(np.float64)
            assert centroid_depth(DepthMap(depth), rect) == pytest.approx(r.d_stereo, abs=1e-5)

    def test_deterministic_bytes(self, tmp_path):
        cfg = small(noise={"image_noise_std": 2.0, "stereo_depth_noise_variance": 0.01})
        run_scenario(cfg, emit_images="all", out_dir=tmp_path / "a")
        run_scenario(cfg, emit_images="all", out_dir=tmp_path / "b")
        for f in sorted((tmp_path / "a").rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes(), f

    def test_seed_changes_output(self):
        noise = {"image_noise_std": 1.0}
        a = run_scenario(small(seed=1, noise=noise), write=False)
        b = run_scenario(small(seed=2, noise=noise), write=False)
        assert [r.d_stereo for r in a] != [r.d_stereo for r in b]

    def test_empty_scene_single_frame(self):
        cfg = small(scene={"primitives": []}, trajectory={"frame_count": 1})
        (r,) = run_scenario(cfg, write=False)
        assert r.verdict == "Free" and r.d_lidar is None
        assert math.isinf(r.d_truth)

    def test_empty_scene_with_sensor_noise_hallucinates(self):
        # noise-only images produce consistent-looking random matches
        cfg = small(scene={"primitives": []}, trajectory={"frame_count": 1}, noise={"image_noise_std": 1.0})
        (r,) = run_scenario(cfg, write=False)
        assert r.d_stereo < 20.0

    def test_decision_images_only_by_default(self, tmp_path):
        run_scenario(small(trajectory={"frame_count": 1}), out_dir=tmp_path)
        names = sorted(p.name for p in (tmp_path / "frames").iterdir())
        assert names == ["frame_0000_decision.pgm"]
        img = read_pgm(tmp_path / "frames" / names[0])
        assert img.shape == (120, 160)

    def test_errors_carry_frame_index(self):
        cfg = small(window={"d_min_m": 0.2})
        with pytest.raises(FrameError, match="frame 0: window_too_large"):
            run_scenario(cfg, write=False)

    def test_static_fused_noise_below_stereo(self):
        cfg = small(noise={"image_noise_std": 2.0, "stereo_depth_noise_variance": 0.0254800198},
                    trajectory={"frame_count": 150})
        logs = run_scenario(cfg, write=False)
        assert np.std([r.d_fused for r in logs]) < np.std([r.d_stereo for r in logs])

    def test_bad_emit_mode(self):
        with pytest.raises(ContractViolation):
            run_scenario(small(), emit_images="some", write=False)


class TestCli:
    @pytest.fixture
    def config_path(self, tmp_path):
        p = tmp_path / "small.yaml"
        p.write_text(yaml.safe_dump(SMALL))
        return p

    def test_pipeline_and_report(self, tmp_path, config_path, capsys):
        out = tmp_path / "run"
        assert cli.main(["pipeline", "--config", str(config_path), "--out", str(out), "--frames", "2",
                         "--seed", "9", "--emit-images", "none"]) == 0
        assert len(read_log(out / "frames.csv")) == 2
        assert load_config(out / "config.yaml").seed == 9
        assert not (out / "frames").exists()
        capsys.readouterr()
        assert cli.main(["report", "--out", str(out)]) == 0
        assert json.loads(capsys.readouterr().out)["frames"] == 2

    def test_render_and_disparity(self, tmp_path, config_path):
        assert cli.main(["render", "--config", str(config_path), "--out", str(tmp_path / "r")]) == 0
        assert read_pgm(tmp_path / "r" / "left.pgm").shape == (120, 160)
        assert cli.main(["disparity", "--config", str(config_path), "--out", str(tmp_path / "d")]) == 0
        assert read_pfm(tmp_path / "d" / "disparity.pfm").shape == (120, 160)
        assert (tmp_path / "d" / "disparity.mask.pgm").exists()

    def test_calibrate(self, tmp_path, config_path):
        assert cli.main(["calibrate", "--config", str(config_path), "--out", str(tmp_path), "--frames", "5"]) == 0
        result = json.loads((tmp_path / "calibration.json").read_text())
        assert result["samples"] == 5 and result["lidar_variance"] >= 0

    def test_error_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("noise: {noise_std: 1}\n")
        assert cli.main(["pipeline", "--config", str(bad), "--out", str(tmp_path)]) != 0
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and err[0].startswith("error: config: ")

    def test_frame_error_line(self, tmp_path, capsys):
        data = dict(SMALL, window={"d_min_m": 0.2})
        p = tmp_path / "w.yaml"
        p.write_text(yaml.safe_dump(data))
        assert cli.main(["pipeline", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
        assert capsys.readouterr().err.startswith("error: window_too_large: frame 0: ")

    def test_report_missing_log(self, tmp_path, capsys):
        assert cli.main(["report", "--out", str(tmp_path)]) != 0
        assert capsys.readouterr().err.startswith("error: io: ")

    def test_bad_frames_override(self, tmp_path, config_path, capsys):
        assert cli.main(["pipeline", "--config", str(config_path), "--out", str(tmp_path), "--frames", "0"]) == 1
        assert capsys.readouterr().err.startswith("error: config: ")
