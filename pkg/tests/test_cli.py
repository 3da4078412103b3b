"""CLI subcommands, CSV schemas, SVG export, correlation report."""

import dataclasses
import json
import math
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from rummage import export
from rummage.belief import ParticleSet
from rummage.cli import main
from rummage.geometry import Pose, ScalarField, Workspace
from rummage.semantics import SemanticCloud
from rummage.sim import Scenario, run_episode
from rummage.planner import PlannerParams


@pytest.fixture
def tiny_scenario_file(tmp_path):
    cfg = {
        "name": "tiny_mug",
        "true_center": [0.38, 0.0, 0.0],
        "true_yaw": 0.4,
        "prior_center": [0.38, 0.0, 0.0],
        "belief": {"gamma": 20.0, "eta": 0.6, "n_particles": 16},
        "planner": {
            "horizon": 5, "control_points": 3, "samples": 16, "rollouts": 2,
            "mini_steps": 2, "replan_interval": 2, "warm_start_iters": 1,
        },
        "surface_samples": 80,
        "n_steps": 2,
        "termination_ratio": 0.002,
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    return path


class TestFieldCsv:
    def test_round_trip(self, tmp_path, rng):
        ws = Workspace(bounds=((0, 0.05), (0, 0.03), (0, 0)), resolution=0.01)
        f = ws.make_field(rng.uniform(0, 1, 6 * 4))
        p = tmp_path / "f.csv"
        export.write_field_csv(f, p)
        back = export.read_field_csv(p)
        npt.assert_allclose(back.values, f.values)
        assert back.resolution == pytest.approx(f.resolution)
        npt.assert_allclose(back.origin, f.origin)


class TestSvg:
    def test_zero_field_uniform_background(self, tmp_path):
        f = ScalarField(origin=np.zeros(3), resolution=0.01, values=np.zeros((5, 5, 1)))
        out = tmp_path / "zero.svg"
        export.field_to_svg(f, out)
        text = out.read_text()
        assert text.count("<rect") == 1  # background only

    def test_single_hot_node(self, tmp_path):
        vals = np.zeros((5, 5, 1))
        vals[2, 3, 0] = 1.0
        f = ScalarField(origin=np.zeros(3), resolution=0.01, values=vals)
        out = tmp_path / "hot.svg"
        export.field_to_svg(f, out, percentile=90.0)
        assert out.read_text().count("<rect") == 2  # background + one cell

    def test_3d_without_slice_errors(self, tmp_path):
        f = ScalarField(origin=np.zeros(3), resolution=0.01, values=np.zeros((3, 3, 3)))
        with pytest.raises(ValueError):
            export.field_to_svg(f, tmp_path / "x.svg")

    def test_3d_with_slice(self, tmp_path):
        vals = np.zeros((3, 3, 3))
        vals[1, 1, 2] = 1.0
        f = ScalarField(origin=np.zeros(3), resolution=0.01, values=vals)
        export.field_to_svg(f, tmp_path / "s.svg", slice_z=0.02)
        assert (tmp_path / "s.svg").exists()


class TestCloudCsv:
    def test_round_trip(self, tmp_path, rng):
        cloud = SemanticCloud.from_parts(
            free=rng.uniform(-1, 1, (5, 3)), surface=rng.uniform(-1, 1, (3, 3))
        )
        p = tmp_path / "cloud.csv"
        export.write_cloud_csv(cloud, p)
        back = export.read_cloud_csv(p)
        npt.assert_allclose(back.positions, cloud.positions)
        npt.assert_array_equal(back.labels, cloud.labels)


class TestPearson:
    def test_perfectly_linear(self):
        x = [1.0, 2.0, 3.0, 4.0]
        assert export.pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)

    def test_anti_linear(self):
        x = [1.0, 2.0, 3.0, 4.0]
        assert export.pearson(x, [-3 * v for v in x]) == pytest.approx(-1.0)

    def test_constant_series_undefined(self):
        assert export.pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


class TestRunCommand:
    def test_run_zero_steps_single_seed(self, tmp_path, tiny_scenario_file):
        out = tmp_path / "out"
        rc = main([
            "run", "--scenario", str(tiny_scenario_file), "--method", "slide",
            "--seeds", "0", "--steps", "0", "--out", str(out),
        ])
        assert rc == 0
        summary = (out / "slide_summary.csv").read_text().strip().splitlines()
        assert len(summary) == 2  # header + the single step-0 row
        runs = (out / "slide_runs.csv").read_text().strip().splitlines()
        assert len(runs) == 2

    def test_rerun_byte_identical(self, tmp_path, tiny_scenario_file):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            rc = main([
                "run", "--scenario", str(tiny_scenario_file), "--method", "full",
                "--seeds", "0,1", "--out", str(out),
            ])
            assert rc == 0
        for name in ("full_seed0.csv", "full_seed1.csv", "full_runs.csv", "full_summary.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_bad_scenario_is_config_error(self, tmp_path):
        rc = main(["run", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_seed_ranges(self, tmp_path, tiny_scenario_file):
        out = tmp_path / "out"
        rc = main([
            "run", "--scenario", str(tiny_scenario_file), "--method", "slide",
            "--seeds", "0,2-3", "--steps", "0", "--out", str(out),
        ])
        assert rc == 0
        for s in (0, 2, 3):
            assert (out / f"slide_seed{s}.csv").exists()

    def test_artifact_exports(self, tmp_path, tiny_scenario_file):
        out = tmp_path / "out"
        rc = main([
            "run", "--scenario", str(tiny_scenario_file), "--method", "full",
            "--seeds", "0", "--steps", "1", "--out", str(out),
            "--export-fields", "--export-particles", "--export-traces",
        ])
        assert rc == 0
        adir = out / "full_seed0_artifacts"
        assert (adir / "info_step1.csv").exists()
        assert (adir / "particles_step1.csv").exists()
        assert (adir / "planner_trace.csv").exists()

    def test_scenario_files_not_mutated(self, tmp_path, tiny_scenario_file):
        before = tiny_scenario_file.read_bytes()
        main([
            "run", "--scenario", str(tiny_scenario_file), "--method", "slide",
            "--seeds", "0", "--steps", "0", "--out", str(tmp_path / "out"),
        ])
        assert tiny_scenario_file.read_bytes() == before


class TestExportFieldCommand:
    def test_field_to_svg_via_cli(self, tmp_path, rng):
        ws = Workspace(bounds=((0, 0.05), (0, 0.05), (0, 0)), resolution=0.01)
        f = ws.make_field(rng.uniform(0, 1, 36))
        csv_path = tmp_path / "field.csv"
        export.write_field_csv(f, csv_path)
        svg_path = tmp_path / "field.svg"
        rc = main(["export-field", "--snapshot", str(csv_path), "--out", str(svg_path), "--percentile", "50"])
        assert rc == 0
        assert svg_path.read_text().startswith("<svg")

    def test_missing_snapshot_config_error(self, tmp_path):
        rc = main(["export-field", "--snapshot", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "x.svg")])
        assert rc == 1


class TestCorrelateCommand:
    def write_metrics(self, path, pairs):
        with open(path, "w") as fh:
            fh.write("step,nll,chamfer,contact,ax,ay,ayaw,reach_true\n")
            for i, (a, b) in enumerate(pairs):
                fh.write(f"{i},{a},{b},0,0.0,0.0,0.0,1.0\n")

    def test_linear_pairs(self, tmp_path, capsys):
        p = tmp_path / "m.csv"
        self.write_metrics(p, [(1, 2), (2, 4), (3, 6), (4, 8)])
        rc = main(["correlate", "--inputs", str(p)])
        assert rc == 0
        outp = capsys.readouterr().out
        assert "pooled,1.0" in outp

    def test_anti_linear_pairs(self, tmp_path, capsys):
        p = tmp_path / "m.csv"
        self.write_metrics(p, [(1, -1), (2, -2), (3, -3)])
        rc = main(["correlate", "--inputs", str(p)])
        assert rc == 0
        assert "pooled,-1.0" in capsys.readouterr().out

    def test_constant_series_undefined_not_crash(self, tmp_path, capsys):
        p = tmp_path / "m.csv"
        self.write_metrics(p, [(1, 5), (1, 5), (1, 5)])
        rc = main(["correlate", "--inputs", str(p), "--out", str(tmp_path / "rep.csv")])
        assert rc == 0
        assert "undefined" in capsys.readouterr().out
        assert "undefined" in (tmp_path / "rep.csv").read_text()


class TestModuleEntry:
    def test_python_dash_m(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "rummage", "correlate", "--inputs", "/nonexistent.csv"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
