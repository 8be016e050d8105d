import numpy as np
import pytest

from bubblemesh.cli import main as cli_main
from bubblemesh.mesh import load_mesh, quality_report
from bubblemesh.pipeline import (PipelineConfig, PipelineError,
                                 load_anchor_csv, load_config, plane_domain,
                                 run_plane_pipeline, run_remesh_pipeline,
                                 run_surface_pipeline)


class TestConfig:
    def test_defaults_complete(self):
        cfg = load_config(None)
        assert cfg.mode == "plane"
        assert cfg.r_max == 0.5
        assert cfg.holes == [(10.0, 5.0, 2.0)]

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment\n"
            "mode = surface\n"
            "surface = cylinder\n"
            "surface_params = radius=2.0, v1=3.0\n"
            "epsilon = 0.02   # trailing comment\n"
            "holes = 3,3,1; 7,7,0.5\n"
            "seed = 11\n")
        cfg = load_config(path)
        assert cfg.mode == "surface"
        assert cfg.surface == "cylinder"
        assert cfg.surface_params == {"radius": 2.0, "v1": 3.0}
        assert cfg.epsilon == 0.02
        assert cfg.holes == [(3.0, 3.0, 1.0), (7.0, 7.0, 0.5)]
        assert cfg.seed == 11

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("wibble = 3\n")
        with pytest.raises(PipelineError, match="unknown keys"):
            load_config(path)

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nout = somewhere\n")
        cfg = load_config(path, {"seed": "5"})
        assert cfg.seed == 5
        assert str(cfg.out) == "somewhere"

    def test_missing_anchors_file(self):
        with pytest.raises(PipelineError, match="anchors file"):
            load_config(None, {"anchors_file": "/nonexistent/anchors.csv"})

    def test_anchor_csv(self, tmp_path):
        path = tmp_path / "anchors.csv"
        path.write_text("x,y,radius\n1.0, 2.0, 0.25\n3 4 0.5\n")
        anchors = load_anchor_csv(path)
        assert len(anchors) == 2
        assert anchors[0].x == 1.0 and anchors[0].radius == 0.25


class TestPlaneDomain:
    def test_hole_polygonized_at_bubble_diameter(self):
        cfg = PipelineConfig(holes=[(10.0, 5.0, 2.0)], r_min=0.5, r_max=0.5)
        domain = plane_domain(cfg)
        assert len(domain.holes) == 1
        hole = domain.holes[0]
        seg = np.linalg.norm(np.roll(hole, -1, axis=0) - hole, axis=1)
        assert np.allclose(seg, 2 * 0.5, rtol=0.3)

    def test_graded_sizing_ramps(self):
        cfg = PipelineConfig(holes=[(10.0, 5.0, 2.0)], r_min=0.2, r_max=0.5,
                             graded=True, grade_band=4.0)
        domain = plane_domain(cfg)
        at_rim = domain.sizing(12.05, 5.0)
        far = domain.sizing(19.0, 9.0)
        assert at_rim == pytest.approx(0.2, abs=0.02)
        assert far == pytest.approx(0.5, abs=1e-12)
        mid = domain.sizing(14.0, 5.0)
        assert 0.2 < mid < 0.5


@pytest.fixture(scope="module")
def small_plane_cfg():
    return dict(plane_width="8", plane_height="6", holes="", r_min="0.45",
                r_max="0.45", max_sweeps="120")


class TestPlanePipeline:
    def test_artifacts_written(self, tmp_path, small_plane_cfg):
        cfg = load_config(None, dict(small_plane_cfg, out=str(tmp_path / "run")))
        result = run_plane_pipeline(cfg)
        out = result["out"]
        for name in ("plane_mesh.obj", "plane_mesh.off", "plane_mesh.svg",
                     "trace.csv", "plane_report.txt"):
            assert (out / name).exists(), name
        # report regenerated from the written OBJ matches the in-run report
        again = quality_report(load_mesh(out / "plane_mesh.obj"))
        assert again.min_angle_histogram == result["report"].min_angle_histogram
        assert again.min_angle == pytest.approx(result["report"].min_angle, abs=1e-6)

    def test_deterministic_outputs(self, tmp_path, small_plane_cfg):
        payloads = []
        for run in range(2):
            cfg = load_config(None, dict(small_plane_cfg, out=str(tmp_path / f"run{run}"),
                                         seed="3"))
            result = run_plane_pipeline(cfg)
            out = result["out"]
            mesh_bytes = (out / "plane_mesh.obj").read_bytes()
            svg_bytes = (out / "plane_mesh.svg").read_bytes()
            report = (out / "plane_report.txt").read_bytes()
            # trace CSV: all columns except wall time must match
            trace = [",".join(line.split(",")[:4])
                     for line in (out / "trace.csv").read_text().splitlines()]
            payloads.append((mesh_bytes, svg_bytes, report, trace))
        assert payloads[0] == payloads[1]


class TestRemeshPipeline:
    def test_remesh_obj_file(self, tmp_path):
        from bubblemesh.mesh import save_mesh
        from bubblemesh.surfaces import sphere_patch
        import sys
        sys.path.insert(0, "tests")
        from conftest import grid_mesh_on_surface
        mesh = grid_mesh_on_surface(
            sphere_patch(radius=1.0, u0=0.0, u1=1.0, v0=1.0, v1=2.0), 14, 14)
        src = tmp_path / "input.obj"
        save_mesh(src, mesh)
        cfg = load_config(None, {"mode": "remesh", "input_mesh": str(src),
                                 "out": str(tmp_path / "out"), "max_sweeps": "150"})
        result = run_remesh_pipeline(cfg)
        assert (result["out"] / "final_surface.obj").exists()
        assert result["final_report"].triangle_count > 0


class TestGradedPlane:
    def test_triangle_size_grades_with_hole_distance(self, tmp_path):
        from scipy.stats import spearmanr
        cfg = load_config(None, {
            "out": str(tmp_path / "graded"), "plane_width": "16", "plane_height": "8",
            "holes": "8,4,1.5", "r_min": "0.25", "r_max": "0.55", "graded": "true",
            "grade_band": "4.0", "max_sweeps": "250",
        })
        result = run_plane_pipeline(cfg)
        mesh = result["mesh"]
        cent = mesh.vertices[mesh.faces].mean(axis=1)
        dist = np.hypot(cent[:, 0] - 8.0, cent[:, 1] - 4.0) - 1.5
        areas = mesh.face_areas()
        band = (dist > 0) & (dist < 4.0)
        rho = spearmanr(dist[band], areas[band]).statistic
        assert rho > 0.8

    def test_thin_domain_warns_or_errors_cleanly(self):
        import warnings as _w
        from bubblemesh.packing import PackingDomain, pack_boundary, pack_interior_quadtree
        outer = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 0.3], [0.0, 0.3]])
        domain = PackingDomain(outer=outer, holes=[], sizing=lambda x, y: 0.5)
        boundary = pack_boundary(domain)
        with _w.catch_warnings(record=True) as caught:
            _w.simplefilter("always")
            interior = pack_interior_quadtree(domain, boundary)
        assert interior == []
        assert any("interior" in str(c.message) for c in caught)


@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    cfg = load_config(None, {
        "out": str(tmp_path_factory.mktemp("sphere")), "mode": "surface",
        "surface": "sphere",
        "surface_params": "radius=1.0, u0=0.0, u1=1.2, v0=0.8, v1=1.8",
        "epsilon": "0.01", "r_min": "0.0001", "r_max": "10.0",
        "max_sweeps": "200",
    })
    return cfg, run_surface_pipeline(cfg)


class TestSurfacePipeline:
    def test_artifacts(self, sphere_run):
        cfg, result = sphere_run
        for name in ("initial_surface.obj", "final_surface.obj", "final_surface.off",
                     "flat_initial.svg", "flat_remeshed.svg", "trace.csv",
                     "initial_report.txt", "final_report.txt"):
            assert (result["out"] / name).exists(), name

    def test_initial_edges_respect_sizing(self, sphere_run):
        # parametric edges are bounded by twice the packed bubble radii; with
        # sigma1 = R the 3D chord bound follows g(eps)
        from bubblemesh.sizing import SizingParams, radius_bound
        cfg, result = sphere_run
        surface = result["surface"]
        initial = result["initial"]
        params = SizingParams(cfg.epsilon, cfg.r_min, cfg.r_max)
        edges = initial.undirected_edges()
        uv = initial.uv
        for a, b in edges[::7]:
            mid = 0.5 * (uv[a] + uv[b])
            bound = radius_bound(surface, float(mid[0]), float(mid[1]), params)
            param_len = np.linalg.norm(uv[a] - uv[b])
            # packing tangency plus boundary-subdivision tolerance
            assert param_len <= 2.6 * bound

    def test_final_vertices_within_initial_chord_error(self, sphere_run):
        from bubblemesh.mesh import hausdorff_estimate
        cfg, result = sphere_run
        h = hausdorff_estimate(result["initial"], result["surface"], 4)
        d = np.abs(np.linalg.norm(result["final"].vertices, axis=1) - 1.0)
        assert d.max() <= h + 1e-9


def test_plane_surface_degenerate_case(tmp_path):
    # the flat catalog surface run through the full surface pipeline: the
    # final mesh must stay at z = 0 with plate-level quality
    cfg = load_config(None, {
        "out": str(tmp_path / "flat"), "mode": "surface", "surface": "plane",
        "surface_params": "u0=0.0, u1=8.0, v0=0.0, v1=5.0",
        "epsilon": "0.01", "r_min": "0.4", "r_max": "0.4", "max_sweeps": "300",
    })
    result = run_surface_pipeline(cfg)
    final = result["final"]
    assert np.abs(final.vertices[:, 2]).max() < 1e-9
    assert result["final_report"].fraction_at_least(30.0) > 0.99


class TestCompareQC:
    def test_compare_artifacts_and_quality_order(self, tmp_path):
        from bubblemesh.pipeline import run_compare_qc
        cfg = load_config(None, {
            "out": str(tmp_path / "cmp"), "mode": "compare-qc", "plane_width": "10",
            "plane_height": "6", "holes": "5,3,1.2", "r_min": "0.3", "r_max": "0.3",
            "max_sweeps": "250",
        })
        result = run_compare_qc(cfg)
        out = result["out"]
        for name in ("trace_new.csv", "trace_original.csv", "compare_summary.txt",
                     "compare_chart.svg"):
            assert (out / name).exists(), name
        new_t = result["new"]["trace"]
        orig_t = result["original"]["trace"]
        # at equal wall-time budget the new strategy is at least as good
        budget = new_t.elapsed
        orig_at_budget = 0.0
        for row in orig_t.rows:
            if row[4] <= budget:
                orig_at_budget = row[3]
        assert new_t.final_min_angle >= orig_at_budget - 1e-9
        assert "time ratio" in result["summary"]


class TestCLI:
    def test_report_command(self, tmp_path, capsys):
        path = tmp_path / "tri.off"
        path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        assert cli_main(["report", "--mesh", str(path)]) == 0
        out = capsys.readouterr().out
        assert "triangles:  1" in out

    def test_plane_command(self, tmp_path, capsys):
        code = cli_main(["plane", "--out", str(tmp_path / "o"), "--r", "0.8", "--seed", "1"])
        assert code == 0
        assert (tmp_path / "o" / "plane_mesh.obj").exists()

    def test_error_exit_code(self, tmp_path, capsys):
        code = cli_main(["remesh", "--input", "/nonexistent.obj",
                         "--out", str(tmp_path / "x")])
        assert code == 1
        assert "error" in capsys.readouterr().err
