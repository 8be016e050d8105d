"""End-to-end pipelines: plane meshing, surface triangulation, re-meshing of
mesh files, and the quantity-control comparison driver.

Configuration is a flat key = value text file; every key has a documented
default (see DEFAULTS) and CLI flags override file values. All randomness
derives from the single seed, and a fixed config plus seed reproduces every
artifact byte for byte (wall-clock columns in trace CSVs excepted).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .delaunay import delaunay_triangulate
from .conformal import flatten
from .mapping import inverse_map
from .mesh import (TriangleMesh, load_mesh, quality_report, save_mesh,
                   write_svg)
from .packing import (INTERIOR_ANCHOR, Bubble, PackingDomain,
                      pack_boundary, pack_interior_quadtree)
from .relaxation import (ConvergenceTrace, DynamicsParams, ForceParams,
                         relax_until_converged)
from .remesh import remesh_planar
from .sizing import SizingParams, radius_bound_evaluator
from .surfaces import make_surface


class PipelineError(Exception):
    """Stage-labeled pipeline failure."""


DEFAULTS: dict[str, str] = {
    "mode": "plane",
    "seed": "0",
    "out": "out",
    # plane mode
    "plane_width": "20",
    "plane_height": "10",
    "holes": "10,5,2",
    "r_max": "0.5",
    "r_min": "0.5",
    "graded": "false",
    "grade_band": "4.0",
    "anchors_file": "",
    # surface mode
    "surface": "sphere",
    "surface_params": "radius=1.0",
    "epsilon": "0.01",
    # remesh mode
    "input_mesh": "",
    # compare-qc mode: take initial bubbles from the plane packing or from a
    # surface-pipeline flatten + reconstruction
    "compare_source": "plane",
    # relaxation / quantity control
    "qc": "new",
    "qc_threshold": "1.0",
    "qc_low": "5.0",
    "qc_high": "8.0",
    "qc_period": "10",
    "stiffness": "1.0",
    "max_sweeps": "400",
    "stall_window": "30",
    "force_tol_factor": "0.01",
}


@dataclass
class PipelineConfig:
    mode: str = "plane"
    seed: int = 0
    out: Path = Path("out")
    plane_width: float = 20.0
    plane_height: float = 10.0
    holes: list[tuple[float, float, float]] = field(default_factory=lambda: [(10.0, 5.0, 2.0)])
    r_max: float = 0.5
    r_min: float = 0.5
    graded: bool = False
    grade_band: float = 4.0
    anchors_file: str = ""
    surface: str = "sphere"
    surface_params: dict = field(default_factory=lambda: {"radius": 1.0})
    epsilon: float = 0.01
    input_mesh: str = ""
    compare_source: str = "plane"
    qc: str = "new"
    qc_threshold: float = 1.0
    qc_low: float = 5.0
    qc_high: float = 8.0
    qc_period: int = 10
    stiffness: float = 1.0
    max_sweeps: int = 400
    stall_window: int = 30
    force_tol_factor: float = 0.01


def _parse_bool(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "on")


def _parse_holes(s: str) -> list[tuple[float, float, float]]:
    out = []
    for part in s.split(";"):
        part = part.strip()
        if not part:
            continue
        nums = [float(t) for t in part.split(",")]
        if len(nums) != 3:
            raise PipelineError(f"[config] hole spec '{part}' is not cx,cy,r")
        out.append(tuple(nums))
    return out


def _parse_params(s: str) -> dict:
    out = {}
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, val = part.partition("=")
        out[key.strip()] = float(val)
    return out


def read_config_file(path) -> dict[str, str]:
    values = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise PipelineError(f"[config] line {ln}: expected key = value")
        values[key.strip()] = val.strip()
    return values


def load_config(path=None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    values = dict(DEFAULTS)
    if path is not None:
        file_values = read_config_file(path)
        unknown = set(file_values) - set(DEFAULTS)
        if unknown:
            raise PipelineError(f"[config] unknown keys: {sorted(unknown)}")
        values.update(file_values)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = PipelineConfig(
            mode=values["mode"],
            seed=int(values["seed"]),
            out=Path(values["out"]),
            plane_width=float(values["plane_width"]),
            plane_height=float(values["plane_height"]),
            holes=_parse_holes(values["holes"]),
            r_max=float(values["r_max"]),
            r_min=float(values["r_min"]),
            graded=_parse_bool(values["graded"]),
            grade_band=float(values["grade_band"]),
            anchors_file=values["anchors_file"],
            surface=values["surface"],
            surface_params=_parse_params(values["surface_params"]),
            epsilon=float(values["epsilon"]),
            input_mesh=values["input_mesh"],
            compare_source=values["compare_source"],
            qc=values["qc"],
            qc_threshold=float(values["qc_threshold"]),
            qc_low=float(values["qc_low"]),
            qc_high=float(values["qc_high"]),
            qc_period=int(values["qc_period"]),
            stiffness=float(values["stiffness"]),
            max_sweeps=int(values["max_sweeps"]),
            stall_window=int(values["stall_window"]),
            force_tol_factor=float(values["force_tol_factor"]),
        )
    except ValueError as exc:
        raise PipelineError(f"[config] {exc}") from exc
    if cfg.anchors_file and not Path(cfg.anchors_file).exists():
        raise PipelineError(f"[config] anchors file not found: {cfg.anchors_file}")
    if cfg.mode == "remesh" and cfg.input_mesh and not Path(cfg.input_mesh).exists():
        raise PipelineError(f"[config] input mesh not found: {cfg.input_mesh}")
    return cfg


# ---------------------------------------------------------------------------
# Plane domain construction

def _polygonize_hole(cx, cy, r, rim_radius) -> np.ndarray:
    """Clockwise circle polygon with segment length = local bubble diameter."""
    n = max(8, int(round(math.pi * r / rim_radius)))
    angles = -2.0 * math.pi * np.arange(n) / n  # negative: clockwise
    return np.column_stack([cx + r * np.cos(angles), cy + r * np.sin(angles)])


def plane_domain(cfg: PipelineConfig) -> PackingDomain:
    w, h = cfg.plane_width, cfg.plane_height
    outer = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    rim_radius = cfg.r_min if cfg.graded else cfg.r_max
    holes = [_polygonize_hole(cx, cy, r, rim_radius) for cx, cy, r in cfg.holes]

    if cfg.graded and cfg.holes:
        hole_arr = np.array(cfg.holes)

        def sizing(x, y):
            d = np.sqrt((hole_arr[:, 0] - x) ** 2 + (hole_arr[:, 1] - y) ** 2) - hole_arr[:, 2]
            dist = max(float(d.min()), 0.0)
            t = min(dist / cfg.grade_band, 1.0)
            return cfg.r_min + (cfg.r_max - cfg.r_min) * t
    else:
        def sizing(x, y):
            return cfg.r_max

    return PackingDomain(outer=outer, holes=holes, sizing=sizing)


def load_anchor_csv(path) -> list[Bubble]:
    """Pre-inserted interior anchors from a CSV of x,y,radius rows."""
    out = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        if parts[0].lower() in ("x", "y"):  # header row
            continue
        if len(parts) != 3:
            raise PipelineError(f"[config] anchors line {ln}: expected x,y,radius")
        out.append(Bubble(float(parts[0]), float(parts[1]), float(parts[2]), INTERIOR_ANCHOR))
    return out


def pack_plane(cfg: PipelineConfig) -> tuple[PackingDomain, list[Bubble]]:
    domain = plane_domain(cfg)
    boundary = pack_boundary(domain)
    pre = load_anchor_csv(cfg.anchors_file) if cfg.anchors_file else []
    anchors = boundary + pre
    interior = pack_interior_quadtree(domain, anchors)
    return domain, anchors + interior


def _force_dynamics(cfg: PipelineConfig, bubbles: list[Bubble]):
    """Force and dynamics defaults scaled to the bubble population.

    f0 = k * r_min keeps the cubic law repulsive below tangency and
    attractive up to the cutoff for every pair scale in the population.
    """
    radii = [b.radius for b in bubbles]
    r_min = min(radii)
    r_mean = float(np.mean(radii))
    force = ForceParams(k=cfg.stiffness, f0=cfg.stiffness * r_min)
    dyn = DynamicsParams(
        c=1.4 * math.sqrt(cfg.stiffness),
        dt=0.2 / math.sqrt(cfg.stiffness),
        force_tol=cfg.force_tol_factor * cfg.stiffness * r_mean,
        max_sweeps=cfg.max_sweeps,
        stall_window=cfg.stall_window,
    )
    return force, dyn


def _relax(cfg: PipelineConfig, domain, bubbles, strategy=None):
    force, dyn = _force_dynamics(cfg, bubbles)
    strategy = strategy or ("original-qc" if cfg.qc == "original" else "new-qc")
    return relax_until_converged(
        bubbles, domain, force=force, dyn=dyn, strategy=strategy,
        qc_threshold=cfg.qc_threshold, qc_low=cfg.qc_low, qc_high=cfg.qc_high,
        qc_period=cfg.qc_period, seed=cfg.seed)


def _stage(name):
    class _StageContext:
        def __enter__(self):
            return None

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(f"[{name}] {exc}") from exc
            return False

    return _StageContext()


# ---------------------------------------------------------------------------
# Pipelines

def run_plane_pipeline(cfg: PipelineConfig) -> dict:
    """Pack -> quantity control -> relax -> triangulate -> report."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("pack"):
        domain, bubbles = pack_plane(cfg)
    with _stage("relax"):
        relaxed, trace = _relax(cfg, domain, bubbles)
        trace.write_csv(out / "trace.csv")
    with _stage("triangulate"):
        mesh = delaunay_triangulate(relaxed, domain)
    with _stage("report"):
        report = quality_report(mesh)
        save_mesh(out / "plane_mesh.obj", mesh)
        save_mesh(out / "plane_mesh.off", mesh)
        write_svg(out / "plane_mesh.svg", mesh)
        (out / "plane_report.txt").write_text(report.to_text())
    return {"mesh": mesh, "report": report, "trace": trace, "out": out}


def initial_surface_mesh(cfg: PipelineConfig):
    """Step (a): pack the parametric rectangle, triangulate, lift to 3D."""
    surface = make_surface(cfg.surface, **cfg.surface_params)
    params = SizingParams(epsilon=cfg.epsilon, r_min=cfg.r_min, r_max=cfg.r_max)
    u0, u1, v0, v1 = surface.domain
    outer = np.array([[u0, v0], [u1, v0], [u1, v1], [u0, v1]])
    domain = PackingDomain(outer=outer, holes=[],
                           sizing=radius_bound_evaluator(surface, params))
    boundary = pack_boundary(domain)
    interior = pack_interior_quadtree(domain, boundary)
    param_mesh = delaunay_triangulate(boundary + interior, domain)
    positions = surface.position(param_mesh.vertices[:, 0], param_mesh.vertices[:, 1])
    mesh = TriangleMesh(positions, param_mesh.faces.copy(), uv=param_mesh.vertices.copy())
    return surface, param_mesh, mesh


def run_surface_pipeline(cfg: PipelineConfig) -> dict:
    """Steps (a)-(d): initial discrete surface, flatten, re-mesh, inverse map."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("initial-surface"):
        surface, param_mesh, initial = initial_surface_mesh(cfg)
        save_mesh(out / "initial_surface.obj", initial)
        write_svg(out / "parametric_mesh.svg", param_mesh)
        initial_report = quality_report(initial)
        (out / "initial_report.txt").write_text(initial_report.to_text())
    with _stage("flatten"):
        flat_result = flatten(initial)
        write_svg(out / "flat_initial.svg", flat_result.flat)
        save_mesh(out / "flat_initial.obj", flat_result.flat)
    with _stage("remesh"):
        new_flat, trace = remesh_planar(flat_result.flat, qc_threshold=cfg.qc_threshold,
                                        seed=cfg.seed)
        trace.write_csv(out / "trace.csv")
        write_svg(out / "flat_remeshed.svg", new_flat)
    with _stage("inverse-map"):
        final = inverse_map(new_flat, flat_result.flat, initial)
        save_mesh(out / "final_surface.obj", final)
        save_mesh(out / "final_surface.off", final)
        final_report = quality_report(final)
        (out / "final_report.txt").write_text(final_report.to_text())
    return {
        "surface": surface,
        "initial": initial, "initial_report": initial_report,
        "flatten": flat_result,
        "new_flat": new_flat, "trace": trace,
        "final": final, "final_report": final_report,
        "out": out,
    }


def run_remesh_pipeline(cfg: PipelineConfig) -> dict:
    """Re-mesh an existing disk-topology mesh file."""
    if not cfg.input_mesh:
        raise PipelineError("[config] remesh mode needs input_mesh")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("load"):
        initial = load_mesh(cfg.input_mesh)
        initial_report = quality_report(initial)
        (out / "initial_report.txt").write_text(initial_report.to_text())
    with _stage("flatten"):
        flat_result = flatten(initial)
        write_svg(out / "flat_initial.svg", flat_result.flat)
    with _stage("remesh"):
        new_flat, trace = remesh_planar(flat_result.flat, qc_threshold=cfg.qc_threshold,
                                        seed=cfg.seed)
        trace.write_csv(out / "trace.csv")
        write_svg(out / "flat_remeshed.svg", new_flat)
    with _stage("inverse-map"):
        final = inverse_map(new_flat, flat_result.flat, initial)
        save_mesh(out / "final_surface.obj", final)
        save_mesh(out / "final_surface.off", final)
        final_report = quality_report(final)
        (out / "final_report.txt").write_text(final_report.to_text())
    return {"initial": initial, "initial_report": initial_report,
            "final": final, "final_report": final_report,
            "trace": trace, "out": out}


def compare_initial_bubbles(cfg: PipelineConfig):
    """Initial bubble population for the strategy comparison.

    plane source: quadtree packing of the configured plate. surface source:
    bubbles reconstructed on the flattened initial discrete surface plus gap
    fillers, as in the re-meshing pipeline.
    """
    if cfg.compare_source == "plane":
        return pack_plane(cfg)
    if cfg.compare_source != "surface":
        raise PipelineError(f"[config] unknown compare_source '{cfg.compare_source}'")
    from .remesh import (fill_gaps, flat_domain, reconstruct_boundary_bubbles,
                          reconstruct_interior_bubbles)
    _, _, initial = initial_surface_mesh(cfg)
    flat_result = flatten(initial)
    flat = flat_result.flat
    anchors = reconstruct_boundary_bubbles(flat) + reconstruct_interior_bubbles(flat)
    domain = flat_domain(flat, anchors)
    return domain, anchors + fill_gaps(flat, anchors)


def run_compare_qc(cfg: PipelineConfig) -> dict:
    """Run both quantity-control strategies on identical initial bubbles."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("pack"):
        domain, bubbles = compare_initial_bubbles(cfg)

    results = {}
    for label, strategy in (("new", "new-qc"), ("original", "original-qc")):
        with _stage(f"relax-{label}"):
            initial = [replace(b) for b in bubbles]
            relaxed, trace = _relax(cfg, domain, initial, strategy=strategy)
            mesh = delaunay_triangulate(relaxed, domain)
            report = quality_report(mesh)
            trace.write_csv(out / f"trace_{label}.csv")
            results[label] = {"trace": trace, "report": report, "mesh": mesh}

    new_t, orig_t = results["new"]["trace"], results["original"]["trace"]
    target = new_t.final_min_angle
    time_new = new_t.elapsed if not new_t.converged else \
        new_t.rows[new_t.converged_sweep - 1][4]
    reach_time = orig_t.time_to_sustain_angle(target)
    if reach_time is not None:
        ratio = time_new / reach_time if reach_time > 0 else math.inf
        orig_note = f"{reach_time:.3f} s"
    elif orig_t.converged:
        # plateaued below the target by its own convergence tests: the
        # original strategy never attains equal quality on this input
        ratio = 0.0
        orig_note = (f"never (plateaued at {orig_t.final_min_angle:.4f} deg "
                     f"after {orig_t.elapsed:.3f} s)")
    else:
        # sweep cap hit below target: the cap time lower-bounds the answer
        ratio = time_new / orig_t.elapsed if orig_t.elapsed > 0 else math.inf
        orig_note = f">= {orig_t.elapsed:.3f} s (sweep cap hit; ratio is an upper bound)"

    summary_lines = [
        "strategy  sweeps  converged  wall_s   final_min_angle  histogram",
    ]
    for label in ("new", "original"):
        t = results[label]["trace"]
        r = results[label]["report"]
        summary_lines.append(
            f"{label:<9} {t.sweeps:>6} {str(t.converged):>9} {t.elapsed:>8.3f} "
            f"{t.final_min_angle:>15.4f}  {r.min_angle_histogram}")
    summary_lines.append("")
    summary_lines.append(f"new-qc converged min angle: {target:.4f} deg")
    summary_lines.append(f"new-qc time to convergence: {time_new:.3f} s")
    summary_lines.append(f"original-qc time to equal quality: {orig_note}")
    summary_lines.append(f"time ratio (new / original-to-equal-quality): {ratio:.3f}")
    summary = "\n".join(summary_lines) + "\n"
    (out / "compare_summary.txt").write_text(summary)
    _write_chart_svg(out / "compare_chart.svg",
                     {"new": new_t, "original": orig_t})
    results["ratio"] = ratio
    results["summary"] = summary
    results["out"] = out
    return results


def _write_chart_svg(path, traces: dict[str, ConvergenceTrace]) -> None:
    """Minimal line chart of min angle vs sweep for each trace."""
    width, height, margin = 640, 400, 46
    max_sweep = max((t.sweeps for t in traces.values()), default=1) or 1
    colors = {"new": "#1563c0", "original": "#c03a15"}

    def sx(s):
        return margin + (width - 2 * margin) * s / max_sweep

    def sy(angle):
        return height - margin - (height - 2 * margin) * angle / 60.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 8}" font-size="13" text-anchor="middle">sweep</text>',
        f'<text x="14" y="{height // 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {height // 2})">min angle (deg)</text>',
    ]
    for gy in range(0, 61, 15):
        parts.append(f'<text x="{margin - 6}" y="{sy(gy) + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{gy}</text>')
    for k, (label, trace) in enumerate(sorted(traces.items())):
        color = colors.get(label, "black")
        pts = " ".join(f"{sx(row[0]):.1f},{sy(row[3]):.1f}" for row in trace.rows)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin - 4}" y="{margin + 16 * (k + 1)}" '
                     f'font-size="12" text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def run(cfg: PipelineConfig) -> dict:
    runner = {
        "plane": run_plane_pipeline,
        "surface": run_surface_pipeline,
        "remesh": run_remesh_pipeline,
        "compare-qc": run_compare_qc,
    }.get(cfg.mode)
    if runner is None:
        raise PipelineError(f"[config] unknown mode '{cfg.mode}'")
    return runner(cfg)
