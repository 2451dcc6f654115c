"""CSV, JSON and SVG writers.

Every CSV and JSON file is checked against its published schema right after
it is written; a mismatch raises `ExportSchemaError`.
"""

from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from xml.sax.saxutils import escape

import jsonschema
import numpy as np
from referencing import Registry, Resource

from . import setalg
from .reach import ReachTube, TubeStep
from .setalg import IntervalBox

SCHEMA_VERSION = 1


class ExportSchemaError(RuntimeError):
    pass


def _schema_text(name: str) -> str:
    return resources.files("hyreach").joinpath(f"schemas/{name}").read_text()


@lru_cache(maxsize=None)
def _registry() -> Registry:
    docs = [json.loads(_schema_text(n)) for n in ("set.schema.json", "tube.schema.json", "report.schema.json")]
    return Registry().with_resources((d["$id"], Resource.from_contents(d)) for d in docs)


@lru_cache(maxsize=None)
def table_columns() -> dict:
    tables = json.loads(_schema_text("tables.json"))
    return {k: tuple(v) for k, v in tables.items() if k != "schema_version"}


def validate_document(doc: dict, schema_id: str) -> None:
    schema = _registry().contents(schema_id)
    validator = jsonschema.Draft202012Validator(schema, registry=_registry())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ExportSchemaError(f"{schema_id}: {where}: {e.message}")


def _finite(x):
    """JSON has no inf/nan; use null."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_json(path, doc: dict, schema_id: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    validate_document(doc, schema_id)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n")
    validate_document(json.loads(path.read_text()), schema_id)
    return path


def write_csv(path, table: str, rows) -> Path:
    """Write rows (without the version column) and check the file against its column list."""
    cols = table_columns()[table]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([SCHEMA_VERSION, *(repr(v) if isinstance(v, float) else v for v in r)])
    check_csv(path, table)
    return path


def check_csv(path, table: str) -> int:
    cols = table_columns()[table]
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != cols:
            raise ExportSchemaError(f"{path}: header {header} does not match {table}")
        n = 0
        for n, row in enumerate(reader, 1):
            if len(row) != len(cols):
                raise ExportSchemaError(f"{path}: row {n} has {len(row)} fields, expected {len(cols)}")
            if row[0] != str(SCHEMA_VERSION):
                raise ExportSchemaError(f"{path}: row {n} has schema version {row[0]}")
    return n


# ---------------------------------------------------------------------------
# tubes


def tube_to_dict(tube: ReachTube) -> dict:
    steps = []
    for s in tube.steps:
        steps.append({
            "branch": s.branch_id,
            "step": tube.step_index(s),
            "t_start": s.t_start,
            "t_end": s.t_end,
            "set": setalg.set_to_dict(s.set),
            "z_star": s.z_star.tolist(),
            "error_bound": s.error_bound.tolist(),
            "error_radius": s.error_radius.tolist(),
            "enclosure": {"lower": s.enclosure.lower.tolist(), "upper": s.enclosure.upper.tolist()},
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "reach_tube",
        "time_step": tube.time_step,
        "n_steps": tube.n_steps,
        "initial_set": setalg.set_to_dict(tube.initial_set),
        "lineage": dict(tube.lineage),
        "split_times": dict(tube.split_times),
        "terminated": dict(tube.terminated),
        "warnings": list(tube.warnings),
        "steps": steps,
    }


def tube_from_dict(d: dict) -> ReachTube:
    validate_document(d, "hyreach/tube/1")
    steps = [
        TubeStep(
            s["t_start"], s["t_end"], setalg.as_cz(setalg.set_from_dict(s["set"])),
            IntervalBox(np.array(s["enclosure"]["lower"]), np.array(s["enclosure"]["upper"])),
            np.array(s["z_star"]), s["branch"], np.array(s["error_bound"]), np.array(s["error_radius"]),
        )
        for s in d["steps"]
    ]
    return ReachTube(
        initial_set=setalg.as_cz(setalg.set_from_dict(d["initial_set"])),
        time_step=d["time_step"],
        n_steps=d["n_steps"],
        steps=steps,
        lineage=dict(d["lineage"]),
        split_times=dict(d.get("split_times", {})),
        terminated=dict(d["terminated"]),
        warnings=list(d["warnings"]),
    )


def write_tube_json(tube: ReachTube, path) -> Path:
    return write_json(path, tube_to_dict(tube), "hyreach/tube/1")


def read_tube_json(path) -> ReachTube:
    return tube_from_dict(json.loads(Path(path).read_text()))


def hull_table(tube: ReachTube, use_lp: bool = True) -> list:
    """One entry per (branch, step), step 0 being the initial set on the root branch."""
    init = setalg.interval_hull(tube.initial_set, use_lp=use_lp)
    rows = [{"branch": tube.branches[0], "step": 0, "t_start": 0.0, "t_end": 0.0, "box": init,
             "n_generators": tube.initial_set.n_generators, "n_constraints": tube.initial_set.n_constraints}]
    for s in tube.steps:
        rows.append({"branch": s.branch_id, "step": tube.step_index(s), "t_start": s.t_start, "t_end": s.t_end,
                     "box": setalg.interval_hull(s.set, use_lp=use_lp),
                     "n_generators": s.set.n_generators, "n_constraints": s.set.n_constraints})
    return rows


def write_tube_csv(rows: list, path) -> Path:
    def flat(r):
        bounds = [float(v) for pair in zip(r["box"].lower, r["box"].upper) for v in pair]
        return [r["branch"], r["step"], float(r["t_start"]), float(r["t_end"]), *bounds,
                r["n_generators"], r["n_constraints"]]

    return write_csv(path, "tube_hulls", (flat(r) for r in rows))


# ---------------------------------------------------------------------------
# SVG


class SvgPlot:
    """Minimal x-y plot writer: polygons, polylines and markers with linear axes."""

    def __init__(self, title: str, xlabel: str, ylabel: str, width: int = 720, height: int = 480):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.width, self.height = width, height
        self.items = []

    def polygon(self, pts, fill="#4c72b0", opacity=0.25, stroke="#2a4a80"):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 2 and len(pts) >= 2:
            self.items.append(("polygon", pts, {"fill": fill, "fill-opacity": opacity, "stroke": stroke,
                                                "stroke-width": 0.8}))
        return self

    def line(self, pts, stroke="#c44e52", width=1.5, dash=None):
        style = {"fill": "none", "stroke": stroke, "stroke-width": width}
        if dash:
            style["stroke-dasharray"] = dash
        self.items.append(("polyline", np.asarray(pts, dtype=float), style))
        return self

    def _bounds(self):
        allpts = np.vstack([p for _, p, _ in self.items if len(p)])
        lo, hi = allpts.min(axis=0), allpts.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return lo - 0.04 * span, hi + 0.04 * span

    def render(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 80, 20, 40, 55
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
               '<rect width="100%" height="100%" fill="white"/>']
        if self.items:
            lo, hi = self._bounds()

            def tx(p):
                x = ml + (p[:, 0] - lo[0]) / (hi[0] - lo[0]) * (W - ml - mr)
                y = H - mb - (p[:, 1] - lo[1]) / (hi[1] - lo[1]) * (H - mt - mb)
                return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))

            for kind, pts, style in self.items:
                attrs = " ".join(f'{k}="{v}"' for k, v in style.items())
                out.append(f'<{kind} points="{tx(pts)}" {attrs}/>')
            for i in range(6):
                fx = lo[0] + (hi[0] - lo[0]) * i / 5
                fy = lo[1] + (hi[1] - lo[1]) * i / 5
                px = ml + (W - ml - mr) * i / 5
                py = H - mb - (H - mt - mb) * i / 5
                out.append(f'<text x="{px:.1f}" y="{H - mb + 18}" font-size="11" text-anchor="middle">{fx:.4g}</text>')
                out.append(f'<text x="{ml - 6}" y="{py + 4:.1f}" font-size="11" text-anchor="end">{fy:.4g}</text>')
        out.append(f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}" fill="none" stroke="black"/>')
        out.append(f'<text x="{W / 2}" y="24" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        out.append(f'<text x="{W / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{H / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 16 {H / 2})">{escape(self.ylabel)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path


def tube_projection_svg(tube: ReachTube, path, dims=(1, 0), labels=("v [m/s]", "h [m]"), title="Reachable tube",
                        limit_curve=None, trajectories=()):
    """Projected step sets with an optional limit curve and trajectory overlays."""
    plot = SvgPlot(title, *labels)
    for z in [tube.initial_set] + [s.set for s in tube.steps]:
        try:
            plot.polygon(setalg.project_vertices_2d(z, dims))
        except setalg.EmptySetError:
            continue
    if limit_curve is not None:
        plot.line(limit_curve, stroke="#c44e52", dash="6,4")
    for traj, color in trajectories:
        plot.line(np.asarray(traj)[:, list(dims)], stroke=color, width=1.8)
    return plot.save(path)


def hull_time_svg(rows: list, dim: int, path, label: str, title: str, compare=None):
    """Interval hulls of one state against time, optionally over a second run's hulls."""
    plot = SvgPlot(title, "t [s]", label)
    for table, color in ((compare, "#dd8452"), (rows, "#4c72b0")):
        if not table:
            continue
        for r in table:
            lo, hi = r["box"].lower[dim], r["box"].upper[dim]
            t = r["t_end"]
            plot.polygon([[t - 0.3, lo], [t + 0.3, lo], [t + 0.3, hi], [t - 0.3, hi]], fill=color, stroke=color)
    return plot.save(path)
