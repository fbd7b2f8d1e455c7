"""Landscape model container plus its SVG, JSON and Markdown renderings."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .alignment import OrthogonalMap
from .clustering import ClusterAssignment
from .projection import MapLayout, Projection2D
from .registry import Company, ResolvedEntitySet, Technology
from .similarity import COMPANY_TO_TECHS, TECH_TO_COMPANIES, SimilarityMatrix, top_k
from .validation import CorrelationResult, validation_summary

# tab10 followed by two extra hues; cluster i uses PALETTE[i % len(PALETTE)]
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
)


@dataclass
class LandscapeModel:
    technologies: list[Technology] = field(default_factory=list)
    companies: list[Company] = field(default_factory=list)
    tech_resolution: ResolvedEntitySet | None = None
    company_resolution: ResolvedEntitySet | None = None
    alignment: OrthogonalMap | None = None
    anchors: tuple = ()
    similarity: SimilarityMatrix | None = None
    entity_ids: tuple[str, ...] = ()            # joint order: technologies then companies
    assignment: ClusterAssignment | None = None
    layout: MapLayout | None = None
    projection: Projection2D | None = None
    validation: list[CorrelationResult] | None = None
    metadata: dict = field(default_factory=dict)
    decisions: dict = field(default_factory=dict)
    top_k: int = 5

    def cluster_of(self, entity_id: str) -> int | None:
        if self.assignment is None:
            return None
        return self.assignment.labels[self.entity_ids.index(entity_id)]

    @property
    def resolved_technologies(self) -> list[Technology]:
        return self.tech_resolution.entities if self.tech_resolution else []

    @property
    def resolved_companies(self) -> list[Company]:
        return self.company_resolution.entities if self.company_resolution else []


@dataclass(frozen=True)
class SvgOptions:
    width: int = 1200
    height: int = 900
    margin: int = 60
    r_min: float = 3.0
    r_max: float = 36.0
    label_top_spenders: int = 10
    tech_marker: float = 5.0


def bubble_radii(spends: Sequence[float], r_min: float, r_max: float) -> list[float]:
    """Area-proportional radii ``r_min + s * sqrt(spend)``; the biggest spender gets ``r_max``."""
    top = max(spends, default=0.0)
    scale = (r_max - r_min) / math.sqrt(top) if top > 0 else 0.0
    return [r_min + scale * math.sqrt(s) for s in spends]


def render_svg(model: LandscapeModel, options: SvgOptions = SvgOptions()) -> bytes:
    o = options
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{o.width}" height="{o.height}" '
        f'viewBox="0 0 {o.width} {o.height}">',
        f'<rect x="0" y="0" width="{o.width}" height="{o.height}" fill="#ffffff"/>',
    ]
    layout = model.layout
    if layout is not None and len(layout.ids):
        x0, y0, x1, y1 = layout.extents
        sx = (o.width - 2 * o.margin) / ((x1 - x0) or 1.0)
        sy = (o.height - 2 * o.margin) / ((y1 - y0) or 1.0)

        def place(eid):
            x, y = layout.point(eid)
            return o.margin + (x - x0) * sx, o.height - o.margin - (y - y0) * sy

        def colour(eid):
            c = model.cluster_of(eid)
            return "#000000" if c is None else PALETTE[c % len(PALETTE)]

        companies = model.resolved_companies
        radii = bubble_radii([c.rnd_meur for c in companies], o.r_min, o.r_max)
        by_spend = sorted(companies, key=lambda c: (-c.rnd_meur, c.id))
        labelled = {c.id for c in by_spend[: o.label_top_spenders]}
        parts.append('<g id="companies">')
        # biggest first so small bubbles stay visible on top
        for c, r in sorted(zip(companies, radii), key=lambda cr: (-cr[1], cr[0].id)):
            cx, cy = place(c.id)
            parts.append(f'<circle class="company" cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.3f}" fill="{colour(c.id)}" '
                         f'fill-opacity="0.45" stroke="{colour(c.id)}"><title>{escape(c.name)}</title></circle>')
        parts.append("</g>")
        parts.append('<g id="technologies">')
        h = o.tech_marker
        for t in model.resolved_technologies:
            cx, cy = place(t.id)
            parts.append(f'<rect class="technology" x="{cx - h:.2f}" y="{cy - h:.2f}" width="{2 * h:.2f}" '
                         f'height="{2 * h:.2f}" transform="rotate(45 {cx:.2f} {cy:.2f})" fill="{colour(t.id)}" '
                         f'stroke="#000000"><title>{escape(t.name)}</title></rect>')
        parts.append("</g>")
        parts.append('<g id="labels" font-family="sans-serif" font-size="11">')
        for t in model.resolved_technologies:
            cx, cy = place(t.id)
            parts.append(f'<text class="technology-label" x="{cx + h + 2:.2f}" y="{cy + 4:.2f}">{escape(t.name)}</text>')
        for c in companies:
            if c.id in labelled:
                cx, cy = place(c.id)
                parts.append(f'<text class="company-label" x="{cx:.2f}" y="{cy:.2f}" text-anchor="middle" '
                             f'font-weight="bold">{escape(c.name)}</text>')
        parts.append("</g>")
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def canonical(value: Any) -> Any:
    """Floats to 9 significant digits (NaN -> null), numpy types to Python."""
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return canonical(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return None
        return float(f"{v:.9g}")
    return value


def dumps_canonical(obj: Any) -> bytes:
    return (json.dumps(canonical(obj), sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)
            + "\n").encode("utf-8")


def model_to_dict(model: LandscapeModel) -> dict:
    sim = model.similarity
    tech_info = {r.entity.id: r.key for r in (model.tech_resolution.resolved if model.tech_resolution else ())}
    comp_info = {r.entity.id: r.key for r in (model.company_resolution.resolved if model.company_resolution else ())}
    k = model.top_k

    def placed(eid):
        if model.layout is None or eid not in model.layout.ids:
            return None
        return list(model.layout.point(eid))

    def neighbours(eid, direction):
        if sim is None:
            return []
        return [{"id": n, "similarity": s} for n, s in top_k(sim, eid, direction, k).neighbors]

    techs = []
    for t in model.technologies:
        ok = t.id in tech_info
        techs.append({
            "tech_id": t.tech_id, "name": t.name, "wiki_title": t.wiki_title, "theme": t.theme,
            "key": tech_info.get(t.id), "resolved": ok,
            "cluster": model.cluster_of(t.id) if ok else None, "xy": placed(t.id),
            "closest_companies": neighbours(t.id, TECH_TO_COMPANIES) if ok else [],
        })
    comps = []
    for c in model.companies:
        ok = c.id in comp_info
        comps.append({
            "id": c.id, "rank": c.rank, "name": c.name, "wiki_title": c.wiki_title, "rnd_meur": c.rnd_meur,
            "country": c.country, "industry": c.industry, "key": comp_info.get(c.id), "resolved": ok,
            "cluster": model.cluster_of(c.id) if ok else None, "xy": placed(c.id),
            "closest_technologies": neighbours(c.id, COMPANY_TO_TECHS) if ok else [],
        })
    out = {
        "metadata": model.metadata,
        "decisions": model.decisions,
        "technologies": techs,
        "companies": comps,
    }
    if model.alignment is not None:
        out["alignment"] = {
            "anchor_count": model.alignment.anchor_count,
            "anchors": [list(p) for p in model.anchors],
            "rank": model.alignment.rank,
            "residual": model.alignment.residual,
            "matrix": model.alignment.matrix,
        }
    if sim is not None:
        out["similarity"] = {"rows": list(sim.rows), "cols": list(sim.cols), "values": sim.values}
    if model.assignment is not None:
        out["clusters"] = [
            {"index": i, "members": p.members, "technologies": p.technologies, "companies": p.companies,
             "total_rnd_meur": p.total_rnd_meur, "label_candidates": list(p.label_candidates)}
            for i, p in enumerate(model.assignment.profiles)
        ]
    if model.projection is not None:
        out["projection"] = {"explained_variance": model.projection.explained_variance}
    if model.validation is not None:
        summary = validation_summary(model.validation, model.decisions.get("primary_coefficient", "pearson"))
        out["validation"] = {
            "significant": summary.significant, "not_significant": summary.not_significant,
            "degenerate": summary.degenerate,
            "results": [asdict(r) for r in model.validation],
        }
    return out


def export_model_json(model: LandscapeModel) -> bytes:
    return dumps_canonical(model_to_dict(model))


def _md_cell(value) -> str:
    return str(value).replace("|", "\\|").replace("\n", " ")


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_md_cell(c) for c in row) + " |" for row in rows]
    return lines


def _f(v: float, digits: int = 4) -> str:
    return "n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{digits}f}"


def report_markdown(model: LandscapeModel) -> str:
    lines = ["# Technology / R&D company linkage report", ""]
    lines += ["## Decisions in force", ""]
    lines += _table(["setting", "value"], [(k, model.decisions[k]) for k in sorted(model.decisions)])
    lines.append("")
    for k in sorted(model.metadata):
        if isinstance(model.metadata[k], (str, int, float)):
            lines.append(f"- {k}: {model.metadata[k]}")
    lines.append("")

    lines += ["## Resolution", ""]
    for label, res in (("technologies", model.tech_resolution), ("companies", model.company_resolution)):
        if res is None:
            continue
        lines.append(f"- {label}: {len(res.resolved)} resolved, {len(res.unresolved)} unresolved of {len(res)}")
    unresolved = [(e.kind, e.id, e.name, why)
                  for res in (model.tech_resolution, model.company_resolution) if res
                  for e, why in res.unresolved]
    lines.append("")
    if unresolved:
        lines += _table(["kind", "id", "name", "reason"], unresolved)
    else:
        lines.append("All entities resolved.")
    lines.append("")

    if model.alignment is not None:
        lines += ["## Alignment", ""]
        lines.append(f"- mode: {model.decisions.get('anchor_mode', 'n/a')}")
        lines.append(f"- anchors: {model.alignment.anchor_count}, cross-product rank {model.alignment.rank}")
        lines.append(f"- anchor RMS residual: {model.alignment.residual:.6g}")
        lines.append("")

    if model.assignment is not None:
        lines += ["## Cluster profiles", ""]
        rows = [(i, p.members, p.technologies, p.companies, f"{p.total_rnd_meur:.1f}", "; ".join(p.label_candidates))
                for i, p in enumerate(model.assignment.profiles)]
        lines += _table(["cluster", "members", "technologies", "companies", "total R&D (EUR m)", "label candidates"], rows)
        lines.append("")

    sim, k = model.similarity, model.top_k
    names = {e.id: e.name for e in [*model.technologies, *model.companies]}
    if sim is not None:
        lines += [f"## Closest technologies per company (top {k})", ""]
        for c in model.resolved_companies:
            lines.append(f"### {c.name} (`{c.id}`)")
            lines.append("")
            nl = top_k(sim, c.id, COMPANY_TO_TECHS, k)
            lines += _table(["rank", "tech_id", "technology", "similarity", "distance"],
                            [(i + 1, t, names[t], f"{s:.9g}", f"{1 - s:.9g}") for i, (t, s) in enumerate(nl.neighbors)])
            lines.append("")
        lines += [f"## Closest companies per technology (top {k})", ""]
        for t in model.resolved_technologies:
            lines.append(f"### {t.name} (`{t.id}`)")
            lines.append("")
            nl = top_k(sim, t.id, TECH_TO_COMPANIES, k)
            lines += _table(["rank", "company_id", "company", "similarity", "distance"],
                            [(i + 1, c, names[c], f"{s:.9g}", f"{1 - s:.9g}") for i, (c, s) in enumerate(nl.neighbors)])
            lines.append("")

        lines += ["## Themed technologies matched to their closest company", ""]
        themed = [t for t in model.resolved_technologies if t.theme]
        if not themed:
            lines += ["No themed technologies.", ""]
        for theme in sorted({t.theme for t in themed}):
            lines += [f"### Theme: {theme}", ""]
            rows = []
            for t in themed:
                if t.theme == theme:
                    (cid, s), = top_k(sim, t.id, TECH_TO_COMPANIES, 1).neighbors
                    rows.append((t.id, t.name, cid, names[cid], f"{s:.9g}"))
            lines += _table(["tech_id", "technology", "company_id", "closest company", "similarity"], rows)
            lines.append("")

    lines += ["## Patent validation", ""]
    if model.validation is None:
        lines += ["Validation not run (no patent data supplied).", ""]
    else:
        primary = model.decisions.get("primary_coefficient", "pearson")
        summary = validation_summary(model.validation, primary)
        lines.append(f"- significant: {summary.significant}")
        lines.append(f"- not significant: {summary.not_significant}")
        lines.append(f"- degenerate: {summary.degenerate}")
        lines.append("")
        lines += _table(["tech_id", "technology", "n", "pearson_r", "pearson_p", "spearman_rho", "spearman_p", "significant"],
                        [(r.tech_id, names.get(r.tech_id, ""), r.n, _f(r.pearson_r), _f(r.pearson_p, 6),
                          _f(r.spearman_rho), _f(r.spearman_p, 6), "degenerate" if r.degenerate else ("yes" if r.significant else "no"))
                         for r in summary.ranked])
        lines.append("")
    return "\n".join(lines)
