"""Pipeline configuration and stage orchestration.

Every stage is a deterministic function of the input files and the
configuration. A stage run on its own recomputes whatever it needs
upstream in memory (cached per process) and writes only its own
artifacts, so separate stage runs and ``all`` produce identical files.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import platform
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .alignment import (MUTUAL_NN, USER_SUPPLIED, OrthogonalMap, apply_alignment, fit_procrustes,
                        load_anchors, refine_anchors)
from .clustering import (agglomerate, cut, export_assignment_csv, export_dendrogram_csv, profile_clusters)
from .embeddings import EmbeddingStore, load_embeddings, unit_normalize
from .errors import InputError
from .harvest import export_roster, fetch_category_tree
from .mapgen import LandscapeModel, canonical, dumps_canonical, export_model_json, render_svg, report_markdown
from .projection import export_layout_csv, fit_pca, transform
from .registry import ResolvedEntitySet, load_companies, load_technologies, resolve_entities
from .similarity import (COMPANY_TO_TECHS, TECH_TO_COMPANIES, SimilarityMatrix, cross_similarity,
                         export_matrix_csv, top_k)
from .validation import correlate_all, export_summary_csv, load_patents

log = logging.getLogger(__name__)

STAGES = ("harvest", "resolve", "align", "link", "cluster", "project", "validate", "render", "report")
PATH_KEYS = ("embeddings", "companies", "technologies", "patents", "anchors", "out", "cache_dir")
ANCHOR_MODES = {"supplied": USER_SUPPLIED, "mutual-nn": MUTUAL_NN}


@dataclass
class PipelineConfig:
    embeddings: str | None = None
    format: str = "text"
    companies: str | None = None
    technologies: str | None = None
    patents: str | None = None
    anchors: str | None = None
    out: str = "out"
    anchor_mode: str = "mutual-nn"
    refine_rounds: int = 5
    clusters: int = 9
    top_k: int = 5
    alpha: float = 0.05
    seed: int = 42
    exclude_zero: bool = False
    count_transform: str = "log1p"
    primary_coefficient: str = "pearson"
    p_method: str = "t"
    n_perm: int = 10_000
    entity_prefix: str = "ENTITY/"
    # harvest
    endpoint: str = "https://en.wikipedia.org/w/api.php"
    root_category: str = "Emerging technologies"
    max_depth: int = 1
    cache_dir: str | None = None
    user_agent: str = "etlinks-harvest/0.1 (category roster builder; python-requests)"
    min_interval: float = 1.0

    @classmethod
    def coerce(cls, key: str, raw):
        f = {f.name: f for f in fields(cls)}.get(key)
        if f is None:
            raise InputError(f"unknown configuration key {key!r}")
        if raw is None or not isinstance(raw, str):
            return raw
        kind = str(f.type)
        try:
            if "bool" in kind:
                low = raw.strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(raw)
                return low in ("1", "true", "yes", "on")
            if kind.startswith("int"):
                return int(raw)
            if kind.startswith("float"):
                return float(raw)
        except ValueError:
            raise InputError(f"configuration key {key!r}: cannot parse {raw!r}") from None
        return raw

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        values = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise InputError(f"config file not found: {path}")
            parser = configparser.ConfigParser()
            try:
                parser.read(path, encoding="utf-8")
            except configparser.Error as exc:
                raise InputError(f"config file {path}: {exc}") from None
            section = parser["etlinks"] if parser.has_section("etlinks") else parser.defaults()
            for key, raw in section.items():
                key = key.replace("-", "_")
                value = cls.coerce(key, raw)
                if key in PATH_KEYS and value:
                    value = str((path.parent / value))
                values[key] = value
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = cls.coerce(key, value)
        return cls(**values)

    def check(self, stages) -> None:
        if self.clusters < 1:
            raise InputError("clusters must be >= 1")
        if self.top_k < 1:
            raise InputError("top_k must be >= 1")
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        if self.format not in ("text", "binary"):
            raise InputError(f"format must be text or binary, not {self.format!r}")
        if self.anchor_mode not in ANCHOR_MODES:
            raise InputError(f"anchor_mode must be one of {sorted(ANCHOR_MODES)}")
        if self.count_transform not in ("log1p", "raw"):
            raise InputError("count_transform must be log1p or raw")
        if self.primary_coefficient not in ("pearson", "spearman"):
            raise InputError("primary_coefficient must be pearson or spearman")
        if self.p_method not in ("t", "permutation"):
            raise InputError("p_method must be t or permutation")
        needed = set()
        if set(stages) - {"harvest"}:
            needed |= {"embeddings", "companies", "technologies"}
        if "align" in stages or set(stages) & {"link", "cluster", "project", "validate", "render", "report"}:
            if self.anchor_mode == "supplied":
                needed.add("anchors")
        if "validate" in stages and not {"render", "report"} & set(stages):
            needed.add("patents")
        for key in sorted(needed):
            value = getattr(self, key)
            if not value:
                raise InputError(f"no {key} path configured")
        for key in ("embeddings", "companies", "technologies", "patents", "anchors"):
            value = getattr(self, key)
            if (key in needed or value) and value and not Path(value).exists():
                raise InputError(f"{key} file not found: {value}")

    def decisions(self) -> dict:
        """Effective value of every non-path setting plus the fixed method choices."""
        d = {f.name: getattr(self, f.name) for f in fields(self)
             if f.name not in PATH_KEYS and f.name not in ("user_agent",)}
        d.update({
            "similarity": "cosine; distance = 1 - cosine",
            "linkage": "average linkage on cosine distance, full dimension; projection after clustering",
            "projection": "PCA (cyclic Jacobi on sample covariance)",
            "alignment": "orthogonal Procrustes via one-sided Jacobi SVD; reflections allowed",
            "significance": "one-sided positive, t-approximation" if self.p_method == "t"
                            else f"one-sided positive, {self.n_perm} seeded permutations",
            "zero_counts": "excluded" if self.exclude_zero else "included as 0",
        })
        return d


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


_STORE_CACHE: dict = {}


def _load_store(path: str, fmt: str) -> EmbeddingStore:
    st = os.stat(path)
    key = (os.path.abspath(path), fmt, st.st_size, st.st_mtime_ns)
    if key not in _STORE_CACHE:
        _STORE_CACHE.clear()
        _STORE_CACHE[key] = load_embeddings(path, fmt)
    return _STORE_CACHE[key]


class Context:
    """Lazily computed pipeline state for one configuration."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    @cached_property
    def store(self) -> EmbeddingStore:
        return _load_store(self.config.embeddings, self.config.format)

    @cached_property
    def technologies(self):
        with open(self.config.technologies, "rb") as fh:
            return load_technologies(fh)

    @cached_property
    def companies(self):
        with open(self.config.companies, "rb") as fh:
            comps = load_companies(fh)
        clash = {t.id for t in self.technologies} & {c.id for c in comps}
        if clash:
            raise InputError(f"ids used by both a technology and a company: {sorted(clash)[:5]}")
        return comps

    def _resolve(self, roster) -> ResolvedEntitySet:
        res = resolve_entities(roster, self.store, self.config.entity_prefix)
        if res.resolved:
            unit = unit_normalize(self.store.restrict([r.key for r in res.resolved]))
            res = ResolvedEntitySet(
                tuple(dataclasses.replace(r, vector=unit.matrix[i]) for i, r in enumerate(res.resolved)),
                res.unresolved)
        return res

    @cached_property
    def tech_resolution(self) -> ResolvedEntitySet:
        return self._resolve(self.technologies)

    @cached_property
    def company_resolution(self) -> ResolvedEntitySet:
        return self._resolve(self.companies)

    @property
    def tech_matrix(self) -> np.ndarray:
        return self.tech_resolution.matrix()

    @property
    def company_matrix(self) -> np.ndarray:
        return self.company_resolution.matrix()

    def _require_entities(self):
        if not self.tech_resolution.resolved:
            raise InputError("no technologies resolved against the embedding store")
        if not self.company_resolution.resolved:
            raise InputError("no companies resolved against the embedding store")

    @cached_property
    def alignment(self) -> tuple[OrthogonalMap, tuple]:
        """(map, anchors as (company id, tech id) pairs)."""
        self._require_entities()
        cfg = self.config
        c_ids, t_ids = self.company_resolution.ids, self.tech_resolution.ids
        if cfg.anchor_mode == "supplied":
            with open(cfg.anchors, "rb") as fh:
                supplied = load_anchors(fh)
            c_by_title = {e.wiki_title: i for i, e in enumerate(self.company_resolution.entities)}
            t_by_title = {e.wiki_title: i for i, e in enumerate(self.tech_resolution.entities)}
            idx = []
            for ct, tt in supplied.pairs:
                if ct in c_by_title and tt in t_by_title:
                    idx.append((c_by_title[ct], t_by_title[tt]))
                else:
                    log.warning("anchor (%s, %s) skipped: entity not resolved", ct, tt)
            if not idx:
                raise InputError("none of the supplied anchors resolve")
            ci, ti = map(list, zip(*idx))
            omap = fit_procrustes(self.company_matrix[ci], self.tech_matrix[ti])
        else:
            anchors, omap = refine_anchors(self.company_matrix, self.tech_matrix,
                                           OrthogonalMap.identity(self.store.dimension), cfg.refine_rounds)
            idx = list(anchors.pairs)
        return omap, tuple((c_ids[c], t_ids[t]) for c, t in idx)

    @cached_property
    def aligned_companies(self) -> np.ndarray:
        return apply_alignment(self.company_matrix, self.alignment[0])

    @cached_property
    def similarity(self) -> SimilarityMatrix:
        sim = cross_similarity(self.tech_resolution.ids, self.tech_matrix,
                               self.company_resolution.ids, self.aligned_companies)
        # keep the in-memory matrix equal to its 9-digit export so rankings re-derive exactly
        values = np.array([[float(f"{v:.9g}") for v in row] for row in sim.values])
        return SimilarityMatrix(sim.rows, sim.cols, values)

    @cached_property
    def joint(self):
        entities = self.tech_resolution.entities + self.company_resolution.entities
        return entities, np.vstack([self.tech_matrix, self.aligned_companies])

    @cached_property
    def dendrogram(self):
        self._require_entities()
        return agglomerate(self.joint[1])

    @cached_property
    def assignment(self):
        entities, vectors = self.joint
        k = self.config.clusters
        if k > len(entities):
            raise InputError(f"clusters={k} exceeds the {len(entities)} resolved entities")
        return profile_clusters(cut(self.dendrogram, k), entities, vectors)

    @cached_property
    def projection(self):
        return fit_pca(self.joint[1])

    @cached_property
    def layout(self):
        entities, vectors = self.joint
        return transform(self.projection, [e.id for e in entities], vectors)

    @cached_property
    def validation(self):
        cfg = self.config
        if not cfg.patents:
            return None
        with open(cfg.patents, "rb") as fh:
            table = load_patents(fh, [c.id for c in self.companies], [t.id for t in self.technologies])
        return correlate_all(self.tech_resolution.ids, self.similarity, table, None,
                             alpha=cfg.alpha, transform=cfg.count_transform, exclude_zero=cfg.exclude_zero,
                             primary=cfg.primary_coefficient, method=cfg.p_method, n_perm=cfg.n_perm,
                             seed=cfg.seed)

    def input_digests(self) -> dict:
        cfg = self.config
        return {key: {"file": Path(getattr(cfg, key)).name, "sha256": sha256_file(getattr(cfg, key))}
                for key in ("embeddings", "companies", "technologies", "patents", "anchors")
                if getattr(cfg, key)}

    @cached_property
    def model(self) -> LandscapeModel:
        omap, anchors = self.alignment
        entities, _ = self.joint
        return LandscapeModel(
            technologies=self.technologies, companies=self.companies,
            tech_resolution=self.tech_resolution, company_resolution=self.company_resolution,
            alignment=omap, anchors=anchors, similarity=self.similarity,
            entity_ids=tuple(e.id for e in entities), assignment=self.assignment,
            layout=self.layout, projection=self.projection, validation=self.validation,
            metadata={"inputs": self.input_digests(), "embedding_dimension": self.store.dimension,
                      "embedding_entries": len(self.store), "model": "ET100/R&D Links",
                      "etlinks_version": __version__},
            decisions=self.config.decisions(), top_k=self.config.top_k)


class ArtifactWriter:
    """Writes files atomically and can remove everything it wrote."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.written: list[Path] = []
        self._created_dir = not self.out.exists()

    def write(self, name: str, data: bytes | str) -> Path:
        if isinstance(data, str):
            data = data.encode("utf-8")
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        self.written.append(path)
        return path

    def rollback(self):
        for p in self.written:
            p.unlink(missing_ok=True)
        for p in self.out.glob("*.tmp") if self.out.exists() else ():
            p.unlink(missing_ok=True)
        if self._created_dir and self.out.exists() and not any(self.out.iterdir()):
            self.out.rmdir()
        self.written.clear()


def _csv_rows(header, rows) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def stage_harvest(ctx: Context, w: ArtifactWriter):
    cfg = ctx.config
    pages = fetch_category_tree(cfg.endpoint, cfg.root_category, cfg.max_depth, cache_dir=cfg.cache_dir,
                                user_agent=cfg.user_agent, min_interval=cfg.min_interval)
    w.write("category_pages.csv", _csv_rows(["title", "kind", "depth"], [(p.title, p.kind, p.depth) for p in pages]))
    w.write("technologies_harvested.csv", export_roster(pages))


def stage_resolve(ctx: Context, w: ArtifactWriter):
    rows = []
    for res in (ctx.tech_resolution, ctx.company_resolution):
        rows += [(r.entity.id, r.entity.kind, r.entity.wiki_title, r.key, "resolved", "") for r in res.resolved]
        rows += [(e.id, e.kind, e.wiki_title, "", "unresolved", why) for e, why in res.unresolved]
    w.write("resolution.csv", _csv_rows(["entity_id", "kind", "wiki_title", "key", "status", "reason"], rows))


def stage_align(ctx: Context, w: ArtifactWriter):
    omap, anchors = ctx.alignment
    w.write("alignment.json", dumps_canonical({
        "mode": ANCHOR_MODES[ctx.config.anchor_mode], "anchor_count": omap.anchor_count, "rank": omap.rank,
        "residual": omap.residual, "anchors": [list(a) for a in anchors], "matrix": omap.matrix}))


def stage_link(ctx: Context, w: ArtifactWriter):
    sim, k = ctx.similarity, ctx.config.top_k
    w.write("similarity.csv", export_matrix_csv(sim))
    rows = []
    for direction, queries in ((TECH_TO_COMPANIES, sim.rows), (COMPANY_TO_TECHS, sim.cols)):
        for q in queries:
            for rank, (nid, s) in enumerate(top_k(sim, q, direction, k).neighbors, start=1):
                rows.append((direction, q, rank, nid, f"{s:.9g}"))
    w.write("neighbors.csv", _csv_rows(["direction", "query", "rank", "neighbor", "similarity"], rows))


def stage_cluster(ctx: Context, w: ArtifactWriter):
    w.write("dendrogram.csv", export_dendrogram_csv(ctx.dendrogram))
    w.write("assignment.csv", export_assignment_csv(ctx.joint[0], ctx.assignment))


def stage_project(ctx: Context, w: ArtifactWriter):
    entities = ctx.joint[0]
    labels = dict(zip((e.id for e in entities), ctx.assignment.labels))
    w.write("layout.csv", export_layout_csv(
        ctx.layout, {e.id: e.kind for e in entities}, labels,
        {e.id: e.rnd_meur for e in entities if e.kind == "company"}))


def stage_validate(ctx: Context, w: ArtifactWriter):
    if ctx.validation is None:
        raise InputError("no patents path configured")
    w.write("validation.csv", export_summary_csv(ctx.validation))


def stage_render(ctx: Context, w: ArtifactWriter):
    w.write("map.svg", render_svg(ctx.model))


def stage_report(ctx: Context, w: ArtifactWriter):
    w.write("model.json", export_model_json(ctx.model))
    w.write("report.md", report_markdown(ctx.model))


STAGE_FUNCS = {name: globals()[f"stage_{name}"] for name in STAGES}


def run(subcommand: str, config: PipelineConfig) -> list[Path]:
    """Run one stage (or ``all``), write its artifacts and a manifest.

    On any failure every file written by this run is removed before the
    exception propagates.
    """
    if subcommand == "all":
        stages = [s for s in STAGES if s != "harvest" and (s != "validate" or config.patents)]
    elif subcommand in STAGE_FUNCS:
        stages = [subcommand]
    else:
        raise InputError(f"unknown subcommand {subcommand!r}")
    config.check(stages)
    ctx = Context(config)
    writer = ArtifactWriter(config.out)
    try:
        for stage in stages:
            log.info("stage %s", stage)
            STAGE_FUNCS[stage](ctx, writer)
        manifest = {
            "subcommand": subcommand,
            "stages": stages,
            "inputs": ctx.input_digests() if stages != ["harvest"] else {},
            "decisions": config.decisions(),
            "versions": {"etlinks": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "artifacts": {p.name: sha256_file(p) for p in writer.written},
        }
        writer.write("manifest.json", json.dumps(canonical(manifest), indent=2, sort_keys=True) + "\n")
    except BaseException:
        writer.rollback()
        raise
    return list(writer.written)
