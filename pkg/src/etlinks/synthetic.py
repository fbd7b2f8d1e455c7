"""Synthetic fixture with planted cluster and patent structure.

Four themes each get a random unit centre; technologies and companies are
noisy copies of their theme centre. Company vectors are then rotated by a
small fixed orthogonal matrix, standing in for the offset between entity
types that the alignment step has to undo. Patent counts for
``CORRELATED_TECH`` grow with the true company-technology cosine; counts
for ``NOISE_TECH`` are drawn independently of geometry.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .embeddings import EmbeddingStore, serialize_embeddings
from .registry import Company, Technology, entity_key, write_companies, write_technologies

THEMES = ("Energy", "Pharma", "Telecom", "Mobility")
CORRELATED_TECH = "t001"
NOISE_TECH = "t007"
MISSING_COMPANY = "Ghost Holdings"
MISSING_TECH_ID = "t021"


@dataclass(frozen=True)
class FixtureSpec:
    dimension: int = 12
    techs_per_theme: int = 5
    companies: int = 30
    spread: float = 0.2
    rotation: float = 0.12
    filler_words: int = 12


def _unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate(seed: int = 0, spec: FixtureSpec = FixtureSpec()) -> dict[str, bytes]:
    """Return ``{filename: bytes}`` for the fixture files (config excluded)."""
    rng = np.random.default_rng(seed)
    d = spec.dimension
    centres = _unit(rng, len(THEMES), d)

    techs, tech_vecs = [], []
    for g, theme in enumerate(THEMES):
        for j in range(spec.techs_per_theme):
            i = len(techs) + 1
            name = f"{theme} technology {j + 1}"
            techs.append(Technology(f"t{i:03d}", name, name, "circular-economy" if theme == "Energy" else None))
            tech_vecs.append(centres[g] + spec.spread * rng.standard_normal(d))
    tech_vecs = np.array(tech_vecs)

    comps, comp_true = [], []
    for i in range(spec.companies):
        g = i % len(THEMES)
        name = f"{THEMES[g]} Corp {i // len(THEMES) + 1}"
        spend = float(np.round(np.exp(rng.normal(6.5, 1.0)), 1))
        comps.append(Company(i + 1, name, name, spend, "Testland", THEMES[g]))
        comp_true.append(centres[g] + spec.spread * rng.standard_normal(d))
    comp_true = np.array(comp_true)

    skew = rng.standard_normal((d, d))
    skew = spec.rotation * (skew - skew.T) / np.sqrt(2 * d)
    offset = expm(skew)
    comp_vecs = comp_true @ offset

    entries = {entity_key(t.wiki_title): v for t, v in zip(techs, tech_vecs)}
    entries.update({entity_key(c.wiki_title): v for c, v in zip(comps, comp_vecs)})
    for w in range(spec.filler_words):
        entries[f"word{w:02d}"] = rng.standard_normal(d)
    keys = sorted(entries)
    store = EmbeddingStore(d, tuple(keys), np.array([entries[k] for k in keys]))

    unit_t = tech_vecs / np.linalg.norm(tech_vecs, axis=1, keepdims=True)
    unit_c = comp_true / np.linalg.norm(comp_true, axis=1, keepdims=True)
    true_cos = unit_c @ unit_t.T
    rows = []
    for ci, c in enumerate(comps):
        for ti, t in enumerate(techs):
            if t.tech_id == NOISE_TECH:
                count = rng.poisson(20)
            elif t.tech_id == CORRELATED_TECH:
                count = rng.poisson(np.exp(1.0 + 3.5 * true_cos[ci, ti]))
            else:
                count = rng.poisson(np.exp(0.5 + 1.5 * true_cos[ci, ti]))
            rows.append(f"{c.wiki_title},{t.tech_id},{int(count)}")

    # roster entries with no embedding, to exercise the unresolved path
    comps_out = comps + [Company(len(comps) + 1, MISSING_COMPANY, MISSING_COMPANY, 50.0, "Nowhere", "None")]
    techs_out = techs + [Technology(MISSING_TECH_ID, "Unobtainium refining", "Unobtainium refining", None)]

    anchors = ["company_wiki_title,technology_wiki_title"]
    for g in range(len(THEMES)):
        members = [ci for ci in range(len(comps)) if ci % len(THEMES) == g]
        for ci in members[:3]:
            ti = int(np.argmax(true_cos[ci, g * spec.techs_per_theme:(g + 1) * spec.techs_per_theme])) + g * spec.techs_per_theme
            anchors.append(f"{comps[ci].wiki_title},{techs[ti].wiki_title}")

    return {
        "embeddings.txt": serialize_embeddings(store, "text"),
        "companies.csv": write_companies(comps_out),
        "technologies.csv": write_technologies(techs_out),
        "patents.csv": ("company_wiki_title,tech_id,patent_count\n" + "\n".join(rows) + "\n").encode(),
        "anchors.csv": ("\n".join(anchors) + "\n").encode(),
    }


CONFIG = """[etlinks]
embeddings = embeddings.txt
format = text
companies = companies.csv
technologies = technologies.csv
patents = patents.csv
anchors = anchors.csv
anchor_mode = mutual-nn
clusters = 4
top_k = 5
alpha = 0.05
seed = 42
"""


def write_fixture(directory, seed: int = 0, spec: FixtureSpec = FixtureSpec()) -> Path:
    """Write fixture files plus ``config.ini`` into ``directory``; return the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, data in generate(seed, spec).items():
        (directory / name).write_bytes(data)
    cfg = directory / "config.ini"
    cfg.write_text(CONFIG, encoding="utf-8")
    return cfg
