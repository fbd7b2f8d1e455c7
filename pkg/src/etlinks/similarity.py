"""Cosine similarity, the technology x company matrix, and ranked neighbours."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InputError

TECH_TO_COMPANIES = "tech_to_companies"
COMPANY_TO_TECHS = "company_to_techs"


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise InputError("cosine similarity of a zero vector is undefined")
    return float(min(1.0, max(-1.0, (u @ v) / (nu * nv))))


@dataclass(frozen=True)
class SimilarityMatrix:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise DimensionError(f"values {self.values.shape} vs axes {len(self.rows)}x{len(self.cols)}")

    def row(self, tech_id: str) -> np.ndarray:
        return self.values[self.rows.index(tech_id)]

    def col(self, company_id: str) -> np.ndarray:
        return self.values[:, self.cols.index(company_id)]

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(self.cols, self.rows, self.values.T.copy())


@dataclass(frozen=True)
class NeighborList:
    query: str
    neighbors: tuple[tuple[str, float], ...]

    @property
    def ids(self) -> list[str]:
        return [n for n, _ in self.neighbors]


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InputError("zero vector in similarity input")
    return m / norms


def cross_similarity(tech_ids: Sequence[str], tech_vectors, company_ids: Sequence[str], company_vectors) -> SimilarityMatrix:
    """Cosine of every technology (rows) against every company (columns)."""
    t = np.asarray(tech_vectors, dtype=np.float64)
    c = np.asarray(company_vectors, dtype=np.float64)
    if len(tech_ids) == 0 or len(company_ids) == 0:
        raise InputError("cross similarity needs at least one technology and one company")
    if t.shape[0] != len(tech_ids) or c.shape[0] != len(company_ids):
        raise DimensionError("ids and vectors differ in length")
    if t.shape[1] != c.shape[1]:
        raise DimensionError(f"technology dimension {t.shape[1]} != company dimension {c.shape[1]}")
    values = np.clip(_unit_rows(t) @ _unit_rows(c).T, -1.0, 1.0)
    return SimilarityMatrix(tuple(tech_ids), tuple(company_ids), values)


def rank_order(ids: Sequence[str], sims) -> np.ndarray:
    """Indices sorted by descending similarity, ties by ascending id."""
    sims = np.asarray(sims)
    return np.lexsort((np.asarray(ids, dtype=str), -sims))


def top_k(matrix: SimilarityMatrix, query: str, direction: str, k: int) -> NeighborList:
    if k < 1:
        raise ValueError("k must be at least 1")
    if direction == TECH_TO_COMPANIES:
        if query not in matrix.rows:
            raise KeyError(f"unknown technology id {query!r}")
        sims, ids = matrix.row(query), matrix.cols
    elif direction == COMPANY_TO_TECHS:
        if query not in matrix.cols:
            raise KeyError(f"unknown company id {query!r}")
        sims, ids = matrix.col(query), matrix.rows
    else:
        raise ValueError(f"unknown direction {direction!r}")
    order = rank_order(ids, sims)[:k]
    return NeighborList(query, tuple((ids[i], float(sims[i])) for i in order))


def export_matrix_csv(matrix: SimilarityMatrix) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tech_id", *matrix.cols])
    for tid, row in zip(matrix.rows, matrix.values):
        w.writerow([tid, *(f"{v:.9g}" for v in row)])
    return buf.getvalue().encode("utf-8")


def load_matrix_csv(source) -> SimilarityMatrix:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    rows = list(csv.reader(io.StringIO(source, newline="")))
    cols = tuple(rows[0][1:])
    ids = tuple(r[0] for r in rows[1:])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64).reshape(len(ids), len(cols))
    return SimilarityMatrix(ids, cols, values)
