"""Orthogonal Procrustes alignment of the company space onto the technology space."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, MissingColumnError, RefinementError
from .linalg import jacobi_svd

log = logging.getLogger(__name__)

USER_SUPPLIED = "user_supplied"
MUTUAL_NN = "mutual_nn_refined"


@dataclass(frozen=True)
class OrthogonalMap:
    matrix: np.ndarray
    residual: float
    anchor_count: int
    rank: int = -1

    @classmethod
    def identity(cls, d: int) -> "OrthogonalMap":
        return cls(np.eye(d), 0.0, 0, d)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class AnchorSet:
    """(company key, technology key) pairs, or row indices during refinement."""

    pairs: tuple[tuple, ...]
    source: str = USER_SUPPLIED

    def __post_init__(self):
        if len(set(self.pairs)) != len(self.pairs):
            raise InputError("duplicate anchor pair")


def _check_pair(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise DimensionError(f"anchor matrices differ in shape: {x.shape} vs {y.shape}")
    if x.shape[0] == 0:
        raise InputError("at least one anchor pair is required")
    return x, y


def alignment_residual(x, y, omap: OrthogonalMap | np.ndarray) -> float:
    """Root-mean-square anchor error ``||XW - Y||_F / sqrt(n)``."""
    x, y = _check_pair(x, y)
    w = omap.matrix if isinstance(omap, OrthogonalMap) else np.asarray(omap)
    if w.shape != (x.shape[1], x.shape[1]):
        raise DimensionError(f"map is {w.shape}, vectors have dimension {x.shape[1]}")
    return float(np.linalg.norm(x @ w - y) / np.sqrt(x.shape[0]))


def fit_procrustes(x, y) -> OrthogonalMap:
    """Orthogonal W minimizing ``||XW - Y||_F`` (reflections allowed).

    With ``X^T Y = U S V^T`` the minimizer is ``W = U V^T``. Fewer anchors
    than dimensions, or a rank-deficient cross product, still yields a valid
    orthogonal map but it is not unique; a warning records the rank.
    """
    x, y = _check_pair(x, y)
    n, d = x.shape
    u, s, vt = jacobi_svd(x.T @ y)
    w = u @ vt
    rank = int(np.sum(s > s[0] * d * np.finfo(float).eps)) if s[0] > 0 else 0
    if n < d or rank < d:
        log.warning("degenerate Procrustes problem: %d anchors, dimension %d, cross-product rank %d", n, d, rank)
    return OrthogonalMap(w, alignment_residual(x, y, w), n, rank)


def apply_alignment(vectors, omap: OrthogonalMap) -> np.ndarray:
    """Rotate company row vectors: ``x -> x W``."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != omap.dimension:
        raise DimensionError(f"vectors of shape {v.shape} do not match map dimension {omap.dimension}")
    return v @ omap.matrix


def mutual_nearest(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    """Index pairs (i, j) with a[i] and b[j] each other's top-1 by cosine.

    Rows are assumed unit length. Ties resolve to the lowest index.
    """
    if len(a) == 0 or len(b) == 0:
        return []
    sim = a @ b.T
    best_b = np.argmax(sim, axis=1)
    best_a = np.argmax(sim, axis=0)
    return [(i, int(j)) for i, j in enumerate(best_b) if best_a[j] == i]


def refine_anchors(companies, technologies, omap: OrthogonalMap, rounds: int):
    """Iterative Procrustes on mutual nearest neighbours.

    ``companies`` are the unaligned company vectors; each round aligns them
    with the current map, collects mutual nearest neighbours against
    ``technologies`` and refits. Stops after ``rounds`` or once the anchor
    set repeats. Returns ``(AnchorSet of index pairs, OrthogonalMap)``.
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    c = np.asarray(companies, dtype=np.float64)
    t = np.asarray(technologies, dtype=np.float64)
    anchors = AnchorSet((), MUTUAL_NN)
    seen = set()
    for r in range(1, rounds + 1):
        aligned = apply_alignment(c, omap)
        aligned = aligned / np.linalg.norm(aligned, axis=1, keepdims=True)
        pairs = tuple(mutual_nearest(aligned, t))
        if not pairs:
            raise RefinementError(f"no mutual nearest neighbours in round {r}")
        if pairs in seen:
            break
        seen.add(pairs)
        anchors = AnchorSet(pairs, MUTUAL_NN)
        ci, ti = zip(*pairs)
        omap = fit_procrustes(c[list(ci)], t[list(ti)])
        log.info("refinement round %d: %d anchors, residual %.6g", r, len(pairs), omap.residual)
    return anchors, omap


ANCHOR_COLUMNS = ("company_wiki_title", "technology_wiki_title")


def load_anchors(source) -> AnchorSet:
    """Read ``anchors.csv`` into an AnchorSet of (company title, technology title)."""
    if not isinstance(source, (str, bytes)):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(source, newline=""))
    missing = [c for c in ANCHOR_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise MissingColumnError(f"anchors file missing column(s) {', '.join(missing)}")
    pairs = []
    for rec in reader:
        pair = (rec["company_wiki_title"].strip(), rec["technology_wiki_title"].strip())
        if not all(pair):
            raise InputError(f"anchors row {reader.line_num}: empty title")
        if pair in pairs:
            raise InputError(f"anchors row {reader.line_num}: duplicate pair {pair}")
        pairs.append(pair)
    if not pairs:
        raise InputError("anchors file has no pairs")
    return AnchorSet(tuple(pairs), USER_SUPPLIED)
