"""Two-component PCA layout of the joint technology + company space."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, InputError
from .linalg import jacobi_eigh


@dataclass(frozen=True)
class Projection2D:
    mean: np.ndarray
    components: np.ndarray          # (target_dims, d), orthonormal rows
    explained_variance: np.ndarray  # descending


@dataclass(frozen=True)
class MapLayout:
    ids: tuple[str, ...]
    points: np.ndarray              # (n, 2)

    @property
    def extents(self) -> tuple[float, float, float, float]:
        if len(self.ids) == 0:
            return (0.0, 0.0, 0.0, 0.0)
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def point(self, entity_id: str) -> tuple[float, float]:
        x, y = self.points[self.ids.index(entity_id)]
        return float(x), float(y)


def covariance(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance (n - 1 denominator) and the mean it was centred on."""
    mean = x.mean(axis=0)
    centred = x - mean
    return centred.T @ centred / (len(x) - 1), mean


def fit_pca(vectors, target_dims: int = 2) -> Projection2D:
    """Leading principal axes; each axis is signed so its largest-|.| entry is positive."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < target_dims:
        raise InputError(f"PCA needs n >= 3 points in d >= {target_dims} dimensions, got {x.shape}")
    cov, mean = covariance(x)
    if np.trace(cov) <= 0:
        raise InputError("zero total variance")
    values, vectors_ = jacobi_eigh(cov)
    comps = vectors_[:, :target_dims].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    variance = np.maximum(values[:target_dims], 0.0)
    return Projection2D(mean, comps, variance)


def transform(projection: Projection2D, ids: Sequence[str], vectors) -> MapLayout:
    x = np.asarray(vectors, dtype=np.float64).reshape(len(ids), -1)
    if x.shape[1] != projection.mean.shape[0]:
        raise DimensionError(f"vectors have dimension {x.shape[1]}, projection expects {projection.mean.shape[0]}")
    return MapLayout(tuple(ids), (x - projection.mean) @ projection.components.T)


def export_layout_csv(
    layout: MapLayout,
    kinds: Mapping[str, str],
    clusters: Mapping[str, int],
    spend: Mapping[str, float],
) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity_id", "kind", "x", "y", "cluster", "rnd_meur"])
    for eid, (x, y) in zip(layout.ids, layout.points):
        s = spend.get(eid)
        w.writerow([eid, kinds[eid], f"{x:.9g}", f"{y:.9g}", clusters.get(eid, ""), "" if s is None else f"{s:.9g}"])
    return buf.getvalue().encode("utf-8")
