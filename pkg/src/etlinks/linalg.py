"""Jacobi-type dense solvers: one-sided SVD and symmetric eigendecomposition.

Both use a round-robin (tournament) ordering so that each step rotates a
set of disjoint index pairs at once, which vectorizes cleanly in numpy.
"""
from __future__ import annotations

import numpy as np

_EPS = np.finfo(np.float64).eps


def round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint pair schedule covering every pair (i < j) of ``range(n)`` once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            rounds.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _orthonormalize(u: np.ndarray) -> np.ndarray:
    """Two-pass Gram-Schmidt over columns; columns that collapse are dropped.

    Columns for well separated singular values pass through unchanged to
    rounding. Columns near the rank cutoff are dominated by rounding noise
    and were never rotated against each other, so they need this pass.
    """
    cols = []
    for j in range(u.shape[1]):
        v = u[:, j].copy()
        for _ in range(2):
            for c in cols:
                v -= (c @ v) * c
        norm = np.linalg.norm(v)
        if norm > 0.5:
            cols.append(v / norm)
    return np.column_stack(cols) if cols else np.empty((u.shape[0], 0))


def _complete_basis(u: np.ndarray, n: int) -> np.ndarray:
    """Extend orthonormal columns ``u`` (m x r) to an m x n orthonormal set."""
    m = u.shape[0]
    cols = [u[:, j] for j in range(u.shape[1])]
    for e in np.eye(m):
        if len(cols) == n:
            break
        v = e.copy()
        for _ in range(2):
            for c in cols:
                v -= (c @ v) * c
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
    return np.column_stack(cols) if cols else np.empty((m, 0))


def jacobi_svd(a, tol: float = 1e-12, max_sweeps: int = 80):
    """One-sided (Hestenes) Jacobi SVD of an m x n matrix with m >= n.

    Returns ``(u, s, vt)`` with ``a = u @ diag(s) @ vt``, singular values in
    descending order and ``u`` (m x n) having orthonormal columns even when
    ``a`` is rank deficient.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    m, n = work.shape
    if m < n:
        u, s, vt = jacobi_svd(work.T, tol, max_sweeps)
        return vt.T, s, u.T
    v = np.eye(n)
    floor = (_EPS * np.sum(work * work)) ** 2 or np.finfo(np.float64).tiny
    schedule = round_robin(n)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in schedule:
            ap, aq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            hit = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (gamma * gamma > floor)
            if not hit.any():
                continue
            rotated = True
            p, q = p[hit], q[hit]
            ap, aq = ap[:, hit], aq[:, hit]
            zeta = (beta[hit] - alpha[hit]) / (2.0 * gamma[hit])
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            work[:, p] = c * ap - s * aq
            work[:, q] = s * ap + c * aq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, work, v = sigma[order], work[:, order], v[:, order]
    cutoff = (sigma[0] if n else 0.0) * max(m, n) * _EPS
    rank = int(np.sum(sigma > cutoff))
    u = _orthonormalize(work[:, :rank] / sigma[:rank])
    u = _complete_basis(u, n)
    return u, sigma, v.T


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 80):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(values, vectors)`` sorted by descending eigenvalue; eigenvectors
    are the columns of ``vectors``.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    n = work.shape[0]
    if work.shape != (n, n):
        raise ValueError("matrix must be square")
    work = 0.5 * (work + work.T)
    v = np.eye(n)
    floor = (_EPS * np.linalg.norm(work)) ** 2 * 1e-4 or np.finfo(np.float64).tiny
    schedule = round_robin(n)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in schedule:
            app, aqq, apq = work[p, p], work[q, q], work[p, q]
            hit = (np.abs(apq) > tol * np.sqrt(np.abs(app * aqq))) & (apq * apq > floor)
            if not hit.any():
                continue
            rotated = True
            p, q = p[hit], q[hit]
            theta = (aqq[hit] - app[hit]) / (2.0 * apq[hit])
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            cp, cq = work[:, p], work[:, q]
            work[:, p] = c * cp - s * cq
            work[:, q] = s * cp + c * cq
            rp, rq = work[p, :], work[q, :]
            work[p, :] = c[:, None] * rp - s[:, None] * rq
            work[q, :] = s[:, None] * rp + c[:, None] * rq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]
