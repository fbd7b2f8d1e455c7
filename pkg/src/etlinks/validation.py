"""Patent-count validation of the similarity model.

For each technology, the similarity of every in-scope company to it is
correlated with that company's patent count in the technology.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import BadValueError, InputError, MissingColumnError, RosterError
from .similarity import SimilarityMatrix

log = logging.getLogger(__name__)

PATENT_COLUMNS = ("company_wiki_title", "tech_id", "patent_count")
SUMMARY_COLUMNS = ("tech_id", "n", "pearson_r", "pearson_p", "spearman_rho", "spearman_p", "significant", "degenerate")


@dataclass(frozen=True)
class PatentTable:
    counts: dict
    coverage: frozenset = frozenset()
    warnings: tuple[str, ...] = ()

    def count(self, company_id: str, tech_id: str) -> int:
        return self.counts.get((company_id, tech_id), 0)


@dataclass(frozen=True)
class CorrelationResult:
    tech_id: str
    n: int
    pearson_r: float
    pearson_p: float
    spearman_rho: float
    spearman_p: float
    significant: bool
    degenerate: bool = False
    reason: str = ""


def load_patents(source, company_ids: Iterable[str] | None = None, tech_ids: Iterable[str] | None = None) -> PatentTable:
    """Read ``patents.csv``; ids unknown to the given rosters only warn."""
    if not isinstance(source, (str, bytes)):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(source, newline=""))
    if reader.fieldnames is None:
        return PatentTable({}, frozenset())
    missing = [c for c in PATENT_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise MissingColumnError(f"patents file missing column(s) {', '.join(missing)}")
    known_c = set(company_ids) if company_ids is not None else None
    known_t = set(tech_ids) if tech_ids is not None else None
    counts, coverage, warnings = {}, set(), []
    for rec in reader:
        row = reader.line_num
        if None in rec or None in rec.values():
            raise RosterError(f"patents row {row}: malformed row")
        company, tech, raw = rec["company_wiki_title"].strip(), rec["tech_id"].strip(), rec["patent_count"].strip()
        if not company or not tech:
            raise RosterError(f"patents row {row}: empty id")
        try:
            value = int(raw)
        except ValueError:
            raise BadValueError(f"patents row {row}: count {raw!r} is not an integer") from None
        if value < 0:
            raise BadValueError(f"patents row {row}: negative count {value}")
        if (company, tech) in counts:
            raise RosterError(f"patents row {row}: duplicate pair ({company}, {tech})")
        if known_c is not None and company not in known_c:
            warnings.append(f"row {row}: unknown company {company!r}")
        if known_t is not None and tech not in known_t:
            warnings.append(f"row {row}: unknown technology {tech!r}")
        counts[(company, tech)] = value
        coverage.add(company)
    for w in warnings:
        log.warning("patents: %s", w)
    return PatentTable(counts, frozenset(coverage), tuple(warnings))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    sorted_v = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        return math.nan
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def spearman_rho(x, y) -> float:
    return pearson_r(average_ranks(x), average_ranks(y))


def t_pvalue(r: float, n: int) -> float:
    """Two-sided p for H0: no correlation, via t = r sqrt((n-2)/(1-r^2))."""
    if math.isnan(r):
        return math.nan
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))


def permutation_pvalue(x, y, coef=pearson_r, n_perm: int = 10_000, seed: int = 0) -> float:
    """Two-sided permutation p, ``(b + 1) / (B + 1)`` with b shuffles at least as extreme."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    observed = coef(x, y)
    if math.isnan(observed):
        return math.nan
    rng = np.random.default_rng(seed)
    if coef is spearman_rho:
        x, y, coef = average_ranks(x), average_ranks(y), pearson_r
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt((dx @ dx) * (dy @ dy))
    perms = rng.permuted(np.tile(dy, (n_perm, 1)), axis=1)
    null = perms @ dx / denom
    hits = np.sum(np.abs(null) >= abs(observed) - 1e-12)
    return float((hits + 1) / (n_perm + 1))


def correlation_sample(tech_id: str, matrix: SimilarityMatrix, patents: PatentTable,
                       companies: Sequence[str] | None = None, exclude_zero: bool = False):
    if tech_id not in matrix.rows:
        raise KeyError(f"technology {tech_id!r} not in similarity matrix")
    scope = list(companies) if companies is not None else [c for c in matrix.cols if c in patents.coverage]
    row = matrix.row(tech_id)
    col = {c: i for i, c in enumerate(matrix.cols)}
    pairs = [(row[col[c]], patents.count(c, tech_id)) for c in scope if c in col]
    if exclude_zero:
        pairs = [p for p in pairs if p[1] > 0]
    x = np.array([p[0] for p in pairs], dtype=np.float64)
    y = np.array([p[1] for p in pairs], dtype=np.float64)
    return x, y


def correlate_technology(
    tech_id: str,
    matrix: SimilarityMatrix,
    patents: PatentTable,
    companies: Sequence[str] | None = None,
    *,
    alpha: float = 0.05,
    transform: str = "log1p",
    exclude_zero: bool = False,
    primary: str = "pearson",
    method: str = "t",
    n_perm: int = 10_000,
    seed: int = 0,
) -> CorrelationResult:
    """Pearson and Spearman correlation of similarity against patent counts.

    ``companies`` defaults to every matrix company with any patent data.
    ``significant`` means the ``primary`` coefficient is positive with
    one-sided p below ``alpha``.
    """
    x, counts = correlation_sample(tech_id, matrix, patents, companies, exclude_zero)
    n = len(x)
    if n < 3:
        raise InputError(f"technology {tech_id!r}: {n} companies in scope, need at least 3")
    if transform == "log1p":
        y = np.log1p(counts)
    elif transform == "raw":
        y = counts
    else:
        raise ValueError(f"unknown count transform {transform!r}")
    r = pearson_r(x, y)
    rho = spearman_rho(x, counts)
    if math.isnan(r) or math.isnan(rho):
        return CorrelationResult(tech_id, n, math.nan, math.nan, math.nan, math.nan, False, True, "zero variance")
    if method == "t":
        pr, ps = t_pvalue(r, n), t_pvalue(rho, n)
    elif method == "permutation":
        pr = permutation_pvalue(x, y, pearson_r, n_perm, seed)
        ps = permutation_pvalue(x, counts, spearman_rho, n_perm, seed)
    else:
        raise ValueError(f"unknown p-value method {method!r}")
    coef, p = (r, pr) if primary == "pearson" else (rho, ps)
    significant = bool(coef > 0 and p / 2 < alpha)
    return CorrelationResult(tech_id, n, r, pr, rho, ps, significant)


def correlate_all(tech_ids: Sequence[str], matrix: SimilarityMatrix, patents: PatentTable,
                  companies: Sequence[str] | None = None, **options) -> list[CorrelationResult]:
    """Run :func:`correlate_technology` per technology; too-small samples become degenerate rows."""
    out = []
    for tid in tech_ids:
        try:
            out.append(correlate_technology(tid, matrix, patents, companies, **options))
        except InputError as exc:
            n = len(correlation_sample(tid, matrix, patents, companies, options.get("exclude_zero", False))[0])
            out.append(CorrelationResult(tid, n, math.nan, math.nan, math.nan, math.nan, False, True, str(exc)))
    return out


@dataclass(frozen=True)
class ValidationSummary:
    significant: int
    not_significant: int
    degenerate: int
    ranked: tuple[CorrelationResult, ...] = field(default=())

    @property
    def total(self) -> int:
        return self.significant + self.not_significant + self.degenerate


def validation_summary(results: Sequence[CorrelationResult], primary: str = "pearson") -> ValidationSummary:
    attr = "pearson_r" if primary == "pearson" else "spearman_rho"

    def key(r):
        v = getattr(r, attr)
        return (math.isnan(v), -v if not math.isnan(v) else 0.0, r.tech_id)

    degenerate = sum(r.degenerate for r in results)
    significant = sum(r.significant for r in results)
    return ValidationSummary(significant, len(results) - significant - degenerate, degenerate,
                             tuple(sorted(results, key=key)))


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.9g}"


def export_summary_csv(results: Sequence[CorrelationResult]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in results:
        w.writerow([r.tech_id, r.n, _fmt(r.pearson_r), _fmt(r.pearson_p), _fmt(r.spearman_rho),
                    _fmt(r.spearman_p), str(r.significant).lower(), str(r.degenerate).lower()])
    return buf.getvalue().encode("utf-8")
