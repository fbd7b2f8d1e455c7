"""Company and technology rosters, and their resolution to embedding keys."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import BinaryIO, Sequence, Union

import numpy as np

from .embeddings import EmbeddingStore
from .errors import BadValueError, DuplicateEntryError, MissingColumnError, RosterError

COMPANY_COLUMNS = ("rank", "name", "wiki_title", "rnd_meur", "country", "industry")
TECHNOLOGY_COLUMNS = ("tech_id", "name", "wiki_title", "theme")
DEFAULT_PREFIX = "ENTITY/"
MISSING_KEY = "missing key"


@dataclass(frozen=True)
class Company:
    rank: int
    name: str
    wiki_title: str
    rnd_meur: float
    country: str = ""
    industry: str = ""

    kind = "company"

    @property
    def id(self) -> str:
        return self.wiki_title


@dataclass(frozen=True)
class Technology:
    tech_id: str
    name: str
    wiki_title: str
    theme: str | None = None

    kind = "technology"

    @property
    def id(self) -> str:
        return self.tech_id


Entity = Union[Company, Technology]


@dataclass(frozen=True)
class ResolvedEntity:
    entity: Entity
    key: str
    vector: np.ndarray


@dataclass(frozen=True)
class ResolvedEntitySet:
    resolved: tuple[ResolvedEntity, ...]
    unresolved: tuple[tuple[Entity, str], ...]

    @property
    def ids(self) -> list[str]:
        return [r.entity.id for r in self.resolved]

    @property
    def entities(self) -> list[Entity]:
        return [r.entity for r in self.resolved]

    def matrix(self) -> np.ndarray:
        if not self.resolved:
            return np.empty((0, 0))
        return np.vstack([r.vector for r in self.resolved])

    def __len__(self):
        return len(self.resolved) + len(self.unresolved)


def _reader(source: BinaryIO | bytes | str, columns: Sequence[str]):
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text, newline=""))
    header = reader.fieldnames or []
    missing = [c for c in columns if c not in header]
    if missing:
        raise MissingColumnError(f"missing column(s) {', '.join(missing)}; header is {','.join(header) or '<empty>'}")
    return reader


def _check_unique(seen: dict, value: str, field: str, row: int):
    if value in seen:
        raise DuplicateEntryError(f"duplicate {field} {value!r} on rows {seen[value]} and {row}")
    seen[value] = row


def load_companies(source) -> list[Company]:
    """Read ``companies.csv``. Row numbers in errors are file line numbers."""
    reader = _reader(source, COMPANY_COLUMNS)
    out, titles = [], {}
    for rec in reader:
        row = reader.line_num
        if None in rec.values() or None in rec:
            raise RosterError(f"row {row}: wrong number of fields")
        try:
            rank = int(rec["rank"])
        except ValueError:
            raise BadValueError(f"row {row}: rank {rec['rank']!r} is not an integer") from None
        if rank < 1:
            raise BadValueError(f"row {row}: rank must be positive")
        try:
            spend = float(rec["rnd_meur"])
        except ValueError:
            raise BadValueError(f"row {row}: rnd_meur {rec['rnd_meur']!r} is not numeric") from None
        if not math.isfinite(spend) or spend < 0:
            raise BadValueError(f"row {row}: rnd_meur must be a non-negative number")
        title = rec["wiki_title"].strip()
        if not title:
            raise BadValueError(f"row {row}: empty wiki_title")
        _check_unique(titles, title, "wiki_title", row)
        out.append(Company(rank, rec["name"], title, spend, rec["country"], rec["industry"]))
    return out


def load_technologies(source) -> list[Technology]:
    reader = _reader(source, TECHNOLOGY_COLUMNS)
    out, ids, titles = [], {}, {}
    for rec in reader:
        row = reader.line_num
        if None in rec.values() or None in rec:
            raise RosterError(f"row {row}: wrong number of fields")
        tech_id = rec["tech_id"].strip()
        title = rec["wiki_title"].strip()
        if not tech_id:
            raise BadValueError(f"row {row}: empty tech_id")
        if not title:
            raise BadValueError(f"row {row}: empty wiki_title")
        _check_unique(ids, tech_id, "tech_id", row)
        _check_unique(titles, title, "wiki_title", row)
        out.append(Technology(tech_id, rec["name"], title, rec["theme"].strip() or None))
    return out


def entity_key(wiki_title: str, prefix: str = DEFAULT_PREFIX) -> str:
    """Page title -> embedding token: prefix plus underscores for spaces.

    Case is left untouched, including the first character.
    """
    return prefix + wiki_title.replace(" ", "_")


def resolve_entities(roster: Sequence[Entity], store: EmbeddingStore, prefix: str = DEFAULT_PREFIX) -> ResolvedEntitySet:
    resolved, unresolved = [], []
    for entity in roster:
        key = entity_key(entity.wiki_title, prefix)
        vec = store.get(key)
        if vec is None:
            unresolved.append((entity, MISSING_KEY))
        else:
            resolved.append(ResolvedEntity(entity, key, vec))
    return ResolvedEntitySet(tuple(resolved), tuple(unresolved))


def write_companies(companies: Sequence[Company]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPANY_COLUMNS)
    for c in companies:
        w.writerow([c.rank, c.name, c.wiki_title, repr(float(c.rnd_meur)), c.country, c.industry])
    return buf.getvalue().encode("utf-8")


def write_technologies(technologies: Sequence[Technology]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TECHNOLOGY_COLUMNS)
    for t in technologies:
        w.writerow([t.tech_id, t.name, t.wiki_title, t.theme or ""])
    return buf.getvalue().encode("utf-8")
