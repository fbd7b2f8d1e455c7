"""In-memory entity embedding store and word2vec-style file parsing.

Two on-disk layouts are understood, both with an ASCII ``N D`` header line:

* text: one ``token v1 ... vD`` line per entry
* binary: ``token``, a space, D little-endian float32 values, ``\\n``

Vectors are held as float64 regardless of the on-disk precision.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import BinaryIO, Iterable, Mapping

import numpy as np

from .errors import (
    CoordinateCountError,
    DuplicateKeyError,
    EntryCountError,
    HeaderError,
    NonFiniteError,
    NormalizationError,
    ParseError,
)

__all__ = [
    "EmbeddingStore",
    "parse_embeddings",
    "load_embeddings",
    "get_vector",
    "unit_normalize",
    "serialize_embeddings",
]

_HEADER = re.compile(rb"^(\d+) (\d+)$")
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class EmbeddingStore:
    """Immutable key -> vector map of fixed dimension."""

    dimension: int
    keys: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False
    _index: Mapping[str, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, copy=True).reshape(len(self.keys), self.dimension)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        index = {}
        for i, key in enumerate(self.keys):
            if key in index:
                raise DuplicateKeyError(f"duplicate key {key!r}")
            index[key] = i
        object.__setattr__(self, "_index", MappingProxyType(index))

    @classmethod
    def from_mapping(cls, entries: Mapping[str, Iterable[float]], normalized: bool = False) -> "EmbeddingStore":
        keys = tuple(entries)
        rows = [np.asarray(entries[k], dtype=np.float64) for k in keys]
        if not rows:
            raise ValueError("cannot infer dimension of an empty mapping")
        return cls(dimension=len(rows[0]), keys=keys, matrix=np.vstack(rows), normalized=normalized)

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._index

    def get(self, key: str) -> np.ndarray | None:
        i = self._index.get(key)
        return None if i is None else self.matrix[i]

    def rows(self, keys: Iterable[str]) -> np.ndarray:
        """Stack the vectors for ``keys`` (all must be present)."""
        idx = [self._index[k] for k in keys]
        return self.matrix[idx] if idx else np.empty((0, self.dimension))

    def restrict(self, keys: Iterable[str]) -> "EmbeddingStore":
        keys = tuple(keys)
        return EmbeddingStore(self.dimension, keys, self.rows(keys), self.normalized)


def get_vector(store: EmbeddingStore, key: str) -> np.ndarray | None:
    """Exact, case-sensitive lookup; ``None`` when the key is absent."""
    return store.get(key)


def unit_normalize(store: EmbeddingStore) -> EmbeddingStore:
    """Return a copy of ``store`` with every vector scaled to unit length."""
    norms = np.linalg.norm(store.matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise NormalizationError(f"zero vector for key {store.keys[zero[0]]!r}")
    if store.normalized:
        return store
    return EmbeddingStore(store.dimension, store.keys, store.matrix / norms[:, None], normalized=True)


def _parse_header(line: bytes) -> tuple[int, int]:
    m = _HEADER.match(line)
    if m is None:
        raise HeaderError(f"malformed header {line[:80]!r}, expected 'N D'", line=1)
    n, d = int(m.group(1)), int(m.group(2))
    if d <= 0:
        raise HeaderError("dimension must be positive", line=1)
    return n, d


def _parse_text(data: bytes) -> EmbeddingStore:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    if not lines:
        raise HeaderError("empty input", line=1)
    n, d = _parse_header(lines[0].rstrip(b"\r"))
    body = lines[1:]
    keys = []
    matrix = np.empty((len(body), d), dtype=np.float64)
    seen = {}
    for i, raw in enumerate(body):
        lineno = i + 2
        try:
            parts = raw.rstrip(b"\r").decode("utf-8").split(" ")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8 ({exc.reason})", line=lineno) from None
        token, values = parts[0], parts[1:]
        if not token:
            raise ParseError("empty token", line=lineno)
        if len(values) != d:
            raise CoordinateCountError(f"expected {d} coordinates for {token!r}, found {len(values)}", line=lineno)
        try:
            row = [float(v) for v in values]
        except ValueError:
            raise ParseError(f"unparseable coordinate for {token!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise NonFiniteError(f"non-finite coordinate for {token!r}", line=lineno)
        if token in seen:
            raise DuplicateKeyError(f"duplicate key {token!r} (first on line {seen[token]})", line=lineno)
        seen[token] = lineno
        keys.append(token)
        matrix[i] = row
    if len(body) != n:
        raise EntryCountError(f"header declares {n} entries, found {len(body)}", line=1)
    return EmbeddingStore(d, tuple(keys), matrix)


def _parse_binary(data: bytes) -> EmbeddingStore:
    nl = data.find(b"\n")
    if nl < 0:
        raise HeaderError("missing header line", line=1)
    n, d = _parse_header(data[:nl].rstrip(b"\r"))
    pos = nl + 1
    width = 4 * d
    keys = []
    matrix = np.empty((n, d), dtype=np.float64)
    seen = {}
    for i in range(n):
        if pos >= len(data) or (pos == len(data) - 1 and data[pos:] == b"\n"):
            raise EntryCountError(f"header declares {n} entries, found {i}", offset=pos)
        sp = data.find(b" ", pos)
        if sp < 0:
            raise ParseError(f"record {i + 1}: missing token separator", offset=pos)
        try:
            token = data[pos:sp].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(f"record {i + 1}: invalid UTF-8 token", offset=pos) from None
        if not token or any(c.isspace() for c in token):
            raise ParseError(f"record {i + 1}: bad token {token!r}", offset=pos)
        start = sp + 1
        end = start + width
        if end + 1 > len(data) or data[end:end + 1] != b"\n":
            raise CoordinateCountError(f"record {i + 1} ({token!r}): expected {d} float32 values then newline", offset=start)
        row = np.frombuffer(data, dtype=_F32, count=d, offset=start).astype(np.float64)
        if not np.all(np.isfinite(row)):
            raise NonFiniteError(f"record {i + 1} ({token!r}): non-finite coordinate", offset=start)
        if token in seen:
            raise DuplicateKeyError(f"record {i + 1}: duplicate key {token!r} (first at offset {seen[token]})", offset=pos)
        seen[token] = pos
        keys.append(token)
        matrix[i] = row
        pos = end + 1
    rest = data[pos:]
    if rest not in (b"", b"\n"):
        raise EntryCountError(f"trailing data after {n} declared entries", offset=pos)
    return EmbeddingStore(d, tuple(keys), matrix)


def parse_embeddings(source: BinaryIO | bytes, format: str = "text") -> EmbeddingStore:
    """Parse an embedding file from a byte stream (or bytes)."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    data = bytes(data)
    if format == "text":
        return _parse_text(data)
    if format == "binary":
        return _parse_binary(data)
    raise ValueError(f"unknown embedding format {format!r}")


def load_embeddings(path, format: str = "text") -> EmbeddingStore:
    with open(path, "rb") as fh:
        return parse_embeddings(fh, format)


def serialize_embeddings(store: EmbeddingStore, format: str = "text") -> bytes:
    """Inverse of :func:`parse_embeddings`.

    Text output uses ``repr`` floats so float64 values survive exactly; the
    binary layout is float32 and therefore lossy for non-float32 inputs.
    """
    out = io.BytesIO()
    out.write(f"{len(store)} {store.dimension}\n".encode("ascii"))
    if format == "text":
        for key, row in zip(store.keys, store.matrix):
            out.write(key.encode("utf-8"))
            out.write(b" ")
            out.write(" ".join(repr(float(v)) for v in row).encode("ascii"))
            out.write(b"\n")
    elif format == "binary":
        for key, row in zip(store.keys, store.matrix):
            out.write(key.encode("utf-8") + b" ")
            out.write(row.astype(_F32).tobytes())
            out.write(b"\n")
    else:
        raise ValueError(f"unknown embedding format {format!r}")
    return out.getvalue()
