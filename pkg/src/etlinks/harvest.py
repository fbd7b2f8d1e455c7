"""Breadth-first MediaWiki category crawler producing a technology roster."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import urlencode

import requests

from .errors import HarvestError
from .registry import Technology, write_technologies

log = logging.getLogger(__name__)

PAGE = "page"
SUBCATEGORY = "subcategory"
CATEGORY_NS = 14
DEFAULT_USER_AGENT = "etlinks-harvest/0.1 (category roster builder; python-requests)"
RETRY_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class CategoryPage:
    title: str
    kind: str
    depth: int


def _strip_ns(title: str) -> str:
    return title.split(":", 1)[1] if title.startswith("Category:") else title


class CategoryClient:
    """Sequential, rate-limited, disk-cached client for ``list=categorymembers``."""

    def __init__(self, endpoint: str, *, session=None, cache_dir=None, user_agent: str = DEFAULT_USER_AGENT,
                 min_interval: float = 1.0, retries: int = 3, backoff: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.monotonic):
        if not user_agent or not user_agent.strip():
            raise HarvestError("a descriptive User-Agent is required")
        self.endpoint = endpoint
        self.session = session if session is not None else requests.Session()
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.headers = {"User-Agent": user_agent}
        self.min_interval = min_interval
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.clock = clock
        self._last = None
        self.requested: list[str] = []

    def url(self, category: str, cont: str | None = None) -> str:
        params = {"action": "query", "list": "categorymembers", "cmtitle": f"Category:{category}",
                  "cmlimit": "500", "format": "json"}
        if cont is not None:
            params["cmcontinue"] = cont
        return f"{self.endpoint}?{urlencode(params, safe=':|')}"

    def _cache_path(self, url: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / (hashlib.sha256(url.encode("utf-8")).hexdigest() + ".json")

    def _throttle(self):
        if self._last is not None:
            wait = self.min_interval - (self.clock() - self._last)
            if wait > 0:
                self.sleep(wait)
        self._last = self.clock()

    def fetch(self, url: str) -> str:
        cached = self._cache_path(url)
        if cached is not None and cached.exists():
            return cached.read_text(encoding="utf-8")
        attempt = 0
        while True:
            self._throttle()
            self.requested.append(url)
            try:
                resp = self.session.get(url, headers=self.headers, timeout=30)
                status, body = resp.status_code, resp.text
            except requests.RequestException as exc:
                status, body = None, str(exc)
            if status == 200:
                break
            if (status is None or status in RETRY_STATUS) and attempt < self.retries:
                delay = self.backoff * 2 ** attempt
                log.warning("GET %s failed (%s); retrying in %.1fs", url, status or body, delay)
                self.sleep(delay)
                attempt += 1
                continue
            raise HarvestError(f"GET {url} failed with {'status ' + str(status) if status else body}")
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            cached.write_text(body, encoding="utf-8")
        return body

    def members(self, category: str):
        """All members of one category, following continuation tokens."""
        cont = None
        while True:
            url = self.url(category, cont)
            body = self.fetch(url)
            try:
                data = json.loads(body)
                batch = data["query"]["categorymembers"]
                items = [(str(m["title"]), int(m.get("ns", 0))) for m in batch]
            except (ValueError, KeyError, TypeError) as exc:
                raise HarvestError(f"malformed response for {url}: {exc!r}") from None
            yield from items
            cont = (data.get("continue") or {}).get("cmcontinue")
            if not cont:
                return


def fetch_category_tree(endpoint: str, root_category: str, max_depth: int,
                        client: CategoryClient | None = None, **client_options) -> list[CategoryPage]:
    """Breadth-first walk of a category tree down to ``max_depth``.

    Depth 0 holds the root's direct members. Titles are reported once, at
    the first depth they are seen; a subcategory that was already walked is
    skipped with a warning.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    client = client or CategoryClient(endpoint, **client_options)
    root = _strip_ns(root_category)
    queue = deque([(root, 0)])
    scheduled = {root}
    seen_titles = set()
    out = []
    while queue:
        category, depth = queue.popleft()
        for title, ns in client.members(category):
            is_cat = ns == CATEGORY_NS or title.startswith("Category:")
            if title not in seen_titles:
                seen_titles.add(title)
                out.append(CategoryPage(title, SUBCATEGORY if is_cat else PAGE, depth))
            if not is_cat or depth >= max_depth:
                continue
            name = _strip_ns(title)
            if name in scheduled:
                log.warning("category cycle or repeat: %r already visited, skipping", title)
                continue
            scheduled.add(name)
            queue.append((name, depth + 1))
    return out


def export_roster(pages: Sequence[CategoryPage]) -> bytes:
    """Pages (not subcategories) as ``technologies.csv`` rows with ordinal ids."""
    titles = [p.title for p in pages if p.kind == PAGE]
    width = max(3, len(str(len(titles))))
    techs = [Technology(f"t{i:0{width}d}", t, t, None) for i, t in enumerate(titles, start=1)]
    return write_technologies(techs)
