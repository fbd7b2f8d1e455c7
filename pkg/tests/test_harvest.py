import json
from urllib.parse import parse_qs, urlsplit

import pytest

from etlinks.errors import HarvestError
from etlinks.harvest import PAGE, SUBCATEGORY, CategoryClient, CategoryPage, export_roster, fetch_category_tree
from etlinks.registry import load_technologies

ENDPOINT = "https://wiki.test/w/api.php"


class Resp:
    def __init__(self, status, body):
        self.status_code = status
        self.text = body


class FakeWiki:
    """Serves ``categorymembers`` from a dict; pages are split into batches of ``batch``."""

    def __init__(self, tree, batch=500, failures=None):
        self.tree = tree
        self.batch = batch
        self.failures = dict(failures or {})
        self.calls = []
        self.headers = []

    def get(self, url, headers=None, timeout=None):
        self.calls.append(url)
        self.headers.append(headers)
        q = parse_qs(urlsplit(url).query)
        assert q["action"] == ["query"] and q["list"] == ["categorymembers"]
        assert q["cmlimit"] == ["500"] and q["format"] == ["json"]
        name = q["cmtitle"][0].split(":", 1)[1]
        if self.failures.get(name):
            self.failures[name] -= 1
            return Resp(503, "busy")
        members = self.tree.get(name, [])
        start = int(q.get("cmcontinue", ["0"])[0])
        chunk = members[start:start + self.batch]
        body = {"batchcomplete": "", "query": {"categorymembers": [
            {"ns": 14 if t.startswith("Category:") else 0, "title": t} for t in chunk]}}
        if start + self.batch < len(members):
            body["continue"] = {"cmcontinue": str(start + self.batch), "continue": "-||"}
        return Resp(200, json.dumps(body))


def client(wiki, **kw):
    kw.setdefault("min_interval", 0.0)
    kw.setdefault("sleep", lambda s: None)
    return CategoryClient(ENDPOINT, session=wiki, **kw)


def test_follows_continuation():
    wiki = FakeWiki({"Root": ["P1", "P2", "P3"]}, batch=2)
    pages = fetch_category_tree(ENDPOINT, "Root", 0, client=client(wiki))
    assert [p.title for p in pages] == ["P1", "P2", "P3"]
    assert len(wiki.calls) == 2
    assert "cmcontinue=2" in wiki.calls[1]


def test_url_shape():
    url = client(FakeWiki({})).url("Emerging technologies", "abc")
    assert url.startswith(ENDPOINT + "?action=query&list=categorymembers&cmtitle=Category:Emerging+technologies")
    assert url.endswith("&cmlimit=500&format=json&cmcontinue=abc")


def test_depth_zero_does_not_descend():
    wiki = FakeWiki({"Root": ["P1", "Category:Sub"], "Sub": ["P2"]})
    pages = fetch_category_tree(ENDPOINT, "Root", 0, client=client(wiki))
    assert pages == [CategoryPage("P1", PAGE, 0), CategoryPage("Category:Sub", SUBCATEGORY, 0)]
    assert len(wiki.calls) == 1


def test_breadth_first_depths_and_first_depth_wins():
    wiki = FakeWiki({
        "Root": ["Category:A", "Category:B", "Shared"],
        "A": ["Shared", "A1", "Category:C"],
        "B": ["B1"],
        "C": ["C1"],
    })
    pages = fetch_category_tree(ENDPOINT, "Root", 5, client=client(wiki))
    depth = {p.title: p.depth for p in pages}
    assert depth == {"Category:A": 0, "Category:B": 0, "Shared": 0, "A1": 1, "Category:C": 1, "B1": 1, "C1": 2}
    assert [p.title for p in pages] == ["Category:A", "Category:B", "Shared", "A1", "Category:C", "B1", "C1"]


def test_cycle_visits_each_category_once(caplog):
    wiki = FakeWiki({"A": ["Category:B", "a1"], "B": ["Category:A", "b1"]})
    pages = fetch_category_tree(ENDPOINT, "A", 10, client=client(wiki))
    titles = [p.title for p in pages]
    assert len(titles) == len(set(titles))
    assert set(titles) == {"Category:B", "a1", "Category:A", "b1"}
    cats = [parse_qs(urlsplit(u).query)["cmtitle"][0] for u in wiki.calls]
    assert len(cats) == len(set(cats)) == 2
    assert "cycle" in caplog.text


def test_retries_then_succeeds():
    wiki = FakeWiki({"Root": ["P"]}, failures={"Root": 2})
    sleeps = []
    c = client(wiki, sleep=sleeps.append, backoff=0.5)
    assert [p.title for p in fetch_category_tree(ENDPOINT, "Root", 0, client=c)] == ["P"]
    assert sleeps == [0.5, 1.0]


def test_gives_up_after_bounded_retries():
    wiki = FakeWiki({"Root": ["P"]}, failures={"Root": 10})
    with pytest.raises(HarvestError, match="503"):
        fetch_category_tree(ENDPOINT, "Root", 0, client=client(wiki, retries=3))
    assert len(wiki.calls) == 4


def test_malformed_body():
    class Broken(FakeWiki):
        def get(self, url, headers=None, timeout=None):
            return Resp(200, "<html>nope</html>")
    with pytest.raises(HarvestError, match="malformed"):
        fetch_category_tree(ENDPOINT, "Root", 0, client=client(Broken({})))


def test_user_agent_sent_and_required():
    wiki = FakeWiki({"Root": []})
    fetch_category_tree(ENDPOINT, "Root", 0, client=client(wiki, user_agent="tester/1.0 (me@example.org)"))
    assert wiki.headers[0]["User-Agent"] == "tester/1.0 (me@example.org)"
    with pytest.raises(HarvestError):
        client(wiki, user_agent=" ")


def test_rate_limit_spacing():
    now = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        now[0] += s
    wiki = FakeWiki({"Root": ["a", "b", "c"]}, batch=1)
    c = client(wiki, min_interval=1.0, sleep=sleep, clock=lambda: now[0])
    fetch_category_tree(ENDPOINT, "Root", 0, client=c)
    assert sleeps == [1.0, 1.0]


def test_disk_cache_makes_rerun_offline(tmp_path):
    wiki = FakeWiki({"Root": ["P1", "Category:S"], "S": ["P2"]})
    first = fetch_category_tree(ENDPOINT, "Root", 1, client=client(wiki, cache_dir=tmp_path))
    assert len(list(tmp_path.iterdir())) == 2

    class Offline:
        def get(self, *a, **k):
            raise AssertionError("network used")
    again = fetch_category_tree(ENDPOINT, "Root", 1, client=client(Offline(), cache_dir=tmp_path))
    assert again == first


def test_export_empty_is_header_only():
    assert export_roster([]) == b"tech_id,name,wiki_title,theme\n"


def test_export_round_trip_and_identity():
    pages = [CategoryPage("Carbon capture and storage", PAGE, 0), CategoryPage("Category:X", SUBCATEGORY, 0),
             CategoryPage("Fuel cell, solid oxide", PAGE, 1)]
    techs = load_technologies(export_roster(pages))
    assert [t.tech_id for t in techs] == ["t001", "t002"]
    assert techs[0].wiki_title == "Carbon capture and storage"
    assert techs[1].wiki_title == "Fuel cell, solid oxide"
