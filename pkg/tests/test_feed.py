import io
import tarfile

import httpx
import pytest
from hypothesis import given, strategies as st

from pkgsleuth.errors import FeedUnavailable, MalformedFeed, NoSourceCode
from pkgsleuth.feed import download_release, fetch_feed, resolve_archive_url
from pkgsleuth.ingest import ReleaseRef

FEED_XML = """<?xml version="1.0"?>
<rss version="2.0">
 <channel>
  <title>PyPI recent updates</title>
  <item><title>alpha 1.0.0</title><link>https://pypi.org/project/alpha/1.0.0/</link>
        <pubDate>Mon, 06 Jan 2025 10:00:00 GMT</pubDate></item>
  <item><title>beta 2.1.0</title><link>https://pypi.org/project/beta/2.1.0/</link>
        <pubDate>Mon, 06 Jan 2025 11:00:00 GMT</pubDate></item>
  <item><title>gamma 0.3.1</title><link>https://pypi.org/project/gamma/0.3.1/</link>
        <pubDate>Mon, 06 Jan 2025 12:00:00 GMT</pubDate></item>
 </channel>
</rss>
"""


def feed_client(body: bytes, status: int = 200):
    def handler(request):
        return httpx.Response(status, content=body)

    return httpx.Client(transport=httpx.MockTransport(handler))


def test_fetch_feed_returns_unseen_sorted():
    with feed_client(FEED_XML.encode()) as client:
        refs = fetch_feed("https://pypi.org/rss/updates.xml", set(), client=client)
    assert [r.name for r in refs] == ["alpha", "beta", "gamma"]
    assert refs[0].published_at < refs[1].published_at < refs[2].published_at

    seen = {refs[0]}
    with feed_client(FEED_XML.encode()) as client:
        rest = fetch_feed("https://pypi.org/rss/updates.xml", seen, client=client)
    assert [r.name for r in rest] == ["beta", "gamma"]


def test_fetch_feed_idempotent():
    with feed_client(FEED_XML.encode()) as client:
        first = fetch_feed("https://pypi.org/rss/updates.xml", set(), client=client)
        second = fetch_feed("https://pypi.org/rss/updates.xml", set(first), client=client)
    assert second == []


def test_truncated_xml_is_malformed():
    body = FEED_XML[: len(FEED_XML) // 2].encode()
    with feed_client(body) as client:
        with pytest.raises(MalformedFeed):
            fetch_feed("https://pypi.org/rss/updates.xml", set(), client=client)


def test_http_error_is_unavailable():
    with feed_client(b"", status=503) as client:
        with pytest.raises(FeedUnavailable):
            fetch_feed("https://pypi.org/rss/updates.xml", set(), client=client)


@given(st.sets(st.integers(min_value=0, max_value=2)))
def test_fetch_feed_never_returns_seen(seen_indices):
    with feed_client(FEED_XML.encode()) as client:
        everything = fetch_feed("https://pypi.org/rss/updates.xml", set(), client=client)
    seen = {everything[i] for i in seen_indices}
    with feed_client(FEED_XML.encode()) as client:
        out = fetch_feed("https://pypi.org/rss/updates.xml", seen, client=client)
    assert not (set(out) & seen)
    assert set(out) == set(everything) - seen


def _sdist_bytes() -> bytes:
    buffer = io.BytesIO()
    with tarfile.open(fileobj=buffer, mode="w:gz") as tf:
        for name, data in {
            "alpha-1.0.0/setup.py": b"from setuptools import setup\nsetup()\n",
            "alpha-1.0.0/alpha/__init__.py": b"x = 1\n",
        }.items():
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tf.addfile(info, io.BytesIO(data))
    return buffer.getvalue()


def recorded_registry(tmp_path):
    sdist = _sdist_bytes()

    def handler(request):
        url = str(request.url)
        if url.endswith("/json"):
            return httpx.Response(200, json={
                "urls": [{"packagetype": "sdist",
                          "url": "https://files.pythonhosted.org/alpha-1.0.0.tar.gz"}]
            })
        if url.endswith(".tar.gz"):
            return httpx.Response(200, content=sdist)
        return httpx.Response(404)

    return httpx.Client(transport=httpx.MockTransport(handler))


def test_download_release_fixture(tmp_path):
    ref = ReleaseRef("alpha", "1.0.0", "2025-01-06T10:00:00",
                     "https://pypi.org/project/alpha/1.0.0/")
    with recorded_registry(tmp_path) as client:
        artifact = download_release(ref, tmp_path, client=client)
    assert artifact.name == "alpha"
    assert artifact.origin == "feed"
    assert artifact.metadata_unit is not None
    assert len(artifact.source_units) == 1


def test_download_404_maps_to_unavailable(tmp_path):
    def handler(request):
        return httpx.Response(404)

    ref = ReleaseRef("gone", "0.1", "2025-01-06", "https://files.pythonhosted.org/gone-0.1.tar.gz")
    with httpx.Client(transport=httpx.MockTransport(handler)) as client:
        with pytest.raises(FeedUnavailable):
            download_release(ref, tmp_path, client=client)


def test_download_wheel_without_py(tmp_path):
    import zipfile

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as zf:
        zf.writestr("empty/data.txt", "nothing")

    def handler(request):
        return httpx.Response(200, content=buffer.getvalue())

    ref = ReleaseRef("empty", "1.0", "2025-01-06", "https://files.pythonhosted.org/empty-1.0.whl")
    with httpx.Client(transport=httpx.MockTransport(handler)) as client:
        with pytest.raises(NoSourceCode):
            download_release(ref, tmp_path, client=client)


def test_resolve_archive_url_passthrough():
    ref = ReleaseRef("x", "1", "t", "https://files.pythonhosted.org/x-1.tar.gz")
    assert resolve_archive_url(ref) == ref.archive_url
