"""Registry feed polling and release downloading.

The registry announces new packages and releases over RSS 2.0
(``.../rss/packages.xml`` and ``.../rss/updates.xml``). Each item's title is
``<name> <version>`` (bare ``<name>`` on the new-packages feed) and the link
points at the project page; the sdist URL is resolved through the registry
JSON API when the link is not a direct archive.
"""

from __future__ import annotations

import email.utils
import logging
import os
import xml.etree.ElementTree as ET
from pathlib import Path

import httpx

from .errors import FeedUnavailable, MalformedFeed
from .ingest import PackageArtifact, ReleaseRef, load_package

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


def _client(client: httpx.Client | None) -> httpx.Client:
    return client if client is not None else httpx.Client(timeout=DEFAULT_TIMEOUT, follow_redirects=True)


def _parse_pubdate(text: str) -> str:
    try:
        return email.utils.parsedate_to_datetime(text.strip()).isoformat()
    except (TypeError, ValueError):
        return text.strip()


def fetch_feed(feed_url: str, seen: set[ReleaseRef] | None = None, *, client: httpx.Client | None = None) -> list[ReleaseRef]:
    """Return refs from the RSS feed that are not in ``seen``, oldest first."""
    seen = seen or set()
    http = _client(client)
    try:
        resp = http.get(feed_url)
        resp.raise_for_status()
    except httpx.HTTPError as exc:
        raise FeedUnavailable(f"{feed_url}: {exc}") from exc
    finally:
        if client is None:
            http.close()
    try:
        root = ET.fromstring(resp.content)
    except ET.ParseError as exc:
        raise MalformedFeed(f"{feed_url}: {exc}") from exc

    refs = []
    for item in root.iter("item"):
        title = (item.findtext("title") or "").strip()
        link = (item.findtext("link") or "").strip()
        pub = _parse_pubdate(item.findtext("pubDate") or "")
        if not title or not link:
            continue
        parts = title.split()
        name = parts[0]
        version = parts[1] if len(parts) > 1 else "0"
        ref = ReleaseRef(name=name, version=version, published_at=pub, archive_url=link)
        if ref not in seen:
            refs.append(ref)
    refs.sort(key=lambda r: (r.published_at, r.name, r.version))
    return refs


def resolve_archive_url(ref: ReleaseRef, *, client: httpx.Client | None = None) -> str:
    """Resolve a project-page link to a downloadable archive URL.

    Direct archive links pass through; otherwise the registry JSON API
    (``/pypi/<name>/<version>/json``) is queried and an sdist is preferred.
    """
    url = ref.archive_url
    if url.endswith((".tar.gz", ".tgz", ".zip", ".whl", ".tar")):
        return url
    base = url.split("/project/")[0] if "/project/" in url else "https://pypi.org"
    api = f"{base}/pypi/{ref.name}/{ref.version}/json"
    http = _client(client)
    try:
        resp = http.get(api)
        resp.raise_for_status()
        payload = resp.json()
    except (httpx.HTTPError, ValueError) as exc:
        raise FeedUnavailable(f"{api}: {exc}") from exc
    finally:
        if client is None:
            http.close()
    urls = payload.get("urls") or []
    for entry in urls:
        if entry.get("packagetype") == "sdist":
            return entry.get("url", "")
    if urls:
        return urls[0].get("url", "")
    raise FeedUnavailable(f"{api}: release has no downloadable files")


def download_release(ref: ReleaseRef, dest: str | os.PathLike, *, client: httpx.Client | None = None) -> PackageArtifact:
    """Download a release archive under ``dest/<name>-<version>/`` and load it."""
    archive_url = resolve_archive_url(ref, client=client)
    http = _client(client)
    try:
        resp = http.get(archive_url)
        if resp.status_code != 200:
            raise FeedUnavailable(f"{archive_url}: HTTP {resp.status_code}")
        body = resp.content
    except httpx.HTTPError as exc:
        raise FeedUnavailable(f"{archive_url}: {exc}") from exc
    finally:
        if client is None:
            http.close()
    target_dir = Path(dest) / f"{ref.name}-{ref.version}"
    target_dir.mkdir(parents=True, exist_ok=True)
    filename = archive_url.rsplit("/", 1)[-1] or f"{ref.name}-{ref.version}.tar.gz"
    archive_path = target_dir / filename
    archive_path.write_bytes(body)
    artifact = load_package(archive_path, origin="feed")
    artifact.name = ref.name
    artifact.version = ref.version
    return artifact
