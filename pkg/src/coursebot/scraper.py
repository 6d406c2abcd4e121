"""Fetch course pages, reduce them to titled sections, and emit corpus files.

Extraction is tag-soup tolerant (stdlib HTMLParser): script/style/nav/header/
footer subtrees are dropped, h1-h3 delimit sections, and everything else
becomes whitespace-cleaned body text. Links are only collected outside the
dropped subtrees, so navigation chrome does not feed the crawl.
"""

from __future__ import annotations

import codecs
import re
import socket
import sys
import time
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional, Sequence, Union
from urllib.parse import urldefrag, urljoin, urlsplit

import requests

from coursebot.engine import clean_whitespace
from coursebot.storage import utcnow_iso
from coursebot.training import Corpus, serialize_corpus

DEFAULT_TEMPLATES = ("What is {heading}?", "Tell me about {heading}")
MAX_CHUNK = 2000
HTML_TYPES = ("text/html", "application/xhtml+xml")


class ScrapeError(Exception):
    pass


class NetworkError(ScrapeError):
    """kind is one of dns, connect, timeout, tls."""

    def __init__(self, kind: str, detail: str) -> None:
        super().__init__(f"{kind}: {detail}")
        self.kind = kind


class NonHtmlContent(ScrapeError):
    def __init__(self, content_type: str) -> None:
        super().__init__(f"not an HTML content type: {content_type!r}")
        self.content_type = content_type


class EmptyDocument(ScrapeError):
    pass


_TOKEN_RE = re.compile(r"^[!#$%&'*+\-.^_`|~0-9A-Za-z]+$")


@dataclass(frozen=True)
class FetchAuth:
    """Extra request headers, typically a Cookie for authenticated pages."""

    headers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.headers:
            if not _TOKEN_RE.match(name):
                raise ValueError(f"invalid header name: {name!r}")

    @classmethod
    def from_cookie(cls, cookie: str) -> "FetchAuth":
        return cls(headers={"Cookie": cookie})


@dataclass(frozen=True)
class ScrapeDocument:
    url: str
    title: str
    sections: tuple[tuple[str, str], ...]
    fetched_at: str


def _error_kind(exc: requests.RequestException) -> str:
    if isinstance(exc, requests.exceptions.SSLError):
        return "tls"
    if isinstance(exc, requests.exceptions.Timeout):
        return "timeout"
    # walk the cause chain looking for a resolver failure
    seen: set[int] = set()
    stack: list[BaseException] = [exc]
    while stack:
        err = stack.pop()
        if id(err) in seen:
            continue
        seen.add(id(err))
        if isinstance(err, socket.gaierror):
            return "dns"
        for nxt in (err.__cause__, err.__context__):
            if nxt is not None:
                stack.append(nxt)
        stack.extend(a for a in getattr(err, "args", ()) if isinstance(a, BaseException))
    text = str(exc).lower()
    if "name" in text and ("resolution" in text or "resolve" in text or "known" in text):
        return "dns"
    return "connect"


def fetch_page(
    url: str,
    auth: Optional[FetchAuth] = None,
    timeout: float = 10.0,
    allow_non_html: bool = False,
) -> tuple[int, bytes, str]:
    """GET url following at most 5 redirects; (status, body, content type).

    Raises NetworkError on transport failure and NonHtmlContent when the
    response is not HTML (suppressed by allow_non_html).
    """
    if urlsplit(url).scheme not in ("http", "https"):
        raise ValueError(f"not an http(s) url: {url}")
    session = requests.Session()
    session.max_redirects = 5
    headers = dict(auth.headers) if auth else {}
    try:
        resp = session.get(url, headers=headers, timeout=timeout)
    except requests.exceptions.TooManyRedirects as exc:
        raise NetworkError("connect", f"too many redirects: {exc}") from exc
    except requests.RequestException as exc:
        raise NetworkError(_error_kind(exc), str(exc)) from exc
    finally:
        session.close()
    content_type = resp.headers.get("Content-Type", "").split(";")[0].strip().lower()
    if content_type and content_type not in HTML_TYPES and not allow_non_html:
        raise NonHtmlContent(content_type)
    return resp.status_code, resp.content, content_type


_SKIP_TAGS = {"script", "style", "nav", "header", "footer"}
_HEADINGS = {"h1", "h2", "h3"}
_BLOCK_TAGS = {
    "p", "div", "br", "li", "ul", "ol", "dl", "dt", "dd", "table", "tr", "td",
    "th", "thead", "tbody", "section", "article", "aside", "main", "figure",
    "figcaption", "blockquote", "pre", "hr", "form", "fieldset", "h4", "h5", "h6",
}


class _PageParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.title_parts: list[str] = []
        self.first_h1: Optional[str] = None
        self.sections: list[tuple[str, list[str]]] = []
        self.preamble: list[str] = []
        self.links: list[str] = []
        self._skip_depth = 0
        self._in_title = False
        self._heading_tag: Optional[str] = None
        self._heading_parts: list[str] = []

    def _body_parts(self) -> list[str]:
        return self.sections[-1][1] if self.sections else self.preamble

    def _finish_heading(self) -> None:
        if self._heading_tag is None:
            return
        tag = self._heading_tag
        text = clean_whitespace("".join(self._heading_parts))
        self._heading_tag = None
        self._heading_parts = []
        if text and tag == "h1" and self.first_h1 is None:
            self.first_h1 = text
        if text:
            self.sections.append((text, []))
        # a heading that cleans to nothing does not open a section

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            return
        if self._skip_depth:
            return
        self._in_title = False
        if self._heading_tag is not None and (tag in _BLOCK_TAGS or tag in _HEADINGS):
            self._finish_heading()  # tag soup: heading never closed
        if tag == "title":
            self._in_title = True
        elif tag == "a":
            href = dict(attrs).get("href")
            if href:
                self.links.append(href)
        elif tag in _HEADINGS:
            self._heading_tag = tag
        elif tag in _BLOCK_TAGS:
            self._body_parts().append("\n")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            if self._skip_depth:
                self._skip_depth -= 1
            return
        if self._skip_depth:
            return
        if tag == "title":
            self._in_title = False
        elif tag in _HEADINGS:
            self._finish_heading()
        elif tag in _BLOCK_TAGS:
            self._body_parts().append("\n")

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
        elif self._heading_tag is not None:
            self._heading_parts.append(data)
        else:
            self._body_parts().append(data)


def _sniff_charset(html: bytes) -> str:
    m = re.search(rb"<meta[^>]+charset\s*=\s*[\"']?([A-Za-z0-9_.:-]+)", html[:4096], re.I)
    if m:
        name = m.group(1).decode("ascii", "replace")
        try:
            codecs.lookup(name)
            return name
        except LookupError:
            pass
    return "utf-8"


def extract_document(html: bytes, url: str) -> ScrapeDocument:
    """Reduce an HTML page to (title, sections). Raises EmptyDocument when
    nothing extractable remains."""
    parser = _PageParser()
    parser.feed(html.decode(_sniff_charset(html), errors="replace"))
    parser.close()
    parser._finish_heading()
    title = clean_whitespace("".join(parser.title_parts)) or parser.first_h1 or url
    sections: list[tuple[str, str]] = []
    preamble = clean_whitespace("".join(parser.preamble))
    if preamble:
        sections.append((title, preamble))
    for heading, parts in parser.sections:
        body = clean_whitespace("".join(parts))
        if body:
            sections.append((heading, body))
    if not sections:
        raise EmptyDocument(f"no extractable text: {url}")
    return ScrapeDocument(
        url=url, title=title, sections=tuple(sections), fetched_at=utcnow_iso()
    )


def extract_links(html: bytes, base_url: str) -> list[str]:
    """Absolute same-origin http(s) links from the page, in order, deduped."""
    parser = _PageParser()
    parser.feed(html.decode(_sniff_charset(html), errors="replace"))
    parser.close()
    origin = urlsplit(base_url)[:2]
    out: list[str] = []
    for href in parser.links:
        absolute = urldefrag(urljoin(base_url, href)).url
        parts = urlsplit(absolute)
        if parts.scheme in ("http", "https") and parts[:2] == origin:
            if absolute not in out:
                out.append(absolute)
    return out


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_chunks(body: str, limit: int = MAX_CHUNK) -> list[str]:
    """Greedy sentence packing into chunks of at most limit characters.

    A single sentence longer than the limit is hard-split.
    """
    if len(body) <= limit:
        return [body] if body else []
    pieces: list[str] = []
    for sentence in _SENTENCE_SPLIT.split(body):
        while len(sentence) > limit:
            pieces.append(sentence[:limit])
            sentence = sentence[limit:]
        if sentence:
            pieces.append(sentence)
    chunks: list[str] = []
    current = ""
    for piece in pieces:
        candidate = f"{current} {piece}" if current else piece
        if len(candidate) <= limit:
            current = candidate
        else:
            chunks.append(current)
            current = piece
    if current:
        chunks.append(current)
    return chunks


def document_to_corpus(
    doc: ScrapeDocument, templates: Sequence[str] = DEFAULT_TEMPLATES
) -> Corpus:
    """One 2-utterance conversation per section x template x chunk."""
    if not templates:
        raise ValueError("at least one question template is required")
    for template in templates:
        if "{heading}" not in template:
            raise ValueError(f"template lacks {{heading}} placeholder: {template!r}")
    conversations: list[tuple[str, ...]] = []
    for heading, body in doc.sections:
        chunks = split_chunks(body)
        for template in templates:
            question = template.replace("{heading}", heading)
            for chunk in chunks:
                conversations.append((question, chunk))
    return Corpus(categories=(doc.title,), conversations=tuple(conversations))


def slugify(title: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    return slug or "page"


def load_templates(path: Union[str, Path]) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    templates = [line.strip() for line in lines if line.strip()]
    if not templates:
        raise ValueError(f"no templates in {path}")
    return templates


def run_scrape(
    urls: Sequence[str],
    cookie: Optional[str] = None,
    out_dir: Union[str, Path] = ".",
    depth: int = 0,
    templates: Optional[Sequence[str]] = None,
    delay: float = 0.5,
    force: bool = False,
    timeout: float = 10.0,
    out=None,
) -> int:
    """Scrape seed urls (and, at depth 1, same-origin links found on them)
    into corpus files under out_dir. Exit 0 when at least one page produced
    a file, 1 when every page failed."""
    if depth not in (0, 1):
        raise ValueError("depth must be 0 or 1")
    out = out if out is not None else sys.stderr
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = list(templates) if templates else list(DEFAULT_TEMPLATES)
    auth = FetchAuth.from_cookie(cookie) if cookie else None

    seeds = []
    for url in urls:
        normalized = urldefrag(url).url
        if normalized not in seeds:
            seeds.append(normalized)
    visited: set[str] = set()
    used_names: set[str] = set()
    requests_made = 0
    successes = 0

    def visit(url: str, discover: bool) -> list[str]:
        nonlocal requests_made, successes
        visited.add(url)
        if requests_made and delay > 0:
            time.sleep(delay)
        requests_made += 1
        try:
            status, body, _ = fetch_page(url, auth=auth, timeout=timeout, allow_non_html=force)
        except ScrapeError as exc:
            print(f"error: {url}: {exc}", file=out)
            return []
        if status != 200:
            print(f"error: {url}: HTTP {status}", file=out)
            return []
        links = extract_links(body, url) if discover else []
        try:
            doc = extract_document(body, url)
        except EmptyDocument as exc:
            print(f"error: {url}: {exc}", file=out)
            return links
        corpus = document_to_corpus(doc, templates)
        name = slugify(doc.title)
        candidate = name
        counter = 2
        while candidate in used_names:
            candidate = f"{name}-{counter}"
            counter += 1
        used_names.add(candidate)
        path = out_dir / f"{candidate}.yml"
        path.write_bytes(serialize_corpus(corpus))
        print(f"wrote {path} ({len(corpus.conversations)} conversations)", file=out)
        successes += 1
        return links

    discovered: list[str] = []
    for seed in seeds:
        for link in visit(seed, discover=depth == 1):
            if link not in discovered:
                discovered.append(link)
    for link in discovered:
        if link not in visited:
            visit(link, discover=False)
    return 0 if successes else 1
