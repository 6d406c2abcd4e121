"""Shared fixtures: a local HTTP server with authored pages and a request
log, plus a helper that runs the chat service on a real port."""

from __future__ import annotations

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
import uvicorn

from coursebot.service import create_app

COURSE_HTML = b"""<!DOCTYPE html>
<html>
<head>
  <meta charset="utf-8">
  <title>INF-1001 Course Information</title>
  <script>var tracking = "should never appear";</script>
  <style>body { color: red; }</style>
</head>
<body>
  <header>Site banner junk</header>
  <nav><a href="/nav-target.html">All courses</a></nav>
  <h1>Course Info</h1>
  <h2>Exam</h2>
  <p>The exam is in <b>May</b>.</p>
  <h2>Curriculum</h2>
  <p>The curriculum covers chatbots and databases.</p>
  <footer>Copyright footer junk</footer>
</body>
</html>
"""

HUB_HTML = b"""<html>
<head><title>Hub</title></head>
<body>
<nav><a href="/nav-target.html">nav link must not be crawled</a></nav>
<p>Start here. See <a href="/page-a.html">Alpha</a> and <a href="page-b.html#frag">Beta</a>.
Also <a href="http://external.invalid/x">elsewhere</a>
and <a href="/page-a.html">Alpha again</a>.</p>
</body>
</html>
"""

PAGE_A_HTML = b"""<html><head><title>Alpha Page</title></head>
<body><h2>Alpha Topic</h2><p>Alpha body text.</p></body></html>
"""

PAGE_B_HTML = b"""<html><head><title>Beta Page</title></head>
<body><h2>Beta Topic</h2><p>Beta body text.</p></body></html>
"""

NAV_TARGET_HTML = b"""<html><head><title>Nav Target</title></head>
<body><p>Reached only if nav links leak into the crawl.</p></body></html>
"""

PROTECTED_HTML = b"""<html><head><title>Secret Course</title></head>
<body><h2>Hidden</h2><p>For members only.</p></body></html>
"""

LATIN1_HTML = (
    '<html><head>'
    '<meta http-equiv="Content-Type" content="text/html; charset=iso-8859-1">'
    '<title>Norsk Side</title></head>'
    '<body><p>Blåbærsyltetøy er godt.</p></body></html>'
).encode("iso-8859-1")

EMPTY_HTML = b"<html><head><script>nothing()</script></head><body><script>x()</script></body></html>"

PAGES = {
    "/course.html": ("text/html; charset=utf-8", COURSE_HTML),
    "/hub.html": ("text/html; charset=utf-8", HUB_HTML),
    "/page-a.html": ("text/html; charset=utf-8", PAGE_A_HTML),
    "/page-b.html": ("text/html; charset=utf-8", PAGE_B_HTML),
    "/nav-target.html": ("text/html; charset=utf-8", NAV_TARGET_HTML),
    "/latin1.html": ("text/html; charset=iso-8859-1", LATIN1_HTML),
    "/empty.html": ("text/html; charset=utf-8", EMPTY_HTML),
    "/plain.txt": ("text/plain", b"just text, no markup"),
}

FIXTURE_COOKIE = "sessionid=letmein"


class _FixtureHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _send(self, status, content_type, body):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self.server.request_log.append(self.path)
        self.path = self.path.split("?", 1)[0]
        if self.path == "/protected":
            if FIXTURE_COOKIE in self.headers.get("Cookie", ""):
                self._send(200, "text/html; charset=utf-8", PROTECTED_HTML)
            else:
                self._send(403, "text/html; charset=utf-8", b"<html><body>forbidden</body></html>")
            return
        if self.path == "/loop":
            self.send_response(302)
            self.send_header("Location", "/loop")
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        if self.path == "/slow":
            time.sleep(2)
            self._send(200, "text/html", b"<html><body><p>slow</p></body></html>")
            return
        if self.path in PAGES:
            content_type, body = PAGES[self.path]
            self._send(200, content_type, body)
            return
        self._send(404, "text/html", b"<html><body>not found</body></html>")


class FixtureServer:
    def __init__(self):
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _FixtureHandler)
        self._httpd.request_log = []
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        self.base_url = f"http://127.0.0.1:{self._httpd.server_address[1]}"

    @property
    def log(self):
        return self._httpd.request_log

    def url(self, path):
        return self.base_url + path

    def shutdown(self):
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture(scope="session")
def _server_instance():
    server = FixtureServer()
    yield server
    server.shutdown()


@pytest.fixture
def page_server(_server_instance):
    _server_instance.log.clear()
    return _server_instance


# ordered map: acceptance test name -> the criterion it decides
ACCEPTANCE_CRITERIA = [
    ("test_similarity_oracle", "similarity: 1000 random pairs match the independent DP oracle"),
    ("test_training_round_trip", "training round-trip: every trained prompt answers at confidence 1.0"),
    ("test_fuzzy_retrieval", "fuzzy retrieval: 1-char corruption keeps the response set, confidence >= 1-1/L"),
    ("test_learning_durability", "learning durability: learned answer survives a service restart"),
    ("test_merge_oracle", "merge: 50 random trios equal the brute-force key union; CLI refuses single db"),
    ("test_scrape_to_answer", "scrape-to-answer: scraped section is retrievable at confidence 1.0"),
    ("test_service_soundness", "service soundness: 100 concurrent chats, +100 rows, no cross-links"),
    ("test_store_conformance", "store conformance: memory and sqlite agree on a 500-op sequence"),
]

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, label in ACCEPTANCE_CRITERIA:
        outcome = _acceptance_outcomes.get(name)
        if outcome == "passed":
            verdict = "PASS"
        elif outcome is None:
            verdict = "NOT RUN"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"{verdict:7s} {label}")


class LiveService:
    """The chat service running in a thread on an ephemeral port."""

    def __init__(self, config, store=None):
        app = create_app(config, store=store)
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning", access_log=False)
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("service did not start in time")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        self.base_url = f"http://127.0.0.1:{port}"

    def url(self, path):
        return self.base_url + path

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=15)
        if self._thread.is_alive():
            raise RuntimeError("service did not stop in time")
