import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

_criteria = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _criteria.get(report.nodeid)
    if marker is None:
        return
    number, title, outcomes = marker
    outcomes.append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _criteria[item.nodeid] = (m.args[0], m.args[1], [])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    by_number = {}
    for number, title, outcomes in _criteria.values():
        entry = by_number.setdefault(number, [title, []])
        entry[1].extend(outcomes)
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        title, outcomes = by_number[number]
        if not outcomes:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"AC{number:02d} {verdict:7s} {title}")


@pytest.fixture
def data_dir():
    return DATA


class MockEndpoint:
    """Local JSON-over-HTTP endpoint; ``reply(prompt) -> (status, body)``."""

    def __init__(self, reply):
        self.reply = reply
        self.prompts = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                prompt = json.loads(self.rfile.read(length))["prompt"]
                outer.prompts.append(prompt)
                status, body = outer.reply(prompt)
                if status is None:
                    # drop the connection without answering
                    self.close_connection = True
                    self.connection.close()
                    return
                data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client already gave up (timeout tests)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/predict"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock_endpoint():
    endpoints = []

    def make(reply):
        ep = MockEndpoint(reply)
        endpoints.append(ep)
        return ep

    yield make
    for ep in endpoints:
        ep.close()


@pytest.fixture
def closed_port_url():
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return f"http://127.0.0.1:{port}/predict"
