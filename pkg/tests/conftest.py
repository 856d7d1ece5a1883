import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from crossorch.orchestrator import data_path
from crossorch.otn.topology import TopologyStore, load_topology
from crossorch.robot.sim import load_panel


def read_data(name: str) -> str:
    return data_path(name).read_text(encoding="utf-8")


@pytest.fixture
def demo_topology():
    return load_topology(read_data("demo_topology.json"))


@pytest.fixture
def demo_store():
    return TopologyStore.from_document(read_data("demo_topology.json"))


@pytest.fixture
def demo_panel():
    return load_panel(read_data("demo_panel.json"))


class StubServer:
    """Local chat-completions stub. ``reply`` maps a request body to (status, payload)."""

    def __init__(self, reply):
        self.reply = reply
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                stub.requests.append(body)
                stub.headers.append(dict(self.headers))
                status, payload = stub.reply(body)
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_port}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, args=(0.05,), daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def completion(content):
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}


@pytest.fixture
def stub_server():
    servers = []

    def start(reply):
        s = StubServer(reply)
        servers.append(s)
        return s

    yield start
    for s in servers:
        s.close()


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
