import email.parser
import email.policy
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import sys
import threading
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from promptseg.imaging import encode_png  # noqa: E402
from promptseg.synthetic import make_duplicate_dataset, write_dataset  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def dup_dataset():
    return make_duplicate_dataset(n_train=6, n_test=3, side=24, seed=7)


@pytest.fixture(scope="session")
def dup_dataset_dir(tmp_path_factory, dup_dataset):
    out = tmp_path_factory.mktemp("dupdata")
    return write_dataset(dup_dataset, out)


class MockSegServer:
    """Minimal in-process model server speaking the /segment multipart protocol.

    ``mode`` selects the reply: "echo" (fixture mask), "500", "wrong-dim",
    "rgb", "slow".
    """

    def __init__(self):
        self.mode = "echo"
        self.reply_png = None
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                raw = b"Content-Type: " + self.headers["Content-Type"].encode() + b"\r\n\r\n" + body
                msg = email.parser.BytesParser(policy=email.policy.HTTP).parsebytes(raw)
                parts = {p.get_param("name", header="content-disposition"): p.get_payload(decode=True)
                         for p in msg.iter_parts()}
                outer.requests.append({"path": self.path, "parts": parts})
                mode = outer.mode
                if mode == "slow":
                    time.sleep(2.0)
                if mode == "500":
                    self._send(500, b"model exploded", "text/plain")
                    return
                if mode == "wrong-dim":
                    self._send(200, encode_png(np.zeros((outer.side, outer.side - 1))), "image/png")
                    return
                if mode == "rgb":
                    self._send(200, encode_png(np.zeros((outer.side, outer.side, 3))), "image/png")
                    return
                self._send(200, outer.reply_png, "image/png")

            def _send(self, status, payload, ctype):
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                try:
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.side = None

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def set_reply(self, gray_u8):
        self.side = gray_u8.shape[0]
        self.reply_png = encode_png(gray_u8)


@pytest.fixture
def mock_server():
    srv = MockSegServer()
    srv.thread.start()
    yield srv
    srv.server.shutdown()
    srv.server.server_close()
