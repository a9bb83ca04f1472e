"""
================================================================================
05. Talking to a remote model server
================================================================================

A real in-context segmentation model can sit behind HTTP. The client posts the
prompt canvas to ``<endpoint>/segment`` as multipart form data (fields
``canvas``, ``k`` and ``layout``) and expects a grayscale PNG the size of one
panel back. Here a toy server thresholds the test panel's brightness.
"""
########################################################################################################################
import email.parser
import email.policy
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from promptseg.backends import BackendSpec, segment
from promptseg.errors import ConnectError
from promptseg.imaging import decode_image, encode_png
from promptseg.prompt import infer_k
from promptseg.synthetic import make_benchmark


class ToyModel(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        raw = b"Content-Type: " + self.headers["Content-Type"].encode() + b"\r\n\r\n" + body
        msg = email.parser.BytesParser(policy=email.policy.HTTP).parsebytes(raw)
        parts = {p.get_param("name", header="content-disposition"): p.get_payload(decode=True)
                 for p in msg.iter_parts()}
        canvas = decode_image(parts["canvas"])
        side = canvas.shape[1] // 2
        k = int(parts["k"])
        assert infer_k(*canvas.shape[:2], side) == k
        test = canvas[k * side:, :side].mean(axis=2)
        payload = encode_png(test < np.median(test))
        self.send_response(200)
        self.send_header("Content-Type", "image/png")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


server = ThreadingHTTPServer(("127.0.0.1", 0), ToyModel)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = "http://%s:%d" % server.server_address

########################################################################################################################
# The remote backend is a drop-in replacement for the reference one
ds = make_benchmark(n_train=3, n_test=1, side=32, seed=1)
soft = segment(ds.train[:2], ds.test[0].image, BackendSpec("remote", endpoint=endpoint, timeout=5))
print("remote prediction:", soft.shape, "foreground fraction", float((soft >= 0.5).mean()))
server.shutdown()

########################################################################################################################
# Failures come back as typed errors, and the CLI maps them to distinct exit codes
try:
    segment(ds.train[:2], ds.test[0].image, BackendSpec("remote", endpoint="http://127.0.0.1:9", timeout=2))
except ConnectError as exc:
    print("as expected:", type(exc).__name__, exc)
