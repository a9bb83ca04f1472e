"""
HTTP client for an external in-context segmentation server.

Wire protocol: ``POST {endpoint}/segment`` with a multipart body

    canvas  the prompt canvas as PNG
    k       number of exemplar rows, decimal
    layout  canvas layout version tag

A successful reply is ``image/png``: an 8-bit grayscale mask of
``panel_side`` x ``panel_side`` pixels, read as confidence ``byte / 255``.
"""

import io

import numpy as np
import requests
from PIL import Image, UnidentifiedImageError

from .errors import ConnectError, ProtocolError, ServerError, Timeout


def segment_url(endpoint):
    endpoint = endpoint.rstrip("/")
    if endpoint.endswith("/segment"):
        return endpoint
    return endpoint + "/segment"


def decode_response_mask(data, panel_side):
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ProtocolError(f"response is not a decodable PNG: {exc}") from exc
    if pil.format != "PNG":
        raise ProtocolError(f"expected a PNG response, got {pil.format}")
    if pil.mode != "L":
        raise ProtocolError(f"expected an 8-bit grayscale PNG, got mode {pil.mode}")
    if pil.size != (panel_side, panel_side):
        raise ProtocolError(
            f"expected a {panel_side}x{panel_side} mask, got {pil.size[0]}x{pil.size[1]}"
        )
    return np.asarray(pil, dtype=np.uint8).astype(np.float64) / 255.0


def remote_segment(canvas, spec, session=None):
    """Send ``canvas`` to the server in ``spec`` and return its soft mask."""
    if spec.kind != "remote":
        raise ValueError("remote_segment needs a BackendSpec with kind='remote'")
    files = {
        "canvas": ("canvas.png", canvas.to_png(), "image/png"),
        "k": (None, str(canvas.k)),
        "layout": (None, canvas.layout_version),
    }
    http = session or requests
    try:
        resp = http.post(segment_url(spec.endpoint), files=files, timeout=spec.timeout)
    except requests.exceptions.Timeout as exc:
        raise Timeout(f"no response from {spec.endpoint} within {spec.timeout}s") from exc
    except requests.exceptions.ConnectionError as exc:
        raise ConnectError(f"cannot reach {spec.endpoint}: {exc}") from exc
    if resp.status_code != 200:
        raise ServerError(resp.status_code, resp.text)
    ctype = resp.headers.get("Content-Type", "").split(";")[0].strip().lower()
    if ctype and ctype != "image/png":
        raise ProtocolError(f"expected image/png, got {ctype}")
    return decode_response_mask(resp.content, canvas.panel_side)
