import numpy as np
import pytest

from promptseg.backends import BackendSpec, segment
from promptseg.dataset import LabeledExample
from promptseg.errors import ConnectError, ProtocolError, ServerError, Timeout
from promptseg.prompt import build_prompt
from promptseg.remote import remote_segment, segment_url

SIDE = 16


def make_canvas(rng, k=2):
    exemplars = [LabeledExample(f"e{i}", rng.random((SIDE, SIDE, 3)), rng.random((SIDE, SIDE)) > 0.5)
                 for i in range(k)]
    return exemplars, build_prompt(exemplars, rng.random((SIDE, SIDE, 3)))


def fixture_mask():
    y, x = np.mgrid[0:SIDE, 0:SIDE]
    return ((x * 16 + y * 7) % 256).astype(np.uint8)


def test_roundtrip_known_mask(rng, mock_server):
    mask = fixture_mask()
    mock_server.set_reply(mask)
    _, canvas = make_canvas(rng)
    soft = remote_segment(canvas, BackendSpec("remote", endpoint=mock_server.url, timeout=5))
    np.testing.assert_array_equal(soft, mask / 255.0)

    req = mock_server.requests[-1]
    assert req["path"] == "/segment"
    assert req["parts"]["k"] == b"2"
    assert req["parts"]["layout"] == b"v1"
    assert req["parts"]["canvas"] == canvas.to_png()


def test_segment_facade_remote(rng, mock_server):
    mock_server.set_reply(np.full((SIDE, SIDE), 255, np.uint8))
    exemplars, _ = make_canvas(rng, k=1)
    test = rng.random((SIDE, SIDE, 3))
    soft = segment(exemplars, test, BackendSpec("remote", endpoint=mock_server.url + "/", timeout=5))
    assert np.all(soft == 1.0)
    assert mock_server.requests[-1]["parts"]["k"] == b"1"


def test_server_error_surfaces_body(rng, mock_server):
    mock_server.mode = "500"
    _, canvas = make_canvas(rng)
    with pytest.raises(ServerError) as info:
        remote_segment(canvas, BackendSpec("remote", endpoint=mock_server.url, timeout=5))
    assert info.value.status == 500
    assert "model exploded" in str(info.value)


@pytest.mark.parametrize("mode", ["wrong-dim", "rgb"])
def test_protocol_errors(rng, mock_server, mode):
    mock_server.mode = mode
    mock_server.side = SIDE
    _, canvas = make_canvas(rng)
    with pytest.raises(ProtocolError):
        remote_segment(canvas, BackendSpec("remote", endpoint=mock_server.url, timeout=5))


def test_timeout(rng, mock_server):
    mock_server.mode = "slow"
    mock_server.set_reply(fixture_mask())
    _, canvas = make_canvas(rng)
    with pytest.raises(Timeout):
        remote_segment(canvas, BackendSpec("remote", endpoint=mock_server.url, timeout=0.3))


def test_connect_error(rng):
    _, canvas = make_canvas(rng)
    with pytest.raises(ConnectError):
        remote_segment(canvas, BackendSpec("remote", endpoint="http://127.0.0.1:9", timeout=2))


def test_segment_url():
    assert segment_url("http://h:1") == "http://h:1/segment"
    assert segment_url("http://h:1/api/") == "http://h:1/api/segment"
    assert segment_url("http://h:1/segment") == "http://h:1/segment"
