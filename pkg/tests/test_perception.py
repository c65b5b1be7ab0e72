import base64
import socket
import time

import numpy as np
import pytest

from muskit.audio import AudioBuffer
from muskit.errors import MosTimeoutError, ProtocolError, TransportError
from muskit.perception import (
    MockMosServer,
    PerceptionScore,
    batch_mos,
    decode_pcm16,
    default_endpoint,
    encode_pcm16,
    request_mos,
)

from conftest import sine


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_score_range():
    with pytest.raises(ProtocolError):
        PerceptionScore(0.5, "m", 1)
    assert PerceptionScore(5.0, "m", 1).mos == 5.0


def test_pcm16_is_lossless_on_grid(rng):
    grid = rng.integers(-32768, 32768, 500) / 32768.0
    assert np.array_equal(decode_pcm16(encode_pcm16(grid)), grid)
    assert decode_pcm16(encode_pcm16([1.0])).tolist() == [32767 / 32768]


def test_request_roundtrip():
    audio = sine(220, 0.2, sr=16000)
    with MockMosServer() as srv:
        score = request_mos(srv.endpoint, audio)
        assert (score.mos, score.model_id) == (3.42, "mock")
        assert score.latency_ms >= 0
        body = srv.requests[0]
    assert body["sample_rate"] == 16000
    sent = decode_pcm16(base64.b64decode(body["pcm16_base64"]))
    assert np.array_equal(sent, decode_pcm16(encode_pcm16(audio.samples)))


@pytest.mark.parametrize("reply", [
    (200, {"mos": 7.0, "model_id": "m"}, 0),
    (200, {"mos": "high", "model_id": "m"}, 0),
    (200, {"model_id": "m"}, 0),
    (200, {"mos": 3.0}, 0),
    (200, b"not json", 0),
    (200, [3.0], 0),
])
def test_protocol_errors(reply):
    with MockMosServer(lambda payload: reply) as srv:
        with pytest.raises(ProtocolError):
            request_mos(srv.endpoint, sine(220, 0.05))


def test_http_error_is_transport():
    with MockMosServer(lambda payload: (503, {"error": "busy"}, 0)) as srv:
        with pytest.raises(TransportError):
            request_mos(srv.endpoint, sine(220, 0.05))


def test_unreachable_endpoint():
    t0 = time.monotonic()
    with pytest.raises(TransportError):
        request_mos(f"http://127.0.0.1:{free_port()}", sine(220, 0.05), timeout_ms=2000)
    assert time.monotonic() - t0 < 2.5


def test_timeout():
    with MockMosServer(lambda payload: (200, {"mos": 3.0, "model_id": "m"}, 1.0)) as srv:
        with pytest.raises(MosTimeoutError) as err:
            request_mos(srv.endpoint, sine(220, 0.05), timeout_ms=200)
    assert isinstance(err.value, TimeoutError)


def test_empty_audio_rejected():
    with pytest.raises(ValueError):
        request_mos("http://127.0.0.1:1", AudioBuffer(np.zeros(0), 16000))


def test_batch_empty():
    assert batch_mos("http://127.0.0.1:1", []) == {}


def test_batch_all_succeed():
    utts = [(f"u{i}", sine(200 + 10 * i, 0.05)) for i in range(3)]
    with MockMosServer() as srv:
        out = batch_mos(srv.endpoint, utts)
    assert set(out) == {"u0", "u1", "u2"}
    assert all(isinstance(v, PerceptionScore) for v in out.values())


def test_batch_partial_failure():
    def responder(payload):
        slow = payload["sample_rate"] == 8000
        return 200, {"mos": 4.0, "model_id": "m"}, 1.0 if slow else 0.0

    utts = [("a", sine(220, 0.05)), ("b", sine(220, 0.05, sr=8000)), ("c", sine(220, 0.05))]
    with MockMosServer(responder) as srv:
        out = batch_mos(srv.endpoint, utts, timeout_ms=300)
    assert len(out) == 3
    assert out["b"]["error"] == "MosTimeoutError"
    assert out["a"].mos == out["c"].mos == 4.0


def test_batch_respects_concurrency_limit():
    utts = [(f"u{i}", sine(220, 0.02)) for i in range(8)]
    with MockMosServer(lambda p: (200, {"mos": 3.0, "model_id": "m"}, 0.1)) as srv:
        out = batch_mos(srv.endpoint, utts, concurrency_limit=2)
    assert len(out) == 8
    assert srv.max_in_flight <= 2


def test_default_endpoint(monkeypatch):
    monkeypatch.delenv("MUSKIT_MOS_ENDPOINT", raising=False)
    assert default_endpoint() is None
    monkeypatch.setenv("MUSKIT_MOS_ENDPOINT", "http://x")
    assert default_endpoint() == "http://x"
