"""HTTP client for an external MOS-prediction service, plus a mock server.

Wire protocol: ``POST {endpoint}/score`` with JSON
``{"sample_rate": int, "pcm16_base64": str}``; a 200 reply carries
``{"mos": number, "model_id": str}``. Scores outside [1, 5] are rejected,
never clamped.
"""

from __future__ import annotations

import base64
import json
import math
import os
import socket
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .audio import AudioBuffer
from .errors import MosTimeoutError, ProtocolError, TransportError

ENV_ENDPOINT = "MUSKIT_MOS_ENDPOINT"


@dataclass(frozen=True)
class PerceptionScore:
    mos: float
    model_id: str
    latency_ms: int

    def __post_init__(self):
        if not 1.0 <= self.mos <= 5.0:
            raise ProtocolError(f"mos {self.mos} outside [1, 5]")


def encode_pcm16(samples) -> bytes:
    """Quantize to 16-bit little-endian PCM (scale 32768, clipped)."""
    x = np.asarray(samples, dtype=np.float64)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()


def decode_pcm16(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0


def request_body(audio: AudioBuffer) -> bytes:
    return json.dumps({
        "sample_rate": audio.sample_rate_hz,
        "pcm16_base64": base64.b64encode(encode_pcm16(audio.samples)).decode("ascii"),
    }).encode("utf-8")


def default_endpoint() -> str | None:
    return os.environ.get(ENV_ENDPOINT) or None


def request_mos(endpoint: str, audio: AudioBuffer, timeout_ms: int = 10000) -> PerceptionScore:
    if len(audio) == 0:
        raise ValueError("cannot score empty audio")
    url = endpoint.rstrip("/") + "/score"
    req = urllib.request.Request(
        url, data=request_body(audio), method="POST",
        headers={"Content-Type": "application/json"},
    )
    t0 = time.monotonic()
    try:
        with urllib.request.urlopen(req, timeout=timeout_ms / 1000.0) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise TransportError(f"{url} answered HTTP {exc.code}") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise MosTimeoutError(f"{url} timed out after {timeout_ms} ms") from exc
        raise TransportError(f"{url}: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise MosTimeoutError(f"{url} timed out after {timeout_ms} ms") from exc
    except OSError as exc:
        raise TransportError(f"{url}: {exc}") from exc
    latency = int(round((time.monotonic() - t0) * 1000))
    if status != 200:
        raise TransportError(f"{url} answered HTTP {status}")

    try:
        doc = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("response must be a JSON object")
    mos = doc.get("mos")
    model_id = doc.get("model_id")
    if isinstance(mos, bool) or not isinstance(mos, (int, float)) or not math.isfinite(mos):
        raise ProtocolError(f"invalid mos field {mos!r}")
    if not isinstance(model_id, str):
        raise ProtocolError(f"invalid model_id field {model_id!r}")
    return PerceptionScore(float(mos), model_id, latency)


def batch_mos(endpoint: str, utterances, concurrency_limit: int = 4, timeout_ms: int = 10000) -> dict:
    """Score many utterances with at most ``concurrency_limit`` requests in flight.

    Failures are recorded per utterance as ``{"error": kind, "detail": msg}``
    dicts; the batch itself never raises.
    """
    items = list(utterances)
    if not items:
        return {}

    def one(item):
        utt, audio = item
        try:
            return utt, request_mos(endpoint, audio, timeout_ms)
        except Exception as exc:  # noqa: BLE001 - every failure becomes a record
            return utt, {"error": type(exc).__name__, "detail": str(exc)}

    with ThreadPoolExecutor(max_workers=max(1, concurrency_limit)) as pool:
        return dict(pool.map(one, items))


# --- mock service ----------------------------------------------------------------------

class MockMosServer:
    """Threaded local stand-in for the MOS service.

    ``responder(payload) -> (status, body_dict_or_bytes, delay_sec)`` decides
    each reply; the default echoes a fixed score. Tracks the peak number of
    concurrent requests in ``max_in_flight``.
    """

    def __init__(self, responder=None, mos: float = 3.42, model_id: str = "mock"):
        self.responder = responder or (lambda payload: (200, {"mos": mos, "model_id": model_id}, 0.0))
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                if self.path.rstrip("/") != "/score":
                    self.send_response(404)
                    self.end_headers()
                    return
                with server._lock:
                    server.in_flight += 1
                    server.max_in_flight = max(server.max_in_flight, server.in_flight)
                try:
                    n = int(self.headers.get("Content-Length", 0))
                    payload = json.loads(self.rfile.read(n))
                    server.requests.append(payload)
                    status, body, delay = server.responder(payload)
                    if delay:
                        time.sleep(delay)
                    data = body if isinstance(body, bytes) else json.dumps(body).encode()
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass
                finally:
                    with server._lock:
                        server.in_flight -= 1

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.05,), daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
