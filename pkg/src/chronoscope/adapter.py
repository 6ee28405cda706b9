"""Wire protocol v1 and clients for external black-box forecasters.

A request/response pair is one line of canonical JSON each (keys sorted,
compact separators, UTF-8, newline-terminated) so transcripts are
byte-reproducible across implementations. Transports: a persistent
subprocess speaking the protocol on stdio, or HTTP POST /forecast.

Request fields
  protocol_version : int, always 1
  series_id        : string
  freq             : string (minutely | hourly | business-daily | monthly)
  context          : non-empty array of finite float64
  horizon          : int >= 1
  scaling_hint     : "none" | "minmax" (scaling itself happens server-side)

Response fields
  point      : array of finite float64, length == horizon
  quantiles  : optional map of level -> array (same length rule)
  model_name : string
  latency_ms : int >= 0 (0 in deterministic stub mode)
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .data import FREQUENCIES, DomainProfile, TimeSeries
from .errors import (
    AdapterTimeout,
    BadParams,
    ProtocolViolation,
    TransportError,
)
from .forecast.base import Forecaster, context_values, seasonal_naive

PROTOCOL_VERSION = 1
ENDPOINT_ENV = "CHRONOSCOPE_ENDPOINT"
SCALING_HINTS = ("none", "minmax")


@dataclass(frozen=True)
class ForecastRequest:
    series_id: str
    freq: str
    context: tuple[float, ...]
    horizon: int
    scaling_hint: str = "none"
    protocol_version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if not self.context:
            raise BadParams("context must be non-empty")
        if self.horizon < 1:
            raise BadParams("horizon must be >= 1")
        if self.scaling_hint not in SCALING_HINTS:
            raise BadParams(f"unknown scaling_hint {self.scaling_hint!r}")
        if self.freq not in FREQUENCIES:
            raise BadParams(f"unknown freq {self.freq!r}")
        if not all(
            isinstance(v, float) and np.isfinite(v) for v in self.context
        ):
            raise BadParams("context values must be finite floats")

    def to_json(self) -> str:
        return canonical_json(
            {
                "context": list(self.context),
                "freq": self.freq,
                "horizon": self.horizon,
                "protocol_version": self.protocol_version,
                "scaling_hint": self.scaling_hint,
                "series_id": self.series_id,
            }
        )


@dataclass(frozen=True)
class ForecastResponse:
    point: tuple[float, ...]
    model_name: str
    latency_ms: int
    quantiles: dict | None = None

    def to_json(self) -> str:
        doc: dict = {
            "latency_ms": self.latency_ms,
            "model_name": self.model_name,
            "point": list(self.point),
        }
        if self.quantiles is not None:
            doc["quantiles"] = {k: list(v) for k, v in self.quantiles.items()}
        return canonical_json(doc)


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def parse_request(line: str) -> ForecastRequest:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"request is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolViolation("request must be a JSON object")
    if doc.get("protocol_version") != PROTOCOL_VERSION:
        raise ProtocolViolation(
            f"unsupported protocol_version {doc.get('protocol_version')!r}"
        )
    try:
        return ForecastRequest(
            series_id=str(doc["series_id"]),
            freq=str(doc["freq"]),
            context=tuple(float(v) for v in doc["context"]),
            horizon=int(doc["horizon"]),
            scaling_hint=str(doc.get("scaling_hint", "none")),
        )
    except (KeyError, TypeError, ValueError, BadParams) as exc:
        raise ProtocolViolation(f"bad request: {exc}") from exc


def parse_response(line: str, horizon: int) -> ForecastResponse:
    """Validate a raw response line against the protocol invariants."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolViolation("response must be a JSON object")
    if "error" in doc:
        raise TransportError(f"server error: {doc['error']}")
    point = doc.get("point")
    if not isinstance(point, list) or len(point) != horizon:
        got = len(point) if isinstance(point, list) else type(point).__name__
        raise ProtocolViolation(f"point must list {horizon} values, got {got}")
    values = []
    for v in point:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise ProtocolViolation(f"non-finite or non-numeric point value {v!r}")
        values.append(float(v))
    quantiles = doc.get("quantiles")
    if quantiles is not None:
        if not isinstance(quantiles, dict):
            raise ProtocolViolation("quantiles must be an object")
        parsed_q = {}
        for level, arr in quantiles.items():
            if not isinstance(arr, list) or len(arr) != horizon:
                raise ProtocolViolation(f"quantile {level!r} has wrong length")
            if not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                and np.isfinite(v)
                for v in arr
            ):
                raise ProtocolViolation(f"quantile {level!r} has non-finite values")
            parsed_q[str(level)] = tuple(float(v) for v in arr)
        quantiles = parsed_q
    model_name = doc.get("model_name")
    if not isinstance(model_name, str) or not model_name:
        raise ProtocolViolation("model_name must be a non-empty string")
    latency = doc.get("latency_ms")
    if not isinstance(latency, int) or isinstance(latency, bool) or latency < 0:
        raise ProtocolViolation("latency_ms must be a non-negative int")
    return ForecastResponse(
        point=tuple(values),
        model_name=model_name,
        latency_ms=latency,
        quantiles=quantiles,
    )


class SubprocessClient:
    """Persistent child process; one in-flight request at a time."""

    def __init__(self, argv: list[str] | str, start_timeout: float = 30.0):
        if isinstance(argv, str):
            argv = argv.split()
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._eof = False
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._lock = threading.Lock()

    def _pump(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def call(self, req: ForecastRequest, timeout: float = 30.0) -> ForecastResponse:
        with self._lock:
            # the eof latch keeps later calls from waiting out their timeout
            # on a queue that can never produce another line
            if self._eof or self._proc.poll() is not None:
                raise TransportError("forecaster process has exited")
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(req.to_json() + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"write failed: {exc}") from exc
            try:
                line = self._lines.get(timeout=timeout)
            except queue.Empty:
                raise AdapterTimeout(
                    f"no response within {timeout}s"
                ) from None
            if line is None:
                self._eof = True
                raise TransportError("forecaster closed its output stream")
            return parse_response(line.rstrip("\n"), req.horizon)

    def close(self):
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class HttpClient:
    """POSTs each request to <base>/forecast as a JSON body."""

    def __init__(self, base_url: str):
        base = base_url.rstrip("/")
        self._url = base if base.endswith("/forecast") else base + "/forecast"

    def call(self, req: ForecastRequest, timeout: float = 30.0) -> ForecastResponse:
        body = (req.to_json() + "\n").encode("utf-8")
        http_req = urllib.request.Request(
            self._url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_req, timeout=timeout) as resp:
                raw = resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} from {self._url}") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise AdapterTimeout(f"no response within {timeout}s") from exc
            raise TransportError(f"cannot reach {self._url}: {exc.reason}") from exc
        except TimeoutError as exc:
            raise AdapterTimeout(f"no response within {timeout}s") from exc
        return parse_response(raw.strip(), req.horizon)

    def close(self):
        pass


MOCK_KINDS = ("echo", "seasonal", "noisy", "stub")


class MockForecaster(Forecaster):
    """In-process responder satisfying both the Forecaster contract and the
    wire protocol, so every pipeline runs without an external process.

    Kinds: echo repeats the last context value; seasonal repeats the last
    `period` values; noisy is echo plus seeded Gaussian noise; stub is echo
    under the reference name used by the golden transcripts.
    """

    def __init__(self, kind: str = "echo", seed: int = 0, period: int | None = None):
        if kind not in MOCK_KINDS:
            raise BadParams(f"unknown mock kind {kind!r}")
        self.kind = kind
        self.seed = seed
        self.period = period
        self._rng = np.random.default_rng(seed)

    @property
    def model_name(self) -> str:  # type: ignore[override]
        return "stub" if self.kind == "stub" else f"mock-{self.kind}"

    def fit(self, train: TimeSeries, profile: DomainProfile) -> "MockForecaster":
        if self.period is None and self.kind == "seasonal":
            self.period = profile.seasonal_s
        self.fitted_ = True
        return self

    def predict(self, context, horizon: int) -> np.ndarray:
        values = context_values(context)
        if self.kind == "seasonal":
            s = min(self.period or 1, values.size)
            return seasonal_naive(values, horizon, max(s, 1))
        base = np.full(horizon, float(values[-1]))
        if self.kind == "noisy":
            base = base + self._rng.normal(0.0, 1.0, size=horizon)
        return base

    def call(self, req: ForecastRequest, timeout: float = 30.0) -> ForecastResponse:
        point = self.predict(np.asarray(req.context), req.horizon)
        return ForecastResponse(
            point=tuple(float(v) for v in point),
            model_name=self.model_name,
            latency_ms=0,
        )

    def close(self):
        pass


def mock_forecaster(kind: str, seed: int = 0, period: int | None = None) -> MockForecaster:
    return MockForecaster(kind=kind, seed=seed, period=period)


def make_client(spec: str | None = None, seed: int = 0, period: int | None = None):
    """Resolve a forecaster spec: "cmd:<argv>", "http:<url>" (or a bare
    http(s) URL), or "mock:<kind>". Falls back to the CHRONOSCOPE_ENDPOINT
    environment variable when spec is None."""
    if spec is None:
        spec = os.environ.get(ENDPOINT_ENV)
    if not spec:
        raise TransportError(
            f"no forecaster endpoint; pass one or set {ENDPOINT_ENV}"
        )
    if spec.startswith("mock:"):
        return mock_forecaster(spec[5:], seed=seed, period=period)
    if spec.startswith("cmd:"):
        return SubprocessClient(spec[4:])
    if spec.startswith("http:") and not spec.startswith(("http://", "https://")):
        return HttpClient(spec[5:])
    if spec.startswith(("http://", "https://")):
        return HttpClient(spec)
    raise TransportError(f"unrecognized forecaster spec {spec!r}")


def call_remote(endpoint, req: ForecastRequest, timeout: float = 30.0) -> ForecastResponse:
    """One round trip through whatever endpoint form the caller holds: a
    client object, a spec string, or None for the environment default."""
    client = endpoint if hasattr(endpoint, "call") else make_client(endpoint)
    return client.call(req, timeout=timeout)


class RemoteForecaster(Forecaster):
    """Forecaster facade over a protocol client, so external models slot into
    the evaluation harness unchanged."""

    context_mode = "window"

    def __init__(
        self,
        client,
        scaling_hint: str = "none",
        timeout: float = 30.0,
    ):
        self.client = client
        self.scaling_hint = scaling_hint
        self.timeout = timeout
        self._name: str | None = None

    @property
    def model_name(self) -> str:  # type: ignore[override]
        return self._name or "remote"

    def fit(self, train: TimeSeries, profile: DomainProfile) -> "RemoteForecaster":
        self.series_id_ = train.series_id
        self.freq_ = train.freq
        return self

    def predict(self, context, horizon: int) -> np.ndarray:
        self._require_fitted("series_id_")
        req = ForecastRequest(
            series_id=self.series_id_,
            freq=self.freq_,
            context=tuple(float(v) for v in context_values(context)),
            horizon=horizon,
            scaling_hint=self.scaling_hint,
        )
        resp = call_remote(self.client, req, timeout=self.timeout)
        self._name = resp.model_name
        return np.asarray(resp.point, dtype=np.float64)
