"""Drives the separately built TypeScript bridge over the real wire: golden
transcript replay, validator conformance for every backend, MinMax handling,
error recovery, and both transports. Skips when the bridge is not built."""

import shutil
import subprocess
from importlib import resources
from pathlib import Path

import pytest

from chronoscope import ForecastRequest, HttpClient, SubprocessClient
from chronoscope.errors import TransportError

BRIDGE = Path(__file__).resolve().parents[1] / "bridge"
CLI = BRIDGE / "dist" / "cli.js"
WEIGHTS = BRIDGE / "models" / "chronos-small.json"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not CLI.exists(),
    reason="bridge not built (cd bridge && npm install && npm run build)",
)


def bridge_argv(*extra: str) -> list[str]:
    return ["node", str(CLI), *extra]


def golden_lines() -> list[str]:
    ref = resources.files("chronoscope").joinpath(
        "protocol_transcripts/golden_v1.jsonl"
    )
    return ref.read_text().strip().split("\n")


def test_golden_transcripts_replay_bit_exact_over_stdio():
    lines = golden_lines()
    requests = lines[0::2]
    responses = lines[1::2]
    # a garbage line in the middle must produce an error payload without
    # poisoning the requests after it
    stdin = "\n".join([requests[0], requests[1], "garbage", requests[2]]) + "\n"
    run = subprocess.run(
        bridge_argv("--model-kind", "stub"),
        input=stdin,
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert run.returncode == 0
    got = run.stdout.strip().split("\n")
    assert got[0] == responses[0]
    assert got[1] == responses[1]
    assert got[2] == '{"error":"request is not valid JSON"}'
    assert got[3] == responses[2]


def test_stub_round_trip_passes_response_validation():
    req = ForecastRequest("alpha", "hourly", (1.5, 2.25, 3.5), 4)
    with SubprocessClient(bridge_argv("--model-kind", "stub")) as client:
        res = client.call(req)
    assert res.point == (3.5,) * 4
    assert res.model_name == "stub"
    assert res.latency_ms == 0


def test_minmax_hint_preserves_constant_window():
    req = ForecastRequest("flat", "hourly", (5.5,) * 8, 4, scaling_hint="minmax")
    with SubprocessClient(bridge_argv("--model-kind", "stub")) as client:
        res = client.call(req)
    assert res.point == (5.5,) * 4


def test_chronos_class_serves_validated_deterministic_responses():
    req = ForecastRequest("alpha", "hourly", (2.0, 4.0, 3.0, 5.0), 3)
    argv = bridge_argv("--model-kind", "chronos-class", "--model-ref", str(WEIGHTS))
    with SubprocessClient(argv) as client:
        first = client.call(req)
        second = client.call(req)
    assert first.model_name == "chronos-small"
    assert len(first.point) == 3
    assert set(first.quantiles) == {"0.1", "0.5", "0.9"}
    assert first.point == second.point
    assert first.quantiles == second.quantiles


def test_llm_prompt_builtin_continues_last_value():
    # 7.25 survives the prompt's fixed-precision formatting exactly
    req = ForecastRequest("alpha", "hourly", (3.25, 7.25), 3)
    argv = bridge_argv("--model-kind", "llm-prompt", "--model-ref", "builtin:naive")
    with SubprocessClient(argv) as client:
        res = client.call(req)
    assert res.model_name == "llm-naive"
    assert res.point == (7.25,) * 3


def test_unparseable_llm_backend_surfaces_transport_error():
    # head returns the prompt's prose header, so parsing fails on both the
    # first attempt and the retry, and the bridge answers with an error
    req = ForecastRequest("alpha", "hourly", (1.0, 2.0), 2)
    argv = bridge_argv(
        "--model-kind", "llm-prompt", "--model-ref", "cmd:head -n 1"
    )
    with SubprocessClient(argv) as client:
        with pytest.raises(TransportError, match="comma-separated"):
            client.call(req)


def test_http_transport_round_trip():
    proc = subprocess.Popen(
        bridge_argv("--model-kind", "stub", "--http", "0"),
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        banner = proc.stderr.readline().strip()
        assert banner.startswith("listening on http://")
        endpoint = banner.split("listening on ")[1].removesuffix("/forecast")
        client = HttpClient(endpoint)
        res = client.call(ForecastRequest("alpha", "hourly", (1.5, 9.5), 2))
        assert res.point == (9.5, 9.5)
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_model_load_failure_exits_nonzero():
    run = subprocess.run(
        bridge_argv("--model-kind", "chronos-class", "--model-ref", "/nope.json"),
        input="",
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert run.returncode == 1
    assert "model load failed" in run.stderr
