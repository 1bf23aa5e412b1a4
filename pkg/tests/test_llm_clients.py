from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from nudgesim.llm_clients import (
    LiveClient,
    LiveClientConfig,
    MockClient,
    ModelTimeout,
    Rule,
    RuleTablePolicy,
    SequencePolicy,
    TransportError,
    client_from_spec,
    policy_from_spec,
)


class _Completions(BaseHTTPRequestHandler):
    """Chat-completions stub; behavior keyed off the requested model name."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        self.server.last_request = body  # type: ignore[attr-defined]
        self.server.last_auth = self.headers.get("Authorization")  # type: ignore[attr-defined]
        if body["model"] == "broken":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b'{"unexpected": true}')
            return
        reply = {
            "choices": [{"message": {"role": "assistant", "content": "# Pick ; cooking pot &"}}]
        }
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def completions_server():
    server = HTTPServer(("127.0.0.1", 0), _Completions)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


class TestLiveClient:
    def endpoint(self, server):
        return f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"

    def test_round_trip_and_token_header(self, completions_server, monkeypatch):
        monkeypatch.setenv("NUDGESIM_API_TOKEN", "sekrit")
        client = LiveClient(LiveClientConfig(self.endpoint(completions_server), model="good"))
        out = client.complete([{"role": "user", "content": "hello"}])
        assert out == "# Pick ; cooking pot &"
        assert completions_server.last_auth == "Bearer sekrit"
        assert completions_server.last_request["model"] == "good"

    def test_malformed_body_is_transport_error(self, completions_server):
        client = LiveClient(LiveClientConfig(self.endpoint(completions_server), model="broken"))
        with pytest.raises(TransportError):
            client.complete([{"role": "user", "content": "hello"}])

    def test_connection_refused_is_transport_error(self):
        client = LiveClient(LiveClientConfig("http://127.0.0.1:9/v1/chat", model="x", timeout=0.5))
        with pytest.raises(TransportError):
            client.complete([{"role": "user", "content": "hi"}])

    def test_timeout_surfaces_as_model_timeout(self):
        # an unroutable address makes urlopen hit the socket timeout
        client = LiveClient(
            LiveClientConfig("http://10.255.255.1:81/v1/chat", model="x", timeout=0.2)
        )
        with pytest.raises((ModelTimeout, TransportError)):
            client.complete([{"role": "user", "content": "hi"}])


class TestPolicyPlumbing:
    def test_sequence_policy_exhausts_to_empty(self):
        client = MockClient(SequencePolicy(["a", "b"]))
        assert [client.complete([]) for _ in range(3)] == ["a", "b", ""]

    def test_rule_once_is_consumed(self):
        policy = RuleTablePolicy(
            [Rule(respond="junk", once=True), Rule(respond="# Move ; x &")]
        )
        client = MockClient(policy)
        msgs = [{"role": "user", "content": "anything"}]
        assert client.complete(msgs) == "junk"
        assert client.complete(msgs) == "# Move ; x &"

    def test_policy_from_spec_kinds(self):
        assert isinstance(policy_from_spec({"kind": "sequence"}), SequencePolicy)
        assert isinstance(policy_from_spec({"kind": "rules"}), RuleTablePolicy)
        with pytest.raises(ValueError):
            policy_from_spec({"kind": "vibes"})

    def test_client_from_spec_mock_policy_file(self, tmp_path):
        policy_file = tmp_path / "policy.json"
        policy_file.write_text(json.dumps({"kind": "sequence", "responses": ["# Move ; x &"]}))
        client = client_from_spec({"kind": "mock", "policy": str(policy_file)})
        assert client.complete([]) == "# Move ; x &"

    def test_client_from_spec_live(self):
        client = client_from_spec(
            {"kind": "live", "endpoint": "http://example.invalid/v1", "model": "m"}
        )
        assert client.kind == "live"
