"""Conversational model backends: a deterministic mock and a remote HTTP client."""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Protocol

from ..errors import BackendError


ResponseSchema = Literal["placement_target", "scale_factor", "insertion_script"]
RESPONSE_SCHEMAS = ("placement_target", "scale_factor", "insertion_script")


@dataclass(frozen=True)
class LlmRequest:
    """One prompt. ``context`` carries the structured inputs the prompt was
    rendered from; it is not sent over the wire and not part of the hash."""

    system_instruction: str
    few_shot: tuple[tuple[str, str], ...]
    user_message: str
    response_schema: ResponseSchema
    context: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.user_message:
            raise ValueError("user_message must be nonempty")
        if self.response_schema not in RESPONSE_SCHEMAS:
            raise ValueError(f"unknown response schema {self.response_schema!r}")
        pairs = tuple(tuple(p) for p in self.few_shot)
        if any(len(p) != 2 or not all(isinstance(s, str) for s in p) for p in pairs):
            raise ValueError("few_shot entries must be (user, assistant) string pairs")
        object.__setattr__(self, "few_shot", pairs)

    def to_dict(self) -> dict:
        return {
            "system_instruction": self.system_instruction,
            "few_shot": [list(p) for p in self.few_shot],
            "user_message": self.user_message,
            "response_schema": self.response_schema,
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def messages(self) -> list[dict[str, str]]:
        out = [{"role": "system", "content": self.system_instruction}]
        for user, assistant in self.few_shot:
            out += [{"role": "user", "content": user}, {"role": "assistant", "content": assistant}]
        out.append({"role": "user", "content": self.user_message})
        return out


class Transcript:
    """Request/response log, optionally mirrored to a JSON-lines file."""

    def __init__(self, path: str | os.PathLike | None = None, clock=time.time):
        self.path = Path(path) if path is not None else None
        self.entries: list[dict] = []
        self._clock = clock

    def record(self, request: LlmRequest, response: str) -> None:
        entry = {
            "request_hash": request.hash,
            "request": request.to_dict(),
            "response": response,
            "timestamp": self._clock(),
        }
        self.entries.append(entry)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


class Backend(Protocol):
    transcript: Transcript

    def complete(self, request: LlmRequest) -> str: ...


def load_mock_rules(path: str | os.PathLike | None = None) -> dict:
    if path is None:
        text = resources.files("scan2sim").joinpath("data/mock_rules.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


class MockBackend:
    """Offline backend answering from a rules table.

    A response file ``<request_hash>.txt`` in ``replay_dir`` takes priority,
    so captured transcripts of a real model can be replayed verbatim.
    Otherwise the answer is derived from the request context and the rules.
    Same request, same answer.
    """

    def __init__(self, rules: dict | None = None, replay_dir: str | os.PathLike | None = None, transcript: Transcript | None = None):
        self.rules = rules if rules is not None else load_mock_rules()
        self.replay_dir = Path(replay_dir) if replay_dir is not None else None
        self.transcript = transcript or Transcript()

    def complete(self, request: LlmRequest) -> str:
        answer = self._replayed(request)
        if answer is None:
            answer = self._from_rules(request)
        self.transcript.record(request, answer)
        return answer

    def _replayed(self, request: LlmRequest) -> str | None:
        if self.replay_dir is None:
            return None
        path = self.replay_dir / f"{request.hash}.txt"
        return path.read_text(encoding="utf-8") if path.is_file() else None

    def _from_rules(self, request: LlmRequest) -> str:
        ctx = request.context
        label = ctx.get("object_label") or ctx.get("label")
        if request.response_schema == "placement_target":
            rule = self.rules["placement"].get(label)
            if rule is None:
                raise BackendError(f"mock has no placement rule for {label!r}")
            return json.dumps(rule, sort_keys=True)
        if request.response_schema == "scale_factor":
            rule = self.rules["scale"].get(label)
            if rule is None:
                raise BackendError(f"mock has no scale rule for {label!r}")
            if "raw" in rule:
                return json.dumps({"scale": rule["raw"]})
            return json.dumps({"scale": mock_scale(ctx["extent"], rule["typical_size"], self.rules["plausible_band"])})
        fields = dict(ctx)
        for key in ("prim_path", "object_path", "object_label"):
            fields[f"{key}_q"] = json.dumps(ctx[key])
        return "\n".join(line.format(**fields) for line in self.rules["script"]) + "\n"


def mock_scale(extent, typical_size: float, band=(0.5, 2.0)) -> float:
    """Uniform factor taking the largest extent to ``typical_size``, or 1 if already plausible."""
    largest = max(float(e) for e in extent)
    if band[0] * typical_size <= largest <= band[1] * typical_size:
        return 1.0
    return round(typical_size / largest, 6)


class HttpBackend:
    """Chat-completions style JSON endpoint.

    The API key is read from the environment variable named by ``key_env``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        key_env: str = "SCAN2SIM_API_KEY",
        timeout: float = 60.0,
        transcript: Transcript | None = None,
    ):
        if not endpoint:
            raise ValueError("http backend needs an endpoint")
        self.endpoint = endpoint
        self.model = model
        self.key_env = key_env
        self.timeout = timeout
        self.transcript = transcript or Transcript()

    def complete(self, request: LlmRequest) -> str:
        body = {"model": self.model, "messages": request.messages(), "temperature": 0}
        if request.response_schema != "insertion_script":
            body["response_format"] = {"type": "json_object"}
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(self.endpoint, data=json.dumps(body).encode("utf-8"), headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise BackendError(f"request to {self.endpoint} failed: {exc}") from exc
        try:
            answer = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response shape from {self.endpoint}") from exc
        if not isinstance(answer, str):
            raise BackendError("response content is not text")
        self.transcript.record(request, answer)
        return answer


def make_backend(config: dict, transcript: Transcript | None = None) -> Backend:
    """Build a backend from the ``backend`` / ``http.*`` / ``mock.*`` config keys."""
    kind = config.get("backend", "mock")
    if kind == "mock":
        mock = config.get("mock", {})
        rules = load_mock_rules(mock["rules"]) if mock.get("rules") else None
        return MockBackend(rules, mock.get("replay_dir"), transcript)
    if kind == "http":
        http = config.get("http", {})
        return HttpBackend(
            http.get("endpoint", ""),
            http.get("model", ""),
            http.get("key_env", "SCAN2SIM_API_KEY"),
            float(http.get("timeout", 60.0)),
            transcript,
        )
    raise ValueError(f"unknown backend {kind!r}")
