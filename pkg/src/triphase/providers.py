"""Model providers: Ollama-style HTTP, OpenAI-compatible HTTP, scripted.

The scripted provider replays per-model transcripts from memory or from
a fixture directory and records every call (load, unload, chat, embed),
which is what the pipeline and model-switch tests observe.
"""

from __future__ import annotations

import json
from pathlib import Path

import httpx


class ProviderError(Exception):
    pass


class OllamaStyleProvider:
    """Client for an Ollama-style local API.

    Wire shape (documented for fixture servers):
      POST {base}/api/chat  {"model", "messages", "think"?, "keep_alive"?}
          -> {"message": {"content": str}}
      POST {base}/api/show  {"model"} -> {"capabilities": [str, ...]}
      load   = POST /api/chat with empty messages, keep_alive=-1
      unload = POST /api/chat with empty messages, keep_alive=0
    """

    def __init__(self, base_url: str, client: httpx.Client | None = None,
                 timeout: float = 120.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.client = client or httpx.Client(timeout=timeout)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self.client.post(self.base_url + path, json=payload)
            resp.raise_for_status()
            return resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise ProviderError(f"{path}: {exc}") from exc

    def chat(self, model: str, messages: list[dict],
             think: str = "default") -> str:
        payload: dict = {"model": model, "messages": messages, "stream": False}
        if think == "on":
            payload["think"] = True
        elif think == "off":
            payload["think"] = False
        data = self._post("/api/chat", payload)
        return data.get("message", {}).get("content", "")

    def model_info(self, model: str) -> dict:
        return self._post("/api/show", {"model": model})

    def load(self, model: str) -> None:
        self._post("/api/chat", {"model": model, "messages": [],
                                 "keep_alive": -1})

    def unload(self, model: str) -> None:
        self._post("/api/chat", {"model": model, "messages": [],
                                 "keep_alive": 0})

    def embed(self, text: str) -> list[float]:
        data = self._post("/api/embed", {"model": "embedding", "input": text})
        return data["embeddings"][0]


class OpenAIStyleProvider:
    """OpenAI-compatible chat completions; no model-info route."""

    def __init__(self, base_url: str, api_key: str = "",
                 client: httpx.Client | None = None,
                 timeout: float = 120.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.client = client or httpx.Client(timeout=timeout)
        self.calls: list[tuple[str, str]] = []

    def chat(self, model: str, messages: list[dict],
             think: str = "default") -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.client.post(
                self.base_url + "/v1/chat/completions",
                json={"model": model, "messages": messages}, headers=headers)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, json.JSONDecodeError) as exc:
            raise ProviderError(f"chat completions: {exc}") from exc

    def model_info(self, model: str) -> dict:
        raise ProviderError("this backend has no model-info route")

    def load(self, model: str) -> None:
        self.calls.append(("load", model))

    def unload(self, model: str) -> None:
        self.calls.append(("unload", model))


class ScriptedProvider:
    """Replays canned outputs per model and records every call."""

    def __init__(self, scripts: dict[str, list[str]] | None = None,
                 capabilities: dict[str, list[str]] | None = None,
                 loop_last: bool = False) -> None:
        self.scripts = {k: list(v) for k, v in (scripts or {}).items()}
        self.capabilities = capabilities or {}
        self.loop_last = loop_last
        self.calls: list[dict] = []

    def chat(self, model: str, messages: list[dict],
             think: str = "default") -> str:
        self.calls.append({"op": "chat", "model": model,
                           "messages": messages, "think": think})
        queue = self.scripts.get(model)
        if not queue:
            raise ProviderError(f"script exhausted for {model}")
        if len(queue) == 1 and self.loop_last:
            return queue[0]
        return queue.pop(0)

    def model_info(self, model: str) -> dict:
        self.calls.append({"op": "model_info", "model": model})
        caps = self.capabilities.get(model)
        if caps is None:
            raise ProviderError(f"no info for {model}")
        return {"capabilities": caps}

    def load(self, model: str) -> None:
        self.calls.append({"op": "load", "model": model})

    def unload(self, model: str) -> None:
        self.calls.append({"op": "unload", "model": model})

    def ops(self, op: str | None = None) -> list[dict]:
        return [c for c in self.calls if op is None or c["op"] == op]

    def remaining(self, model: str) -> int:
        return len(self.scripts.get(model, ()))


def load_scripted_fixture(fixture_dir: str | Path,
                          substitutions: dict[str, str] | None = None
                          ) -> tuple[dict, ScriptedProvider]:
    """Read a transcript fixture directory.

    Layout: manifest.json names the role->model mapping and per-model
    transcript files (keyed by round/step order); ${NAME} placeholders
    in transcripts are substituted at load time.
    """
    root = Path(fixture_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    scripts: dict[str, list[str]] = {}
    for model, files in manifest.get("scripts", {}).items():
        outputs = []
        for fname in files:
            text = (root / fname).read_text()
            for key, value in (substitutions or {}).items():
                text = text.replace("${%s}" % key, value)
            outputs.append(text)
        scripts[model] = outputs
    provider = ScriptedProvider(
        scripts=scripts, capabilities=manifest.get("capabilities", {}))
    return manifest, provider
