"""Command-line interface: run, serve, config, rate.

`run` drives one request end to end with a streamed text UI; `serve`
exposes the REST gateway; `config` reads and writes the engine config
file; `rate` posts a 1-10 rating for a finished run to a live gateway.
All verbs share the same engine construction path, so CLI runs follow
the identical pipeline as REST and embedded submissions.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from triphase.engine import Engine
from triphase.memomap import MemoMap
from triphase.modelhub import ModelCatalog, SessionRegistry
from triphase.pipeline import PipelineConfig, RoleSet, RoleSpec
from triphase.providers import OllamaStyleProvider, OpenAIStyleProvider
from triphase.router import PermissionPolicy
from triphase.runtime import PlannedTaskStore
from triphase.skillstore import SkillStore
from triphase.toolkit.handlers import ToolkitContext, build_default_router

DEFAULT_CONFIG = {
    "pipeline": {},
    "policy": {"default": "auto", "levels": {}, "ask_timeout": 60.0},
    "roles": {"planner": "qwen3.5:27b", "reviewer": "gpt-oss:20b",
              "executor": "cogito:8b", "tools": "phi4-mini:3.8b"},
    "provider": {"kind": "ollama", "base_url": "http://127.0.0.1:11434"},
    "capacity_mb": 24576,
}


def load_config(path: str | None) -> dict:
    merged = json.loads(json.dumps(DEFAULT_CONFIG))
    if path and Path(path).exists():
        user = json.loads(Path(path).read_text())
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
    return merged


def build_engine(args) -> Engine:
    config = load_config(getattr(args, "config", None))
    data_dir = Path(getattr(args, "data_dir", None) or "./triphase-data")
    pipeline_config = PipelineConfig(**config.get("pipeline", {}))
    policy_cfg = config.get("policy", {})
    policy = PermissionPolicy(
        levels=dict(policy_cfg.get("levels", {})),
        default_level=policy_cfg.get("default", "auto"),
        ask_timeout=float(policy_cfg.get("ask_timeout", 60.0)),
        session_remember=bool(policy_cfg.get("session_remember", False)))

    fixture = getattr(args, "scripted", None)
    if fixture:
        substitutions = {"WORKDIR": str(data_dir.resolve())}
        return Engine.from_fixture(data_dir, fixture,
                                   substitutions=substitutions,
                                   config=pipeline_config, policy=policy)

    provider_cfg = config.get("provider", {})
    kind = provider_cfg.get("kind", "ollama")
    base_url = provider_cfg.get("base_url", "http://127.0.0.1:11434")
    if kind == "openai":
        provider = OpenAIStyleProvider(base_url,
                                       api_key=provider_cfg.get("api_key", ""))
    else:
        provider = OllamaStyleProvider(base_url)

    catalog = ModelCatalog()
    role_names = config.get("roles", {})

    def spec(role: str) -> RoleSpec | None:
        name = role_names.get(role)
        if not name:
            return None
        return RoleSpec(catalog.require(name), provider)

    roles = RoleSet(planner=spec("planner"), reviewer=spec("reviewer"),
                    executor=spec("executor"), tools=spec("tools"))
    return Engine(
        router=build_default_router(ToolkitContext()),
        memomap=MemoMap(data_dir / "memory"),
        skills=SkillStore(data_dir / "skills"),
        registry=SessionRegistry(float(config.get("capacity_mb", 24576))),
        catalog=catalog, roles=roles, config=pipeline_config, policy=policy,
        tasks=PlannedTaskStore(data_dir / "tasks.json"))


def cmd_run(args) -> int:
    engine = build_engine(args)
    handle = engine.submit_task(args.request)
    for env in engine.run_log(handle.run_id).stream():
        payload = json.dumps(env.payload)
        if len(payload) > 160:
            payload = payload[:157] + "..."
        print(f"[{env.seq:03d}] {env.kind}: {payload}")
    engine.wait(handle.run_id, timeout=args.timeout)
    outcome = engine.run_outcome(handle.run_id)
    if outcome and outcome.ok:
        print("\n=== conclusion ===")
        print(outcome.conclusion.text)
        return 0
    print("\n=== run failed ===")
    if outcome:
        print(f"{outcome.error_kind}: {outcome.error}")
    return 1


def cmd_serve(args) -> int:
    import uvicorn

    from triphase.gateway import create_app
    engine = build_engine(args)
    app = create_app(engine, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_config(args) -> int:
    path = Path(args.config or "triphase.json")
    config = load_config(str(path))
    if args.action == "get":
        node = config
        for part in args.key.split("."):
            if not isinstance(node, dict) or part not in node:
                print(f"unknown key: {args.key}", file=sys.stderr)
                return 1
            node = node[part]
        print(json.dumps(node, indent=2))
        return 0
    # set
    node = config
    parts = args.key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    try:
        value = json.loads(args.value)
    except json.JSONDecodeError:
        value = args.value
    node[parts[-1]] = value
    path.write_text(json.dumps(config, indent=2) + "\n")
    print(f"set {args.key} = {value!r} in {path}")
    return 0


def cmd_rate(args) -> int:
    import httpx
    resp = httpx.post(f"{args.url}/runs/{args.run_id}/rating",
                      json={"rating": args.rating}, timeout=10.0)
    print(resp.json())
    return 0 if resp.status_code == 200 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="triphase",
        description="local-first plan/review/execute orchestration engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one request end to end")
    p_run.add_argument("request")
    p_run.add_argument("--config")
    p_run.add_argument("--data-dir")
    p_run.add_argument("--scripted", help="scripted fixture directory")
    p_run.add_argument("--timeout", type=float, default=600.0)
    p_run.set_defaults(func=cmd_run)

    p_serve = sub.add_parser("serve", help="serve the REST gateway")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.add_argument("--config")
    p_serve.add_argument("--data-dir")
    p_serve.add_argument("--scripted", help="scripted fixture directory")
    p_serve.add_argument("--console",
                         help="built console directory to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    p_config = sub.add_parser("config", help="get or set config keys")
    p_config.add_argument("action", choices=("get", "set"))
    p_config.add_argument("key")
    p_config.add_argument("value", nargs="?")
    p_config.add_argument("--config")
    p_config.set_defaults(func=cmd_config)

    p_rate = sub.add_parser("rate", help="rate a finished run on a gateway")
    p_rate.add_argument("run_id")
    p_rate.add_argument("rating", type=int)
    p_rate.add_argument("--url", default="http://127.0.0.1:8700")
    p_rate.set_defaults(func=cmd_rate)

    args = parser.parse_args(argv)
    if args.command == "config" and args.action == "set" and \
            args.value is None:
        parser.error("config set requires a value")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
