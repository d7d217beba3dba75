"""CLI verbs: run (scripted one-shot), config get/set."""

from __future__ import annotations

import json
from pathlib import Path

from triphase.cli import load_config, main

FIXTURES = Path(__file__).parent / "fixtures"


def test_cli_run_scripted(tmp_path, capsys):
    rc = main(["run", "show me the data directory",
               "--scripted", str(FIXTURES / "listing_run"),
               "--data-dir", str(tmp_path / "data")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "conclusion" in out
    assert "the data directory was listed successfully" in out
    assert "phase_transition" in out  # streamed text UI shows event kinds


def test_cli_config_get_default(tmp_path, capsys):
    rc = main(["config", "get", "pipeline",
               "--config", str(tmp_path / "cfg.json")])
    assert rc == 0


def test_cli_config_set_and_get(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    rc = main(["config", "set", "pipeline.max_rounds", "5",
               "--config", str(cfg)])
    assert rc == 0
    saved = json.loads(cfg.read_text())
    assert saved["pipeline"]["max_rounds"] == 5
    capsys.readouterr()
    rc = main(["config", "get", "pipeline.max_rounds", "--config", str(cfg)])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "5"


def test_cli_config_unknown_key(tmp_path, capsys):
    rc = main(["config", "get", "no.such.key",
               "--config", str(tmp_path / "cfg.json")])
    assert rc == 1


def test_load_config_merges_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"roles": {"planner": "cogito:14b"}}))
    merged = load_config(str(cfg))
    assert merged["roles"]["planner"] == "cogito:14b"
    assert merged["roles"]["reviewer"]  # defaults survive
    assert merged["provider"]["kind"] == "ollama"


def test_cli_rate_against_live_gateway(tmp_path, capsys):
    import threading
    import time as _time

    import httpx
    import uvicorn

    from triphase.engine import Engine
    from triphase.gateway import create_app
    from helpers import GOOD_REVIEW

    engine = Engine.scripted(tmp_path / "data", {
        "scripted-planner": [
            "1. go [TOOL_CALL: echo ok | type: cli]",
            "[TOOL_CALL: echo ok | type: cli]\nFINAL_ANSWER: rated run",
        ],
        "scripted-reviewer": [GOOD_REVIEW],
    })
    handle = engine.submit_task("run the thing")
    engine.wait(handle.run_id, 15)

    config = uvicorn.Config(create_app(engine), host="127.0.0.1", port=0,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = _time.monotonic() + 10
    port = None
    while _time.monotonic() < deadline:
        if server.started and server.servers:
            port = server.servers[0].sockets[0].getsockname()[1]
            break
        _time.sleep(0.05)
    assert port, "uvicorn did not start"
    try:
        rc = main(["rate", handle.run_id, "9",
                   "--url", f"http://127.0.0.1:{port}"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "rating" in out
    finally:
        server.should_exit = True
        thread.join(timeout=5)
