import json
import socket
import threading
import time

import pytest
from fastapi.testclient import TestClient

from rhi_lab import __version__
from rhi_lab.service import app

client = TestClient(app)

TWOSTEP = {"kind": "step", "breakpoints": ["0", "1/2", "1"], "values": ["1", "3"]}
DY13 = {
    "kind": "dyadic",
    "dim": 1,
    "depth": 1,
    "cube": {"lo": ["0"], "side": "1"},
    "cells": ["1", "3"],
}
KINKED = {"kind": "cdf", "knots": [["0", "0"], ["1/4", "1/2"], ["1", "1"]]}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_verify_endpoint():
    resp = client.post("/verify", json={"theorem": "t1.3", "weight": TWOSTEP})
    assert resp.status_code == 200
    body = resp.json()
    assert body["holds"] is True
    assert body["ratio"].startswith("0.94494078742115487")
    assert body["deltaSource"] == "exact A1"


def test_verify_failing_verdict_still_200():
    resp = client.post(
        "/verify", json={"theorem": "cor3.5", "weight": TWOSTEP, "r": "5/4"}
    )
    assert resp.status_code == 200
    assert resp.json()["holds"] is False  # exit-code mapping is the client's job


def test_verify_unknown_theorem_400():
    resp = client.post("/verify", json={"theorem": "nope", "weight": TWOSTEP})
    assert resp.status_code == 400
    assert resp.json()["detail"].startswith("domain error:")


def test_verify_out_of_range_400():
    resp = client.post("/verify", json={"theorem": "t4.2", "weight": DY13, "r": "4"})
    assert resp.status_code == 400
    assert resp.json()["detail"].startswith("range error:")


def test_verify_malformed_weight_400():
    resp = client.post(
        "/verify", json={"theorem": "t1.3", "weight": {"kind": "step", "values": ["1"]}}
    )
    assert resp.status_code == 400
    assert resp.json()["detail"].startswith("parse error:")


def test_missing_required_field_422():
    resp = client.post("/verify", json={"weight": TWOSTEP})
    assert resp.status_code == 422


def test_constants_endpoint():
    resp = client.post("/constants", json={"weight": DY13, "kind": "fw"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["value"] == "5/4"
    assert body["exact"] is True


def test_sweep_endpoint():
    resp = client.post(
        "/sweep", json={"theorem": "t4.2", "n": 2, "depth": 2, "count": 6, "seed": 7}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["holds"] == body["count"] == 6
    assert body["failures"] == []


def test_sharpness_endpoint():
    resp = client.post(
        "/sharpness",
        json={"variant": "t3.1.first", "delta": "2", "r": "3/2", "budget": 150, "seed": 5},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["sound"] is True
    assert body["bestRatio"] <= 1 + 1e-9


def test_grid_endpoint():
    resp = client.post("/grid", json={"measures": [KINKED], "depth": 2})
    assert resp.status_code == 200
    body = resp.json()
    assert body["kind"] == "mugrid"
    assert body["generations"][0]["boxes"][0]["mass"] == "1"


def test_profile_endpoint():
    resp = client.post("/profile", json={"weight": TWOSTEP, "points": 2})
    assert resp.status_code == 200
    csv = resp.json()["csv"]
    assert csv.splitlines()[1] == "x,value"


# ---------------------------------------------------------------------------
# live socket: the CLI's --server mode against a real uvicorn instance


@pytest.fixture(scope="module")
def live_server():
    uvicorn = pytest.importorskip("uvicorn")
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            pytest.skip("uvicorn did not come up in time")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_cli_thin_client_against_live_server(live_server, tmp_path, capsys):
    from rhi_lab.cli import main
    from rhi_lab.core import canonical_json

    wfile = tmp_path / "w.json"
    wfile.write_text(canonical_json(TWOSTEP))
    argv = ["verify", "--theorem", "t1.3", "--weight", str(wfile)]

    assert main(argv) == 0
    local = json.loads(capsys.readouterr().out)
    assert main(argv + ["--server", live_server]) == 0
    remote = json.loads(capsys.readouterr().out)

    local.pop("wallClockSec")
    remote.pop("wallClockSec")
    assert remote == local


def test_cli_thin_client_maps_server_rejection(live_server, tmp_path, capsys):
    from rhi_lab.cli import main
    from rhi_lab.core import canonical_json

    wfile = tmp_path / "w.json"
    wfile.write_text(canonical_json(TWOSTEP))
    code = main(
        ["verify", "--theorem", "nope", "--weight", str(wfile), "--server", live_server]
    )
    err = capsys.readouterr().err
    assert code == 1
    assert "server rejected the request" in err
    assert "unknown theorem id" in err
