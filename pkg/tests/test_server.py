"""HTTP service: run submission, records, event streams."""

from __future__ import annotations

import json
import time
import urllib.request

import pytest

from pairstream.server import TrackdServer, run_config_from_request
from pairstream.trackd import Trackd


@pytest.fixture()
def server(tmp_path):
    srv = TrackdServer(tmp_path / "store", host="127.0.0.1", port=0)
    srv.start_background()
    host, port = srv.address
    yield srv, f"http://{host}:{port}"
    srv.shutdown()


def get_json(url: str):
    with urllib.request.urlopen(url, timeout=10) as resp:
        return resp.status, json.loads(resp.read())


def post_json(url: str, payload: dict):
    req = urllib.request.Request(url, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def stream_lines(url: str) -> list[dict]:
    with urllib.request.urlopen(url, timeout=30) as resp:
        return [json.loads(line) for line in resp.read().splitlines() if line]


SUBMISSION = {
    "feed": {"synthetic": {"seed": 3, "n_series": 6, "groups": [[2, 0.0]], "n_steps": 12}},
    "interval": 1.0,
    "samples": 6,
    "start": 0.0,
    "min_support": 2,
    "complexity_penalty": 0.0,
    "pair_mode": "mutual",
    "min_counter": 2,
}


def wait_done(trackd: Trackd, run_id: str, timeout: float = 20.0) -> None:
    deadline = time.time() + timeout
    while time.time() < deadline:
        if trackd.record(run_id).status in ("done", "failed"):
            return
        time.sleep(0.02)
    raise AssertionError("run did not finish in time")


def test_submit_run_and_stream(server):
    srv, base = server
    status, body = post_json(f"{base}/runs", SUBMISSION)
    assert status == 202
    run_id = body["run_id"]
    wait_done(srv.trackd, run_id)

    status, record = get_json(f"{base}/runs/{run_id}")
    assert status == 200 and record["status"] == "done"

    events = stream_lines(f"{base}/runs/{run_id}/events")
    assert events[0]["event"] == "run_started"
    assert events[0]["run_id"] == run_id
    assert any(e["event"] == "pair" for e in events)

    status, listing = get_json(f"{base}/runs")
    assert status == 200 and [r["run_id"] for r in listing["runs"]] == [run_id]

    status, report = get_json(f"{base}/runs/{run_id}/report")
    assert status == 200
    assert report["summary"]["n_pairs"] >= 1
    assert any({p["a"], p["b"]} == {"S0001", "S0002"} for p in report["pairs"])


def test_follow_stream_sees_whole_live_run(server):
    srv, base = server
    submission = dict(SUBMISSION)
    submission["feed"] = {"synthetic": {"seed": 5, "n_series": 6, "groups": [[2, 0.0]],
                                        "n_steps": 60}}
    _, body = post_json(f"{base}/runs", submission)
    run_id = body["run_id"]
    # follow from the start: the stream should hold until the run finishes
    events = stream_lines(f"{base}/runs/{run_id}/events?follow=1")
    assert events[0]["event"] == "run_started"
    assert events == list(srv.trackd.stream_events(run_id))
    assert srv.trackd.record(run_id).status == "done"


def test_same_sector_filter_param(server):
    srv, base = server
    submission = dict(SUBMISSION)
    submission["pair_mode"] = "best"
    submission["feed"] = {"synthetic": {"seed": 11, "n_series": 10, "groups": [[2, 0.0]],
                                        "n_steps": 12}}
    _, body = post_json(f"{base}/runs", submission)
    run_id = body["run_id"]
    wait_done(srv.trackd, run_id)
    full = stream_lines(f"{base}/runs/{run_id}/events")
    filtered = stream_lines(f"{base}/runs/{run_id}/events?same_sector_only=1")
    assert [e for e in filtered if e["event"] == "pair"] == \
           [e for e in full if e["event"] == "pair" and e["sector_a"] == e["sector_b"]]


def test_unknown_run_yields_error_event_stream(server):
    _, base = server
    events = stream_lines(f"{base}/runs/does-not-exist/events")
    assert len(events) == 1 and events[0]["event"] == "error"


def test_unknown_run_record_404(server):
    _, base = server
    try:
        urllib.request.urlopen(f"{base}/runs/nope", timeout=10)
        raise AssertionError("expected 404")
    except urllib.error.HTTPError as err:
        assert err.code == 404


def test_bad_submission_400(server):
    _, base = server
    status, body = post_json(f"{base}/runs", {"interval": 1.0})
    assert status == 400 and "feed" in body["error"]
    status, _ = post_json(f"{base}/runs", {"feed": {"synthetic": {"seed": 1, "n_series": 0}}})
    assert status == 400


def test_cors_headers(server):
    _, base = server
    req = urllib.request.Request(f"{base}/runs", method="OPTIONS")
    with urllib.request.urlopen(req, timeout=10) as resp:
        assert resp.headers["Access-Control-Allow-Origin"] == "*"
    with urllib.request.urlopen(f"{base}/runs", timeout=10) as resp:
        assert resp.headers["Access-Control-Allow-Origin"] == "*"


def test_request_mapping_matches_cli_semantics():
    config = run_config_from_request(SUBMISSION)
    assert config.feed.kind == "synthetic"
    assert config.plan.n_samples == 6
    assert config.policy.mode == "mutual"
    seeded = run_config_from_request({**SUBMISSION, "seed": 99})
    assert seeded.feed.config.seed == 99
    varied = run_config_from_request({**SUBMISSION, "interval": [1.0, 2.0, 1.0, 1.0, 3.0]})
    assert varied.plan.gaps() == (1.0, 2.0, 1.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        run_config_from_request({"feed": {"neither": 1}})