"""HTTP front for the run service.

Serves run submission and newline-delimited event streams over plain
threading HTTP, which is all a console needs:

    POST /runs                    submit a run (JSON body), returns {run_id}
    GET  /runs                    list run records
    GET  /runs/{id}               one run record
    GET  /runs/{id}/events        NDJSON event stream
         ?same_sector_only=1      suppress cross-sector pairs and their prices
         ?follow=1                tail a live run until it finishes
    GET  /runs/{id}/report        pair records plus summary

Every response carries permissive CORS headers so a browser console can
talk to it directly.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .dtree import TreeParams
from .errors import NotFoundError, PairstreamError
from .feedgen import FeedConfig
from .ranking import PairPolicy
from .sampler import SamplingPlan
from .trackd import FeedSpec, RunConfig, Trackd


def run_config_from_request(payload: dict) -> RunConfig:
    """Build a RunConfig from the submission body.

    The body mirrors the `trackd run` command line: a feed (`{"csv": path}`
    or `{"synthetic": {...}}` with an optional top-level `seed` override),
    sampling fields (`interval`, `samples`, `start`), tree fields
    (`min_support`, `complexity_penalty`, `split_kind`), and pairing fields
    (`pair_mode`, `min_counter`, `same_sector_only`).
    """
    feed_d = payload.get("feed")
    if not isinstance(feed_d, dict):
        raise ValueError("missing feed: expected {'csv': path} or {'synthetic': {...}}")
    if "csv" in feed_d:
        feed = FeedSpec.csv(feed_d["csv"])
    elif "synthetic" in feed_d:
        cfg_d = dict(feed_d["synthetic"])
        if "seed" in payload:
            cfg_d["seed"] = payload["seed"]
        feed = FeedSpec.synthetic(FeedConfig.from_dict(cfg_d))
    else:
        raise ValueError("feed must contain 'csv' or 'synthetic'")

    interval = payload.get("interval", 10.0)
    plan = SamplingPlan(
        n_samples=int(payload.get("samples", 6)),
        interval=tuple(float(g) for g in interval) if isinstance(interval, list) else float(interval),
        start=None if payload.get("start") is None else float(payload["start"]),
    )
    params = TreeParams(
        complexity_penalty=float(payload.get("complexity_penalty", 0.0)),
        min_support=int(payload.get("min_support", 2)),
        split_kind=str(payload.get("split_kind", "threshold")),
    )
    policy = PairPolicy(
        mode=str(payload.get("pair_mode", "best")),
        min_counter=int(payload.get("min_counter", 2)),
    )
    return RunConfig(
        feed=feed, plan=plan, params=params, policy=policy,
        same_sector_only=bool(payload.get("same_sector_only", False)),
        validate_on_changes=bool(payload.get("validate_on_changes", False)),
    )


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    trackd: Trackd  # set on the server class

    # quiet by default; the access log is noise in tests and CLIs
    def log_message(self, fmt, *args):  # noqa: A003
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:  # noqa: N802
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self) -> None:  # noqa: N802
        if urlparse(self.path).path != "/runs":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            config = run_config_from_request(payload)
            run_id = self.server.trackd.start_run(config, background=True)  # type: ignore[attr-defined]
        except (ValueError, KeyError, TypeError, PairstreamError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(202, {"run_id": run_id})

    def do_GET(self) -> None:  # noqa: N802
        parsed = urlparse(self.path)
        parts = [p for p in parsed.path.split("/") if p]
        query = parse_qs(parsed.query)
        trackd: Trackd = self.server.trackd  # type: ignore[attr-defined]
        try:
            if parts == ["runs"]:
                self._send_json(200, {"runs": [r.to_dict() for r in trackd.list_runs()]})
            elif len(parts) == 2 and parts[0] == "runs":
                self._send_json(200, trackd.record(parts[1]).to_dict())
            elif len(parts) == 3 and parts[0] == "runs" and parts[2] == "events":
                self._stream_events(trackd, parts[1], query)
            elif len(parts) == 3 and parts[0] == "runs" and parts[2] == "report":
                self._send_json(200, trackd.report(parts[1]))
            else:
                self._send_json(404, {"error": "not found"})
        except NotFoundError as exc:
            self._send_json(404, {"error": str(exc)})

    def _stream_events(self, trackd: Trackd, run_id: str, query: dict) -> None:
        same_sector = query.get("same_sector_only", ["0"])[0] in ("1", "true", "yes")
        follow = query.get("follow", ["0"])[0] in ("1", "true", "yes")
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        try:
            for record in trackd.stream_events(run_id, same_sector_only=same_sector, follow=follow):
                self.wfile.write((json.dumps(record, separators=(",", ":")) + "\n").encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        self.close_connection = True


class TrackdServer:
    """Owns the HTTP server and its service instance."""

    def __init__(self, store_root, host: str = "127.0.0.1", port: int = 8787):
        self.trackd = Trackd(store_root)
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.trackd = self.trackd  # type: ignore[attr-defined]
        self.httpd.daemon_threads = True

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
