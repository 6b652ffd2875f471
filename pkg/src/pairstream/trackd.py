"""Run orchestration: the sampling, classification, tracking lifecycle.

A run executes the full pipeline against one feed, persists every artifact
under its run id, and emits a totally ordered event stream that is
replayable byte for byte from the store. Run ids are content hashes of the
run configuration (plus the feed file's digest for replays), so identical
inputs name identical runs and the determinism of the whole pipeline is
directly observable: same config, same bytes.

Event grammar (newline-delimited JSON records, field sets normative):

    run_started         {run_id, n_samples, intervals}
    sample_taken        {index, timestamp}
    classification_done {n_series, n_nodes, n_pairs}
    pair                {pair_id, a, b, counter, r, sector_a, sector_b}
    price               {symbol, price, pct_since_start, timestamp}
    run_failed          {reason}

An ``error`` record is emitted (then the stream closes) when a stream is
requested for an unknown run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from . import store as store_mod
from .dtree import TreeParams, train_tree
from .errors import (
    EmptyCohortError,
    NotFoundError,
    PairstreamError,
    PartialWindowError,
    StateError,
)
from .feedgen import Feed, FeedConfig, generate_feed, replay_csv
from .labeling import compute_changes, self_label
from .ranking import PairPolicy, discover_pairs
from .sampler import SamplingPlan, sample_stream, filter_incomplete, write_samples_csv
from .store import EventLog, RunStore
from .validation import parse_report_lines, validate_pairs

TRACKD_STORE_ENV = "TRACKD_STORE"

STATUSES = ("sampling", "classifying", "tracking", "done", "failed")
_ALLOWED_TRANSITIONS = {
    "sampling": {"classifying", "failed"},
    "classifying": {"tracking", "failed"},
    "tracking": {"done", "failed"},
    "done": set(),
    "failed": set(),
}


@dataclass(frozen=True)
class FeedSpec:
    """Where a run's ticks come from: a synthetic config or a CSV file."""

    kind: str  # "synthetic" | "csv"
    config: FeedConfig | None = None
    path: str | None = None

    def make(self) -> Feed:
        if self.kind == "synthetic":
            assert self.config is not None
            return generate_feed(self.config)
        assert self.path is not None
        return replay_csv(self.path)

    def identity(self) -> dict:
        """A stable description for run-id hashing. CSV feeds contribute
        their content digest so editing the file renames the run."""
        if self.kind == "synthetic":
            assert self.config is not None
            return {"kind": "synthetic", "config": self.config.to_dict()}
        digest = hashlib.sha256(Path(self.path).read_bytes()).hexdigest()
        return {"kind": "csv", "path": str(self.path), "sha256": digest}

    def to_dict(self) -> dict:
        if self.kind == "synthetic":
            return {"kind": "synthetic", "config": self.config.to_dict()}
        return {"kind": "csv", "path": str(self.path)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedSpec":
        if d["kind"] == "synthetic":
            return cls(kind="synthetic", config=FeedConfig.from_dict(d["config"]))
        return cls(kind="csv", path=d["path"])

    @classmethod
    def synthetic(cls, config: FeedConfig) -> "FeedSpec":
        return cls(kind="synthetic", config=config)

    @classmethod
    def csv(cls, path: str | Path) -> "FeedSpec":
        return cls(kind="csv", path=str(path))


@dataclass(frozen=True)
class RunConfig:
    feed: FeedSpec
    plan: SamplingPlan
    params: TreeParams = TreeParams()
    policy: PairPolicy = PairPolicy()
    same_sector_only: bool = False
    validate_on_changes: bool = False

    def to_dict(self) -> dict:
        return {
            "feed": self.feed.to_dict(),
            "plan": {
                "n_samples": self.plan.n_samples,
                "interval": list(self.plan.gaps()),
                "start": self.plan.start,
            },
            "params": self.params.to_dict(),
            "policy": self.policy.to_dict(),
            "same_sector_only": self.same_sector_only,
            "validate_on_changes": self.validate_on_changes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        plan_d = d["plan"]
        interval = plan_d["interval"]
        plan = SamplingPlan(
            n_samples=int(plan_d["n_samples"]),
            interval=tuple(float(g) for g in interval) if isinstance(interval, list) else float(interval),
            start=None if plan_d.get("start") is None else float(plan_d["start"]),
        )
        return cls(
            feed=FeedSpec.from_dict(d["feed"]),
            plan=plan,
            params=TreeParams.from_dict(d.get("params", {})),
            policy=PairPolicy.from_dict(d.get("policy", {})),
            same_sector_only=bool(d.get("same_sector_only", False)),
            validate_on_changes=bool(d.get("validate_on_changes", False)),
        )

    def run_id(self) -> str:
        ident = dict(self.to_dict())
        ident["feed"] = self.feed.identity()
        digest = hashlib.sha256(store_mod.canonical_json(ident).encode()).hexdigest()
        return digest[:12]

    def validate(self) -> None:
        self.plan.validate()
        self.params.validate()
        self.policy.validate()
        if self.feed.kind == "synthetic":
            self.feed.config.validate()


@dataclass
class RunRecord:
    run_id: str
    config: dict
    status: str = "sampling"
    reason: str | None = None
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "status": self.status,
            "reason": self.reason,
            "artifacts": self.artifacts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(run_id=d["run_id"], config=d["config"], status=d["status"],
                   reason=d.get("reason"), artifacts=d.get("artifacts", {}))


class TrackingSession:
    """Live per-symbol state for a run's tracked pairs.

    Percent change is measured from each symbol's first tick at or after
    tracking start. ``observe`` belongs to the single pipeline writer;
    ``snapshot`` may be called from any thread and returns a consistent
    point-in-time copy.
    """

    def __init__(self, run_id: str, start_timestamp: float, sectors: dict[str, str]):
        self.run_id = run_id
        self.start_timestamp = start_timestamp
        self._lock = threading.Lock()
        self._state: dict[str, dict] = {
            sym: {"price": None, "pct_since_start": 0.0, "sector": sector, "baseline": None}
            for sym, sector in sectors.items()
        }

    def tracks(self, symbol: str) -> bool:
        return symbol in self._state

    def observe(self, symbol: str, price: float) -> float:
        """Apply one tick; returns the new percent-since-start."""
        with self._lock:
            st = self._state[symbol]
            if st["baseline"] is None:
                st["baseline"] = price
            pct = (price / st["baseline"] - 1.0) * 100.0
            st["price"] = price
            st["pct_since_start"] = pct
            return pct

    def snapshot(self) -> dict:
        with self._lock:
            symbols = {
                sym: {"price": st["price"], "pct_since_start": st["pct_since_start"],
                      "sector": st["sector"]}
                for sym, st in self._state.items()
            }
        return {"run_id": self.run_id, "start_timestamp": self.start_timestamp,
                "symbols": symbols}


class _LiveRun:
    def __init__(self, session: TrackingSession | None = None):
        self.session = session


class Trackd:
    """The run service: start runs, snapshot tracking state, stream events.

    One pipeline thread writes per run; any number of readers may stream
    events or take snapshots concurrently. Readers only ever see the
    persisted event log plus point-in-time session copies, so they never
    block the writer.
    """

    def __init__(self, store_root: str | Path | None = None):
        root = store_root or os.environ.get(TRACKD_STORE_ENV)
        if not root:
            raise StateError(f"no store path given and {TRACKD_STORE_ENV} is not set")
        self.store = RunStore(root)
        self._live: dict[str, _LiveRun] = {}
        self._lock = threading.Lock()

    # ── lifecycle ─────────────────────────────────────────────────────

    def start_run(self, config: RunConfig, background: bool = False) -> str:
        """Execute the pipeline for ``config``; returns the run id.

        Foreground runs block until the feed is exhausted. Background runs
        return once the run directory exists; progress is observable via
        the event stream. A run that fails its classification stage is a
        completed, failed run, not an exception; programming errors still
        raise (after being recorded) in foreground mode.
        """
        config.validate()
        run_id = config.run_id()
        rundir = self.store.create(run_id)
        record = RunRecord(run_id=run_id, config=config.to_dict())
        rundir.write_json(store_mod.RUN_JSON, record.to_dict())
        with self._lock:
            self._live[run_id] = _LiveRun()
        if background:
            thread = threading.Thread(
                target=self._execute_guarded, args=(rundir, record, config), daemon=True)
            thread.start()
        else:
            self._execute_guarded(rundir, record, config, reraise=True)
        return run_id

    def _execute_guarded(self, rundir, record, config, reraise: bool = False) -> None:
        try:
            self._execute(rundir, record, config)
        except PairstreamError:
            if reraise:
                raise
        except Exception:
            if reraise:
                raise
        finally:
            with self._lock:
                self._live.pop(record.run_id, None)

    def _transition(self, rundir, record: RunRecord, status: str, reason: str | None = None) -> None:
        if status not in _ALLOWED_TRANSITIONS[record.status]:
            raise StateError(f"illegal status transition {record.status} -> {status}")
        record.status = status
        record.reason = reason
        rundir.write_json(store_mod.RUN_JSON, record.to_dict())

    def _execute(self, rundir, record: RunRecord, config: RunConfig) -> None:
        events = EventLog(rundir.events_path)
        try:
            events.emit("run_started", run_id=record.run_id,
                        n_samples=config.plan.n_samples,
                        intervals=list(config.plan.gaps()))
            try:
                feed = config.feed.make()
                _write_meta(rundir, feed)
                matrix, leftover, ticks = sample_stream(
                    feed.meta, iter(feed), config.plan,
                    on_sample=lambda index, ts: events.emit("sample_taken", index=index, timestamp=ts),
                )
                write_samples_csv(matrix, rundir.file(store_mod.SAMPLES_CSV))
                record.artifacts["samples"] = store_mod.SAMPLES_CSV
                self._transition(rundir, record, "classifying")

                filtered, dropped = filter_incomplete(matrix)
                rundir.write_json(store_mod.DROPPED_JSON,
                                  [{"symbol": d.symbol, "reason": d.reason} for d in dropped])
                record.artifacts["dropped"] = store_mod.DROPPED_JSON
                dataset = self_label(compute_changes(filtered))
                tree = train_tree(dataset, config.params)
                rundir.write_json(store_mod.TREE_JSON, tree.to_dict())
                record.artifacts["tree"] = store_mod.TREE_JSON

                pairs = discover_pairs(tree, filtered.sector_map(), config.policy,
                                       same_sector_only=config.same_sector_only)
                report = validate_pairs(pairs, filtered, use_changes=config.validate_on_changes)
                rundir.write_lines(store_mod.PAIRS_JSONL, report.to_jsonl_lines())
                record.artifacts["pairs"] = store_mod.PAIRS_JSONL

                events.emit("classification_done", n_series=filtered.m,
                            n_nodes=len(tree), n_pairs=len(pairs))
                for outcome in report.outcomes:
                    p = outcome.pair
                    events.emit("pair", pair_id=p.pair_id, a=p.a, b=p.b, counter=p.counter,
                                r=outcome.r, sector_a=p.sector_a, sector_b=p.sector_b)

                self._transition(rundir, record, "tracking")
                start_ts = leftover.timestamp if leftover is not None else matrix.timestamps[-1]
                tracked = {}
                sectors = filtered.sector_map()
                for p in pairs:
                    tracked[p.a] = sectors[p.a]
                    tracked[p.b] = sectors[p.b]
                session = TrackingSession(record.run_id, start_ts, tracked)
                with self._lock:
                    live = self._live.get(record.run_id)
                    if live is not None:
                        live.session = session

                def feed_rest() -> Iterator:
                    if leftover is not None:
                        yield leftover
                    yield from ticks

                for tick in feed_rest():
                    if session.tracks(tick.symbol):
                        pct = session.observe(tick.symbol, tick.price)
                        events.emit("price", symbol=tick.symbol, price=tick.price,
                                    pct_since_start=pct, timestamp=tick.timestamp)
                self._transition(rundir, record, "done")
            except PartialWindowError as exc:
                # expected failure mode: keep the partial samples around
                if exc.matrix is not None:
                    write_samples_csv(exc.matrix, rundir.file(store_mod.SAMPLES_CSV))
                    record.artifacts["samples"] = store_mod.SAMPLES_CSV
                self._fail(rundir, record, events, f"partial window: {exc}")
            except EmptyCohortError as exc:
                self._fail(rundir, record, events, f"empty cohort: {exc}")
            except PairstreamError as exc:
                self._fail(rundir, record, events, str(exc))
                raise
            except Exception as exc:  # record, then propagate
                self._fail(rundir, record, events, f"internal error: {exc}")
                raise
        finally:
            events.close()

    def _fail(self, rundir, record, events, reason: str) -> None:
        events.emit("run_failed", reason=reason)
        record.status = "failed"
        record.reason = reason
        rundir.write_json(store_mod.RUN_JSON, record.to_dict())

    # ── reads ─────────────────────────────────────────────────────────

    def record(self, run_id: str) -> RunRecord:
        rundir = self.store.open(run_id)
        return RunRecord.from_dict(rundir.read_json(store_mod.RUN_JSON))

    def list_runs(self) -> list[RunRecord]:
        return [self.record(rid) for rid in self.store.list_runs()]

    def report(self, run_id: str) -> dict:
        rundir = self.store.open(run_id)
        pair_rows, summary = parse_report_lines(rundir.read_lines(store_mod.PAIRS_JSONL))
        return {"run_id": run_id, "pairs": pair_rows, "summary": summary}

    def snapshot(self, run_id: str) -> dict:
        """Point-in-time tracking state: live session state for a running
        run, or the final state folded from the event log afterwards."""
        record = self.record(run_id)
        with self._lock:
            live = self._live.get(run_id)
            session = live.session if live is not None else None
        if session is not None:
            return session.snapshot()
        if record.status not in ("tracking", "done"):
            raise StateError(f"run {run_id} is {record.status}; no tracking state to snapshot")
        return _fold_snapshot(run_id, self.store)

    def replay_lines(self, run_id: str) -> Iterator[str]:
        """The persisted event log, byte for byte."""
        self.store.open(run_id)
        return self.store.iter_event_lines(run_id)

    def stream_events(self, run_id: str, same_sector_only: bool = False,
                      follow: bool = False, poll: float = 0.05) -> Iterator[dict]:
        """Ordered event records for a run.

        With ``same_sector_only`` on, pair events for cross-sector pairs
        and price events for symbols appearing only in cross-sector pairs
        are suppressed. With ``follow`` on, the stream tails a live run
        until it reaches a terminal state. An unknown run yields a single
        ``error`` event and closes.
        """
        try:
            rundir = self.store.open(run_id)
        except NotFoundError as exc:
            yield {"event": "error", "reason": str(exc)}
            return
        allowed: set[str] = set()

        def filtered(record: dict) -> dict | None:
            if not same_sector_only:
                return record
            kind = record.get("event")
            if kind == "pair":
                if record["sector_a"] != record["sector_b"]:
                    return None
                allowed.add(record["a"])
                allowed.add(record["b"])
                return record
            if kind == "price":
                return record if record["symbol"] in allowed else None
            return record

        path = rundir.events_path
        offset = 0
        while True:
            if path.exists():
                with open(path) as fh:
                    fh.seek(offset)
                    chunk = fh.read()
                # consume whole lines only; a partially flushed tail is
                # picked up on the next pass
                complete = chunk.rfind("\n") + 1
                offset += len(chunk[:complete].encode())
                for line in chunk[:complete].splitlines():
                    if not line:
                        continue
                    rec = filtered(json.loads(line))
                    if rec is not None:
                        yield rec
            if not follow:
                break
            if self.record(run_id).status in ("done", "failed"):
                # drain anything written between the read and this check
                follow = False
                continue
            time.sleep(poll)


def _write_meta(rundir, feed: Feed) -> None:
    with open(rundir.file(store_mod.META_CSV), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["symbol", "sector"])
        for m in feed.meta:
            writer.writerow([m.symbol, m.sector])
    groups = {m.symbol: m.group_id for m in feed.meta if m.group_id is not None}
    if groups:
        # planted ground truth, for verification only
        rundir.write_json(store_mod.GROUPS_JSON, groups)


def _fold_snapshot(run_id: str, store: RunStore) -> dict:
    symbols: dict[str, dict] = {}
    sectors: dict[str, str] = {}
    start_ts = None
    for line in store.iter_event_lines(run_id):
        rec = json.loads(line)
        kind = rec.get("event")
        if kind == "pair":
            sectors[rec["a"]] = rec["sector_a"]
            sectors[rec["b"]] = rec["sector_b"]
            for sym in (rec["a"], rec["b"]):
                symbols.setdefault(sym, {"price": None, "pct_since_start": 0.0,
                                         "sector": sectors[sym]})
        elif kind == "price":
            if start_ts is None:
                start_ts = rec["timestamp"]
            st = symbols.setdefault(rec["symbol"],
                                    {"price": None, "pct_since_start": 0.0,
                                     "sector": sectors.get(rec["symbol"], "")})
            st["price"] = rec["price"]
            st["pct_since_start"] = rec["pct_since_start"]
    return {"run_id": run_id, "start_timestamp": start_ts, "symbols": symbols}
