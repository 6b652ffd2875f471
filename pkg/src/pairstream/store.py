"""Append-only on-disk run store.

One directory per run, holding plain CSV/JSON artifacts and a
newline-delimited event log, so every run is greppable and diffable.
Artifacts are written once and never mutated; the run record is the one
file that is atomically replaced as the run moves through its states.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import IO, Iterator

from .errors import NotFoundError, StoreError

RUN_JSON = "run.json"
META_CSV = "meta.csv"
GROUPS_JSON = "groups.json"
SAMPLES_CSV = "samples.csv"
DROPPED_JSON = "dropped.json"
TREE_JSON = "tree.json"
PAIRS_JSONL = "pairs.jsonl"
EVENTS_NDJSON = "events.ndjson"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class RunDir:
    def __init__(self, run_id: str, path: Path):
        self.run_id = run_id
        self.path = path

    def file(self, name: str) -> Path:
        return self.path / name

    @property
    def events_path(self) -> Path:
        return self.path / EVENTS_NDJSON

    def write_json(self, name: str, payload) -> None:
        tmp = self.path / (name + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.path / name)

    def read_json(self, name: str):
        p = self.path / name
        if not p.exists():
            raise NotFoundError(f"run {self.run_id}: no artifact {name}")
        return json.loads(p.read_text())

    def write_lines(self, name: str, lines: list[str]) -> None:
        tmp = self.path / (name + ".tmp")
        tmp.write_text("".join(line + "\n" for line in lines))
        os.replace(tmp, self.path / name)

    def read_lines(self, name: str) -> list[str]:
        p = self.path / name
        if not p.exists():
            raise NotFoundError(f"run {self.run_id}: no artifact {name}")
        return p.read_text().splitlines()


class EventLog:
    """Append-only NDJSON writer with an optional per-line listener (the
    live event bus). Lines are flushed as they are written so concurrent
    readers tailing the file see every event promptly."""

    def __init__(self, path: Path, listener=None):
        self._fh: IO[str] = open(path, "a")
        self._listener = listener

    def emit(self, event: str, **fields) -> dict:
        record = {"event": event, **fields}
        line = json.dumps(record, separators=(",", ":"))
        self._fh.write(line + "\n")
        self._fh.flush()
        if self._listener is not None:
            self._listener(record)
        return record

    def close(self) -> None:
        self._fh.close()


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def create(self, run_id: str) -> RunDir:
        path = self.root / run_id
        if path.exists():
            raise StoreError(f"run {run_id} already exists in {self.root} (store is append-only)")
        path.mkdir(parents=True)
        return RunDir(run_id, path)

    def open(self, run_id: str) -> RunDir:
        path = self.root / run_id
        if not path.is_dir():
            raise NotFoundError(f"unknown run {run_id!r} in {self.root}")
        return RunDir(run_id, path)

    def has(self, run_id: str) -> bool:
        return (self.root / run_id).is_dir()

    def list_runs(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def iter_event_lines(self, run_id: str) -> Iterator[str]:
        path = self.open(run_id).events_path
        if not path.exists():
            return iter(())
        with open(path) as fh:
            lines = fh.read().splitlines()
        return iter(lines)
