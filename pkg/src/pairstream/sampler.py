"""Timed snapshot sampling of tick feeds, and cohort filtering.

Sampling collects ``n_samples`` snapshots of every series between the first
and last sample time. A snapshot records, per series, the most recent tick
price at or before the snapshot time; no interpolation is ever performed,
so every recorded value is a price that actually ticked. A series with no
tick yet is flagged missing for that column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, ContractError, EmptyCohortError, PartialWindowError
from .feedgen import Feed, SeriesMeta, Tick


@dataclass(frozen=True)
class SamplingPlan:
    """``n_samples`` timed snapshots.

    ``interval`` is either a single uniform gap in seconds or an explicit
    sequence of ``n_samples - 1`` gaps (the gaps need not be equal).
    ``start`` anchors the first snapshot; ``None`` means "at the first tick
    seen", which is the practical choice when replaying files whose clock
    origin is unknown.
    """

    n_samples: int
    interval: float | tuple[float, ...] = 10.0
    start: float | None = None

    def gaps(self) -> tuple[float, ...]:
        if isinstance(self.interval, (int, float)):
            return (float(self.interval),) * (self.n_samples - 1)
        return tuple(float(g) for g in self.interval)

    def validate(self) -> None:
        if self.n_samples < 2:
            raise ConfigError("n_samples", "must be >= 2")
        gaps = self.gaps()
        if len(gaps) != self.n_samples - 1:
            raise ConfigError("interval", f"need {self.n_samples - 1} gaps, got {len(gaps)}")
        if any(not g > 0 for g in gaps):
            raise ConfigError("interval", "all intervals must be > 0")

    def sample_times(self, start: float) -> list[float]:
        times = [float(start)]
        for g in self.gaps():
            times.append(times[-1] + g)
        return times


@dataclass
class SampleMatrix:
    """m series by n snapshots, with a per-cell presence flag.

    ``values`` holds prices where ``present`` is True and is meaningless
    elsewhere. Instances are treated as immutable once returned.
    """

    symbols: list[str]
    sectors: list[str]
    timestamps: list[float]
    values: np.ndarray
    present: np.ndarray

    @property
    def m(self) -> int:
        return len(self.symbols)

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)

    def is_complete(self) -> bool:
        return bool(self.present.all())

    def index_of(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ContractError(f"symbol {symbol!r} not in matrix") from None

    def row(self, symbol: str) -> np.ndarray:
        return self.values[self.index_of(symbol)]

    def sector_map(self) -> dict[str, str]:
        return dict(zip(self.symbols, self.sectors))

    def window(self) -> tuple[float, float] | None:
        if not self.timestamps:
            return None
        return (self.timestamps[0], self.timestamps[-1])


@dataclass(frozen=True)
class DroppedSeries:
    symbol: str
    reason: str  # "incomplete" or "inactive"


def sample_stream(
    meta: Sequence[SeriesMeta],
    ticks: Iterable[Tick],
    plan: SamplingPlan,
    on_sample: Callable[[int, float], None] | None = None,
) -> tuple[SampleMatrix, Tick | None, Iterator[Tick]]:
    """Drive sampling over a live tick iterator.

    Returns the matrix, the first tick seen after the window closed (the
    tick that triggered the final snapshot, if any), and the iterator
    positioned right after it; callers that keep consuming the feed (for
    live tracking) therefore lose no ticks. ``on_sample`` is invoked with
    (1-based column index, sample time) as each snapshot is taken.
    """
    plan.validate()
    it = iter(ticks)
    symbols = [s.symbol for s in meta]
    sectors = [s.sector for s in meta]
    index = {s: i for i, s in enumerate(symbols)}
    m = len(symbols)

    last = np.zeros(m, dtype=np.float64)
    seen = np.zeros(m, dtype=bool)

    def partial(columns_v: list[np.ndarray], columns_p: list[np.ndarray], times: list[float]) -> PartialWindowError:
        got = len(columns_v)
        matrix = _assemble(symbols, sectors, times[:got], columns_v, columns_p)
        return PartialWindowError(
            f"feed exhausted after {got} of {plan.n_samples} samples", matrix=matrix)

    first: Tick | None = None
    if plan.start is None:
        first = next(it, None)
        if first is None:
            raise partial([], [], [])
        start = first.timestamp
    else:
        start = plan.start
    times = plan.sample_times(start)

    cols_v: list[np.ndarray] = []
    cols_p: list[np.ndarray] = []
    j = 0
    last_ts: float | None = None
    leftover: Tick | None = None

    def take(t: float) -> None:
        cols_v.append(last.copy())
        cols_p.append(seen.copy())
        if on_sample is not None:
            on_sample(len(cols_v), t)

    stream: Iterator[Tick] = it
    if first is not None:
        def _chain(head: Tick, rest: Iterator[Tick]) -> Iterator[Tick]:
            yield head
            yield from rest
        stream = _chain(first, it)

    for tick in stream:
        while j < plan.n_samples and tick.timestamp > times[j]:
            take(times[j])
            j += 1
        if j == plan.n_samples:
            leftover = tick
            break
        i = index.get(tick.symbol)
        if i is not None:
            last[i] = tick.price
            seen[i] = True
        last_ts = tick.timestamp
    else:
        # Feed ended: columns whose time the feed did reach can still be
        # finalized by carry-forward; anything beyond is a partial window.
        while j < plan.n_samples and last_ts is not None and times[j] <= last_ts:
            take(times[j])
            j += 1

    if j < plan.n_samples:
        raise partial(cols_v, cols_p, times)

    matrix = _assemble(symbols, sectors, times, cols_v, cols_p)
    return matrix, leftover, it


def _assemble(symbols, sectors, times, cols_v, cols_p) -> SampleMatrix:
    m = len(symbols)
    if cols_v:
        values = np.column_stack(cols_v)
        present = np.column_stack(cols_p)
    else:
        values = np.zeros((m, 0), dtype=np.float64)
        present = np.zeros((m, 0), dtype=bool)
    return SampleMatrix(list(symbols), list(sectors), [float(t) for t in times], values, present)


def run_sampling(feed: Feed, plan: SamplingPlan) -> SampleMatrix:
    """Collect the plan's snapshots from a feed and return the matrix."""
    matrix, _, _ = sample_stream(feed.meta, iter(feed), plan)
    return matrix


def filter_incomplete(matrix: SampleMatrix) -> tuple[SampleMatrix, list[DroppedSeries]]:
    """Drop series that cannot be classified.

    A series is dropped as "incomplete" if any snapshot is missing, or as
    "inactive" if its row never changes value over the window (our reading
    of insignificant activity: zero price variance). Returns the surviving
    sub-matrix and the drop list; raises EmptyCohortError if nothing
    survives.
    """
    keep: list[int] = []
    dropped: list[DroppedSeries] = []
    for i, sym in enumerate(matrix.symbols):
        if not matrix.present[i].all():
            dropped.append(DroppedSeries(sym, "incomplete"))
        elif matrix.n_samples and bool((matrix.values[i] == matrix.values[i, 0]).all()):
            dropped.append(DroppedSeries(sym, "inactive"))
        else:
            keep.append(i)
    if not keep:
        raise EmptyCohortError(
            f"all {matrix.m} series dropped ({len(dropped)} incomplete or inactive)")
    sub = SampleMatrix(
        symbols=[matrix.symbols[i] for i in keep],
        sectors=[matrix.sectors[i] for i in keep],
        timestamps=list(matrix.timestamps),
        values=matrix.values[keep].copy(),
        present=matrix.present[keep].copy(),
    )
    return sub, dropped


SAMPLES_FIXED_COLUMNS = ("symbol", "sector")


def write_samples_csv(matrix: SampleMatrix, path: str | Path) -> None:
    """Write `symbol,sector,t1..tn`; missing cells are left empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(SAMPLES_FIXED_COLUMNS) + [f"t{j + 1}" for j in range(matrix.n_samples)])
        for i, sym in enumerate(matrix.symbols):
            row: list[str] = [sym, matrix.sectors[i]]
            for j in range(matrix.n_samples):
                row.append(repr(float(matrix.values[i, j])) if matrix.present[i, j] else "")
            writer.writerow(row)


def read_samples_csv(path: str | Path) -> SampleMatrix:
    """Read a matrix written by :func:`write_samples_csv`.

    Sample times are not stored in this format, so columns get ordinal
    timestamps 1..n.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:2]) != SAMPLES_FIXED_COLUMNS:
            raise ContractError(f"bad samples header in {path}")
        n = len(header) - 2
        symbols: list[str] = []
        sectors: list[str] = []
        rows_v: list[list[float]] = []
        rows_p: list[list[bool]] = []
        for row in reader:
            if not row:
                continue
            if len(row) != n + 2:
                raise ContractError(f"row for {row[0]!r} has {len(row) - 2} cells, expected {n}")
            symbols.append(row[0])
            sectors.append(row[1])
            vals = []
            pres = []
            for cell in row[2:]:
                if cell == "":
                    vals.append(0.0)
                    pres.append(False)
                else:
                    vals.append(float(cell))
                    pres.append(True)
            rows_v.append(vals)
            rows_p.append(pres)
    values = np.array(rows_v, dtype=np.float64) if rows_v else np.zeros((0, n))
    present = np.array(rows_p, dtype=bool) if rows_p else np.zeros((0, n), dtype=bool)
    return SampleMatrix(symbols, sectors, [float(j + 1) for j in range(n)], values, present)
