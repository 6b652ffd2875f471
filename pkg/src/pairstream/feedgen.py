"""Deterministic tick feeds.

Two sources produce the same ``Feed`` interface so downstream stages cannot
tell them apart: a synthetic generator that plants correlated groups inside
a universe of independent geometric random walks, and a CSV replay source
for recorded data.

The synthetic generator is the verification scaffold for the whole
pipeline: every member of a planted group shares one latent relative step
per tick period, so the group's ground truth correlation is controlled by
the ratio of its private noise to the shared step size.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, FeedDataError, FeedFormatError

SECTORS: tuple[str, ...] = (
    "Services",
    "Healthcare",
    "Utilities",
    "Financial",
    "Consumer Goods",
    "Basic Materials",
    "Conglomerates",
    "Industrial Goods",
    "Technology",
)

FEED_CSV_HEADER = ("timestamp", "symbol", "sector", "price")

# Floor on a single relative step; keeps prices positive no matter how hot
# the volatility settings are.
_STEP_FLOOR = -0.95

_PRICE_LOW, _PRICE_HIGH = 10.0, 400.0


@dataclass(frozen=True)
class SeriesMeta:
    """Identity of one series.

    ``group_id`` is the planted ground truth and exists only on synthetic
    feeds. It is for acceptance checks and debugging; classification stages
    must never read it.
    """

    symbol: str
    sector: str
    group_id: int | None = None


@dataclass(frozen=True)
class Tick:
    symbol: str
    timestamp: float
    price: float


@dataclass(frozen=True)
class GroupSpec:
    """A planted group: ``size`` members riding one latent walk, each adding
    private per-step noise with std dev ``coupling_sigma``."""

    size: int
    coupling_sigma: float


@dataclass(frozen=True)
class FeedConfig:
    """Parameters of the synthetic feed.

    ``base_volatility`` is the relative per-step std dev of both the shared
    group steps and the independent series' own steps. ``n_steps=None``
    yields an unbounded stream.
    """

    seed: int
    n_series: int
    groups: tuple[GroupSpec, ...] = ()
    tick_period: float = 1.0
    base_volatility: float = 0.002
    dropout_rate: float = 0.0
    n_steps: int | None = None

    def validate(self) -> None:
        if self.n_series < 1:
            raise ConfigError("n_series", "must be a positive integer")
        total = 0
        for g in self.groups:
            if g.size < 1:
                raise ConfigError("groups", "group sizes must be >= 1")
            if not g.coupling_sigma >= 0:
                raise ConfigError("groups", "coupling sigma must be >= 0")
            total += g.size
        if total > self.n_series:
            raise ConfigError("groups", f"group sizes sum to {total} > n_series={self.n_series}")
        if not self.tick_period > 0:
            raise ConfigError("tick_period", "must be > 0")
        if not self.base_volatility >= 0:
            raise ConfigError("base_volatility", "must be >= 0")
        if not (0 <= self.dropout_rate < 1):
            raise ConfigError("dropout_rate", "must be in [0, 1)")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigError("n_steps", "must be >= 1 (or None for unbounded)")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_series": self.n_series,
            "groups": [[g.size, g.coupling_sigma] for g in self.groups],
            "tick_period": self.tick_period,
            "base_volatility": self.base_volatility,
            "dropout_rate": self.dropout_rate,
            "n_steps": self.n_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedConfig":
        groups = tuple(GroupSpec(int(size), float(sig)) for size, sig in d.get("groups", []))
        return cls(
            seed=int(d["seed"]),
            n_series=int(d["n_series"]),
            groups=groups,
            tick_period=float(d.get("tick_period", 1.0)),
            base_volatility=float(d.get("base_volatility", 0.002)),
            dropout_rate=float(d.get("dropout_rate", 0.0)),
            n_steps=None if d.get("n_steps") is None else int(d["n_steps"]),
        )


class Feed:
    """A tick stream plus its series metadata table.

    ``meta`` is fixed up front. Each call to ``iter()`` starts an
    independent, identical pass over the stream; a single iterator must
    stay with one consumer.
    """

    def __init__(self, meta: Sequence[SeriesMeta], ticks: Callable[[], Iterator[Tick]]):
        self.meta = list(meta)
        seen = set()
        for m in self.meta:
            if not m.symbol:
                raise FeedDataError("empty symbol in feed metadata")
            if m.symbol in seen:
                raise FeedDataError(f"duplicate symbol {m.symbol!r} in feed metadata")
            seen.add(m.symbol)
        self._ticks = ticks

    def __iter__(self) -> Iterator[Tick]:
        return self._ticks()

    @property
    def symbols(self) -> list[str]:
        return [m.symbol for m in self.meta]

    def sector_map(self) -> dict[str, str]:
        return {m.symbol: m.sector for m in self.meta}

    def group_map(self) -> dict[str, int | None]:
        return {m.symbol: m.group_id for m in self.meta}


def _build_meta(config: FeedConfig) -> list[SeriesMeta]:
    # Grouped series come first, with consecutive symbols; sectors rotate
    # one sector per group so every planted pair shares its sector, then
    # keep rotating through the independents.
    width = max(4, len(str(config.n_series)))
    meta: list[SeriesMeta] = []
    idx = 0
    for gid, g in enumerate(config.groups):
        sector = SECTORS[gid % len(SECTORS)]
        for _ in range(g.size):
            meta.append(SeriesMeta(f"S{idx + 1:0{width}d}", sector, gid))
            idx += 1
    for j in range(config.n_series - idx):
        sector = SECTORS[(len(config.groups) + j) % len(SECTORS)]
        meta.append(SeriesMeta(f"S{idx + 1:0{width}d}", sector, None))
        idx += 1
    return meta


def generate_feed(config: FeedConfig) -> Feed:
    """Build the synthetic feed described by ``config``.

    Prices follow a multiplicative random walk so relative tick-to-tick
    changes are stationary. Per step, a grouped series applies its group's
    shared N(0, base_volatility) step plus its own N(0, coupling_sigma)
    noise; an independent series applies a private N(0, base_volatility)
    step. All randomness comes from one seeded generator, so identical
    configs yield bit-identical streams.

    Members of a group share the group's initial price. With zero coupling
    noise their price paths are therefore exactly identical, not merely
    correlated, which gives tests a sharp invariant to hold on to.
    """
    config.validate()
    meta = _build_meta(config)
    symbols = [m.symbol for m in meta]
    n = config.n_series
    n_groups = len(config.groups)

    group_of = np.full(n, -1, dtype=np.int64)
    own_sigma = np.full(n, config.base_volatility, dtype=np.float64)
    idx = 0
    for gid, g in enumerate(config.groups):
        group_of[idx:idx + g.size] = gid
        own_sigma[idx:idx + g.size] = g.coupling_sigma
        idx += g.size
    grouped = group_of >= 0

    def ticks() -> Iterator[Tick]:
        rng = np.random.default_rng(config.seed)
        group_init = rng.uniform(_PRICE_LOW, _PRICE_HIGH, n_groups)
        indep_init = rng.uniform(_PRICE_LOW, _PRICE_HIGH, n - int(grouped.sum()))
        prices = np.empty(n, dtype=np.float64)
        prices[grouped] = group_init[group_of[grouped]]
        prices[~grouped] = indep_init

        step = 0
        while config.n_steps is None or step < config.n_steps:
            t = step * config.tick_period
            if step > 0:
                rel = own_sigma * rng.standard_normal(n)
                if n_groups:
                    shared = rng.normal(0.0, config.base_volatility, n_groups)
                    rel[grouped] += shared[group_of[grouped]]
                np.maximum(rel, _STEP_FLOOR, out=rel)
                prices = prices * (1.0 + rel)
            if config.dropout_rate > 0:
                dropped = rng.random(n) < config.dropout_rate
                for i in range(n):
                    if not dropped[i]:
                        yield Tick(symbols[i], t, float(prices[i]))
            else:
                for i in range(n):
                    yield Tick(symbols[i], t, float(prices[i]))
            step += 1

    return Feed(meta, ticks)


def write_feed_csv(feed: Feed, path: str | Path) -> int:
    """Export a feed to CSV (`timestamp,symbol,sector,price`).

    Floats are written with ``repr`` so a replay of the file reproduces the
    original tick stream bit for bit. Returns the number of rows written.
    """
    sectors = feed.sector_map()
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEED_CSV_HEADER)
        for tick in feed:
            writer.writerow([repr(tick.timestamp), tick.symbol, sectors[tick.symbol], repr(tick.price)])
            count += 1
    return count


def _parse_rows(path: Path) -> Iterator[tuple[int, float, str, str, float]]:
    """Yield (lineno, timestamp, symbol, sector, price) for each data row,
    raising FeedFormatError for anything malformed."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeedFormatError(1, "empty file, expected header "
                                     f"{','.join(FEED_CSV_HEADER)}") from None
        if tuple(header) != FEED_CSV_HEADER:
            raise FeedFormatError(1, f"bad header {header!r}, expected {','.join(FEED_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FeedFormatError(lineno, f"expected 4 fields, got {len(row)}")
            ts_raw, symbol, sector, price_raw = row
            try:
                ts = float(ts_raw)
            except ValueError:
                raise FeedFormatError(lineno, f"bad timestamp {ts_raw!r}") from None
            try:
                price = float(price_raw)
            except ValueError:
                raise FeedFormatError(lineno, f"bad price {price_raw!r}") from None
            if not np.isfinite(ts):
                raise FeedFormatError(lineno, f"non-finite timestamp {ts_raw!r}")
            if not np.isfinite(price) or price <= 0:
                raise FeedFormatError(lineno, f"price must be > 0, got {price_raw!r}")
            if not symbol:
                raise FeedFormatError(lineno, "empty symbol")
            if sector not in SECTORS:
                raise FeedFormatError(lineno, f"unknown sector {sector!r}")
            yield lineno, ts, symbol, sector, price


def replay_csv(path: str | Path, speed: float = 0.0) -> Feed:
    """Replay a feed CSV in file order.

    ``speed=0`` replays as fast as possible; ``speed=k`` paces emission at
    k times recorded time. The file is validated in full before the first
    tick is emitted, so malformed rows fail fast with their line number.
    The metadata table is built from the distinct (symbol, sector) rows.

    Timestamps must be strictly increasing per symbol and non-decreasing
    across the file: downstream sampling relies on time order.
    """
    path = Path(path)
    if speed < 0:
        raise ConfigError("speed", "must be >= 0")

    meta: list[SeriesMeta] = []
    sector_of: dict[str, str] = {}
    last_ts: dict[str, float] = {}
    prev_ts: float | None = None
    for lineno, ts, symbol, sector, _price in _parse_rows(path):
        known = sector_of.get(symbol)
        if known is None:
            sector_of[symbol] = sector
            meta.append(SeriesMeta(symbol, sector))
        elif known != sector:
            raise FeedDataError(f"symbol {symbol!r} changes sector {known!r} -> {sector!r}",
                                line=lineno)
        prev = last_ts.get(symbol)
        if prev is not None and ts <= prev:
            raise FeedDataError(f"timestamps for {symbol!r} must strictly increase "
                                f"({prev!r} then {ts!r})", line=lineno)
        last_ts[symbol] = ts
        if prev_ts is not None and ts < prev_ts:
            raise FeedDataError(f"file is not in time order ({prev_ts!r} then {ts!r})",
                                line=lineno)
        prev_ts = ts

    def ticks() -> Iterator[Tick]:
        emitted_ts: float | None = None
        for _lineno, ts, symbol, _sector, price in _parse_rows(path):
            if speed > 0 and emitted_ts is not None and ts > emitted_ts:
                time.sleep((ts - emitted_ts) / speed)
            emitted_ts = ts
            yield Tick(symbol, ts, price)

    return Feed(meta, ticks)
