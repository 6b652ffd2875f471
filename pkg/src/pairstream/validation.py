"""Pearson validation of discovered pairs and table-style reporting.

Each pair gets the Pearson product-moment correlation of its two price
rows over the sampling window. Correlating price levels (not change
vectors) is the default because that is what the live pair charts show; a
flag switches to change vectors for callers who want it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NotFoundError, UndefinedCorrelationError
from .labeling import compute_changes
from .ranking import Pair, PairSet
from .sampler import SampleMatrix


def pearson(x, y) -> float:
    """Standard Pearson r. Zero variance in either input is an error,
    never a silent 0."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ContractError(f"inputs must be equal-length vectors, got {xv.shape} and {yv.shape}")
    if len(xv) < 2:
        raise ContractError("need at least 2 observations")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("zero variance input, correlation undefined")
    r = float(xc @ yc) / math.sqrt(sx * sy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class PairOutcome:
    pair: Pair
    r: float | None
    excluded_reason: str | None = None

    def to_dict(self) -> dict:
        d = self.pair.to_dict()
        d["r"] = self.r
        if self.excluded_reason is not None:
            d["excluded_reason"] = self.excluded_reason
        return d


@dataclass
class PairReport:
    """Per-pair r values plus the cohort summary.

    ``avg_r``/``sd_r`` cover the included pairs only; SD is the sample
    standard deviation (n-1 denominator) and is None below two pairs.
    """

    outcomes: list[PairOutcome]
    avg_r: float | None
    sd_r: float | None
    window: tuple[float, float] | None

    @property
    def n_pairs(self) -> int:
        return sum(1 for o in self.outcomes if o.r is not None)

    def included(self) -> list[PairOutcome]:
        return [o for o in self.outcomes if o.r is not None]

    def summary(self) -> dict:
        return {"n_pairs": self.n_pairs, "avg_r": self.avg_r, "sd_r": self.sd_r}

    def to_jsonl_lines(self) -> list[str]:
        lines = [json.dumps(o.to_dict(), separators=(",", ":")) for o in self.outcomes]
        lines.append(json.dumps(self.summary(), separators=(",", ":")))
        return lines


def validate_pairs(pairs: PairSet, matrix: SampleMatrix, use_changes: bool = False,
                   same_sector_only: bool = False) -> PairReport:
    """Correlate every pair over the window and summarize.

    A zero-variance series makes its pair's r undefined; such pairs stay
    in the report with a reason but are excluded from the average and SD.
    ``same_sector_only`` restricts the report to same-sector pairs.
    """
    if use_changes:
        changes = compute_changes(matrix)
        rows = {s: changes.features[i] for i, s in enumerate(changes.symbols)}
    else:
        rows = {s: matrix.values[i] for i, s in enumerate(matrix.symbols)}

    outcomes: list[PairOutcome] = []
    for pair in pairs:
        if same_sector_only and not pair.same_sector:
            continue
        for sym in (pair.a, pair.b):
            if sym not in rows:
                raise NotFoundError(f"pair symbol {sym!r} missing from the sample matrix")
        try:
            r = pearson(rows[pair.a], rows[pair.b])
            outcomes.append(PairOutcome(pair, r))
        except UndefinedCorrelationError as exc:
            outcomes.append(PairOutcome(pair, None, excluded_reason=str(exc)))

    rs = [o.r for o in outcomes if o.r is not None]
    avg_r = float(np.mean(rs)) if rs else None
    sd_r = float(np.std(rs, ddof=1)) if len(rs) >= 2 else None
    return PairReport(outcomes, avg_r, sd_r, matrix.window())


def parse_report_lines(lines) -> tuple[list[dict], dict | None]:
    """Split persisted report lines back into (pair records, summary)."""
    pair_rows: list[dict] = []
    summary: dict | None = None
    for line in lines:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "pair_id" in rec:
            pair_rows.append(rec)
        else:
            summary = rec
    return pair_rows, summary
