"""Report rendering: pair charts and a correlation histogram.

Produces the human-readable side of a run next to its delimited records: a
per-pair figure of both price trajectories (sampling window plus any
tracked prices, normalized to percent change from the first sample) and a
histogram of the cohort's r values. Figures land in ``figures/`` inside
the output directory alongside copies of ``pairs.jsonl`` and a
``report.json`` summary.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from . import store as store_mod  # noqa: E402
from .sampler import read_samples_csv  # noqa: E402
from .store import RunStore  # noqa: E402
from .validation import parse_report_lines  # noqa: E402


def _series_trajectories(store: RunStore, run_id: str, symbols: set[str]):
    """(timestamps, prices) per requested symbol, stitched from the sample
    matrix and the tracking price events."""
    rundir = store.open(run_id)
    matrix = read_samples_csv(rundir.file(store_mod.SAMPLES_CSV))
    sample_times: list[float] = []
    tracks: dict[str, tuple[list[float], list[float]]] = {s: ([], []) for s in symbols}
    for line in store.iter_event_lines(run_id):
        rec = json.loads(line)
        if rec.get("event") == "sample_taken":
            sample_times.append(rec["timestamp"])
        elif rec.get("event") == "price" and rec["symbol"] in tracks:
            ts, px = tracks[rec["symbol"]]
            ts.append(rec["timestamp"])
            px.append(rec["price"])
    out: dict[str, tuple[list[float], list[float]]] = {}
    for sym in symbols:
        times: list[float] = []
        prices: list[float] = []
        if sym in matrix.symbols:
            i = matrix.index_of(sym)
            for j in range(matrix.n_samples):
                if matrix.present[i, j]:
                    times.append(sample_times[j] if j < len(sample_times) else float(j + 1))
                    prices.append(float(matrix.values[i, j]))
        t_extra, p_extra = tracks[sym]
        times.extend(t_extra)
        prices.extend(p_extra)
        out[sym] = (times, prices)
    return out


def _pct_from_first(prices: list[float]) -> list[float]:
    if not prices:
        return []
    base = prices[0]
    return [(p / base - 1.0) * 100.0 for p in prices]


def render_run_report(store_root, run_id: str, out_dir, max_figures: int | None = None,
                      dpi: int = 110) -> list[Path]:
    """Render the run's report bundle into ``out_dir``.

    Returns the list of files written. ``max_figures`` caps how many pair
    charts are drawn (highest-|r| pairs first); the delimited records are
    always complete.
    """
    store = RunStore(store_root)
    rundir = store.open(run_id)
    out = Path(out_dir)
    figures_dir = out / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    lines = rundir.read_lines(store_mod.PAIRS_JSONL)
    pairs, summary = parse_report_lines(lines)

    pairs_out = out / "pairs.jsonl"
    pairs_out.write_text("".join(line + "\n" for line in lines))
    written.append(pairs_out)
    report_out = out / "report.json"
    report_out.write_text(json.dumps({"run_id": run_id, "summary": summary}, indent=2) + "\n")
    written.append(report_out)

    ranked = sorted(pairs, key=lambda p: (-(abs(p["r"]) if p["r"] is not None else -1.0), p["pair_id"]))
    if max_figures is not None:
        ranked = ranked[:max_figures]

    symbols = {p["a"] for p in ranked} | {p["b"] for p in ranked}
    trajectories = _series_trajectories(store, run_id, symbols)

    for p in ranked:
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        for sym in (p["a"], p["b"]):
            times, prices = trajectories[sym]
            ax.plot(times, _pct_from_first(prices), marker="o", markersize=2.5,
                    linewidth=1.2, label=sym)
        r_txt = "n/a" if p["r"] is None else f"{p['r']:.2f}"
        sector = p["sector_a"] if p["same_sector"] else f"{p['sector_a']} / {p['sector_b']}"
        ax.set_title(f"{p['a']} and {p['b']}  (r = {r_txt}, {sector})")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("change since window start (%)")
        ax.axhline(0.0, color="grey", linewidth=0.6)
        ax.legend(loc="best", fontsize=9)
        fig.tight_layout()
        fig_path = figures_dir / f"pair_{p['pair_id']:04d}_{p['a']}_{p['b']}.png"
        fig.savefig(fig_path, dpi=dpi)
        plt.close(fig)
        written.append(fig_path)

    rs = [p["r"] for p in pairs if p["r"] is not None]
    if rs:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.hist(rs, bins=20, range=(-1.0, 1.0), color="#4878a8", edgecolor="white")
        if summary and summary.get("avg_r") is not None:
            ax.axvline(summary["avg_r"], color="firebrick", linewidth=1.2,
                       label=f"avg r = {summary['avg_r']:.2f}")
            ax.legend(fontsize=9)
        ax.set_xlabel("Pearson r")
        ax.set_ylabel("pairs")
        ax.set_title(f"Correlation across {len(rs)} pairs")
        fig.tight_layout()
        hist_path = figures_dir / "r_histogram.png"
        fig.savefig(hist_path, dpi=dpi)
        plt.close(fig)
        written.append(hist_path)

    return written
