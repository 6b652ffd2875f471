"""Command line entry points: feed, sample, classify, trackd."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .dtree import TreeParams, train_tree
from .errors import PairstreamError, PartialWindowError
from .feedgen import FeedConfig, GroupSpec, generate_feed, replay_csv, write_feed_csv
from .labeling import compute_changes, self_label
from .ranking import PairPolicy, discover_pairs
from .reporting import render_run_report
from .sampler import (
    SamplingPlan,
    filter_incomplete,
    read_samples_csv,
    run_sampling,
    write_samples_csv,
)
from .server import TrackdServer
from .trackd import TRACKD_STORE_ENV, FeedSpec, RunConfig, Trackd
from .validation import validate_pairs


def _fail(message: str) -> "NoReturn":  # noqa: F821
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _parse_groups(spec: str, group_sigma: float) -> tuple[GroupSpec, ...]:
    """Accept '20x2' (20 groups of 2) or a comma list of sizes ('2,2,3')."""
    spec = spec.strip()
    if not spec:
        return ()
    if "x" in spec:
        count_s, size_s = spec.split("x", 1)
        return tuple(GroupSpec(int(size_s), group_sigma) for _ in range(int(count_s)))
    return tuple(GroupSpec(int(s), group_sigma) for s in spec.split(","))


def _parse_interval(text: str) -> float | tuple[float, ...]:
    if "," in text:
        return tuple(float(g) for g in text.split(","))
    return float(text)


# ── feed ──────────────────────────────────────────────────────────────

@click.group(name="feed")
def feed_cli() -> None:
    """Synthetic tick feeds."""


@feed_cli.command("gen")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--series", "n_series", type=int, required=True, help="Total number of series.")
@click.option("--groups", default="", help="Planted groups: '20x2' or sizes '2,2,3'.")
@click.option("--sigma", type=float, default=0.002, show_default=True,
              help="Base per-step relative volatility.")
@click.option("--group-sigma", type=float, default=0.0002, show_default=True,
              help="Intra-group per-step noise.")
@click.option("--ticks", "n_steps", type=int, required=True, help="Number of tick periods.")
@click.option("--period", type=float, default=1.0, show_default=True, help="Seconds per tick.")
@click.option("--dropout", type=float, default=0.0, show_default=True,
              help="Probability a series misses a tick.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def feed_gen(seed, n_series, groups, sigma, group_sigma, n_steps, period, dropout, out_path):
    """Generate a deterministic synthetic feed and write it as CSV."""
    try:
        config = FeedConfig(
            seed=seed, n_series=n_series, groups=_parse_groups(groups, group_sigma),
            tick_period=period, base_volatility=sigma, dropout_rate=dropout, n_steps=n_steps,
        )
        rows = write_feed_csv(generate_feed(config), out_path)
    except (PairstreamError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {rows} ticks for {n_series} series to {out_path}")


# ── sample ────────────────────────────────────────────────────────────

@click.command(name="sample")
@click.option("--interval", default="10", show_default=True,
              help="Seconds between samples; a comma list gives non-uniform gaps.")
@click.option("--samples", "n_samples", type=int, default=6, show_default=True)
@click.option("--start", type=float, default=None, help="First sample time (default: first tick).")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def sample_cli(interval, n_samples, start, in_path, out_path):
    """Sample a feed CSV into a symbol-by-time matrix."""
    plan = SamplingPlan(n_samples=n_samples, interval=_parse_interval(interval), start=start)
    try:
        matrix = run_sampling(replay_csv(in_path), plan)
    except PartialWindowError as exc:
        _fail(str(exc))
    except PairstreamError as exc:
        _fail(str(exc))
    write_samples_csv(matrix, out_path)
    missing = int((~matrix.present).sum())
    click.echo(f"wrote {matrix.m}x{matrix.n_samples} matrix to {out_path} ({missing} missing cells)")


# ── classify ──────────────────────────────────────────────────────────

@click.command(name="classify")
@click.option("--min-support", type=int, default=2, show_default=True)
@click.option("--complexity-penalty", type=float, default=0.0, show_default=True)
@click.option("--split-kind", type=click.Choice(["threshold", "interval"]),
              default="threshold", show_default=True)
@click.option("--pair-mode", type=click.Choice(["best", "mutual"]), default="best", show_default=True)
@click.option("--min-counter", type=int, default=2, show_default=True)
@click.option("--same-sector-only", is_flag=True)
@click.option("--use-changes", is_flag=True, help="Correlate change vectors instead of prices.")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "tree_path", type=click.Path(dir_okay=False), required=True)
@click.option("--pairs", "pairs_path", type=click.Path(dir_okay=False), required=True)
def classify_cli(min_support, complexity_penalty, split_kind, pair_mode, min_counter,
                 same_sector_only, use_changes, in_path, tree_path, pairs_path):
    """Classify a sample matrix: train the tree, rank, pair, validate."""
    try:
        matrix = read_samples_csv(in_path)
        filtered, dropped = filter_incomplete(matrix)
        dataset = self_label(compute_changes(filtered))
        params = TreeParams(complexity_penalty=complexity_penalty, min_support=min_support,
                            split_kind=split_kind)
        tree = train_tree(dataset, params)
        policy = PairPolicy(mode=pair_mode, min_counter=min_counter)
        pairs = discover_pairs(tree, filtered.sector_map(), policy,
                               same_sector_only=same_sector_only)
        report = validate_pairs(pairs, filtered, use_changes=use_changes)
    except PairstreamError as exc:
        _fail(str(exc))
    Path(tree_path).write_text(json.dumps(tree.to_dict(), indent=2) + "\n")
    Path(pairs_path).write_text("".join(line + "\n" for line in report.to_jsonl_lines()))
    stats = tree.stats()
    avg = "n/a" if report.avg_r is None else f"{report.avg_r:.3f}"
    click.echo(
        f"classified {filtered.m} series ({len(dropped)} dropped): "
        f"{stats.node_count} nodes, depth {stats.depth}, {len(pairs)} pairs, avg r {avg}"
    )


# ── trackd ────────────────────────────────────────────────────────────

@click.group(name="trackd")
def trackd_cli() -> None:
    """Run service: execute, replay, serve, and report runs."""


def _store_option(func):
    return click.option(
        "--store", "store_root", envvar=TRACKD_STORE_ENV, required=True,
        type=click.Path(file_okay=False),
        help=f"Run store directory (or ${TRACKD_STORE_ENV}).",
    )(func)


@trackd_cli.command("run")
@click.option("--feed", "feed_path", type=click.Path(exists=True, dir_okay=False),
              help="Replay this feed CSV.")
@click.option("--synthetic", "synthetic_cfg",
              help="Synthetic feed config: inline JSON or a path to a JSON file.")
@click.option("--seed", type=int, default=None, help="Override the synthetic seed.")
@click.option("--interval", default="10", show_default=True)
@click.option("--samples", "n_samples", type=int, default=6, show_default=True)
@click.option("--start", type=float, default=None)
@click.option("--min-support", type=int, default=2, show_default=True)
@click.option("--complexity-penalty", type=float, default=0.0, show_default=True)
@click.option("--split-kind", type=click.Choice(["threshold", "interval"]),
              default="threshold", show_default=True)
@click.option("--pair-mode", type=click.Choice(["best", "mutual"]), default="best", show_default=True)
@click.option("--min-counter", type=int, default=2, show_default=True)
@click.option("--same-sector-only", is_flag=True)
@click.option("--use-changes", is_flag=True)
@_store_option
def trackd_run(feed_path, synthetic_cfg, seed, interval, n_samples, start, min_support,
               complexity_penalty, split_kind, pair_mode, min_counter, same_sector_only,
               use_changes, store_root):
    """Execute the full pipeline for one run and track until feed end."""
    if bool(feed_path) == bool(synthetic_cfg):
        _fail("exactly one of --feed or --synthetic is required")
    try:
        if feed_path:
            feed = FeedSpec.csv(feed_path)
        else:
            text = synthetic_cfg.strip()
            cfg_d = json.loads(text) if text.startswith("{") else json.loads(Path(text).read_text())
            if seed is not None:
                cfg_d["seed"] = seed
            feed = FeedSpec.synthetic(FeedConfig.from_dict(cfg_d))
        config = RunConfig(
            feed=feed,
            plan=SamplingPlan(n_samples=n_samples, interval=_parse_interval(interval), start=start),
            params=TreeParams(complexity_penalty=complexity_penalty, min_support=min_support,
                              split_kind=split_kind),
            policy=PairPolicy(mode=pair_mode, min_counter=min_counter),
            same_sector_only=same_sector_only,
            validate_on_changes=use_changes,
        )
        trackd = Trackd(store_root)
        run_id = trackd.start_run(config)
    except (PairstreamError, ValueError) as exc:
        _fail(str(exc))
    record = trackd.record(run_id)
    click.echo(f"run {run_id}: {record.status}" + (f" ({record.reason})" if record.reason else ""))
    if record.status == "failed":
        sys.exit(1)
    report = trackd.report(run_id)
    summary = report["summary"] or {}
    click.echo(f"pairs: {summary.get('n_pairs', 0)}, avg r: {summary.get('avg_r')}")


@trackd_cli.command("replay")
@click.option("--run", "run_id", required=True)
@_store_option
def trackd_replay(run_id, store_root):
    """Print a run's persisted event log, byte for byte."""
    try:
        for line in Trackd(store_root).replay_lines(run_id):
            click.echo(line)
    except PairstreamError as exc:
        _fail(str(exc))


@trackd_cli.command("serve")
@click.option("--listen", default="127.0.0.1:8787", show_default=True, help="host:port")
@_store_option
def trackd_serve(listen, store_root):
    """Serve run submission and event streams over HTTP."""
    host, _, port_s = listen.rpartition(":")
    try:
        server = TrackdServer(store_root, host=host or "127.0.0.1", port=int(port_s))
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"trackd serving {store_root} on http://{server.address[0]}:{server.address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


@trackd_cli.command("report")
@click.option("--run", "run_id", required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--max-figures", type=int, default=None, help="Cap the number of pair charts.")
@_store_option
def trackd_report(run_id, out_dir, max_figures, store_root):
    """Render pair charts and the correlation histogram for a run."""
    try:
        written = render_run_report(store_root, run_id, out_dir, max_figures=max_figures)
    except PairstreamError as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(written)} files under {out_dir}")
