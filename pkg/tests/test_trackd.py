"""Run orchestration: lifecycle, persistence, events, tracking."""

from __future__ import annotations

import json
import threading
import time

import pytest

from oracles import last_price_before
from pairstream.errors import NotFoundError, StateError, StoreError
from pairstream.feedgen import FeedConfig, GroupSpec, generate_feed, write_feed_csv
from pairstream.ranking import PairPolicy
from pairstream.sampler import SamplingPlan
from pairstream.dtree import TreeParams
from pairstream.trackd import FeedSpec, RunConfig, Trackd


def coupled_config(tmp_path=None, seed=3, n_series=6, n_steps=16) -> RunConfig:
    return RunConfig(
        feed=FeedSpec.synthetic(FeedConfig(
            seed=seed, n_series=n_series, groups=(GroupSpec(2, 0.0),), n_steps=n_steps)),
        plan=SamplingPlan(n_samples=6, interval=1.0, start=0.0),
        params=TreeParams(),
        policy=PairPolicy("mutual", 2),
    )


def events_of(trackd: Trackd, run_id: str) -> list[dict]:
    return [json.loads(line) for line in trackd.replay_lines(run_id)]


def test_coupled_pair_discovered_and_tracked(tmp_path):
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(coupled_config())
    record = trackd.record(run_id)
    assert record.status == "done"
    events = events_of(trackd, run_id)
    kinds = [e["event"] for e in events]
    assert kinds[0] == "run_started"
    assert kinds.count("sample_taken") == 6
    pair_events = [e for e in events if e["event"] == "pair"]
    planted = [e for e in pair_events if {e["a"], e["b"]} == {"S0001", "S0002"}]
    assert len(planted) == 1
    assert planted[0]["r"] == 1.0
    assert planted[0]["sector_a"] == planted[0]["sector_b"]
    price_events = [e for e in events if e["event"] == "price"]
    tracked = {e["symbol"] for e in price_events}
    assert {"S0001", "S0002"} <= tracked


def test_event_order_and_fields(tmp_path):
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(coupled_config())
    events = events_of(trackd, run_id)
    order = {"run_started": 0, "sample_taken": 1, "classification_done": 2,
             "pair": 3, "price": 4}
    ranks = [order[e["event"]] for e in events]
    assert ranks == sorted(ranks)
    assert set(events[0]) == {"event", "run_id", "n_samples", "intervals"}
    sample = next(e for e in events if e["event"] == "sample_taken")
    assert set(sample) == {"event", "index", "timestamp"}
    done = next(e for e in events if e["event"] == "classification_done")
    assert set(done) == {"event", "n_series", "n_nodes", "n_pairs"}
    pair = next(e for e in events if e["event"] == "pair")
    assert set(pair) == {"event", "pair_id", "a", "b", "counter", "r", "sector_a", "sector_b"}
    price = next(e for e in events if e["event"] == "price")
    assert set(price) == {"event", "symbol", "price", "pct_since_start", "timestamp"}


def test_two_series_only_feed_has_no_pairs(tmp_path):
    # two series make a single-node tree: every counter is 1, below any
    # valid min_counter, so the run completes with an empty pair set
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(coupled_config(n_series=2))
    assert trackd.record(run_id).status == "done"
    done = next(e for e in events_of(trackd, run_id) if e["event"] == "classification_done")
    assert done == {"event": "classification_done", "n_series": 2, "n_nodes": 1, "n_pairs": 0}


def test_constant_feed_fails_empty_cohort(tmp_path):
    config = RunConfig(
        feed=FeedSpec.synthetic(FeedConfig(seed=1, n_series=4, base_volatility=0.0, n_steps=10)),
        plan=SamplingPlan(n_samples=4, interval=1.0, start=0.0),
    )
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config)
    record = trackd.record(run_id)
    assert record.status == "failed"
    assert "empty cohort" in record.reason
    events = events_of(trackd, run_id)
    assert events[-1]["event"] == "run_failed"
    assert "empty cohort" in events[-1]["reason"]


def test_short_feed_fails_partial_window(tmp_path):
    config = RunConfig(
        feed=FeedSpec.synthetic(FeedConfig(seed=1, n_series=4, n_steps=3)),
        plan=SamplingPlan(n_samples=6, interval=1.0, start=0.0),
    )
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config)
    record = trackd.record(run_id)
    assert record.status == "failed"
    assert "partial window" in record.reason
    # partial samples retained
    samples = (trackd.store.root / run_id / "samples.csv").read_text().splitlines()
    assert samples[0] == "symbol,sector,t1,t2,t3"


def test_rerun_same_config_rejected_in_same_store(tmp_path):
    trackd = Trackd(tmp_path / "store")
    config = coupled_config()
    trackd.start_run(config)
    with pytest.raises(StoreError):
        trackd.start_run(config)


def test_determinism_across_stores(tmp_path):
    config = coupled_config()
    ta = Trackd(tmp_path / "a")
    tb = Trackd(tmp_path / "b")
    ra = ta.start_run(config)
    rb = tb.start_run(config)
    assert ra == rb
    assert list(ta.replay_lines(ra)) == list(tb.replay_lines(rb))
    assert (ta.store.root / ra / "pairs.jsonl").read_bytes() == \
           (tb.store.root / rb / "pairs.jsonl").read_bytes()


def test_csv_replay_reproduces_synthetic_run(tmp_path):
    fc = FeedConfig(seed=5, n_series=8, groups=(GroupSpec(2, 0.0),), n_steps=14)
    feed_path = tmp_path / "feed.csv"
    write_feed_csv(generate_feed(fc), feed_path)
    plan = SamplingPlan(n_samples=6, interval=1.0, start=0.0)
    syn = RunConfig(feed=FeedSpec.synthetic(fc), plan=plan, policy=PairPolicy("mutual", 2))
    csv_cfg = RunConfig(feed=FeedSpec.csv(feed_path), plan=plan, policy=PairPolicy("mutual", 2))
    ta, tb = Trackd(tmp_path / "a"), Trackd(tmp_path / "b")
    ra, rb = ta.start_run(syn), tb.start_run(csv_cfg)
    pairs_a = [e for e in events_of(ta, ra) if e["event"] == "pair"]
    pairs_b = [e for e in events_of(tb, rb) if e["event"] == "pair"]
    assert pairs_a == pairs_b


def test_snapshot_matches_tick_log(tmp_path):
    config = coupled_config(n_steps=24)
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config)
    snap = trackd.snapshot(run_id)
    ticks = list(generate_feed(config.feed.config))
    events = events_of(trackd, run_id)
    first_price = {}
    for e in events:
        if e["event"] == "price" and e["symbol"] not in first_price:
            first_price[e["symbol"]] = e
    assert snap["symbols"]
    for sym, st in snap["symbols"].items():
        last = last_price_before(ticks, sym, 1e18)
        assert st["price"] == last
        baseline = first_price[sym]["price"]
        assert st["pct_since_start"] == pytest.approx((last / baseline - 1.0) * 100.0)
        assert first_price[sym]["pct_since_start"] == 0.0


def test_snapshot_unknown_and_failed_runs(tmp_path):
    trackd = Trackd(tmp_path / "store")
    with pytest.raises(NotFoundError):
        trackd.snapshot("nope")
    config = RunConfig(
        feed=FeedSpec.synthetic(FeedConfig(seed=1, n_series=4, base_volatility=0.0, n_steps=8)),
        plan=SamplingPlan(n_samples=4, interval=1.0, start=0.0),
    )
    run_id = trackd.start_run(config)
    with pytest.raises(StateError):
        trackd.snapshot(run_id)


def test_stream_events_same_sector_filter(tmp_path):
    # mixed cohort: coupled pair shares a sector, independents mostly not
    config = RunConfig(
        feed=FeedSpec.synthetic(FeedConfig(
            seed=11, n_series=10, groups=(GroupSpec(2, 0.0),), n_steps=14)),
        plan=SamplingPlan(n_samples=6, interval=1.0, start=0.0),
        policy=PairPolicy("best", 2),
    )
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config)
    full = list(trackd.stream_events(run_id))
    filtered = list(trackd.stream_events(run_id, same_sector_only=True))
    full_pairs = [e for e in full if e["event"] == "pair"]
    kept_pairs = [e for e in filtered if e["event"] == "pair"]
    assert kept_pairs == [e for e in full_pairs if e["sector_a"] == e["sector_b"]]
    assert len(kept_pairs) < len(full_pairs)
    allowed = {s for e in kept_pairs for s in (e["a"], e["b"])}
    for e in filtered:
        if e["event"] == "price":
            assert e["symbol"] in allowed
    # non-pair, non-price events pass through untouched
    assert [e for e in filtered if e["event"] == "sample_taken"] == \
           [e for e in full if e["event"] == "sample_taken"]


def test_stream_events_unknown_run_emits_error_event(tmp_path):
    trackd = Trackd(tmp_path / "store")
    events = list(trackd.stream_events("missing"))
    assert len(events) == 1
    assert events[0]["event"] == "error"
    assert "missing" in events[0]["reason"]


def test_replay_is_byte_identical_to_log(tmp_path):
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(coupled_config())
    raw = (trackd.store.root / run_id / "events.ndjson").read_text().splitlines()
    assert list(trackd.replay_lines(run_id)) == raw


def test_background_run_and_live_follow(tmp_path):
    config = coupled_config(n_steps=40)
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config, background=True)
    streams: list[list[dict]] = [[], []]

    def consume(bucket: list[dict]):
        for e in trackd.stream_events(run_id, follow=True, poll=0.01):
            bucket.append(e)

    readers = [threading.Thread(target=consume, args=(b,)) for b in streams]
    for r in readers:
        r.start()
    for r in readers:
        r.join(timeout=30)
    assert not any(r.is_alive() for r in readers)
    deadline = time.time() + 10
    while trackd.record(run_id).status != "done" and time.time() < deadline:
        time.sleep(0.01)
    assert trackd.record(run_id).status == "done"
    # concurrent subscribers see the identical, complete sequence
    assert streams[0] == streams[1] == list(trackd.stream_events(run_id))


def test_run_config_round_trip():
    config = coupled_config()
    back = RunConfig.from_dict(config.to_dict())
    assert back.to_dict() == config.to_dict()
    assert back.run_id() == config.run_id()


def test_store_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("TRACKD_STORE", str(tmp_path / "env_store"))
    trackd = Trackd()
    assert trackd.store.root == tmp_path / "env_store"
    monkeypatch.delenv("TRACKD_STORE")
    with pytest.raises(StateError):
        Trackd()


def test_artifacts_recompute_report(tmp_path):
    """A run's persisted artifacts are enough to recompute its pair report."""
    from pairstream.dtree import DecisionTree, train_tree
    from pairstream.labeling import compute_changes, self_label
    from pairstream.ranking import discover_pairs
    from pairstream.sampler import filter_incomplete, read_samples_csv
    from pairstream.validation import parse_report_lines, validate_pairs

    config = coupled_config()
    trackd = Trackd(tmp_path / "store")
    run_id = trackd.start_run(config)
    rundir = trackd.store.open(run_id)

    matrix = read_samples_csv(rundir.file("samples.csv"))
    filtered, _ = filter_incomplete(matrix)
    tree = DecisionTree.from_dict(rundir.read_json("tree.json"))
    cfg = RunConfig.from_dict(trackd.record(run_id).config)
    pairs = discover_pairs(tree, filtered.sector_map(), cfg.policy,
                           same_sector_only=cfg.same_sector_only)
    report = validate_pairs(pairs, filtered, use_changes=cfg.validate_on_changes)
    assert parse_report_lines(report.to_jsonl_lines()) == \
           parse_report_lines(rundir.read_lines("pairs.jsonl"))
    # the trained tree is reproducible from the samples artifact too
    retrained = train_tree(self_label(compute_changes(filtered)), cfg.params)
    assert retrained.to_dict() == tree.to_dict()