"""pairstream: streaming pair discovery over concurrent numeric series.

Pipeline: sample a universe of live series into a price matrix, self-label
the change vectors, grow a variance-reduction decision tree, rank series
by node co-occurrence, pair them, validate with Pearson r, then track the
discovered pairs live.
"""

from .dtree import DecisionTree, SplitRule, TreeParams, train_tree, tree_stats
from .feedgen import (
    SECTORS,
    Feed,
    FeedConfig,
    GroupSpec,
    SeriesMeta,
    Tick,
    generate_feed,
    replay_csv,
    write_feed_csv,
)
from .labeling import ChangeMatrix, LabeledDataset, compute_changes, self_label
from .ranking import (
    Pair,
    PairPolicy,
    PairSet,
    RankedList,
    discover_pairs,
    form_pairs,
    rank_all,
    rank_similar,
)
from .sampler import (
    SampleMatrix,
    SamplingPlan,
    filter_incomplete,
    run_sampling,
)
from .trackd import FeedSpec, RunConfig, Trackd, TrackingSession
from .validation import PairReport, pearson, validate_pairs

__version__ = "0.1.0"

__all__ = [
    "SECTORS",
    "ChangeMatrix",
    "DecisionTree",
    "Feed",
    "FeedConfig",
    "FeedSpec",
    "GroupSpec",
    "LabeledDataset",
    "Pair",
    "PairPolicy",
    "PairReport",
    "PairSet",
    "RankedList",
    "RunConfig",
    "SampleMatrix",
    "SamplingPlan",
    "SeriesMeta",
    "Tick",
    "Trackd",
    "TrackingSession",
    "TreeParams",
    "SplitRule",
    "compute_changes",
    "discover_pairs",
    "filter_incomplete",
    "form_pairs",
    "generate_feed",
    "pearson",
    "rank_all",
    "rank_similar",
    "replay_csv",
    "run_sampling",
    "self_label",
    "train_tree",
    "tree_stats",
    "validate_pairs",
    "write_feed_csv",
]
