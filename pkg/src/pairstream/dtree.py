"""Variance-reduction decision trees over change features.

Growth is controlled by two knobs: a complexity penalty (a split must gain
more than ``penalty * SSE(root)``) and minimum support (no child may hold
fewer members). Every node keeps its full member set because downstream
similarity ranking works on node co-membership, not on label prediction;
the tree is never used to predict anything.

Split search runs in two phases. Candidate gains are screened with fast
vectorized prefix sums in floating point, then every candidate within a
hair of the float maximum is re-scored in exact rational arithmetic and
the winner is picked by (gain, lowest feature index, lowest boundary).
The exact phase makes the chosen split independent of summation order, so
two candidates that induce the same partition can never disagree by a
rounding artifact and tie handling is fully reproducible.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, ContractError, NotFoundError
from .labeling import LabeledDataset

SPLIT_KINDS = ("threshold", "interval")

# Relative width of the float screening window. Anything whose float gain
# lands this close to the maximum goes to the exact phase; float error is
# orders of magnitude below it.
_SCREEN_RTOL = 1e-9


@dataclass(frozen=True)
class TreeParams:
    complexity_penalty: float = 0.0
    min_support: int = 2
    split_kind: str = "threshold"
    max_nodes: int | None = None

    def validate(self) -> None:
        if not (0 <= self.complexity_penalty < 1):
            raise ConfigError("complexity_penalty", "must be in [0, 1)")
        if self.min_support < 2:
            raise ConfigError("min_support", "must be >= 2")
        if self.split_kind not in SPLIT_KINDS:
            raise ConfigError("split_kind", f"must be one of {SPLIT_KINDS}")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ConfigError("max_nodes", "must be >= 1 (or None)")

    def to_dict(self) -> dict:
        return {
            "complexity_penalty": self.complexity_penalty,
            "min_support": self.min_support,
            "split_kind": self.split_kind,
            "max_nodes": self.max_nodes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(
            complexity_penalty=float(d.get("complexity_penalty", 0.0)),
            min_support=int(d.get("min_support", 2)),
            split_kind=str(d.get("split_kind", "threshold")),
            max_nodes=None if d.get("max_nodes") is None else int(d["max_nodes"]),
        )


@dataclass(frozen=True)
class SplitRule:
    """One node's routing rule.

    threshold: left child takes value < theta, right takes value >= theta.
    interval:  left child takes low <= value < high, right takes the rest.
    """

    feature: str
    feature_index: int
    kind: str
    theta: float | None = None
    low: float | None = None
    high: float | None = None

    def goes_left(self, row: Sequence[float]) -> bool:
        v = row[self.feature_index]
        if self.kind == "threshold":
            return bool(v < self.theta)
        return bool(self.low <= v < self.high)

    def describe(self) -> str:
        if self.kind == "threshold":
            return f"{self.feature} < {self.theta!r}"
        return f"{self.low!r} <= {self.feature} < {self.high!r}"

    def to_dict(self) -> dict:
        d: dict = {"feature": self.feature, "feature_index": self.feature_index, "kind": self.kind}
        if self.kind == "threshold":
            d["theta"] = self.theta
        else:
            d["low"] = self.low
            d["high"] = self.high
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SplitRule":
        return cls(
            feature=d["feature"],
            feature_index=int(d["feature_index"]),
            kind=d["kind"],
            theta=d.get("theta"),
            low=d.get("low"),
            high=d.get("high"),
        )


@dataclass
class Node:
    node_id: int
    depth: int
    members: tuple[str, ...]  # sorted lexicographically
    parent: int | None = None
    children: tuple[int, int] | None = None
    rule: SplitRule | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class TreeStats:
    node_count: int
    depth: int
    leaf_sizes: list[int]


class DecisionTree:
    """The trained node table. Node ids are assigned in breadth-first
    creation order, so id 0 is always the root. Immutable once built."""

    def __init__(self, nodes: list[Node], feature_names: list[str], params: TreeParams):
        self.nodes = nodes
        self.feature_names = list(feature_names)
        self.params = params
        self._leaf_of: dict[str, int] = {}
        for node in nodes:
            if node.is_leaf:
                for sym in node.members:
                    self._leaf_of[sym] = node.node_id

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> Iterator[Node]:
        return (n for n in self.nodes if n.is_leaf)

    def leaf_of(self, symbol: str) -> Node:
        try:
            return self.nodes[self._leaf_of[symbol]]
        except KeyError:
            raise NotFoundError(f"symbol {symbol!r} is not in this tree") from None

    def node_membership(self, symbol: str) -> list[int]:
        """Root-to-leaf node ids containing ``symbol``. Memberships are
        nested, so this path is exactly the set of nodes that contain it."""
        node = self.leaf_of(symbol)
        path = [node.node_id]
        while node.parent is not None:
            node = self.nodes[node.parent]
            path.append(node.node_id)
        path.reverse()
        return path

    def stats(self) -> TreeStats:
        leaf_sizes = [n.size for n in self.nodes if n.is_leaf]
        depth = max(n.depth for n in self.nodes)
        return TreeStats(node_count=len(self.nodes), depth=depth, leaf_sizes=leaf_sizes)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "feature_names": self.feature_names,
            "root": 0,
            "nodes": [
                {
                    "id": n.node_id,
                    "depth": n.depth,
                    "parent": n.parent,
                    "children": list(n.children) if n.children else None,
                    "rule": n.rule.to_dict() if n.rule else None,
                    "members": list(n.members),
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        nodes = [
            Node(
                node_id=int(nd["id"]),
                depth=int(nd["depth"]),
                members=tuple(nd["members"]),
                parent=None if nd["parent"] is None else int(nd["parent"]),
                children=None if nd["children"] is None else (int(nd["children"][0]), int(nd["children"][1])),
                rule=None if nd["rule"] is None else SplitRule.from_dict(nd["rule"]),
            )
            for nd in d["nodes"]
        ]
        return cls(nodes, list(d["feature_names"]), TreeParams.from_dict(d["params"]))


def node_membership(tree: DecisionTree, symbol: str) -> list[int]:
    return tree.node_membership(symbol)


def tree_stats(tree: DecisionTree) -> TreeStats:
    return tree.stats()


# ── exact arithmetic helpers ──────────────────────────────────────────

def _labels_as_ints(y: np.ndarray) -> list[int]:
    """Scale float labels to exact integers by their common power-of-two
    denominator. All SSE comparisons downstream then happen in one shared
    unit, so equal partitions give bit-equal gains regardless of order."""
    fracs = [Fraction(float(v)) for v in y]
    denom = max(f.denominator for f in fracs)
    return [f.numerator * (denom // f.denominator) for f in fracs]


def _sse_exact(ints: Sequence[int], idx: np.ndarray) -> Fraction:
    s = 0
    q = 0
    for i in idx:
        v = ints[i]
        s += v
        q += v * v
    return Fraction(q) - Fraction(s * s, len(idx))


@dataclass
class _Candidate:
    gain: Fraction
    feature: int
    low_key: float   # theta for thresholds, low for intervals
    high_key: float  # 0.0 for thresholds, high for intervals
    left_rows: np.ndarray
    right_rows: np.ndarray

    def key(self) -> tuple:
        # maximize gain; break ties toward the lowest feature index, then
        # the lowest boundary value(s)
        return (self.gain, -self.feature, -self.low_key, -self.high_key)


def _adjusted_boundary(a: float, b: float) -> float:
    """Midpoint of two consecutive distinct values, nudged so a strict
    `value < boundary` comparison reproduces the training partition even
    when the midpoint rounds onto ``a``."""
    mid = a + (b - a) / 2.0
    if mid <= a:
        return b
    return mid


def _node_float_stats(y: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, float, float, float]:
    """Centered labels plus their sum, sum of squares, and node SSE.
    Centering keeps the prefix-sum gain formulas numerically tame."""
    yv = y[rows]
    yc = yv - yv.mean()
    sum_all = float(yc.sum())
    sq_all = float((yc * yc).sum())
    sse_node = sq_all - sum_all * sum_all / len(rows)
    return yc, sum_all, sq_all, sse_node


def _screen_threshold(xs: np.ndarray, ys: np.ndarray, min_support: int,
                      sum_all: float, sq_all: float, sse_node: float):
    """Float gains for every threshold candidate on one pre-sorted feature.
    Returns (boundaries, gains) or None when no candidate fits."""
    n = len(xs)
    bounds = np.nonzero(xs[:-1] < xs[1:])[0]
    if len(bounds) == 0:
        return None
    k = bounds + 1
    valid = (k >= min_support) & (n - k >= min_support)
    bounds = bounds[valid]
    if len(bounds) == 0:
        return None
    k = bounds + 1
    cs = np.cumsum(ys)
    cq = np.cumsum(ys * ys)
    ls, lq = cs[bounds], cq[bounds]
    sse_l = lq - ls * ls / k
    sse_r = (sq_all - lq) - (sum_all - ls) ** 2 / (n - k)
    gains = sse_node - sse_l - sse_r
    return bounds, gains


def _interval_gains_for_low(cs: np.ndarray, cq: np.ndarray, bounds: np.ndarray,
                            bi: int, n: int, min_support: int,
                            sum_all: float, sq_all: float, sse_node: float) -> np.ndarray:
    """Float gains of all intervals opening after ``bounds[bi]``, one per
    closing boundary bounds[bi+1:]. Invalid candidates come back -inf."""
    lo = bounds[bi]
    hi = bounds[bi + 1:]
    count_in = hi - lo
    sum_in = cs[hi] - cs[lo]
    sq_in = cq[hi] - cq[lo]
    count_out = n - count_in
    with np.errstate(invalid="ignore", divide="ignore"):
        sse_in = sq_in - sum_in * sum_in / count_in
        sse_out = (sq_all - sq_in) - (sum_all - sum_in) ** 2 / count_out
        gains = sse_node - sse_in - sse_out
    invalid = (count_in < min_support) | (count_out < min_support)
    gains[invalid] = -np.inf
    return gains


def _best_split(X: np.ndarray, y: np.ndarray, y_ints: list[int], rows: np.ndarray,
                params: TreeParams) -> _Candidate | None:
    """Pick the maximum-gain admissible split of ``rows``, or None.

    Phase 1 screens every candidate with float prefix sums; phase 2
    re-scores everything within the screening window exactly and applies
    the deterministic tie-break.
    """
    n = len(rows)
    if n < 2 * params.min_support:
        return None
    yc, sum_all, sq_all, sse_node = _node_float_stats(y, rows)
    if sse_node <= 0.0:
        # Labels are flat to float precision: no split can clear a gain
        # gate that is itself nonnegative.
        return None
    tol = _SCREEN_RTOL * sse_node
    d = X.shape[1]

    sorted_features: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    screens: list = []
    best_float = -np.inf
    for f in range(d):
        xv = X[rows, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        ys = yc[order]
        sorted_features.append((order, xs, ys))
        if params.split_kind == "threshold":
            res = _screen_threshold(xs, ys, params.min_support, sum_all, sq_all, sse_node)
            screens.append(res)
            if res is not None:
                best_float = max(best_float, float(res[1].max()))
        else:
            bounds = np.nonzero(xs[:-1] < xs[1:])[0]
            cs = np.cumsum(ys)
            cq = np.cumsum(ys * ys)
            screens.append((bounds, cs, cq))
            for bi in range(len(bounds) - 1):
                gains = _interval_gains_for_low(cs, cq, bounds, bi, n,
                                                params.min_support, sum_all, sq_all, sse_node)
                if len(gains):
                    best_float = max(best_float, float(gains.max()))

    if not np.isfinite(best_float):
        return None

    sse_node_exact = _sse_exact(y_ints, rows)
    best: _Candidate | None = None

    def consider(f: int, order: np.ndarray, left_local: np.ndarray, right_local: np.ndarray,
                 low_key: float, high_key: float) -> None:
        nonlocal best
        left_rows = rows[order[left_local]]
        right_rows = rows[order[right_local]]
        gain = sse_node_exact - _sse_exact(y_ints, left_rows) - _sse_exact(y_ints, right_rows)
        cand = _Candidate(gain, f, low_key, high_key, left_rows, right_rows)
        if best is None or cand.key() > best.key():
            best = cand

    cutoff = best_float - tol
    for f in range(d):
        order, xs, _ys = sorted_features[f]
        if params.split_kind == "threshold":
            res = screens[f]
            if res is None:
                continue
            bounds, gains = res
            for b in bounds[gains >= cutoff]:
                theta = _adjusted_boundary(xs[b], xs[b + 1])
                consider(f, order, np.arange(0, b + 1), np.arange(b + 1, n), theta, 0.0)
        else:
            bounds, cs, cq = screens[f]
            for bi in range(len(bounds) - 1):
                gains = _interval_gains_for_low(cs, cq, bounds, bi, n,
                                                params.min_support, sum_all, sq_all, sse_node)
                for off in np.nonzero(gains >= cutoff)[0]:
                    bj = bi + 1 + off
                    lo_pos, hi_pos = bounds[bi], bounds[bj]
                    low = _adjusted_boundary(xs[lo_pos], xs[lo_pos + 1])
                    high = _adjusted_boundary(xs[hi_pos], xs[hi_pos + 1])
                    inside = np.arange(lo_pos + 1, hi_pos + 1)
                    outside = np.concatenate([np.arange(0, lo_pos + 1), np.arange(hi_pos + 1, n)])
                    consider(f, order, inside, outside, low, high)

    return best


def train_tree(dataset: LabeledDataset, params: TreeParams = TreeParams()) -> DecisionTree:
    """Grow the tree by recursive best-split search, breadth first.

    At each node the maximum-gain candidate split is applied iff both
    children keep at least ``min_support`` members and the gain exceeds
    ``complexity_penalty * SSE(root)``; otherwise the node stays a leaf.
    Gain ties resolve to the lowest feature index, then the lowest
    boundary. Node ids follow breadth-first creation order, so identical
    inputs reproduce identical trees, ids included.
    """
    params.validate()
    X = np.asarray(dataset.changes.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.float64)
    m = len(y)
    if m == 0:
        raise ContractError("cannot train on an empty dataset")
    if m < 2:
        raise ContractError("training requires at least 2 rows")
    if X.shape[0] != m:
        raise ContractError(f"features have {X.shape[0]} rows but there are {m} labels")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ContractError("features and labels must be finite")

    symbols = dataset.changes.symbols
    names = dataset.changes.feature_names
    y_ints = _labels_as_ints(y)
    gate = Fraction(params.complexity_penalty) * _sse_exact(y_ints, np.arange(m))

    nodes = [Node(node_id=0, depth=0, members=tuple(sorted(symbols)))]
    pending: deque[tuple[int, np.ndarray]] = deque([(0, np.arange(m))])
    while pending:
        nid, rows = pending.popleft()
        if params.max_nodes is not None and len(nodes) + 2 > params.max_nodes:
            continue
        cand = _best_split(X, y, y_ints, rows, params)
        if cand is None or not (cand.gain > gate):
            continue
        node = nodes[nid]
        rule_kwargs: dict = {"feature": names[cand.feature], "feature_index": cand.feature,
                             "kind": params.split_kind}
        if params.split_kind == "threshold":
            rule_kwargs["theta"] = float(cand.low_key)
        else:
            rule_kwargs["low"] = float(cand.low_key)
            rule_kwargs["high"] = float(cand.high_key)
        left_id, right_id = len(nodes), len(nodes) + 1
        for cid, crow in ((left_id, cand.left_rows), (right_id, cand.right_rows)):
            nodes.append(Node(
                node_id=cid,
                depth=node.depth + 1,
                members=tuple(sorted(symbols[r] for r in crow)),
                parent=nid,
            ))
        node.rule = SplitRule(**rule_kwargs)
        node.children = (left_id, right_id)
        pending.append((left_id, cand.left_rows))
        pending.append((right_id, cand.right_rows))

    return DecisionTree(nodes, names, params)
