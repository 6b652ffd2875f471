"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way: exhaustive
enumeration and exact rational arithmetic, no prefix-sum tricks, no reuse
of the production search code. Trees are plain dicts.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def scale_labels_to_ints(y) -> list[int]:
    """Lift float labels to exact integers over their common power-of-two
    denominator. All SSE arithmetic downstream is then exact."""
    fracs = [Fraction(float(v)) for v in y]
    denom = 1
    for f in fracs:
        denom = max(denom, f.denominator)
    return [f.numerator * (denom // f.denominator) for f in fracs]


def exact_sse(ints: list[int], idx) -> Fraction:
    vals = [ints[i] for i in idx]
    s = sum(vals)
    return Fraction(sum(v * v for v in vals)) - Fraction(s * s, len(vals))


def adjusted_boundary(a: float, b: float) -> float:
    mid = a + (b - a) / 2.0
    if mid <= a:
        return b
    return mid


def exhaustive_best_split(X: np.ndarray, ints: list[int], rows: list[int],
                          min_support: int, split_kind: str = "threshold"):
    """Try every candidate split of ``rows`` and return the best as
    (gain, feature, low, high, left_rows, right_rows), or None.

    Exact throughout: since label sums of squares are additive across the
    two sides, gain reduces to s_L^2/n_L + s_R^2/n_R - s_P^2/n_P, which is
    three exact terms per candidate over integer prefix sums. Enumerates
    features in ascending order and boundaries in ascending value order,
    keeping a candidate only on strict improvement of
    (gain, -feature, -low, -high), which realizes the documented tie-break.
    """
    n = len(rows)
    best = None
    best_key = None
    s_all = sum(ints[r] for r in rows)
    node_term = Fraction(s_all * s_all, n)
    for f in range(X.shape[1]):
        ordered = sorted(rows, key=lambda r: (X[r, f], r))
        xs = [X[r, f] for r in ordered]
        prefix = [0]
        for r in ordered:
            prefix.append(prefix[-1] + ints[r])
        boundaries = [i for i in range(n - 1) if xs[i] < xs[i + 1]]
        if split_kind == "threshold":
            for b in boundaries:
                n_l = b + 1
                n_r = n - n_l
                if n_l < min_support or n_r < min_support:
                    continue
                s_l = prefix[n_l]
                s_r = s_all - s_l
                gain = Fraction(s_l * s_l, n_l) + Fraction(s_r * s_r, n_r) - node_term
                theta = adjusted_boundary(xs[b], xs[b + 1])
                key = (gain, -f, -theta, -0.0)
                if best_key is None or key > best_key:
                    best_key = key
                    best = (gain, f, theta, None, ordered[:n_l], ordered[n_l:])
        else:
            for bi_pos in range(len(boundaries) - 1):
                for bj_pos in range(bi_pos + 1, len(boundaries)):
                    lo, hi = boundaries[bi_pos], boundaries[bj_pos]
                    n_in = hi - lo
                    n_out = n - n_in
                    if n_in < min_support or n_out < min_support:
                        continue
                    s_in = prefix[hi + 1] - prefix[lo + 1]
                    s_out = s_all - s_in
                    gain = (Fraction(s_in * s_in, n_in) + Fraction(s_out * s_out, n_out)
                            - node_term)
                    low = adjusted_boundary(xs[lo], xs[lo + 1])
                    high = adjusted_boundary(xs[hi], xs[hi + 1])
                    key = (gain, -f, -low, -high)
                    if best_key is None or key > best_key:
                        best_key = key
                        best = (gain, f, low, high,
                                ordered[lo + 1: hi + 1], ordered[: lo + 1] + ordered[hi + 1:])
    return best


def build_reference_tree(X: np.ndarray, y: np.ndarray, symbols: list[str],
                         min_support: int = 2, alpha: float = 0.0,
                         split_kind: str = "threshold") -> list[dict]:
    """Grow the reference tree breadth-first; returns a list of node dicts
    (id, depth, parent, members frozenset, rule tuple or None, children)."""
    labels = scale_labels_to_ints(y)
    m = len(symbols)
    all_rows = list(range(m))
    gate = Fraction(alpha) * exact_sse(labels, all_rows)
    nodes = [{"id": 0, "depth": 0, "parent": None, "children": None, "rule": None,
              "members": frozenset(symbols)}]
    queue = [(0, all_rows)]
    while queue:
        nid, rows = queue.pop(0)
        if len(rows) < 2 * min_support:
            continue
        found = exhaustive_best_split(X, labels, rows, min_support, split_kind)
        if found is None:
            continue
        gain, f, low, high, left, right = found
        if not gain > gate:
            continue
        lid, rid = len(nodes), len(nodes) + 1
        for cid, crows in ((lid, left), (rid, right)):
            nodes.append({"id": cid, "depth": nodes[nid]["depth"] + 1, "parent": nid,
                          "children": None, "rule": None,
                          "members": frozenset(symbols[r] for r in crows)})
        nodes[nid]["children"] = (lid, rid)
        nodes[nid]["rule"] = (f, low, high)
        queue.append((lid, left))
        queue.append((rid, right))
    return nodes


def brute_force_counters(tree, query: str) -> dict[str, int]:
    """Counters per the all-node scan: for every node containing the query,
    add 1 for each co-member."""
    counters: dict[str, int] = {}
    for node in tree.nodes:
        if query in node.members:
            for sym in node.members:
                if sym != query:
                    counters[sym] = counters.get(sym, 0) + 1
    return counters


def sort_entries(counters: dict[str, int]) -> list[tuple[str, int]]:
    return sorted(counters.items(), key=lambda kv: (-kv[1], kv[0]))


def exact_changes(prices: list[float]) -> list[Fraction]:
    """Change vector in exact rational arithmetic."""
    return [Fraction(prices[j + 1]) / Fraction(prices[j]) - 1 for j in range(len(prices) - 1)]


def pearson_reference(x, y) -> float:
    """Direct textbook formula, no shortcuts shared with the package."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = (sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)) ** 0.5
    return num / den


def last_price_before(ticks, symbol: str, t: float):
    """Scan a tick list for the most recent price of ``symbol`` at or
    before time ``t``; None if it has not ticked yet."""
    price = None
    for tick in ticks:
        if tick.timestamp > t:
            break
        if tick.symbol == symbol:
            price = tick.price
    return price
