"""Off-topic sample detection.

Pipeline: exact single-linkage agglomeration under cosine distance, an
outlier-first sorting of the merge tree, and a per-sample score in [0, 1]
defined as the area under the sample's cluster-weight step function across
merge distances.  Low scores mean "merged late into the bulk", i.e. likely
off-topic.

Determinism: equal-distance merges are broken by the smallest
(min member of first cluster, min member of second cluster) key; distances
within ``TIE_TOL`` of each other count as equal so that exact ties (e.g.
duplicate rows or symmetric configurations) survive floating-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError
from .io import EmbeddingMatrix, Ranking
from .metric import DEFAULT_BLOCK, _prepare, block_distances

# distances closer than this are treated as tied everywhere in this module
TIE_TOL = 1e-12


@dataclass
class Dendrogram:
    """Single-linkage merge tree.

    Node ids 0..N-1 are leaves; merge t creates node N+t.  ``left`` is the
    child whose minimum member index is smaller.
    """

    n_leaves: int
    left: np.ndarray
    right: np.ndarray
    distance: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        n = self.n_leaves
        if n < 2:
            raise InputError("dendrogram needs at least 2 leaves")
        if not (
            len(self.left) == len(self.right) == len(self.distance) == len(self.size) == n - 1
        ):
            raise InputError("dendrogram arrays must have N-1 merges")
        if (np.diff(self.distance) < 0).any():
            raise InputError("merge distances not nondecreasing")
        seen = np.zeros(2 * n - 1, dtype=bool)
        sizes = np.ones(2 * n - 1, dtype=np.int64)
        for t in range(n - 1):
            a, b = int(self.left[t]), int(self.right[t])
            if seen[a] or seen[b] or a >= n + t or b >= n + t:
                raise InputError(f"merge {t} reuses or forward-references a node")
            seen[a] = seen[b] = True
            sizes[n + t] = sizes[a] + sizes[b]
            if sizes[n + t] != self.size[t]:
                raise InputError(f"merge {t} size mismatch")
        if self.size[-1] != n:
            raise InputError("final merge does not cover all leaves")

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_leaves - 1


@dataclass
class SortedDendrogram:
    """Outlier-first ordering of a dendrogram.

    ``leaf_order[0]`` is the most off-topic leaf.  ``left_first[t]`` records
    whether merge t's left child precedes its right child.
    """

    dendrogram: Dendrogram
    leaf_order: np.ndarray
    left_first: np.ndarray

    def first_child(self, t: int) -> int:
        d = self.dendrogram
        return int(d.left[t] if self.left_first[t] else d.right[t])

    def second_child(self, t: int) -> int:
        d = self.dendrogram
        return int(d.right[t] if self.left_first[t] else d.left[t])


@dataclass
class LadScores:
    """Per-sample off-topic scores plus the node weights that produced them."""

    scores: np.ndarray
    node_weights: np.ndarray
    node_probs: np.ndarray


# ---------------------------------------------------------------------------
# Single linkage


def _prim_mst(values: np.ndarray):
    """Minimum spanning tree edges (u, v, w) via Prim with O(N) memory."""
    n = values.shape[0]
    d_best = block_distances(values, [0], slice(None))[0]
    d_best[0] = np.inf
    edge_from = np.zeros(n, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    us = np.empty(n - 1, dtype=np.int64)
    vs = np.empty(n - 1, dtype=np.int64)
    ws = np.empty(n - 1)
    for t in range(n - 1):
        v = int(np.argmin(d_best))
        us[t], vs[t], ws[t] = edge_from[v], v, d_best[v]
        in_tree[v] = True
        d_best[v] = np.inf
        dv = block_distances(values, [v], slice(None))[0]
        improve = ~in_tree & (dv < d_best)
        d_best[improve] = dv[improve]
        edge_from[improve] = v
    return us, vs, ws


def _cluster_min_dist(values, mem_a, mem_b, block_size) -> float:
    best = np.inf
    for i in range(0, len(mem_a), block_size):
        for j in range(0, len(mem_b), block_size):
            d = block_distances(
                values, mem_a[i : i + block_size], mem_b[j : j + block_size]
            )
            best = min(best, float(d.min()))
    return best


def single_linkage(m: EmbeddingMatrix, block_size: int = DEFAULT_BLOCK) -> Dendrogram:
    """Exact single-linkage hierarchy under cosine distance.

    Cluster-cluster distance is the minimum pairwise member distance.  The
    merge order among tied distances follows the smallest
    (min member of first cluster, min member of second) key, matching a
    naive agglomerator step by step.
    """
    n = m.n_samples
    if n < 2:
        raise InputError("need at least 2 samples to cluster")
    values = _prepare(m)
    us, vs, ws = _prim_mst(values)

    order = np.argsort(ws, kind="stable")
    us, vs, ws = us[order], vs[order], ws[order]
    # group consecutive edges whose weights are within TIE_TOL (tie levels)
    levels = []
    start = 0
    for t in range(1, n - 1):
        if ws[t] - ws[t - 1] > TIE_TOL:
            levels.append(slice(start, t))
            start = t
    levels.append(slice(start, n - 1))

    # union-find over points; each root carries its cluster's dendrogram
    # node id, minimum member, and size
    parent = np.arange(n)
    node_of = np.arange(n)
    min_of = np.arange(n)
    size_of = np.ones(n, dtype=np.int64)

    def find(p: int) -> int:
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = int(parent[p])
        return p

    next_id = n
    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    dist = np.empty(n - 1)
    size = np.empty(n - 1, dtype=np.int64)
    t_out = 0
    last_d = 0.0

    def do_merge(ra: int, rb: int, d: float) -> int:
        nonlocal next_id, t_out, last_d
        if min_of[rb] < min_of[ra]:
            ra, rb = rb, ra
        # guard against sub-ulp wiggle inside a tie level
        d = max(d, last_d)
        last_d = d
        merged = size_of[ra] + size_of[rb]
        left[t_out], right[t_out], dist[t_out], size[t_out] = (
            node_of[ra],
            node_of[rb],
            d,
            merged,
        )
        t_out += 1
        parent[rb] = ra
        node_of[ra] = next_id
        min_of[ra] = min(min_of[ra], min_of[rb])
        size_of[ra] = merged
        next_id += 1
        return ra

    for lvl in levels:
        eu, ev, ew = us[lvl], vs[lvl], ws[lvl]
        if len(ew) == 1:
            do_merge(find(int(eu[0])), find(int(ev[0])), float(ew[0]))
            continue
        # tie level: simulate the naive merge rule among the touched clusters
        thresh = float(ew.max()) + TIE_TOL
        roots = sorted({find(int(p)) for p in np.concatenate([eu, ev])})
        comp = {r: r for r in roots}

        def comp_find(c):
            while comp[c] != c:
                comp[c] = comp[comp[c]]
                c = comp[c]
            return c

        for u, v in zip(eu, ev):
            comp[comp_find(find(int(u)))] = comp_find(find(int(v)))
        groups: dict[int, list[int]] = {}
        for r in roots:
            groups.setdefault(comp_find(r), []).append(r)

        root_set = set(roots)
        members: dict[int, list[int]] = {r: [] for r in roots}
        for p in range(n):
            r = find(p)
            if r in root_set:
                members[r].append(p)

        dmap: dict[tuple[int, int], float] = {}
        for grp in groups.values():
            for a, b in combinations(grp, 2):
                dmap[(a, b)] = _cluster_min_dist(
                    values, np.array(members[a]), np.array(members[b]), block_size
                )
        for _ in range(len(ew)):
            best_key = None
            best_pair = None
            for (a, b), d in dmap.items():
                if d > thresh:
                    continue
                key = tuple(sorted((int(min_of[a]), int(min_of[b]))))
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (a, b)
            if best_pair is None:
                raise AssertionError("tie level ran out of merge candidates")
            a, b = best_pair
            survivor = do_merge(a, b, dmap.pop((a, b)))
            for (x, y) in list(dmap):
                if x in (a, b) or y in (a, b):
                    other = y if x in (a, b) else x
                    d = dmap.pop((x, y))
                    k = (min(survivor, other), max(survivor, other))
                    dmap[k] = min(d, dmap.get(k, np.inf))

    return Dendrogram(n_leaves=n, left=left, right=right, distance=dist, size=size)


# ---------------------------------------------------------------------------
# Dendrogram sorting


def sort_dendrogram(d: Dendrogram) -> SortedDendrogram:
    """Order the tree so likely outliers come first.

    At each merge the child with fewer leaves precedes; on a leaf-count tie
    the child created at the larger distance precedes (leaves count as
    created at distance 0); on a full tie the child containing the smaller
    leaf index precedes.
    """
    n = d.n_leaves
    n_nodes = d.n_nodes
    leaves = np.ones(n_nodes, dtype=np.int64)
    leaves[n:] = d.size
    created = np.zeros(n_nodes)
    created[n:] = d.distance
    min_leaf = np.arange(n_nodes)
    for t in range(n - 1):
        min_leaf[n + t] = min(min_leaf[d.left[t]], min_leaf[d.right[t]])

    left_first = np.empty(n - 1, dtype=bool)
    for t in range(n - 1):
        a, b = int(d.left[t]), int(d.right[t])
        if leaves[a] != leaves[b]:
            left_first[t] = leaves[a] < leaves[b]
        elif abs(created[a] - created[b]) > TIE_TOL:
            left_first[t] = created[a] > created[b]
        else:
            left_first[t] = min_leaf[a] < min_leaf[b]

    leaf_order = np.empty(n, dtype=np.int64)
    pos = 0
    stack = [n_nodes - 1]
    while stack:
        node = stack.pop()
        if node < n:
            leaf_order[pos] = node
            pos += 1
            continue
        t = node - n
        first = d.left[t] if left_first[t] else d.right[t]
        second = d.right[t] if left_first[t] else d.left[t]
        stack.append(int(second))
        stack.append(int(first))
    return SortedDendrogram(dendrogram=d, leaf_order=leaf_order, left_first=left_first)


# ---------------------------------------------------------------------------
# Area-under-the-dendrogram scoring


def lad_scores(sd: SortedDendrogram) -> LadScores:
    """Per-sample off-topic score from the sorted dendrogram.

    Walking the hierarchy top-down (undoing merges from the last to the
    first), each split hands its children a weight between the left
    neighbor's weight and the parent's weight, proportional to the child's
    share of the parent's size.  A sample's score is the integral of its
    cluster weight over merge distance from 0 to 1; the distance axis is
    [0, 1] by construction for cosine distance.
    """
    d = sd.dendrogram
    n = d.n_leaves
    if d.distance.min() < 0.0 or d.distance.max() > 1.0:
        raise InputError("merge distance outside [0, 1]")

    n_nodes = d.n_nodes
    probs = np.ones(n_nodes) / n
    probs[n:] = d.size / n

    # span of each node in the sorted leaf order
    span_lo = np.empty(n_nodes, dtype=np.int64)
    span_hi = np.empty(n_nodes, dtype=np.int64)
    leaf_pos = np.empty(n, dtype=np.int64)
    leaf_pos[sd.leaf_order] = np.arange(n)
    span_lo[:n] = leaf_pos
    span_hi[:n] = leaf_pos + 1
    for t in range(n - 1):
        a, b = int(d.left[t]), int(d.right[t])
        span_lo[n + t] = min(span_lo[a], span_lo[b])
        span_hi[n + t] = max(span_hi[a], span_hi[b])

    # split distance of each node: its own merge distance (0 for leaves);
    # the "birth" distance is the parent's split distance (1 for the root)
    split_d = np.zeros(n_nodes)
    split_d[n:] = d.distance
    birth_d = np.empty(n_nodes)
    birth_d[n_nodes - 1] = 1.0
    for t in range(n - 2, -1, -1):
        birth_d[d.left[t]] = d.distance[t]
        birth_d[d.right[t]] = d.distance[t]

    weights = np.empty(n_nodes)
    weights[n_nodes - 1] = 1.0
    # weight of the current cluster whose span ends at a given position
    end_weight = np.zeros(n + 1)
    end_weight[n] = 1.0
    # undo merges from the last to the first (nonincreasing distance)
    for t in range(n - 2, -1, -1):
        parent = n + t
        first = sd.first_child(t)
        second = sd.second_child(t)
        w_prev = end_weight[span_lo[parent]] if span_lo[parent] > 0 else 0.0
        w_par = weights[parent]
        p_par = probs[parent]
        weights[first] = w_prev + (w_par - w_prev) * probs[first] / p_par
        weights[second] = w_prev + (w_par - w_prev) * probs[second] / p_par
        end_weight[span_hi[first]] = weights[first]
        end_weight[span_hi[second]] = weights[second]

    # score = sum over containing clusters of weight * (birth_d - split_d),
    # accumulated with a difference array over the sorted positions
    diff = np.zeros(n + 1)
    contrib = weights * (birth_d - split_d)
    np.add.at(diff, span_lo, contrib)
    np.add.at(diff, span_hi, -contrib)
    by_pos = np.cumsum(diff[:n])
    scores = np.empty(n)
    scores[sd.leaf_order] = by_pos
    np.clip(scores, 0.0, 1.0, out=scores)
    return LadScores(scores=scores, node_weights=weights, node_probs=probs)


def offtopic_ranking(m: EmbeddingMatrix, block_size: int = DEFAULT_BLOCK) -> Ranking:
    """Rank all samples by ascending off-topic score."""
    sd = sort_dendrogram(single_linkage(m, block_size=block_size))
    scores = lad_scores(sd).scores
    order = np.lexsort((np.arange(m.n_samples), scores))
    return Ranking(
        issue_type="offtopic",
        keys=order,
        scores=scores[order],
        total_candidates=m.n_samples,
    )
