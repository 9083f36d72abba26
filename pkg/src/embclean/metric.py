"""Cosine distance primitives and scalable nearest / top-k pair queries.

All distances use dist = (1 - sim) / 2 with sim the cosine similarity, so
they lie in [0, 1] (0 identical direction, 1 antipodal).  Heavy operations
work on fixed-size row blocks: peak memory stays O(block^2 + k) and results
are bit-identical regardless of how blocks are scheduled across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .io import EmbeddingMatrix, LabelVector

DEFAULT_BLOCK = 1024


@dataclass
class NeighborResult:
    """Distances and indices of the nearest same- and different-label samples."""

    m_eq: float
    m_neq: float
    argmin_eq: int
    argmin_neq: int


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def cosine_distance(u, v) -> float:
    """Cosine distance between two vectors, clamped to [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu <= 1e-12 or nv <= 1e-12:
        raise InputError("zero-norm input vector")
    sim = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(0.0, (1.0 - sim) / 2.0))


def _row_norms(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    small = norms <= 1e-12
    if small.any():
        raise InputError(f"zero-norm row {int(np.argmax(small))}")
    return norms


def _prepare(m: EmbeddingMatrix) -> np.ndarray:
    """Rows rescaled to unit norm so distances reduce to a dot product.

    For a matrix flagged normalized the values are used as-is; this keeps
    the dot-product fast path and the full cosine formula within 1e-12 of
    each other.
    """
    if m.normalized:
        return m.values
    return m.values / _row_norms(m.values)[:, None]


def block_distances(values: np.ndarray, rows_a, rows_b) -> np.ndarray:
    """Distance block between two row index sets of pre-normalized values."""
    sim = values[rows_a] @ values[rows_b].T
    d = (1.0 - sim) * 0.5
    np.clip(d, 0.0, 1.0, out=d)
    return d


def pairwise_matrix(m: EmbeddingMatrix) -> np.ndarray:
    """Full N x N distance matrix; intended for small N (tests, tie groups)."""
    values = _prepare(m)
    d = block_distances(values, slice(None), slice(None))
    np.fill_diagonal(d, 0.0)
    return d


# ---------------------------------------------------------------------------
# Nearest same/different-label queries


def nearest_same_diff(m: EmbeddingMatrix, l: LabelVector, i: int) -> NeighborResult:
    """Exact nearest same-label and different-label neighbors of sample i.

    Ties are broken by the smallest index.
    """
    if not 0 <= i < m.n_samples:
        raise InputError(f"sample index {i} out of range")
    values = _prepare(m)
    d = block_distances(values, [i], slice(None))[0]
    same = l.labels == l.labels[i]
    same[i] = False
    diff = l.labels != l.labels[i]
    if not same.any():
        raise InputError(
            f"class {int(l.labels[i])} has no other member (sample {i})"
        )
    if not diff.any():
        raise InputError("no different-label sample (single-class dataset)")
    eq = np.where(same, d, np.inf)
    ne = np.where(diff, d, np.inf)
    j_eq = int(np.argmin(eq))
    j_ne = int(np.argmin(ne))
    return NeighborResult(
        m_eq=float(eq[j_eq]),
        m_neq=float(ne[j_ne]),
        argmin_eq=j_eq,
        argmin_neq=j_ne,
    )


def nearest_same_diff_all(
    m: EmbeddingMatrix,
    l: LabelVector,
    block_size: int = DEFAULT_BLOCK,
    threads: int | None = None,
):
    """Vectorized nearest_same_diff for every sample.

    Returns (m_eq, m_neq, argmin_eq, argmin_neq) arrays.  Requires at least
    two classes and no singleton class.
    """
    n = m.n_samples
    counts = l.class_counts()
    if l.n_classes < 2:
        raise InputError("no different-label sample (single-class dataset)")
    if (counts < 2).any():
        offender = int(np.argmin(counts))
        raise InputError(
            f"class {offender} has a single member; "
            "merge or drop singleton classes"
        )
    values = _prepare(m)
    labels = l.labels
    m_eq = np.empty(n)
    m_neq = np.empty(n)
    arg_eq = np.empty(n, dtype=np.int64)
    arg_neq = np.empty(n, dtype=np.int64)

    def work(lo: int):
        hi = min(lo + block_size, n)
        d = block_distances(values, slice(lo, hi), slice(None))
        rows = np.arange(lo, hi)
        d[rows - lo, rows] = np.inf
        same = labels[None, :] == labels[lo:hi, None]
        deq = np.where(same, d, np.inf)
        dne = np.where(~same, d, np.inf)
        # np.argmin picks the first occurrence, i.e. the smallest index
        arg_eq[lo:hi] = np.argmin(deq, axis=1)
        arg_neq[lo:hi] = np.argmin(dne, axis=1)
        m_eq[lo:hi] = deq[np.arange(hi - lo), arg_eq[lo:hi]]
        m_neq[lo:hi] = dne[np.arange(hi - lo), arg_neq[lo:hi]]

    starts = range(0, n, block_size)
    nthreads = threads or default_threads()
    if nthreads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            list(pool.map(work, starts))
    else:
        for lo in starts:
            work(lo)
    return m_eq, m_neq, arg_eq, arg_neq


# ---------------------------------------------------------------------------
# Top-k smallest pairs


def top_k_pairs(
    m: EmbeddingMatrix,
    k: int,
    block_size: int = DEFAULT_BLOCK,
    threads: int | None = None,
):
    """The k smallest pairwise distances among all i < j, ascending.

    Ties are broken lexicographically by (i, j).  Row blocks are scanned
    with a per-block partial selection, so peak memory is O(block^2 + k).
    Returns (pairs, distances) with pairs an (k, 2) int array.
    """
    n = m.n_samples
    if n < 2:
        raise InputError("need at least 2 samples for pair retrieval")
    total = n * (n - 1) // 2
    if not 1 <= k <= total:
        raise InputError(f"k={k} out of range 1..{total}")
    values = _prepare(m)

    blocks = []
    for lo_a in range(0, n, block_size):
        for lo_b in range(lo_a, n, block_size):
            blocks.append((lo_a, lo_b))

    def scan(block) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo_a, lo_b = block
        hi_a = min(lo_a + block_size, n)
        hi_b = min(lo_b + block_size, n)
        d = block_distances(values, slice(lo_a, hi_a), slice(lo_b, hi_b))
        ii, jj = np.indices(d.shape)
        ii = ii + lo_a
        jj = jj + lo_b
        keep = (ii < jj).ravel()
        flat_d = d.ravel()[keep]
        flat_i = ii.ravel()[keep]
        flat_j = jj.ravel()[keep]
        if len(flat_d) > k:
            # keep every entry tied with the k-th smallest distance so the
            # lexicographic (d, i, j) merge can resolve ties exactly
            part = np.argpartition(flat_d, k - 1)
            thresh = flat_d[part[k - 1]]
            sel = flat_d <= thresh
            flat_d, flat_i, flat_j = flat_d[sel], flat_i[sel], flat_j[sel]
        return flat_d, flat_i, flat_j

    def compact(chunks):
        d = np.concatenate([c[0] for c in chunks])
        i = np.concatenate([c[1] for c in chunks])
        j = np.concatenate([c[2] for c in chunks])
        order = np.lexsort((j, i, d))[:k]
        return d[order], i[order], j[order]

    chunks: list = []
    buffered = 0
    limit = max(4 * k, block_size * block_size)
    nthreads = threads or default_threads()

    def consume(results):
        nonlocal chunks, buffered
        for chunk in results:
            chunks.append(chunk)
            buffered += len(chunk[0])
            if buffered > limit:
                chunks = [compact(chunks)]
                buffered = len(chunks[0][0])

    if nthreads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            # pool.map yields in submission order, so the merge is deterministic
            consume(pool.map(scan, blocks))
    else:
        consume(scan(b) for b in blocks)

    cand_d, cand_i, cand_j = compact(chunks)
    pairs = np.stack([cand_i, cand_j], axis=1)
    return pairs, cand_d
