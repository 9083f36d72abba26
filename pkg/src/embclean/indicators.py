"""Near-duplicate and label-error rankings built on the metric primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .io import EmbeddingMatrix, LabelVector, Ranking
from .metric import DEFAULT_BLOCK, nearest_same_diff_all, top_k_pairs

# full pair enumeration is refused beyond this many pairs (about N = 10,000)
PAIR_BUDGET = 50_000_000


@dataclass
class LabelErrorRanking:
    """Label-error ranking plus the per-sample neighbor provenance.

    ``m_eq``/``m_neq`` and the argmin arrays are indexed by sample id, so the
    score of any entry can be recomputed as m_neq^2 / (m_eq^2 + m_neq^2).
    """

    ranking: Ranking
    m_eq: np.ndarray
    m_neq: np.ndarray
    argmin_eq: np.ndarray
    argmin_neq: np.ndarray


def near_duplicate_ranking(
    m: EmbeddingMatrix,
    top_k: int | None = None,
    budget: int = PAIR_BUDGET,
    block_size: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> Ranking:
    """Rank sample pairs by ascending cosine distance.

    Without ``top_k`` the full pair list is materialized, which is refused
    beyond ``budget`` pairs; with ``top_k`` only the k smallest pairs are
    kept and the ranking is marked truncated.
    """
    n = m.n_samples
    if n < 2:
        raise InputError("need at least 2 samples for near-duplicate ranking")
    total = n * (n - 1) // 2
    if top_k is None:
        if total > budget:
            raise InputError(
                f"{total} pairs exceed the enumeration budget {budget}; "
                "pass top_k to retrieve a head"
            )
        k = total
    else:
        if not 1 <= top_k <= total:
            raise InputError(f"top_k={top_k} out of range 1..{total}")
        k = top_k
    pairs, dists = top_k_pairs(m, k, block_size=block_size, threads=threads)
    return Ranking(
        issue_type="duplicates",
        keys=pairs,
        scores=dists,
        total_candidates=total,
        truncated=k < total,
    )


def label_error_ranking(
    m: EmbeddingMatrix,
    l: LabelVector,
    block_size: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> LabelErrorRanking:
    """Rank samples by the intra-/extra-class distance ratio.

    For each sample the score is m_neq^2 / (m_eq^2 + m_neq^2) with m_eq the
    distance to the nearest same-label sample and m_neq to the nearest
    different-label one; low values flag suspicious labels.  A sample that
    coincides with points of both kinds (both minima zero) gets the neutral
    score 0.5.
    """
    if len(l) != m.n_samples:
        raise InputError(
            f"label count {len(l)} != {m.n_samples} embedding rows"
        )
    m_eq, m_neq, arg_eq, arg_neq = nearest_same_diff_all(
        m, l, block_size=block_size, threads=threads
    )
    num = m_neq**2
    den = m_eq**2 + m_neq**2
    scores = np.full(m.n_samples, 0.5)
    nz = den > 0
    scores[nz] = num[nz] / den[nz]
    np.clip(scores, 0.0, 1.0, out=scores)
    order = np.lexsort((np.arange(m.n_samples), scores))
    ranking = Ranking(
        issue_type="labelerrors",
        keys=order,
        scores=scores[order],
        total_candidates=m.n_samples,
    )
    return LabelErrorRanking(
        ranking=ranking, m_eq=m_eq, m_neq=m_neq, argmin_eq=arg_eq, argmin_neq=arg_neq
    )
