"""Synthetic contamination with ground truth, and ranking evaluation.

Contamination operators plant label flips, off-topic rows, or near-duplicate
rows into an existing dataset and return the planted keys as ground truth.
Evaluation covers AUROC, average precision, the focused-effort curve with
its area (AFE), and a one-sided Mann-Whitney U test for human-verification
outcomes.  Rankings truncated to a top-k head are scored by treating the
unlisted candidates as one tied block at score 1.0; positions inside the
block enter the metrics through their exact expected values under a random
arrangement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .errors import InputError
from .io import EmbeddingMatrix, LabelVector, Ranking, _atomic_write

PAIR_ISSUE = "duplicates"


@dataclass
class GroundTruth:
    """Planted positives (sample ids or (i, j) pairs) within M candidates."""

    issue_type: str
    positives: frozenset
    total_candidates: int

    def __post_init__(self):
        self.positives = frozenset(
            tuple(map(int, k)) if isinstance(k, (tuple, list, np.ndarray)) else int(k)
            for k in self.positives
        )
        if not 0 < len(self.positives) < self.total_candidates:
            raise InputError(
                f"need 0 < positives < {self.total_candidates} candidates, "
                f"got {len(self.positives)}"
            )


@dataclass
class EffortCurve:
    """Focused effort at each achieved recall step, and its area."""

    recalls: np.ndarray
    fe: np.ndarray
    afe: float


# ---------------------------------------------------------------------------
# Contamination operators


def mixed_schedule(total: float, steps: int) -> float:
    """Per-step prevalence so ``steps`` sequential injections compound to total."""
    if not 0.0 < total < 1.0:
        raise InputError(f"total contamination must be in (0, 1), got {total}")
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    return (1.0 + total) ** (1.0 / steps) - 1.0


def _planted_count(n: int, fraction: float) -> int:
    if not 0.0 < fraction < 1.0:
        raise InputError(f"fraction must be in (0, 1), got {fraction}")
    count = math.floor(fraction * n)
    if count < 1:
        raise InputError(
            f"fraction {fraction:g} of {n} samples plants nothing"
        )
    return count


def contaminate_labels_uniform(l: LabelVector, fraction: float, seed: int):
    """Flip a fixed fraction of labels, drawing replacements uniformly."""
    if l.n_classes < 2:
        raise InputError("need at least 2 classes to flip labels")
    n = len(l)
    count = _planted_count(n, fraction)
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=count, replace=False)
    labels = l.labels.copy()
    offsets = rng.integers(1, l.n_classes, size=count)
    labels[idx] = (labels[idx] + offsets) % l.n_classes
    truth = GroundTruth("labelerrors", frozenset(idx.tolist()), n)
    return LabelVector(labels=labels, n_classes=l.n_classes), truth


def contaminate_labels_prevalence(l: LabelVector, fraction: float, seed: int):
    """Flip labels with replacements drawn proportionally to class prevalence."""
    if l.n_classes < 2:
        raise InputError("need at least 2 classes to flip labels")
    n = len(l)
    count = _planted_count(n, fraction)
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=count, replace=False)
    prev = l.class_counts() / n
    labels = l.labels.copy()
    for i in idx:
        w = prev.copy()
        w[labels[i]] = 0.0
        total = w.sum()
        if total <= 0:
            raise InputError("all prevalence mass on a single class")
        labels[i] = rng.choice(l.n_classes, p=w / total)
    truth = GroundTruth("labelerrors", frozenset(idx.tolist()), n)
    return LabelVector(labels=labels, n_classes=l.n_classes), truth


def plant_offtopic(m: EmbeddingMatrix, fraction: float, shift: float, seed: int):
    """Append rows from a displaced Gaussian blob as off-topic samples.

    The blob center sits at the data mean plus ``shift`` times the RMS
    per-dimension spread, along a random direction; the blob itself is
    isotropic with that same spread.
    """
    if shift <= 0:
        raise InputError(f"shift must be positive, got {shift}")
    n = m.n_samples
    count = _planted_count(n, fraction)
    rng = np.random.default_rng(seed)
    mean = m.values.mean(axis=0)
    spread = float(np.sqrt((m.values.std(axis=0) ** 2).mean()))
    if spread <= 0:
        raise InputError("matrix has zero spread; cannot place off-topic blob")
    u = rng.standard_normal(m.dim)
    u /= np.linalg.norm(u)
    rows = mean + shift * spread * u + spread * rng.standard_normal((count, m.dim))
    if m.normalized:
        rows /= np.linalg.norm(rows, axis=1)[:, None]
    values = np.vstack([m.values, rows])
    truth = GroundTruth("offtopic", frozenset(range(n, n + count)), n + count)
    return EmbeddingMatrix(values=values, normalized=m.normalized), truth


def plant_duplicates(m: EmbeddingMatrix, fraction: float, noise: float, seed: int):
    """Append perturbed copies of existing rows as near duplicates.

    With noise 0 the copies are bitwise identical (no renormalization), so
    the planted pairs sit at distance exactly 0 on the dot-product path.
    """
    if noise < 0:
        raise InputError(f"noise must be >= 0, got {noise}")
    n = m.n_samples
    count = _planted_count(n, fraction)
    rng = np.random.default_rng(seed)
    sources = rng.choice(n, size=count, replace=False)
    copies = m.values[sources].copy()
    if noise > 0:
        copies += noise * rng.standard_normal(copies.shape)
        if m.normalized:
            copies /= np.linalg.norm(copies, axis=1)[:, None]
    values = np.vstack([m.values, copies])
    total = (n + count) * (n + count - 1) // 2
    pairs = frozenset((int(s), n + t) for t, s in enumerate(sources))
    truth = GroundTruth("duplicates", pairs, total)
    return EmbeddingMatrix(values=values, normalized=m.normalized), truth


# ---------------------------------------------------------------------------
# Ranking metrics


def _split_outcomes(r: Ranking, t: GroundTruth):
    """Listed positive mask plus tail composition for a possibly truncated ranking."""
    if t.issue_type != r.issue_type:
        raise InputError(
            f"ground truth is for {t.issue_type}, ranking for {r.issue_type}"
        )
    m_total = r.total_candidates
    if t.total_candidates != m_total:
        raise InputError(
            f"candidate counts differ: truth {t.total_candidates}, "
            f"ranking {m_total}"
        )
    p_total = len(t.positives)
    if not 0 < p_total < m_total:
        raise InputError("degenerate ground truth")
    if r.is_pairs:
        listed_keys = [tuple(k) for k in r.keys.tolist()]
    else:
        listed_keys = r.keys.tolist()
    is_pos = np.fromiter(
        (k in t.positives for k in listed_keys), dtype=bool, count=len(listed_keys)
    )
    listed_pos = int(is_pos.sum())
    tail = m_total - len(listed_keys)
    tail_pos = p_total - listed_pos
    if tail_pos < 0 or tail_pos > tail:
        raise InputError("ground truth keys outside the candidate universe")
    if tail and not r.truncated:
        raise InputError("ranking does not cover all candidates")
    return is_pos, tail, tail_pos


def auroc(r: Ranking, t: GroundTruth) -> float:
    """Probability that a random positive precedes a random negative.

    Lower score = earlier; ties count one half, so this is the normalized
    Mann-Whitney statistic.
    """
    is_pos, tail, tail_pos = _split_outcomes(r, t)
    scores = r.scores
    p_l = int(is_pos.sum())
    n_l = len(scores) - p_l
    tail_neg = tail - tail_pos
    p_total = p_l + tail_pos
    n_total = n_l + tail_neg

    correct = 0.0
    if p_l and n_l:
        order = np.argsort(scores, kind="stable")
        s_sorted = scores[order]
        midranks = np.empty(len(scores))
        i = 0
        while i < len(s_sorted):
            j = i
            while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
                j += 1
            midranks[order[i:j]] = 0.5 * (i + 1 + j)
            i = j
        u_pos = float(midranks[is_pos].sum()) - p_l * (p_l + 1) / 2.0
        correct += p_l * n_l - u_pos
    if tail_neg:
        below = scores[is_pos] < 1.0
        correct += tail_neg * (float(below.sum()) + 0.5 * float((~below).sum()))
    if tail_pos and n_l:
        ties = float((scores[~is_pos] == 1.0).sum())
        correct += 0.5 * ties * tail_pos
    correct += 0.5 * tail_pos * tail_neg
    return correct / (p_total * n_total)


def _tail_precision_sum(a: int, b: int, h: int, p: int) -> float:
    """Expected sum of precision-at-hit over p positives randomly placed in a
    tied block of b candidates that starts after a listed ones (h positive)."""
    if p == 0:
        return 0.0
    s1 = float(digamma(a + b + 1) - digamma(a + 1))
    s2 = b - (a + 1) * s1
    out = (h + 1) * s1
    if b > 1:
        out += (p - 1) / (b - 1) * s2
    return p / b * out


def average_precision(r: Ranking, t: GroundTruth) -> float:
    """Step-wise average precision (precision at each positive hit)."""
    is_pos, tail, tail_pos = _split_outcomes(r, t)
    hits = np.nonzero(is_pos)[0]
    precisions = (np.arange(len(hits)) + 1.0) / (hits + 1.0)
    total = float(precisions.sum())
    total += _tail_precision_sum(len(is_pos), tail, len(hits), tail_pos)
    return total / (len(hits) + tail_pos)


def effort_curve(r: Ranking, t: GroundTruth) -> EffortCurve:
    """Focused effort FE at each achieved recall, and its area AFE.

    FE at recall i/P is the rank of the i-th positive divided by the
    inspections a random order would need (recall times the candidate
    count); AFE averages FE over the recall steps.
    """
    is_pos, tail, tail_pos = _split_outcomes(r, t)
    m_total = r.total_candidates
    positions = list((np.nonzero(is_pos)[0] + 1.0))
    a = len(is_pos)
    # expected positions of the j-th positive inside the tied tail block
    positions += [a + j * (tail + 1.0) / (tail_pos + 1.0) for j in range(1, tail_pos + 1)]
    positions = np.asarray(positions)
    p_total = len(positions)
    steps = np.arange(1, p_total + 1)
    recalls = steps / p_total
    # fe = position / (recall * M), arranged so the perfect ranking divides
    # exactly representable integers (position * P) / (step * M)
    fe = positions * p_total / (steps * m_total)
    return EffortCurve(recalls=recalls, fe=fe, afe=math.fsum(fe) / p_total)


# ---------------------------------------------------------------------------
# Mann-Whitney U (one-sided, binary outcomes)


def _u2_statistic(k: int, t_ones: int, n_a: int, n_b: int) -> int:
    """Twice the U statistic of group a when it holds k of the t_ones ones."""
    ones_b = t_ones - k
    zeros_b = n_b - ones_b
    wins = k * zeros_b
    ties = k * ones_b + (n_a - k) * zeros_b
    return 2 * wins + ties


def mann_whitney_one_sided(group_a, group_b) -> float:
    """One-sided p-value that group_a stochastically dominates group_b.

    Outcomes must be binary.  Small samples (n <= 20) are evaluated by exact
    enumeration of assignments; larger ones use the normal approximation
    with tie correction and a continuity correction toward the mean, which
    yields exactly 0.5 for identical groups.
    """
    a = np.asarray(group_a)
    b = np.asarray(group_b)
    if len(a) == 0 or len(b) == 0:
        raise InputError("both groups must be nonempty")
    if not (np.isin(a, (0, 1)).all() and np.isin(b, (0, 1)).all()):
        raise InputError("outcomes must be binary (0/1)")
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    t_ones = int(a.sum() + b.sum())
    u2_obs = _u2_statistic(int(a.sum()), t_ones, n_a, n_b)

    if n <= 20:
        num = 0
        den = math.comb(n, n_a)
        k_lo = max(0, t_ones - n_b)
        k_hi = min(t_ones, n_a)
        for k in range(k_lo, k_hi + 1):
            if _u2_statistic(k, t_ones, n_a, n_b) >= u2_obs:
                num += math.comb(t_ones, k) * math.comb(n - t_ones, n_a - k)
        return num / den

    u = u2_obs / 2.0
    mean = n_a * n_b / 2.0
    tie_term = sum(c**3 - c for c in (t_ones, n - t_ones))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 0.5
    cc = 0.5 if u > mean else (-0.5 if u < mean else 0.0)
    z = (u - mean - cc) / math.sqrt(var)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Ground truth files and metric reports


def save_ground_truth(t: GroundTruth, path) -> None:
    """One key per line: ``index`` or ``index_a,index_b``, sorted."""
    with _atomic_write(path, "w") as f:
        for key in sorted(t.positives):
            if isinstance(key, tuple):
                f.write(f"{key[0]},{key[1]}\n")
            else:
                f.write(f"{key}\n")


def load_ground_truth(path, issue_type: str, total_candidates: int) -> GroundTruth:
    positives = []
    pairs = issue_type == PAIR_ISSUE
    with open(path, "r", encoding="utf-8") as f:
        for lineno, ln in enumerate(f, start=1):
            ln = ln.strip()
            if not ln:
                continue
            parts = ln.split(",")
            try:
                if pairs:
                    if len(parts) != 2:
                        raise ValueError("need two indices")
                    positives.append((int(parts[0]), int(parts[1])))
                else:
                    if len(parts) != 1:
                        raise ValueError("need one index")
                    positives.append(int(parts[0]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: malformed key ({exc})") from exc
    return GroundTruth(issue_type, frozenset(positives), total_candidates)


def evaluate(r: Ranking, t: GroundTruth, metrics=("auroc", "ap", "afe")) -> dict:
    """Compute the requested metrics; flags truncation in the report."""
    out = {}
    for name in metrics:
        if name == "auroc":
            out["auroc"] = auroc(r, t)
        elif name == "ap":
            out["ap"] = average_precision(r, t)
        elif name == "afe":
            out["afe"] = effort_curve(r, t).afe
        else:
            raise InputError(f"unknown metric {name!r}")
    if r.truncated:
        out["truncated"] = True
    return out
