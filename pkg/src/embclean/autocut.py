"""Fully automatic issue flagging from a score distribution.

The scores of clean samples empirically form a smooth bulk while issues sit
far into the left tail.  The procedure: stretch [0, 1] scores with a logit
transform, fit a logistic distribution to the left tail using two robust
quantiles selected by the contamination rate guess alpha, then flag
everything whose transformed score falls below the point where the fitted
tail probability drops under q times the expected outlier fraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

# scores are clamped to [EPS, 1-EPS] before the logit so exact 0/1 stay finite
EPS = 1e-7


@dataclass
class TailFit:
    """Location/scale of the logistic left-tail fit and the quantiles used."""

    mu: float
    sigma: float
    s_bar1: float
    s_bar2: float
    alpha1: float
    alpha2: float
    pairwise: bool

    @property
    def alpha(self) -> float:
        """The contamination rate guess this fit was computed for."""
        return math.sqrt(self.alpha1) if self.pairwise else self.alpha1


@dataclass
class CutoffDecision:
    issue_type: str
    alpha: float
    q: float
    mu: float
    sigma: float
    s_cut: float
    f_exp: float
    flagged: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "issue_type": self.issue_type,
                "alpha": self.alpha,
                "q": self.q,
                "mu": self.mu,
                "sigma": self.sigma,
                "s_cut": self.s_cut,
                "f_exp": self.f_exp,
                "flagged": [
                    list(map(int, k)) if isinstance(k, (tuple, list, np.ndarray)) else int(k)
                    for k in self.flagged
                ],
            },
            indent=2,
        )


def logit_transform(scores) -> np.ndarray:
    """Map [0, 1] scores to the real line with log(s / (1 - s))."""
    s = np.clip(np.asarray(scores, dtype=np.float64), EPS, 1.0 - EPS)
    return np.log(s / (1.0 - s))


def _logistic_ppf(p: float) -> float:
    return math.log(p / (1.0 - p))


def quantile_fractions(alpha: float, pairwise: bool) -> tuple[float, float]:
    """Effective quantile fractions (alpha1, alpha2) for the tail fit.

    alpha1 is alpha for per-sample scores and alpha^2 for pair scores (the
    worst-case interaction count); alpha2 is the geometric mean of alpha1
    and 1/2.
    """
    if not 0.0 < alpha < 0.5:
        raise InputError(f"alpha must be in (0, 0.5), got {alpha}")
    alpha1 = alpha * alpha if pairwise else alpha
    alpha2 = math.sqrt(alpha1 / 2.0)
    return alpha1, alpha2


def fit_left_tail(
    scores, alpha: float, pairwise: bool, n: int, total: int | None = None
) -> TailFit:
    """Estimate logistic (mu, sigma) from two left-tail quantiles.

    ``scores`` are transformed scores; they may be a truncated ascending
    head of the full distribution as long as they reach the alpha2
    quantile.  ``n`` is the dataset sample count; the candidate count is
    n(n-1)/2 for pairwise scores, n otherwise (override with ``total``).
    Quantiles use the nearest-rank method: the ceil(a*M)-th order statistic.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64))
    if total is None:
        total = n * (n - 1) // 2 if pairwise else n
    if len(s) > total:
        raise InputError(f"{len(s)} scores exceed {total} candidates")
    alpha1, alpha2 = quantile_fractions(alpha, pairwise)
    if math.floor(alpha1 * total) < 1:
        raise InputError(
            f"alpha1={alpha1:g} keeps no scores out of {total}; "
            "dataset too small for this alpha"
        )
    r1 = math.ceil(alpha1 * total)
    r2 = math.ceil(alpha2 * total)
    if r2 > len(s):
        raise InputError(
            f"need the {r2} smallest scores for the alpha2 quantile, "
            f"got only {len(s)}"
        )
    s_bar1 = float(s[r1 - 1])
    s_bar2 = float(s[r2 - 1])
    if s_bar2 <= s_bar1:
        raise InputError("insufficient score spread between tail quantiles")
    ppf1 = _logistic_ppf(alpha1)
    ppf2 = _logistic_ppf(alpha2)
    sigma = (s_bar2 - s_bar1) / (ppf2 - ppf1)
    mu = (s_bar1 * ppf2 - s_bar2 * ppf1) / (ppf2 - ppf1)
    return TailFit(
        mu=mu,
        sigma=sigma,
        s_bar1=s_bar1,
        s_bar2=s_bar2,
        alpha1=alpha1,
        alpha2=alpha2,
        pairwise=pairwise,
    )


def expected_outlier_fraction(alpha: float, pairwise: bool, n: int) -> float:
    """Expected fraction of problematic candidates: 2a/(N-1) for pairs, else a."""
    if pairwise:
        if n < 2:
            raise InputError("need at least 2 samples for pair scores")
        return 2.0 * alpha / (n - 1)
    return alpha


def decide_cutoff(
    fit: TailFit,
    q: float,
    n: int,
    scores,
    keys,
    issue_type: str = "offtopic",
) -> CutoffDecision:
    """Flag every key whose transformed score falls below the cutoff.

    The cutoff is where the fitted logistic CDF equals q times the expected
    outlier fraction.
    """
    if not 0.0 < q <= 1.0:
        raise InputError(f"q must be in (0, 1], got {q}")
    f_exp = expected_outlier_fraction(fit.alpha, fit.pairwise, n)
    p = q * f_exp
    if p >= 1.0:
        raise InputError(f"cutoff undefined: q*f_exp = {p:g} >= 1")
    s_cut = fit.mu + fit.sigma * _logistic_ppf(p)
    s = np.asarray(scores, dtype=np.float64)
    flagged_idx = np.nonzero(s < s_cut)[0]
    keys = list(keys)
    flagged = [keys[i] for i in flagged_idx]
    return CutoffDecision(
        issue_type=issue_type,
        alpha=fit.alpha,
        q=q,
        mu=fit.mu,
        sigma=fit.sigma,
        s_cut=s_cut,
        f_exp=f_exp,
        flagged=flagged,
    )


def sensitivity_sweep(scores, alpha_grid, q_grid, pairwise: bool, n: int):
    """Flagged fraction for every (alpha, q) grid point.

    Returns a list of dicts with alpha, q, n_flagged, and fraction.  The
    flagged fraction is checked to be nondecreasing in q at fixed alpha,
    which the cutoff formula guarantees.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64))
    total = n * (n - 1) // 2 if pairwise else n
    keys = np.arange(len(s))
    rows = []
    for alpha in alpha_grid:
        fit = fit_left_tail(s, alpha, pairwise, n)
        prev = -1
        for q in sorted(q_grid):
            dec = decide_cutoff(fit, q, n, s, keys)
            count = len(dec.flagged)
            if count < prev:
                raise AssertionError("flagged count decreased with growing q")
            prev = count
            rows.append(
                {
                    "alpha": float(alpha),
                    "q": float(q),
                    "n_flagged": count,
                    "fraction": count / total,
                }
            )
    return rows
