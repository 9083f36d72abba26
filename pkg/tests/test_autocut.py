import math
from types import SimpleNamespace

import numpy as np
import pytest

from embclean import (
    InputError,
    decide_cutoff,
    fit_left_tail,
    logit_transform,
    quantile_fractions,
    sensitivity_sweep,
)
from embclean.autocut import EPS, expected_outlier_fraction


def logistic_ppf(p):
    return math.log(p / (1.0 - p))


def exact_quantile_scores(mu, sigma, alpha, pairwise, m_count):
    """Scores whose nearest-rank quantiles at alpha1/alpha2 are analytic."""
    a1, a2 = quantile_fractions(alpha, pairwise)
    grid = mu + sigma * np.array(
        [logistic_ppf((i + 0.5) / m_count) for i in range(m_count)]
    )
    grid.sort()
    r1 = math.ceil(a1 * m_count)
    r2 = math.ceil(a2 * m_count)
    grid[r1 - 1] = mu + sigma * logistic_ppf(a1)
    grid[r2 - 1] = mu + sigma * logistic_ppf(a2)
    return np.sort(grid)


class TestLogitTransform:
    def test_midpoint(self):
        assert logit_transform([0.5])[0] == 0.0

    def test_zero_clamps(self):
        got = logit_transform([0.0])[0]
        assert abs(got - math.log(EPS / (1 - EPS))) <= 1e-12
        assert abs(got + 16.118) < 1e-2

    def test_one_clamps(self):
        # |1 - (1-eps)| is not exactly eps in floats, so symmetry is approximate
        assert abs(logit_transform([1.0])[0] + logit_transform([0.0])[0]) <= 1e-6

    def test_strictly_monotone(self):
        out = logit_transform([0.1, 0.2, 0.3])
        assert out[0] < out[1] < out[2]


class TestQuantileFractions:
    def test_sample_level(self):
        a1, a2 = quantile_fractions(0.1, pairwise=False)
        assert a1 == 0.1
        assert abs(a2 - 0.223607) <= 1e-6
        assert abs(a2 * a2 - a1 / 2) <= 1e-12

    def test_pairwise(self):
        a1, a2 = quantile_fractions(0.1, pairwise=True)
        assert abs(a1 - 0.01) <= 1e-15
        assert abs(a2 - 0.0707107) <= 1e-6


class TestFitLeftTail:
    def test_exact_recovery(self):
        scores = exact_quantile_scores(2.0, 3.0, 0.1, False, 1000)
        fit = fit_left_tail(scores, 0.1, pairwise=False, n=1000)
        assert abs(fit.mu - 2.0) <= 1e-9
        assert abs(fit.sigma - 3.0) <= 1e-9

    def test_statistical_recovery_single_trial(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(size=100_000)
        samples = -1.0 + 2.0 * np.log(u / (1 - u))
        fit = fit_left_tail(samples, 0.1, pairwise=False, n=len(samples))
        assert abs(fit.mu + 1.0) < 0.05 * 2.0
        assert abs(fit.sigma - 2.0) < 0.05 * 2.0

    def test_truncated_head_is_enough(self):
        scores = exact_quantile_scores(0.0, 1.0, 0.1, False, 1000)
        _, a2 = quantile_fractions(0.1, False)
        head = np.sort(scores)[: math.ceil(a2 * 1000) + 1]
        fit_full = fit_left_tail(scores, 0.1, False, n=1000)
        fit_head = fit_left_tail(head, 0.1, False, n=1000, total=1000)
        assert fit_full.mu == fit_head.mu and fit_full.sigma == fit_head.sigma

    def test_degenerate_spread(self):
        with pytest.raises(InputError, match="insufficient score spread"):
            fit_left_tail(np.zeros(100), 0.1, pairwise=False, n=100)

    def test_too_small_dataset(self):
        with pytest.raises(InputError, match="too small"):
            fit_left_tail(np.arange(5.0), 0.1, pairwise=False, n=5)


class TestDecideCutoff:
    def fit(self, mu=0.0, sigma=1.0, alpha=0.1, pairwise=False):
        scores = exact_quantile_scores(mu, sigma, alpha, pairwise, 4000)
        n = 4000 if not pairwise else 90  # 90*89/2 = 4005 pairs
        return fit_left_tail(scores, alpha, pairwise, n=n, total=len(scores))

    def test_closed_form_cutoff(self):
        fit = self.fit()
        dec = decide_cutoff(fit, q=0.05, n=4000, scores=[], keys=[])
        expected = fit.mu + fit.sigma * math.log(0.005 / 0.995)
        assert abs(dec.s_cut - expected) <= 1e-12
        assert abs(dec.s_cut - (-5.2933)) <= 1e-3 * (1 + abs(fit.mu))

    def test_pairwise_expected_fraction(self):
        assert abs(expected_outlier_fraction(0.1, True, 101) - 0.002) <= 1e-15

    def test_clean_scores_unflagged(self):
        fit = self.fit()
        scores = np.linspace(fit.mu - 2, fit.mu + 2, 50)
        dec = decide_cutoff(fit, 0.05, 4000, scores, list(range(50)))
        assert dec.flagged == []

    def test_flags_left_outliers(self):
        fit = self.fit()
        scores = np.array([-30.0, -20.0, 0.0, 1.0])
        dec = decide_cutoff(fit, 0.05, 4000, scores, ["a", "b", "c", "d"])
        assert dec.flagged == ["a", "b"]

    def test_monotone_in_q_and_f_exp(self):
        fit = self.fit()
        cuts = [
            decide_cutoff(fit, q, 4000, [], []).s_cut
            for q in (0.01, 0.05, 0.25, 1.0)
        ]
        assert all(a < b for a, b in zip(cuts, cuts[1:]))

    def test_undefined_cutoff(self):
        fake = SimpleNamespace(mu=0.0, sigma=1.0, alpha=2.0, pairwise=False)
        with pytest.raises(InputError, match="cutoff undefined"):
            decide_cutoff(fake, 1.0, 100, [], [])

    def test_flagged_invariant_under_relabeling(self):
        fit = self.fit()
        scores = np.array([-40.0, -0.5, -35.0, 2.0])
        a = decide_cutoff(fit, 0.05, 4000, scores, [0, 1, 2, 3])
        b = decide_cutoff(fit, 0.05, 4000, scores, ["w", "x", "y", "z"])
        mapping = dict(zip([0, 1, 2, 3], ["w", "x", "y", "z"]))
        assert [mapping[k] for k in a.flagged] == b.flagged

    def test_json_round_trip(self):
        import json

        fit = self.fit()
        dec = decide_cutoff(
            fit, 0.05, 4000, [-30.0, 0.0], [(0, 5), (1, 2)], issue_type="duplicates"
        )
        blob = json.loads(dec.to_json())
        assert blob["issue_type"] == "duplicates"
        assert blob["flagged"] == [[0, 5]]
        assert set(blob) == {
            "issue_type", "alpha", "q", "mu", "sigma", "s_cut", "f_exp", "flagged",
        }


class TestSensitivitySweep:
    def test_monotone_in_q(self):
        rng = np.random.default_rng(1)
        u = rng.uniform(size=20000)
        scores = np.log(u / (1 - u))
        rows = sensitivity_sweep(scores, [0.05, 0.1], [0.25, 0.01, 0.05], False, 20000)
        by_alpha = {}
        for row in rows:
            by_alpha.setdefault(row["alpha"], []).append((row["q"], row["n_flagged"]))
        for items in by_alpha.values():
            items.sort()
            counts = [c for _, c in items]
            assert counts == sorted(counts)

    def test_clean_logistic_false_flag_rate(self):
        rng = np.random.default_rng(2)
        u = rng.uniform(size=20000)
        scores = np.log(u / (1 - u))
        rows = sensitivity_sweep(scores, [0.05, 0.1], [0.05], False, 20000)
        for row in rows:
            assert row["fraction"] <= 0.01
