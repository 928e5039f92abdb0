"""Data generators and the experiment runner."""

import itertools

import numpy as np
import pytest

from drumtest.errors import ParameterError
from drumtest.model import estimate_rho
from drumtest.simulate import (BINARY_MARGINALS, DgpSpec, build_universe,
                               observed_menu_paths, run_experiment, simulate)


class TestDemandDgps:
    def test_zero_innovation_walk_is_deterministic(self):
        dgp = DgpSpec("cobb-douglas-walk", {"innovation_sd": 0.0})
        panel, uni = simulate(dgp, 30, seed=0)
        prices = {1: np.array([2.0, 1.0]), 2: np.array([1.0, 2.0])}
        by_agent = {}
        for rec in panel.records:
            by_agent.setdefault(rec.agent_id, {})[rec.period] = rec
        for agent, recs in by_agent.items():
            alphas = {}
            for t, rec in recs.items():
                p = prices[rec.menu_id]
                alphas[t] = p[0] * rec.quantity[0]  # alpha = p1 y1 / w with w=1
            assert alphas[2] == pytest.approx(0.9 * alphas[1], abs=1e-12)

    def test_copula_shares_stay_interior(self):
        dgp = DgpSpec("cobb-douglas-gaussian-copula")
        panel, uni = simulate(dgp, 50, seed=1)
        prices = {1: np.array([2.0, 1.0]), 2: np.array([1.0, 2.0])}
        for rec in panel.records:
            alpha = prices[rec.menu_id][0] * rec.quantity[0]
            assert 0.0 < alpha < 1.0

    def test_demands_lie_on_budget_lines(self):
        panel, uni = simulate(DgpSpec("cobb-douglas-walk"), 20, seed=2)
        prices = {1: np.array([2.0, 1.0]), 2: np.array([1.0, 2.0])}
        for rec in panel.records:
            assert prices[rec.menu_id] @ np.array(rec.quantity) == pytest.approx(1.0)

    def test_every_path_gets_the_same_count(self):
        panel, uni = simulate(DgpSpec("cobb-douglas-walk"), 15, seed=3)
        rho = estimate_rho(panel, uni)
        assert sorted(rho.counts.values()) == [15] * 4


class TestBinaryDgps:
    def test_path_probabilities_compose_marginals(self):
        """Empirical path frequencies converge to the product of published
        per-menu marginals inside a 1/sqrt(N) envelope."""
        dgp = DgpSpec("binary3")
        marg = BINARY_MARGINALS["binary3"]
        first = {j: marg[2 * (j - 1)] for j in (1, 2, 3)}
        for n in (100, 1000, 10000):
            panel, uni = simulate(dgp, n, seed=4)
            rho = estimate_rho(panel, uni)
            worst = 0.0
            for path in rho.observed_paths:
                order = uni.choice_paths(path)
                arr = np.asarray(rho.probs[path], float)
                for cp, freq in zip(order, arr):
                    target = 1.0
                    for j, i in zip(path, cp):
                        target *= first[j] if i == 1 else 1 - first[j]
                    worst = max(worst, abs(freq - target))
            assert worst < 4.0 / np.sqrt(n)

    def test_six_menu_paths(self):
        panel, uni = simulate(DgpSpec("binary1"), 5, seed=5)
        rho = estimate_rho(panel, uni)
        assert sorted(rho.observed_paths) == sorted(itertools.permutations((1, 2, 3)))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError):
            simulate(DgpSpec("nonsense"), 5)


class TestExperiment:
    def test_deterministic_across_thread_counts(self):
        dgps = [DgpSpec("binary3")]
        r1 = run_experiment(dgps, [15], sims=6, reps=49, seed=9, n_jobs=1)
        r2 = run_experiment(dgps, [15], sims=6, reps=49, seed=9, n_jobs=3)
        assert r1.entries[0]["rejection_rate"] == r2.entries[0]["rejection_rate"]

    def test_report_formats(self):
        report = run_experiment([DgpSpec("binary3")], [10], sims=3, reps=19, seed=0)
        text = report.to_text()
        csv = report.to_csv()
        assert "rejection_rate" in csv.splitlines()[0]
        assert "binary3" in text
        rate = report.entries[0]["rejection_rate"]
        assert 0.0 <= rate <= 1.0


class TestPublishedMarginals:
    def test_vectors_match_published_fractions(self):
        assert np.allclose(BINARY_MARGINALS["binary1"],
                           [1 / 5, 4 / 5, 4 / 5, 1 / 5, 1 / 5, 4 / 5], atol=0)
        assert np.allclose(BINARY_MARGINALS["binary2"],
                           [1 / 5, 4 / 5, 1 / 2, 1 / 2, 1 / 5, 4 / 5], atol=0)
        assert np.allclose(BINARY_MARGINALS["binary3"],
                           [1 / 4, 3 / 4, 2 / 4, 2 / 4, 1 / 4, 3 / 4], atol=0)

    def test_triangle_values_match_published(self):
        """The static facet rows evaluate on the three marginal vectors to the
        published value patterns."""
        from drumtest import catalog as cat
        uni = cat.binary_universe(("l1", "l2", "l3"), (1,))
        from drumtest.representations import catalog_H
        H = np.asarray(catalog_H("binary", uni, 1).rows, float)
        v1 = H @ BINARY_MARGINALS["binary1"]
        v2 = H @ BINARY_MARGINALS["binary2"]
        v3 = H @ BINARY_MARGINALS["binary3"]
        assert np.allclose(sorted(v1), sorted([-0.4, 1.4, 1.4, -0.4, -0.4, 1.4]), atol=1e-12)
        assert np.allclose(sorted(v2), sorted([-0.1, 1.1, 1.1, -0.1, -0.1, 1.1]), atol=1e-12)
        assert np.allclose(sorted(v3), sorted([0, 1, 1, 0, 0, 1]), atol=1e-12)
