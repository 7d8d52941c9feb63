import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpkmeans.mechanisms import (
    Budget,
    BudgetExceededError,
    ParameterError,
    derive_seed,
    exp_select,
    exp_select_probabilities,
    laplace_mechanism,
    laplace_noise,
    laplace_sample,
    make_rng,
    noisy_count,
)


def laplace_cdf(x, b):
    return 0.5 * math.exp(x / b) if x < 0 else 1.0 - 0.5 * math.exp(-x / b)


class TestLaplace:
    def test_same_seed_same_value(self):
        assert laplace_sample(1.0, make_rng(3)) == laplace_sample(1.0, make_rng(3))

    def test_mean_near_zero(self):
        x = laplace_noise(1.0, 1_000_000, make_rng(0))
        assert abs(x.mean()) < 0.01

    def test_variance_two_beta_squared(self):
        x = laplace_noise(2.0, 1_000_000, make_rng(1))
        assert abs(x.var() / 8.0 - 1.0) < 0.03

    def test_empirical_cdf(self):
        x = laplace_noise(1.0, 1_000_000, make_rng(2))
        for q in (-1.0, 0.0, 1.0):
            assert abs((x <= q).mean() - laplace_cdf(q, 1.0)) < 0.01

    @pytest.mark.parametrize("scale", [0.0, -1.0, math.inf, math.nan])
    def test_bad_scale(self, scale):
        with pytest.raises(ParameterError):
            laplace_sample(scale, make_rng(0))


class TestNoisyCount:
    def test_noise_free_limit(self):
        b = Budget(1e9)
        assert abs(noisy_count(10, 1.0, 1e9, make_rng(0), b) - 10) < 1e-6

    def test_variance_of_zero_count(self):
        rng = make_rng(4)
        b = Budget(1e5)
        vals = np.array([noisy_count(0, 1.0, 1.0, rng, b) for _ in range(100_000)])
        assert abs(vals.var() / 2.0 - 1.0) < 0.05

    def test_budget_exhaustion(self):
        b = Budget(1.0)
        b.spend(0.95)
        with pytest.raises(BudgetExceededError):
            noisy_count(5, 1.0, 0.1, make_rng(0), b)

    def test_may_be_negative(self):
        rng = make_rng(5)
        b = Budget(1000.0)
        assert any(noisy_count(0, 1.0, 1.0, rng, b) < 0 for _ in range(50))


class TestExpSelect:
    def _freqs(self, q, eps, sens, n, seed):
        rng = make_rng(seed)
        b = Budget(eps * n + 1)
        counts = np.bincount([exp_select(q, eps, sens, rng, b) for _ in range(n)], minlength=len(q))
        return counts / n

    def test_equal_qualities_split_evenly(self):
        f = self._freqs([3.0, 3.0], 1.0, 1.0, 100_000, 0)
        assert abs(f[0] - 0.5) < 0.01

    def test_matches_softmax(self):
        # eps=2, GS=1 -> weights exp(q); brute-force normalisation
        w = np.exp([0.0, 1.0, 2.0])
        f = self._freqs([0.0, 1.0, 2.0], 2.0, 1.0, 100_000, 1)
        assert np.all(np.abs(f - w / w.sum()) < 0.01)

    def test_noise_free_picks_argmax(self):
        f = self._freqs([0.1, 0.5, 0.2], 1e9, 1.0, 10_000, 2)
        assert f[1] > 0.999

    def test_empty_candidates(self):
        with pytest.raises(ParameterError):
            exp_select([], 1.0, 1.0, make_rng(0), Budget(1.0))

    def test_spends_eps(self):
        b = Budget(1.0)
        exp_select([1.0, 2.0], 0.3, 1.0, make_rng(0), b, "pick")
        assert b.ledger == [("pick", 0.3)]

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=6), st.floats(1e-3, 1e3))
    def test_probabilities_form_distribution(self, q, eps):
        p = exp_select_probabilities(q, eps, 1.0)
        assert np.all(p >= 0) and abs(p.sum() - 1.0) < 1e-9
        assert p[int(np.argmax(q))] == p.max()


class TestBudget:
    @given(st.integers(1, 200), st.floats(1e-3, 100.0))
    @settings(max_examples=50)
    def test_n_equal_spends_exhaust(self, n, eps):
        b = Budget(eps)
        for i in range(n):
            b.spend(eps / n, f"s{i}")
        assert b.exhausted()
        assert math.isclose(sum(a for _, a in b.ledger), b.spent)

    def test_overspend_raises_and_leaves_state(self):
        b = Budget(1.0)
        b.spend(0.6)
        with pytest.raises(BudgetExceededError):
            b.spend(0.5)
        assert b.spent == 0.6 and len(b.ledger) == 1

    def test_scopes_prefix_labels(self):
        b = Budget(1.0)
        with b.scope("outer"):
            with b.scope("inner"):
                b.spend(0.25, "x")
            b.spend(0.25, "y")
        b.spend(0.5, "z")
        assert [l for l, _ in b.ledger] == ["outer/inner/x", "outer/y", "z"]
        assert b.by_prefix(1) == {"outer": 0.5, "z": 0.5}

    def test_laplace_mechanism_single_spend_for_vector(self):
        b = Budget(1.0)
        laplace_mechanism(np.zeros(1000), 1.0, 1.0, make_rng(0), b, "hist")
        assert b.ledger == [("hist", 1.0)]

    @pytest.mark.parametrize("total", [0.0, -1.0, math.inf])
    def test_invalid_total(self, total):
        with pytest.raises(ParameterError):
            Budget(total)


class TestSeeds:
    def test_derive_seed_stable_and_distinct(self):
        assert derive_seed(1, "dplloyd", 0.5, 3) == derive_seed(1, "dplloyd", 0.5, 3)
        assert derive_seed(1, "dplloyd", 0.5, 3) != derive_seed(1, "dplloyd", 0.5, 4)
        assert 0 <= derive_seed(7, "x") < 2**63

    def test_make_rng_passthrough_and_type_check(self):
        g = make_rng(1)
        assert make_rng(g) is g
        with pytest.raises(ParameterError):
            make_rng("seed")
