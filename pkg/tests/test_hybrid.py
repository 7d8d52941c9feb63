import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpkmeans.eugkm import eugkm
from dpkmeans.harness import make_init_sets
from dpkmeans.hybrid import decide, hybrid, hybrid_threshold, refine
from dpkmeans.kmeans import lloyd_path
from dpkmeans.mechanisms import Budget, ParameterError


def test_threshold_values():
    eps_b, X, Y, t_ok = hybrid_threshold(10_000, 2, 5)
    assert X == pytest.approx(4.5e-5)
    assert Y == pytest.approx(1.3333e-5, rel=1e-4)
    assert eps_b == pytest.approx(3.375)
    assert t_ok


def test_t_condition():
    assert not hybrid_threshold(10_000, 2, 5, t=1)[3]
    assert not decide(10_000, 2, 5, 1e9, t=1).applied_hybrid


@given(st.integers(1, 12), st.integers(2, 10))
def test_threshold_decreases_with_n(d, k):
    values = [hybrid_threshold(n, d, k)[0] for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_decision_uses_public_inputs_only():
    a = decide(5000, 3, 4, 0.7)
    b = decide(5000, 3, 4, 0.7)
    assert a == b


def test_bad_rho():
    with pytest.raises(ParameterError):
        hybrid_threshold(100, 2, 2, rho=0.9)


@pytest.fixture(scope="module")
def setup(request):
    from dpkmeans.data import SyntheticSpec, gen_synthetic

    data, _ = gen_synthetic(SyntheticSpec(d=2, k=5, n=10_000, separation=0.6, seed=0))
    return data, make_init_sets(2, 5, 1.0, 5, 0)


def test_fallback_identical_to_eugkm(setup):
    data, inits = setup
    eps = hybrid_threshold(data.n, 2, 5)[0] / 10
    C, dec = hybrid(data, 5, eps, init_sets=inits, rng=7)
    assert not dec.applied_hybrid
    np.testing.assert_array_equal(C, eugkm(data, 5, eps, init_sets=inits, rng=7)[0])


def test_noise_free_is_one_lloyd_step(setup):
    data, inits = setup
    C, dec, syn = hybrid(data, 5, 1e9, init_sets=inits, rng=1, return_synopsis=True)
    assert dec.applied_hybrid
    C0, _ = eugkm(data, 5, 5e8, init_sets=inits, rng=1)
    np.testing.assert_allclose(C, lloyd_path(data, C0, 1)[1], atol=1e-3)


def test_ledger_split(setup):
    data, inits = setup
    b = Budget(5.0)
    hybrid(data, 5, 5.0, init_sets=inits, rng=0, budget=b)
    parts = b.by_prefix(1)
    assert parts == pytest.approx({"eugkm": 2.5, "dplloyd_one_round": 2.5})
    assert b.exhausted()


def test_fallback_ledger(setup):
    data, inits = setup
    b = Budget(0.1)
    hybrid(data, 5, 0.1, init_sets=inits, rng=0, budget=b)
    assert b.by_prefix(1) == pytest.approx({"eugkm": 0.1})


def test_refine_scoped(setup):
    data, inits = setup
    b = Budget(1.0)
    refine(data, inits[0], 1.0, rng=0, budget=b)
    assert set(b.by_prefix(1)) == {"dplloyd_one_round"} and b.exhausted()
