import numpy as np
import pytest

from uncm.guessing import (
    DEFAULT_SAMPLE_SIZE,
    MCEstimator,
    build_estimator,
    exact_guess_number,
    guess_number,
)


def test_default_sample_size():
    assert DEFAULT_SAMPLE_SIZE == 100_000


def test_cumulative_weights_nondecreasing(tiny_rank_model):
    est = build_estimator(tiny_rank_model, 5000, np.random.default_rng(0))
    assert np.all(np.diff(est.cum_weights) >= 0)
    assert len(est.probs_desc) == len(est.cum_weights) == 5000


def test_same_rng_gives_identical_estimator(tiny_rank_model):
    a = build_estimator(tiny_rank_model, 2000, np.random.default_rng(5))
    b = build_estimator(tiny_rank_model, 2000, np.random.default_rng(5))
    assert np.array_equal(a.probs_desc, b.probs_desc)
    assert np.array_equal(a.cum_weights, b.cum_weights)


def test_probability_above_all_samples_estimates_one(tiny_rank_model):
    est = build_estimator(tiny_rank_model, 1000, np.random.default_rng(1))
    assert guess_number(est, 1.0) == 1.0
    assert guess_number(est, est.probs_desc[0] * 1.01) == 1.0


def test_monotone_in_probability(tiny_rank_model):
    est = build_estimator(tiny_rank_model, 5000, np.random.default_rng(2))
    probs = np.sort(np.random.default_rng(3).uniform(1e-8, 0.2, size=50))[::-1]
    values = [guess_number(est, p) for p in probs]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert all(v >= 1.0 for v in values)


def test_nonpositive_probability_rejected(tiny_rank_model):
    est = build_estimator(tiny_rank_model, 100, np.random.default_rng(0))
    with pytest.raises(ValueError):
        guess_number(est, 0.0)


def test_handcrafted_estimator_boundaries():
    est = MCEstimator(
        n=3,
        probs_desc=np.array([1e-1, 1e-2, 1e-3]),
        cum_weights=np.array([4.0, 49.0, 4999.0]),
    )
    assert guess_number(est, 0.05) == pytest.approx(5.0)
    assert guess_number(est, 0.005) == pytest.approx(50.0)
    assert guess_number(est, 0.0005) == pytest.approx(5000.0)
    # ties are excluded: a probability equal to a sample does not count it
    assert guess_number(est, 1e-1) == pytest.approx(1.0)


def test_exact_rank_basics(tiny_rank_model):
    ranked = tiny_rank_model.enumerate_exact()
    top = ranked[0][0]
    assert exact_guess_number(tiny_rank_model, top) == 1
    for rank in (1, 7, 100):
        pwd = ranked[rank - 1][0]
        assert exact_guess_number(tiny_rank_model, pwd) == rank


def test_exact_ranks_are_permutation(tiny_abc_model):
    ranked = tiny_abc_model.enumerate_exact()
    ranks = [exact_guess_number(tiny_abc_model, pwd) for pwd, _ in ranked[:10]]
    assert ranks == list(range(1, 11))


def test_exact_rank_outside_space_errors(tiny_rank_model):
    with pytest.raises(ValueError):
        exact_guess_number(tiny_rank_model, "zzzz")


def test_mean_estimate_unbiased_for_small_ranks(tiny_rank_model):
    """Mean of the estimator over 20 independent runs approaches the
    exact rank (relative error < 5% for ranks <= 200)."""
    ranked = tiny_rank_model.enumerate_exact()
    check_ranks = [1, 3, 10, 30, 80, 150, 200]
    probs = {r: ranked[r - 1][1] for r in check_ranks}
    sums = {r: 0.0 for r in check_ranks}
    for i in range(20):
        est = build_estimator(tiny_rank_model, 50_000, np.random.default_rng(100 + i))
        for r in check_ranks:
            sums[r] += guess_number(est, probs[r])
    for r in check_ranks:
        mean = sums[r] / 20
        assert abs(mean - r) / r < 0.05, f"rank {r}: mean estimate {mean:.1f}"
