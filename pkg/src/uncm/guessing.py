"""Monte Carlo guess-number estimation plus an exact-rank oracle.

The estimator keeps a sorted sample of model probabilities with
cumulative importance weights; a password's estimated rank is
1 + sum over strictly-more-probable samples of 1/(n * p_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_SIZE = 100_000


@dataclass
class MCEstimator:
    """Immutable after construction; queries are thread-safe."""

    n: int
    probs_desc: np.ndarray  # sampled probabilities, descending
    cum_weights: np.ndarray  # cum_weights[j] = sum_{i<=j} 1/(n p_i)

    def guess_number(self, p: float) -> float:
        return guess_number(self, p)


def build_estimator(model, n: int = DEFAULT_SAMPLE_SIZE, rng=None) -> MCEstimator:
    """Draw n ancestral samples from any model with the sample() contract."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    sampled = model.sample(rng, n)
    probs = np.sort(np.array([p for _, p in sampled]))[::-1]
    if probs[-1] <= 0:
        raise ValueError("sampled a zero-probability password; model is inconsistent")
    cum = np.cumsum(1.0 / (n * probs))
    return MCEstimator(n=n, probs_desc=probs, cum_weights=cum)


# Ties are excluded by strict inequality; the comparison carries a tiny
# relative band so that the same password scored through different batch
# shapes (whose float results can differ in the last ulps) still counts
# as a tie rather than as strictly more probable.
TIE_RTOL = 1e-9


def guess_number(est: MCEstimator, p: float) -> float:
    """Estimated rank of a password with model probability p; ties with
    sampled probabilities are excluded (strict inequality)."""
    if p <= 0:
        raise ValueError(f"probability must be positive, got {p}")
    asc = est.probs_desc[::-1]
    count = est.n - int(np.searchsorted(asc, p * (1.0 + TIE_RTOL), side="right"))
    if count == 0:
        return 1.0
    return 1.0 + float(est.cum_weights[count - 1])


def exact_guess_number(
    model, password: str, alphabet: str | None = None, max_len: int | None = None
) -> int:
    """1-based rank in the exhaustive descending-probability order
    (lexicographic tie-break), for spaces small enough to enumerate."""
    ranked = model.enumerate_exact(alphabet, max_len)
    for rank, (pwd, _) in enumerate(ranked, start=1):
        if pwd == password:
            return rank
    raise ValueError(f"password not inside the restricted key space")
