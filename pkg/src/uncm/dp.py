"""L2 clipping and (epsilon, delta) accounting for private seeds.

The accountant covers a single release of the Gaussian mechanism, with
privacy amplification by subsampling handled through Renyi-DP moments
of the subsampled Gaussian mechanism. Subsampling is uniform without
replacement in the seed computation; the accountant conservatively
models it with the Poisson-subsampling bound at the same rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

# Renyi orders: integers keep the subsampled-Gaussian moment in closed
# (binomial) form; the range covers the q/z regimes used here.
DEFAULT_ALPHAS: tuple[int, ...] = tuple(range(2, 65)) + (128, 256)


@dataclass
class PrivacyAccount:
    """One released seed's privacy parameters."""

    z: float
    s: float
    q_rate: float
    delta: float
    epsilon: float

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError(f"noise multiplier must be positive, got {self.z}")
        if not 0 < self.q_rate <= 1:
            raise ValueError(f"sampling rate must be in (0, 1], got {self.q_rate}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PrivacyAccount":
        return cls(**{k: float(d[k]) for k in ("z", "s", "q_rate", "delta", "epsilon")})


def clip_l2(v: np.ndarray, s: float) -> np.ndarray:
    """v / max(1, ||v|| / s): unchanged inside the radius-s ball,
    rescaled onto its surface outside."""
    if s <= 0:
        raise ValueError(f"clip norm must be positive, got {s}")
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    return v / max(1.0, norm / s)


@dataclass(frozen=True)
class GaussianEpsilon:
    epsilon: float
    # the classical bound is loose above eps = 1; flag it for callers
    loose: bool


def epsilon_gaussian(z: float, delta: float) -> GaussianEpsilon:
    """Classical Gaussian-mechanism bound: sqrt(2 ln(1.25/delta)) / z."""
    if z <= 0:
        raise ValueError(f"noise multiplier must be positive, got {z}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    eps = math.sqrt(2.0 * math.log(1.25 / delta)) / z
    return GaussianEpsilon(epsilon=eps, loose=eps > 1.0)


def rdp_subsampled_gaussian(q: float, z: float, alpha: int) -> float:
    """Renyi divergence bound of order alpha for one application of the
    Poisson-subsampled Gaussian mechanism at rate q.

    Integer-order closed form: the alpha-th moment of the mixture
    likelihood ratio expands binomially with terms
    C(alpha, j) (1-q)^(alpha-j) q^j exp(j(j-1) / (2 z^2)),
    accumulated in log space. At q = 1 this is the plain Gaussian
    RDP alpha / (2 z^2).
    """
    if not 0 < q <= 1:
        raise ValueError(f"sampling rate must be in (0, 1], got {q}")
    if z <= 0:
        raise ValueError(f"noise multiplier must be positive, got {z}")
    if alpha < 2 or int(alpha) != alpha:
        raise ValueError(f"alpha must be an integer >= 2, got {alpha}")
    alpha = int(alpha)
    if q == 1.0:
        return alpha / (2.0 * z * z)
    log_terms = []
    log_q = math.log(q)
    log_1mq = math.log1p(-q)
    for j in range(alpha + 1):
        log_binom = (
            math.lgamma(alpha + 1) - math.lgamma(j + 1) - math.lgamma(alpha - j + 1)
        )
        log_terms.append(
            log_binom
            + (alpha - j) * log_1mq
            + j * log_q
            + j * (j - 1) / (2.0 * z * z)
        )
    m = max(log_terms)
    log_moment = m + math.log(sum(math.exp(t - m) for t in log_terms))
    return max(log_moment / (alpha - 1), 0.0)


def epsilon_subsampled(
    z: float,
    q_rate: float,
    delta: float,
    alphas: tuple[int, ...] = DEFAULT_ALPHAS,
) -> float:
    """(epsilon, delta) for one subsampled Gaussian release: minimize
    RDP(alpha) + ln(1/delta) / (alpha - 1) over the order grid.

    The classical Gaussian bound stays valid under subsampling (the
    amplified mechanism is at least as private at the same delta), so
    the looser of the two never wins.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    best = epsilon_gaussian(z, delta).epsilon
    for alpha in alphas:
        rdp = rdp_subsampled_gaussian(q_rate, z, alpha)
        eps = rdp + math.log(1.0 / delta) / (alpha - 1)
        best = min(best, eps)
    return best


def account_for_seed(
    z: float, s: float, k_used: int, population: int, delta: float
) -> PrivacyAccount:
    """Privacy record for a seed computed on k_used of `population` users."""
    q_rate = min(1.0, k_used / population)
    eps = epsilon_subsampled(z, q_rate, delta)
    return PrivacyAccount(z=z, s=s, q_rate=q_rate, delta=delta, epsilon=eps)


def default_delta(n_passwords: int, strictness: float = 1e-2) -> float:
    """Per-leak failure probability policy: strictness / |X|
    (1e-2 default; 1e-3 and 1e-4 for stricter guarantees)."""
    if n_passwords < 1:
        raise ValueError("population must be positive")
    return strictness / n_passwords


def mia_accuracy_bound(epsilon: float, delta: float = 0.0) -> float:
    """Best balanced-accuracy any membership distinguisher can reach
    against an (epsilon, delta)-DP release.

    From the hypothesis-testing characterization (TPR <= e^eps FPR + delta
    and its complement): max advantage is (e^eps - 1 + 2 delta)/(e^eps + 1),
    hence accuracy at most (e^eps + delta) / (e^eps + 1).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    e = math.exp(epsilon)
    return min(1.0, (e + delta) / (e + 1.0))
