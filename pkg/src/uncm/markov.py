"""Markov-chain password models and the min-auto combiner.

Order-m chains condition each character on the previous m-1 (with START
padding) and include an END terminator; additive smoothing is applied
at query time. The backoff variant keeps counts at every order and
answers from the highest order whose context was seen often enough.
All models satisfy the same sample/log_prob contract as the neural
models, so they plug into the Monte Carlo estimator unchanged.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

START = "\x00"
END = "\x01"
DEFAULT_SMOOTHING = 0.01
DEFAULT_BACKOFF_THRESHOLD = 10


@dataclass
class MarkovModel:
    order: int
    smoothing: float
    alphabet: str  # observed characters, sorted
    counts: dict[str, Counter] = field(default_factory=dict)
    context_totals: dict[str, int] = field(default_factory=dict)
    max_len: int = 30

    @property
    def _n_outcomes(self) -> int:
        return len(self.alphabet) + 1  # characters plus END

    def _cond_prob(self, context: str, symbol: str) -> float:
        c = self.counts.get(context)
        count = c[symbol] if c else 0
        total = self.context_totals.get(context, 0)
        denom = total + self.smoothing * self._n_outcomes
        if denom == 0:
            return 0.0
        return (count + self.smoothing) / denom

    def _context(self, prefix: str) -> str:
        ctx_len = self.order - 1
        padded = START * ctx_len + prefix
        return padded[len(padded) - ctx_len :] if ctx_len else ""

    def log_prob(self, password: str) -> float:
        if len(password) > self.max_len:
            raise ValueError(
                f"password longer than max_len={self.max_len} is outside the key space"
            )
        logp = 0.0
        for i, ch in enumerate(password):
            if ch not in self.alphabet:
                return -math.inf  # closed vocabulary
            p = self._cond_prob(self._context(password[:i]), ch)
            if p == 0.0:
                return -math.inf
            logp += math.log(p)
        if len(password) < self.max_len:
            p_end = self._cond_prob(self._context(password), END)
            if p_end == 0.0:
                return -math.inf
            logp += math.log(p_end)
        return logp

    def _symbol_probs(self, context: str) -> tuple[list[str], np.ndarray]:
        symbols = list(self.alphabet) + [END]
        probs = np.array([self._cond_prob(context, s) for s in symbols])
        total = probs.sum()
        if total == 0:
            # unseen context with zero smoothing: force END so sampling
            # terminates; such paths have probability zero anyway
            probs = np.zeros(len(symbols))
            probs[-1] = 1.0
            return symbols, probs
        return symbols, probs / total

    def sample(self, rng: np.random.Generator, n: int):
        out = []
        for _ in range(n):
            prefix = ""
            logp = 0.0
            while True:
                if len(prefix) == self.max_len:
                    break  # forced END, probability 1
                symbols, probs = self._symbol_probs(self._context(prefix))
                pick = int(rng.choice(len(symbols), p=probs))
                logp += math.log(probs[pick]) if probs[pick] > 0 else -math.inf
                if symbols[pick] == END:
                    break
                prefix += symbols[pick]
            out.append((prefix, math.exp(logp)))
        return out

    def enumerate_exact(self, alphabet: str | None = None, max_len: int | None = None,
                        guard: int = 1_000_000):
        alphabet = self.alphabet if alphabet is None else alphabet
        max_len = self.max_len if max_len is None else min(max_len, self.max_len)
        total, count = 0, 1
        for _ in range(max_len + 1):
            total += count
            if total > guard:
                raise ValueError(f"restricted key space exceeds {guard} strings")
            count *= len(alphabet)
        results = []
        frontier = [("", 0.0)]
        for depth in range(max_len + 1):
            nxt = []
            for prefix, logp in frontier:
                if depth == self.max_len:
                    results.append((prefix, math.exp(logp)))
                    continue
                p_end = self._cond_prob(self._context(prefix), END)
                results.append(
                    (prefix, math.exp(logp) * p_end if p_end > 0 else 0.0)
                )
                if depth == max_len:
                    continue
                for ch in alphabet:
                    p = self._cond_prob(self._context(prefix), ch)
                    if p > 0:
                        nxt.append((prefix + ch, logp + math.log(p)))
            frontier = nxt
        results.sort(key=lambda pair: (-pair[1], pair[0]))
        return results


def train_markov(
    passwords,
    order: int,
    smoothing: float = DEFAULT_SMOOTHING,
    max_len: int = 30,
) -> MarkovModel:
    """Accumulate transition counts with START padding and END terminator."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    passwords = list(passwords)
    if not passwords:
        raise ValueError("no training passwords")
    counts: dict[str, Counter] = defaultdict(Counter)
    totals: dict[str, int] = defaultdict(int)
    chars: set[str] = set()
    ctx_len = order - 1
    for pwd in passwords:
        chars.update(pwd)
        padded = START * ctx_len + pwd + END
        for i in range(ctx_len, len(padded)):
            ctx = padded[i - ctx_len : i]
            counts[ctx][padded[i]] += 1
            totals[ctx] += 1
    return MarkovModel(
        order=order,
        smoothing=smoothing,
        alphabet="".join(sorted(chars)),
        counts=dict(counts),
        context_totals=dict(totals),
        max_len=max_len,
    )


@dataclass
class BackoffMarkov:
    """Answers from the highest order whose context count reaches the
    threshold, else backs off one order at a time (order 1 always
    answers)."""

    models: list[MarkovModel]  # index i holds order i+1
    threshold: int = DEFAULT_BACKOFF_THRESHOLD
    max_len: int = 30

    @property
    def alphabet(self) -> str:
        return self.models[-1].alphabet

    def _pick_model(self, prefix: str) -> MarkovModel:
        for model in reversed(self.models):
            ctx = model._context(prefix)
            if model.context_totals.get(ctx, 0) >= self.threshold:
                return model
        return self.models[0]

    def log_prob(self, password: str) -> float:
        if len(password) > self.max_len:
            raise ValueError(
                f"password longer than max_len={self.max_len} is outside the key space"
            )
        logp = 0.0
        for i, ch in enumerate(password):
            if ch not in self.alphabet:
                return -math.inf
            model = self._pick_model(password[:i])
            p = model._cond_prob(model._context(password[:i]), ch)
            if p == 0.0:
                return -math.inf
            logp += math.log(p)
        if len(password) < self.max_len:
            model = self._pick_model(password)
            p_end = model._cond_prob(model._context(password), END)
            if p_end == 0.0:
                return -math.inf
            logp += math.log(p_end)
        return logp

    def sample(self, rng: np.random.Generator, n: int):
        out = []
        for _ in range(n):
            prefix = ""
            logp = 0.0
            while True:
                if len(prefix) == self.max_len:
                    break
                model = self._pick_model(prefix)
                symbols, probs = model._symbol_probs(model._context(prefix))
                pick = int(rng.choice(len(symbols), p=probs))
                logp += math.log(probs[pick]) if probs[pick] > 0 else -math.inf
                if symbols[pick] == END:
                    break
                prefix += symbols[pick]
            out.append((prefix, math.exp(logp)))
        return out


def train_backoff(
    passwords,
    max_order: int = 5,
    smoothing: float = DEFAULT_SMOOTHING,
    threshold: int = DEFAULT_BACKOFF_THRESHOLD,
    max_len: int = 30,
) -> BackoffMarkov:
    passwords = list(passwords)
    models = [
        train_markov(passwords, order, smoothing, max_len)
        for order in range(1, max_order + 1)
    ]
    return BackoffMarkov(models=models, threshold=threshold, max_len=max_len)


def markov_log_prob(model, password: str) -> float:
    return model.log_prob(password)


def min_auto(estimates) -> float:
    """Minimum guess number across a pool of models' estimates."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("empty estimate pool")
    return min(estimates)
