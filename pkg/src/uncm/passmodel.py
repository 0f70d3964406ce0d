"""Conditional autoregressive character-level password model.

A stack of LSTM layers over character embeddings with a softmax output
head. The configuration seed enters only through the initial hidden and
cell states (one dense projection pair per layer); with all-zero states
the model is the plain unconditional baseline. The distribution is a
proper mass function over strings of length at most max_len: sequences
end with an explicit END symbol whose probability is forced to 1 once
max_len characters have been produced.
"""

from __future__ import annotations

import string as _string
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .dims import ModelDims


class UnsupportedPassword(ValueError):
    """String outside the modeled key space (length or alphabet)."""


# input symbol 0 is START; output symbol 0 is END; characters shift by 1
START_ID = 0
END_ID = 0


@dataclass(frozen=True)
class CharVocab:
    """Ordered password alphabet plus the reserved START/END symbols."""

    chars: str
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("alphabet contains duplicate characters")
        object.__setattr__(self, "index", {c: i for i, c in enumerate(self.chars)})

    @classmethod
    def printable_ascii(cls) -> "CharVocab":
        return cls("".join(chr(c) for c in range(32, 127)))

    @property
    def n_chars(self) -> int:
        return len(self.chars)

    @property
    def n_symbols(self) -> int:
        # chars plus one reserved slot (START on the input side, END on
        # the output side)
        return len(self.chars) + 1

    def supports(self, password: str, max_len: int) -> bool:
        return len(password) <= max_len and all(c in self.index for c in password)

    def input_ids(self, password: str) -> list[int]:
        return [START_ID] + [self.index[c] + 1 for c in password]

    def target_ids(self, password: str) -> list[int]:
        return [self.index[c] + 1 for c in password] + [END_ID]

    def char_of_output(self, output_id: int) -> str:
        return self.chars[output_id - 1]


def add_password_model(
    params: nn.ParamSet,
    rng,
    dims: ModelDims,
    vocab: CharVocab,
    conditional: bool = True,
) -> None:
    """Register password-model parameters; `conditional=False` omits the
    seed-to-state projections (the baseline architecture)."""
    params.add(
        "pm.char_emb",
        nn.glorot(rng, vocab.n_symbols, dims.char_emb, (vocab.n_symbols, dims.char_emb)),
    )
    d_in = dims.char_emb
    for layer in range(dims.lstm_layers):
        nn.add_lstm(params, rng, f"pm.lstm{layer}", d_in, dims.lstm_hidden)
        d_in = dims.lstm_hidden
    nn.add_dense(params, rng, "pm.out", dims.lstm_hidden, vocab.n_symbols)
    if conditional:
        for layer in range(dims.lstm_layers):
            nn.add_dense(params, rng, f"pm.seed_h{layer}", dims.d_seed, dims.lstm_hidden)
            nn.add_dense(params, rng, f"pm.seed_c{layer}", dims.d_seed, dims.lstm_hidden)


@dataclass
class SeededModel:
    """Password model plus per-layer initial states.

    `seed_id == "baseline"` iff every initial state is exactly zero.
    Immutable after construction; scoring and sampling are reentrant.
    """

    params: nn.ParamSet
    dims: ModelDims
    vocab: CharVocab
    states: list[tuple[np.ndarray, np.ndarray]]
    seed_id: str = "baseline"

    def __post_init__(self):
        zero = all(
            not h.any() and not c.any() for h, c in self.states
        )
        if (self.seed_id == "baseline") != zero:
            raise ValueError(
                "baseline marker requires all-zero initial states and vice versa"
            )

    def log_prob(self, password: str) -> float:
        return float(log_probs(self, [password])[0])

    def log_probs(self, passwords: list[str]) -> np.ndarray:
        return log_probs(self, passwords)

    def sample(self, rng: np.random.Generator, n: int):
        return sample(self, rng, n)

    def enumerate_exact(self, alphabet: str | None = None, max_len: int | None = None):
        return enumerate_exact(self, alphabet, max_len)


def zero_states(dims: ModelDims) -> list[tuple[np.ndarray, np.ndarray]]:
    return [
        (np.zeros(dims.lstm_hidden), np.zeros(dims.lstm_hidden))
        for _ in range(dims.lstm_layers)
    ]


def baseline_model(params: nn.ParamSet, dims: ModelDims, vocab: CharVocab) -> SeededModel:
    return SeededModel(params, dims, vocab, zero_states(dims), seed_id="baseline")


def project_seed_tensors(
    params: nn.ParamSet, dims: ModelDims, psi: Tensor
) -> list[tuple[Tensor, Tensor]]:
    """Differentiable seed-to-state projections; psi is [1, d_seed]."""
    if psi.data.shape != (1, dims.d_seed):
        raise ag.ShapeError(
            f"seed shape {psi.data.shape} does not match (1, {dims.d_seed})"
        )
    states = []
    for layer in range(dims.lstm_layers):
        h0 = nn.dense(params, f"pm.seed_h{layer}", psi)
        c0 = nn.dense(params, f"pm.seed_c{layer}", psi)
        states.append((h0, c0))
    return states


def project_seed(
    psi: np.ndarray, params: nn.ParamSet, dims: ModelDims, vocab: CharVocab,
    seed_id: str = "seeded",
) -> SeededModel:
    """Seed a model: 2 state vectors per layer from the projection pairs."""
    psi = np.asarray(psi, dtype=np.float64).reshape(1, -1)
    with ag.no_grad():
        tensors = project_seed_tensors(params, dims, Tensor(psi))
    states = [(h.data[0].copy(), c.data[0].copy()) for h, c in tensors]
    if all(not h.any() and not c.any() for h, c in states):
        seed_id = "baseline"  # zero states ARE the baseline model
    return SeededModel(params, dims, vocab, states, seed_id=seed_id)


def _initial_state_tensors(model: SeededModel) -> list[tuple[Tensor, Tensor]]:
    return [(Tensor(h.reshape(1, -1)), Tensor(c.reshape(1, -1))) for h, c in model.states]


def _step(
    params: nn.ParamSet,
    dims: ModelDims,
    input_ids: np.ndarray,
    states: list[tuple[Tensor, Tensor]],
) -> tuple[Tensor, list[tuple[Tensor, Tensor]]]:
    """One decode step for a batch of input symbol ids."""
    x = ag.embedding(params["pm.char_emb"], input_ids)
    new_states = []
    for layer in range(dims.lstm_layers):
        h, c = nn.lstm_step(params, f"pm.lstm{layer}", x, *states[layer])
        new_states.append((h, c))
        x = h
    logits = nn.dense(params, "pm.out", x)
    return logits, new_states


def _log_softmax_rows(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return shifted, logz


def _validate(model: SeededModel, password: str) -> None:
    if not model.vocab.supports(password, model.dims.max_len):
        raise UnsupportedPassword(
            f"password of length {len(password)} outside modeled key space "
            f"(max_len={model.dims.max_len} or character not in alphabet)"
        )


def log_probs(model: SeededModel, passwords: list[str]) -> np.ndarray:
    """Joint log probability (natural log) of each password, END included."""
    for p in passwords:
        _validate(model, p)
    dims, vocab = model.dims, model.vocab
    n = len(passwords)
    if n == 0:
        return np.zeros(0)
    # steps per row: len chars plus the END step, which is forced (prob 1,
    # skipped) when the password already has max_len characters
    steps = np.array(
        [len(p) + (1 if len(p) < dims.max_len else 0) for p in passwords]
    )
    t_max = int(steps.max()) if len(steps) else 0
    inputs = np.zeros((n, max(t_max, 1)), dtype=np.int64)
    targets = np.zeros((n, max(t_max, 1)), dtype=np.int64)
    for row, p in enumerate(passwords):
        in_ids = vocab.input_ids(p)
        tg_ids = vocab.target_ids(p)
        k = int(steps[row])
        inputs[row, :k] = in_ids[:k]
        targets[row, :k] = tg_ids[:k]
    out = np.zeros(n)
    with ag.no_grad():
        states = _initial_state_tensors(model)
        for t in range(t_max):
            logits, states = _step(model.params, dims, inputs[:, t], states)
            shifted, logz = _log_softmax_rows(logits.data)
            picked = shifted[np.arange(n), targets[:, t]] - logz
            active = t < steps
            out[active] += picked[active]
    return out


def sample(model: SeededModel, rng: np.random.Generator, n: int):
    """n ancestral samples; returns [(password, probability)], with the
    probability accumulated from the same per-step log-softmax used by
    log_prob."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    dims, vocab = model.dims, model.vocab
    logp = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    inputs = np.full(n, START_ID, dtype=np.int64)
    chars: list[list[str]] = [[] for _ in range(n)]
    with ag.no_grad():
        states = _initial_state_tensors(model)
        for t in range(dims.max_len + 1):
            if not alive.any():
                break
            if t == dims.max_len:
                break  # END is forced with probability 1 for survivors
            logits, states = _step(model.params, dims, inputs, states)
            shifted, logz = _log_softmax_rows(logits.data)
            probs = np.exp(shifted - logz[:, None])
            u = rng.random(n)
            picks = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
            picks = np.minimum(picks, probs.shape[1] - 1)
            step_logp = shifted[np.arange(n), picks] - logz
            logp[alive] += step_logp[alive]
            ended = picks == END_ID
            for row in np.nonzero(alive & ~ended)[0]:
                chars[row].append(vocab.char_of_output(int(picks[row])))
            alive = alive & ~ended
            inputs = np.where(alive, picks, START_ID)
    passwords = ["".join(c) for c in chars]
    return [(p, float(np.exp(lp))) for p, lp in zip(passwords, logp)]


def enumerate_exact(
    model: SeededModel,
    alphabet: str | None = None,
    max_len: int | None = None,
    guard: int = 1_000_000,
):
    """Every string over `alphabet` up to `max_len` with its exact
    probability, sorted by decreasing probability (lexicographic
    tie-break)."""
    dims, vocab = model.dims, model.vocab
    alphabet = vocab.chars if alphabet is None else alphabet
    for c in alphabet:
        if c not in vocab.index:
            raise UnsupportedPassword(f"alphabet character {c!r} not in model vocab")
    max_len = dims.max_len if max_len is None else min(max_len, dims.max_len)
    total = 0
    width = len(alphabet)
    count = 1
    for _ in range(max_len + 1):
        total += count
        if total > guard:
            raise ValueError(
                f"restricted key space exceeds {guard} strings; "
                "use the Monte Carlo estimator instead"
            )
        count *= width
    out_ids = np.array([vocab.index[c] + 1 for c in alphabet], dtype=np.int64)
    results: list[tuple[str, float]] = []
    with ag.no_grad():
        prefixes = [""]
        logp = np.zeros(1)
        states = _initial_state_tensors(model)
        inputs = np.full(1, START_ID, dtype=np.int64)
        for depth in range(max_len + 1):
            logits, states = _step(model.params, dims, inputs, states)
            shifted, logz = _log_softmax_rows(logits.data)
            logsm = shifted - logz[:, None]
            if depth == dims.max_len:
                # forced END: completion probability equals the prefix's
                end_lp = logp
            else:
                end_lp = logp + logsm[:, END_ID]
            results.extend(
                (p, float(np.exp(lp))) for p, lp in zip(prefixes, end_lp)
            )
            if depth == max_len:
                break
            n_prev = len(prefixes)
            prefixes = [p + c for p in prefixes for c in alphabet]
            logp = (logp[:, None] + logsm[:, out_ids]).reshape(-1)
            rep = np.repeat(np.arange(n_prev), width)
            states = [
                (
                    Tensor(_rows(h.data, rep, n_prev)),
                    Tensor(_rows(c.data, rep, n_prev)),
                )
                for h, c in states
            ]
            inputs = np.tile(out_ids, n_prev)
    results.sort(key=lambda pair: (-pair[1], pair[0]))
    return results


def _rows(data: np.ndarray, rep: np.ndarray, n_prev: int) -> np.ndarray:
    # initial states may still be a single broadcastable row
    if data.shape[0] == 1 and n_prev > 1:
        data = np.broadcast_to(data, (n_prev, data.shape[1]))
    return data[rep]


def greedy_decode(model: SeededModel) -> str:
    """Argmax decode; used as an oracle for the enumeration's top rank."""
    dims, vocab = model.dims, model.vocab
    out: list[str] = []
    with ag.no_grad():
        states = _initial_state_tensors(model)
        inputs = np.full(1, START_ID, dtype=np.int64)
        for t in range(dims.max_len):
            logits, states = _step(model.params, dims, inputs, states)
            pick = int(np.argmax(logits.data[0]))
            if pick == END_ID:
                break
            out.append(vocab.char_of_output(pick))
            inputs = np.full(1, pick, dtype=np.int64)
    return "".join(out)


def sequence_loss(
    params: nn.ParamSet,
    dims: ModelDims,
    vocab: CharVocab,
    passwords: list[str],
    init_states: list[tuple[Tensor, Tensor]] | None = None,
) -> tuple[Tensor, int]:
    """Teacher-forced negative log likelihood, averaged per password.

    Returns (loss tensor, total character-step count) so callers can also
    report per-character values. Unsupported passwords must be filtered
    by the caller.
    """
    n = len(passwords)
    if n == 0:
        raise ValueError("empty password batch")
    steps = np.array([len(p) + (1 if len(p) < dims.max_len else 0) for p in passwords])
    t_max = int(steps.max())
    inputs = np.zeros((n, t_max), dtype=np.int64)
    targets = np.zeros((n, t_max), dtype=np.int64)
    mask = np.zeros((n, t_max))
    for row, p in enumerate(passwords):
        k = int(steps[row])
        inputs[row, :k] = vocab.input_ids(p)[:k]
        targets[row, :k] = vocab.target_ids(p)[:k]
        mask[row, :k] = 1.0
    if init_states is None:
        zeros = Tensor(np.zeros((1, dims.lstm_hidden)))
        states = [(zeros, zeros) for _ in range(dims.lstm_layers)]
    else:
        states = init_states
    total = None
    for t in range(t_max):
        logits, states = _step(params, dims, inputs[:, t], states)
        step_losses = ag.cross_entropy(logits, targets[:, t], mask[:, t])
        step_sum = ag.reduce_sum(step_losses)
        total = step_sum if total is None else total + step_sum
    loss = total * (1.0 / n)
    return loss, int(mask.sum())
