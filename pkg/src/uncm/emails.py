"""Per-user auxiliary-data sub-encoder.

Each email address is split into username / provider / domain; the
username runs through a character GRU, provider and domain through
embedding tables with an out-of-vocabulary fallback row, and the three
outputs are concatenated into one fixed-size value vector. Optional
extra modalities (e.g. a user's name) are encoded separately and added
elementwise.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .dims import ModelDims


class MalformedEmail(ValueError):
    """Address cannot be split into username/provider/domain."""


@dataclass(frozen=True)
class EmailParts:
    username: str
    provider: str  # includes the leading '@'
    domain: str  # includes the leading '.'; empty when absent

    def reassemble(self) -> str:
        return self.username + self.provider + self.domain


def parse_email(address: str) -> EmailParts:
    """Split a normalized (lowercased, trimmed) address at the last '@'
    and the last '.' after it."""
    addr = address.strip().lower()
    if not addr:
        raise MalformedEmail("empty address")
    at = addr.rfind("@")
    if at < 0:
        raise MalformedEmail(f"no '@' in {addr!r}")
    username = addr[:at]
    if not username:
        raise MalformedEmail(f"empty username in {addr!r}")
    rest = addr[at:]
    dot = rest.rfind(".")
    if dot <= 0:  # no '.' after the '@'
        return EmailParts(username, rest, "")
    return EmailParts(username, rest[:dot], rest[dot:])


OOV_INDEX = 0
UNK_CHAR_INDEX = 0


@dataclass
class Vocabs:
    """String-to-index tables built from training-collection counts.

    Index 0 is reserved: the out-of-vocabulary row for providers and
    domains, the unknown-character row for username characters.
    """

    provider: dict[str, int]
    domain: dict[str, int]
    chars: dict[str, int]

    @property
    def n_providers(self) -> int:
        return len(self.provider) + 1

    @property
    def n_domains(self) -> int:
        return len(self.domain) + 1

    @property
    def n_chars(self) -> int:
        return len(self.chars) + 1

    def provider_id(self, s: str) -> int:
        return self.provider.get(s, OOV_INDEX)

    def domain_id(self, s: str) -> int:
        return self.domain.get(s, OOV_INDEX)

    def char_ids(self, s: str, max_len: int) -> list[int]:
        return [self.chars.get(c, UNK_CHAR_INDEX) for c in s[:max_len]]

    def to_dict(self) -> dict:
        return {"provider": self.provider, "domain": self.domain, "chars": self.chars}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabs":
        return cls(
            provider={k: int(v) for k, v in d["provider"].items()},
            domain={k: int(v) for k, v in d["domain"].items()},
            chars={k: int(v) for k, v in d["chars"].items()},
        )


def build_vocabularies(collection, cutoff: int = 300) -> Vocabs:
    """In-vocabulary iff the account count across the collection reaches
    `cutoff`; username characters are all observed ones."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    leaks = getattr(collection, "leaks", collection)
    if not leaks:
        raise ValueError("empty collection")
    provider_counts: Counter[str] = Counter()
    domain_counts: Counter[str] = Counter()
    chars: set[str] = set()
    total = 0
    for leak in leaks:
        for account in leak.accounts:
            try:
                parts = parse_email(account.email)
            except MalformedEmail:
                continue
            total += 1
            provider_counts[parts.provider] += 1
            domain_counts[parts.domain] += 1
            chars.update(parts.username)
    if total == 0:
        raise ValueError("collection has no parseable account emails")
    provider = {
        s: i + 1
        for i, (s, _) in enumerate(
            sorted((s, c) for s, c in provider_counts.items() if c >= cutoff)
        )
    }
    domain = {
        s: i + 1
        for i, (s, _) in enumerate(
            sorted((s, c) for s, c in domain_counts.items() if c >= cutoff)
        )
    }
    char_map = {c: i + 1 for i, c in enumerate(sorted(chars))}
    return Vocabs(provider=provider, domain=domain, chars=char_map)


# -- parameters ---------------------------------------------------------


def add_sub_encoder(params: nn.ParamSet, rng, dims: ModelDims, vocabs: Vocabs) -> None:
    params.add(
        "sub.char_emb",
        nn.glorot(rng, vocabs.n_chars, dims.username_char_emb,
                  (vocabs.n_chars, dims.username_char_emb)),
    )
    nn.add_gru(params, rng, "sub.gru", dims.username_char_emb, dims.username_gru)
    params.add(
        "sub.provider_emb",
        nn.glorot(rng, vocabs.n_providers, dims.provider_emb,
                  (vocabs.n_providers, dims.provider_emb)),
    )
    params.add(
        "sub.domain_emb",
        nn.glorot(rng, vocabs.n_domains, dims.domain_emb,
                  (vocabs.n_domains, dims.domain_emb)),
    )
    for modality in dims.extra_modalities:
        params.add(
            f"sub.{modality}.char_emb",
            nn.glorot(rng, vocabs.n_chars, dims.username_char_emb,
                      (vocabs.n_chars, dims.username_char_emb)),
        )
        nn.add_gru(params, rng, f"sub.{modality}.gru",
                   dims.username_char_emb, dims.username_gru)
        nn.add_dense(params, rng, f"sub.{modality}.proj",
                     dims.username_gru, dims.d_value)


def _run_char_gru(
    params: nn.ParamSet,
    prefix: str,
    vocabs: Vocabs,
    dims: ModelDims,
    strings: list[str],
) -> Tensor:
    """Final GRU state over each string's characters, batched with
    per-row masking so padding never advances the state."""
    n = len(strings)
    ids = [vocabs.char_ids(s, dims.max_username_len) for s in strings]
    t_max = max((len(i) for i in ids), default=0)
    h = Tensor(np.zeros((n, dims.username_gru)))
    if t_max == 0:
        return h
    padded = np.zeros((n, t_max), dtype=np.int64)
    mask = np.zeros((n, t_max))
    for row, seq in enumerate(ids):
        padded[row, : len(seq)] = seq
        mask[row, : len(seq)] = 1.0
    for t in range(t_max):
        x = ag.embedding(params[f"{prefix}char_emb"], padded[:, t])
        h_new = nn.gru_step(params, f"{prefix}gru", x, h)
        m = Tensor(mask[:, t : t + 1])
        h = m * h_new + (1.0 - m) * h
    return h


def encode_accounts(
    params: nn.ParamSet, vocabs: Vocabs, dims: ModelDims, accounts
) -> Tensor:
    """Value vectors for a batch of accounts, one row per account.

    Raises MalformedEmail if any email fails to parse; callers that
    tolerate bad rows filter first.
    """
    parts = [parse_email(a.email) for a in accounts]
    usernames = [p.username for p in parts]
    gru_out = _run_char_gru(params, "sub.", vocabs, dims, usernames)
    prov_ids = np.array([vocabs.provider_id(p.provider) for p in parts], dtype=np.int64)
    dom_ids = np.array([vocabs.domain_id(p.domain) for p in parts], dtype=np.int64)
    prov = ag.embedding(params["sub.provider_emb"], prov_ids)
    dom = ag.embedding(params["sub.domain_emb"], dom_ids)
    out = ag.concat([gru_out, prov, dom], axis=-1)
    for modality in dims.extra_modalities:
        values = [
            (a.extra or {}).get(modality, "") if hasattr(a, "extra") else ""
            for a in accounts
        ]
        if not any(values):
            continue
        extra_h = _run_char_gru(params, f"sub.{modality}.", vocabs, dims, values)
        extra_proj = nn.dense(params, f"sub.{modality}.proj", extra_h)
        present = Tensor(
            np.array([[1.0] if v else [0.0] for v in values])
        )
        out = out + present * extra_proj
    return out


def encode_account(params: nn.ParamSet, vocabs: Vocabs, dims: ModelDims, account) -> np.ndarray:
    """Single-account value vector (inference convenience)."""
    with ag.no_grad():
        return encode_accounts(params, vocabs, dims, [account]).data[0]
