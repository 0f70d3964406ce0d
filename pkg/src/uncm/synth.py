"""Reproducible synthetic credential-leak collections.

Communities pair an email model (username token pool, provider/domain
pool) with a password source (token grammar or Markov source) so that
email features statistically predict the password distribution; the
ground-truth community label is stored in each leak's metadata. A
"signal-free" community draws random usernames and balanced providers
with passwords from the mixture of the real communities, for fallback
controls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .leaks import Account, CredentialLeak, LeakCollection
from .markov import MarkovModel


@dataclass
class TokenGrammar:
    """word [+ digits] passwords; uniform over words unless weighted."""

    words: list[str]
    weights: np.ndarray | None = None
    # (probability, digit count) suffix rules; probabilities sum to 1
    suffix_rules: tuple[tuple[float, int], ...] = ((0.7, 0), (0.3, 1))

    def __post_init__(self):
        total = sum(p for p, _ in self.suffix_rules)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"suffix rule probabilities sum to {total}, not 1")
        if self.weights is not None and len(self.weights) != len(self.words):
            raise ValueError("weights length must match words")

    def sample(self, rng: np.random.Generator) -> str:
        word = self.words[
            int(rng.choice(len(self.words), p=self.weights))
            if self.weights is not None
            else int(rng.integers(len(self.words)))
        ]
        u = rng.random()
        acc = 0.0
        n_digits = self.suffix_rules[-1][1]
        for p, nd in self.suffix_rules:
            acc += p
            if u < acc:
                n_digits = nd
                break
        return word + "".join(str(rng.integers(10)) for _ in range(n_digits))


@dataclass
class MarkovSource:
    """Passwords sampled from a character Markov chain fitted to a seed
    corpus."""

    model: MarkovModel

    def sample(self, rng: np.random.Generator) -> str:
        return self.model.sample(rng, 1)[0][0]


@dataclass
class MixtureSource:
    components: list
    weights: np.ndarray | None = None

    def sample(self, rng: np.random.Generator) -> str:
        i = int(rng.choice(len(self.components), p=self.weights))
        return self.components[i].sample(rng)


@dataclass
class EmailModel:
    username_tokens: list[str]
    providers: list[tuple[str, str]]  # (provider with '@', domain with '.')
    username_digit_prob: float = 0.5
    random_usernames: bool = False

    def sample(self, rng: np.random.Generator) -> str:
        if self.random_usernames:
            length = int(rng.integers(6, 11))
            alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
            username = "".join(
                alphabet[int(rng.integers(len(alphabet)))] for _ in range(length)
            )
        else:
            username = self.username_tokens[int(rng.integers(len(self.username_tokens)))]
            if rng.random() < self.username_digit_prob:
                username += str(rng.integers(100))
        provider, domain = self.providers[int(rng.integers(len(self.providers)))]
        return f"{username}{provider}{domain}"


@dataclass
class CompositeEmailModel:
    """Each account's email comes from one of several models, chosen
    uniformly; balanced evidence carries no community signal."""

    components: list[EmailModel]

    def sample(self, rng: np.random.Generator) -> str:
        return self.components[int(rng.integers(len(self.components)))].sample(rng)


@dataclass
class CommunitySpec:
    name: str
    email_model: object
    password_source: object
    n_leaks: int
    leak_size: tuple[int, int]  # inclusive range
    tld: str
    # per-leak fraction of accounts whose email comes from the shared
    # generic model instead (drawn uniformly from this range); passwords
    # stay community passwords. Real leaks always carry users whose
    # addresses say nothing about the community, and varying this
    # fraction is what teaches the encoder to hedge on weak evidence.
    generic_email_fraction: tuple[float, float] = (0.0, 0.0)
    generic_emails: EmailModel | None = None


@dataclass
class SynthSpec:
    communities: list[CommunitySpec] = field(default_factory=list)

    def validate(self) -> None:
        if not self.communities:
            raise ValueError("spec lists no communities")
        for c in self.communities:
            if c.n_leaks < 1 or c.leak_size[0] < 1 or c.leak_size[0] > c.leak_size[1]:
                raise ValueError(f"invalid community spec {c.name!r}")


def synth_generate(spec: SynthSpec, rng) -> LeakCollection:
    """Deterministic given the rng seed; leak ids carry the community."""
    spec.validate()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    leaks = []
    for community in spec.communities:
        lo, hi = community.leak_size
        f_lo, f_hi = community.generic_email_fraction
        for i in range(community.n_leaks):
            size = int(rng.integers(lo, hi + 1))
            generic_fraction = rng.uniform(f_lo, f_hi) if f_hi > 0 else 0.0
            accounts = []
            for _ in range(size):
                if generic_fraction and rng.random() < generic_fraction:
                    email = community.generic_emails.sample(rng)
                else:
                    email = community.email_model.sample(rng)
                accounts.append(
                    Account(email=email,
                            password=community.password_source.sample(rng))
                )
            leaks.append(
                CredentialLeak(
                    id=f"{community.name}-{i:03d}.{community.tld}",
                    accounts=accounts,
                    metadata={
                        "tld": community.tld,
                        "community": community.name,
                        "source": "synthetic",
                        "generic_email_fraction": round(generic_fraction, 4),
                    },
                )
            )
    return LeakCollection(leaks=leaks, provenance=["synthetic"])


# -- the two-community benchmark -------------------------------------------

_SYLLABLES_A = [
    "ka", "wo", "zy", "pol", "cze", "mir", "sla", "now", "ski", "wicz",
    "dar", "bor", "gos", "rza", "len",
]
_SYLLABLES_B = [
    "ing", "er", "ton", "son", "berg", "hill", "moor", "wick", "ley", "ford",
    "stone", "brook", "hart", "wood", "field",
]


def syllable_words(
    seed: int, syllables: list[str], n_words: int, min_syll: int = 2, max_syll: int = 3
) -> list[str]:
    """n distinct words concatenated from a syllabary; fixed internal
    seed makes pools reproducible independently of the data rng."""
    rng = np.random.default_rng(seed)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n_words:
        k = int(rng.integers(min_syll, max_syll + 1))
        w = "".join(syllables[int(rng.integers(len(syllables)))] for _ in range(k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def generic_email_model() -> EmailModel:
    """Community-neutral addresses: random usernames over providers both
    communities also use."""
    return EmailModel(
        username_tokens=[],
        providers=[("@mail", ".com"), ("@inbox", ".net"), ("@post", ".org")],
        random_usernames=True,
    )


def benchmark_spec(
    n_leaks: int = 50,
    leak_size: tuple[int, int] = (500, 500),
    n_words: int = 800,
    pool_seed: int = 7,
    generic_email_fraction: tuple[float, float] = (0.0, 0.75),
) -> SynthSpec:
    """Two communities whose email features predict disjoint password
    pools; the correlation the conditional model is meant to learn.

    Each leak additionally carries a random share of community-neutral
    addresses, so seeds of varying evidence strength occur in training
    and weak-evidence seeds learn to fall back toward the mixture.
    """
    words_a = syllable_words(pool_seed, _SYLLABLES_A, n_words)
    words_b = syllable_words(pool_seed + 1, _SYLLABLES_B, n_words)
    names_a = syllable_words(pool_seed + 2, _SYLLABLES_A, 200)
    names_b = syllable_words(pool_seed + 3, _SYLLABLES_B, 200)
    generic = generic_email_model()
    community_a = CommunitySpec(
        name="aurora",
        email_model=EmailModel(
            username_tokens=names_a,
            providers=[("@poczta", ".pl"), ("@onet", ".pl"), ("@interia", ".pl")],
        ),
        password_source=TokenGrammar(words=words_a),
        n_leaks=n_leaks,
        leak_size=leak_size,
        tld="pl",
        generic_email_fraction=generic_email_fraction,
        generic_emails=generic,
    )
    community_b = CommunitySpec(
        name="breeze",
        email_model=EmailModel(
            username_tokens=names_b,
            providers=[("@gmail", ".com"), ("@yahoo", ".com"), ("@aol", ".net")],
        ),
        password_source=TokenGrammar(words=words_b),
        n_leaks=n_leaks,
        leak_size=leak_size,
        tld="com",
        generic_email_fraction=generic_email_fraction,
        generic_emails=generic,
    )
    return SynthSpec(communities=[community_a, community_b])


def control_spec(
    base: SynthSpec, n_leaks: int = 8, leak_size: tuple[int, int] = (500, 500)
) -> SynthSpec:
    """Signal-free leaks: every email comes from the community-neutral
    model and passwords from the mixture of the base communities."""
    mixture = MixtureSource([c.password_source for c in base.communities])
    control = CommunitySpec(
        name="control",
        email_model=generic_email_model(),
        password_source=mixture,
        n_leaks=n_leaks,
        leak_size=leak_size,
        tld="net",
    )
    return SynthSpec(communities=[control])
